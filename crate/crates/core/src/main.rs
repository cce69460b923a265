use std::fs::File;
use std::io::{self, BufRead, BufReader, LineWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemtext::dataset::{build_index, DatasetError, Mixture, MixtureSpec};
use chemtext::metrics::{
    align_predictions, default_config_digests, generation_suite, score_predictions, sole_template, GenerationConfig,
    MatchMode, PredictionRecord, ScoreOptions,
};
use chemtext::mol::{canonicalize, CanonOptions};
use chemtext::pattern::FilterConfig;
use chemtext::prompt::{format_instance, DecodeMode, TaskInstance, TaskKind, TemplateSet};
use chemtext::tokenizer::tokenize_smiles;
use clap::{Args, Parser, Subcommand};

/// Chemical-text toolkit: canonical SMILES, tokenization, prompt
/// formatting, scoring and dataset mixing.
#[derive(Parser)]
#[command(name = "chemtext", disable_version_flag = true)]
struct Cli {
    /// Print the version and metric configuration digests.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical SMILES per stdin line.
    Canon {
        #[arg(long)]
        ignore_stereo: bool,
    },
    /// Space-joined SMILES tokens per stdin line.
    Tokenize {
        /// Emit `<sm_...>` forms.
        #[arg(long)]
        wrap: bool,
        /// Print INVALID lines instead of stopping on a lex error.
        #[arg(long)]
        lenient: bool,
    },
    /// Render instance records into input/target pairs.
    Format {
        #[arg(long)]
        data: PathBuf,
        /// Template file; the bundled set when omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score predictions against gold records.
    Score(ScoreArgs),
    /// Generation suite over SMILES files.
    GenMetrics(GenArgs),
    /// Build `.nidx` sidecar indices.
    Index { files: Vec<PathBuf> },
    /// Stream sampled records of a mixture.
    Mix {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        /// Overrides the mixture file's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    task: TaskKind,
    /// Gold instance records (JSONL).
    #[arg(long)]
    gold: PathBuf,
    /// Predictions (JSONL of {"id", "output"} or {"id", "outputs": [...]}).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long = "match", default_value = "canonical")]
    match_mode: MatchMode,
    /// Template id that produced the outputs.
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Label set, `|`-separated.
    #[arg(long)]
    labels: Option<String>,
    /// Disable alignment when decoding span markup.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Pattern blacklist, one pattern per line.
    #[arg(long)]
    filters: Option<PathBuf>,
    /// Unique@k; defaults to min(10000, generated count).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    p: u32,
    /// Emit one MetricReport per line instead of the stats object.
    #[arg(long)]
    reports: bool,
}

enum Failure {
    Usage(String),
    Input(String),
    Digest(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Digest(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Digest(m) => m,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::DigestMismatch { .. } | DatasetError::BadIndex { .. } => Failure::Digest(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn stdout() -> LineWriter<io::StdoutLock<'static>> {
    LineWriter::new(io::stdout().lock())
}

fn load_templates(path: Option<&Path>) -> Result<TemplateSet, Failure> {
    match path {
        None => Ok(TemplateSet::bundled()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            TemplateSet::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
        }
    }
}

fn canon(ignore_stereo: bool) -> Outcome {
    let opts = CanonOptions { ignore_stereo };
    let mut out = stdout();
    let mut invalid = 0usize;
    for line in io::stdin().lock().lines() {
        let line = line?;
        match canonicalize(line.trim_end_matches('\r'), &opts) {
            Ok(c) => writeln!(out, "{c}")?,
            Err(d) => {
                invalid += 1;
                writeln!(out, "INVALID\t{}", d.short())?;
            }
        }
    }
    eprintln!("invalid: {invalid}");
    Ok(())
}

fn tokenize(wrap: bool, lenient: bool) -> Outcome {
    let mut out = stdout();
    for (n, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        match tokenize_smiles(line.trim_end_matches('\r')) {
            Ok(toks) => {
                let parts: Vec<String> =
                    toks.iter().map(|t| if wrap { t.wrapped() } else { t.surface.clone() }).collect();
                writeln!(out, "{}", parts.join(" "))?;
            }
            Err(d) if lenient => writeln!(out, "INVALID\t{}", d.short())?,
            Err(d) => return Err(Failure::Input(format!("line {}: {}", n + 1, d.short()))),
        }
    }
    Ok(())
}

fn read_instances(path: &Path) -> Result<Vec<TaskInstance>, Failure> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(&line)
            .map_err(|e| Failure::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(inst);
    }
    Ok(out)
}

fn format(data: &Path, templates: Option<&Path>, seed: u64) -> Outcome {
    let set = load_templates(templates)?;
    let mut out = stdout();
    for (n, line) in open(data)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| Failure::Input(format!("{}:{}: {m}", data.display(), n + 1));
        let inst: TaskInstance = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let tmpl = set.select(&inst, seed).ok_or_else(|| at(format!("no template for task {}", inst.task)))?;
        let pair = format_instance(&inst, tmpl).map_err(|e| at(e.to_string()))?;
        writeln!(out, "{}", serde_json::to_string(&pair).expect("pair serializes"))?;
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, Failure> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line).map_err(|e| Failure::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(p);
    }
    Ok(out)
}

fn score(a: &ScoreArgs) -> Outcome {
    let golds = read_instances(&a.gold)?;
    let preds = read_predictions(&a.pred)?;
    align_predictions(a.task, &golds, &preds).map_err(|e| Failure::Input(e.to_string()))?;
    let set = load_templates(a.templates.as_deref())?;
    let template = match &a.template {
        Some(id) => Some(set.get(id).cloned().ok_or_else(|| Failure::Usage(format!("unknown template {id:?}")))?),
        None => sole_template(&set, &golds),
    };
    let opts = ScoreOptions {
        template,
        labels: a.labels.as_ref().map(|l| l.split('|').map(str::to_string).collect()),
        k: a.k,
        match_mode: a.match_mode,
        decode_mode: if a.strict { DecodeMode::Strict } else { DecodeMode::Aligned },
    };
    let outputs: Vec<Vec<String>> = preds.into_iter().map(PredictionRecord::into_outputs).collect();
    let reports = score_predictions(&golds, &outputs, &opts).map_err(|e| Failure::Input(e.to_string()))?;
    let mut out = stdout();
    for r in reports {
        if r.degenerate {
            eprintln!("{}: degenerate value", r.metric_name);
        }
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

fn read_smiles(path: &Path) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let s = line.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    }
    Ok(out)
}

fn gen_metrics(a: &GenArgs) -> Outcome {
    let gen = read_smiles(&a.gen)?;
    let train = a.train.as_deref().map(read_smiles).transpose()?.unwrap_or_default();
    let test = match a.test.as_deref() {
        Some(p) => {
            let t = read_smiles(p)?;
            if t.is_empty() {
                return Err(Failure::Input(format!("{}: empty test set", p.display())));
            }
            t
        }
        None => Vec::new(),
    };
    let mut filters = FilterConfig::default();
    if let Some(p) = &a.filters {
        filters.load_blacklist(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    let cfg = GenerationConfig { k: a.k.unwrap_or(gen.len().min(10_000)), p: a.p, filters, ..Default::default() };
    let stats = generation_suite(&gen, &train, &test, &cfg).map_err(|e| Failure::Input(e.to_string()))?;
    let mut out = stdout();
    if a.reports {
        for r in stats.reports(&cfg.digest()) {
            writeln!(out, "{}", r.to_json_line())?;
        }
    } else {
        writeln!(out, "{}", serde_json::to_string(&stats).expect("stats serialize"))?;
    }
    Ok(())
}

fn index(files: &[PathBuf]) -> Outcome {
    if files.is_empty() {
        return Err(Failure::Usage("index needs at least one file".into()));
    }
    let mut out = stdout();
    for f in files {
        let idx = build_index(f)?;
        writeln!(out, "{}\t{}", f.display(), idx.record_count())?;
    }
    Ok(())
}

fn mix(spec: &Path, n: usize, seed: Option<u64>) -> Outcome {
    let mut spec = MixtureSpec::load(spec).map_err(|e| match e {
        DatasetError::Io { .. } => Failure::Input(e.to_string()),
        other => Failure::Usage(other.to_string()),
    })?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let mixture = Mixture::open(spec)?;
    let mut out = stdout();
    for (c, r) in mixture.sample(n) {
        out.write_all(mixture.record(c, r)?)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn version() -> Outcome {
    let mut out = stdout();
    writeln!(out, "chemtext {}", env!("CARGO_PKG_VERSION"))?;
    for (name, digest) in default_config_digests() {
        writeln!(out, "{name}\t{digest}")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if cli.version {
        return version();
    }
    match cli.command {
        None => Err(Failure::Usage("missing subcommand; see --help".into())),
        Some(Command::Canon { ignore_stereo }) => canon(ignore_stereo),
        Some(Command::Tokenize { wrap, lenient }) => tokenize(wrap, lenient),
        Some(Command::Format { data, templates, seed }) => format(&data, templates.as_deref(), seed),
        Some(Command::Score(a)) => score(&a),
        Some(Command::GenMetrics(a)) => gen_metrics(&a),
        Some(Command::Index { files }) => index(&files),
        Some(Command::Mix { spec, n, seed }) => mix(&spec, n, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.message().is_empty() => ExitCode::from(f.code()),
        Err(f) => {
            eprintln!("chemtext: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
