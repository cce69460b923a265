//! SMILES tokens, wrapped special symbols, vocabularies and their extension.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::LazyLock;

use regex::Regex;

use crate::mol::{parse_smiles, Diagnostic, DiagnosticKind};

pub const PAD: &str = "<pad>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
/// Specials every vocabulary carries.
pub const SPECIALS: [&str; 3] = [PAD, EOS, UNK];

const WRAP_OPEN: &str = "<sm_";
const WRAP_CLOSE: &str = ">";

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[[^\[\]]*\]|%[0-9]{2}|Cl|Br|[BCNOPSFIbcnops*()=#\-:/\\.0-9]").unwrap()
});

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChemToken {
    pub surface: String,
}

impl ChemToken {
    pub fn wrapped(&self) -> String {
        wrap_token(&self.surface)
    }
}

impl fmt::Display for ChemToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// `<sm_` + surface + `>`.
pub fn wrap_token(surface: &str) -> String {
    format!("{WRAP_OPEN}{surface}{WRAP_CLOSE}")
}

/// Surface of a wrapped token, if `s` has the wrapped form.
pub fn unwrap_token(s: &str) -> Option<&str> {
    s.strip_prefix(WRAP_OPEN)?.strip_suffix(WRAP_CLOSE).filter(|x| !x.is_empty())
}

/// Lexical split of a SMILES string: bracket atoms, `%nn`, `Cl`/`Br`, then
/// single characters. Surfaces concatenate back to the input.
pub fn tokenize_smiles(s: &str) -> Result<Vec<ChemToken>, Diagnostic> {
    let mut out = Vec::new();
    let mut at = 0;
    for m in TOKEN_RE.find_iter(s) {
        if m.start() != at {
            return Err(bad_char(s, at));
        }
        out.push(ChemToken { surface: m.as_str().to_string() });
        at = m.end();
    }
    if at != s.len() {
        return Err(bad_char(s, at));
    }
    Ok(out)
}

fn bad_char(s: &str, at: usize) -> Diagnostic {
    let c = s[at..].chars().next().unwrap_or(' ');
    let msg = match c {
        '[' => "unterminated '['".to_string(),
        '%' => "expected two digits after '%'".to_string(),
        _ => format!("unexpected character '{c}'"),
    };
    Diagnostic::new(DiagnosticKind::LexError, at, msg)
}

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("duplicate token {token:?} at ids {first} and {second}")]
    Duplicate { token: String, first: u32, second: u32 },
    #[error("missing special token {0:?}")]
    MissingSpecial(&'static str),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("plan file line {line}: {message}")]
    Plan { line: usize, message: String },
}

/// Token and id tables; ids are positions in `id_to_token`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token = Vec::new();
        let mut token_to_id = HashMap::new();
        for t in tokens {
            let t: String = t.into();
            let id = id_to_token.len() as u32;
            if let Some(&first) = token_to_id.get(&t) {
                return Err(VocabError::Duplicate { token: t, first, second: id });
            }
            token_to_id.insert(t.clone(), id);
            id_to_token.push(t);
        }
        for s in SPECIALS {
            if !token_to_id.contains_key(s) {
                return Err(VocabError::MissingSpecial(s));
            }
        }
        Ok(Vocabulary { id_to_token, token_to_id })
    }

    /// Specials first, then `tokens` in order.
    pub fn with_specials<I, S>(tokens: I) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Vocabulary::from_tokens(SPECIALS.iter().map(|s| s.to_string()).chain(tokens.into_iter().map(Into::into)))
    }

    /// One token per line; the line number is the id.
    pub fn read(r: impl BufRead) -> Result<Vocabulary, VocabError> {
        let lines: Result<Vec<String>, _> = r.lines().collect();
        Vocabulary::from_tokens(lines?)
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.id_to_token {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn unk_id(&self) -> u32 {
        self.token_to_id[UNK]
    }

    pub fn pad_id(&self) -> u32 {
        self.token_to_id[PAD]
    }

    pub fn eos_id(&self) -> u32 {
        self.token_to_id[EOS]
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.token(id).is_some_and(|t| SPECIALS.contains(&t))
    }
}

/// Added chemical tokens and the base row each one's embedding copies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabExtensionPlan {
    pub base_size: usize,
    pub added_tokens: Vec<String>,
    pub init_source: Vec<u32>,
}

impl VocabExtensionPlan {
    /// Id assigned to the `k`-th added token.
    pub fn added_id(&self, k: usize) -> u32 {
        (self.base_size + k) as u32
    }

    /// `base_size=<n>` header, then `token<TAB>source` lines.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "base_size={}", self.base_size)?;
        for (t, s) in self.added_tokens.iter().zip(&self.init_source) {
            writeln!(w, "{t}\t{s}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<VocabExtensionPlan, VocabError> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let base_size = header
            .strip_prefix("base_size=")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| VocabError::Plan { line: 1, message: "expected base_size=<n>".into() })?;
        let mut plan = VocabExtensionPlan { base_size, added_tokens: Vec::new(), init_source: Vec::new() };
        for (i, line) in lines.enumerate() {
            let line = line?;
            let err = |m: &str| VocabError::Plan { line: i + 2, message: m.into() };
            let (t, s) = line.rsplit_once('\t').ok_or_else(|| err("expected token<TAB>source"))?;
            let s: u32 = s.parse().map_err(|_| err("bad source id"))?;
            if s as usize >= base_size {
                return Err(err("source id outside the base vocabulary"));
            }
            plan.added_tokens.push(t.to_string());
            plan.init_source.push(s);
        }
        Ok(plan)
    }
}

/// Appends every wrapped token seen in `corpus` that `base` lacks, most
/// frequent first (ties by text). The `k`-th addition copies base row
/// `k mod base_size`. Strings that fail to lex are skipped and counted.
pub fn extend_vocabulary<'a, I>(base: &Vocabulary, corpus: I) -> (Vocabulary, VocabExtensionPlan, usize)
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut skipped = 0;
    for s in corpus {
        match tokenize_smiles(s) {
            Ok(toks) => {
                for t in toks {
                    let w = t.wrapped();
                    if base.id(&w).is_none() {
                        *counts.entry(w).or_insert(0) += 1;
                    }
                }
            }
            Err(_) => skipped += 1,
        }
    }
    let mut added: Vec<(String, u64)> = counts.into_iter().collect();
    added.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let base_size = base.len();
    let added_tokens: Vec<String> = added.into_iter().map(|(t, _)| t).collect();
    let init_source = (0..added_tokens.len()).map(|k| (k % base_size.max(1)) as u32).collect();
    let mut tokens = base.id_to_token.clone();
    tokens.extend(added_tokens.iter().cloned());
    let vocab = Vocabulary::from_tokens(tokens).expect("added tokens are new");
    (vocab, VocabExtensionPlan { base_size, added_tokens, init_source }, skipped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Text,
    Smiles,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub content: String,
}

impl Segment {
    pub fn text(s: impl Into<String>) -> Segment {
        Segment { kind: SegmentKind::Text, content: s.into() }
    }

    pub fn smiles(s: impl Into<String>) -> Segment {
        Segment { kind: SegmentKind::Smiles, content: s.into() }
    }
}

/// Subword tokenizer used for prose segments.
pub trait TextTokenizer {
    fn encode(&self, text: &str, vocab: &Vocabulary) -> Vec<u32>;
    fn decode(&self, ids: &[u32], vocab: &Vocabulary) -> String;
}

/// Whitespace-split words; unknown words fall back to `<0xNN>` byte tokens
/// (or the unknown id when those are absent). Decoding joins words with a
/// single space, so whitespace runs are not preserved.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl TextTokenizer for WhitespaceTokenizer {
    fn encode(&self, text: &str, vocab: &Vocabulary) -> Vec<u32> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            if let Some(id) = vocab.id(word) {
                out.push(id);
                continue;
            }
            for b in word.bytes() {
                out.push(vocab.id(&format!("<0x{b:02X}>")).unwrap_or(vocab.unk_id()));
            }
        }
        out
    }

    fn decode(&self, ids: &[u32], vocab: &Vocabulary) -> String {
        let mut words: Vec<String> = Vec::new();
        let mut bytes: Vec<u8> = Vec::new();
        let flush = |bytes: &mut Vec<u8>, words: &mut Vec<String>| {
            if !bytes.is_empty() {
                words.push(String::from_utf8_lossy(bytes).into_owned());
                bytes.clear();
            }
        };
        for &id in ids {
            let Some(t) = vocab.token(id) else { continue };
            if let Some(b) = t
                .strip_prefix("<0x")
                .and_then(|h| h.strip_suffix('>'))
                .and_then(|h| u8::from_str_radix(h, 16).ok())
            {
                bytes.push(b);
                continue;
            }
            flush(&mut bytes, &mut words);
            if !vocab.is_special(id) {
                words.push(t.to_string());
            }
        }
        flush(&mut bytes, &mut words);
        words.join(" ")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownPolicy {
    #[default]
    Substitute,
    Fail,
}

#[derive(Debug, thiserror::Error)]
pub enum MixedError {
    #[error("smiles segment {segment}: {diagnostic}")]
    Lex { segment: usize, diagnostic: Diagnostic },
    #[error("smiles segment {segment}: token {token:?} not in vocabulary")]
    Unknown { segment: usize, token: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    /// Chemical tokens replaced by the unknown id.
    pub unknown: usize,
}

/// Prose through `text_tok`; SMILES as wrapped chemical tokens.
pub fn tokenize_mixed(
    segments: &[Segment],
    text_tok: &dyn TextTokenizer,
    vocab: &Vocabulary,
    policy: UnknownPolicy,
) -> Result<Encoded, MixedError> {
    let mut out = Encoded::default();
    for (i, seg) in segments.iter().enumerate() {
        match seg.kind {
            SegmentKind::Text => out.ids.extend(text_tok.encode(&seg.content, vocab)),
            SegmentKind::Smiles => {
                let toks =
                    tokenize_smiles(&seg.content).map_err(|diagnostic| MixedError::Lex { segment: i, diagnostic })?;
                for t in toks {
                    let w = t.wrapped();
                    match vocab.id(&w) {
                        Some(id) => out.ids.push(id),
                        None if policy == UnknownPolicy::Substitute => {
                            out.ids.push(vocab.unk_id());
                            out.unknown += 1;
                        }
                        None => return Err(MixedError::Unknown { segment: i, token: w }),
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Splits ids back into segments: runs of wrapped tokens become SMILES,
/// everything else is decoded by `text_tok`.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary, text_tok: &dyn TextTokenizer) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    let mut text_run: Vec<u32> = Vec::new();
    let mut smiles = String::new();
    let flush_text = |run: &mut Vec<u32>, out: &mut Vec<Segment>| {
        if !run.is_empty() {
            let s = text_tok.decode(run, vocab);
            if !s.is_empty() {
                out.push(Segment::text(s));
            }
            run.clear();
        }
    };
    for &id in ids {
        match vocab.token(id).and_then(unwrap_token) {
            Some(surface) => {
                flush_text(&mut text_run, &mut out);
                smiles.push_str(surface);
            }
            None => {
                if !smiles.is_empty() {
                    out.push(Segment::smiles(std::mem::take(&mut smiles)));
                }
                text_run.push(id);
            }
        }
    }
    flush_text(&mut text_run, &mut out);
    if !smiles.is_empty() {
        out.push(Segment::smiles(smiles));
    }
    out
}

fn is_smiles_word(w: &str) -> bool {
    if tokenize_smiles(w).is_err() {
        return false;
    }
    let Ok(m) = parse_smiles(w) else {
        return false;
    };
    m.heavy_atom_count() >= 2 || w.contains(|c: char| matches!(c, '[' | ']' | '(' | ')' | '%') || c.is_ascii_digit())
}

/// Labels whitespace-delimited words that parse as SMILES (two or more heavy
/// atoms, or any bracket, ring or branch character); the rest, including all
/// whitespace, is text. One trailing punctuation mark that stops a word from
/// parsing is left in the text.
pub fn detect_smiles_spans(text: &str) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    let mut text_start = 0;
    let push_text = |out: &mut Vec<Segment>, s: &str| {
        if s.is_empty() {
            return;
        }
        match out.last_mut() {
            Some(Segment { kind: SegmentKind::Text, content }) => content.push_str(s),
            _ => out.push(Segment::text(s)),
        }
    };
    let mut i = 0;
    while i < text.len() {
        if text[i..].starts_with(char::is_whitespace) {
            i += text[i..].chars().next().unwrap().len_utf8();
            continue;
        }
        let end = text[i..].find(char::is_whitespace).map_or(text.len(), |e| i + e);
        let word = &text[i..end];
        let bare = word.strip_suffix(['.', ',', ';', ':', '?', '!']).filter(|b| !b.is_empty());
        let hit = if is_smiles_word(word) {
            Some(word)
        } else {
            bare.filter(|b| is_smiles_word(b))
        };
        if let Some(sm) = hit {
            push_text(&mut out, &text[text_start..i]);
            out.push(Segment::smiles(sm));
            text_start = i + sm.len();
        }
        i = end;
    }
    push_text(&mut out, &text[text_start..]);
    out
}
