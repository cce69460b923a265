//! A small substructure-query language, a backtracking matcher, and the
//! structural filters used by the generation metrics.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::mol::rings::{ring_atoms, sssr};
use crate::mol::{normalize, BondOrder, Diagnostic, DiagnosticKind, Element, Molecule};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomPredicate {
    /// `None` is the wildcard.
    pub element: Option<Element>,
    pub aromatic: Option<bool>,
    pub in_ring: bool,
    pub degree: Option<u8>,
    pub charge: Option<i8>,
}

impl AtomPredicate {
    pub fn matches(&self, mol: &Molecule, atom: usize, in_ring: &[bool]) -> bool {
        let a = mol.atom(atom);
        self.element.is_none_or(|e| e == a.element)
            && self.aromatic.is_none_or(|ar| ar == a.aromatic)
            && (!self.in_ring || in_ring[atom])
            && self.degree.is_none_or(|d| d as usize == mol.degree(atom))
            && self.charge.is_none_or(|c| c == a.charge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondPredicate {
    /// Unwritten bond: single or aromatic.
    Implicit,
    Single,
    Double,
    Triple,
    Aromatic,
    Any,
}

impl BondPredicate {
    pub fn matches(self, order: BondOrder) -> bool {
        match self {
            BondPredicate::Implicit => matches!(order, BondOrder::Single | BondOrder::Aromatic),
            BondPredicate::Single => order == BondOrder::Single,
            BondPredicate::Double => order == BondOrder::Double,
            BondPredicate::Triple => order == BondOrder::Triple,
            BondPredicate::Aromatic => order == BondOrder::Aromatic,
            BondPredicate::Any => true,
        }
    }
}

/// A connected query graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    pub nodes: Vec<AtomPredicate>,
    pub edges: Vec<(usize, usize, BondPredicate)>,
}

impl Pattern {
    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn lex_error(pos: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagnosticKind::LexError, pos, msg)
}

struct PatternParser<'a> {
    text: &'a str,
    pos: usize,
    nodes: Vec<AtomPredicate>,
    edges: Vec<(usize, usize, BondPredicate)>,
    rings: Vec<Option<(usize, Option<BondPredicate>, usize)>>,
}

impl PatternParser<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn unsupported(&self) -> Diagnostic {
        let tok: String = self.text[self.pos..].chars().take(1).collect();
        lex_error(self.pos, format!("unsupported token '{tok}'"))
    }

    fn organic(&mut self) -> Option<AtomPredicate> {
        let rest = &self.text[self.pos..];
        let (sym, aromatic, len) = if rest.starts_with("Cl") {
            ("Cl", false, 2)
        } else if rest.starts_with("Br") {
            ("Br", false, 2)
        } else {
            match rest.chars().next()? {
                c @ ('C' | 'N' | 'O' | 'S' | 'F' | 'I') => (&rest[..1], false, c.len_utf8()),
                'c' => ("C", true, 1),
                'n' => ("N", true, 1),
                'o' => ("O", true, 1),
                's' => ("S", true, 1),
                '*' => {
                    self.pos += 1;
                    return Some(AtomPredicate::default());
                }
                _ => return None,
            }
        };
        self.pos += len;
        Some(AtomPredicate {
            element: Element::from_symbol(sym),
            aromatic: if sym == "F" || sym == "Cl" || sym == "Br" || sym == "I" {
                None
            } else {
                Some(aromatic)
            },
            ..Default::default()
        })
    }

    fn bracket(&mut self) -> Result<AtomPredicate, Diagnostic> {
        let open = self.pos;
        self.pos += 1;
        let mut pred = AtomPredicate::default();
        let mut any = false;
        loop {
            match self.peek() {
                None => return Err(lex_error(open, "unterminated '['")),
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                Some('R') => {
                    self.pos += 1;
                    pred.in_ring = true;
                }
                Some('D') => {
                    self.pos += 1;
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                    let n = self.text[start..self.pos]
                        .parse::<u8>()
                        .map_err(|_| lex_error(start, "expected degree after 'D'"))?;
                    pred.degree = Some(n);
                }
                Some(sign @ ('+' | '-')) => {
                    self.pos += 1;
                    let mut n: i8 = 1;
                    if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                        self.pos += 1;
                        n = d as i8;
                    }
                    pred.charge = Some(if sign == '+' { n } else { -n });
                }
                Some(c) => {
                    let rest = &self.text[self.pos..];
                    let two = rest.get(..2).filter(|t| {
                        c.is_ascii_uppercase() && t.as_bytes()[1].is_ascii_lowercase() && *t != "Cl" && *t != "Br"
                    });
                    if let Some(t) = two {
                        return Err(lex_error(self.pos, format!("unsupported element '{t}'")));
                    }
                    let save = self.pos;
                    let Some(p) = self.organic() else {
                        self.pos = save;
                        return Err(self.unsupported());
                    };
                    // Bracketed halogens and wildcards keep their aromatic freedom.
                    pred.element = p.element;
                    pred.aromatic = p.aromatic;
                }
            }
            any = true;
        }
        if !any {
            return Err(lex_error(open, "empty bracket atom"));
        }
        Ok(pred)
    }

    fn bond(&mut self) -> Option<BondPredicate> {
        let b = match self.peek()? {
            '-' => BondPredicate::Single,
            '=' => BondPredicate::Double,
            '#' => BondPredicate::Triple,
            ':' => BondPredicate::Aromatic,
            '~' => BondPredicate::Any,
            _ => return None,
        };
        self.pos += 1;
        Some(b)
    }

    fn ring_label(&mut self) -> Result<Option<usize>, Diagnostic> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                self.pos += 1;
                Ok(Some(c as usize - '0' as usize))
            }
            Some('%') => {
                let start = self.pos;
                let digits = self.text.get(self.pos + 1..self.pos + 3).filter(|d| d.bytes().all(|b| b.is_ascii_digit()));
                let Some(d) = digits else {
                    return Err(lex_error(start, "expected two digits after '%'"));
                };
                self.pos += 3;
                Ok(Some(d.parse().unwrap()))
            }
            _ => Ok(None),
        }
    }

    fn run(mut self) -> Result<Pattern, Diagnostic> {
        if self.text.is_empty() {
            return Err(Diagnostic::new(DiagnosticKind::EmptyInput, 0, "empty pattern"));
        }
        let mut prev: Option<usize> = None;
        let mut stack: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending: Option<(BondPredicate, usize)> = None;
        while let Some(c) = self.peek() {
            let at = self.pos;
            if c == '(' {
                if prev.is_none() || pending.is_some() {
                    return Err(lex_error(at, "branch without an atom"));
                }
                self.pos += 1;
                stack.push((prev, at));
                continue;
            }
            if c == ')' {
                let Some((p, _)) = stack.pop() else {
                    return Err(Diagnostic::new(DiagnosticKind::UnmatchedParen, at, "unmatched ')'"));
                };
                if pending.is_some() {
                    return Err(lex_error(at, "dangling bond"));
                }
                self.pos += 1;
                prev = p;
                continue;
            }
            if let Some(b) = self.bond() {
                if pending.is_some() || prev.is_none() {
                    return Err(lex_error(at, "misplaced bond"));
                }
                pending = Some((b, at));
                continue;
            }
            if let Some(label) = self.ring_label()? {
                let Some(p) = prev else {
                    return Err(lex_error(at, "ring label without an atom"));
                };
                if label >= self.rings.len() {
                    self.rings.resize(label + 1, None);
                }
                let bond = pending.take().map(|(b, _)| b);
                match self.rings[label].take() {
                    None => self.rings[label] = Some((p, bond, at)),
                    Some((q, b2, _)) => {
                        if q == p {
                            return Err(lex_error(at, "ring closure to the same atom"));
                        }
                        let b = match (bond, b2) {
                            (Some(x), Some(y)) if x != y => return Err(lex_error(at, "conflicting ring bonds")),
                            (x, y) => x.or(y).unwrap_or(BondPredicate::Implicit),
                        };
                        self.edges.push((q, p, b));
                    }
                }
                continue;
            }
            let atom = if c == '[' {
                self.bracket()?
            } else {
                match self.organic() {
                    Some(a) => a,
                    None => return Err(self.unsupported()),
                }
            };
            let idx = self.nodes.len();
            self.nodes.push(atom);
            if let Some(p) = prev {
                let b = pending.take().map(|(b, _)| b).unwrap_or(BondPredicate::Implicit);
                self.edges.push((p, idx, b));
            }
            prev = Some(idx);
        }
        if let Some((_, at)) = stack.pop() {
            return Err(Diagnostic::new(DiagnosticKind::UnmatchedParen, at, "unclosed '('"));
        }
        if let Some((_, at)) = pending {
            return Err(lex_error(at, "dangling bond"));
        }
        if let Some((_, _, at)) = self.rings.iter().flatten().next() {
            return Err(Diagnostic::new(DiagnosticKind::UnclosedRing, *at, "ring label never closed"));
        }
        Ok(Pattern { source: self.text.to_string(), nodes: self.nodes, edges: self.edges })
    }
}

/// Parses the query subset: organic atoms `C c N n O o S s F Cl Br I *`,
/// bracket atoms combining those with `R`, `D<n>` and charges, bonds
/// `- = # : ~`, branches and ring closures.
pub fn parse_pattern(text: &str) -> Result<Pattern, Diagnostic> {
    PatternParser { text, pos: 0, nodes: Vec::new(), edges: Vec::new(), rings: Vec::new() }.run()
}

/// A target molecule prepared once for repeated matching.
pub struct Target {
    mol: Molecule,
    in_ring: Vec<bool>,
}

impl Target {
    pub fn new(mol: &Molecule) -> Target {
        let mol = normalize(mol).unwrap_or_else(|_| mol.clone());
        let in_ring = ring_atoms(&mol);
        Target { mol, in_ring }
    }
}

struct Matcher<'a> {
    p: &'a Pattern,
    t: &'a Target,
    order: Vec<usize>,
    /// For each position in `order`, edges back to earlier-placed nodes.
    back: Vec<Vec<(usize, BondPredicate)>>,
    map: Vec<usize>,
    used: Vec<bool>,
    found: HashSet<Vec<usize>>,
}

impl Matcher<'_> {
    fn extend(&mut self, k: usize) {
        if k == self.order.len() {
            let mut set: Vec<usize> = self.map.clone();
            set.sort_unstable();
            self.found.insert(set);
            return;
        }
        let node = self.order[k];
        let mol = &self.t.mol;
        let cands: Vec<usize> = match self.back[k].first() {
            Some(&(anchor, _)) => mol.neighbors(self.map[anchor]).iter().map(|nb| nb.atom).collect(),
            None => (0..mol.atom_count()).collect(),
        };
        for a in cands {
            if self.used[a] || !self.p.nodes[node].matches(mol, a, &self.t.in_ring) {
                continue;
            }
            let ok = self.back[k].iter().all(|&(other, pred)| {
                mol.bond_between(self.map[other], a).is_some_and(|b| pred.matches(mol.bond(b).order))
            });
            if !ok {
                continue;
            }
            self.used[a] = true;
            self.map[node] = a;
            self.extend(k + 1);
            self.used[a] = false;
        }
    }
}

fn search_order(p: &Pattern) -> Vec<usize> {
    let mut order = Vec::with_capacity(p.nodes.len());
    let mut seen = vec![false; p.nodes.len()];
    for start in 0..p.nodes.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(x, y, _) in &p.edges {
                let v = if x == u { y } else if y == u { x } else { continue };
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order
}

/// Distinct atom sets onto which the pattern embeds.
pub fn match_count_prepared(p: &Pattern, t: &Target) -> usize {
    let order = search_order(p);
    let mut pos = vec![0; p.nodes.len()];
    for (i, &n) in order.iter().enumerate() {
        pos[n] = i;
    }
    let mut back = vec![Vec::new(); order.len()];
    for &(x, y, b) in &p.edges {
        let (early, late) = if pos[x] < pos[y] { (x, y) } else { (y, x) };
        back[pos[late]].push((early, b));
    }
    for list in &mut back {
        list.sort_by_key(|&(n, _)| pos[n]);
    }
    let mut m = Matcher {
        p,
        t,
        order,
        back,
        map: vec![usize::MAX; p.nodes.len()],
        used: vec![false; t.mol.atom_count()],
        found: HashSet::new(),
    };
    m.extend(0);
    m.found.len()
}

pub fn match_count(p: &Pattern, mol: &Molecule) -> usize {
    match_count_prepared(p, &Target::new(mol))
}

pub fn matches(p: &Pattern, mol: &Molecule) -> bool {
    match_count(p, mol) > 0
}

#[derive(Debug, thiserror::Error)]
pub enum PatternFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {diagnostic}")]
    Invalid { line: usize, diagnostic: Diagnostic },
}

/// Patterns from text with one pattern per line; blank and `#` lines skipped.
pub fn parse_pattern_lines(text: &str) -> Result<Vec<Pattern>, PatternFileError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = parse_pattern(line).map_err(|diagnostic| PatternFileError::Invalid { line: i + 1, diagnostic })?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FilterConfig {
    pub allowed_elements: BTreeSet<Element>,
    pub require_neutral: bool,
    pub max_ring_size: usize,
    pub pattern_blacklist: Vec<Pattern>,
    /// SHA-256 of the blacklist file, if one was loaded.
    pub blacklist_digest: Option<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let allowed = ["C", "N", "S", "O", "F", "Cl", "Br", "H"]
            .iter()
            .map(|s| Element::from_symbol(s).unwrap())
            .collect();
        FilterConfig {
            allowed_elements: allowed,
            require_neutral: true,
            max_ring_size: 8,
            pattern_blacklist: Vec::new(),
            blacklist_digest: None,
        }
    }
}

impl FilterConfig {
    /// Every element allowed, charges allowed, no patterns.
    pub fn permissive() -> Self {
        FilterConfig {
            allowed_elements: (1..=118).filter_map(Element::from_atomic_number).collect(),
            require_neutral: false,
            ..Default::default()
        }
    }

    pub fn load_blacklist(&mut self, path: &Path) -> Result<(), PatternFileError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8_lossy(&bytes);
        self.pattern_blacklist = parse_pattern_lines(&text)?;
        self.blacklist_digest = Some(hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterOutcome {
    pub passed: bool,
    /// First failing rule, e.g. `element Si`, `charge`, `ring size 9`.
    pub reason: Option<String>,
}

impl FilterOutcome {
    fn fail(reason: String) -> Self {
        FilterOutcome { passed: false, reason: Some(reason) }
    }
}

pub fn passes_filters(mol: &Molecule, cfg: &FilterConfig) -> FilterOutcome {
    let target = Target::new(mol);
    let m = &target.mol;
    if let Some(a) = m.atoms().iter().find(|a| !cfg.allowed_elements.contains(&a.element)) {
        return FilterOutcome::fail(format!("element {}", a.element));
    }
    if cfg.require_neutral && m.atoms().iter().any(|a| a.charge != 0) {
        return FilterOutcome::fail("charge".into());
    }
    if let Some(r) = sssr(m).iter().find(|r| r.len() > cfg.max_ring_size) {
        return FilterOutcome::fail(format!("ring size {}", r.len()));
    }
    for p in &cfg.pattern_blacklist {
        if match_count_prepared(p, &target) > 0 {
            return FilterOutcome::fail(format!("pattern {p}"));
        }
    }
    FilterOutcome { passed: true, reason: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;

    fn count(p: &str, m: &str) -> usize {
        match_count(&parse_pattern(p).unwrap(), &parse_smiles(m).unwrap())
    }

    #[test]
    fn grammar() {
        let p = parse_pattern("c1ccccc1").unwrap();
        assert_eq!(p.nodes.len(), 6);
        assert_eq!(p.edges.len(), 6);
        assert!(p.nodes.iter().all(|n| n.aromatic == Some(true)));
        let p = parse_pattern("[R]~[R]").unwrap();
        assert!(p.nodes.iter().all(|n| n.in_ring && n.element.is_none()));
        assert_eq!(p.edges[0].2, BondPredicate::Any);
        let e = parse_pattern("[Se]").unwrap_err();
        assert_eq!(e.kind, DiagnosticKind::LexError);
        assert_eq!(e.position, 1);
        assert!(parse_pattern("[C;R]").is_err());
        assert!(parse_pattern("C.C").is_err());
        let p = parse_pattern("[N+;D3]");
        assert!(p.is_err());
        let p = parse_pattern("[ND3+]").unwrap();
        assert_eq!((p.nodes[0].degree, p.nodes[0].charge), (Some(3), Some(1)));
    }

    #[test]
    fn counting() {
        assert_eq!(count("C", "CCO"), 2);
        assert_eq!(count("c1ccccc1", "CCO"), 0);
        assert_eq!(count("c1ccccc1", "c1ccccc1"), 1);
        assert_eq!(count("c1ccccc1", "C1=CC=CC=C1"), 1);
        assert_eq!(count("CC", "CCC"), 2);
        assert_eq!(count("C=O", "OC(=O)CC=O"), 2);
        assert_eq!(count("[R]~[R]", "C1CC1"), 3);
        assert_eq!(count("[D1]", "CC(C)C"), 3);
        assert_eq!(count("*", "CCO"), 3);
        assert_eq!(count("[N+]", "C[N+](C)(C)C.[NH4+]"), 2);
        assert_eq!(count("Cl", "ClCCl"), 2);
    }

    #[test]
    fn filters() {
        let cfg = FilterConfig::default();
        let run = |s: &str| passes_filters(&parse_smiles(s).unwrap(), &cfg);
        assert!(run("CCO").passed);
        assert_eq!(run("CC[Si](C)C").reason.as_deref(), Some("element Si"));
        assert_eq!(run("[NH4+]").reason.as_deref(), Some("charge"));
        assert_eq!(run("C1CCCCCCCC1").reason.as_deref(), Some("ring size 9"));
        let mut cfg = FilterConfig::default();
        cfg.pattern_blacklist = parse_pattern_lines("# aldehyde\n\n[CD2]=O\n").unwrap();
        assert!(!passes_filters(&parse_smiles("CC=O").unwrap(), &cfg).passed);
        assert!(passes_filters(&parse_smiles("CCO").unwrap(), &cfg).passed);
    }

    #[test]
    fn pattern_file_errors_carry_line() {
        match parse_pattern_lines("C\n# x\n[Se]\n") {
            Err(PatternFileError::Invalid { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
