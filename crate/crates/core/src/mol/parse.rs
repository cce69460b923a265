use std::collections::HashMap;

use super::{
    Atom, Bond, BondDirection, BondOrder, Chirality, Diagnostic, DiagnosticKind, Element, Molecule,
    Neighbor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSym {
    fn from_char(c: u8) -> Option<BondSym> {
        Some(match c {
            b'-' => BondSym::Single,
            b'=' => BondSym::Double,
            b'#' => BondSym::Triple,
            b':' => BondSym::Aromatic,
            b'/' => BondSym::Up,
            b'\\' => BondSym::Down,
            _ => return None,
        })
    }

    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Up | BondSym::Down => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }

    fn direction(self) -> BondDirection {
        match self {
            BondSym::Up => BondDirection::Up,
            BondSym::Down => BondDirection::Down,
            _ => BondDirection::None,
        }
    }
}

struct RingOpen {
    atom: usize,
    sym: Option<BondSym>,
    slot: usize,
    pos: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    positions: Vec<usize>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<Option<Neighbor>>>,
    /// Whether each atom was reached from a preceding atom.
    has_prev: Vec<bool>,
}

fn lex(pos: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(DiagnosticKind::LexError, pos, msg)
}

/// Reads a SMILES string into a [`Molecule`].
///
/// Only syntax is checked here; valence and aromaticity are judged by
/// [`super::validate`].
pub fn parse_smiles(text: &str) -> Result<Molecule, Diagnostic> {
    if text.is_empty() {
        return Err(Diagnostic::new(DiagnosticKind::EmptyInput, 0, "empty input"));
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        positions: Vec::new(),
        bonds: Vec::new(),
        adjacency: Vec::new(),
        has_prev: Vec::new(),
    };
    p.run()?;
    p.finish()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), Diagnostic> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSym, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: HashMap<u32, RingOpen> = HashMap::new();
        let mut dot_pending: Option<usize> = None;

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(lex(start, "branch without a preceding atom"));
                    };
                    if pending.is_some() {
                        return Err(lex(start, "bond symbol before branch"));
                    }
                    branches.push((p, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(Diagnostic::new(
                            DiagnosticKind::UnmatchedParen,
                            start,
                            "unmatched ')'",
                        ));
                    };
                    if let Some((_, bp)) = pending {
                        return Err(lex(bp, "dangling bond symbol"));
                    }
                    if self.text.get(start.wrapping_sub(1)) == Some(&b'(') {
                        return Err(lex(start, "empty branch"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(lex(start, "misplaced '.'"));
                    }
                    if !branches.is_empty() {
                        return Err(lex(start, "'.' inside a branch"));
                    }
                    prev = None;
                    dot_pending = Some(start);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(lex(start, "two consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(lex(start, "bond symbol without a preceding atom"));
                    }
                    pending = Some((BondSym::from_char(c).unwrap(), start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(lex(start, "ring closure without a preceding atom"));
                    };
                    let number = self.ring_number()?;
                    let sym = pending.take().map(|(s, _)| s);
                    if let Some(open) = rings.remove(&number) {
                        self.close_ring(open, p, sym, start)?;
                    } else {
                        let slot = self.adjacency[p].len();
                        self.adjacency[p].push(None);
                        rings.insert(number, RingOpen { atom: p, sym, slot, pos: start });
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    dot_pending = None;
                    if let Some(p) = prev {
                        let sym = pending.take().map(|(s, _)| s);
                        self.add_bond(p, atom, sym, start)?;
                        self.has_prev[atom] = true;
                    }
                    prev = Some(atom);
                }
            }
        }
        if let Some((_, bp)) = pending {
            return Err(lex(bp, "dangling bond symbol"));
        }
        if let Some(dp) = dot_pending {
            return Err(lex(dp, "trailing '.'"));
        }
        if let Some(&(_, bp)) = branches.first() {
            return Err(Diagnostic::new(DiagnosticKind::UnmatchedParen, bp, "unclosed '('"));
        }
        if let Some(open) = rings.values().min_by_key(|r| r.pos) {
            return Err(Diagnostic::new(
                DiagnosticKind::UnclosedRing,
                open.pos,
                "ring bond opened but never closed",
            ));
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, Diagnostic> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let d = self.text.get(start + 1..start + 3);
            match d {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(lex(start, "'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok((self.text[start] - b'0') as u32)
        }
    }

    fn resolve(a: usize, b: usize, sym: Option<BondSym>, atoms: &[Atom]) -> (BondOrder, BondDirection) {
        match sym {
            Some(s) => (s.order(), s.direction()),
            None if atoms[a].aromatic && atoms[b].aromatic => {
                (BondOrder::Aromatic, BondDirection::None)
            }
            None => (BondOrder::Single, BondDirection::None),
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, pos: usize) -> Result<(), Diagnostic> {
        if self.adjacency[a].iter().flatten().any(|n| n.atom == b) {
            return Err(lex(pos, "duplicate bond"));
        }
        let (order, direction) = Self::resolve(a, b, sym, &self.atoms);
        let idx = self.bonds.len();
        self.bonds.push(Bond { atoms: (a, b), order, direction });
        self.adjacency[a].push(Some(Neighbor { atom: b, bond: idx }));
        self.adjacency[b].push(Some(Neighbor { atom: a, bond: idx }));
        Ok(())
    }

    fn close_ring(&mut self, open: RingOpen, here: usize, sym: Option<BondSym>, pos: usize) -> Result<(), Diagnostic> {
        if open.atom == here {
            return Err(lex(pos, "ring closure to the same atom"));
        }
        if self.adjacency[open.atom].iter().flatten().any(|n| n.atom == here) {
            return Err(lex(pos, "duplicate bond"));
        }
        // Orient the bond from the opening atom to the closing atom. A
        // direction written at the closing digit reads closing-to-opening.
        let open_dir = open.sym.map(BondSym::direction).unwrap_or_default();
        let close_dir = sym.map(BondSym::direction).unwrap_or_default().reversed();
        let direction = match (open_dir, close_dir) {
            (BondDirection::None, d) | (d, BondDirection::None) => d,
            (x, y) if x == y => x,
            _ => return Err(lex(pos, "conflicting ring bond directions")),
        };
        let order = match (open.sym.map(BondSym::order), sym.map(BondSym::order)) {
            (Some(x), Some(y)) if x != y => {
                return Err(lex(pos, "conflicting ring bond orders"));
            }
            (Some(x), _) | (None, Some(x)) => x,
            (None, None) => Self::resolve(open.atom, here, None, &self.atoms).0,
        };
        let idx = self.bonds.len();
        self.bonds.push(Bond { atoms: (open.atom, here), order, direction });
        self.adjacency[open.atom][open.slot] = Some(Neighbor { atom: here, bond: idx });
        self.adjacency[here].push(Some(Neighbor { atom: open.atom, bond: idx }));
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom, pos: usize) -> usize {
        self.atoms.push(atom);
        self.positions.push(pos);
        self.adjacency.push(Vec::new());
        self.has_prev.push(false);
        self.atoms.len() - 1
    }

    fn atom(&mut self) -> Result<usize, Diagnostic> {
        let start = self.pos;
        let c = self.text[start];
        if c == b'[' {
            return self.bracket_atom();
        }
        let next = self.text.get(start + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ => {
                let ch = std::str::from_utf8(&self.text[start..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                return Err(lex(start, format!("unexpected character '{ch}'")));
            }
        };
        self.pos += len;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        Ok(self.push_atom(atom, start))
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<usize, Diagnostic> {
        let start = self.pos;
        let Some(close) = self.text[start..].iter().position(|&c| c == b']') else {
            return Err(lex(start, "unterminated bracket atom"));
        };
        let end = start + close;
        self.pos += 1;

        let isotope = match self.digits() {
            Some(0) => return Err(lex(start + 1, "isotope must be positive")),
            Some(n) if n > u16::MAX as u32 => return Err(lex(start + 1, "isotope out of range")),
            Some(n) => Some(n as u16),
            None => None,
        };

        let sym_start = self.pos;
        let c0 = self.peek().ok_or_else(|| lex(sym_start, "missing element symbol"))?;
        let c1 = self.text.get(sym_start + 1).copied();
        let (element, aromatic) = if c0.is_ascii_uppercase() {
            let two = c1
                .filter(u8::is_ascii_lowercase)
                .and_then(|c1| Element::from_symbol(std::str::from_utf8(&[c0, c1]).ok()?));
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    let e = Element::from_symbol(std::str::from_utf8(&[c0]).unwrap())
                        .ok_or_else(|| lex(sym_start, "unknown element symbol"))?;
                    self.pos += 1;
                    (e, false)
                }
            }
        } else if c0.is_ascii_lowercase() {
            let two = match (c0, c1) {
                (b's', Some(b'e')) => Some(Element::from_symbol("Se").unwrap()),
                (b'a', Some(b's')) => Some(Element::from_symbol("As").unwrap()),
                (b't', Some(b'e')) => Some(Element::from_symbol("Te").unwrap()),
                _ => None,
            };
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, true)
                }
                None => {
                    let e = match c0 {
                        b'b' => Element::B,
                        b'c' => Element::C,
                        b'n' => Element::N,
                        b'o' => Element::O,
                        b'p' => Element::P,
                        b's' => Element::S,
                        _ => return Err(lex(sym_start, "unknown aromatic symbol")),
                    };
                    self.pos += 1;
                    (e, true)
                }
            }
        } else {
            return Err(lex(sym_start, "missing element symbol"));
        };

        let mut chirality = Chirality::None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Chirality::Anticlockwise;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Chirality::Clockwise;
            }
            if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                return Err(lex(self.pos, "only tetrahedral @/@@ chirality is supported"));
            }
        }

        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hcount = match self.digits() {
                Some(n) if n <= 9 => n as u8,
                Some(_) => return Err(lex(self.pos, "hydrogen count out of range")),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let s = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits() {
                charge = s * n as i32;
            } else {
                charge = s;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += s;
                }
            }
            if !(-15..=15).contains(&charge) {
                return Err(lex(start, "charge out of range"));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits().is_none() {
                return Err(lex(self.pos, "atom class needs digits"));
            }
        }

        if self.pos != end {
            return Err(lex(self.pos, "unexpected character in bracket atom"));
        }
        self.pos = end + 1;

        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.isotope = isotope;
        atom.charge = charge as i8;
        atom.explicit_h = Some(hcount);
        atom.chirality = chirality;
        Ok(self.push_atom(atom, start))
    }

    fn finish(self) -> Result<Molecule, Diagnostic> {
        let Parser { atoms, positions, bonds, adjacency, has_prev, .. } = self;
        let adjacency: Vec<Vec<Neighbor>> = adjacency
            .into_iter()
            .map(|l| l.into_iter().map(|n| n.expect("ring slots are filled")).collect())
            .collect();
        let mut mol = Molecule::from_parts(atoms, bonds, adjacency, positions);
        mol.assign_implicit_h();
        // Chirality is stored against [virtual, adjacency...]; SMILES puts
        // the implicit H (or lone pair) after the preceding atom.
        for i in 0..mol.atom_count() {
            if mol.atom(i).chirality == Chirality::None {
                continue;
            }
            let has_virtual = mol.atom(i).total_h() > 0 || mol.degree(i) == 3;
            if has_virtual && has_prev[i] {
                let a = mol.atom_mut(i);
                a.chirality = a.chirality.inverted();
            }
        }
        Ok(mol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> (DiagnosticKind, usize) {
        let d = parse_smiles(s).unwrap_err();
        (d.kind, d.position)
    }

    #[test]
    fn methane_gets_four_hydrogens() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.atom(0).implicit_h, 4);
    }

    #[test]
    fn use_case_molecule_parses() {
        let m = parse_smiles("CC(C)(C)NC(=O)CN1CCC(C(=O)Nc2cccc(-c3nc4ccccc4n3Cc3ccccc3)c2)CC1").unwrap();
        assert_eq!(m.fragment_count(), 1);
        assert_eq!(m.heavy_atom_count(), 39);
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(kind("C1CC"), (DiagnosticKind::UnclosedRing, 1));
        assert_eq!(kind(""), (DiagnosticKind::EmptyInput, 0));
        assert_eq!(kind("C(C"), (DiagnosticKind::UnmatchedParen, 1));
        assert_eq!(kind("CC)C"), (DiagnosticKind::UnmatchedParen, 2));
        assert_eq!(kind("C@@@"), (DiagnosticKind::LexError, 1));
        assert_eq!(kind("CXC"), (DiagnosticKind::LexError, 1));
        assert_eq!(kind("[CH4"), (DiagnosticKind::LexError, 0));
        assert_eq!(kind("C=1CC-1"), (DiagnosticKind::LexError, 6));
        assert_eq!(kind("C11"), (DiagnosticKind::LexError, 2));
        assert_eq!(kind("CC."), (DiagnosticKind::LexError, 2));
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[13CH3-]").unwrap();
        let a = m.atom(0);
        assert_eq!(a.isotope, Some(13));
        assert_eq!(a.charge, -1);
        assert_eq!(a.explicit_h, Some(3));
        assert_eq!(a.implicit_h, 0);
        let m = parse_smiles("[Cu-3]").unwrap();
        assert_eq!(m.atom(0).charge, -3);
        let m = parse_smiles("[O--]").unwrap();
        assert_eq!(m.atom(0).charge, -2);
        let m = parse_smiles("[se]1cccc1").unwrap();
        assert!(m.atom(0).aromatic);
        assert_eq!(m.atom(0).element.symbol(), "Se");
        let m = parse_smiles("[Sc]").unwrap();
        assert_eq!(m.atom(0).element.symbol(), "Sc");
        let m = parse_smiles("[CH3:7]C").unwrap();
        assert_eq!(m.atom(0).explicit_h, Some(3));
    }

    #[test]
    fn ring_bonds_and_orders() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.bonds().len(), 6);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(m.atoms().iter().all(|a| a.implicit_h == 1));
        let m = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(m.bonds()[5].order, BondOrder::Double);
        let m = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(m.bonds().len(), 3);
        let m = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(m.bonds()[6].order, BondOrder::Single);
    }

    #[test]
    fn ring_slot_keeps_reading_order() {
        // Neighbour order of atom 0 is [ring partner, chain neighbour].
        let m = parse_smiles("C1CCC1").unwrap();
        let order: Vec<usize> = m.neighbors(0).iter().map(|n| n.atom).collect();
        assert_eq!(order, vec![3, 1]);
    }

    #[test]
    fn directions_oriented_along_bond() {
        let m = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(m.bonds()[0].direction, BondDirection::Up);
        assert_eq!(m.bonds()[2].direction, BondDirection::Up);
        // Closing-digit marks read from the closing atom.
        let m = parse_smiles("C/1CC\\1").unwrap();
        assert_eq!(m.bonds()[2].direction, BondDirection::Up);
    }

    #[test]
    fn chirality_stored_with_virtual_first() {
        // N[C@H](C)O: written order N,H,C,O; stored order H,N,C,O.
        let m = parse_smiles("N[C@H](C)O").unwrap();
        assert_eq!(m.atom(1).chirality, Chirality::Clockwise);
        let m = parse_smiles("[C@H](N)(C)O").unwrap();
        assert_eq!(m.atom(0).chirality, Chirality::Anticlockwise);
    }

    #[test]
    fn halogen_valence_is_one() {
        let m = parse_smiles("ClC(Cl)Cl").unwrap();
        assert_eq!(m.atom(0).implicit_h, 0);
        assert_eq!(m.atom(1).implicit_h, 1);
    }
}
