//! Molecular graphs read from SMILES.
//!
//! Parsing is purely syntactic ([`parse_smiles`]); [`validate`] applies the
//! valence model and checks that aromatic systems kekulize. Canonical output
//! goes through [`canonical_smiles`], which perceives aromaticity from
//! scratch so that Kekulé and aromatic spellings of a ring agree.

mod canon;
mod diagnostic;
mod element;
mod kekule;
mod parse;
pub mod rings;
mod stereo;
mod valence;
mod write;

pub use canon::{
    canonical_equal, canonical_equal_with, canonical_smiles, canonical_smiles_with,
    canonicalize, randomize_smiles, CanonOptions,
};
pub use diagnostic::{Diagnostic, DiagnosticKind};
pub use element::Element;
pub use kekule::{kekulize, perceive_aromaticity};
pub use parse::parse_smiles;
pub use valence::{normalize, validate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Chirality {
    #[default]
    None,
    /// `@`
    Anticlockwise,
    /// `@@`
    Clockwise,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::None => Chirality::None,
            Chirality::Anticlockwise => Chirality::Clockwise,
            Chirality::Clockwise => Chirality::Anticlockwise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub charge: i8,
    /// H count given inside brackets; `Some` marks a bracket atom.
    pub explicit_h: Option<u8>,
    /// Relative to the neighbour order `[virtual H or lone pair, adjacency...]`.
    pub chirality: Chirality,
    pub implicit_h: u8,
    /// Set by kekulization on atoms that were written aromatic.
    pub was_aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            isotope: None,
            charge: 0,
            explicit_h: None,
            chirality: Chirality::None,
            implicit_h: 0,
            was_aromatic: false,
        }
    }

    pub fn total_h(&self) -> u8 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }

    pub fn is_heavy(&self) -> bool {
        self.element != Element::H
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to atom valence; aromatic bonds count one here and gain
    /// their second unit from kekulization.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Double-bond geometry marker, read from the first endpoint to the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BondDirection {
    #[default]
    None,
    /// `/`
    Up,
    /// `\`
    Down,
}

impl BondDirection {
    pub fn reversed(self) -> BondDirection {
        match self {
            BondDirection::None => BondDirection::None,
            BondDirection::Up => BondDirection::Down,
            BondDirection::Down => BondDirection::Up,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub atoms: (usize, usize),
    pub order: BondOrder,
    pub direction: BondDirection,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.atoms.0 == atom {
            self.atoms.1
        } else {
            self.atoms.0
        }
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.0 == atom || self.atoms.1 == atom
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub atom: usize,
    pub bond: usize,
}

/// An attributed molecular graph.
///
/// Neighbour lists keep SMILES reading order; tetrahedral chirality is
/// interpreted against that order.
#[derive(Clone, Debug, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<Neighbor>>,
    /// Character offset of each atom in the source text (0 for derived atoms).
    positions: Vec<usize>,
}

impl Molecule {
    /// Builds a molecule whose neighbour lists follow bond-list order.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Molecule {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            adjacency[b.atoms.0].push(Neighbor { atom: b.atoms.1, bond: i });
            adjacency[b.atoms.1].push(Neighbor { atom: b.atoms.0, bond: i });
        }
        let positions = vec![0; atoms.len()];
        Molecule { atoms, bonds, adjacency, positions }
    }

    pub(crate) fn from_parts(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        adjacency: Vec<Vec<Neighbor>>,
        positions: Vec<usize>,
    ) -> Molecule {
        debug_assert_eq!(atoms.len(), adjacency.len());
        Molecule { atoms, bonds, adjacency, positions }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub(crate) fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub(crate) fn bond_mut(&mut self, i: usize) -> &mut Bond {
        &mut self.bonds[i]
    }

    pub fn neighbors(&self, atom: usize) -> &[Neighbor] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_heavy()).count()
    }

    pub fn position(&self, atom: usize) -> usize {
        self.positions[atom]
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|n| n.atom == b).map(|n| n.bond)
    }

    /// Sum of bond valence contributions at `atom` (aromatic bonds count 1).
    pub fn bond_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|n| self.bonds[n.bond].order.valence())
            .sum()
    }

    /// Connected-component label per atom, labels numbered in first-atom order.
    pub fn fragment_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for n in &self.adjacency[u] {
                    if label[n.atom] == usize::MAX {
                        label[n.atom] = count;
                        stack.push(n.atom);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn fragment_count(&self) -> usize {
        self.fragment_labels().1
    }

    /// Atom indices of each connected component.
    pub fn fragments(&self) -> Vec<Vec<usize>> {
        let (label, count) = self.fragment_labels();
        let mut out = vec![Vec::new(); count];
        for (i, l) in label.into_iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Implicit H count the organic-subset reading rules would assign.
    pub(crate) fn default_implicit_h(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let base = self.bond_valence(atom);
        let Some(allowed) = a.element.allowed_valences(0) else {
            return 0;
        };
        let Some(&v) = allowed.iter().find(|&&v| v >= base) else {
            return 0;
        };
        if a.aromatic {
            if v > base {
                v - base - 1
            } else {
                0
            }
        } else {
            v - base
        }
    }

    /// Recomputes implicit hydrogens on every non-bracket atom.
    pub(crate) fn assign_implicit_h(&mut self) {
        for i in 0..self.atoms.len() {
            self.atoms[i].implicit_h = if self.atoms[i].is_bracket() {
                0
            } else {
                self.default_implicit_h(i)
            };
        }
    }

    /// Subgraph induced by atoms with `keep[i]`, preserving relative
    /// neighbour order and hydrogen counts. Atoms that lose a bond gain
    /// hydrogens to keep their valence and lose tetrahedral stereo. Returns
    /// the old-to-new index map.
    pub fn induced(&self, keep: &[bool]) -> (Molecule, Vec<Option<usize>>) {
        self.cut(keep, &[])
    }

    /// Like [`Molecule::induced`] but additionally drops the listed bonds.
    pub(crate) fn cut(&self, keep: &[bool], drop_bonds: &[usize]) -> (Molecule, Vec<Option<usize>>) {
        let mut map = vec![None; self.atoms.len()];
        let mut atoms = Vec::new();
        let mut positions = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if keep[i] {
                map[i] = Some(atoms.len());
                atoms.push(a.clone());
                positions.push(self.positions[i]);
            }
        }
        let mut bond_map = vec![None; self.bonds.len()];
        let mut bonds = Vec::new();
        let mut dropped = vec![false; self.bonds.len()];
        for &b in drop_bonds {
            dropped[b] = true;
        }
        for (i, b) in self.bonds.iter().enumerate() {
            if dropped[i] {
                continue;
            }
            if let (Some(x), Some(y)) = (map[b.atoms.0], map[b.atoms.1]) {
                bond_map[i] = Some(bonds.len());
                bonds.push(Bond { atoms: (x, y), ..*b });
            }
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (old, new) in map.iter().enumerate() {
            let Some(new) = *new else { continue };
            let mut lost = 0u8;
            for n in &self.adjacency[old] {
                match (map[n.atom], bond_map[n.bond]) {
                    (Some(na), Some(nb)) => adjacency[new].push(Neighbor { atom: na, bond: nb }),
                    _ => lost += self.bonds[n.bond].order.valence(),
                }
            }
            if lost > 0 {
                let a = &mut atoms[new];
                match a.explicit_h.as_mut() {
                    Some(h) => *h += lost,
                    None => a.implicit_h += lost,
                }
                a.chirality = Chirality::None;
            }
        }
        let mut out = Molecule { atoms, bonds, adjacency, positions };
        stereo::carry_double_bond_marks(self, &mut out, &map, &bond_map);
        (out, map)
    }
}
