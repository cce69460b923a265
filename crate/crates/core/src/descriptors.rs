//! Fingerprints, scaffolds, fragments and descriptor vectors.

use std::collections::BTreeMap;

use crate::mol::rings::{ring_atoms, ring_bonds, sssr};
use crate::mol::{canonical_smiles, normalize, BondOrder, Element, Molecule};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_WIDTH: usize = 2048;
/// Seed folded into every fingerprint hash; recorded in metric reports.
pub const FINGERPRINT_SEED: u64 = 0x6e61_6368_3066_7021;

/// Number of components in a [`DescriptorVector`].
pub const DESCRIPTOR_LEN: usize = 12;

pub const DESCRIPTOR_NAMES: [&str; DESCRIPTOR_LEN] = [
    "heavy_atoms",
    "mol_weight",
    "rings",
    "aromatic_rings",
    "n_count",
    "o_count",
    "halogens",
    "charge_sum",
    "hbd",
    "hba",
    "rotatable_bonds",
    "fraction_sp3_c",
];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("fingerprint widths differ: {0} vs {1}")]
pub struct WidthMismatch(pub usize, pub usize);

/// Binary circular fingerprint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: usize,
}

impl Fingerprint {
    pub fn empty(width: usize, radius: usize) -> Fingerprint {
        Fingerprint { words: vec![0; width.div_ceil(64)], width, radius }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fold(h: u64, v: u64) -> u64 {
    mix(h ^ mix(v))
}

/// Normalized form when the molecule validates, else the graph as given.
fn prepared(mol: &Molecule) -> Molecule {
    normalize(mol).unwrap_or_else(|_| mol.clone())
}

/// Circular fingerprint of `radius` rounds folded into `width` bits.
///
/// # Panics
/// If `width` is not a power of two of at least 64.
pub fn morgan_fingerprint(mol: &Molecule, radius: usize, width: usize) -> Fingerprint {
    assert!(width >= 64 && width.is_power_of_two(), "width must be a power of two >= 64");
    let mol = prepared(mol);
    let in_ring = ring_atoms(&mol);
    let mut fp = Fingerprint::empty(width, radius);
    let mut inv: Vec<u64> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            let mut h = FINGERPRINT_SEED;
            for v in [
                a.element.atomic_number() as u64,
                mol.degree(i) as u64,
                a.charge as i64 as u64,
                a.total_h() as u64,
                in_ring[i] as u64,
                a.aromatic as u64,
            ] {
                h = fold(h, v);
            }
            h
        })
        .collect();
    for &h in &inv {
        fp.set((h % width as u64) as usize);
    }
    for _ in 0..radius {
        inv = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|nb| (bond_code(mol.bond(nb.bond).order), inv[nb.atom]))
                    .collect();
                env.sort_unstable();
                env.iter().fold(fold(FINGERPRINT_SEED, inv[i]), |h, &(b, n)| fold(fold(h, b), n))
            })
            .collect();
        for &h in &inv {
            fp.set((h % width as u64) as usize);
        }
    }
    fp
}

fn bond_code(order: BondOrder) -> u64 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Intersection over union of set bits; 1.0 for two empty fingerprints.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, WidthMismatch> {
    if a.width != b.width {
        return Err(WidthMismatch(a.width, b.width));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    Ok(if either == 0 { 1.0 } else { both as f64 / either as f64 })
}

/// Ring systems plus linkers, keeping atoms double-bonded onto them.
/// Acyclic molecules give an empty molecule.
pub fn murcko_scaffold(mol: &Molecule) -> Molecule {
    let mol = prepared(mol);
    let n = mol.atom_count();
    let in_ring = ring_atoms(&mol);
    let mut core = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| !in_ring[i] && degree[i] <= 1).collect();
    while let Some(i) = stack.pop() {
        if !core[i] {
            continue;
        }
        core[i] = false;
        for nb in mol.neighbors(i) {
            if core[nb.atom] {
                degree[nb.atom] -= 1;
                if !in_ring[nb.atom] && degree[nb.atom] <= 1 {
                    stack.push(nb.atom);
                }
            }
        }
    }
    let mut keep = core.clone();
    for i in (0..n).filter(|&i| core[i]) {
        for nb in mol.neighbors(i) {
            if !core[nb.atom] && mol.bond(nb.bond).order == BondOrder::Double {
                keep[nb.atom] = true;
            }
        }
    }
    mol.induced(&keep).0
}

/// Canonical SMILES of [`murcko_scaffold`]; empty for acyclic molecules.
pub fn scaffold_smiles(mol: &Molecule) -> String {
    let s = murcko_scaffold(mol);
    if s.is_empty() {
        return String::new();
    }
    canonical_smiles(&s).unwrap_or_default()
}

/// Bonds broken by [`fragment_molecule`]: acyclic single bonds joining a ring
/// atom to a non-ring atom, and the C–N of amides and C–O of esters.
pub fn cleavable_bonds(mol: &Molecule) -> Vec<usize> {
    let in_ring = ring_atoms(mol);
    let ring_bond = ring_bonds(mol);
    let carbonyl = |c: usize| {
        mol.atom(c).element == Element::C
            && mol.neighbors(c).iter().any(|nb| {
                mol.bond(nb.bond).order == BondOrder::Double && mol.atom(nb.atom).element == Element::O
            })
    };
    let ester_o = |o: usize, c: usize| {
        mol.degree(o) == 2
            && mol
                .neighbors(o)
                .iter()
                .any(|nb| nb.atom != c && mol.atom(nb.atom).element == Element::C)
    };
    mol.bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            if b.order != BondOrder::Single || ring_bond[i] {
                return false;
            }
            let (x, y) = b.atoms;
            if in_ring[x] != in_ring[y] {
                return true;
            }
            [(x, y), (y, x)].into_iter().any(|(c, o)| {
                let e = mol.atom(o).element;
                carbonyl(c) && (e == Element::N || (e == Element::O && ester_o(o, c)))
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Canonical SMILES of the pieces left after breaking [`cleavable_bonds`],
/// with multiplicity. Cut ends are capped with hydrogen.
pub fn fragment_molecule(mol: &Molecule) -> BTreeMap<String, usize> {
    let mol = prepared(mol);
    let cut = cleavable_bonds(&mol);
    let (pieces, _) = mol.cut(&vec![true; mol.atom_count()], &cut);
    let mut out = BTreeMap::new();
    if let Ok(s) = canonical_smiles(&pieces) {
        for part in s.split('.').filter(|p| !p.is_empty()) {
            *out.entry(part.to_string()).or_insert(0) += 1;
        }
    }
    out
}

/// Twelve whole-molecule descriptors named by [`DESCRIPTOR_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescriptorVector(pub [f64; DESCRIPTOR_LEN]);

impl DescriptorVector {
    pub fn values(&self) -> &[f64; DESCRIPTOR_LEN] {
        &self.0
    }

    pub fn heavy_atoms(&self) -> f64 {
        self.0[0]
    }

    pub fn rings(&self) -> f64 {
        self.0[2]
    }

    pub fn aromatic_rings(&self) -> f64 {
        self.0[3]
    }

    pub fn charge_sum(&self) -> f64 {
        self.0[7]
    }
}

pub fn descriptor_vector(mol: &Molecule) -> DescriptorVector {
    let mol = prepared(mol);
    let rings = sssr(&mol);
    let ring_bond = ring_bonds(&mol);
    let mut v = [0.0; DESCRIPTOR_LEN];
    let (mut carbons, mut sp3) = (0usize, 0usize);
    for (i, a) in mol.atoms().iter().enumerate() {
        let el = a.element;
        if a.is_heavy() {
            v[0] += 1.0;
        }
        v[1] += a.isotope.unwrap_or_else(|| el.nominal_mass()) as f64 + a.total_h() as f64;
        v[4] += (el == Element::N) as u8 as f64;
        v[5] += (el == Element::O) as u8 as f64;
        v[6] += el.is_halogen() as u8 as f64;
        v[7] += a.charge as f64;
        if el == Element::N || el == Element::O {
            v[9] += 1.0;
            if a.total_h() > 0 {
                v[8] += 1.0;
            }
        }
        if el == Element::C {
            carbons += 1;
            let saturated = mol.neighbors(i).iter().all(|nb| mol.bond(nb.bond).order == BondOrder::Single);
            if saturated && mol.degree(i) + a.total_h() as usize == 4 {
                sp3 += 1;
            }
        }
    }
    v[2] = rings.len() as f64;
    v[3] = rings.iter().filter(|r| r.atoms.iter().all(|&a| mol.atom(a).aromatic)).count() as f64;
    let heavy_degree = |a: usize| mol.neighbors(a).iter().filter(|nb| mol.atom(nb.atom).is_heavy()).count();
    v[10] = mol
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            let (x, y) = b.atoms;
            b.order == BondOrder::Single
                && !ring_bond[i]
                && mol.atom(x).is_heavy()
                && mol.atom(y).is_heavy()
                && heavy_degree(x) > 1
                && heavy_degree(y) > 1
        })
        .count() as f64;
    v[11] = if carbons == 0 { 0.0 } else { sp3 as f64 / carbons as f64 };
    DescriptorVector(v)
}
