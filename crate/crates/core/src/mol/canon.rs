//! Canonical atom ranking and canonical SMILES.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rings::ring_atoms;
use super::stereo::{clean_stereo, has_virtual, strip_directions, DoubleBondStereo};
use super::write::write_smiles;
use super::{normalize, parse_smiles, Chirality, Diagnostic, Molecule};

/// Upper bound on labelings compared when stereo breaks symmetry.
const SEARCH_LEAF_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CanonOptions {
    /// Drop tetrahedral and double-bond stereo before canonicalizing.
    pub ignore_stereo: bool,
}

/// Canonical SMILES with stereo compared strictly.
pub fn canonical_smiles(mol: &Molecule) -> Result<String, Diagnostic> {
    canonical_smiles_with(mol, &CanonOptions::default())
}

/// Canonical SMILES of a molecule that passes [`super::validate`].
///
/// Each fragment is normalized (kekulized, aromaticity re-perceived), its
/// atoms ranked by iterative invariant refinement, and written depth-first
/// from the lowest-ranked atom. Fragment strings are sorted and joined.
pub fn canonical_smiles_with(mol: &Molecule, opts: &CanonOptions) -> Result<String, Diagnostic> {
    let mut input = mol.clone();
    if opts.ignore_stereo {
        for i in 0..input.atom_count() {
            input.atom_mut(i).chirality = Chirality::None;
        }
        strip_directions(&mut input);
    }
    let norm = normalize(&input)?;
    let mut parts: Vec<String> = norm
        .fragments()
        .into_iter()
        .map(|atoms| {
            let mut keep = vec![false; norm.atom_count()];
            for a in atoms {
                keep[a] = true;
            }
            canonical_fragment(norm.induced(&keep).0)
        })
        .collect();
    parts.sort();
    Ok(parts.join("."))
}

/// Parses then canonicalizes.
pub fn canonicalize(text: &str, opts: &CanonOptions) -> Result<String, Diagnostic> {
    canonical_smiles_with(&parse_smiles(text)?, opts)
}

/// True iff both strings are valid and share a canonical form.
pub fn canonical_equal(a: &str, b: &str) -> bool {
    canonical_equal_with(a, b, &CanonOptions::default()).unwrap_or(false)
}

/// Like [`canonical_equal`] but exposes the diagnostic of an invalid operand.
pub fn canonical_equal_with(a: &str, b: &str, opts: &CanonOptions) -> Result<bool, Diagnostic> {
    let ca = canonicalize(a, opts)?;
    let cb = canonicalize(b, opts)?;
    Ok(ca == cb)
}

/// Writes the molecule from a seeded random start atom with random
/// neighbour and fragment order. Stereo is preserved.
pub fn randomize_smiles(mol: &Molecule, seed: u64) -> String {
    let mut m = mol.clone();
    let db = clean_stereo(&mut m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rank: Vec<usize> = (0..m.atom_count()).collect();
    rank.shuffle(&mut rng);
    let mut starts: Vec<usize> = m
        .fragments()
        .iter()
        .map(|f| *f.iter().min_by_key(|&&a| rank[a]).unwrap())
        .collect();
    starts.shuffle(&mut rng);
    write_smiles(&m, &rank, &db, &starts)
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut rank = vec![0; keys.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        rank[idx[w]] = r;
    }
    rank
}

fn class_count(rank: &[usize]) -> usize {
    rank.iter().max().map_or(0, |m| m + 1)
}

fn initial_ranks(mol: &Molecule) -> Vec<usize> {
    let ring = ring_atoms(mol);
    let keys: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            (
                mol.degree(i),
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.aromatic,
                a.total_h(),
                a.charge,
                ring[i],
            )
        })
        .collect();
    dense_ranks(&keys)
}

/// Refines ranks by sorted (bond order, neighbour rank) lists until stable.
fn refine(mol: &Molecule, rank: &mut Vec<usize>) {
    let mut classes = class_count(rank);
    loop {
        if classes == rank.len() {
            return;
        }
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..mol.atom_count())
            .map(|u| {
                let mut nb: Vec<(u8, usize)> = mol
                    .neighbors(u)
                    .iter()
                    .map(|n| (mol.bond(n.bond).order.code(), rank[n.atom]))
                    .collect();
                nb.sort_unstable();
                (rank[u], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let c = class_count(&next);
        *rank = next;
        if c == classes {
            return;
        }
        classes = c;
    }
}

fn individualize(rank: &[usize], atom: usize) -> Vec<usize> {
    let keys: Vec<(usize, bool)> = rank.iter().enumerate().map(|(i, &r)| (r, i != atom)).collect();
    dense_ranks(&keys)
}

/// Lowest rank value shared by more than one atom, with its members.
fn first_tied_cell(rank: &[usize]) -> Option<Vec<usize>> {
    let mut count = vec![0usize; rank.len()];
    for &r in rank {
        count[r] += 1;
    }
    let r = count.iter().position(|&c| c > 1)?;
    Some((0..rank.len()).filter(|&i| rank[i] == r).collect())
}

fn has_duplicates(v: &mut [usize]) -> bool {
    v.sort_unstable();
    v.windows(2).any(|w| w[0] == w[1])
}

/// Removes stereo on centres whose substituents are symmetry-equivalent,
/// unless the fragment has several stereo elements that may depend on one
/// another.
fn strip_weak_stereo(mol: &mut Molecule, db: &mut Vec<DoubleBondStereo>, rank: &[usize]) {
    let tetra: Vec<usize> = (0..mol.atom_count())
        .filter(|&i| mol.atom(i).chirality != Chirality::None)
        .collect();
    if tetra.len() + db.len() >= 2 {
        return;
    }
    for &a in &tetra {
        let mut classes: Vec<usize> = mol.neighbors(a).iter().map(|n| rank[n.atom]).collect();
        if has_duplicates(&mut classes) {
            mol.atom_mut(a).chirality = Chirality::None;
        }
    }
    db.retain(|s| {
        let (u, v) = mol.bond(s.bond).atoms;
        [(u, v), (v, u)].iter().all(|&(end, partner)| {
            let mut classes: Vec<usize> = mol
                .neighbors(end)
                .iter()
                .filter(|n| n.atom != partner)
                .map(|n| rank[n.atom])
                .collect();
            !has_duplicates(&mut classes)
        })
    });
}

fn canonical_fragment(mut mol: Molecule) -> String {
    let mut db = clean_stereo(&mut mol);
    let mut rank = initial_ranks(&mol);
    refine(&mol, &mut rank);
    strip_weak_stereo(&mut mol, &mut db, &rank);

    let has_stereo = !db.is_empty() || mol.atoms().iter().any(|a| a.chirality != Chirality::None);
    if !has_stereo {
        while let Some(cell) = first_tied_cell(&rank) {
            rank = individualize(&rank, cell[0]);
            refine(&mol, &mut rank);
        }
        return write_from(&mol, &rank, &db);
    }

    let mut involved = vec![false; mol.atom_count()];
    for (i, a) in mol.atoms().iter().enumerate() {
        if a.chirality != Chirality::None {
            involved[i] = true;
        }
    }
    for s in &db {
        let (u, v) = mol.bond(s.bond).atoms;
        involved[u] = true;
        involved[v] = true;
    }
    let mut search = Search { mol: &mol, db: &db, involved, best: None, leaves: 0 };
    search.run(rank);
    search.best.expect("at least one leaf")
}

fn write_from(mol: &Molecule, rank: &[usize], db: &[DoubleBondStereo]) -> String {
    let start = (0..mol.atom_count()).min_by_key(|&a| rank[a]).unwrap_or(0);
    write_smiles(mol, rank, db, &[start])
}

struct Search<'a> {
    mol: &'a Molecule,
    db: &'a [DoubleBondStereo],
    involved: Vec<bool>,
    best: Option<String>,
    leaves: usize,
}

impl Search<'_> {
    /// Explores every tie-break choice and keeps the smallest string, so the
    /// result does not depend on input atom order even when stereo tags make
    /// symmetric-looking atoms distinguishable.
    fn run(&mut self, mut rank: Vec<usize>) {
        refine(self.mol, &mut rank);
        let Some(mut cell) = first_tied_cell(&rank) else {
            let s = write_from(self.mol, &rank, self.db);
            if self.best.as_ref().is_none_or(|b| s < *b) {
                self.best = Some(s);
            }
            self.leaves += 1;
            return;
        };
        if self.interchangeable(&cell) {
            cell.truncate(1);
        }
        for a in cell {
            if self.leaves >= SEARCH_LEAF_LIMIT && self.best.is_some() {
                return;
            }
            self.run(individualize(&rank, a));
        }
    }

    /// Terminal atoms on one stereo-free parent can be swapped freely.
    fn interchangeable(&self, cell: &[usize]) -> bool {
        let parent = |a: usize| {
            let nb = self.mol.neighbors(a);
            (nb.len() == 1).then(|| nb[0].atom)
        };
        let Some(p) = parent(cell[0]) else { return false };
        !self.involved[p]
            && !has_virtual_stereo(self.mol, p)
            && cell.iter().all(|&a| parent(a) == Some(p) && !self.involved[a])
    }
}

fn has_virtual_stereo(mol: &Molecule, atom: usize) -> bool {
    has_virtual(mol, atom) && mol.atom(atom).chirality != Chirality::None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(s: &str) -> String {
        canonicalize(s, &CanonOptions::default()).unwrap()
    }

    #[test]
    fn simple_equalities() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("CCO"), "CCO");
        assert_eq!(canon("C1=CC=CC=C1"), canon("c1ccccc1"));
        assert_eq!(canon("c1ccccc1"), "c1ccccc1");
        assert!(canonical_equal("Cc1ccc(B(O)O)cc1.Nc1ccccc1I", "Nc1ccccc1I.Cc1ccc(B(O)O)cc1"));
        assert!(!canonical_equal("C1CC", "CCC"));
    }

    #[test]
    fn stereo_is_strict_by_default() {
        assert_ne!(canon("F/C=C/F"), canon("F/C=C\\F"));
        assert_eq!(canon("F/C=C/F"), canon("F\\C=C\\F"));
        assert_ne!(canon("N[C@@H](C)C(=O)O"), canon("N[C@H](C)C(=O)O"));
        assert_eq!(canon("N[C@@H](C)C(=O)O"), canon("C[C@H](N)C(=O)O"));
        let loose = CanonOptions { ignore_stereo: true };
        assert_eq!(
            canonicalize("F/C=C/F", &loose).unwrap(),
            canonicalize("F/C=C\\F", &loose).unwrap()
        );
    }

    #[test]
    fn weak_stereo_dropped() {
        assert_eq!(canon("C[C@H](C)O"), canon("CC(C)O"));
        assert_eq!(canon("F/C(F)=C/F"), canon("FC(F)=CF"));
    }

    #[test]
    fn randomized_renderings_agree() {
        for s in [
            "CC(C)(C)NC(=O)CN1CCC(C(=O)Nc2cccc(-c3nc4ccccc4n3Cc3ccccc3)c2)CC1",
            "C[C@H]1CC[C@@H](C)CC1",
            "N[C@@H](Cc1ccc(O)cc1)C(=O)O",
            "C/C=C/C=C\\C",
            "O=C([O-])[O-].[K+].[K+]",
            "c1ccc2ccccc2c1",
            "C12C3C4C1C5C2C3C45",
        ] {
            let m = parse_smiles(s).unwrap();
            let want = canon(s);
            for seed in 0..50 {
                let r = randomize_smiles(&m, seed);
                assert_eq!(canon(&r), want, "{s} seed {seed}: {r}");
            }
            assert_eq!(canon(&want), want);
        }
    }

    #[test]
    fn randomize_single_atom() {
        let m = parse_smiles("C").unwrap();
        for seed in 0..5 {
            assert_eq!(randomize_smiles(&m, seed), "C");
        }
    }
}
