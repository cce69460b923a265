//! Stereo bookkeeping shared by the writer and canonicalizer.

use super::rings::smallest_cycle_through;
use super::{BondDirection, BondOrder, Chirality, Molecule};

/// Ring double bonds in rings smaller than this carry no usable geometry.
const MIN_STEREO_RING: usize = 8;

/// Geometry of one double bond: `refs.0` is a neighbour of `atoms.0`,
/// `refs.1` a neighbour of `atoms.1`, and `trans` relates the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct DoubleBondStereo {
    pub bond: usize,
    pub refs: (usize, usize),
    pub trans: bool,
}

/// Whether neighbour `x` of `u` sits "up" according to the direction mark
/// on their bond, or `None` if the bond is unmarked.
fn pos(mol: &Molecule, u: usize, x: usize, bond: usize) -> Option<bool> {
    let b = mol.bond(bond);
    let up = match b.direction {
        BondDirection::None => return None,
        BondDirection::Up => true,
        BondDirection::Down => false,
    };
    Some(if b.atoms.0 == u { up } else { debug_assert_eq!(b.atoms.0, x); !up })
}

fn side(mol: &Molecule, u: usize, partner: usize) -> Option<(usize, bool)> {
    mol.neighbors(u)
        .iter()
        .filter(|nb| nb.atom != partner)
        .find_map(|nb| pos(mol, u, nb.atom, nb.bond).map(|p| (nb.atom, p)))
}

/// Double-bond geometries expressed by `/` and `\` marks.
pub(crate) fn double_bond_stereo(mol: &Molecule) -> Vec<DoubleBondStereo> {
    let mut out = Vec::new();
    for (i, b) in mol.bonds().iter().enumerate() {
        if b.order != BondOrder::Double {
            continue;
        }
        let (u, v) = b.atoms;
        let du = mol.degree(u);
        let dv = mol.degree(v);
        if !(2..=3).contains(&du) || !(2..=3).contains(&dv) {
            continue;
        }
        let (Some((a, pa)), Some((c, pc))) = (side(mol, u, v), side(mol, v, u)) else {
            continue;
        };
        out.push(DoubleBondStereo { bond: i, refs: (a, c), trans: pa != pc });
    }
    out
}

/// After taking a subgraph of `old`, re-expresses double-bond geometry whose
/// reference bond was removed by marking another surviving substituent.
pub(crate) fn carry_double_bond_marks(
    old: &Molecule,
    new: &mut Molecule,
    map: &[Option<usize>],
    bond_map: &[Option<usize>],
) {
    let old_db = double_bond_stereo(old);
    let on_stereo_double = |atom: usize, except: usize| {
        old_db.iter().any(|d| d.bond != except && {
            let (a, b) = old.bond(d.bond).atoms;
            a == atom || b == atom
        })
    };
    for s in &old_db {
        if bond_map[s.bond].is_none() {
            continue;
        }
        let (u, v) = old.bond(s.bond).atoms;
        for (end, partner, r) in [(u, v, s.refs.0), (v, u, s.refs.1)] {
            let (Some(e), Some(p)) = (map[end], map[partner]) else { continue };
            if side(new, e, p).is_some() {
                continue;
            }
            let Some(r_bond) = old.neighbors(end).iter().find(|nb| nb.atom == r).map(|nb| nb.bond) else {
                continue;
            };
            let Some(r_up) = pos(old, end, r, r_bond) else { continue };
            let other = old.neighbors(end).iter().find(|nb| {
                nb.atom != partner && nb.atom != r && bond_map[nb.bond].is_some() && !on_stereo_double(nb.atom, s.bond)
            });
            let Some(nb) = other else { continue };
            let b = bond_map[nb.bond].unwrap();
            let want = !r_up;
            let up = if new.bond(b).atoms.0 == e { want } else { !want };
            new.bond_mut(b).direction = if up { BondDirection::Up } else { BondDirection::Down };
        }
    }
}

/// Tetrahedral centres need four substituents, counting one virtual slot for
/// a single hydrogen or a lone pair on a three-connected atom.
pub(crate) fn tetrahedral_ok(mol: &Molecule, atom: usize) -> bool {
    let h = mol.atom(atom).total_h() as usize;
    let d = mol.degree(atom);
    h <= 1 && (d + h == 4 || (d == 3 && h == 0))
}

/// Whether the atom's stored neighbour order begins with a virtual slot.
pub(crate) fn has_virtual(mol: &Molecule, atom: usize) -> bool {
    mol.atom(atom).total_h() > 0 || mol.degree(atom) == 3
}

/// Drops stereo that cannot be represented: tetrahedral marks on atoms
/// without four substituents, directions not adjacent to a usable double
/// bond, and aromatic or small-ring double bonds.
pub(crate) fn clean_stereo(mol: &mut Molecule) -> Vec<DoubleBondStereo> {
    for i in 0..mol.atom_count() {
        if mol.atom(i).chirality != Chirality::None && !tetrahedral_ok(mol, i) {
            mol.atom_mut(i).chirality = Chirality::None;
        }
    }
    let db: Vec<DoubleBondStereo> = double_bond_stereo(mol)
        .into_iter()
        .filter(|s| smallest_cycle_through(mol, s.bond).is_none_or(|n| n >= MIN_STEREO_RING))
        .collect();
    strip_directions(mol);
    db
}

pub(crate) fn strip_directions(mol: &mut Molecule) {
    for i in 0..mol.bonds().len() {
        mol.bond_mut(i).direction = BondDirection::None;
    }
}

/// Parity of the permutation taking `from` to `to` (same elements); true if odd.
pub(crate) fn odd_permutation<T: PartialEq>(from: &[T], to: &[T]) -> bool {
    let mut perm: Vec<usize> = to
        .iter()
        .map(|t| from.iter().position(|f| f == t).expect("same elements"))
        .collect();
    let mut odd = false;
    for i in 0..perm.len() {
        while perm[i] != i {
            let j = perm[i];
            perm.swap(i, j);
            odd = !odd;
        }
    }
    odd
}

/// Chirality tag for `atom` when its neighbours are written in `written`
/// order (`None` marks the virtual slot).
pub(crate) fn written_chirality(mol: &Molecule, atom: usize, written: &[Option<usize>]) -> Chirality {
    let c = mol.atom(atom).chirality;
    if c == Chirality::None {
        return c;
    }
    let mut stored: Vec<Option<usize>> = Vec::with_capacity(4);
    if has_virtual(mol, atom) {
        stored.push(None);
    }
    stored.extend(mol.neighbors(atom).iter().map(|nb| Some(nb.atom)));
    if odd_permutation(&stored, written) {
        c.inverted()
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;

    #[test]
    fn trans_and_cis() {
        let m = parse_smiles("F/C=C/F").unwrap();
        let s = double_bond_stereo(&m);
        assert_eq!(s.len(), 1);
        assert!(s[0].trans);
        let m = parse_smiles("F/C=C\\F").unwrap();
        assert!(!double_bond_stereo(&m)[0].trans);
        let m = parse_smiles("F\\C=C/F").unwrap();
        assert!(!double_bond_stereo(&m)[0].trans);
        let m = parse_smiles("C(\\F)=C/F").unwrap();
        assert!(double_bond_stereo(&m)[0].trans);
    }

    #[test]
    fn unmarked_side_gives_nothing() {
        let m = parse_smiles("F/C=CF").unwrap();
        assert!(double_bond_stereo(&m).is_empty());
    }

    #[test]
    fn permutation_parity() {
        assert!(!odd_permutation(&[1, 2, 3], &[2, 3, 1]));
        assert!(odd_permutation(&[1, 2, 3], &[2, 1, 3]));
        assert!(!odd_permutation(&[1, 2, 3, 4], &[2, 1, 4, 3]));
    }

    #[test]
    fn small_ring_double_bonds_lose_geometry() {
        let mut m = parse_smiles("C1CC/C=C/CC1").unwrap();
        assert!(clean_stereo(&mut m).is_empty());
        let mut m = parse_smiles("C1CCCC/C=C/CCC1").unwrap();
        assert_eq!(clean_stereo(&mut m).len(), 1);
    }
}
