use super::rings::{ring_bonds, simple_cycles};
use super::{BondOrder, Diagnostic, DiagnosticKind, Element, Molecule};

/// Largest single ring examined on its own when perceiving aromaticity.
/// Larger aromatic systems are still found as fused systems.
const MAX_RING: usize = 8;
const MATCH_STEP_LIMIT: usize = 1_000_000;

/// Whether an atom carrying aromatic bonds must take a double bond.
fn needs_double(mol: &Molecule, atom: usize) -> bool {
    let a = mol.atom(atom);
    let base = mol.bond_valence(atom) + a.total_h();
    let Some(allowed) = a.element.allowed_valences(a.charge) else {
        return false;
    };
    match allowed.iter().find(|&&v| v >= base) {
        Some(&v) => v > base,
        None => false,
    }
}

/// Replaces aromatic bonds by an alternating single/double assignment.
///
/// Atoms requiring a double bond are paired along aromatic bonds by a
/// backtracking perfect matching. The Kekulé result must also perceive as
/// aromatic at every atom that was written aromatic, which rejects
/// anti-aromatic or acyclic lowercase input such as `c1ccc1`.
pub fn kekulize(mol: &Molecule) -> Result<Molecule, Diagnostic> {
    let has_aromatic = mol.atoms().iter().any(|a| a.aromatic)
        || mol.bonds().iter().any(|b| b.order == BondOrder::Aromatic);
    if !has_aromatic {
        return Ok(mol.clone());
    }
    let n = mol.atom_count();
    let need: Vec<bool> = (0..n)
        .map(|i| {
            (mol.atom(i).aromatic
                || mol.neighbors(i).iter().any(|nb| mol.bond(nb.bond).order == BondOrder::Aromatic))
                && needs_double(mol, i)
        })
        .collect();
    let mut partner = vec![usize::MAX; n];
    let mut steps = 0;
    if !match_all(mol, &need, &mut partner, &mut steps) {
        let first = (0..n)
            .filter(|&i| need[i] && partner[i] == usize::MAX)
            .chain((0..n).filter(|&i| need[i]))
            .next()
            .unwrap_or(0);
        return Err(Diagnostic::new(
            DiagnosticKind::KekulizationFailure,
            mol.position(first),
            "aromatic system has no alternating bond assignment",
        ));
    }

    let mut out = mol.clone();
    for i in 0..mol.bonds().len() {
        if mol.bond(i).order != BondOrder::Aromatic {
            continue;
        }
        let (x, y) = mol.bond(i).atoms;
        out.bond_mut(i).order = if partner[x] == y { BondOrder::Double } else { BondOrder::Single };
    }
    for i in 0..n {
        let a = out.atom_mut(i);
        if a.aromatic {
            a.aromatic = false;
            a.was_aromatic = true;
        }
    }

    let (arom, _) = aromatic_sets(&out);
    if let Some(bad) = (0..n).find(|&i| out.atom(i).was_aromatic && !arom[i]) {
        return Err(Diagnostic::new(
            DiagnosticKind::KekulizationFailure,
            mol.position(bad),
            format!("atom {} is written aromatic but is not in an aromatic ring", bad),
        ));
    }
    Ok(out)
}

fn match_all(mol: &Molecule, need: &[bool], partner: &mut [usize], steps: &mut usize) -> bool {
    *steps += 1;
    if *steps > MATCH_STEP_LIMIT {
        return false;
    }
    // Most constrained unmatched atom first.
    let mut best: Option<(usize, Vec<usize>)> = None;
    for u in 0..need.len() {
        if !need[u] || partner[u] != usize::MAX {
            continue;
        }
        let options: Vec<usize> = mol
            .neighbors(u)
            .iter()
            .filter(|nb| {
                mol.bond(nb.bond).order == BondOrder::Aromatic
                    && need[nb.atom]
                    && partner[nb.atom] == usize::MAX
            })
            .map(|nb| nb.atom)
            .collect();
        if options.is_empty() {
            return false;
        }
        let better = best.as_ref().is_none_or(|(_, o)| options.len() < o.len());
        if better {
            let done = options.len() == 1;
            best = Some((u, options));
            if done {
                break;
            }
        }
    }
    let Some((u, options)) = best else {
        return true;
    };
    for v in options {
        partner[u] = v;
        partner[v] = u;
        if match_all(mol, need, partner, steps) {
            return true;
        }
        partner[u] = usize::MAX;
        partner[v] = usize::MAX;
    }
    false
}

/// Pi electrons an atom donates to a ring it belongs to, or `None` if it
/// cannot take part in an aromatic system.
fn pi_electrons(mol: &Molecule, atom: usize, ring: &[bool], on_ring: &[bool]) -> Option<u8> {
    let a = mol.atom(atom);
    if !on_ring[atom] || !a.element.can_be_aromatic() {
        return None;
    }
    let ve = a.element.valence_electrons()? as i16;
    let mut ring_double = 0;
    let mut exo_double = 0;
    let mut exo_ok = true;
    for nb in mol.neighbors(atom) {
        match mol.bond(nb.bond).order {
            BondOrder::Double if ring[nb.bond] => ring_double += 1,
            BondOrder::Double => {
                exo_double += 1;
                let z = mol.atom(nb.atom).element;
                exo_ok &= matches!(z, Element::O | Element::N | Element::S);
            }
            BondOrder::Triple => return None,
            _ => {}
        }
    }
    match (ring_double, exo_double) {
        (1, 0) => Some(1),
        (0, 1) if exo_ok => Some(0),
        (0, 0) => {
            if mol.degree(atom) + a.total_h() as usize > 3 {
                return None;
            }
            let free = ve - a.charge as i16 - mol.bond_valence(atom) as i16 - a.total_h() as i16;
            if free >= 2 {
                Some(2)
            } else if free == 0 && (a.element == Element::B || (a.element == Element::C && a.charge > 0)) {
                Some(0)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Aromatic atoms and bonds of a Kekulé-form molecule.
pub(crate) fn aromatic_sets(mol: &Molecule) -> (Vec<bool>, Vec<bool>) {
    let n = mol.atom_count();
    let ring = ring_bonds(mol);
    let mut on_ring = vec![false; n];
    for (i, b) in mol.bonds().iter().enumerate() {
        if ring[i] {
            on_ring[b.atoms.0] = true;
            on_ring[b.atoms.1] = true;
        }
    }
    let pi: Vec<Option<u8>> = (0..n).map(|i| pi_electrons(mol, i, &ring, &on_ring)).collect();
    let eligible: Vec<bool> = pi.iter().map(Option::is_some).collect();
    let bond_ok: Vec<bool> = mol
        .bonds()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            ring[i]
                && eligible[b.atoms.0]
                && eligible[b.atoms.1]
                && matches!(b.order, BondOrder::Single | BondOrder::Double | BondOrder::Aromatic)
        })
        .collect();

    let mut arom_atoms = vec![false; n];
    let mut arom_bonds = vec![false; mol.bonds().len()];
    let huckel = |atoms: &mut dyn Iterator<Item = usize>| {
        let e: u32 = atoms.map(|a| pi[a].unwrap() as u32).sum();
        e % 4 == 2
    };
    let mark = |bonds: &[usize], arom_atoms: &mut Vec<bool>, arom_bonds: &mut Vec<bool>| {
        for &b in bonds {
            arom_bonds[b] = true;
            let (x, y) = mol.bond(b).atoms;
            arom_atoms[x] = true;
            arom_atoms[y] = true;
        }
    };

    let cycles = simple_cycles(mol, &eligible, &bond_ok, MAX_RING);
    for c in &cycles {
        if huckel(&mut c.atoms.iter().copied()) {
            mark(&c.bonds, &mut arom_atoms, &mut arom_bonds);
        }
    }
    // Pairs of small cycles fused through a shared bond.
    for i in 0..cycles.len() {
        for j in i + 1..cycles.len() {
            let (a, b) = (&cycles[i], &cycles[j]);
            if !a.bonds.iter().any(|x| b.bonds.binary_search(x).is_ok()) {
                continue;
            }
            let mut atoms: Vec<usize> = a.atoms.iter().chain(&b.atoms).copied().collect();
            atoms.sort_unstable();
            atoms.dedup();
            if huckel(&mut atoms.iter().copied()) {
                let mut bonds: Vec<usize> = a.bonds.iter().chain(&b.bonds).copied().collect();
                bonds.sort_unstable();
                bonds.dedup();
                mark(&bonds, &mut arom_atoms, &mut arom_bonds);
            }
        }
    }
    // Whole fused systems: 2-edge-connected pieces of the eligible subgraph.
    for system in fused_systems(mol, &eligible, &bond_ok) {
        let mut atoms: Vec<usize> = system
            .iter()
            .flat_map(|&b| [mol.bond(b).atoms.0, mol.bond(b).atoms.1])
            .collect();
        atoms.sort_unstable();
        atoms.dedup();
        if huckel(&mut atoms.iter().copied()) {
            mark(&system, &mut arom_atoms, &mut arom_bonds);
        }
    }
    (arom_atoms, arom_bonds)
}

fn fused_systems(mol: &Molecule, eligible: &[bool], bond_ok: &[bool]) -> Vec<Vec<usize>> {
    let bonds: Vec<_> = mol
        .bonds()
        .iter()
        .enumerate()
        .filter(|(i, _)| bond_ok[*i])
        .map(|(_, b)| *b)
        .collect();
    let index: Vec<usize> = (0..mol.bonds().len()).filter(|&i| bond_ok[i]).collect();
    let atoms: Vec<_> = mol.atoms().to_vec();
    let sub = Molecule::new(atoms, bonds);
    let ring = ring_bonds(&sub);
    // Components over ring bonds of the eligible subgraph.
    let n = sub.atom_count();
    let mut label = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if !eligible[s] || label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = Vec::new();
        let mut stack = vec![s];
        label[s] = id;
        while let Some(u) = stack.pop() {
            for nb in sub.neighbors(u) {
                if !ring[nb.bond] {
                    continue;
                }
                if label[nb.atom] == usize::MAX {
                    label[nb.atom] = id;
                    stack.push(nb.atom);
                }
                if u < nb.atom {
                    members.push(index[nb.bond]);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out.retain(|m| m.len() >= 3);
    out
}

/// Marks aromatic atoms and bonds on a Kekulé-form molecule.
///
/// Candidate rings are simple cycles of up to eight atoms, pairs of such
/// cycles sharing a bond, and whole fused ring systems; a candidate whose
/// atoms donate 4n+2 pi electrons is aromatic. Hydrogen counts are kept.
pub fn perceive_aromaticity(mol: &Molecule) -> Molecule {
    let (atoms, bonds) = aromatic_sets(mol);
    let mut out = mol.clone();
    for (i, &a) in atoms.iter().enumerate() {
        out.atom_mut(i).aromatic = a;
    }
    for (i, &b) in bonds.iter().enumerate() {
        if b {
            let bond = out.bond_mut(i);
            bond.order = BondOrder::Aromatic;
            bond.direction = super::BondDirection::None;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;

    fn kek(s: &str) -> Result<Molecule, Diagnostic> {
        kekulize(&parse_smiles(s).unwrap())
    }

    fn arom_count(s: &str) -> usize {
        let m = kek(s).unwrap();
        perceive_aromaticity(&m).atoms().iter().filter(|a| a.aromatic).count()
    }

    #[test]
    fn benzene_alternates() {
        let m = kek("c1ccccc1").unwrap();
        let doubles = m.bonds().iter().filter(|b| b.order == BondOrder::Double).count();
        assert_eq!(doubles, 3);
        for i in 0..6 {
            assert_eq!(m.bond_valence(i), 3);
            assert!(m.atom(i).was_aromatic && !m.atom(i).aromatic);
            assert_eq!(m.atom(i).implicit_h, 1);
        }
    }

    #[test]
    fn cyclobutadiene_fails() {
        let d = kek("c1ccc1").unwrap_err();
        assert_eq!(d.kind, DiagnosticKind::KekulizationFailure);
    }

    #[test]
    fn odd_rings_need_a_donor() {
        assert_eq!(kek("c1ccnc1").unwrap_err().kind, DiagnosticKind::KekulizationFailure);
        assert!(kek("c1cc[nH]c1").is_ok());
        assert!(kek("c1ccoc1").is_ok());
        assert!(kek("c1ccsc1").is_ok());
    }

    #[test]
    fn aliphatic_input_unchanged() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(kekulize(&m).unwrap(), m);
    }

    #[test]
    fn acyclic_lowercase_rejected() {
        assert_eq!(kek("cc").unwrap_err().kind, DiagnosticKind::KekulizationFailure);
    }

    #[test]
    fn perception_from_kekule_input() {
        assert_eq!(arom_count("C1=CC=CC=C1"), 6);
        assert_eq!(arom_count("C1=CC=CC1"), 0);
        assert_eq!(arom_count("C1=CNC=C1"), 5);
        assert_eq!(arom_count("O=C1C=CC=CN1"), 6);
        assert_eq!(arom_count("C1=CC=C2C=CC=CC2=C1"), 10);
        assert_eq!(arom_count("C1=CC=C2C=CC=C2C=C1"), 10);
        assert_eq!(arom_count("C1=CC2=CC=CC2=C1"), 0);
        assert_eq!(arom_count("O=C1C=CC(=O)C=C1"), 0);
        assert_eq!(arom_count("c1ccc2[nH]ccc2c1"), 9);
        assert_eq!(arom_count("Cn1cnc2c1c(=O)n(C)c(=O)n2C"), 9);
        assert_eq!(arom_count("c1cc[n+]([O-])cc1"), 6);
    }
}
