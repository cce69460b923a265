//! Ring perception: ring bonds, smallest set of smallest rings, and bounded
//! simple-cycle enumeration.

use super::Molecule;

/// A cycle given both as an atom walk and as its bond set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ring {
    /// Atoms in walk order.
    pub atoms: Vec<usize>,
    /// Sorted bond indices.
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Marks bonds that lie on at least one cycle (the complement of bridges).
pub fn ring_bonds(mol: &Molecule) -> Vec<bool> {
    let n = mol.atom_count();
    let mut ring = vec![true; mol.bonds().len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    // Frames: (atom, parent bond, next neighbour index).
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (u, pb, ref mut next)) = stack.last_mut() {
            if let Some(nb) = mol.neighbors(u).get(*next).copied() {
                *next += 1;
                if nb.bond == pb {
                    continue;
                }
                if disc[nb.atom] == usize::MAX {
                    disc[nb.atom] = time;
                    low[nb.atom] = time;
                    time += 1;
                    stack.push((nb.atom, nb.bond, 0));
                } else {
                    low[u] = low[u].min(disc[nb.atom]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        ring[pb] = false;
                    }
                }
            }
        }
    }
    ring
}

/// Marks atoms with at least one ring bond.
pub fn ring_atoms(mol: &Molecule) -> Vec<bool> {
    let rb = ring_bonds(mol);
    let mut out = vec![false; mol.atom_count()];
    for (i, b) in mol.bonds().iter().enumerate() {
        if rb[i] {
            out[b.atoms.0] = true;
            out[b.atoms.1] = true;
        }
    }
    out
}

/// Number of independent cycles: bonds - atoms + components.
pub fn cycle_rank(mol: &Molecule) -> usize {
    (mol.bonds().len() + mol.fragment_count()).saturating_sub(mol.atom_count())
}

fn words(nbonds: usize) -> usize {
    nbonds.div_ceil(64)
}

fn set_bit(v: &mut [u64], i: usize) {
    v[i / 64] |= 1 << (i % 64);
}

fn get_bit(v: &[u64], i: usize) -> bool {
    v[i / 64] >> (i % 64) & 1 == 1
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Incremental GF(2) basis over bond-incidence vectors.
struct Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Basis {
    fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            if get_bit(&v, *pivot) {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
        v
    }

    /// Adds `v` if independent; returns whether it was added.
    fn insert(&mut self, v: &[u64]) -> bool {
        let r = self.reduce(v);
        match lowest_bit(&r) {
            Some(p) => {
                self.rows.push((p, r));
                true
            }
            None => false,
        }
    }
}

fn ring_from_bonds(mol: &Molecule, bonds: Vec<usize>) -> Ring {
    let start = mol.bond(bonds[0]).atoms.0;
    let mut atoms = vec![start];
    let mut used = vec![false; bonds.len()];
    let mut cur = start;
    loop {
        let next = bonds
            .iter()
            .enumerate()
            .find(|(k, &b)| !used[*k] && mol.bond(b).contains(cur));
        let Some((k, &b)) = next else { break };
        used[k] = true;
        cur = mol.bond(b).other(cur);
        if cur == start {
            break;
        }
        atoms.push(cur);
    }
    Ring { atoms, bonds }
}

/// BFS shortest-path tree from `root`: (distance, parent bond) per atom.
fn bfs_tree(mol: &Molecule, root: usize, ring: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let n = mol.atom_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for nb in mol.neighbors(u) {
            if ring[nb.bond] && dist[nb.atom] == usize::MAX {
                dist[nb.atom] = dist[u] + 1;
                parent[nb.atom] = nb.bond;
                queue.push_back(nb.atom);
            }
        }
    }
    (dist, parent)
}

fn path_bonds(mol: &Molecule, parent: &[usize], mut v: usize, out: &mut Vec<usize>) {
    while parent[v] != usize::MAX {
        out.push(parent[v]);
        v = mol.bond(parent[v]).other(v);
    }
}

/// Smallest set of smallest rings, as a minimum cycle basis.
///
/// Candidates are Horton cycles (shortest path, edge, shortest path back),
/// taken in order of increasing size while they are independent.
pub fn sssr(mol: &Molecule) -> Vec<Ring> {
    let need = cycle_rank(mol);
    if need == 0 {
        return Vec::new();
    }
    let ring = ring_bonds(mol);
    let w = words(mol.bonds().len());
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let on_ring = ring_atoms(mol);
    for root in 0..mol.atom_count() {
        if !on_ring[root] {
            continue;
        }
        let (dist, parent) = bfs_tree(mol, root, &ring);
        for (bi, b) in mol.bonds().iter().enumerate() {
            if !ring[bi] {
                continue;
            }
            let (x, y) = b.atoms;
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x] == bi || parent[y] == bi {
                continue;
            }
            let mut px = Vec::new();
            path_bonds(mol, &parent, x, &mut px);
            let mut py = Vec::new();
            path_bonds(mol, &parent, y, &mut py);
            // Paths from the root must meet only at the root.
            let mut seen = vec![false; mol.atom_count()];
            let mut v = x;
            while v != root {
                seen[v] = true;
                v = mol.bond(parent[v]).other(v);
            }
            let mut v = y;
            let mut disjoint = true;
            while v != root {
                if seen[v] {
                    disjoint = false;
                    break;
                }
                v = mol.bond(parent[v]).other(v);
            }
            if !disjoint {
                continue;
            }
            let mut bonds: Vec<usize> = px.into_iter().chain(py).chain([bi]).collect();
            bonds.sort_unstable();
            candidates.push(bonds);
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    candidates.dedup();

    let mut basis = Basis { rows: Vec::new() };
    let mut out = Vec::new();
    for c in candidates {
        let mut v = vec![0u64; w];
        for &b in &c {
            set_bit(&mut v, b);
        }
        if basis.insert(&v) {
            out.push(ring_from_bonds(mol, c));
            if out.len() == need {
                break;
            }
        }
    }
    out
}

/// All simple cycles of at most `max_len` atoms using only atoms with
/// `atom_ok` and bonds with `bond_ok`.
pub(crate) fn simple_cycles(
    mol: &Molecule,
    atom_ok: &[bool],
    bond_ok: &[bool],
    max_len: usize,
) -> Vec<Ring> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut path_bonds = Vec::new();
    let mut on_path = vec![false; mol.atom_count()];
    for s in 0..mol.atom_count() {
        if !atom_ok[s] {
            continue;
        }
        path.push(s);
        on_path[s] = true;
        extend(mol, atom_ok, bond_ok, max_len, s, &mut path, &mut path_bonds, &mut on_path, &mut out);
        on_path[s] = false;
        path.pop();
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn extend(
    mol: &Molecule,
    atom_ok: &[bool],
    bond_ok: &[bool],
    max_len: usize,
    s: usize,
    path: &mut Vec<usize>,
    path_bonds: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Ring>,
) {
    let u = *path.last().unwrap();
    for nb in mol.neighbors(u) {
        if !bond_ok[nb.bond] {
            continue;
        }
        let w = nb.atom;
        if w == s && path.len() >= 3 {
            // Each cycle is found in two directions; keep one.
            if path[1] < u {
                let mut bonds = path_bonds.clone();
                bonds.push(nb.bond);
                bonds.sort_unstable();
                out.push(Ring { atoms: path.clone(), bonds });
            }
            continue;
        }
        if w <= s || on_path[w] || !atom_ok[w] || path.len() >= max_len {
            continue;
        }
        path.push(w);
        path_bonds.push(nb.bond);
        on_path[w] = true;
        extend(mol, atom_ok, bond_ok, max_len, s, path, path_bonds, on_path, out);
        on_path[w] = false;
        path_bonds.pop();
        path.pop();
    }
}

/// Size of the smallest cycle through bond `b`, if any.
pub(crate) fn smallest_cycle_through(mol: &Molecule, b: usize) -> Option<usize> {
    let (s, t) = mol.bond(b).atoms;
    let mut dist = vec![usize::MAX; mol.atom_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for nb in mol.neighbors(u) {
            if nb.bond == b || dist[nb.atom] != usize::MAX {
                continue;
            }
            dist[nb.atom] = dist[u] + 1;
            if nb.atom == t {
                return Some(dist[t] + 1);
            }
            queue.push_back(nb.atom);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;

    fn sizes(s: &str) -> Vec<usize> {
        let mut v: Vec<usize> = sssr(&parse_smiles(s).unwrap()).iter().map(Ring::len).collect();
        v.sort();
        v
    }

    #[test]
    fn bridges_are_not_ring_bonds() {
        let m = parse_smiles("c1ccccc1CC1CC1").unwrap();
        let rb = ring_bonds(&m);
        assert_eq!(rb.iter().filter(|&&r| r).count(), 9);
        assert!(!rb[6] && !rb[7]);
    }

    #[test]
    fn sssr_sizes() {
        assert_eq!(sizes("CCO"), Vec::<usize>::new());
        assert_eq!(sizes("c1ccccc1"), vec![6]);
        assert_eq!(sizes("c1ccc2ccccc2c1"), vec![6, 6]);
        assert_eq!(sizes("C12C3C4C1C5C2C3C45"), vec![4, 4, 4, 4, 4]);
        assert_eq!(sizes("C1CC2CCC1C2"), vec![5, 5]);
        assert_eq!(sizes("C1CCCCCCCCC1"), vec![10]);
    }

    #[test]
    fn simple_cycles_of_naphthalene() {
        let m = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let all = vec![true; m.atom_count()];
        let bonds = vec![true; m.bonds().len()];
        let mut lens: Vec<usize> = simple_cycles(&m, &all, &bonds, 10).iter().map(Ring::len).collect();
        lens.sort();
        assert_eq!(lens, vec![6, 6, 10]);
        assert_eq!(simple_cycles(&m, &all, &bonds, 8).len(), 2);
    }

    #[test]
    fn smallest_cycle_sizes() {
        let m = parse_smiles("C1CC1C").unwrap();
        assert_eq!(smallest_cycle_through(&m, 0), Some(3));
        assert_eq!(smallest_cycle_through(&m, 3), None);
    }
}
