//! Depth-first SMILES writer driven by an atom ranking.

use super::stereo::{has_virtual, written_chirality, DoubleBondStereo};
use super::{BondDirection, BondOrder, Chirality, Molecule};

const UNSEEN: usize = usize::MAX;

struct Writer<'a> {
    mol: &'a Molecule,
    rank: &'a [usize],
    /// Preorder position of each atom, which is also its written order.
    seq: Vec<usize>,
    counter: usize,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<(usize, usize)>>,
    ring_open: Vec<Vec<(usize, usize)>>,
    ring_close: Vec<Vec<(usize, usize)>>,
    bond_used: Vec<bool>,
    /// Direction of each bond read from its first-written endpoint.
    dirs: Vec<BondDirection>,
    digit_of_bond: Vec<u32>,
    digits_in_use: Vec<bool>,
}

/// Writes every fragment reachable from `starts`, in that order, joined by `.`.
///
/// Neighbours are visited in increasing `rank`; ring-closure digits reuse the
/// smallest free number; tetrahedral tags are re-derived for the written
/// neighbour order and `/` `\` marks are re-assigned to express `db`.
pub(crate) fn write_smiles(mol: &Molecule, rank: &[usize], db: &[DoubleBondStereo], starts: &[usize]) -> String {
    let n = mol.atom_count();
    let nb = mol.bonds().len();
    let mut w = Writer {
        mol,
        rank,
        seq: vec![UNSEEN; n],
        counter: 0,
        parent: vec![None; n],
        children: vec![Vec::new(); n],
        ring_open: vec![Vec::new(); n],
        ring_close: vec![Vec::new(); n],
        bond_used: vec![false; nb],
        dirs: vec![BondDirection::None; nb],
        digit_of_bond: vec![0; nb],
        digits_in_use: vec![false; 101],
    };
    for &s in starts {
        w.plan(s, None);
    }
    w.assign_directions(db);
    let mut out = String::new();
    for (i, &s) in starts.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        w.emit(s, &mut out);
    }
    out
}

impl Writer<'_> {
    fn plan(&mut self, u: usize, parent_bond: Option<usize>) {
        self.seq[u] = self.counter;
        self.counter += 1;
        let mut nbrs: Vec<_> = self
            .mol
            .neighbors(u)
            .iter()
            .filter(|nb| Some(nb.bond) != parent_bond)
            .copied()
            .collect();
        nbrs.sort_by_key(|nb| self.rank[nb.atom]);
        for nb in nbrs {
            if self.bond_used[nb.bond] {
                continue;
            }
            self.bond_used[nb.bond] = true;
            if self.seq[nb.atom] == UNSEEN {
                self.children[u].push((nb.atom, nb.bond));
                self.parent[nb.atom] = Some((u, nb.bond));
                self.plan(nb.atom, Some(nb.bond));
            } else {
                // A visited neighbour reached over an unused bond is an ancestor.
                self.ring_open[nb.atom].push((u, nb.bond));
                self.ring_close[u].push((nb.atom, nb.bond));
            }
        }
    }

    fn first_written(&self, bond: usize) -> usize {
        let (a, b) = self.mol.bond(bond).atoms;
        if self.seq[a] < self.seq[b] {
            a
        } else {
            b
        }
    }

    /// Position of `x` relative to `u` implied by an assigned mark.
    fn mark_pos(&self, u: usize, bond: usize) -> Option<bool> {
        let up = match self.dirs[bond] {
            BondDirection::None => return None,
            BondDirection::Up => true,
            BondDirection::Down => false,
        };
        Some(if self.first_written(bond) == u { up } else { !up })
    }

    fn mark_for(&self, u: usize, bond: usize, pos_up: bool) -> BondDirection {
        let up = if self.first_written(bond) == u { pos_up } else { !pos_up };
        if up {
            BondDirection::Up
        } else {
            BondDirection::Down
        }
    }

    /// Order in which a bond's symbol appears in the output.
    fn symbol_pos(&self, bond: usize) -> usize {
        let (a, b) = self.mol.bond(bond).atoms;
        let child = if self.parent[a].map(|p| p.1) == Some(bond) {
            Some(a)
        } else if self.parent[b].map(|p| p.1) == Some(bond) {
            Some(b)
        } else {
            None
        };
        match child {
            Some(c) => self.seq[c],
            None => self.seq[self.first_written(bond)],
        }
    }

    /// Bonds on `u`'s side (away from `partner`) that could carry this
    /// double bond's mark, already-marked ones first.
    fn side_refs(&self, u: usize, partner: usize) -> Vec<(usize, usize)> {
        let mut cands: Vec<(usize, usize)> = self
            .mol
            .neighbors(u)
            .iter()
            .filter(|nb| nb.atom != partner)
            .map(|nb| (nb.atom, nb.bond))
            .collect();
        cands.sort_by_key(|&(x, b)| (self.dirs[b] == BondDirection::None, self.seq[x]));
        cands
    }

    /// Whether every marked bond at `end` agrees with `r` sitting at `pos_r`.
    fn side_consistent(&self, end: usize, partner: usize, r: usize, pos_r: bool) -> bool {
        self.mol.neighbors(end).iter().filter(|nb| nb.atom != partner).all(|nb| {
            match self.mark_pos(end, nb.bond) {
                None => true,
                Some(p) => p == if nb.atom == r { pos_r } else { !pos_r },
            }
        })
    }

    fn assign_directions(&mut self, db: &[DoubleBondStereo]) {
        let order = self.placement_order(db);
        // (end, partner, reference, reference up) for both ends of placed bonds.
        let mut placed: Vec<(usize, usize, usize, bool)> = Vec::new();
        for s in order {
            let (u, v) = self.mol.bond(s.bond).atoms;
            let xs = self.side_refs(u, v);
            let ys = self.side_refs(v, u);
            'search: for &(x, bx) in &xs {
                for (&(y, by), flip) in ys.iter().flat_map(|y| [(y, false), (y, true)]) {
                    let (mut pos_x, mut pos_y) = self.positions_for(s, (u, x, bx), (v, y, by));
                    if flip {
                        if self.dirs[bx] != BondDirection::None || self.dirs[by] != BondDirection::None {
                            continue;
                        }
                        pos_x = !pos_x;
                        pos_y = !pos_y;
                    }
                    let saved = (self.dirs[bx], self.dirs[by]);
                    if self.dirs[bx] == BondDirection::None {
                        self.dirs[bx] = self.mark_for(u, bx, pos_x);
                    }
                    if self.dirs[by] == BondDirection::None {
                        self.dirs[by] = self.mark_for(v, by, pos_y);
                    }
                    let ok = self.side_consistent(u, v, x, pos_x)
                        && self.side_consistent(v, u, y, pos_y)
                        && placed.iter().all(|&(e, p, r, pr)| self.side_consistent(e, p, r, pr));
                    if ok {
                        placed.push((u, v, x, pos_x));
                        placed.push((v, u, y, pos_y));
                        break 'search;
                    }
                    self.dirs[bx] = saved.0;
                    self.dirs[by] = saved.1;
                }
            }
        }
    }

    /// Written order, except that conjugated neighbours follow each other so
    /// a chain is never pinned from both ends before its middle is placed.
    fn placement_order<'d>(&self, db: &'d [DoubleBondStereo]) -> Vec<&'d DoubleBondStereo> {
        let mut sorted: Vec<usize> = (0..db.len()).collect();
        sorted.sort_by_key(|&i| {
            let (u, v) = self.mol.bond(db[i].bond).atoms;
            self.seq[u].min(self.seq[v])
        });
        let mut end_of = vec![usize::MAX; self.mol.atom_count()];
        for (i, s) in db.iter().enumerate() {
            let (u, v) = self.mol.bond(s.bond).atoms;
            end_of[u] = i;
            end_of[v] = i;
        }
        let mut done = vec![false; db.len()];
        let mut order = Vec::with_capacity(db.len());
        for &first in &sorted {
            if done[first] {
                continue;
            }
            done[first] = true;
            let mut queue = std::collections::VecDeque::from([first]);
            while let Some(i) = queue.pop_front() {
                order.push(&db[i]);
                let (u, v) = self.mol.bond(db[i].bond).atoms;
                let mut next: Vec<usize> = [u, v]
                    .iter()
                    .flat_map(|&e| self.mol.neighbors(e).iter().map(|nb| end_of[nb.atom]))
                    .filter(|&j| j != usize::MAX && !done[j])
                    .collect();
                next.sort_by_key(|&j| sorted.iter().position(|&k| k == j));
                next.dedup();
                for j in next {
                    done[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order
    }

    /// Positions for references `x` (on `u`) and `y` (on `v`) expressing `s`,
    /// starting from a side already marked, else making the first mark `/`.
    fn positions_for(
        &self,
        s: &DoubleBondStereo,
        (u, x, bx): (usize, usize, usize),
        (v, y, by): (usize, usize, usize),
    ) -> (bool, bool) {
        let mut marks = (self.mark_pos(u, bx), self.mark_pos(v, by));
        if marks == (None, None) && self.symbol_pos(by) < self.symbol_pos(bx) {
            marks.1 = Some(self.first_written(by) == v);
        }
        match marks {
            (None, Some(pos_y)) => {
                let pos_c = if y == s.refs.1 { pos_y } else { !pos_y };
                let pos_a = if s.trans { !pos_c } else { pos_c };
                (if x == s.refs.0 { pos_a } else { !pos_a }, pos_y)
            }
            (marked, _) => {
                let pos_x = marked.unwrap_or(self.first_written(bx) == u);
                let pos_a = if x == s.refs.0 { pos_x } else { !pos_x };
                let pos_c = if s.trans { !pos_a } else { pos_a };
                (pos_x, if y == s.refs.1 { pos_c } else { !pos_c })
            }
        }
    }

    fn bond_symbol(&self, bond: usize) -> &'static str {
        let b = self.mol.bond(bond);
        let (x, y) = b.atoms;
        let both_aromatic = self.mol.atom(x).aromatic && self.mol.atom(y).aromatic;
        match b.order {
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
            BondOrder::Single => match self.dirs[bond] {
                BondDirection::Up => "/",
                BondDirection::Down => "\\",
                BondDirection::None if both_aromatic => "-",
                BondDirection::None => "",
            },
        }
    }

    fn take_digit(&mut self) -> u32 {
        let d = (1..self.digits_in_use.len())
            .find(|&d| !self.digits_in_use[d])
            .unwrap_or_else(|| {
                self.digits_in_use.push(false);
                self.digits_in_use.len() - 1
            });
        self.digits_in_use[d] = true;
        d as u32
    }

    fn emit(&mut self, u: usize, out: &mut String) {
        let mut closings = self.ring_close[u].clone();
        closings.sort_by_key(|&(_, b)| self.digit_of_bond[b]);
        let openings = self.ring_open[u].clone();
        let mut labels = String::new();
        for &(_, b) in &closings {
            push_digit(&mut labels, self.digit_of_bond[b]);
        }
        for &(_, b) in &openings {
            let d = self.take_digit();
            self.digit_of_bond[b] = d;
            labels.push_str(self.bond_symbol(b));
            push_digit(&mut labels, d);
        }
        for &(_, b) in &closings {
            self.digits_in_use[self.digit_of_bond[b] as usize] = false;
        }

        let chirality = if self.mol.atom(u).chirality == Chirality::None {
            Chirality::None
        } else {
            let mut written: Vec<Option<usize>> = Vec::with_capacity(4);
            if let Some((p, _)) = self.parent[u] {
                written.push(Some(p));
            }
            if has_virtual(self.mol, u) {
                written.push(None);
            }
            written.extend(closings.iter().map(|&(a, _)| Some(a)));
            written.extend(openings.iter().map(|&(a, _)| Some(a)));
            written.extend(self.children[u].iter().map(|&(a, _)| Some(a)));
            written_chirality(self.mol, u, &written)
        };
        out.push_str(&atom_text(self.mol, u, chirality));
        out.push_str(&labels);

        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (i, &(c, b)) in children.iter().enumerate() {
            if i < last {
                out.push('(');
            }
            out.push_str(self.bond_symbol(b));
            self.emit(c, out);
            if i < last {
                out.push(')');
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push('%');
        out.push_str(&d.to_string());
    }
}

/// Atom symbol, bracketed whenever the organic-subset reading rules would
/// not reproduce the atom exactly.
pub(crate) fn atom_text(mol: &Molecule, u: usize, chirality: Chirality) -> String {
    let a = mol.atom(u);
    let symbol = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    let organic = a.element.is_organic_subset() && (!a.aromatic || a.element.can_be_aromatic());
    let plain = organic
        && a.isotope.is_none()
        && a.charge == 0
        && chirality == Chirality::None
        && mol.default_implicit_h(u) == a.total_h();
    if plain {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    match chirality {
        Chirality::None => {}
        Chirality::Anticlockwise => s.push('@'),
        Chirality::Clockwise => s.push_str("@@"),
    }
    match a.total_h() {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("{c}")),
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;
    use crate::mol::stereo::double_bond_stereo;

    fn identity_write(s: &str) -> String {
        let mut m = parse_smiles(s).unwrap();
        let db = double_bond_stereo(&m);
        crate::mol::stereo::strip_directions(&mut m);
        let rank: Vec<usize> = (0..m.atom_count()).collect();
        let starts: Vec<usize> = m.fragments().iter().map(|f| f[0]).collect();
        write_smiles(&m, &rank, &db, &starts)
    }

    #[test]
    fn rewrites_in_input_order() {
        for s in [
            "CCO",
            "CC(C)(C)O",
            "c1ccccc1",
            "C1CC1",
            "[NH4+].[Cl-]",
            "N[C@@H](C)C(=O)O",
            "[13CH4]",
            "F/C=C/F",
            "c1ccccc1-c1ccccc1",
            "C1CC2CCC1C2",
        ] {
            assert_eq!(identity_write(s), s);
        }
    }

    #[test]
    fn brackets_only_when_needed() {
        assert_eq!(identity_write("[CH3][OH]"), "CO");
        assert_eq!(identity_write("[CH2]C"), "[CH2]C");
        assert_eq!(identity_write("c1cc[nH]c1"), "c1cc[nH]c1");
        assert_eq!(identity_write("[Na+].[OH-]"), "[Na+].[OH-]");
        assert_eq!(identity_write("[se]1cccc1"), "[se]1cccc1");
    }

    #[test]
    fn digits_are_reused() {
        assert_eq!(identity_write("C1CC1C1CC1"), "C1CC1C1CC1");
        assert_eq!(identity_write("C12CC1C2"), "C12CC1C2");
    }
}
