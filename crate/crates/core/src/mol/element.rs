use std::fmt;

/// (symbol, nominal mass of the most abundant isotope), indexed by atomic number - 1.
const TABLE: [(&str, u16); 118] = [
    ("H", 1), ("He", 4), ("Li", 7), ("Be", 9), ("B", 11), ("C", 12), ("N", 14), ("O", 16),
    ("F", 19), ("Ne", 20), ("Na", 23), ("Mg", 24), ("Al", 27), ("Si", 28), ("P", 31),
    ("S", 32), ("Cl", 35), ("Ar", 40), ("K", 39), ("Ca", 40), ("Sc", 45), ("Ti", 48),
    ("V", 51), ("Cr", 52), ("Mn", 55), ("Fe", 56), ("Co", 59), ("Ni", 58), ("Cu", 63),
    ("Zn", 64), ("Ga", 69), ("Ge", 74), ("As", 75), ("Se", 80), ("Br", 79), ("Kr", 84),
    ("Rb", 85), ("Sr", 88), ("Y", 89), ("Zr", 90), ("Nb", 93), ("Mo", 98), ("Tc", 98),
    ("Ru", 102), ("Rh", 103), ("Pd", 106), ("Ag", 107), ("Cd", 114), ("In", 115),
    ("Sn", 120), ("Sb", 121), ("Te", 130), ("I", 127), ("Xe", 132), ("Cs", 133),
    ("Ba", 138), ("La", 139), ("Ce", 140), ("Pr", 141), ("Nd", 142), ("Pm", 145),
    ("Sm", 152), ("Eu", 153), ("Gd", 158), ("Tb", 159), ("Dy", 164), ("Ho", 165),
    ("Er", 166), ("Tm", 169), ("Yb", 174), ("Lu", 175), ("Hf", 180), ("Ta", 181),
    ("W", 184), ("Re", 187), ("Os", 192), ("Ir", 193), ("Pt", 195), ("Au", 197),
    ("Hg", 202), ("Tl", 205), ("Pb", 208), ("Bi", 209), ("Po", 209), ("At", 210),
    ("Rn", 222), ("Fr", 223), ("Ra", 226), ("Ac", 227), ("Th", 232), ("Pa", 231),
    ("U", 238), ("Np", 237), ("Pu", 244), ("Am", 243), ("Cm", 247), ("Bk", 247),
    ("Cf", 251), ("Es", 252), ("Fm", 257), ("Md", 258), ("No", 259), ("Lr", 262),
    ("Rf", 267), ("Db", 268), ("Sg", 269), ("Bh", 270), ("Hs", 269), ("Mt", 278),
    ("Ds", 281), ("Rg", 282), ("Cn", 285), ("Nh", 286), ("Fl", 289), ("Mc", 290),
    ("Lv", 293), ("Ts", 294), ("Og", 294),
];

/// A periodic-table entry, stored as its atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        TABLE
            .iter()
            .position(|(s, _)| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        TABLE[self.0 as usize - 1].0
    }

    pub fn nominal_mass(self) -> u16 {
        TABLE[self.0 as usize - 1].1
    }

    /// Members of the SMILES organic subset may be written without brackets.
    pub fn is_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that may be written in lowercase (aromatic) form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34 | 52)
    }

    pub fn is_halogen(self) -> bool {
        matches!(self.0, 9 | 17 | 35 | 53)
    }

    /// Outer-shell electron count for main-group elements used in aromaticity.
    pub(crate) fn valence_electrons(self) -> Option<u8> {
        match self.0 {
            5 => Some(3),
            6 | 14 => Some(4),
            7 | 15 | 33 => Some(5),
            8 | 16 | 34 | 52 => Some(6),
            9 | 17 | 35 | 53 => Some(7),
            _ => None,
        }
    }

    fn own_valences(z: u8) -> Option<&'static [u8]> {
        match z {
            1 => Some(&[1]),
            5 => Some(&[3]),
            6 => Some(&[4]),
            7 => Some(&[3, 5]),
            8 => Some(&[2]),
            9 | 17 | 35 | 53 => Some(&[1]),
            14 => Some(&[4]),
            15 => Some(&[3, 5]),
            16 => Some(&[2, 4, 6]),
            _ => None,
        }
    }

    fn period(z: u8) -> u8 {
        match z {
            1..=2 => 1,
            3..=10 => 2,
            11..=18 => 3,
            19..=36 => 4,
            37..=54 => 5,
            55..=86 => 6,
            _ => 7,
        }
    }

    /// Allowed total valences for this element carrying `charge`.
    ///
    /// A charged atom takes the valence set of its isoelectronic neighbour in
    /// the same period (N+ behaves like C, O- like F, C+ like B). `None`
    /// means the element is outside the valence model and is not checked.
    pub fn allowed_valences(self, charge: i8) -> Option<&'static [u8]> {
        let z = self.0 as i16 - charge as i16;
        if !(1..=118).contains(&z) {
            return None;
        }
        let z = z as u8;
        if Element::period(z) != Element::period(self.0) {
            return None;
        }
        // Carbon-centred ions lose valence regardless of sign.
        if self.0 == 6 && charge > 0 {
            return Element::own_valences(5);
        }
        Element::own_valences(z)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for z in 1..=118u8 {
            let e = Element::from_atomic_number(z).unwrap();
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
        assert_eq!(Element::from_symbol("Xx"), None);
    }

    #[test]
    fn charge_shifts_valence() {
        assert_eq!(Element::N.allowed_valences(1), Some(&[4u8][..]));
        assert_eq!(Element::O.allowed_valences(-1), Some(&[1u8][..]));
        assert_eq!(Element::O.allowed_valences(1), Some(&[3u8, 5][..]));
        assert_eq!(Element::C.allowed_valences(-1), Some(&[3u8, 5][..]));
        assert_eq!(Element::C.allowed_valences(1), Some(&[3u8][..]));
        assert_eq!(Element::B.allowed_valences(-1), Some(&[4u8][..]));
        assert_eq!(Element::S.allowed_valences(0), Some(&[2u8, 4, 6][..]));
        let cu = Element::from_symbol("Cu").unwrap();
        assert_eq!(cu.allowed_valences(-3), None);
    }
}
