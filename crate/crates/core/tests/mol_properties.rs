use chemtext::descriptors::{descriptor_vector, fragment_molecule, morgan_fingerprint, murcko_scaffold, scaffold_smiles, tanimoto};
use chemtext::mol::{
    canonical_equal, canonical_smiles, kekulize, parse_smiles, randomize_smiles, validate, Element, Molecule,
};
use chemtext::pattern::{match_count, parse_pattern, passes_filters, FilterConfig};
use chemtext::tokenizer::{extend_vocabulary, tokenize_smiles, Vocabulary};
use proptest::prelude::*;

fn corpus() -> Vec<&'static str> {
    include_str!("../data/corpus_1k.smi").lines().collect()
}

fn mol(i: usize) -> Molecule {
    parse_smiles(corpus()[i % 1000]).unwrap()
}

fn atom_multiset(m: &Molecule) -> Vec<(u8, i8, Option<u16>)> {
    let mut v: Vec<_> = m
        .atoms()
        .iter()
        .filter(|a| a.is_heavy())
        .map(|a| (a.element.atomic_number(), a.charge, a.isotope))
        .collect();
    v.sort();
    v
}

fn bond_multiset(m: &Molecule) -> Vec<(u8, u8)> {
    let mut v: Vec<_> = m
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (m.atom(b.atoms.0).element.atomic_number(), m.atom(b.atoms.1).element.atomic_number());
            (x.min(y), x.max(y))
        })
        .collect();
    v.sort();
    v
}

const ALPHABET: &[&str] = &[
    "C", "c", "N", "n", "O", "o", "S", "Cl", "Br", "F", "(", ")", "=", "#", "1", "2", "%10", "[nH]", "[C@@H]", "[O-]",
    "[13C]", "/", "\\", ".", "[Na+]", "B", "P",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_survives_rerendering(i in 0usize..1000, seed in any::<u64>()) {
        let m = mol(i);
        let c = canonical_smiles(&m).unwrap();
        let r = randomize_smiles(&m, seed);
        let back = parse_smiles(&r).unwrap();
        prop_assert_eq!(canonical_smiles(&back).unwrap(), c.clone());
        prop_assert_eq!(canonical_smiles(&parse_smiles(&c).unwrap()).unwrap(), c);
        prop_assert_eq!(atom_multiset(&back), atom_multiset(&m));
        prop_assert_eq!(bond_multiset(&back), bond_multiset(&m));
        prop_assert_eq!(back.heavy_atom_count(), m.heavy_atom_count());
    }

    #[test]
    fn kekulized_form_revalidates(i in 0usize..1000) {
        let m = mol(i);
        prop_assert!(validate(&m).is_empty());
        let k = kekulize(&m).unwrap();
        prop_assert!(validate(&k).is_empty());
    }

    #[test]
    fn canonical_equal_is_an_equivalence(i in 0usize..1000, j in 0usize..1000, s1 in any::<u64>(), s2 in any::<u64>()) {
        let c = corpus();
        let a = c[i];
        let b = randomize_smiles(&mol(i), s1);
        let d = randomize_smiles(&mol(i), s2);
        prop_assert!(canonical_equal(a, a));
        prop_assert!(canonical_equal(a, &b) && canonical_equal(&b, a));
        prop_assert!(canonical_equal(&b, &d) && canonical_equal(a, &d));
        let other = c[j];
        prop_assert_eq!(canonical_equal(a, other), i == j);
        prop_assert_eq!(canonical_equal(other, a), i == j);
    }

    #[test]
    fn descriptors_survive_rerendering(i in 0usize..1000, seed in any::<u64>()) {
        let m = mol(i);
        let r = parse_smiles(&randomize_smiles(&m, seed)).unwrap();
        let (fa, fb) = (morgan_fingerprint(&m, 2, 2048), morgan_fingerprint(&r, 2, 2048));
        prop_assert_eq!(&fa, &fb);
        prop_assert!(fa.popcount() <= 2048 && fa.popcount() >= 1);
        prop_assert_eq!(descriptor_vector(&m), descriptor_vector(&r));
        prop_assert!(descriptor_vector(&m).values().iter().all(|v| v.is_finite()));
        prop_assert_eq!(scaffold_smiles(&m), scaffold_smiles(&r));
        prop_assert_eq!(fragment_molecule(&m), fragment_molecule(&r));
    }

    #[test]
    fn scaffold_is_idempotent(i in 0usize..1000) {
        let s = murcko_scaffold(&mol(i));
        if !s.is_empty() {
            let once = canonical_smiles(&s).unwrap();
            let twice = canonical_smiles(&murcko_scaffold(&parse_smiles(&once).unwrap())).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn fragments_conserve_heavy_atoms(i in 0usize..1000) {
        let m = mol(i);
        let total: usize = fragment_molecule(&m)
            .iter()
            .map(|(f, n)| parse_smiles(f).unwrap().heavy_atom_count() * n)
            .sum();
        prop_assert_eq!(total, m.heavy_atom_count());
    }

    #[test]
    fn tanimoto_symmetric(i in 0usize..1000, j in 0usize..1000) {
        let (a, b) = (morgan_fingerprint(&mol(i), 2, 1024), morgan_fingerprint(&mol(j), 2, 1024));
        prop_assert_eq!(tanimoto(&a, &b).unwrap(), tanimoto(&b, &a).unwrap());
        prop_assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn pattern_counts_survive_rerendering(i in 0usize..1000, seed in any::<u64>()) {
        let m = mol(i);
        let r = parse_smiles(&randomize_smiles(&m, seed)).unwrap();
        for p in ["C=O", "c1ccccc1", "N", "C-N", "[R]~[R]", "C(=O)O"] {
            let p = parse_pattern(p).unwrap();
            prop_assert_eq!(match_count(&p, &m), match_count(&p, &r));
        }
        let m = chemtext::mol::normalize(&m).unwrap();
        let ring = chemtext::mol::rings::ring_atoms(&m);
        let scans: [(&str, Box<dyn Fn(usize) -> bool>); 7] = [
            ("C", Box::new(|a| m.atom(a).element == Element::C && !m.atom(a).aromatic)),
            ("c", Box::new(|a| m.atom(a).element == Element::C && m.atom(a).aromatic)),
            ("N", Box::new(|a| m.atom(a).element == Element::N && !m.atom(a).aromatic)),
            ("O", Box::new(|a| m.atom(a).element == Element::O && !m.atom(a).aromatic)),
            ("[R]", Box::new(|a| ring[a])),
            ("[D2]", Box::new(|a| m.degree(a) == 2)),
            ("*", Box::new(|_| true)),
        ];
        for (text, pred) in scans {
            let direct = (0..m.atom_count()).filter(|&a| pred(a)).count();
            prop_assert_eq!(match_count(&parse_pattern(text).unwrap(), &m), direct, "{}", text);
        }
    }

    #[test]
    fn permissive_filters_pass(i in 0usize..1000) {
        let m = mol(i);
        let cfg = FilterConfig { max_ring_size: 64, ..FilterConfig::permissive() };
        prop_assert!(passes_filters(&m, &cfg).passed);
    }

    #[test]
    fn tokenization_is_lossless(parts in proptest::collection::vec(proptest::sample::select(ALPHABET), 0..30)) {
        let s: String = parts.concat();
        if let Ok(toks) = tokenize_smiles(&s) {
            let joined: String = toks.iter().map(|t| t.surface.as_str()).collect();
            prop_assert_eq!(joined, s);
        }
    }

    #[test]
    fn corpus_tokenization_is_lossless(i in 0usize..1000, seed in any::<u64>()) {
        let s = randomize_smiles(&mol(i), seed);
        let joined: String = tokenize_smiles(&s).unwrap().iter().map(|t| t.surface.as_str()).collect();
        prop_assert_eq!(joined, s);
    }

    #[test]
    fn extension_keeps_a_bijection(start in 0usize..900, n in 0usize..100, base_words in proptest::collection::btree_set("[a-z]{1,4}", 0..20)) {
        let base = Vocabulary::with_specials(base_words).unwrap();
        let c = corpus();
        let (v, plan, skipped) = extend_vocabulary(&base, c[start..start + n].iter().copied());
        prop_assert_eq!(skipped, 0);
        prop_assert_eq!(v.len(), base.len() + plan.added_tokens.len());
        for (k, t) in plan.added_tokens.iter().enumerate() {
            prop_assert_eq!(v.id(t), Some(plan.added_id(k)));
            prop_assert!((plan.init_source[k] as usize) < base.len());
        }
        for (id, t) in v.tokens().iter().enumerate() {
            prop_assert_eq!(v.id(t), Some(id as u32));
        }
    }
}
