use super::kekule::{kekulize, perceive_aromaticity};
use super::{Diagnostic, DiagnosticKind, Molecule};

fn check_valences(mol: &Molecule, out: &mut Vec<Diagnostic>) {
    for i in 0..mol.atom_count() {
        let a = mol.atom(i);
        let Some(allowed) = a.element.allowed_valences(a.charge) else {
            continue;
        };
        let total = mol.bond_valence(i) as u16 + a.total_h() as u16;
        let max = *allowed.iter().max().unwrap() as u16;
        if total > max {
            out.push(Diagnostic::new(
                DiagnosticKind::ValenceViolation,
                mol.position(i),
                format!(
                    "atom {} ({}{}) has valence {}, allowed {:?}",
                    i,
                    a.element,
                    charge_suffix(a.charge),
                    total,
                    allowed
                ),
            ));
        }
    }
}

fn charge_suffix(charge: i8) -> String {
    match charge {
        0 => String::new(),
        c if c > 0 => format!("{c:+}"),
        c => format!("{c}"),
    }
}

/// Checks the valence model and kekulizability. An empty list means valid.
///
/// Valences are judged on the Kekulé form when one exists, so an aromatic
/// carbon counts its double bond. A total above the largest allowed valence
/// for the element and charge is a violation; elements outside the model are
/// not checked.
pub fn validate(mol: &Molecule) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if mol.is_empty() {
        out.push(Diagnostic::new(DiagnosticKind::EmptyInput, 0, "empty molecule"));
        return out;
    }
    match kekulize(mol) {
        Ok(k) => check_valences(&k, &mut out),
        Err(d) => {
            check_valences(mol, &mut out);
            out.push(d);
        }
    }
    out
}

/// Validates, kekulizes, and perceives aromaticity from scratch, giving the
/// form used for canonical output.
pub fn normalize(mol: &Molecule) -> Result<Molecule, Diagnostic> {
    if let Some(d) = validate(mol).into_iter().next() {
        return Err(d);
    }
    let k = kekulize(mol)?;
    Ok(perceive_aromaticity(&k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::parse_smiles;

    fn diags(s: &str) -> Vec<Diagnostic> {
        validate(&parse_smiles(s).unwrap())
    }

    #[test]
    fn valid_examples() {
        assert!(diags("CCO").is_empty());
        assert!(diags("O=C([O-])[O-]").is_empty());
        assert!(diags("O=C([O-])[O-].[K+].[K+]").is_empty());
        assert!(diags("C[N+](C)(C)C").is_empty());
        assert!(diags("CS(=O)(=O)C").is_empty());
        assert!(diags("[Na+].[OH-]").is_empty());
        assert!(diags("c1ccccc1").is_empty());
    }

    #[test]
    fn pentavalent_carbon() {
        let d = diags("C(C)(C)(C)(C)C");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::ValenceViolation);
        assert_eq!(d[0].position, 0);
    }

    #[test]
    fn other_violations() {
        assert_eq!(diags("FC(F)(F)(F)F")[0].kind, DiagnosticKind::ValenceViolation);
        assert_eq!(diags("O(C)(C)C")[0].kind, DiagnosticKind::ValenceViolation);
        assert_eq!(diags("C=[Cl]C")[0].kind, DiagnosticKind::ValenceViolation);
        assert_eq!(diags("c1ccc1")[0].kind, DiagnosticKind::KekulizationFailure);
        assert_eq!(diags("C[H](C)C")[0].kind, DiagnosticKind::ValenceViolation);
        assert!(diags("[H]C([H])([H])[H]").is_empty());
        assert!(diags("[H][H]").is_empty());
    }

    #[test]
    fn normalize_perceives_aromaticity() {
        let m = normalize(&parse_smiles("C1=CC=CC=C1").unwrap()).unwrap();
        assert!(m.atoms().iter().all(|a| a.aromatic));
    }
}
