//! Named algebras used throughout the tests, the CLI and the benchmarks.

use serde::Serialize;

use crate::bracket::{self, Bracket};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub name: String,
    pub params: Vec<usize>,
    #[serde(skip)]
    pub bracket: Bracket,
    pub provenance: &'static str,
    /// Nilpotency step, `None` for non-nilpotent entries.
    pub step: Option<usize>,
}

/// Abelian `R^n`.
pub fn abelian(n: usize) -> Bracket {
    Bracket::zero(n)
}

/// Heisenberg algebra of dimension `2m + 1`: `[e_{2i-1}, e_{2i}] = e_{2m+1}`.
pub fn heisenberg(m: usize) -> Bracket {
    let n = 2 * m + 1;
    let terms: Vec<_> = (0..m).map(|i| (2 * i, 2 * i + 1, n - 1, 1)).collect();
    Bracket::from_int_terms(n, &terms).expect("valid indices")
}

/// Filiform algebra `L_n`: `[e_1, e_i] = e_{i+1}` for `2 <= i < n`.
pub fn filiform(n: usize) -> Bracket {
    let terms: Vec<_> = (1..n.saturating_sub(1)).map(|i| (0, i, i + 1, 1)).collect();
    Bracket::from_int_terms(n, &terms).expect("valid indices")
}

/// `[e1,e2] = e3 + e4, [e1,e3] = e5, [e1,e4] = e5`; the standard basis is not nice.
pub fn tricky5() -> Bracket {
    Bracket::from_int_terms(5, &[(0, 1, 2, 1), (0, 1, 3, 1), (0, 2, 4, 1), (0, 3, 4, 1)])
        .expect("valid indices")
}

/// `[e_n, e_i] = e_i` for `i < n`; the real hyperbolic space as a Lie group.
pub fn milnor_hyp(n: usize) -> Bracket {
    let terms: Vec<_> = (0..n.saturating_sub(1)).map(|i| (n - 1, i, i, 1)).collect();
    Bracket::from_int_terms(n, &terms).expect("valid indices")
}

/// Three-dimensional solvable algebra `[e1,e2] = e3, [e1,e3] = e3`. The
/// curve `diag(t, 1/t, 1)` degenerates it to the Heisenberg bracket.
pub fn milnor_source() -> Bracket {
    Bracket::from_int_terms(3, &[(0, 1, 2, 1), (0, 2, 2, 1)]).expect("valid indices")
}

/// `[e3,e1] = e1, [e3,e2] = e2 + e1`; the curve `diag(1, t, 1)` degenerates
/// it to the hyperbolic bracket `milnor_hyp(3)`.
pub fn milnor_hyp_source() -> Bracket {
    Bracket::from_int_terms(3, &[(0, 2, 0, -1), (1, 2, 1, -1), (1, 2, 0, -1)]).expect("valid indices")
}

pub const NAMES: &[&str] = &[
    "abelian:<n>",
    "heisenberg:<2m+1>",
    "filiform:<n>",
    "tricky5",
    "milnor_heis",
    "milnor_hyp:<n>",
    "milnor_source",
    "milnor_hyp_source",
];

/// Looks up `name` or `name:param`, e.g. `heisenberg:5`.
pub fn lookup(spec: &str) -> Result<CorpusEntry> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => {
            let v: usize = p
                .parse()
                .map_err(|_| Error::UnknownAlgebra(spec.to_string()))?;
            (n, Some(v))
        }
        None => (spec, None),
    };
    corpus(name, param)
}

pub fn corpus(name: &str, param: Option<usize>) -> Result<CorpusEntry> {
    let unknown = || Error::UnknownAlgebra(match param {
        Some(p) => format!("{name}:{p}"),
        None => name.to_string(),
    });
    let (bracket, params, provenance) = match (name, param) {
        ("abelian", Some(n)) if n >= 1 => (abelian(n), vec![n], "abelian Lie algebra"),
        ("heisenberg", Some(n)) if n >= 3 && n % 2 == 1 => (
            heisenberg((n - 1) / 2),
            vec![n],
            "Heisenberg algebra h_{2m+1}",
        ),
        ("filiform", Some(n)) if n >= 3 => (filiform(n), vec![n], "filiform algebra L_n"),
        ("tricky5", None) => (
            tricky5(),
            vec![],
            "5-dimensional example with a non-nice standard basis",
        ),
        ("milnor_heis", None) => (
            heisenberg(1),
            vec![],
            "Milnor degeneration target mu_heis",
        ),
        ("milnor_hyp", Some(n)) if n >= 2 => (
            milnor_hyp(n),
            vec![n],
            "Milnor degeneration target mu_hyp, isometric to RH^n",
        ),
        ("milnor_source", None) => (
            milnor_source(),
            vec![],
            "solvable algebra degenerating to mu_heis",
        ),
        ("milnor_hyp_source", None) => (
            milnor_hyp_source(),
            vec![],
            "solvable algebra degenerating to mu_hyp",
        ),
        _ => return Err(unknown()),
    };
    let step = bracket::nilpotency_step(&bracket)?;
    Ok(CorpusEntry {
        name: name.to_string(),
        params,
        bracket,
        provenance,
        step,
    })
}

/// The nilpotent entries used by property sweeps.
pub fn nilpotent_sweep() -> Vec<(String, Bracket)> {
    let mut out = vec![
        ("abelian:3".to_string(), abelian(3)),
        ("heisenberg:3".to_string(), heisenberg(1)),
        ("heisenberg:5".to_string(), heisenberg(2)),
        ("heisenberg:7".to_string(), heisenberg(3)),
        ("tricky5".to_string(), tricky5()),
    ];
    for n in 4..=6 {
        out.push((format!("filiform:{n}"), filiform(n)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::{center, validate_jacobi};

    #[test]
    fn every_entry_is_a_lie_bracket() {
        for spec in [
            "abelian:4",
            "heisenberg:3",
            "heisenberg:5",
            "heisenberg:7",
            "filiform:5",
            "filiform:8",
            "tricky5",
            "milnor_heis",
            "milnor_hyp:4",
            "milnor_source",
        ] {
            let e = lookup(spec).unwrap();
            assert_eq!(validate_jacobi(&e.bracket), 0.0, "{spec}");
        }
    }

    #[test]
    fn recorded_steps() {
        assert_eq!(lookup("tricky5").unwrap().step, Some(3));
        assert_eq!(lookup("heisenberg:5").unwrap().step, Some(2));
        assert_eq!(lookup("filiform:6").unwrap().step, Some(5));
        assert_eq!(lookup("abelian:2").unwrap().step, Some(1));
        assert_eq!(lookup("milnor_hyp:4").unwrap().step, None);
    }

    #[test]
    fn center_dimensions() {
        assert_eq!(center(&heisenberg(2)).len(), 1);
        assert_eq!(center(&tricky5()).len(), 2);
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(matches!(lookup("heisenberg:4"), Err(Error::UnknownAlgebra(_))));
        assert!(matches!(lookup("nope"), Err(Error::UnknownAlgebra(_))));
        assert!(lookup("abelian").is_err());
    }
}
