//! Job-file ingest: a system stated as JSON, checked field by field.
//!
//! The schema is deliberately flat:
//!
//! ```json
//! {
//!   "label": "basic",
//!   "T": 6.283185307179586,
//!   "m0": 1,
//!   "m1": 1,
//!   "L0": {
//!     "matrix": [[0.0]],
//!     "eigvals": [[0.0, 0.0]],
//!     "eigvecs": [[[1.0, 0.0]]]
//!   },
//!   "L1": { "matrix": [[-1.0]], "nu": 1 },
//!   "V": [
//!     {
//!       "component": 1,
//!       "alpha": [2, 0],
//!       "modes": [
//!         { "k": 1, "re": 0.5, "im": 0.0 },
//!         { "k": -1, "re": 0.5, "im": 0.0 }
//!       ]
//!     }
//!   ],
//!   "c": 2.0,
//!   "rho": 1.0,
//!   "ell": 1
//! }
//! ```
//!
//! `T` is the period; `eigvals` are [re, im] pairs; `eigvecs` lists the
//! eigenvector columns, each a list of [re, im] entries; `V` lists
//! monomials: `component` indexes the equation (0-based over the full
//! state), `alpha` is the exponent vector over the full state, and `modes`
//! are Fourier coefficients of e^(i k (2 pi / T) t). The normal-form route
//! states the whole system in the first block (`m1` = 0, `L1` omitted).
//! Optional: `epsilon` = { "index": j } declares a frozen auxiliary
//! coordinate, `complex` = true waives conjugate-symmetry checks, `nu`
//! overrides the Jordan index of the second block.
//!
//! Shape violations surface as schema errors naming the exact field;
//! everything semantic (spectra, envelopes, symmetry) goes through the
//! same validation as programmatically built systems.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;

use crate::algebra::{Codomain, EigenBasis, HomoPoly, MultiIndex, PolyMap, SystemSpec, TrigPoly};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobFile {
    label: Option<String>,
    #[serde(rename = "T")]
    period: f64,
    m0: usize,
    m1: usize,
    #[serde(rename = "L0")]
    l0: BlockL0,
    #[serde(rename = "L1")]
    l1: Option<BlockL1>,
    #[serde(rename = "V")]
    v: Vec<TermEntry>,
    c: f64,
    rho: f64,
    ell: u32,
    epsilon: Option<EpsilonEntry>,
    complex: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockL0 {
    matrix: Vec<Vec<f64>>,
    eigvals: Vec<[f64; 2]>,
    eigvecs: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockL1 {
    matrix: Vec<Vec<f64>>,
    nu: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    component: usize,
    alpha: Vec<u32>,
    modes: Vec<ModeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeEntry {
    k: i64,
    re: f64,
    im: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpsilonEntry {
    index: usize,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_matrix(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim {
        return Err(schema(
            format!("{field}.matrix"),
            format!("expected {dim} rows, got {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(schema(
                format!("{field}.matrix[{i}]"),
                format!("expected {dim} entries, got {}", row.len()),
            ));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(schema(format!("{field}.matrix[{i}]"), format!("non-finite entry {v}")));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

fn parse_basis(block: &BlockL0, dim: usize) -> Result<EigenBasis> {
    if block.eigvals.len() != dim {
        return Err(schema(
            "L0.eigvals",
            format!("expected {dim} eigenvalues, got {}", block.eigvals.len()),
        ));
    }
    if block.eigvecs.len() != dim {
        return Err(schema(
            "L0.eigvecs",
            format!("expected {dim} columns, got {}", block.eigvecs.len()),
        ));
    }
    let values: Vec<Complex64> = block
        .eigvals
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    if let Some(bad) = values.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(schema("L0.eigvals", format!("non-finite eigenvalue {bad}")));
    }
    let mut vectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (j, col) in block.eigvecs.iter().enumerate() {
        if col.len() != dim {
            return Err(schema(
                format!("L0.eigvecs[{j}]"),
                format!("expected {dim} entries, got {}", col.len()),
            ));
        }
        for (i, [re, im]) in col.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(schema(format!("L0.eigvecs[{j}][{i}]"), "non-finite entry"));
            }
            vectors[(i, j)] = Complex64::new(*re, *im);
        }
    }
    EigenBasis::new(values, vectors)
}

fn parse_forcing(terms: &[TermEntry], m: usize, period: f64) -> Result<PolyMap> {
    // Accumulate per multi-index so repeated (alpha, component) entries and
    // split mode lists all land in one coefficient.
    let mut acc: BTreeMap<MultiIndex, BTreeMap<i64, DVector<Complex64>>> = BTreeMap::new();
    for (i, term) in terms.iter().enumerate() {
        if term.component >= m {
            return Err(schema(
                format!("V[{i}].component"),
                format!("component {} outside 0..{}", term.component, m),
            ));
        }
        if term.alpha.len() != m {
            return Err(schema(
                format!("V[{i}].alpha"),
                format!("expected {m} exponents, got {}", term.alpha.len()),
            ));
        }
        let alpha = MultiIndex::new(term.alpha.clone());
        if alpha.degree() < 2 {
            return Err(schema(
                format!("V[{i}].alpha"),
                "forcing must vanish to second order (degree below 2)",
            ));
        }
        if term.modes.is_empty() {
            return Err(schema(format!("V[{i}].modes"), "empty mode list"));
        }
        let slot = acc.entry(alpha).or_default();
        for (mi, mode) in term.modes.iter().enumerate() {
            if !mode.re.is_finite() || !mode.im.is_finite() {
                return Err(schema(
                    format!("V[{i}].modes[{mi}]"),
                    "non-finite coefficient",
                ));
            }
            let v = slot
                .entry(mode.k)
                .or_insert_with(|| DVector::<Complex64>::zeros(m));
            v[term.component] += Complex64::new(mode.re, mode.im);
        }
    }

    let mut by_degree: BTreeMap<u32, HomoPoly> = BTreeMap::new();
    for (alpha, modes) in acc {
        let n = alpha.degree();
        let part = by_degree
            .entry(n)
            .or_insert_with(|| HomoPoly::zero(m, n, m, Codomain::Full, period));
        let coeff = TrigPoly::from_modes(period, m, modes.into_iter().collect::<Vec<_>>(), false)?;
        part.add_term(alpha, coeff)?;
    }
    let mut v = PolyMap::zero(m, m, Codomain::Full, period);
    for (_, part) in by_degree {
        v.set_part(part)?;
    }
    Ok(v)
}

/// Parse a job from JSON text. `fallback_label` names the system when the
/// file does not.
pub fn parse_job(text: &str, fallback_label: &str) -> Result<SystemSpec> {
    let job: JobFile = serde_json::from_str(text)?;
    let m = job.m0 + job.m1;
    if m == 0 {
        return Err(schema("m0", "state dimension is zero"));
    }
    let l0 = parse_matrix(&job.l0.matrix, job.m0, "L0")?;
    let l0_eig = parse_basis(&job.l0, job.m0)?;
    let (l1, nu) = match (&job.l1, job.m1) {
        (Some(block), m1) => (parse_matrix(&block.matrix, m1, "L1")?, block.nu),
        (None, 0) => (DMatrix::zeros(0, 0), None),
        (None, _) => {
            return Err(schema("L1", "required when m1 > 0"));
        }
    };
    let v = parse_forcing(&job.v, m, job.period)?;
    let spec = SystemSpec {
        period: job.period,
        m0: job.m0,
        m1: job.m1,
        l0,
        l0_eig,
        l1,
        nu,
        v,
        c: job.c,
        rho: job.rho,
        ell: job.ell,
        epsilon_index: job.epsilon.as_ref().map(|e| e.index),
        complex_ok: job.complex.unwrap_or(false),
        label: job.label.unwrap_or_else(|| fallback_label.to_string()),
    };
    spec.validate()?;
    Ok(spec)
}

/// Load and validate a job file.
pub fn load_job(path: &Path) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "job".to_string());
    parse_job(&text, &stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_text() -> String {
        r#"{
            "label": "basic",
            "T": 6.283185307179586,
            "m0": 1,
            "m1": 1,
            "L0": { "matrix": [[0.0]], "eigvals": [[0.0, 0.0]], "eigvecs": [[[1.0, 0.0]]] },
            "L1": { "matrix": [[-1.0]], "nu": 1 },
            "V": [
                { "component": 1, "alpha": [2, 0],
                  "modes": [ { "k": 1, "re": 0.5, "im": 0.0 }, { "k": -1, "re": 0.5, "im": 0.0 } ] },
                { "component": 1, "alpha": [1, 1],
                  "modes": [ { "k": 1, "re": 1.0, "im": 0.0 }, { "k": -1, "re": 1.0, "im": 0.0 } ] },
                { "component": 1, "alpha": [0, 2],
                  "modes": [ { "k": 1, "re": 0.5, "im": 0.0 }, { "k": -1, "re": 0.5, "im": 0.0 } ] }
            ],
            "c": 2.0,
            "rho": 1.0,
            "ell": 1
        }"#
        .to_string()
    }

    #[test]
    fn parses_the_coupled_fixture() {
        let spec = parse_job(&basic_text(), "fallback").unwrap();
        let reference = SystemSpec::basic();
        assert_eq!(spec.label, "basic");
        assert_eq!(spec.m0, 1);
        assert_eq!(spec.m1, 1);
        let gap = spec.v.sub(&reference.v).unwrap().max_coeff();
        assert!(gap < 1e-15, "forcing should match the in-code fixture, gap {gap}");
    }

    #[test]
    fn reports_the_failing_field() {
        let bad = basic_text().replace("\"alpha\": [2, 0]", "\"alpha\": [2]");
        let err = parse_job(&bad, "x").unwrap_err();
        match err {
            Error::Schema { field, .. } => assert_eq!(field, "V[0].alpha"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = basic_text().replace("\"c\": 2.0,", "\"c\": 2.0, \"extra\": 1,");
        assert!(matches!(parse_job(&bad, "x").unwrap_err(), Error::Json(_)));
    }

    #[test]
    fn missing_second_block_is_a_schema_error() {
        let bad = basic_text().replace(
            "\"L1\": { \"matrix\": [[-1.0]], \"nu\": 1 },",
            "",
        );
        let err = parse_job(&bad, "x").unwrap_err();
        match err {
            Error::Schema { field, .. } => assert_eq!(field, "L1"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn degree_one_terms_are_rejected_with_position() {
        let bad = basic_text().replace("\"alpha\": [0, 2]", "\"alpha\": [0, 1]");
        let err = parse_job(&bad, "x").unwrap_err();
        match err {
            Error::Schema { field, .. } => assert_eq!(field, "V[2].alpha"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }
}
