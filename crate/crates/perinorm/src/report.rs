//! Deterministic artifact emission: reports, coefficient dumps, sweep tables.
//!
//! Serialization is hand-rolled on purpose. Keys live in ordered maps,
//! floats print as `{:.16e}` (17 significant digits, enough to reproduce
//! every f64 bit for bit), and non-finite values are refused rather than
//! smuggled out as `null`. Two runs with the same seed therefore produce
//! byte-identical files. Re-ingestion of coefficient dumps goes through
//! `serde_json` instead, so reading and writing never share a code path.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{Codomain, HomoPoly, MultiIndex, PolyMap, TrigPoly};
use crate::error::{Error, Result};
use crate::normalform::{CriteriaReport, NormalFormRun, StageAudit};
use crate::spectrum::{CertifiedScan, NormalFormConstants, ScanTuple, UncouplingConstants};
use crate::uncouple::UncouplingRun;
use crate::verify::{DriftReport, OracleReport, SweepReport};

/// A JSON value with ordered keys and explicit integer/float split.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj(pairs: impl IntoIterator<Item = (&'static str, Json)>) -> Json {
        Json::Obj(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    /// Render to a canonical pretty-printed string.
    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        self.write(&mut out, 0)?;
        out.push('\n');
        Ok(out)
    }

    fn write(&self, out: &mut String, indent: usize) -> Result<()> {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(x) => {
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "refusing to serialize non-finite value {x}"
                    )));
                }
                out.push_str(&format!("{x:.16e}"));
            }
            Json::Str(s) => escape_into(s, out),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return Ok(());
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(map) => {
                if map.is_empty() {
                    out.push_str("{}");
                    return Ok(());
                }
                out.push('{');
                for (i, (key, value)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    escape_into(key, out);
                    out.push_str(": ");
                    value.write(out, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
        Ok(())
    }
}

fn push_indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn escape_into(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn num(x: f64) -> Json {
    Json::Num(x)
}

fn int(i: impl TryInto<i64>) -> Json {
    Json::Int(i.try_into().unwrap_or(i64::MAX))
}

fn opt_num(x: Option<f64>) -> Json {
    match x {
        Some(v) => Json::Num(v),
        None => Json::Null,
    }
}

fn str_of(codomain: Codomain) -> &'static str {
    match codomain {
        Codomain::E0 => "E0",
        Codomain::E1 => "E1",
        Codomain::Full => "full",
    }
}

// ---------------------------------------------------------------------------
// Coefficient dumps (results.json) and their re-ingestion.
// ---------------------------------------------------------------------------

/// Serialize a polynomial map. Terms are listed per multi-index, per
/// component, per Fourier mode, all in ascending order; exact zeros are
/// skipped and reconstruct as absent modes.
pub fn map_to_json(map: &PolyMap) -> Json {
    let mut terms = Vec::new();
    for (_, part) in map.parts() {
        for (alpha, coeff) in part.terms() {
            for comp in 0..coeff.dim() {
                let mut modes = Vec::new();
                for (k, v) in coeff.modes() {
                    let z = v[comp];
                    if z != Complex64::new(0.0, 0.0) {
                        modes.push(Json::obj([
                            ("k", int(k)),
                            ("re", num(z.re)),
                            ("im", num(z.im)),
                        ]));
                    }
                }
                if !modes.is_empty() {
                    terms.push(Json::obj([
                        (
                            "alpha",
                            Json::Arr(
                                alpha
                                    .exponents()
                                    .iter()
                                    .map(|&e| int(i64::from(e)))
                                    .collect(),
                            ),
                        ),
                        ("component", int(comp as i64)),
                        ("modes", Json::Arr(modes)),
                    ]));
                }
            }
        }
    }
    Json::obj([
        ("vars", int(map.vars() as i64)),
        ("dim", int(map.dim() as i64)),
        ("codomain", Json::Str(str_of(map.codomain()).to_string())),
        ("period", num(map.period())),
        ("terms", Json::Arr(terms)),
    ])
}

fn value_usize(v: &serde_json::Value, field: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::Schema {
            field: field.to_string(),
            message: "expected a non-negative integer".to_string(),
        })
}

fn value_f64(v: &serde_json::Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Schema {
        field: field.to_string(),
        message: "expected a number".to_string(),
    })
}

/// Rebuild a polynomial map from its serialized form. This is the reader
/// half of the round trip and shares no code with [`map_to_json`].
pub fn map_from_json(value: &serde_json::Value) -> Result<PolyMap> {
    let vars = value_usize(&value["vars"], "vars")?;
    let dim = value_usize(&value["dim"], "dim")?;
    let period = value_f64(&value["period"], "period")?;
    let codomain = match value["codomain"].as_str() {
        Some("E0") => Codomain::E0,
        Some("E1") => Codomain::E1,
        Some("full") => Codomain::Full,
        other => {
            return Err(Error::Schema {
                field: "codomain".to_string(),
                message: format!("unknown codomain {other:?}"),
            });
        }
    };
    let terms = value["terms"].as_array().ok_or_else(|| Error::Schema {
        field: "terms".to_string(),
        message: "expected an array".to_string(),
    })?;

    let mut acc: BTreeMap<MultiIndex, BTreeMap<i64, DVector<Complex64>>> = BTreeMap::new();
    for (i, term) in terms.iter().enumerate() {
        let alpha_arr = term["alpha"].as_array().ok_or_else(|| Error::Schema {
            field: format!("terms[{i}].alpha"),
            message: "expected an array".to_string(),
        })?;
        let mut exps = Vec::with_capacity(alpha_arr.len());
        for (j, e) in alpha_arr.iter().enumerate() {
            exps.push(value_usize(e, &format!("terms[{i}].alpha[{j}]"))? as u32);
        }
        if exps.len() != vars {
            return Err(Error::Schema {
                field: format!("terms[{i}].alpha"),
                message: format!("expected {vars} exponents, got {}", exps.len()),
            });
        }
        let comp = value_usize(&term["component"], &format!("terms[{i}].component"))?;
        if comp >= dim {
            return Err(Error::Schema {
                field: format!("terms[{i}].component"),
                message: format!("component {comp} outside 0..{dim}"),
            });
        }
        let modes = term["modes"].as_array().ok_or_else(|| Error::Schema {
            field: format!("terms[{i}].modes"),
            message: "expected an array".to_string(),
        })?;
        let slot = acc.entry(MultiIndex::new(exps)).or_default();
        for (mi, mode) in modes.iter().enumerate() {
            let k = mode["k"].as_i64().ok_or_else(|| Error::Schema {
                field: format!("terms[{i}].modes[{mi}].k"),
                message: "expected an integer".to_string(),
            })?;
            let re = value_f64(&mode["re"], &format!("terms[{i}].modes[{mi}].re"))?;
            let im = value_f64(&mode["im"], &format!("terms[{i}].modes[{mi}].im"))?;
            let v = slot
                .entry(k)
                .or_insert_with(|| DVector::<Complex64>::zeros(dim));
            v[comp] += Complex64::new(re, im);
        }
    }

    let mut by_degree: BTreeMap<u32, HomoPoly> = BTreeMap::new();
    for (alpha, modes) in acc {
        let n = alpha.degree();
        let part = by_degree
            .entry(n)
            .or_insert_with(|| HomoPoly::zero(vars, n, dim, codomain, period));
        let coeff = TrigPoly::from_modes(period, dim, modes.into_iter().collect::<Vec<_>>(), false)?;
        part.add_term(alpha, coeff)?;
    }
    let mut map = PolyMap::zero(vars, dim, codomain, period);
    for (_, part) in by_degree {
        map.set_part(part)?;
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Report builders.
// ---------------------------------------------------------------------------

fn tuple_json(t: &ScanTuple) -> Json {
    Json::obj([
        (
            "alpha",
            Json::Arr(
                t.alpha
                    .exponents()
                    .iter()
                    .map(|&e| int(i64::from(e)))
                    .collect(),
            ),
        ),
        ("k", int(t.k)),
        ("j", int(t.j as i64)),
        ("divisor_abs", num(t.divisor_abs)),
    ])
}

pub fn scan_json(scan: &CertifiedScan) -> Json {
    Json::obj([
        ("reduction", Json::Str(scan.reduction.as_str().to_string())),
        ("tau", num(scan.tau)),
        ("tol_res", num(scan.tol_res)),
        ("degree_max", int(i64::from(scan.degree_max))),
        ("fourier_max", int(scan.fourier_max)),
        ("gamma_eff", num(scan.gamma_eff)),
        ("worst", tuple_json(&scan.worst)),
        (
            "resonant",
            Json::Arr(scan.resonant.iter().map(tuple_json).collect()),
        ),
        (
            "borderline",
            Json::Arr(scan.borderline.iter().map(tuple_json).collect()),
        ),
    ])
}

pub fn uncoupling_constants_json(k: &UncouplingConstants) -> Json {
    Json::obj([
        ("gamma", num(k.gamma)),
        ("tau", num(k.tau)),
        ("nu", int(i64::from(k.nu))),
        ("ell", int(i64::from(k.ell))),
        ("lambda_max", num(k.lambda_max)),
        ("period", num(k.period)),
        ("c_j", Json::Arr(k.c_j.iter().map(|&v| num(v)).collect())),
        ("conv", num(k.conv)),
        ("p0_norm", num(k.p0_norm)),
        ("cap_k", num(k.cap_k)),
        ("b", num(k.b)),
        ("omega_decay", num(k.omega_decay)),
        ("delta_star", num(k.delta_star)),
        ("m_big", num(k.m_big)),
        ("m_one", num(k.m_one)),
        ("m_zero", num(k.m_zero)),
    ])
}

pub fn normal_form_constants_json(k: &NormalFormConstants) -> Json {
    Json::obj([
        ("gamma", num(k.gamma)),
        ("tau", num(k.tau)),
        ("ell", int(i64::from(k.ell))),
        ("lambda_max", num(k.lambda_max)),
        ("period", num(k.period)),
        ("c_j", Json::Arr(k.c_j.iter().map(|&v| num(v)).collect())),
        ("conv", num(k.conv)),
        ("cap_c", num(k.cap_c)),
        ("b", num(k.b)),
        ("omega_decay", num(k.omega_decay)),
        ("delta_star", num(k.delta_star)),
        ("script_m", num(k.script_m)),
        ("m_prime", num(k.m_prime)),
    ])
}

pub fn uncoupling_report(run: &UncouplingRun) -> Json {
    Json::obj([
        ("label", Json::Str(run.label.clone())),
        ("route", Json::Str("uncouple".to_string())),
        ("delta", num(run.delta)),
        ("p", int(i64::from(run.p))),
        ("p_opt", int(i64::from(run.p_opt))),
        ("d_max", int(i64::from(run.d_max))),
        ("seed", int(run.seed as i64)),
        ("scan", scan_json(&run.scan)),
        ("constants", uncoupling_constants_json(&run.constants)),
        (
            "bounds",
            Json::obj([
                ("certified", num(run.certified_bound)),
                ("sampled", num(run.sampled_sup)),
                ("a_priori", num(run.a_priori_bound)),
                ("a_priori_applicable", Json::Bool(run.a_priori_applicable)),
            ]),
        ),
        (
            "gevrey",
            Json::Arr(
                run.gevrey
                    .iter()
                    .map(|row| {
                        Json::obj([
                            ("degree", int(i64::from(row.degree))),
                            ("norm", num(row.norm)),
                            ("log_bound", num(row.log_bound)),
                            ("ok", Json::Bool(row.ok)),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "residuals",
            Json::obj([
                ("identity", num(run.identity_residual)),
                ("stage", num(run.stage_residual)),
            ]),
        ),
        (
            "transformed_envelope",
            Json::obj([
                ("sup_ratio", num(run.transformed.quadratic_envelope.sup_ratio)),
                ("bound", num(run.transformed.quadratic_envelope.bound)),
                (
                    "samples",
                    int(run.transformed.quadratic_envelope.samples as i64),
                ),
                ("radius", num(run.transformed.quadratic_envelope.radius)),
            ]),
        ),
    ])
}

fn audit_json(a: &StageAudit) -> Json {
    Json::obj([
        ("degree", int(i64::from(a.degree))),
        ("resonant_ok", Json::Bool(a.resonant_ok)),
        ("worst_resonant_ratio", num(a.worst_resonant_ratio)),
        ("phi_ok", Json::Bool(a.phi_ok)),
        ("worst_phi_ratio", num(a.worst_phi_ratio)),
    ])
}

pub fn criteria_json(c: &CriteriaReport) -> Json {
    Json::obj([
        ("invariance_residual", num(c.invariance_residual)),
        ("coefficient_residual", num(c.coefficient_residual)),
        ("control_invariance", num(c.control_invariance)),
        ("control_coefficient", num(c.control_coefficient)),
        ("samples", int(c.samples as i64)),
        ("ok", Json::Bool(c.ok)),
    ])
}

pub fn normal_form_report(run: &NormalFormRun, criteria: Option<&CriteriaReport>) -> Json {
    Json::obj([
        ("label", Json::Str(run.label.clone())),
        ("route", Json::Str("normalize".to_string())),
        ("delta", num(run.delta)),
        ("p", int(i64::from(run.p))),
        ("p_opt", int(i64::from(run.p_opt))),
        ("cap_r", int(i64::from(run.cap_r))),
        ("seed", int(run.seed as i64)),
        ("scan", scan_json(&run.scan)),
        ("constants", normal_form_constants_json(&run.constants)),
        (
            "resonant_tuples",
            Json::Arr(run.resonant_tuples.iter().map(tuple_json).collect()),
        ),
        (
            "bounds",
            Json::obj([
                ("computed", num(run.computed_bound)),
                ("tail_ratio", opt_num(run.tail_ratio)),
                ("tail_estimate", opt_num(run.tail_estimate)),
                ("sampled", num(run.sampled_sup)),
                ("a_priori", num(run.a_priori_bound)),
                ("a_priori_applicable", Json::Bool(run.a_priori_applicable)),
            ]),
        ),
        (
            "residuals",
            Json::obj([
                ("identity", num(run.identity_residual)),
                ("stage", num(run.stage_residual)),
            ]),
        ),
        ("min_divisor_used", num(run.min_divisor_used)),
        (
            "stage_audits",
            Json::Arr(run.stage_audits.iter().map(audit_json).collect()),
        ),
        (
            "criteria",
            criteria.map(criteria_json).unwrap_or(Json::Null),
        ),
    ])
}

pub fn oracle_json(o: &OracleReport) -> Json {
    Json::obj([
        ("reduction", Json::Str(o.reduction.as_str().to_string())),
        ("p", int(i64::from(o.p))),
        ("unknowns", int(o.unknowns as i64)),
        ("phi_gap", num(o.phi_gap)),
        ("resonant_gap", num(o.resonant_gap)),
        ("kernel_match", Json::Bool(o.kernel_match)),
        ("ok", Json::Bool(o.ok)),
    ])
}

pub fn drift_json(d: &DriftReport) -> Json {
    Json::obj([
        ("sup_drift", num(d.sup_drift)),
        ("allowed_drift", num(d.allowed_drift)),
        ("ok_drift", Json::Bool(d.ok_drift)),
        ("zeroed_drift", num(d.zeroed_drift)),
        ("ok_zeroed", Json::Bool(d.ok_zeroed)),
        ("pushforward_defect", num(d.pushforward_defect)),
        ("ok_pushforward", Json::Bool(d.ok_pushforward)),
        ("t_end", num(d.t_end)),
        ("steps", int(d.steps as i64)),
        ("ok", Json::Bool(d.ok)),
    ])
}

/// Coefficient dump for an uncoupling run: the change of variables and the
/// exact terminal remainder.
pub fn uncoupling_results(run: &UncouplingRun) -> Json {
    Json::obj([
        ("label", Json::Str(run.label.clone())),
        ("route", Json::Str("uncouple".to_string())),
        ("delta", num(run.delta)),
        ("p", int(i64::from(run.p))),
        ("seed", int(run.seed as i64)),
        ("phi", map_to_json(&run.phi)),
        ("remainder", map_to_json(&run.remainder)),
    ])
}

/// Coefficient dump for a normal-form run: the change of variables, the
/// resonant part, and the computed remainder coefficients.
pub fn normal_form_results(run: &NormalFormRun) -> Json {
    Json::obj([
        ("label", Json::Str(run.label.clone())),
        ("route", Json::Str("normalize".to_string())),
        ("delta", num(run.delta)),
        ("p", int(i64::from(run.p))),
        ("seed", int(run.seed as i64)),
        ("phi", map_to_json(&run.phi)),
        ("resonant", map_to_json(&run.resonant)),
        ("remainder", map_to_json(&run.remainder)),
    ])
}

/// Sweep table as CSV, one row per radius, floats at full precision.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "delta,p,p_opt,certified_bound,sampled_sup,a_priori_bound,a_priori_applicable\n",
    );
    for row in &report.rows {
        out.push_str(&format!(
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{}\n",
            row.delta,
            row.p,
            row.p_opt,
            row.certified_bound,
            row.sampled_sup,
            row.a_priori_bound,
            row.a_priori_applicable
        ));
    }
    out
}

pub fn sweep_json(report: &SweepReport) -> Json {
    Json::obj([
        (
            "rows",
            Json::Arr(
                report
                    .rows
                    .iter()
                    .map(|row| {
                        Json::obj([
                            ("delta", num(row.delta)),
                            ("p", int(i64::from(row.p))),
                            ("p_opt", int(i64::from(row.p_opt))),
                            ("certified_bound", num(row.certified_bound)),
                            ("sampled_sup", num(row.sampled_sup)),
                            ("a_priori_bound", num(row.a_priori_bound)),
                            (
                                "a_priori_applicable",
                                Json::Bool(row.a_priori_applicable),
                            ),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("strictly_decreasing", Json::Bool(report.strictly_decreasing)),
        ("log_slope", opt_num(report.log_slope)),
        ("slope_ok", Json::Bool(report.slope_ok)),
        ("omega", num(report.omega)),
        ("b", num(report.b)),
    ])
}

/// Write rendered text, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::SystemSpec;
    use crate::uncouple::{run_uncoupling, RunOptions};

    fn small_run() -> UncouplingRun {
        let spec = SystemSpec::basic();
        run_uncoupling(
            &spec,
            &RunOptions {
                delta: 0.1,
                p_override: Some(3),
                ..RunOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn coefficient_dump_round_trips_bit_for_bit() {
        let run = small_run();
        let dumped = map_to_json(&run.phi).render().unwrap();
        let value: serde_json::Value = serde_json::from_str(&dumped).unwrap();
        let rebuilt = map_from_json(&value).unwrap();
        assert_eq!(rebuilt.vars(), run.phi.vars());
        assert_eq!(rebuilt.dim(), run.phi.dim());
        let gap = rebuilt.sub(&run.phi).unwrap().max_coeff();
        assert_eq!(gap, 0.0, "round trip must be exact, gap {gap}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let run = small_run();
        let a = uncoupling_report(&run).render().unwrap();
        let b = uncoupling_report(&small_run()).render().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rendered_report_is_valid_json() {
        let run = small_run();
        let text = uncoupling_report(&run).render().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["route"], "uncouple");
        assert!(value["bounds"]["certified"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn non_finite_values_are_refused() {
        let bad = Json::obj([("x", Json::Num(f64::NAN))]);
        assert!(bad.render().is_err());
    }

    #[test]
    fn csv_has_one_row_per_radius() {
        let spec = SystemSpec::basic();
        let report = crate::verify::delta_sweep(
            &spec,
            &[0.1, 0.05],
            &RunOptions::default(),
            Some(1),
        )
        .unwrap();
        let csv = sweep_csv(&report);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("delta,p,"));
    }

    #[test]
    fn strings_are_escaped() {
        let j = Json::obj([("s", Json::Str("a\"b\\c\nd".to_string()))]);
        let text = j.render().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["s"], "a\"b\\c\nd");
    }
}
