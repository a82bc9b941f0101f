//! Shared fixture loading and seeded generators for the integration
//! suites. Every random object is drawn from a `ChaCha8Rng` with an
//! explicit seed so failures replay exactly.

// Each integration target compiles its own copy of this module and uses a
// different slice of it.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use perinorm::algebra::{
    enumerate_indices, Codomain, EigenBasis, HomoPoly, PolyMap, SystemSpec, TrigPoly,
};
use perinorm::job::parse_job;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Bundled system descriptions, parsed through the same ingest path the
/// command-line interface uses.
pub fn fixture(name: &str) -> SystemSpec {
    let text = match name {
        "uncouple_basic" => include_str!("../../fixtures/uncouple_basic.json"),
        "hopf" => include_str!("../../fixtures/hopf.json"),
        "touze_amabili" => include_str!("../../fixtures/touze_amabili.json"),
        "resonant" => include_str!("../../fixtures/resonant.json"),
        other => panic!("unknown fixture {other}"),
    };
    parse_job(text, name).expect("bundled fixture parses")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Print one verdict line for an acceptance criterion, then enforce it.
pub fn gate(name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("{verdict}  {name}  [{detail}]");
    assert!(ok, "{name}: {detail}");
}

/// Real trigonometric polynomial with modes up to `kmax` and coefficients
/// of size `amp`.
pub fn random_trig(r: &mut ChaCha8Rng, period: f64, dim: usize, kmax: i64, amp: f64) -> TrigPoly {
    let mut modes = Vec::new();
    let real_vec = DVector::from_fn(dim, |_, _| {
        Complex64::new(amp * (2.0 * r.gen::<f64>() - 1.0), 0.0)
    });
    modes.push((0i64, real_vec));
    for k in 1..=kmax.max(0) {
        let v = DVector::from_fn(dim, |_, _| {
            Complex64::new(
                amp * (2.0 * r.gen::<f64>() - 1.0),
                amp * (2.0 * r.gen::<f64>() - 1.0),
            )
        });
        let conj = v.map(|z| z.conj());
        modes.push((k, v));
        modes.push((-k, conj));
    }
    TrigPoly::from_modes(period, dim, modes, true).expect("conjugate-symmetric modes")
}

/// Homogeneous part with random support: at most `max_terms` monomials of
/// the given degree, each carrying a random real trigonometric coefficient.
pub fn random_homo(
    r: &mut ChaCha8Rng,
    vars: usize,
    degree: u32,
    dim: usize,
    codomain: Codomain,
    period: f64,
    kmax: i64,
    max_terms: usize,
) -> HomoPoly {
    let mut alphas = enumerate_indices(degree, vars);
    alphas.shuffle(r);
    alphas.truncate(max_terms.max(1));
    let mut h = HomoPoly::zero(vars, degree, dim, codomain, period);
    for alpha in alphas {
        h.add_term(alpha, random_trig(r, period, dim, kmax, 1.0))
            .expect("term shapes agree");
    }
    h
}

/// Uniform draw from the closed ball of the given radius.
pub fn ball_point(r: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
    let g = DVector::from_fn(dim, |_, _| r.sample::<f64, _>(StandardNormal));
    let norm = g.norm().max(1e-300);
    let u: f64 = r.gen();
    g * (radius * u.powf(1.0 / dim as f64) / norm)
}

/// Diagonal two-block system with well-separated real spectra: the first
/// block's eigenvalues are positive and the second's negative, so every
/// uncoupling divisor has real part at least 0.9 and the instance is
/// non-resonant at every degree and mode. The eigenbasis is the identity,
/// which keeps the graded norms of the solver's internal coordinates equal
/// to the reported ones.
pub fn random_diag_spec(r: &mut ChaCha8Rng) -> SystemSpec {
    let m0 = r.gen_range(1..=4usize);
    let m1 = r.gen_range(1..=4usize);
    let period = r.gen_range(3.0..9.0);
    let lam0: Vec<f64> = (0..m0).map(|_| r.gen_range(0.3..2.0)).collect();
    let lam1: Vec<f64> = (0..m1).map(|_| r.gen_range(-2.0..-0.3)).collect();
    let l0 = DMatrix::from_diagonal(&DVector::from_vec(lam0.clone()));
    let l1 = DMatrix::from_diagonal(&DVector::from_vec(lam1));
    let l0_eig = EigenBasis::trivial(lam0.iter().map(|&x| Complex64::new(x, 0.0)).collect());
    let m = m0 + m1;
    SystemSpec {
        period,
        m0,
        m1,
        l0,
        l0_eig,
        l1,
        nu: None,
        v: PolyMap::zero(m, m, Codomain::Full, period),
        c: 1.0,
        rho: 1.0,
        ell: 2,
        epsilon_index: None,
        complex_ok: false,
        label: "random-diagonal".into(),
    }
}
