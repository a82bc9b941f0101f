//! End-to-end construction of the uncoupling change of variables.
//!
//! For du/dt = L u + V(u, t) with block-diagonal L = diag(L0, L1) the
//! substitution u1 = v1 + Phi(u0, t) is built degree by degree so that the
//! v1-equation keeps no v1-independent forcing below the truncation degree.
//! Writing iota(u0, t) = (u0, Phi(u0, t)) and W = V o iota, the degree-n
//! right-hand side is
//!
//!   RHS_n = part_n(W^1) - sum_{j >= 2} D Phi_j . part_{n+1-j}(W^0),
//!
//! which only involves coefficients of degree below n, so each stage is one
//! exact homological solve. The construction ships with its own audit
//! trail: per-stage forward residuals, coefficient growth against the
//! certified base, the exact terminal remainder with a summed sup bound,
//! the transformed system with its structural v1-factorization, and a
//! sampled check of the quadratic smallness envelope.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{
    compose, directional_derivative_map, Codomain, HomoPoly, PolyMap, SystemSpec, DEG_INF,
};
use crate::error::{Error, Result};
use crate::homological::{apply_forward, solve_uncoupling_stage};
use crate::norms::{graded_norm, hj_norm};
use crate::spectrum::{
    check_nonresonance, CertifiedScan, EigenData, Reduction, UncouplingConstants,
};
use crate::tol;

/// Options for one uncoupling run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Radius of the ball the remainder bound is certified on.
    pub delta: f64,
    /// Truncation degree override; the optimal degree is used when absent
    /// (clamped to at least 2 so the construction is never empty).
    pub p_override: Option<u32>,
    /// Diophantine exponent of the non-resonance certificate.
    pub tau: f64,
    /// Resonance tolerance override.
    pub tol_res: Option<f64>,
    /// Cap on the highest remainder degree computed. Defaults to the exact
    /// composition depth; a cap below it makes the certified sum cover only
    /// the computed degrees (the a-priori bound still covers the rest).
    pub d_max: Option<u32>,
    /// Seed for the sampled checks.
    pub seed: u64,
    /// Sample count for the sampled checks.
    pub samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            delta: 0.1,
            p_override: None,
            tau: 1.0,
            tol_res: None,
            d_max: None,
            seed: 0,
            samples: 500,
        }
    }
}

/// Per-degree audit of the computed coefficient against the growth law.
#[derive(Debug, Clone)]
pub struct GevreyRow {
    pub degree: u32,
    /// Graded norm of the degree-n coefficient at Sobolev exponent ell.
    pub norm: f64,
    /// Log of the certified growth bound sqrt(m0) K^(n-1) (n!)^(1/b).
    pub log_bound: f64,
    pub ok: bool,
}

/// Result of a sampled inequality check.
#[derive(Debug, Clone)]
pub struct SampledBound {
    /// Largest sampled ratio (left side over right side without the
    /// certified prefactor).
    pub sup_ratio: f64,
    /// The certified prefactor the ratio is compared against.
    pub bound: f64,
    pub samples: usize,
    /// Radius of the sampled ball.
    pub radius: f64,
    pub ok: bool,
}

/// The system after the change of variables.
#[derive(Debug, Clone)]
pub struct TransformedSystem {
    /// Forcing of the v0-equation, a function of the full state v.
    pub v0: PolyMap,
    /// Forcing of the v1-equation after the uncoupling; every monomial
    /// carries at least one power of v1.
    pub v1: PolyMap,
    /// Sampled check of |V1(v, t)| <= M0 |v1| (|v0| + |v1|).
    pub quadratic_envelope: SampledBound,
}

/// Everything produced by one uncoupling run.
#[derive(Debug, Clone)]
pub struct UncouplingRun {
    pub label: String,
    pub delta: f64,
    /// Degree actually used.
    pub p: u32,
    /// Degree minimizing the certified bound (before the floor at 2).
    pub p_opt: u32,
    pub scan: CertifiedScan,
    pub constants: UncouplingConstants,
    /// The change of variables, degrees 2..=p, mapping (u0, t) into the
    /// second block.
    pub phi: PolyMap,
    pub gevrey: Vec<GevreyRow>,
    /// Exact terminal remainder of the v1-equation, a function of (u0, t).
    pub remainder: PolyMap,
    /// Highest degree present in the remainder.
    pub d_max: u32,
    /// sum_n ||R_n|| delta^n: certified sup of the remainder on the ball.
    pub certified_bound: f64,
    /// Sampled sup of |R(u0, t)|_{H^ell} over the ball, for cross-checking.
    pub sampled_sup: f64,
    /// The a-priori bound M exp(-omega/delta^b).
    pub a_priori_bound: f64,
    /// Whether delta <= delta_star and p == p_opt, i.e. whether the
    /// a-priori bound applies verbatim to this run.
    pub a_priori_applicable: bool,
    /// Worst per-degree relative residual of A(Phi) + R = W^1 - DPhi.W^0.
    pub identity_residual: f64,
    pub transformed: TransformedSystem,
    /// Largest forward residual over the stages.
    pub stage_residual: f64,
    /// Smallest divisor distance met while solving.
    pub min_divisor: f64,
    pub seed: u64,
}

pub(crate) fn embed_block(m: usize, offset: usize, block: usize) -> DMatrix<Complex64> {
    let mut e = DMatrix::<Complex64>::zeros(m, block);
    for i in 0..block {
        e[(offset + i, i)] = Complex64::new(1.0, 0.0);
    }
    e
}

/// iota(u0, t) = (u0, Phi(u0, t)) as a map from the first block into the
/// full space.
fn augmented_inclusion(phi: &PolyMap, m0: usize, m1: usize, period: f64) -> Result<PolyMap> {
    let m = m0 + m1;
    let mut incl = DMatrix::<Complex64>::zeros(m, m0);
    for i in 0..m0 {
        incl[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let mut map = PolyMap::linear(&incl, period);
    let lifted = phi.apply_matrix(&embed_block(m, m0, m1), Codomain::Full)?;
    map = map.add(&lifted)?;
    Ok(map)
}

/// Verify the stated analytic envelope ||V_n||_{n, H^ell} <= c / rho^n.
pub(crate) fn check_envelope(spec: &SystemSpec) -> Result<()> {
    for (n, part) in spec.v.parts() {
        let norm = graded_norm(part, spec.ell)?;
        let cap = spec.c / spec.rho.powi(n as i32);
        if norm > cap * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "degree-{n} forcing norm {norm:.6e} exceeds the stated envelope c/rho^n = {cap:.6e}"
            )));
        }
    }
    Ok(())
}

/// Drop monomials without any power of the second-block variables,
/// verifying first that they are numerical dust.
fn strip_v1_free(map: &PolyMap, m0: usize, what: &str) -> Result<PolyMap> {
    let scale = 1.0 + map.max_coeff();
    let mut out = PolyMap::zero(map.vars(), map.dim(), map.codomain(), map.period());
    for (_, part) in map.parts() {
        let mut kept = HomoPoly::zero(
            part.vars(),
            part.degree(),
            part.dim(),
            part.codomain(),
            part.period(),
        );
        for (alpha, coeff) in part.terms() {
            let v1_degree: u32 = alpha.exponents()[m0..].iter().sum();
            if v1_degree == 0 {
                let worst = coeff.max_coeff();
                if worst > tol::REAL_ROUNDTRIP * scale {
                    return Err(Error::ToleranceFailure {
                        what: format!("{what}: v1-independent term {alpha} must cancel"),
                        residual: worst / scale,
                        tol: tol::REAL_ROUNDTRIP,
                    });
                }
                continue;
            }
            kept.add_term(alpha.clone(), coeff.clone())?;
        }
        if !kept.is_zero() {
            out.set_part(kept)?;
        }
    }
    Ok(out)
}

/// Certified sup bound sum_n ||R_n||_{n, H^ell} delta^n of a map on the
/// delta-ball.
pub fn certified_sup_bound(r: &PolyMap, delta: f64, ell: u32) -> Result<f64> {
    let mut acc = 0.0;
    for (n, part) in r.parts() {
        acc += graded_norm(part, ell)? * delta.powi(n as i32);
    }
    Ok(acc)
}

/// Sampled sup of |R(x, .)|_{H^ell} over the delta-ball.
pub fn sampled_sup(r: &PolyMap, delta: f64, ell: u32, rng: &mut ChaCha8Rng, samples: usize) -> Result<f64> {
    let d = r.vars();
    let mut sup = 0.0f64;
    for i in 0..samples {
        let mut x = DVector::<f64>::zeros(d);
        let mut norm2 = 0.0;
        for v in x.iter_mut() {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
            norm2 += *v * *v;
        }
        if norm2 == 0.0 {
            continue;
        }
        // Two thirds of the samples sit on the sphere, the rest inside.
        let radius = if i % 3 == 2 {
            delta * rng.gen::<f64>()
        } else {
            delta
        };
        let scale = radius / norm2.sqrt();
        let point = x.map(|v| v * scale);
        let section = r.eval_point(&point)?;
        sup = sup.max(hj_norm(&section, ell));
    }
    Ok(sup)
}

/// Build the change of variables and all certificates for one radius.
pub fn run_uncoupling(spec: &SystemSpec, opts: &RunOptions) -> Result<UncouplingRun> {
    spec.validate()?;
    check_envelope(spec)?;
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {}",
            opts.delta
        )));
    }
    let eig = EigenData::from_spec(spec, Reduction::Uncoupling)?;
    let tol_res = opts.tol_res.unwrap_or_else(|| eig.default_tol_res());
    let enforce_real = !spec.complex_ok;
    let m0 = spec.m0;
    let m1 = spec.m1;

    // Certify non-resonance over the degrees actually used. The effective
    // gamma can only shrink as the caps grow and the optimal degree shrinks
    // as gamma does, so this settles in a few rounds.
    let mut cap_degree = opts.p_override.map(|p| p.max(2)).unwrap_or(4);
    let (scan, constants, p, p_opt) = loop {
        let scan = check_nonresonance(
            &eig,
            opts.tau,
            tol_res,
            cap_degree,
            spec.k_needed(cap_degree),
        )?;
        scan.require_clean()?;
        let constants = UncouplingConstants::new(spec, &eig, scan.gamma_eff, opts.tau)?;
        let p_opt = constants.p_opt(opts.delta);
        let p = opts.p_override.unwrap_or(p_opt).max(2);
        if p <= cap_degree {
            break (scan, constants, p, p_opt);
        }
        cap_degree = p;
    };

    // Degree-by-degree construction.
    let mut phi = PolyMap::zero(m0, m1, Codomain::E1, spec.period);
    let mut gevrey = Vec::new();
    let mut stage_residual = 0.0f64;
    let mut min_divisor = f64::INFINITY;
    for n in 2..=p {
        let iota = augmented_inclusion(&phi, m0, m1, spec.period)?;
        let w = compose(&spec.v, &iota, n)?;
        let w0 = w.slice_components(0, m0, Codomain::E0);
        let w1 = w.slice_components(m0, m1, Codomain::E1);
        let transport = directional_derivative_map(&phi, &w0, n)?;
        let mut rhs = w1
            .part(n)
            .cloned()
            .unwrap_or_else(|| HomoPoly::zero(m0, n, m1, Codomain::E1, spec.period));
        if let Some(t) = transport.part(n) {
            rhs = rhs.sub(t)?;
        }
        if rhs.is_zero() {
            gevrey.push(GevreyRow {
                degree: n,
                norm: 0.0,
                log_bound: constants.gevrey_log_bound(n, m0),
                ok: true,
            });
            continue;
        }
        let sol = solve_uncoupling_stage(&spec.l0_eig, &spec.l0, &spec.l1, &rhs, tol_res, enforce_real)?;
        stage_residual = stage_residual.max(sol.residual);
        min_divisor = min_divisor.min(sol.min_divisor);
        let norm = graded_norm(&sol.phi, spec.ell)?;
        let log_bound = constants.gevrey_log_bound(n, m0);
        gevrey.push(GevreyRow {
            degree: n,
            norm,
            log_bound,
            ok: norm <= 0.0 || norm.ln() <= log_bound + 1e-9,
        });
        phi.set_part(sol.phi)?;
    }

    // Exact remainder: everything of W^1 - DPhi.W^0 above degree p.
    let cap = match opts.d_max {
        Some(d) => d.max(p + 1),
        None => (spec.deg_v() + 1) * p,
    };
    let iota = augmented_inclusion(&phi, m0, m1, spec.period)?;
    let w = compose(&spec.v, &iota, cap)?;
    let w0 = w.slice_components(0, m0, Codomain::E0);
    let w1 = w.slice_components(m0, m1, Codomain::E1);
    let h = w1.sub(&directional_derivative_map(&phi, &w0, cap)?)?;
    let mut remainder = h.project(p + 1, DEG_INF)?;
    if enforce_real {
        remainder.assert_real(tol::REAL_ROUNDTRIP)?;
    }
    let d_max = remainder.hi().unwrap_or(p);

    // Defining identity A(Phi) + R = H, all degrees.
    let mut a_phi = PolyMap::zero(m0, m1, Codomain::E1, spec.period);
    for (_, part) in phi.parts() {
        a_phi.set_part(apply_forward(&spec.l0, &spec.l1, part)?)?;
    }
    let full_defect = a_phi.add(&remainder)?.sub(&h)?;
    let mut identity_residual = 0.0f64;
    for (n, part) in full_defect.parts() {
        let scale = h
            .part(n)
            .map(|q| graded_norm(q, 0))
            .transpose()?
            .unwrap_or(0.0)
            .max(1.0);
        identity_residual = identity_residual.max(graded_norm(part, 0)? / scale);
    }

    // Remainder magnitudes: certified series bound, sampled cross-check,
    // a-priori bound.
    let certified_bound = certified_sup_bound(&remainder, opts.delta, spec.ell)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sampled = sampled_sup(&remainder, opts.delta, spec.ell, &mut rng, opts.samples)?;
    let a_priori_bound = constants.remainder_bound(opts.delta);
    let a_priori_applicable = opts.delta <= constants.delta_star && p == p_opt.max(2) && p_opt >= 2;

    // Transformed system and its structural checks.
    let transformed = transform(spec, &phi, &constants, opts)?;

    Ok(UncouplingRun {
        label: spec.label.clone(),
        delta: opts.delta,
        p,
        p_opt,
        scan,
        constants,
        phi,
        gevrey,
        remainder,
        d_max,
        certified_bound,
        sampled_sup: sampled,
        a_priori_bound,
        a_priori_applicable,
        identity_residual,
        transformed,
        stage_residual,
        min_divisor,
        seed: opts.seed,
    })
}

/// The system in the new variables, with the structural factorization of
/// the v1-forcing checked and enforced.
fn transform(
    spec: &SystemSpec,
    phi: &PolyMap,
    constants: &UncouplingConstants,
    opts: &RunOptions,
) -> Result<TransformedSystem> {
    let m0 = spec.m0;
    let m1 = spec.m1;
    let m = m0 + m1;
    let p = phi.hi().unwrap_or(2);
    let cap = (spec.deg_v() + 1) * p;
    let enforce_real = !spec.complex_ok;

    // Phi as a function of the full state (ignoring v1).
    let phi_w = phi.widen_domain(m0, m1);
    let lifted_phi = phi_w.apply_matrix(&embed_block(m, m0, m1), Codomain::Full)?;

    // J(v) = (v0, v1 + Phi(v0, t)), J0(v) = (v0, Phi(v0, t)).
    let j_map = PolyMap::identity(m, spec.period).add(&lifted_phi)?;
    let mut block0 = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m0 {
        block0[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let j0_map = PolyMap::linear(&block0, spec.period).add(&lifted_phi)?;

    let a = compose(&spec.v, &j_map, cap)?;
    let b = compose(&spec.v, &j0_map, cap)?;
    let mut v0_new = a.slice_components(0, m0, Codomain::E0);
    let a1 = a.slice_components(m0, m1, Codomain::E1);
    let b0 = b.slice_components(0, m0, Codomain::E0);
    let b1 = b.slice_components(m0, m1, Codomain::E1);

    // V1_new = V1 o J - V1 o J0 - DPhi . (V0 o J - V0 o J0).
    let diff0 = v0_new.sub(&b0)?;
    let diff0_lifted = diff0.apply_matrix(&embed_block(m, 0, m0), Codomain::Full)?;
    let transport = directional_derivative_map(&phi_w, &diff0_lifted, cap)?;
    let raw_v1 = a1.sub(&b1)?.sub(&transport)?;
    let mut v1_new = strip_v1_free(&raw_v1, m0, "transformed forcing")?;
    if enforce_real {
        v0_new.assert_real(tol::REAL_ROUNDTRIP)?;
        v1_new.assert_real(tol::REAL_ROUNDTRIP)?;
    }

    // Sampled quadratic envelope |V1| <= M0 |v1| (|v0| + |v1|) on the ball
    // where the certified constants cover it.
    let radius = opts.delta.min(constants.delta_star);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut sup_ratio = 0.0f64;
    for _ in 0..opts.samples {
        let mut point = DVector::<f64>::zeros(m);
        let mut n0 = 0.0;
        for i in 0..m0 {
            let v = rng.gen::<f64>() * 2.0 - 1.0;
            point[i] = v;
            n0 += v * v;
        }
        let mut n1 = 0.0;
        for i in m0..m {
            let v = rng.gen::<f64>() * 2.0 - 1.0;
            point[i] = v;
            n1 += v * v;
        }
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let r0 = radius * rng.gen::<f64>().max(1e-3);
        let r1 = radius * rng.gen::<f64>().max(1e-3);
        for i in 0..m0 {
            point[i] *= r0 / n0.sqrt();
        }
        for i in m0..m {
            point[i] *= r1 / n1.sqrt();
        }
        let t = rng.gen::<f64>() * spec.period;
        let value = v1_new.eval(&point, t)?;
        let lhs = value.norm();
        let rhs = r1 * (r0 + r1);
        sup_ratio = sup_ratio.max(lhs / rhs);
    }
    let quadratic_envelope = SampledBound {
        sup_ratio,
        bound: constants.m_zero,
        samples: opts.samples,
        radius,
        ok: sup_ratio <= constants.m_zero,
    };

    Ok(TransformedSystem {
        v0: v0_new,
        v1: v1_new,
        quadratic_envelope,
    })
}

/// Split of the change of variables along a distinguished auxiliary
/// coordinate, against an independent run with that coordinate removed.
#[derive(Debug, Clone)]
pub struct EpsilonSplit {
    /// Terms free of the auxiliary coordinate, expressed in the reduced
    /// variables.
    pub zero_slice: PolyMap,
    /// Terms carrying at least one power of the auxiliary coordinate.
    pub carrier_slice: PolyMap,
    /// The change of variables of the reduced system.
    pub reduced_phi: PolyMap,
    /// Largest coefficient gap between `zero_slice` and `reduced_phi`.
    pub max_gap: f64,
    pub ok: bool,
}

/// Compare the auxiliary-free slice of a run against the same construction
/// on the system with the auxiliary coordinate removed.
pub fn epsilon_split(spec: &SystemSpec, run: &UncouplingRun, opts: &RunOptions) -> Result<EpsilonSplit> {
    let idx = spec.epsilon_index.ok_or_else(|| {
        Error::InvalidArgument("system declares no auxiliary coordinate".into())
    })?;
    let m0 = spec.m0;

    // Split Phi by the exponent of the auxiliary coordinate.
    let mut zero_slice = PolyMap::zero(m0 - 1, spec.m1, Codomain::E1, spec.period);
    let mut carrier = PolyMap::zero(m0, spec.m1, Codomain::E1, spec.period);
    for (_, part) in run.phi.parts() {
        let mut zero_part = HomoPoly::zero(
            m0 - 1,
            part.degree(),
            part.dim(),
            part.codomain(),
            part.period(),
        );
        let mut carrier_part = HomoPoly::zero(
            m0,
            part.degree(),
            part.dim(),
            part.codomain(),
            part.period(),
        );
        for (alpha, coeff) in part.terms() {
            if alpha.get(idx) == 0 {
                zero_part.add_term(alpha.narrow(idx), coeff.clone())?;
            } else {
                carrier_part.add_term(alpha.clone(), coeff.clone())?;
            }
        }
        if !zero_part.is_zero() {
            zero_slice.set_part(zero_part)?;
        }
        if !carrier_part.is_zero() {
            carrier.set_part(carrier_part)?;
        }
    }

    // Reduced system: drop the auxiliary variable everywhere.
    let reduced = reduce_spec(spec, idx)?;
    let mut reduced_opts = opts.clone();
    reduced_opts.p_override = Some(run.p);
    let reduced_run = run_uncoupling(&reduced, &reduced_opts)?;

    let gap_map = zero_slice.sub(&reduced_run.phi)?;
    let max_gap = gap_map.max_coeff();
    let scale = 1.0 + run.phi.max_coeff();
    Ok(EpsilonSplit {
        zero_slice,
        carrier_slice: carrier,
        reduced_phi: reduced_run.phi,
        max_gap,
        ok: max_gap <= tol::NORM_CROSS_CHECK * scale,
    })
}

/// The system with the auxiliary first-block coordinate removed.
fn reduce_spec(spec: &SystemSpec, idx: usize) -> Result<SystemSpec> {
    let m0 = spec.m0;
    let m1 = spec.m1;
    let m = m0 + m1;
    // The auxiliary coordinate must be inert in the linear part.
    for i in 0..m0 {
        if spec.l0[(idx, i)].abs() > 0.0 || spec.l0[(i, idx)].abs() > 0.0 {
            return Err(Error::InvalidArgument(
                "auxiliary coordinate couples through the linear part".into(),
            ));
        }
    }
    let keep: Vec<usize> = (0..m0).filter(|&i| i != idx).collect();
    let l0 = DMatrix::from_fn(m0 - 1, m0 - 1, |r, c| spec.l0[(keep[r], keep[c])]);

    // Remove the eigenpair carried by the auxiliary coordinate: the column
    // of the eigenvector matrix closest to its coordinate axis.
    let q = &spec.l0_eig.vectors;
    let mut best = (0usize, f64::INFINITY);
    for c in 0..m0 {
        let mut dist = 0.0f64;
        for r in 0..m0 {
            let want = if r == idx { 1.0 } else { 0.0 };
            dist += (q[(r, c)] - Complex64::new(want, 0.0)).norm_sqr();
        }
        if dist < best.1 {
            best = (c, dist);
        }
    }
    if best.1.sqrt() > 1e-8 {
        return Err(Error::InvalidArgument(
            "auxiliary coordinate is not an eigen-direction of the first block".into(),
        ));
    }
    let drop_col = best.0;
    let values: Vec<Complex64> = spec
        .l0_eig
        .values
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != drop_col)
        .map(|(_, v)| *v)
        .collect();
    let cols: Vec<usize> = (0..m0).filter(|&c| c != drop_col).collect();
    let vectors = DMatrix::from_fn(m0 - 1, m0 - 1, |r, c| q[(keep[r], cols[c])]);
    let l0_eig = crate::algebra::EigenBasis::new(values, vectors)?;

    // Forcing: drop monomials carrying the auxiliary variable, drop its
    // output component, renumber the rest.
    let mut v = PolyMap::zero(m - 1, m - 1, Codomain::Full, spec.period);
    let keep_out: Vec<usize> = (0..m).filter(|&i| i != idx).collect();
    for (_, part) in spec.v.parts() {
        let mut new_part = HomoPoly::zero(
            m - 1,
            part.degree(),
            m - 1,
            Codomain::Full,
            spec.period,
        );
        for (alpha, coeff) in part.terms() {
            if alpha.get(idx) != 0 {
                continue;
            }
            let mut vals: Vec<(i64, DVector<Complex64>)> = Vec::new();
            for (k, vec) in coeff.modes() {
                let reduced_vec =
                    DVector::from_fn(m - 1, |r, _| vec[keep_out[r]]);
                vals.push((k, reduced_vec));
            }
            let t = crate::algebra::TrigPoly::from_modes(spec.period, m - 1, vals, false)?;
            if !t.is_zero() {
                new_part.add_term(alpha.narrow(idx), t)?;
            }
        }
        if !new_part.is_zero() {
            v.set_part(new_part)?;
        }
    }
    if !spec.complex_ok {
        v.assert_real(tol::REAL_OP)?;
    }

    let reduced = SystemSpec {
        period: spec.period,
        m0: m0 - 1,
        m1,
        l0,
        l0_eig,
        l1: spec.l1.clone(),
        nu: spec.nu,
        v,
        c: spec.c,
        rho: spec.rho,
        ell: spec.ell,
        epsilon_index: None,
        complex_ok: spec.complex_ok,
        label: format!("{}-reduced", spec.label),
    };
    reduced.validate()?;
    Ok(reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{MultiIndex, TrigPoly};

    const TAU: f64 = std::f64::consts::TAU;

    fn options(delta: f64) -> RunOptions {
        RunOptions {
            delta,
            samples: 200,
            ..Default::default()
        }
    }

    #[test]
    fn basic_run_certificates() {
        let spec = SystemSpec::basic();
        let run = run_uncoupling(&spec, &options(0.1)).unwrap();
        assert_eq!(run.p, 2, "optimal degree clamps to the quadratic floor");
        assert_eq!(run.d_max, 4, "V o iota tops out at degree 4 here");
        assert!(run.identity_residual < 1e-10);
        assert!(run.stage_residual < 1e-10);
        assert!(run.certified_bound > 0.0);
        assert!(
            run.sampled_sup <= run.certified_bound * (1.0 + 1e-9),
            "sampled sup {} must sit below the certified bound {}",
            run.sampled_sup,
            run.certified_bound
        );
        for row in &run.gevrey {
            assert!(row.ok, "degree {} breaks the growth law", row.degree);
        }

        // With phi = (cos t + sin t)/2 u0^2 the remainder is
        // cos t (2 phi u0^3 + phi^2 u0^4); its cubic coefficient
        // 2 phi cos t = 1/2 + (cos 2t + sin 2t)/2 has mode 0 = 1/2 and
        // mode 2 = (1 - i)/4.
        let r3 = run.remainder.part(3).expect("cubic remainder");
        let (alpha, coeff) = r3.terms().next().unwrap();
        assert_eq!(alpha.exponents(), &[3]);
        assert!((coeff.mode(0).unwrap()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((coeff.mode(2).unwrap()[0] - Complex64::new(0.25, -0.25)).norm() < 1e-13);

        // Transformed coupling: cos t (2 u0 v1 + v1^2) + 2 phi cos t u0^2 v1.
        let v1 = &run.transformed.v1;
        assert_eq!(v1.lo(), Some(2));
        assert_eq!(v1.hi(), Some(3));
        let p2 = v1.part(2).unwrap();
        let c11 = p2.terms().find(|(a, _)| a.exponents() == [1, 1]).unwrap().1;
        assert!((c11.mode(1).unwrap()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let c02 = p2.terms().find(|(a, _)| a.exponents() == [0, 2]).unwrap().1;
        assert!((c02.mode(1).unwrap()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        let p3 = v1.part(3).unwrap();
        let c21 = p3.terms().find(|(a, _)| a.exponents() == [2, 1]).unwrap().1;
        assert!((c21.mode(0).unwrap()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((c21.mode(2).unwrap()[0] - Complex64::new(0.25, -0.25)).norm() < 1e-13);
        assert!(run.transformed.quadratic_envelope.ok);
        assert!(run.transformed.quadratic_envelope.sup_ratio > 0.0);
    }

    #[test]
    fn certified_bound_shrinks_with_delta() {
        let spec = SystemSpec::basic();
        let mut prev = f64::INFINITY;
        for delta in [0.2, 0.1, 0.05] {
            let run = run_uncoupling(&spec, &options(delta)).unwrap();
            assert!(run.certified_bound < prev);
            prev = run.certified_bound;
        }
    }

    #[test]
    fn coupled_forcing_transforms_to_exact_factor() {
        // V1 = cos t u0^2 + 0.3 u0 u1. After the substitution the coupling
        // must reduce to exactly 0.3 u0 v1: the Phi-dependent corrections
        // cancel between the two compositions.
        let mut spec = SystemSpec::basic();
        let mut q = HomoPoly::zero(2, 2, 2, Codomain::Full, TAU);
        q.add_term(
            MultiIndex::new(vec![2, 0]),
            TrigPoly::cosine(TAU, 1, 1.0)
                .mul(&TrigPoly::constant(TAU, DVector::from_vec(vec![0.0, 1.0])))
                .unwrap(),
        )
        .unwrap();
        q.add_term(
            MultiIndex::new(vec![1, 1]),
            TrigPoly::constant(TAU, DVector::from_vec(vec![0.0, 0.3])),
        )
        .unwrap();
        let mut v = PolyMap::zero(2, 2, Codomain::Full, TAU);
        v.set_part(q).unwrap();
        spec.v = v;
        spec.c = 1.1;
        spec.label = "basic-coupled".into();
        let run = run_uncoupling(&spec, &options(0.1)).unwrap();
        let v1 = &run.transformed.v1;
        assert_eq!(v1.lo(), Some(2));
        assert_eq!(v1.hi(), Some(2));
        let part = v1.part(2).unwrap();
        let mut terms: Vec<_> = part.terms().collect();
        assert_eq!(terms.len(), 1);
        let (alpha, coeff) = terms.pop().unwrap();
        assert_eq!(alpha.exponents(), &[1, 1]);
        let v = coeff.mode(0).unwrap();
        assert!((v[0] - Complex64::new(0.3, 0.0)).norm() < 1e-12);
        assert!(run.identity_residual < 1e-10);
        assert!(run.transformed.quadratic_envelope.ok);
        assert!(run.transformed.quadratic_envelope.sup_ratio > 0.0);
    }

    #[test]
    fn envelope_violation_is_rejected() {
        let mut spec = SystemSpec::basic();
        spec.c = 1e-3; // the stated envelope now lies below the actual norm
        let err = run_uncoupling(&spec, &options(0.1)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn deterministic_across_reruns() {
        let spec = SystemSpec::basic();
        let a = run_uncoupling(&spec, &options(0.05)).unwrap();
        let b = run_uncoupling(&spec, &options(0.05)).unwrap();
        assert_eq!(a.certified_bound.to_bits(), b.certified_bound.to_bits());
        assert_eq!(a.sampled_sup.to_bits(), b.sampled_sup.to_bits());
        assert_eq!(
            a.transformed.quadratic_envelope.sup_ratio.to_bits(),
            b.transformed.quadratic_envelope.sup_ratio.to_bits()
        );
    }

    #[test]
    fn deep_truncation_keeps_identity_exact() {
        let spec = SystemSpec::basic();
        let mut opts = options(0.1);
        opts.p_override = Some(5);
        let run = run_uncoupling(&spec, &opts).unwrap();
        assert_eq!(run.p, 5);
        assert!(run.identity_residual < 1e-10);
        // The composition keeps feeding cos t phi^j corrections, so all of
        // degrees 3..=5 are genuinely solved here and the remainder starts
        // at degree 6.
        assert_eq!(run.remainder.lo(), Some(6));
        assert!(run.d_max <= (spec.deg_v() + 1) * 5);
        assert!(run.certified_bound.is_finite());
        for row in &run.gevrey {
            assert!(row.ok, "degree {} breaks the growth law", row.degree);
        }
    }
}
