//! Spectra, small divisors, and the explicit constants behind every bound.
//!
//! Each homological equation is solved mode by mode, and its solvability is
//! governed by divisors of the form <alpha, lambda> + i k (2 pi / T) -
//! lambda_j. [`check_nonresonance`] scans all divisors up to caps in degree
//! and Fourier mode, certifies an effective non-resonance constant
//! gamma_eff = min |divisor| * (|alpha| + |k|)^tau over the scanned range,
//! and collects resonant tuples (divisors below tolerance). Resonant tuples
//! are excluded from gamma_eff: on the uncoupling route they are a
//! hypothesis violation, on the normal-form route they are exactly the
//! monomials kept in the resonant part.
//!
//! [`UncouplingConstants`] and [`NormalFormConstants`] evaluate the
//! closed-form constants (growth base, decay rate, validity threshold,
//! remainder prefactors) from the certified data, with the defining formula
//! of each recorded next to its value for reports.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{enumerate_indices, MultiIndex, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::norms::algebra_constant;
use crate::tol;

/// Which reduction a computation is carried out for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Remove the coupling from the second block of equations.
    Uncoupling,
    /// Reduce the full nonlinearity to its resonant part.
    NormalForm,
}

impl Reduction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reduction::Uncoupling => "uncoupling",
            Reduction::NormalForm => "normal-form",
        }
    }
}

/// Spectral data driving the divisors of one reduction.
#[derive(Debug, Clone)]
pub struct EigenData {
    /// Eigenvalues of the block whose variables enter the monomials.
    pub lambda0: Vec<Complex64>,
    /// Eigenvalues of the block being uncoupled (empty for normal form:
    /// the full spectrum then lives in `lambda0`).
    pub lambda1: Vec<Complex64>,
    /// Largest Jordan block size of the uncoupled block (1 for normal form,
    /// where the linear part is diagonalizable by hypothesis).
    pub nu: u32,
    /// Largest eigenvalue modulus over the whole linear part.
    pub lambda_max: f64,
    /// Angular frequency 2 pi / T.
    pub freq: f64,
    pub reduction: Reduction,
}

impl EigenData {
    pub fn from_spec(spec: &SystemSpec, reduction: Reduction) -> Result<Self> {
        let freq = spec.omega();
        match reduction {
            Reduction::Uncoupling => {
                if spec.m1 == 0 {
                    return Err(Error::InvalidArgument(
                        "uncoupling needs a nonempty second block (m1 >= 1)".into(),
                    ));
                }
                let lambda0 = spec.l0_eig.values.clone();
                let lambda1: Vec<Complex64> =
                    spec.l1.clone().complex_eigenvalues().iter().copied().collect();
                let nu = match spec.nu {
                    Some(v) => {
                        if v < 1 || v as usize > spec.m1 {
                            return Err(Error::InvalidArgument(format!(
                                "supplied Jordan index {v} outside 1..={}",
                                spec.m1
                            )));
                        }
                        v
                    }
                    None => jordan_index(&spec.l1, &lambda1),
                };
                let lambda_max = lambda0
                    .iter()
                    .chain(lambda1.iter())
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                Ok(EigenData {
                    lambda0,
                    lambda1,
                    nu,
                    lambda_max,
                    freq,
                    reduction,
                })
            }
            Reduction::NormalForm => {
                let eig = spec.full_eigen()?;
                let lambda0 = eig.values.clone();
                let lambda_max = lambda0.iter().map(|z| z.norm()).fold(0.0, f64::max);
                Ok(EigenData {
                    lambda0,
                    lambda1: Vec::new(),
                    nu: 1,
                    lambda_max,
                    freq,
                    reduction,
                })
            }
        }
    }

    /// Number of eigen-directions a divisor's `j` index ranges over.
    pub fn target_dim(&self) -> usize {
        match self.reduction {
            Reduction::Uncoupling => self.lambda1.len(),
            Reduction::NormalForm => self.lambda0.len(),
        }
    }

    /// The small divisor for monomial `alpha`, Fourier mode `k`, and
    /// eigen-direction `j` of the target block.
    pub fn divisor(&self, alpha: &MultiIndex, k: i64, j: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, (k as f64) * self.freq);
        for (idx, &e) in alpha.exponents().iter().enumerate() {
            acc += Complex64::new(e as f64, 0.0) * self.lambda0[idx];
        }
        let target = match self.reduction {
            Reduction::Uncoupling => self.lambda1[j],
            Reduction::NormalForm => self.lambda0[j],
        };
        acc - target
    }

    /// Default resonance tolerance, scaled by the spectral radius.
    pub fn default_tol_res(&self) -> f64 {
        tol::RES_BASE * (1.0 + self.lambda_max)
    }
}

/// Largest Jordan block size of a real matrix, from rank chains of
/// (A - mu I)^q over the distinct eigenvalues.
fn jordan_index(a: &DMatrix<f64>, eigenvalues: &[Complex64]) -> u32 {
    let n = a.nrows();
    if n == 0 {
        return 1;
    }
    let scale = 1.0 + eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut distinct: Vec<Complex64> = Vec::new();
    for &z in eigenvalues {
        if !distinct.iter().any(|d| (d - z).norm() <= 1e-8 * scale) {
            distinct.push(z);
        }
    }
    let ac = linalg::to_complex(a);
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut nu = 1u32;
    for mu in distinct {
        let shifted = &ac - &id * mu;
        let mut power = id.clone();
        let mut prev_rank = n;
        for q in 1..=n as u32 {
            power = &power * &shifted;
            let r = linalg::rank(&power, tol::RANK);
            if r == prev_rank {
                break;
            }
            prev_rank = r;
            nu = nu.max(q);
        }
    }
    nu
}

/// One divisor record from a scan.
#[derive(Debug, Clone)]
pub struct ScanTuple {
    pub alpha: MultiIndex,
    pub k: i64,
    pub j: usize,
    pub divisor_abs: f64,
}

/// Result of a non-resonance scan over bounded degrees and Fourier modes.
#[derive(Debug, Clone)]
pub struct CertifiedScan {
    pub reduction: Reduction,
    pub tau: f64,
    pub tol_res: f64,
    pub degree_max: u32,
    pub fourier_max: i64,
    /// min |divisor| (|alpha|+|k|)^tau over scanned non-resonant tuples.
    pub gamma_eff: f64,
    /// The tuple achieving `gamma_eff`.
    pub worst: ScanTuple,
    /// Tuples with |divisor| <= tol_res.
    pub resonant: Vec<ScanTuple>,
    /// Non-resonant tuples within a factor 10 of the tolerance.
    pub borderline: Vec<ScanTuple>,
}

impl CertifiedScan {
    /// The uncoupling route admits no resonant tuple; error out if one was
    /// found.
    pub fn require_clean(&self) -> Result<()> {
        if self.reduction == Reduction::Uncoupling {
            if let Some(t) = self.resonant.first() {
                return Err(Error::NonResonance {
                    alpha: t.alpha.clone(),
                    k: t.k,
                    j: t.j,
                    divisor_abs: t.divisor_abs,
                });
            }
        }
        Ok(())
    }

    pub fn is_resonant(&self, alpha: &MultiIndex, k: i64, j: usize) -> bool {
        self.resonant
            .iter()
            .any(|t| t.alpha == *alpha && t.k == k && t.j == j)
    }
}

/// Scan all divisors with 2 <= |alpha| <= `degree_max`, |k| <= `fourier_max`
/// and certify the effective non-resonance constant.
pub fn check_nonresonance(
    eig: &EigenData,
    tau: f64,
    tol_res: f64,
    degree_max: u32,
    fourier_max: i64,
) -> Result<CertifiedScan> {
    if degree_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "degree cap {degree_max} below the quadratic threshold"
        )));
    }
    if fourier_max < 0 {
        return Err(Error::InvalidArgument("negative Fourier cap".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(tol_res >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resonance tolerance must be nonnegative, got {tol_res}"
        )));
    }

    let vars = eig.lambda0.len();
    let targets = eig.target_dim();
    let mut gamma_eff = f64::INFINITY;
    let mut worst: Option<ScanTuple> = None;
    let mut resonant = Vec::new();
    let mut borderline = Vec::new();

    for degree in 2..=degree_max {
        for alpha in enumerate_indices(degree, vars) {
            for k in -fourier_max..=fourier_max {
                for j in 0..targets {
                    let d = eig.divisor(&alpha, k, j).norm();
                    let tuple = || ScanTuple {
                        alpha: alpha.clone(),
                        k,
                        j,
                        divisor_abs: d,
                    };
                    if d <= tol_res {
                        resonant.push(tuple());
                        continue;
                    }
                    if d <= 10.0 * tol_res {
                        borderline.push(tuple());
                    }
                    let weight = ((degree as f64) + (k.unsigned_abs() as f64)).powf(tau);
                    let certified = d * weight;
                    if certified < gamma_eff {
                        gamma_eff = certified;
                        worst = Some(tuple());
                    }
                }
            }
        }
    }

    let worst = worst.ok_or_else(|| {
        Error::InvalidArgument("scan range contained no non-resonant divisor".into())
    })?;
    Ok(CertifiedScan {
        reduction: eig.reduction,
        tau,
        tol_res,
        degree_max,
        fourier_max,
        gamma_eff,
        worst,
        resonant,
        borderline,
    })
}

/// A named constant with the formula that produced it, for reports.
#[derive(Debug, Clone)]
pub struct ConstItem {
    pub name: &'static str,
    pub value: f64,
    pub formula: String,
}

/// sup_p e^2 p! / (p^(p+1/2) e^(-p)), evaluated by direct scan. The
/// sequence decreases from its value at p = 1 toward e^2 sqrt(2 pi).
pub fn stirling_sup_constant() -> f64 {
    let e = std::f64::consts::E;
    let mut sup = 0.0f64;
    let mut prev = f64::INFINITY;
    let mut log_fact = 0.0;
    for p in 1..=200u32 {
        let pf = p as f64;
        log_fact += pf.ln();
        let value = (2.0 + log_fact - (pf + 0.5) * pf.ln() + pf).exp();
        debug_assert!(value <= prev * (1.0 + 1e-12), "sequence must decrease");
        prev = value;
        sup = sup.max(value);
    }
    let limit = e * e * (2.0 * std::f64::consts::PI).sqrt();
    debug_assert!(sup >= limit);
    sup
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n as u64).map(|v| (v as f64).ln()).sum()
}

/// Constants of the uncoupling bounds, evaluated from certified data.
#[derive(Debug, Clone)]
pub struct UncouplingConstants {
    pub gamma: f64,
    pub tau: f64,
    pub nu: u32,
    pub ell: u32,
    pub lambda_max: f64,
    pub period: f64,
    /// Divisor-to-solution amplification at Sobolev exponent j (index = j).
    pub c_j: Vec<f64>,
    /// Convolution constant of the Sobolev algebra.
    pub conv: f64,
    /// Operator norm of the eigenvector matrix of the first block.
    pub p0_norm: f64,
    /// Gevrey growth base of the computed coefficients.
    pub cap_k: f64,
    /// Exponent in the optimal-degree and decay laws: 1/(ell + tau nu + 1).
    pub b: f64,
    /// Decay rate of the remainder bound.
    pub omega_decay: f64,
    /// Validity threshold on delta.
    pub delta_star: f64,
    /// Remainder prefactor.
    pub m_big: f64,
    /// Lipschitz prefactor of the change of variables.
    pub m_one: f64,
    /// Prefactor of the reduced-coupling bound.
    pub m_zero: f64,
}

impl UncouplingConstants {
    pub fn new(spec: &SystemSpec, eig: &EigenData, gamma: f64, tau: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "non-resonance constant must be positive, got {gamma}"
            )));
        }
        let nu = eig.nu;
        let ell = spec.ell;
        if (tau * nu as f64) > ell as f64 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "need tau * nu <= ell for the stated bounds (tau={tau}, nu={nu}, ell={ell})"
            )));
        }
        let t = spec.period;
        let lam = eig.lambda_max;
        let base = 1.0 + t * t / (2.0 * std::f64::consts::PI.powi(2)) * (4.0 * lam * lam + 1.0);
        let pref = (nu as f64 / gamma.powi(nu as i32)).max(1.0);
        let c_j: Vec<f64> = (0..=ell + 1).map(|j| pref * base.powf(j as f64 / 2.0)).collect();
        let conv = algebra_constant(ell);
        let m0 = spec.m0 as f64;
        let m = spec.m() as f64;
        let rho = spec.rho;
        let c = spec.c;
        let p0_norm = linalg::singular_values(&spec.l0_eig.vectors)
            .first()
            .copied()
            .unwrap_or(1.0);
        let c_ell = c_j[ell as usize];
        let arm1 = 9.0 * conv * m0.sqrt() * m.sqrt() / rho;
        let arm2 = 8.0 * c_ell * c * (conv * m0.sqrt()).powi(3) * m.sqrt() / (rho * rho);
        let cap_k = arm1.max(arm2);
        let b = 1.0 / (ell as f64 + tau * nu as f64 + 1.0);
        let omega_decay = 2f64.ln() / (2.0 * (2.0 * cap_k).powf(b));
        let delta_star = (1.0 / (2.0 * cap_k * (2.0 * std::f64::consts::E).powf(b)))
            .min(rho / (4.0 * conv * m.sqrt() * m0.sqrt()));
        let m_big = c * (73.0 / 72.0 + conv * m0.sqrt() * (2.0 * m.sqrt() + m0.sqrt() / 72.0));
        let x = (conv * m.sqrt() / rho) * 3.0 * delta_star * m0.sqrt();
        debug_assert!(x < 1.0, "geometric series parameter must stay below 1");
        let m_one = 2.0 * c * m0.sqrt() * (conv * m.sqrt() / rho).powi(2) * (2.0 - x)
            / ((1.0 - x) * (1.0 - x));
        let pow = 2f64.powf(ell as f64 + tau * nu as f64);
        let m_zero = (1.0 + p0_norm + pow * m0 * p0_norm) * m_one;
        Ok(UncouplingConstants {
            gamma,
            tau,
            nu,
            ell,
            lambda_max: lam,
            period: t,
            c_j,
            conv,
            p0_norm,
            cap_k,
            b,
            omega_decay,
            delta_star,
            m_big,
            m_one,
            m_zero,
        })
    }

    /// Truncation degree minimizing the remainder bound at radius `delta`.
    pub fn p_opt(&self, delta: f64) -> u32 {
        let raw = (2.0 * delta * self.cap_k).powf(-self.b);
        raw.ceil().max(1.0).min(u32::MAX as f64) as u32
    }

    /// The a-priori remainder bound M exp(-omega / delta^b).
    pub fn remainder_bound(&self, delta: f64) -> f64 {
        self.m_big * (-self.omega_decay / delta.powf(self.b)).exp()
    }

    /// Logarithm of the coefficient growth bound sqrt(m0) K^(n-1) (n!)^(1/b)
    /// for the degree-n coefficient norm.
    pub fn gevrey_log_bound(&self, n: u32, m0: usize) -> f64 {
        0.5 * (m0 as f64).ln()
            + (n as f64 - 1.0) * self.cap_k.ln()
            + (self.ell as f64 + self.tau * self.nu as f64 + 1.0) * ln_factorial(n)
    }

    pub fn items(&self) -> Vec<ConstItem> {
        let ell = self.ell;
        vec![
            ConstItem {
                name: "gamma_eff",
                value: self.gamma,
                formula: "min |divisor| (|alpha|+|k|)^tau over the certified scan".into(),
            },
            ConstItem {
                name: "C_ell",
                value: self.c_j[ell as usize],
                formula: format!(
                    "max(1, nu/gamma^nu) (1 + T^2/(2 pi^2) (4 Lambda^2 + 1))^(j/2) at j = {ell}"
                ),
            },
            ConstItem {
                name: "conv_constant",
                value: self.conv,
                formula: format!("2^{ell} sqrt(sum_k (1+k^2)^-{ell})"),
            },
            ConstItem {
                name: "K",
                value: self.cap_k,
                formula: "max(9 C sqrt(m0 m)/rho, 8 C_ell c (C sqrt(m0))^3 sqrt(m)/rho^2)".into(),
            },
            ConstItem {
                name: "b",
                value: self.b,
                formula: "1/(ell + tau nu + 1)".into(),
            },
            ConstItem {
                name: "omega",
                value: self.omega_decay,
                formula: "ln 2 / (2 (2K)^b)".into(),
            },
            ConstItem {
                name: "delta_star",
                value: self.delta_star,
                formula: "min(1/(2K (2e)^b), rho/(4 C sqrt(m m0)))".into(),
            },
            ConstItem {
                name: "M",
                value: self.m_big,
                formula: "c (73/72 + C sqrt(m0) (2 sqrt(m) + sqrt(m0)/72))".into(),
            },
            ConstItem {
                name: "M1",
                value: self.m_one,
                formula: "2 c sqrt(m0) (C sqrt(m)/rho)^2 (2-x)/(1-x)^2, x = 3 C sqrt(m m0) delta_star / rho"
                    .into(),
            },
            ConstItem {
                name: "M0",
                value: self.m_zero,
                formula: "(1 + |P0| + 2^(ell + tau nu) m0 |P0|) M1".into(),
            },
        ]
    }
}

/// Constants of the normal-form bounds.
#[derive(Debug, Clone)]
pub struct NormalFormConstants {
    pub gamma: f64,
    pub tau: f64,
    pub ell: u32,
    pub lambda_max: f64,
    pub period: f64,
    pub c_j: Vec<f64>,
    pub conv: f64,
    /// Growth base of the recursion.
    pub cap_c: f64,
    /// Exponent 1/(1 + ell + tau).
    pub b: f64,
    pub omega_decay: f64,
    /// Validity threshold keeping the optimal degree at least 1.
    pub delta_star: f64,
    /// Stirling-type constant entering the remainder prefactor.
    pub script_m: f64,
    /// Remainder prefactor (bound is M' delta^2 exp(-omega/delta^b)).
    pub m_prime: f64,
}

impl NormalFormConstants {
    pub fn new(spec: &SystemSpec, eig: &EigenData, gamma: f64, tau: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "non-resonance constant must be positive, got {gamma}"
            )));
        }
        let ell = spec.ell;
        let t = spec.period;
        let lam = eig.lambda_max;
        let base = 1.0 + t * t / (2.0 * std::f64::consts::PI.powi(2)) * (1.0 + 4.0 * lam * lam);
        let pref = (1.0 / gamma).max(1.0);
        let c_j: Vec<f64> = (0..=ell + 1).map(|j| pref * base.powf(j as f64 / 2.0)).collect();
        let conv = algebra_constant(ell);
        let m = spec.m() as f64;
        let rho = spec.rho;
        let c = spec.c;
        let c_ell = c_j[ell as usize];
        let cm = conv * m.sqrt();
        let cap_c = cm.powi(3) / (rho * rho)
            * ((2.5 * conv * conv * m + 2.0) * c_ell * conv + 3.0 * rho / cm);
        let b = 1.0 / (1.0 + ell as f64 + tau);
        let e = std::f64::consts::E;
        let omega_decay = 1.0 / (e * cap_c.powf(b));
        let delta_star = 1.0 / (e.powf(1.0 / b) * cap_c);
        let script_m = stirling_sup_constant();
        let q = 1.0 + ell as f64 + tau;
        let m_prime = (10.0 / 9.0)
            * c
            * cap_c.powi(2)
            * ((script_m * (27.0 / (8.0 * e)).sqrt()).powf(q) + (2.0 * e).powf(2.0 * q));
        Ok(NormalFormConstants {
            gamma,
            tau,
            ell,
            lambda_max: lam,
            period: t,
            c_j,
            conv,
            cap_c,
            b,
            omega_decay,
            delta_star,
            script_m,
            m_prime,
        })
    }

    pub fn p_opt(&self, delta: f64) -> u32 {
        let e = std::f64::consts::E;
        let raw = 1.0 / (e * (self.cap_c * delta).powf(self.b));
        raw.ceil().max(1.0).min(u32::MAX as f64) as u32
    }

    /// The a-priori remainder bound M' delta^2 exp(-omega / delta^b).
    pub fn remainder_bound(&self, delta: f64) -> f64 {
        self.m_prime * delta * delta * (-self.omega_decay / delta.powf(self.b)).exp()
    }

    pub fn items(&self) -> Vec<ConstItem> {
        let ell = self.ell;
        vec![
            ConstItem {
                name: "gamma_eff",
                value: self.gamma,
                formula: "min |divisor| (|alpha|+|k|)^tau over the certified scan".into(),
            },
            ConstItem {
                name: "C_ell",
                value: self.c_j[ell as usize],
                formula: format!(
                    "max(1, 1/gamma) (1 + T^2/(2 pi^2) (1 + 4 Lambda^2))^(j/2) at j = {ell}"
                ),
            },
            ConstItem {
                name: "conv_constant",
                value: self.conv,
                formula: format!("2^{ell} sqrt(sum_k (1+k^2)^-{ell})"),
            },
            ConstItem {
                name: "C_growth",
                value: self.cap_c,
                formula: "(C sqrt(m))^3/rho^2 ((5/2 C^2 m + 2) C_ell C + 3 rho/(C sqrt(m)))".into(),
            },
            ConstItem {
                name: "b",
                value: self.b,
                formula: "1/(1 + ell + tau)".into(),
            },
            ConstItem {
                name: "omega",
                value: self.omega_decay,
                formula: "1/(e C_growth^b)".into(),
            },
            ConstItem {
                name: "delta_star",
                value: self.delta_star,
                formula: "1/(e^(1/b) C_growth)".into(),
            },
            ConstItem {
                name: "stirling_sup",
                value: self.script_m,
                formula: "sup_p e^2 p!/(p^(p+1/2) e^-p)".into(),
            },
            ConstItem {
                name: "M_prime",
                value: self.m_prime,
                formula: "10/9 c C_growth^2 ((M_st sqrt(27/8e))^(1+ell+tau) + (2e)^(2(1+ell+tau)))"
                    .into(),
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirling_constant_is_e_cubed() {
        let m = stirling_sup_constant();
        let e3 = std::f64::consts::E.powi(3);
        assert!((m - e3).abs() < 1e-12, "sup at p = 1 should be e^3, got {m}");
    }

    #[test]
    fn basic_fixture_scan() {
        let spec = SystemSpec::basic();
        let eig = EigenData::from_spec(&spec, Reduction::Uncoupling).unwrap();
        assert_eq!(eig.nu, 1);
        assert!((eig.lambda_max - 1.0).abs() < 1e-14);
        let scan = check_nonresonance(&eig, 1.0, eig.default_tol_res(), 8, 8).unwrap();
        assert!(scan.resonant.is_empty());
        scan.require_clean().unwrap();
        // Divisor |a * 0 + i k - (-1)| = |1 + ik| >= 1, weight (a + |k|)^1;
        // the minimum of |1 + ik| (a + |k|) over a >= 2 sits at a = 2, k = 0.
        assert!((scan.gamma_eff - 2.0).abs() < 1e-12);
        assert_eq!(scan.worst.k, 0);
        assert_eq!(scan.worst.alpha.exponents(), &[2]);
    }

    #[test]
    fn resonance_is_detected_and_fatal_for_uncoupling() {
        // lambda0 = i, lambda1 = 2i, T = 2 pi: at alpha = (2), k = 0 the
        // divisor 2i - 2i vanishes exactly.
        let mut spec = SystemSpec::basic();
        spec.period = std::f64::consts::TAU;
        let eig = EigenData {
            lambda0: vec![Complex64::new(0.0, 1.0)],
            lambda1: vec![Complex64::new(0.0, 2.0)],
            nu: 1,
            lambda_max: 2.0,
            freq: 1.0,
            reduction: Reduction::Uncoupling,
        };
        let scan = check_nonresonance(&eig, 1.0, eig.default_tol_res(), 6, 4).unwrap();
        assert!(!scan.resonant.is_empty());
        let err = scan.require_clean().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let _ = spec;
    }

    #[test]
    fn basic_fixture_constants() {
        let spec = SystemSpec::basic();
        let eig = EigenData::from_spec(&spec, Reduction::Uncoupling).unwrap();
        let k = UncouplingConstants::new(&spec, &eig, 2.0, 1.0).unwrap();
        // C_1 = sqrt(1 + 2 * 5) for T = 2 pi, Lambda = 1, nu = 1, gamma = 2.
        assert!((k.c_j[1] - 11f64.sqrt()).abs() < 1e-12);
        assert!((k.b - 1.0 / 3.0).abs() < 1e-15);
        assert!(k.cap_k > 3000.0 && k.cap_k < 3600.0, "K = {}", k.cap_k);
        assert!(k.omega_decay > 0.017 && k.omega_decay < 0.020);
        assert!(k.delta_star > 8.0e-5 && k.delta_star < 9.0e-5);
        assert!(k.m_big > 21.0 && k.m_big < 24.0);
        assert!(k.m_zero > k.m_one);
        // p_opt at delta = 0.01 with K and b as in the worked example from
        // the growth law: ceil((2 * 0.01 * K)^(-1/3)).
        let p = k.p_opt(1e-4);
        assert!(p >= 2, "far below delta_star the optimal degree exceeds 1");
        assert_eq!(k.p_opt(0.1), 1);
    }

    #[test]
    fn optimal_degree_example() {
        // Reference point: delta = 0.01, K = 10, b = 1/3 gives
        // ceil(0.2^(-1/3)) = ceil(1.71) = 2.
        let raw = (2.0f64 * 0.01 * 10.0).powf(-1.0 / 3.0);
        assert_eq!(raw.ceil() as u32, 2);
    }

    #[test]
    fn remainder_bound_decreases_in_delta() {
        let spec = SystemSpec::basic();
        let eig = EigenData::from_spec(&spec, Reduction::Uncoupling).unwrap();
        let k = UncouplingConstants::new(&spec, &eig, 2.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for delta in [0.2, 0.1, 0.05, 0.025, 0.01] {
            let b = k.remainder_bound(delta);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn tau_nu_budget_enforced() {
        let spec = SystemSpec::basic();
        let eig = EigenData::from_spec(&spec, Reduction::Uncoupling).unwrap();
        // ell = 1, nu = 1: tau = 2 overruns the budget.
        let err = UncouplingConstants::new(&spec, &eig, 2.0, 2.0).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn jordan_index_detects_nilpotent_block() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 3.0]);
        let eigs: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
        assert_eq!(jordan_index(&a, &eigs), 2);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let eigs_d: Vec<Complex64> = d.clone().complex_eigenvalues().iter().copied().collect();
        assert_eq!(jordan_index(&d, &eigs_d), 1);
    }
}
