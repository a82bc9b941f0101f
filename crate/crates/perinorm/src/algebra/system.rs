use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly::PolyMap;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// Eigendecomposition L Q = Q diag(values), with the inverse of Q kept
/// alongside. Supplied by the system author (the uncoupled block's basis is
/// part of the problem statement, not something this crate reverse-engineers
/// from a matrix).
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<Complex64>,
    pub vectors: DMatrix<Complex64>,
    pub inverse: DMatrix<Complex64>,
    pub condition: f64,
}

impl EigenBasis {
    pub fn new(values: Vec<Complex64>, vectors: DMatrix<Complex64>) -> Result<Self> {
        if vectors.nrows() != vectors.ncols() || vectors.nrows() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "eigenbasis shape",
                left: vectors.nrows(),
                right: values.len(),
            });
        }
        let condition = linalg::condition_number(&vectors);
        let inverse = linalg::inverse(&vectors, "eigenvector basis")?;
        Ok(EigenBasis {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    /// Identity basis for a matrix already diagonal (or for an empty block).
    pub fn trivial(values: Vec<Complex64>) -> Self {
        let n = values.len();
        let id = DMatrix::from_diagonal_element(n, n, Complex64::new(1.0, 0.0));
        EigenBasis {
            values,
            vectors: id.clone(),
            inverse: id,
            condition: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Check that this basis actually diagonalizes `m`.
    pub fn verify(&self, m: &DMatrix<f64>) -> Result<()> {
        let mc = linalg::to_complex(m);
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        let defect = (&mc * &self.vectors - &self.vectors * diag)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let scale = 1.0 + m.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if defect > 1e-10 * scale {
            return Err(Error::ToleranceFailure {
                what: "eigenbasis consistency".into(),
                residual: defect,
                tol: 1e-10 * scale,
            });
        }
        Ok(())
    }
}

/// A time-periodic vector field du/dt = L u + V(u, t) split into an uncoupled
/// block (dimension m0, with its eigenbasis supplied) and a slaved block
/// (dimension m1, handled in its original coordinates). V is polynomial with
/// trigonometric coefficients and starts at degree 2.
///
/// `c` and `rho` are the analyticity budget of V: the degree-q part, viewed
/// as a symmetric q-linear map, is bounded by c / rho^q in the Sobolev norm
/// of exponent `ell`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub period: f64,
    pub m0: usize,
    pub m1: usize,
    pub l0: DMatrix<f64>,
    pub l0_eig: EigenBasis,
    pub l1: DMatrix<f64>,
    pub nu: Option<u32>,
    pub v: PolyMap,
    pub c: f64,
    pub rho: f64,
    pub ell: u32,
    /// Index of a formal small-parameter coordinate inside the uncoupled
    /// block, if the system carries one.
    pub epsilon_index: Option<usize>,
    /// Allow genuinely complex coefficient data.
    pub complex_ok: bool,
    pub label: String,
}

impl SystemSpec {
    pub fn m(&self) -> usize {
        self.m0 + self.m1
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Highest polynomial degree of V.
    pub fn deg_v(&self) -> u32 {
        self.v.hi().unwrap_or(2)
    }

    /// Largest Fourier mode appearing in V.
    pub fn v_max_mode(&self) -> i64 {
        self.v.max_mode()
    }

    /// Largest Fourier mode that a change of variables computed to degree p
    /// can carry: modes only grow by convolution with V's modes, once per
    /// degree gained.
    pub fn k_needed(&self, p: u32) -> i64 {
        (p as i64) * self.v_max_mode().max(1)
    }

    /// Block-diagonal full linear part.
    pub fn l_full(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut l = DMatrix::zeros(m, m);
        l.view_mut((0, 0), (self.m0, self.m0)).copy_from(&self.l0);
        l.view_mut((self.m0, self.m0), (self.m1, self.m1))
            .copy_from(&self.l1);
        l
    }

    /// Eigenbasis for the full linear part. The normal-form route needs all
    /// of L diagonalized, which this crate only accepts in supplied form:
    /// state the system with m1 = 0 and the basis on the L0 slot.
    pub fn full_eigen(&self) -> Result<&EigenBasis> {
        if self.m1 != 0 {
            return Err(Error::InvalidArgument(
                "normal-form route needs the whole linear part in the eigen-supplied block; \
                 restate the system with m1 = 0"
                    .into(),
            ));
        }
        Ok(&self.l0_eig)
    }

    /// Structural checks every constructor funnels through.
    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if self.m0 == 0 {
            return Err(Error::InvalidArgument("m0 must be at least 1".into()));
        }
        if self.l0.nrows() != self.m0 || self.l0.ncols() != self.m0 {
            return Err(Error::DimensionMismatch {
                context: "L0 shape",
                left: self.l0.nrows(),
                right: self.m0,
            });
        }
        if self.l1.nrows() != self.m1 || self.l1.ncols() != self.m1 {
            return Err(Error::DimensionMismatch {
                context: "L1 shape",
                left: self.l1.nrows(),
                right: self.m1,
            });
        }
        if self.l0_eig.len() != self.m0 {
            return Err(Error::DimensionMismatch {
                context: "L0 eigenbasis size",
                left: self.l0_eig.len(),
                right: self.m0,
            });
        }
        self.l0_eig.verify(&self.l0)?;
        if self.v.vars() != self.m() || self.v.dim() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "V shape",
                left: self.v.vars(),
                right: self.m(),
            });
        }
        if self.v.period() != self.period {
            return Err(Error::PeriodMismatch {
                left: self.v.period(),
                right: self.period,
            });
        }
        match self.v.lo() {
            Some(lo) if lo < 2 => {
                return Err(Error::InvalidArgument(format!(
                    "V must vanish to second order at the origin; found a degree-{lo} part"
                )));
            }
            _ => {}
        }
        if !(self.c > 0.0 && self.rho > 0.0) {
            return Err(Error::InvalidArgument(
                "analyticity data c, rho must be positive".into(),
            ));
        }
        if self.ell < 1 {
            return Err(Error::InvalidArgument(
                "Sobolev exponent ell must be at least 1".into(),
            ));
        }
        if !self.complex_ok {
            let defect = self
                .v
                .parts()
                .map(|(_, p)| p.symmetry_defect())
                .fold(0.0, f64::max);
            let scale = 1.0 + self.v.max_coeff();
            if defect > tol::REAL_OP * scale {
                return Err(Error::InvalidArgument(format!(
                    "V has non-real coefficients (symmetry defect {defect:.3e}) \
                     and the complex flag is not set"
                )));
            }
        }
        if let Some(idx) = self.epsilon_index {
            if idx >= self.m0 {
                return Err(Error::InvalidArgument(format!(
                    "epsilon index {idx} must lie in the uncoupled block (m0 = {})",
                    self.m0
                )));
            }
            for j in 0..self.m0 {
                if self.l0[(idx, j)] != 0.0 || self.l0[(j, idx)] != 0.0 {
                    return Err(Error::InvalidArgument(
                        "epsilon coordinate must be linearly decoupled (zero row and column in L0)"
                            .into(),
                    ));
                }
            }
            if !self
                .l0_eig
                .values
                .iter()
                .any(|z| z.norm() <= tol::RES_BASE)
            {
                return Err(Error::InvalidArgument(
                    "epsilon coordinate needs a zero eigenvalue in the uncoupled block".into(),
                ));
            }
            let eps_component = self.v.component(idx);
            if eps_component.max_coeff() > 0.0 {
                return Err(Error::InvalidArgument(
                    "epsilon coordinate must have no dynamics (its V component must vanish)".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
impl SystemSpec {
    /// m0 = m1 = 1, L0 = 0, L1 = -1, V = cos(t) (u0 + u1)^2 on the slaved
    /// component. Its degree-2 graded norm at H^1 is exactly 2, so the
    /// envelope constants are c = 2, rho = 1.
    pub fn basic() -> SystemSpec {
        use crate::algebra::poly::{Codomain, HomoPoly};
        use crate::algebra::{MultiIndex, TrigPoly};
        const TAU: f64 = std::f64::consts::TAU;
        let mut v = PolyMap::zero(2, 2, Codomain::Full, TAU);
        let mut q = HomoPoly::zero(2, 2, 2, Codomain::Full, TAU);
        for (exps, amp) in [(vec![2u32, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)] {
            let cos_e1 = TrigPoly::cosine(TAU, 1, amp)
                .mul(&TrigPoly::constant(TAU, nalgebra::dvector![0.0, 1.0]))
                .unwrap();
            q.add_term(MultiIndex::new(exps), cos_e1).unwrap();
        }
        v.set_part(q).unwrap();
        SystemSpec {
            period: TAU,
            m0: 1,
            m1: 1,
            l0: DMatrix::zeros(1, 1),
            l0_eig: EigenBasis::trivial(vec![Complex64::new(0.0, 0.0)]),
            l1: DMatrix::from_element(1, 1, -1.0),
            nu: Some(1),
            v,
            c: 2.0,
            rho: 1.0,
            ell: 1,
            epsilon_index: None,
            complex_ok: false,
            label: "basic".into(),
        }
    }

    /// Planar rotation with irrational rotation number: L generates a
    /// rotation at speed sqrt(2), V carries a small forced quadratic and the
    /// classical attracting cubic. Quadratic divisors are all clean; the
    /// cubic self-interaction is exactly resonant at mode zero.
    pub fn hopf() -> SystemSpec {
        use crate::algebra::poly::{Codomain, HomoPoly};
        use crate::algebra::{MultiIndex, TrigPoly};
        const TAU: f64 = std::f64::consts::TAU;
        let s = std::f64::consts::SQRT_2;
        let l0 = DMatrix::from_row_slice(2, 2, &[0.0, -s, s, 0.0]);
        let values = vec![Complex64::new(0.0, s), Complex64::new(0.0, -s)];
        let vectors = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
            ],
        );
        let l0_eig = EigenBasis::new(values, vectors).unwrap();

        let mut v = PolyMap::zero(2, 2, Codomain::Full, TAU);
        let mut quad = HomoPoly::zero(2, 2, 2, Codomain::Full, TAU);
        quad.add_term(
            MultiIndex::new(vec![2, 0]),
            TrigPoly::cosine(TAU, 1, 0.2)
                .mul(&TrigPoly::constant(TAU, nalgebra::dvector![1.0, 0.0]))
                .unwrap(),
        )
        .unwrap();
        v.set_part(quad).unwrap();
        let mut cubic = HomoPoly::zero(2, 3, 2, Codomain::Full, TAU);
        for (exps, dir) in [
            (vec![3u32, 0], nalgebra::dvector![-0.5, 0.0]),
            (vec![1, 2], nalgebra::dvector![-0.5, 0.0]),
            (vec![2, 1], nalgebra::dvector![0.0, -0.5]),
            (vec![0, 3], nalgebra::dvector![0.0, -0.5]),
        ] {
            cubic
                .add_term(MultiIndex::new(exps), TrigPoly::constant(TAU, dir))
                .unwrap();
        }
        v.set_part(cubic).unwrap();
        SystemSpec {
            period: TAU,
            m0: 2,
            m1: 0,
            l0,
            l0_eig,
            l1: DMatrix::zeros(0, 0),
            nu: None,
            v,
            c: 0.85,
            rho: 1.0,
            ell: 1,
            epsilon_index: None,
            complex_ok: false,
            label: "hopf".into(),
        }
    }
}
