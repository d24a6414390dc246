//! Polynomials over ℂ: evaluation, iteration with log-space derivative
//! accumulation, critical points, and monic normalization.

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::roots::{self, SolveError};

/// Magnitude below which a coefficient or derivative factor counts as zero.
pub const UNDERFLOW_EPS: f64 = 1e-300;

/// Iterate magnitude beyond which iteration stops with an overflow outcome.
pub const OVERFLOW_LIMIT: f64 = 1e150;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("coefficient list is empty")]
    Empty,
    #[error("leading coefficient magnitude {0:e} is below {UNDERFLOW_EPS:e}")]
    LeadingCoefficientZero(f64),
    #[error("coefficient {0} is not finite")]
    NonFinite(usize),
    #[error("polynomial is not monic (leading coefficient {0})")]
    NotMonic(Complex64),
    #[error("invalid polynomial JSON: {0}")]
    Json(String),
}

/// Dense polynomial a_0 + a_1 z + … + a_m z^m with a_m ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

/// z ↦ scale·z + offset with scale ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub scale: Complex64,
    pub offset: Complex64,
}

impl AffineMap {
    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.scale * z + self.offset
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            scale: 1.0 / self.scale,
            offset: -self.offset / self.scale,
        }
    }
}

/// Outcome of iterating f n times from a start point.
///
/// `log_deriv_abs` is Σ_j log|f'(f^j(z))| over the steps actually taken; it is
/// `-∞` (and `deriv_defined` is false) when some factor magnitude underflows
/// below [`UNDERFLOW_EPS`], i.e. the orbit ran through a critical point.
/// Diverging orbits stop early: `escaped_at = Some(j)` marks that the iterate
/// magnitude first exceeded [`OVERFLOW_LIMIT`] at step j, and `value` holds
/// that oversized iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterated {
    pub value: Complex64,
    pub steps: usize,
    pub escaped_at: Option<usize>,
    pub log_deriv_abs: f64,
    pub deriv_defined: bool,
}

#[derive(Deserialize)]
struct PolyWire {
    coeffs: Vec<[f64; 2]>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients `[a_0, …, a_m]`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::Empty);
        }
        for (k, c) in coeffs.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(PolyError::NonFinite(k));
            }
        }
        let lead = coeffs.last().unwrap().norm();
        if coeffs.len() > 1 && lead <= UNDERFLOW_EPS {
            return Err(PolyError::LeadingCoefficientZero(lead));
        }
        Ok(Polynomial { coeffs })
    }

    /// Convenience constructor from `(re, im)` pairs, ascending.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, PolyError> {
        Self::new(pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    /// Monic binomial z^m + a0.
    pub fn binomial(m: usize, a0: Complex64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m + 1];
        coeffs[0] = a0;
        coeffs[m] = Complex64::new(1.0, 0.0);
        Polynomial { coeffs }
    }

    /// Parses `{"coeffs": [[re, im], …]}` (ascending). Rejects a_m = 0 and
    /// non-finite entries.
    pub fn from_json(text: &str) -> Result<Self, PolyError> {
        let wire: PolyWire =
            serde_json::from_str(text).map_err(|e| PolyError::Json(e.to_string()))?;
        let coeffs: Vec<Complex64> = wire
            .coeffs
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Self::new(coeffs)
    }

    /// Serializes to the same shape `from_json` accepts.
    pub fn to_json(&self) -> String {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        serde_json::to_string(&serde_json::json!({ "coeffs": pairs })).unwrap()
    }

    /// Ascending coefficients a_0 … a_m.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_monic(&self) -> bool {
        (self.leading() - Complex64::new(1.0, 0.0)).norm() <= 1e-12
    }

    /// True when every middle coefficient a_1 … a_{m−1} vanishes, i.e. f has
    /// the binomial form a_m z^m + a_0.
    pub fn is_binomial(&self) -> bool {
        self.coeffs[1..self.coeffs.len() - 1]
            .iter()
            .all(|c| c.norm() < UNDERFLOW_EPS)
    }

    /// Horner evaluation.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Formal derivative; degree drops by exactly one.
    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial { coeffs: vec![Complex64::new(0.0, 0.0)] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Polynomial { coeffs }
    }

    /// Sum of |a_k| over k < m; appears in escape bounds and error estimates.
    pub fn lower_coeff_sum(&self) -> f64 {
        self.coeffs[..self.coeffs.len() - 1].iter().map(|c| c.norm()).sum()
    }

    /// True iff f is monic and every middle coefficient has magnitude < δ
    /// (a_0 is unconstrained).
    pub fn delta_condition(&self, delta: f64) -> Result<bool, PolyError> {
        if !self.is_monic() {
            return Err(PolyError::NotMonic(self.leading()));
        }
        Ok(self.coeffs[1..self.coeffs.len() - 1].iter().all(|c| c.norm() < delta))
    }

    /// Iterates f from z exactly n times (or until overflow), reusing
    /// `evaluate` for every step so the value sequence is the one any caller
    /// composing `evaluate` would see.
    pub fn iterate(&self, z: Complex64, n: usize) -> Iterated {
        let df = self.derivative();
        let mut cur = z;
        let mut log_deriv_abs = 0.0;
        let mut deriv_defined = true;
        for j in 0..n {
            let factor = df.evaluate(cur).norm();
            if factor < UNDERFLOW_EPS {
                log_deriv_abs = f64::NEG_INFINITY;
                deriv_defined = false;
            } else if deriv_defined {
                log_deriv_abs += factor.ln();
            }
            cur = self.evaluate(cur);
            if cur.norm() > OVERFLOW_LIMIT {
                return Iterated {
                    value: cur,
                    steps: j + 1,
                    escaped_at: Some(j + 1),
                    log_deriv_abs,
                    deriv_defined,
                };
            }
        }
        Iterated { value: cur, steps: n, escaped_at: None, log_deriv_abs, deriv_defined }
    }

    /// Critical points: the m−1 roots of f' (with multiplicity).
    pub fn critical_points(&self) -> Result<Vec<Complex64>, SolveError> {
        assert!(self.degree() >= 2, "critical points need degree >= 2");
        let df = self.derivative();
        let rs = roots::solve(&df, Complex64::new(0.0, 0.0), roots::DEFAULT_TOL, roots::DEFAULT_MAX_ITER)?;
        Ok(rs.roots)
    }

    /// Conjugates f to a monic polynomial g = L∘f∘L⁻¹ with L(z) = a·z where
    /// a^{m−1} = a_m; returns (g, L). The basins correspond: Ω(g) = L(Ω(f)).
    pub fn monic_normalize(&self) -> (Polynomial, AffineMap) {
        let m = self.degree();
        assert!(m >= 2, "normalization needs degree >= 2");
        let a = self.leading().powf(1.0 / (m as f64 - 1.0));
        // g_k = a_k · a^{1−k}
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * a.powf(1.0 - k as f64))
            .collect();
        let mut g = Polynomial { coeffs };
        // The leading coefficient is 1 up to rounding; make it exact.
        let last = g.coeffs.len() - 1;
        g.coeffs[last] = Complex64::new(1.0, 0.0);
        (g, AffineMap { scale: a, offset: Complex64::new(0.0, 0.0) })
    }
}
