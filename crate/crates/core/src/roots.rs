//! Simultaneous root finding for f(z) = w.
//!
//! Binomial fibers go through the closed-form n-th root path; everything else
//! runs Aberth–Ehrlich iteration on all roots at once. Convergence failure is
//! soft: the best available roots and their residual are still returned inside
//! the error.

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::Polynomial;

/// Residual tolerance for `solve`: converged when the max residual is below
/// tol · max(1, |w|, max_k |root_k|^m).
pub const DEFAULT_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Golden angle 2π(1 − 1/φ); seeding phases with it keeps initial guesses off
/// any symmetry axis of the root set.
const GOLDEN_ANGLE: f64 = 2.399963229728653;

/// All m solutions of f(z) = w, multiplicity by repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// max_k |f(root_k) − w|
    pub residual_max: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("root iteration stalled at residual {residual:e} after {iterations} sweeps")]
    ConvergenceFailure {
        best: RootSet,
        residual: f64,
        iterations: usize,
    },
}

/// The m complex m-th roots of w, ordered by increasing phase offset index.
/// w = 0 yields m copies of 0.
pub fn nth_roots(w: Complex64, m: usize) -> Vec<Complex64> {
    assert!(m >= 1);
    if m == 1 {
        return vec![w];
    }
    if w.norm() == 0.0 {
        return vec![Complex64::new(0.0, 0.0); m];
    }
    let r = w.norm().powf(1.0 / m as f64);
    let theta = w.arg() / m as f64;
    let step = std::f64::consts::TAU / m as f64;
    (0..m)
        .map(|l| Complex64::from_polar(r, theta + l as f64 * step))
        .collect()
}

fn residual_scale(w: Complex64, roots: &[Complex64], m: usize) -> f64 {
    let max_root = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    1.0f64.max(w.norm()).max(max_root.powi(m as i32))
}

/// Finds all degree-many roots of f(z) = w by Aberth–Ehrlich iteration.
///
/// Initial guesses sit on a circle of radius 1 + max_k |shifted coefficient|
/// at golden-angle phase offsets. Each sweep applies the corrected Newton
/// step z_i ← z_i − N_i / (1 − N_i Σ_{j≠i} 1/(z_i − z_j)) with N_i = p/p'.
pub fn solve(
    f: &Polynomial,
    w: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<RootSet, SolveError> {
    let m = f.degree();
    assert!(m >= 1, "solve needs degree >= 1");

    // p(z) = f(z) − w
    let mut p_coeffs = f.coeffs().to_vec();
    p_coeffs[0] -= w;
    let p = Polynomial::new(p_coeffs).expect("shift keeps the leading coefficient");
    let dp = p.derivative();

    if m == 1 {
        let root = -p.coeffs()[0] / p.coeffs()[1];
        let residual_max = (f.evaluate(root) - w).norm();
        return Ok(RootSet { roots: vec![root], residual_max });
    }

    let radius = 1.0 + p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..m)
        .map(|l| Complex64::from_polar(radius, 0.25 + l as f64 * GOLDEN_ANGLE))
        .collect();

    let mut best_roots = z.clone();
    let mut best_residual = f64::INFINITY;
    let mut sweeps = 0;
    // Crossing the residual bar alone is not acceptance: the roots may still
    // be a sweep or two from full precision (the bar is scaled by
    // max|root|^m, which is generous for large roots). Accept once the
    // iteration has also settled — last sweep's corrections all tiny — or the
    // residual sits far below the bar.
    let mut settled = false;

    for iter in 0..max_iter {
        sweeps = iter + 1;
        let residuals: Vec<f64> = z.iter().map(|&zi| p.evaluate(zi).norm()).collect();
        let residual_max = residuals.iter().copied().fold(0.0, f64::max);
        if residual_max < best_residual {
            best_residual = residual_max;
            best_roots.copy_from_slice(&z);
        }
        let bar = tol * residual_scale(w, &z, m);
        if residual_max <= bar && (settled || residual_max <= 1e-3 * bar) {
            return Ok(RootSet { roots: z, residual_max });
        }

        let snapshot = z.clone();
        let mut max_rel_step = 0.0f64;
        'guess: for i in 0..m {
            let zi = snapshot[i];
            let pv = p.evaluate(zi);
            if pv.norm() == 0.0 {
                continue;
            }
            let dv = dp.evaluate(zi);
            if dv.norm() < 1e-280 {
                // sitting on a critical point of p; nudge instead of dividing
                z[i] = zi + Complex64::new(1e-8, 1e-8) * (1.0 + zi.norm());
                max_rel_step = f64::INFINITY;
                continue;
            }
            let newton = pv / dv;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, &zj) in snapshot.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = zi - zj;
                if d.norm() < 1e-280 {
                    // coincident guesses: split them apart
                    z[i] = zi + Complex64::new(1e-8, -1e-8) * (1.0 + zi.norm());
                    max_rel_step = f64::INFINITY;
                    continue 'guess;
                }
                repulsion += 1.0 / d;
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() < 1e-280 { newton } else { newton / denom };
            z[i] = zi - step;
            max_rel_step = max_rel_step.max(step.norm() / (1.0 + zi.norm()));
        }
        settled = max_rel_step <= 1e-11;
    }

    let residuals: Vec<f64> = z.iter().map(|&zi| p.evaluate(zi).norm()).collect();
    let residual_max = residuals.iter().copied().fold(0.0, f64::max);
    if residual_max <= tol * residual_scale(w, &z, m) {
        return Ok(RootSet { roots: z, residual_max });
    }
    if residual_max < best_residual {
        best_residual = residual_max;
        best_roots.copy_from_slice(&z);
    }
    Err(SolveError::ConvergenceFailure {
        best: RootSet { roots: best_roots, residual_max: best_residual },
        residual: best_residual,
        iterations: sweeps,
    })
}

/// The fiber f⁻¹(w). Binomial polynomials take the closed-form path:
/// z^m = (w − a_0)/a_m; the rest go through `solve` with defaults.
pub fn preimages(f: &Polynomial, w: Complex64) -> Result<RootSet, SolveError> {
    let m = f.degree();
    assert!(m >= 2, "preimages need degree >= 2");
    if f.is_binomial() {
        let target = (w - f.coeffs()[0]) / f.leading();
        let roots = nth_roots(target, m);
        let residual_max = roots
            .iter()
            .map(|&r| (f.evaluate(r) - w).norm())
            .fold(0.0, f64::max);
        return Ok(RootSet { roots, residual_max });
    }
    solve(f, w, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Groups roots into clusters of radius `radius`; returns (centroid, count)
/// sorted by descending count, then by phase. Used for multiplicity reporting.
pub fn cluster(roots: &[Complex64], radius: f64) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        match groups
            .iter_mut()
            .find(|(c, n)| (*c / *n as f64 - r).norm() <= radius)
        {
            Some((c, n)) => {
                *c += r;
                *n += 1;
            }
            None => groups.push((r, 1)),
        }
    }
    let mut out: Vec<(Complex64, usize)> =
        groups.into_iter().map(|(c, n)| (c / n as f64, n)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.arg().total_cmp(&b.0.arg())));
    out
}
