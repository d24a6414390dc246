//! Potential theory on the escape basin: Green's function G, the magnitude
//! of the Böttcher coordinate φ and its logarithmic derivative, the disk-map
//! derivative |F′| with F = 1/φ, a Monte-Carlo estimator for ∫_Ω |F′|^p, the
//! geometric disk partition used for backward orbits, and Koebe distortion
//! envelopes for univalent maps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basin::{connectivity, escape_radius, Verdict};
use crate::poly::Polynomial;

/// Default magnitude a trajectory must reach before the potential limit is
/// read off.
pub const DEFAULT_TARGET_MAG: f64 = 1e8;
/// Default iteration cap for potential evaluation.
pub const DEFAULT_POTENTIAL_ITER: usize = 200;

/// Green's function value at a point, with the iteration count and a bound
/// on the truncation error of the limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    pub iterations_used: usize,
    pub error_bound: f64,
}

/// Parameters of the level-(n,k) cell decomposition of the punctured disk:
/// cells r₀^{1/mⁿ} ≤ r ≤ r₀^{1/m^{n+1}}, k·2π/mⁿ ≤ θ < (k+1)·2π/mⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPartition {
    pub m: usize,
    pub r0: f64,
    pub theta0: f64,
}

/// One cell of the partition: its marked point and its radial/angular
/// extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionCell {
    pub point: Complex64,
    pub radial: (f64, f64),
    pub angular: (f64, f64),
}

/// Monte-Carlo estimate of ∫_Ω |F′|^p split into the sampled disk part and
/// the analytic tail beyond R_big.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrennanEstimate {
    pub p: f64,
    pub annulus_part: f64,
    pub tail_part: f64,
    pub total: f64,
    pub std_error: f64,
    pub samples_in: usize,
    pub samples_total: usize,
    pub r_big: f64,
    pub seed: u64,
}

/// Distortion envelopes from the Koebe theorem for a univalent h on the
/// disk with h(0) = 0, h′(0) = 1, evaluated at |z| = r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KoebeBounds {
    /// (lower, upper) for |h(z)|.
    pub value: (f64, f64),
    /// (lower, upper) for |z·h′(z)/h(z)|.
    pub ratio: (f64, f64),
    /// (lower, upper) for |h′(z)|.
    pub derivative: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("orbit did not exceed magnitude {target_mag:e} within {max_iter} iterations")]
    NotInBasin { target_mag: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("cell index {k} out of range at level {n}")]
    IndexOutOfRange { n: u32, k: u64 },
}

/// Shared orbit walk: iterate until the magnitude exceeds `target_mag`,
/// accumulating log|(fⁿ)′(z)| along the way.
struct PotentialOrbit {
    steps: usize,
    log_mag: f64,
    log_deriv_abs: f64,
}

fn potential_orbit(
    f: &Polynomial,
    z: Complex64,
    target_mag: f64,
    max_iter: usize,
) -> Result<PotentialOrbit, PotentialError> {
    assert!(f.is_monic(), "potential evaluation requires a monic polynomial");
    assert!(target_mag > 1.0);
    if z.norm() > target_mag {
        return Ok(PotentialOrbit { steps: 0, log_mag: z.norm().ln(), log_deriv_abs: 0.0 });
    }
    let df = f.derivative();
    let mut cur = z;
    let mut log_deriv_abs = 0.0f64;
    for step in 1..=max_iter {
        let factor = df.evaluate(cur).norm();
        if factor < 1e-300 {
            log_deriv_abs = f64::NEG_INFINITY;
        } else {
            log_deriv_abs += factor.ln();
        }
        cur = f.evaluate(cur);
        let mag = cur.norm();
        if mag > target_mag {
            return Ok(PotentialOrbit { steps: step, log_mag: mag.ln(), log_deriv_abs });
        }
    }
    Err(PotentialError::NotInBasin { target_mag, max_iter })
}

/// Green's function of the basin: G(z) = lim m⁻ⁿ log|fⁿ(z)|, evaluated by
/// iterating until the orbit magnitude exceeds `target_mag`. The reported
/// error bound is the one-step tail m⁻ⁿ·2Σ|a_k|/target_mag of the remaining
/// corrections log|1 + (lower order)/z^m|.
pub fn green(
    f: &Polynomial,
    z: Complex64,
    target_mag: f64,
    max_iter: usize,
) -> Result<GreenValue, PotentialError> {
    let orbit = potential_orbit(f, z, target_mag, max_iter)?;
    let scale = (f.degree() as f64).powi(-(orbit.steps as i32));
    Ok(GreenValue {
        value: scale * orbit.log_mag,
        iterations_used: orbit.steps,
        error_bound: scale * 2.0 * f.lower_coeff_sum() / target_mag,
    })
}

/// |φ′(z)/φ(z)| = lim m⁻ⁿ |(fⁿ)′(z)|/|fⁿ(z)|, read off at the same stopping
/// step as `green` so the two are mutually consistent. Equals |∇G(z)|.
pub fn log_phi_deriv_ratio(
    f: &Polynomial,
    z: Complex64,
    target_mag: f64,
    max_iter: usize,
) -> Result<f64, PotentialError> {
    let orbit = potential_orbit(f, z, target_mag, max_iter)?;
    let m = f.degree() as f64;
    Ok((orbit.log_deriv_abs - orbit.log_mag - orbit.steps as f64 * m.ln()).exp())
}

/// |F′(z)| for F = 1/φ: |φ′|/|φ|² = (|φ′|/|φ|)·exp(−G).
pub fn f_derivative_abs(f: &Polynomial, z: Complex64) -> Result<f64, PotentialError> {
    let orbit = potential_orbit(f, z, DEFAULT_TARGET_MAG, DEFAULT_POTENTIAL_ITER)?;
    let m = f.degree() as f64;
    let g = m.powi(-(orbit.steps as i32)) * orbit.log_mag;
    Ok((orbit.log_deriv_abs - orbit.log_mag - orbit.steps as f64 * m.ln() - g).exp())
}

/// Monte-Carlo estimate of ∫_Ω |F′|^p dA. Uniform samples on the disk
/// |z| ≤ R_big (complement points contribute 0); the tail beyond R_big is
/// the closed form π·R^{2−2p}/(p−1) from |F′| ≈ |z|⁻², with its relative
/// correction bound (1+ε_R)^p − 1, ε_R = 4Σ|a_k|/R_big, folded into
/// `std_error`. Sample i draws from stream i of a counter-based generator,
/// so results are bit-reproducible regardless of evaluation order.
pub fn brennan_integral(
    f: &Polynomial,
    p: f64,
    samples: usize,
    r_big: f64,
    seed: u64,
    max_iter: usize,
) -> BrennanEstimate {
    assert!((2.0..=4.0).contains(&p), "exponent must lie in [2, 4]");
    assert!(samples >= 2);
    assert!(
        r_big >= 2.0 * escape_radius(f),
        "sampling disk must cover twice the escape radius"
    );
    let verdict = connectivity(f, 1000).map(|c| c.verdict).unwrap_or(Verdict::Undetermined);
    assert!(
        verdict != Verdict::NotSimplyConnected,
        "the integral diverges on basins with escaping critical points"
    );

    let df = f.derivative();
    let m = f.degree() as f64;
    let log_m = m.ln();
    let area = PI * r_big * r_big;

    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut samples_in = 0usize;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (x, y) = loop {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            if x * x + y * y <= 1.0 {
                break (x, y);
            }
        };
        let z = Complex64::new(x * r_big, y * r_big);

        // inline potential walk so one orbit serves both G and |φ'|/|φ|
        let mut value = 0.0f64;
        let mut cur = z;
        let mut log_deriv = 0.0f64;
        if cur.norm() > DEFAULT_TARGET_MAG {
            // already past the threshold: |F'| = |z|^{-2} to within the tail bound
            samples_in += 1;
            value = (-2.0 * p * cur.norm().ln()).exp();
        } else {
            for step in 1..=max_iter {
                let factor = df.evaluate(cur).norm();
                if factor < 1e-300 {
                    log_deriv = f64::NEG_INFINITY;
                } else {
                    log_deriv += factor.ln();
                }
                cur = f.evaluate(cur);
                let mag = cur.norm();
                if mag > DEFAULT_TARGET_MAG {
                    samples_in += 1;
                    let log_mag = mag.ln();
                    let g = m.powi(-(step as i32)) * log_mag;
                    let log_fprime = log_deriv - log_mag - step as f64 * log_m - g;
                    value = (p * log_fprime).exp();
                    break;
                }
            }
        }

        // Welford accumulation over sample index order
        let n = (i + 1) as f64;
        let delta = value - mean;
        mean += delta / n;
        m2 += delta * (value - mean);
    }

    let annulus_part = area * mean;
    let sample_sd = if samples > 1 { (m2 / (samples as f64 - 1.0)).sqrt() } else { 0.0 };
    let mc_error = area * sample_sd / (samples as f64).sqrt();

    let tail_part = PI * r_big.powf(2.0 - 2.0 * p) / (p - 1.0);
    let eps_r = 4.0 * f.lower_coeff_sum() / r_big;
    let tail_error = tail_part * ((1.0 + eps_r).powf(p) - 1.0);

    BrennanEstimate {
        p,
        annulus_part,
        tail_part,
        total: annulus_part + tail_part,
        std_error: mc_error + tail_error,
        samples_in,
        samples_total: samples,
        r_big,
        seed,
    }
}

#[derive(Serialize)]
struct BrennanWire {
    p: f64,
    total: f64,
    annulus: f64,
    tail: f64,
    std_error: f64,
    samples: usize,
    #[serde(rename = "R_big")]
    r_big: f64,
    seed: u64,
}

impl BrennanEstimate {
    /// JSON form with keys p, total, annulus, tail, std_error, samples,
    /// R_big, seed.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&BrennanWire {
            p: self.p,
            total: self.total,
            annulus: self.annulus_part,
            tail: self.tail_part,
            std_error: self.std_error,
            samples: self.samples_total,
            r_big: self.r_big,
            seed: self.seed,
        })
        .expect("plain numeric struct serializes")
    }
}

impl DiskPartition {
    pub fn new(m: usize, r0: f64, theta0: f64) -> Self {
        assert!(m >= 2);
        assert!(0.0 < r0 && r0 < 1.0);
        DiskPartition { m, r0, theta0 }
    }
}

/// The marked point z_{n,k} = r₀^{1/mⁿ}·exp(i(θ₀+2πk)/mⁿ) of cell (n,k)
/// together with the cell's radial and angular intervals. The mⁿ angular
/// intervals at level n tile [0, 2π).
pub fn partition_point(
    part: &DiskPartition,
    n: u32,
    k: u64,
) -> Result<PartitionCell, PartitionError> {
    let count = (part.m as f64).powi(n as i32);
    if (k as f64) >= count {
        return Err(PartitionError::IndexOutOfRange { n, k });
    }
    let r_in = part.r0.powf(1.0 / count);
    let r_out = part.r0.powf(1.0 / (count * part.m as f64));
    let angle = (part.theta0 + 2.0 * PI * k as f64) / count;
    Ok(PartitionCell {
        point: Complex64::from_polar(r_in, angle),
        radial: (r_in, r_out),
        angular: (2.0 * PI * k as f64 / count, 2.0 * PI * (k + 1) as f64 / count),
    })
}

/// Koebe distortion bounds at radius r for univalent h with h(0) = 0,
/// h′(0) = 1; the bounds are attained by k(z) = z/(1−z)².
pub fn koebe_bounds(r: f64) -> KoebeBounds {
    assert!((0.0..1.0).contains(&r));
    let (om, op) = (1.0 - r, 1.0 + r);
    KoebeBounds {
        value: (r / (op * op), r / (om * om)),
        ratio: (om / op, op / om),
        derivative: (om / (op * op * op), op / (om * om * om)),
    }
}
