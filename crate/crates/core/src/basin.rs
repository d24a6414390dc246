//! Geometry of the escape basin: escape radius, α(a), pointwise escape
//! testing, connectivity classification from critical orbits, complement
//! radius, and escape-time rasters.

use std::io::{self, Write};

use num_complex::Complex64;

use crate::poly::Polynomial;
use crate::roots::SolveError;

/// Margin added above the largest real root of h so that h(ρ) > 0 strictly.
const RADIUS_MARGIN: f64 = 1e-6;

/// Outcome of iterating one point against an escape radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeResult {
    pub escaped: bool,
    /// Steps taken; the step index at which the magnitude first exceeded the
    /// radius (0 = the start point already lies outside), or max_iter.
    pub steps: usize,
    pub final_magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SimplyConnected,
    NotSimplyConnected,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::SimplyConnected => "SimplyConnected",
            Verdict::NotSimplyConnected => "NotSimplyConnected",
            Verdict::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

/// Classification of Ω(f)'s connectivity plus the critical-orbit evidence
/// that produced it.
#[derive(Debug, Clone)]
pub struct ConnectivityVerdict {
    pub verdict: Verdict,
    /// (critical point, its escape outcome), one entry per critical point
    /// with multiplicity.
    pub evidence: Vec<(Complex64, EscapeResult)>,
    pub escape_radius: f64,
    pub max_iter: usize,
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub center: Complex64,
    pub width: f64,
    pub height: f64,
}

/// Escape-step counts over a pixel grid; −1 marks cells that never escaped.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeGrid {
    pub viewport: Viewport,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, top row first.
    pub cells: Vec<i32>,
}

/// Escape radius of a monic polynomial: the largest real root of
/// h(t) = t^m − Σ_{k<m}|a_k| t^k − t, plus a 1e−6 margin. Then h(t) > 0 for
/// every t ≥ ρ, so |z| ≥ ρ implies |f(z)| ≥ |z| + h(ρ) and z escapes.
pub fn escape_radius(f: &Polynomial) -> f64 {
    assert!(f.is_monic(), "escape_radius is defined for monic polynomials");
    assert!(f.degree() >= 2);
    let m = f.degree();
    let h = |t: f64| -> f64 {
        let mut acc = t.powi(m as i32) - t;
        for (k, c) in f.coeffs()[..m].iter().enumerate() {
            acc -= c.norm() * t.powi(k as i32);
        }
        acc
    };
    // h/t^m is strictly increasing, so h has exactly one sign change on
    // [1, ∞); h(1) = −Σ|a_k| ≤ 0 puts the largest root at or above 1.
    let mut lo = 1.0;
    let mut hi = 1.0 + f.lower_coeff_sum();
    if hi == lo {
        return lo + RADIUS_MARGIN;
    }
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi + RADIUS_MARGIN
}

/// Escape radius valid for any polynomial: monic input uses h directly,
/// otherwise the monic conjugate g = L∘f∘L⁻¹ supplies ρ_g and the radius
/// rescales as ρ_g/|scale| (Ω(g) = L(Ω(f)) with L(z) = scale·z).
pub fn effective_escape_radius(f: &Polynomial) -> f64 {
    if f.is_monic() {
        escape_radius(f)
    } else {
        let (g, map) = f.monic_normalize();
        escape_radius(&g) / map.scale.norm()
    }
}

/// The unique root of t^m − t − a in [1, ∞), for a ≥ 0.
pub fn alpha(a: f64, m: usize) -> f64 {
    assert!(a >= 0.0 && m >= 2);
    if a == 0.0 {
        return 1.0;
    }
    let phi = |t: f64| t.powi(m as i32) - t - a;
    let mut lo = 1.0;
    let mut hi = 2.0f64.max(1.0 + a);
    while phi(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish; t^m − t is increasing on [1, ∞) so the step is stable
    let mut t = 0.5 * (lo + hi);
    for _ in 0..6 {
        let dphi = m as f64 * t.powi(m as i32 - 1) - 1.0;
        t -= phi(t) / dphi;
        t = t.max(1.0);
    }
    debug_assert!(phi(t).abs() <= 1e-12 * a.max(1.0));
    t
}

/// Iterates z until its magnitude exceeds `radius` (caller must supply a
/// genuine escape radius for f) or `max_iter` steps pass.
pub fn escapes(f: &Polynomial, z: Complex64, max_iter: usize, radius: f64) -> EscapeResult {
    let mut cur = z;
    if cur.norm() > radius {
        return EscapeResult { escaped: true, steps: 0, final_magnitude: cur.norm() };
    }
    for step in 1..=max_iter {
        cur = f.evaluate(cur);
        let mag = cur.norm();
        if mag > radius {
            return EscapeResult { escaped: true, steps: step, final_magnitude: mag };
        }
    }
    EscapeResult { escaped: false, steps: max_iter, final_magnitude: cur.norm() }
}

/// Classifies Ω(f) from the critical orbits: every critical point escaping
/// means not simply connected, none escaping means simply connected, and a
/// mix is left undetermined.
pub fn connectivity(f: &Polynomial, max_iter: usize) -> Result<ConnectivityVerdict, SolveError> {
    assert!(f.degree() >= 2);
    let radius = effective_escape_radius(f);
    let crits = f.critical_points()?;
    let evidence: Vec<(Complex64, EscapeResult)> = crits
        .into_iter()
        .map(|c| (c, escapes(f, c, max_iter, radius)))
        .collect();
    let escaped = evidence.iter().filter(|(_, e)| e.escaped).count();
    let verdict = if escaped == 0 {
        Verdict::SimplyConnected
    } else if escaped == evidence.len() {
        Verdict::NotSimplyConnected
    } else {
        Verdict::Undetermined
    };
    Ok(ConnectivityVerdict { verdict, evidence, escape_radius: radius, max_iter })
}

/// Max |z| over non-escaping points of a grid_resolution² lattice spanning
/// [−ρ, ρ]²; a lower bound for the complement radius b(f) that tightens as
/// the resolution grows. Returns 0 when every lattice point escapes.
pub fn complement_radius_estimate(f: &Polynomial, grid_resolution: usize, max_iter: usize) -> f64 {
    assert!(grid_resolution >= 16);
    let rho = effective_escape_radius(f);
    let n = grid_resolution;
    let step = 2.0 * rho / (n - 1) as f64;
    let mut best = 0.0f64;
    for iy in 0..n {
        let y = -rho + iy as f64 * step;
        for ix in 0..n {
            let x = -rho + ix as f64 * step;
            let z = Complex64::new(x, y);
            if z.norm() <= best {
                continue;
            }
            if !escapes(f, z, max_iter, rho).escaped {
                best = z.norm();
            }
        }
    }
    best
}

/// Per-pixel escape step counts over the viewport; −1 where the orbit stayed
/// bounded for max_iter steps. Pixel centers are sampled; row 0 is the top
/// (largest imaginary part). Deterministic.
pub fn rasterize(
    f: &Polynomial,
    viewport: Viewport,
    resolution: (usize, usize),
    max_iter: usize,
) -> EscapeGrid {
    let (nx, ny) = resolution;
    assert!(nx >= 1 && ny >= 1 && viewport.width > 0.0 && viewport.height > 0.0);
    let radius = effective_escape_radius(f);
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = viewport.center.im + viewport.height / 2.0
            - (iy as f64 + 0.5) * viewport.height / ny as f64;
        for ix in 0..nx {
            let x = viewport.center.re - viewport.width / 2.0
                + (ix as f64 + 0.5) * viewport.width / nx as f64;
            let r = escapes(f, Complex64::new(x, y), max_iter, radius);
            cells.push(if r.escaped { r.steps as i32 } else { -1 });
        }
    }
    EscapeGrid { viewport, nx, ny, cells }
}

impl EscapeGrid {
    pub fn at(&self, ix: usize, iy: usize) -> i32 {
        self.cells[iy * self.nx + ix]
    }

    /// Binary 16-bit PGM (P5, maxval 65535, big-endian). Step counts clamp to
    /// [0, 65535]; non-escaped cells (−1) map to 0.
    pub fn write_pgm<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.nx, self.ny)?;
        let mut buf = Vec::with_capacity(self.cells.len() * 2);
        for &c in &self.cells {
            let v = c.clamp(0, 65535) as u16;
            buf.extend_from_slice(&v.to_be_bytes());
        }
        out.write_all(&buf)
    }

    /// Row-major CSV with header `x,y,steps`; x,y are pixel indices.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "x,y,steps")?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                writeln!(out, "{},{},{}", ix, iy, self.at(ix, iy))?;
            }
        }
        Ok(())
    }
}
