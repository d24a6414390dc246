//! Backward-orbit machinery: the base point w₀ on the positive real ray,
//! level-by-level expansion of the preimage frontier with chain-rule
//! derivative accumulation, the series S_n = Σ_k |(fⁿ)′(w_{n,k})|² with its
//! ratio diagnostics against m⁴, the one- and two-step preimage factors, and
//! seeded sampling estimates of the perturbation functionals u_δ and v_{ε′}.

use std::f64::consts::LN_10;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basin::{connectivity, escape_radius, Verdict};
use crate::bottcher::green;
use crate::poly::Polynomial;
use crate::roots::{preimages, SolveError};

/// Hard cap on frontier size: expanding past this many nodes is refused.
pub const NODE_BUDGET: u64 = 10_000_000;

/// Magnitude threshold used for Green evaluations inside `base_point`; high
/// enough that the truncation error stays below the 1e−9 placement goal.
const BASE_TARGET_MAG: f64 = 1e10;
const BASE_MAX_ITER: usize = 500;

/// One backward-orbit point w_{n,k} with the accumulated
/// log|(fⁿ)′(w_{n,k})| (−∞ marks a critical fiber on the path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitNode {
    pub point: Complex64,
    pub log_deriv: f64,
}

/// All preimages of the base point at one depth, plus the count of fibers
/// dropped because the root solver failed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitFrontier {
    pub level: usize,
    pub nodes: Vec<OrbitNode>,
    pub base_point: Complex64,
    pub skipped: usize,
}

/// The series S_1..S_N with derived diagnostics. Index i holds level n=i+1:
/// `s_log[i]` = ln S_{i+1} (exact carrier), `s_linear[i]` = S_{i+1} when it
/// fits in an f64 (∞ otherwise), `ratios[i]` = S_{i+2}/S_{i+1}, and
/// `partial_sums[i]` = Σ_{n≤i+1} m⁻⁴ⁿ S_n.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub s_log: Vec<f64>,
    pub s_linear: Vec<f64>,
    pub ratios: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub m4: f64,
    pub sharp_bound: f64,
}

/// Sampled lower bound for a supremum-type quantity, with the number of
/// samples that produced values and the number skipped on soft failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbEstimate {
    pub value: f64,
    pub used: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrbitError {
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error("{levels} levels would exceed the {budget}-node frontier budget")]
    BudgetExceeded { levels: usize, budget: u64 },
    #[error("Green bracket failed: target value not crossed on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("fiber derivative sum vanishes; ratio undefined")]
    DegenerateDenominator,
}

impl OrbitFrontier {
    /// Depth-0 frontier: the base point itself with unit derivative.
    pub fn root(w0: Complex64) -> Self {
        OrbitFrontier {
            level: 0,
            nodes: vec![OrbitNode { point: w0, log_deriv: 0.0 }],
            base_point: w0,
            skipped: 0,
        }
    }
}

/// The point w₀ > 0 on the positive real ray where the Green's function
/// equals log(1/r₀), located by bisection between the escape radius and a
/// doubled upper end; placement is within 1e−9 of the target value.
pub fn base_point(f: &Polynomial, r0: f64) -> Result<Complex64, OrbitError> {
    assert!(f.is_monic(), "base point placement requires a monic polynomial");
    assert!(0.0 < r0 && r0 < 1.0);
    let verdict = connectivity(f, 1000).map(|c| c.verdict).unwrap_or(Verdict::Undetermined);
    assert!(
        verdict != Verdict::NotSimplyConnected,
        "base point requires a basin whose critical orbits do not all escape"
    );

    let target = (1.0 / r0).ln();
    let g_at = |x: f64| -> Result<f64, OrbitError> {
        green(f, Complex64::new(x, 0.0), BASE_TARGET_MAG, BASE_MAX_ITER)
            .map(|g| g.value)
            .map_err(|_| OrbitError::BracketFailure { lo: x, hi: x })
    };

    let mut lo = escape_radius(f);
    if g_at(lo)? > target {
        return Err(OrbitError::BracketFailure { lo, hi: lo });
    }
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while g_at(hi)? < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 300 {
            return Err(OrbitError::BracketFailure { lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w0 = 0.5 * (lo + hi);
    if (g_at(w0)? - target).abs() > 1e-9 {
        return Err(OrbitError::BracketFailure { lo, hi });
    }
    Ok(Complex64::new(w0, 0.0))
}

/// Fixed within-fiber ordering (phase, then magnitude, then components) so
/// expansion output is identical however fibers are scheduled.
fn fiber_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.arg()
        .total_cmp(&b.arg())
        .then(a.norm().total_cmp(&b.norm()))
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// One backward step: every node (w, L) contributes its fiber f⁻¹(w), each
/// child w′ carrying L + log|f′(w′)|. Children appear sorted by parent
/// index, then by root phase; fibers the solver cannot resolve are dropped
/// and counted in `skipped`.
pub fn expand(f: &Polynomial, frontier: &OrbitFrontier) -> OrbitFrontier {
    let df = f.derivative();
    let mut nodes = Vec::with_capacity(frontier.nodes.len() * f.degree());
    let mut skipped = frontier.skipped;
    for parent in &frontier.nodes {
        match preimages(f, parent.point) {
            Ok(set) => {
                let mut fiber: Vec<OrbitNode> = set
                    .roots
                    .iter()
                    .map(|&w| {
                        let mag = df.evaluate(w).norm();
                        let step = if mag < 1e-300 { f64::NEG_INFINITY } else { mag.ln() };
                        OrbitNode { point: w, log_deriv: parent.log_deriv + step }
                    })
                    .collect();
                fiber.sort_by(|a, b| fiber_order(&a.point, &b.point));
                nodes.extend(fiber);
            }
            Err(_) => skipped += 1,
        }
    }
    OrbitFrontier { level: frontier.level + 1, nodes, base_point: frontier.base_point, skipped }
}

/// Max-shifted log-sum-exp; −∞ when the input is empty or all −∞.
fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Expands N levels from w₀ and reports S_n = Σ exp(2·log_deriv) per level
/// (computed by log-sum-exp so S_n ~ m⁴ⁿ never overflows), the consecutive
/// ratios, the partial sums Σ m⁻⁴ⁿ S_n, and the two reference bounds m⁴ and
/// m³·2^{(m+1)/m}.
pub fn series(f: &Polynomial, w0: Complex64, n_levels: usize) -> Result<SeriesReport, OrbitError> {
    assert!(n_levels >= 1);
    let m = f.degree();
    match (m as u128).checked_pow(n_levels as u32) {
        Some(n) if n <= NODE_BUDGET as u128 => {}
        _ => return Err(OrbitError::BudgetExceeded { levels: n_levels, budget: NODE_BUDGET }),
    }

    let m_f = m as f64;
    let mut frontier = OrbitFrontier::root(w0);
    let mut s_log = Vec::with_capacity(n_levels);
    let mut partial_sums = Vec::with_capacity(n_levels);
    let mut running = 0.0f64;
    for level in 1..=n_levels {
        frontier = expand(f, &frontier);
        let logs: Vec<f64> = frontier.nodes.iter().map(|nd| 2.0 * nd.log_deriv).collect();
        let ls = log_sum_exp(&logs);
        s_log.push(ls);
        running += (ls - 4.0 * level as f64 * m_f.ln()).exp();
        partial_sums.push(running);
    }
    let s_linear = s_log.iter().map(|&l| l.exp()).collect();
    let ratios = s_log.windows(2).map(|pair| (pair[1] - pair[0]).exp()).collect();
    Ok(SeriesReport {
        s_log,
        s_linear,
        ratios,
        partial_sums,
        m4: m_f.powi(4),
        sharp_bound: m_f.powi(3) * 2.0f64.powf((m_f + 1.0) / m_f),
    })
}

impl SeriesReport {
    pub fn levels(&self) -> usize {
        self.s_log.len()
    }

    /// CSV with header `n,S_n_log10,ratio,partial_sum,m4,sharp_bound`, one
    /// row per level; the ratio cell of row n holds S_n/S_{n−1} and is empty
    /// on the first row.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "n,S_n_log10,ratio,partial_sum,m4,sharp_bound")?;
        for i in 0..self.levels() {
            let ratio = if i == 0 { String::new() } else { self.ratios[i - 1].to_string() };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                self.s_log[i] / LN_10,
                ratio,
                self.partial_sums[i],
                self.m4,
                self.sharp_bound
            )?;
        }
        Ok(())
    }
}

/// Σ_{f(w′)=w} |f′(w′)|², the one-step growth factor of the series. For a
/// binomial a_m z^m + a₀ this equals m³|a_m|^{2/m}|w−a₀|^{2(m−1)/m} (for
/// monic: m³|w−a₀|^{2(m−1)/m}); the fiber-sum path computes it for any f.
pub fn one_step_factor(f: &Polynomial, w: Complex64) -> Result<f64, OrbitError> {
    assert!(f.degree() >= 2);
    let df = f.derivative();
    let fiber = preimages(f, w)?;
    Ok(fiber.roots.iter().map(|&z| df.evaluate(z).norm_sqr()).sum())
}

/// The two-level growth quotient
/// Σ_{f(f(u))=w} |f′(f(u))|²|f′(u)|² / Σ_{f(w′)=w} |f′(w′)|², enumerated as
/// Σ over the first fiber of |f′|²·one_step_factor over the denominator.
pub fn two_step_ratio(f: &Polynomial, w: Complex64) -> Result<f64, OrbitError> {
    let df = f.derivative();
    let first = preimages(f, w)?;
    let denominator: f64 = first.roots.iter().map(|&z| df.evaluate(z).norm_sqr()).sum();
    if denominator <= 1e-30 {
        return Err(OrbitError::DegenerateDenominator);
    }
    let mut numerator = 0.0;
    for &v in &first.roots {
        let weight = df.evaluate(v).norm_sqr();
        if weight == 0.0 {
            continue;
        }
        numerator += weight * one_step_factor(f, v)?;
    }
    Ok(numerator / denominator)
}

/// A point uniformly distributed on the closed unit disk (rejection from
/// the bounding square; draws are consumed sequentially from `rng`).
fn unit_disk_point(rng: &mut ChaCha8Rng) -> Complex64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        if x * x + y * y <= 1.0 {
            return Complex64::new(x, y);
        }
    }
}

/// Monic z^m + (random middle part) + a₀ with every middle coefficient
/// uniform in the disk of the given radius.
fn perturbed_binomial(m: usize, a0: Complex64, radius: f64, rng: &mut ChaCha8Rng) -> Polynomial {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m + 1];
    coeffs[0] = a0;
    coeffs[m] = Complex64::new(1.0, 0.0);
    for slot in coeffs.iter_mut().take(m).skip(1) {
        *slot = unit_disk_point(rng) * radius;
    }
    Polynomial::new(coeffs).expect("sampled coefficients are finite and monic")
}

/// Sampled lower bound for u_δ(w, a): the sup over monic f with a₀ = a and
/// middle coefficients of magnitude < δ of
/// |two_step_ratio(f, w) − two_step_ratio(z^m + a, w)|. Sample i draws from
/// stream i of the seeded generator (middle coefficients uniform in the disk
/// of radius δ·(1−1e−9)), so shrinking δ rescales the same perturbations
/// toward f = g and estimates shrink accordingly.
pub fn u_delta_estimate(
    m: usize,
    a: Complex64,
    w: Complex64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<PerturbEstimate, OrbitError> {
    assert!(m >= 2);
    assert!(delta >= 0.0);
    assert!(samples >= 1);
    assert!((w - a).norm() > 1e-9, "w must stay off the diagonal w = a");

    let g = Polynomial::binomial(m, a);
    let reference = two_step_ratio(&g, w)?;
    let radius = delta * (1.0 - 1e-9);
    let mut worst = 0.0f64;
    let mut skipped = 0usize;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let f = perturbed_binomial(m, a, radius, &mut rng);
        match two_step_ratio(&f, w) {
            Ok(r) => worst = worst.max((r - reference).abs()),
            Err(_) => skipped += 1,
        }
    }
    Ok(PerturbEstimate { value: worst, used: samples - skipped, skipped })
}

/// Max over the m² solutions w of f(f(w)) = a + η of the deviation
/// ||f′(w)| − m|a|^{(m−1)/m}|; the reference value is exact for f = z^m + a
/// and η = 0, where the inner fiber sits on |w| = |a|^{1/m}.
pub fn fiber_derivative_deviation(
    f: &Polynomial,
    a: Complex64,
    eta: Complex64,
) -> Result<f64, OrbitError> {
    let m = f.degree() as f64;
    let reference = m * a.norm().powf((m - 1.0) / m);
    let df = f.derivative();
    let mut worst = 0.0f64;
    let first = preimages(f, a + eta)?;
    for &v in &first.roots {
        let second = preimages(f, v)?;
        for &u in &second.roots {
            worst = worst.max((df.evaluate(u).norm() - reference).abs());
        }
    }
    Ok(worst)
}

/// Sampled lower bound for v_{ε′}(a): the sup of the fiber derivative
/// deviation over monic f with a₀ = a satisfying the ε′-condition and over
/// |η| < ε′. Per-sample draws come from stream i (middle coefficients, then
/// η, all uniform in the disk of radius ε′·(1−1e−9)).
pub fn v_estimate(
    m: usize,
    a: Complex64,
    eps_prime: f64,
    samples: usize,
    seed: u64,
) -> Result<PerturbEstimate, OrbitError> {
    assert!(m >= 2);
    assert!(eps_prime > 0.0);
    assert!(a.norm() <= 2.0);
    assert!(samples >= 1);

    let radius = eps_prime * (1.0 - 1e-9);
    let mut worst = 0.0f64;
    let mut skipped = 0usize;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let f = perturbed_binomial(m, a, radius, &mut rng);
        let eta = unit_disk_point(&mut rng) * radius;
        match fiber_derivative_deviation(&f, a, eta) {
            Ok(d) => worst = worst.max(d),
            Err(_) => skipped += 1,
        }
    }
    Ok(PerturbEstimate { value: worst, used: samples - skipped, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basin::alpha;
    use crate::roots::solve;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basilica() -> Polynomial {
        Polynomial::binomial(2, c(-1.0, 0.0))
    }

    #[test]
    fn base_point_pure_powers() {
        for m in [2usize, 3, 4] {
            let f = Polynomial::binomial(m, c(0.0, 0.0));
            let w0 = base_point(&f, 0.5).unwrap();
            assert!((w0 - c(2.0, 0.0)).norm() < 1e-8, "m={m}: {w0}");
        }
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let w0 = base_point(&f, 1.0 / std::f64::consts::E).unwrap();
        assert!((w0 - c(std::f64::consts::E, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn base_point_basilica_sits_at_green_level() {
        let f = basilica();
        let w0 = base_point(&f, 0.5).unwrap();
        assert_eq!(w0.im, 0.0);
        assert!(w0.re > 0.0);
        let g = green(&f, w0, BASE_TARGET_MAG, BASE_MAX_ITER).unwrap();
        assert!((g.value - 2.0f64.ln()).abs() <= 1e-9, "G(w0) = {}", g.value);
        // independently bisected reference value
        assert!((w0.re - 2.2642652660462517).abs() < 1e-7, "{}", w0.re);
    }

    #[test]
    #[should_panic(expected = "critical orbits")]
    fn base_point_rejects_fully_escaping_critical_orbits() {
        let f = Polynomial::binomial(2, c(4.0, 0.0));
        let _ = base_point(&f, 0.5);
    }

    #[test]
    fn expand_square_level_one() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let frontier = expand(&f, &OrbitFrontier::root(c(2.0, 0.0)));
        assert_eq!(frontier.level, 1);
        assert_eq!(frontier.skipped, 0);
        assert_eq!(frontier.nodes.len(), 2);
        let expected = (2.0 * 2.0f64.sqrt()).ln();
        // phase order: +√2 (arg 0) before −√2 (arg π)
        assert!((frontier.nodes[0].point - c(2.0f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!((frontier.nodes[1].point - c(-(2.0f64.sqrt()), 0.0)).norm() < 1e-12);
        for node in &frontier.nodes {
            assert!((node.log_deriv - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_critical_fiber_marks_minus_infinity() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let frontier = expand(&f, &OrbitFrontier::root(c(0.0, 0.0)));
        assert_eq!(frontier.nodes.len(), 2);
        for node in &frontier.nodes {
            assert_eq!(node.point, c(0.0, 0.0));
            assert_eq!(node.log_deriv, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn series_square_matches_closed_form() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let report = series(&f, c(2.0, 0.0), 10).unwrap();
        assert_eq!(report.levels(), 10);
        assert!((report.s_linear[0] - 16.0).abs() < 1e-10 * 16.0);
        for n in 1..=10usize {
            // S_n = 8ⁿ·2^{2−2/2ⁿ} for the pure square from w₀ = 2
            let closed = (n as f64) * 8.0f64.ln() + (2.0 - 2.0 / 2.0f64.powi(n as i32)) * 2.0f64.ln();
            assert!((report.s_log[n - 1] - closed).abs() < 1e-9, "level {n}");
        }
        // ratios trend to 8, comfortably below m⁴ = 16
        let last = *report.ratios.last().unwrap();
        assert!((last - 8.0).abs() < 0.2);
        assert_eq!(report.m4, 16.0);
        // stored ratios are consistent with stored S values
        for i in 0..report.ratios.len() {
            let recomputed = (report.s_log[i + 1] - report.s_log[i]).exp();
            assert!((report.ratios[i] - recomputed).abs() <= 1e-12 * recomputed.abs());
        }
        // first partial sum is m⁻⁴·S_1 = 16/16
        assert!((report.partial_sums[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_single_level_partial_sum() {
        let f = Polynomial::binomial(3, c(0.1, 0.0));
        let report = series(&f, c(1.5, 0.0), 1).unwrap();
        assert_eq!(report.levels(), 1);
        let expected = report.s_log[0].exp() / 81.0;
        assert!((report.partial_sums[0] - expected).abs() < 1e-12 * expected);
        assert!(report.ratios.is_empty());
    }

    #[test]
    fn series_refuses_oversized_frontier() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let err = series(&f, c(2.0, 0.0), 24).unwrap_err();
        assert_eq!(err, OrbitError::BudgetExceeded { levels: 24, budget: NODE_BUDGET });
    }

    #[test]
    fn one_step_factor_examples() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        assert!((one_step_factor(&f, c(1.0, 0.0)).unwrap() - 8.0).abs() < 1e-10);
        assert!((one_step_factor(&f, c(4.0, 0.0)).unwrap() - 32.0).abs() < 1e-10);
        let g = Polynomial::binomial(3, c(1.0, 0.0));
        assert!(one_step_factor(&g, c(1.0, 0.0)).unwrap() < 1e-20);
    }

    #[test]
    fn one_step_factor_matches_binomial_closed_form() {
        for (m, a0, w) in [
            (3usize, c(0.1, 0.0), c(1.3, 0.2)),
            (2, c(-1.0, 0.0), c(2.0, 0.0)),
            (4, c(0.0, 0.5), c(-0.7, 1.1)),
        ] {
            let f = Polynomial::binomial(m, a0);
            let fiber_sum = one_step_factor(&f, w).unwrap();
            let mf = m as f64;
            let closed = mf.powi(3) * (w - a0).norm().powf(2.0 * (mf - 1.0) / mf);
            assert!(
                (fiber_sum - closed).abs() <= 1e-8 * closed.max(1e-30),
                "m={m}: {fiber_sum} vs {closed}"
            );
        }
    }

    #[test]
    fn one_step_factor_general_polynomial() {
        // z² − z at w = 3: fiber (1±√13)/2, |f′|² = 13 at both points
        let f = Polynomial::from_pairs(&[(0.0, 0.0), (-1.0, 0.0), (1.0, 0.0)]).unwrap();
        let got = one_step_factor(&f, c(3.0, 0.0)).unwrap();
        assert!((got - 26.0).abs() < 1e-8, "{got}");
    }

    #[test]
    fn two_step_ratio_square() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let r = two_step_ratio(&f, c(4.0, 0.0)).unwrap();
        assert!((r - 16.0).abs() < 1e-10, "{r}");
        assert_eq!(two_step_ratio(&f, c(0.0, 0.0)), Err(OrbitError::DegenerateDenominator));
    }

    #[test]
    fn two_step_ratio_matches_composed_enumeration() {
        // independent oracle: solve f(f(u)) = w on the composed polynomial
        fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
            for (i, &x) in a.iter().enumerate() {
                for (j, &y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        }
        fn compose(f: &Polynomial, g: &Polynomial) -> Polynomial {
            let mut acc = vec![*f.coeffs().last().unwrap()];
            for &coeff in f.coeffs().iter().rev().skip(1) {
                acc = poly_mul(&acc, g.coeffs());
                acc[0] += coeff;
            }
            Polynomial::new(acc).unwrap()
        }

        for (f, w) in [
            (Polynomial::binomial(3, c(0.3, 0.0)), c(1.5, 0.0)),
            (basilica(), c(1.0, 0.5)),
        ] {
            let df = f.derivative();
            let ff = compose(&f, &f);
            let second = solve(&ff, w, 1e-12, 400).unwrap();
            let numerator: f64 = second
                .roots
                .iter()
                .map(|&u| (df.evaluate(f.evaluate(u)) * df.evaluate(u)).norm_sqr())
                .sum();
            let denominator = one_step_factor(&f, w).unwrap();
            let oracle = numerator / denominator;
            let got = two_step_ratio(&f, w).unwrap();
            assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
        }
    }

    #[test]
    fn two_step_ratio_binomial_sharp_bound() {
        for (m, a0) in [(3usize, c(0.0, 0.5)), (2, c(-0.8, 0.0)), (4, c(0.3, 0.3))] {
            let f = Polynomial::binomial(m, a0);
            let mf = m as f64;
            assert!(a0.norm() <= 2.0f64.powf(1.0 / (mf - 1.0)));
            let bound = mf.powi(3) * 2.0f64.powf((mf + 1.0) / mf);
            let radius = alpha(a0.norm(), m) + 0.009;
            for step in 0..8 {
                let w = Complex64::from_polar(radius, step as f64 * 0.785 + 0.11);
                let r = two_step_ratio(&f, w).unwrap();
                assert!(r <= bound + 1e-9, "m={m}, w={w}: {r} > {bound}");
            }
        }
    }

    #[test]
    fn u_delta_zero_is_exact_zero() {
        let est = u_delta_estimate(2, c(1.0, 0.0), c(2.5, 0.0), 0.0, 1, 7).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.used, 1);
        assert_eq!(est.skipped, 0);
    }

    #[test]
    fn u_delta_tiny_perturbation() {
        let est = u_delta_estimate(2, c(1.0, 0.0), c(2.5, 0.0), 1e-9, 20, 11).unwrap();
        assert!(est.value < 1e-6, "{}", est.value);
        assert_eq!(est.used, 20);
    }

    #[test]
    fn u_delta_monotone_under_nested_sampling() {
        let big = u_delta_estimate(2, c(1.0, 0.0), c(2.5, 0.0), 0.1, 40, 3).unwrap();
        let small = u_delta_estimate(2, c(1.0, 0.0), c(2.5, 0.0), 0.01, 40, 3).unwrap();
        assert!(small.value <= big.value + 1e-12, "{} vs {}", small.value, big.value);
    }

    #[test]
    fn fiber_deviation_exact_binomial() {
        let zero = Complex64::new(0.0, 0.0);
        let g3 = Polynomial::binomial(3, c(0.3, 0.4));
        assert!(fiber_derivative_deviation(&g3, c(0.3, 0.4), zero).unwrap() < 1e-10);
        let g2 = Polynomial::binomial(2, c(1.0, 0.0));
        assert!(fiber_derivative_deviation(&g2, c(1.0, 0.0), zero).unwrap() < 1e-10);
    }

    #[test]
    fn v_estimate_shrinks_with_eps() {
        let est = v_estimate(2, c(1.0, 0.0), 1e-12, 30, 5).unwrap();
        assert!(est.value < 1e-4, "{}", est.value);
        assert_eq!(est.skipped, 0);
    }

    #[test]
    fn frontier_invariants_basilica() {
        let f = basilica();
        let w0 = base_point(&f, 0.5).unwrap();
        let mut frontier = OrbitFrontier::root(w0);
        for level in 1..=5usize {
            let prev = frontier.clone();
            frontier = expand(&f, &frontier);
            assert_eq!(frontier.nodes.len(), 1 << level);
            assert_eq!(frontier.skipped, 0);

            // forward re-iteration returns to w₀ and reproduces the weight
            for node in &frontier.nodes {
                let fwd = f.iterate(node.point, level);
                assert!((fwd.value - w0).norm() <= 1e-6 * w0.norm());
                assert!((fwd.log_deriv_abs - node.log_deriv).abs() <= 1e-8);
            }

            // one application of f lands on some previous-level node
            for node in &frontier.nodes {
                let image = f.evaluate(node.point);
                let nearest = prev
                    .nodes
                    .iter()
                    .map(|p| (p.point - image).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest <= 1e-7, "closure gap {nearest}");
            }

            // S_{level} ≤ S_{level−1} · max one-step factor over previous level
            let s_prev = log_sum_exp(&prev.nodes.iter().map(|n| 2.0 * n.log_deriv).collect::<Vec<_>>());
            let s_cur = log_sum_exp(&frontier.nodes.iter().map(|n| 2.0 * n.log_deriv).collect::<Vec<_>>());
            let max_factor = prev
                .nodes
                .iter()
                .map(|n| one_step_factor(&f, n.point).unwrap())
                .fold(0.0f64, f64::max);
            assert!(s_cur.exp() <= s_prev.exp() * max_factor * (1.0 + 1e-8));
        }
    }

    #[test]
    fn rotational_symmetry_of_binomial_frontiers() {
        let f = Polynomial::binomial(3, c(0.1, 0.0));
        let w0 = base_point(&f, 0.5).unwrap();
        let mut frontier = OrbitFrontier::root(w0);
        for _ in 1..=5 {
            frontier = expand(&f, &frontier);
            let mut mags: Vec<f64> = frontier.nodes.iter().map(|n| n.point.norm()).collect();
            mags.sort_by(f64::total_cmp);
            let mut run = 1usize;
            for i in 1..=mags.len() {
                if i < mags.len() && mags[i] - mags[i - 1] <= 1e-9 {
                    run += 1;
                } else {
                    assert_eq!(run % 3, 0, "magnitude multiplicity {run} at level {}", frontier.level);
                    run = 1;
                }
            }
        }
    }

    #[test]
    fn deep_nodes_approach_the_boundary() {
        for (f, a_mag) in [(Polynomial::binomial(3, c(0.1, 0.0)), 0.1), (basilica(), 1.0)] {
            let m = f.degree();
            let w0 = base_point(&f, 0.5).unwrap();
            let mut frontier = OrbitFrontier::root(w0);
            for _ in 0..8 {
                frontier = expand(&f, &frontier);
            }
            let cap = alpha(a_mag, m) + 0.05;
            let worst = frontier.nodes.iter().map(|n| n.point.norm()).fold(0.0f64, f64::max);
            assert!(worst <= cap, "deepest frontier reaches {worst}, cap {cap}");
        }
    }

    #[test]
    fn csv_layout() {
        let f = Polynomial::binomial(2, c(0.0, 0.0));
        let report = series(&f, c(2.0, 0.0), 3).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,S_n_log10,ratio,partial_sum,m4,sharp_bound");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
        // ratio cell empty on the first data row, populated afterwards
        assert_eq!(lines[1].split(',').nth(2).unwrap(), "");
        assert!(!lines[2].split(',').nth(2).unwrap().is_empty());
    }
}
