//! Command-line front end for the escape-basin toolkit.
//!
//! Every subcommand reads the polynomial from a JSON file
//! (`{"coeffs": [[re, im], …]}`, ascending degree), validates its own
//! preconditions up front, computes the full result in memory, and only then
//! writes the output file — a failed run never leaves a partial file behind.
//! Identical invocations (same flags, same seed) produce byte-identical
//! output files.
//!
//! Exit codes: 0 success, 1 invalid input or parameters, 2 computational
//! failure (solver stall, node budget exceeded, unwritable output).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polybasin::poly::Polynomial;
use polybasin::{basin, bottcher, orbit, roots, Complex, DiskPartition, Verdict, Viewport};

/// How wide the auto-chosen square viewport is, in escape radii. 2.2 leaves a
/// visible escaping ring around the circle |z| = ρ that encloses the filled
/// Julia set.
const VIEW_SCALE: f64 = 2.2;

/// Cap on rows a `partition` run will emit, so a typo in `--n` cannot ask for
/// billions of cells.
const PARTITION_ROW_CAP: u64 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "polybasin",
    about = "Escape-basin analysis for complex polynomials",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Escape-time raster over a square viewport (PGM or CSV, by extension)
    Render {
        /// Polynomial JSON file: {"coeffs": [[re, im], ...]}, ascending degree
        #[arg(long)]
        poly: PathBuf,
        /// Output path; .pgm writes 16-bit binary PGM, .csv writes "x,y,steps"
        #[arg(long)]
        out: PathBuf,
        /// Pixels per side of the square raster
        #[arg(long, default_value_t = 512)]
        res: usize,
        /// Iteration cap before a pixel is declared non-escaping
        #[arg(long, default_value_t = 256)]
        max_iter: usize,
    },
    /// Classify the escape basin from its critical orbits
    Connectivity {
        #[arg(long)]
        poly: PathBuf,
        /// Iteration cap per critical orbit
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
    },
    /// Backward-orbit derivative series with ratio diagnostics (CSV)
    Series {
        #[arg(long)]
        poly: PathBuf,
        /// Output CSV path (header "n,S_n_log10,ratio,partial_sum,m4,sharp_bound")
        #[arg(long)]
        out: PathBuf,
        /// Number of tree levels to sum
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Level curve the base point sits on: G(w0) = ln(1/r0)
        #[arg(long, default_value_t = 0.5)]
        r0: f64,
    },
    /// Monte-Carlo integral of |F'|^p over the basin (JSON)
    Brennan {
        #[arg(long)]
        poly: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
        /// Integrand exponent, in [2, 4]
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Sample count for the disk part
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Seed for the counter-based sampler
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling-disk radius (default: 4x the escape radius; must be at least 2x)
        #[arg(long)]
        rbig: Option<f64>,
        /// Iteration cap per sampled orbit
        #[arg(long, default_value_t = bottcher::DEFAULT_POTENTIAL_ITER)]
        max_iter: usize,
    },
    /// Stability of the two-step ratio under coefficient perturbations (JSON)
    Perturb {
        /// Polynomial JSON file; must be a monic binomial z^m + a0
        #[arg(long)]
        poly: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
        /// Perturb middle coefficients within this radius and compare ratios at w
        #[arg(long)]
        delta: Option<f64>,
        /// Perturb middle coefficients and the fiber target within this radius
        /// and compare fiber derivative magnitudes
        #[arg(long = "eps-prime")]
        eps_prime: Option<f64>,
        /// Ratio evaluation point for --delta runs, as "re" or "re,im"
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "1.5")]
        w: Complex,
        /// Random perturbations to draw
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Marked points of the level-n model-disk partition (CSV)
    Partition {
        /// Polynomial JSON file; its degree sets the subdivision arity
        #[arg(long)]
        poly: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Partition level; emits degree^n cells
        #[arg(long, default_value_t = 3)]
        n: u32,
        /// Base radius of the partition, in (0, 1)
        #[arg(long, default_value_t = 0.5)]
        r0: f64,
    },
    /// Print degree, escape radius, critical points, middle-coefficient
    /// status, and every flag default
    Info {
        #[arg(long)]
        poly: PathBuf,
        /// Middle-coefficient bound to check
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

/// `println!` that ignores a closed stdout (e.g. piped into `head`) instead
/// of panicking.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// A failed run: what to tell the user and which exit code to use.
enum Failure {
    /// Bad input or parameters — exit 1.
    Validation(String),
    /// The computation itself failed — exit 2.
    Compute(String),
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn compute_failed(err: impl std::fmt::Display) -> Failure {
    Failure::Compute(err.to_string())
}

fn parse_complex(s: &str) -> Result<Complex, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{t}' is not a real number"))
    };
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex::new(parse(re)?, parse(im)?)),
        None => Ok(Complex::new(parse(s)?, 0.0)),
    }
}

fn load_polynomial(path: &Path) -> Result<Polynomial, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    Polynomial::from_json(&text)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn require_monic(f: &Polynomial, what: &str) -> Result<(), Failure> {
    if f.is_monic() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what} requires a monic polynomial (leading coefficient 1), got {}",
            f.leading()
        )))
    }
}

/// Refuse polynomials whose critical orbits all escape: the base point, the
/// series, and the integral are undefined on such basins.
fn require_bounded_critical_orbit(f: &Polynomial, what: &str) -> Result<(), Failure> {
    let report = basin::connectivity(f, 1000).map_err(compute_failed)?;
    if report.verdict == Verdict::NotSimplyConnected {
        Err(invalid(format!(
            "every critical orbit of this polynomial escapes, so {what} is undefined"
        )))
    } else {
        Ok(())
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .map_err(|e| Failure::Compute(format!("cannot write {}: {e}", path.display())))
}

fn fmt_complex(z: Complex) -> String {
    format!("{}{}{}i", z.re, if z.im < 0.0 { "" } else { "+" }, z.im)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Render { poly, out, res, max_iter } => {
            let f = load_polynomial(&poly)?;
            if res == 0 {
                return Err(invalid("--res must be at least 1"));
            }
            let side = VIEW_SCALE * basin::effective_escape_radius(&f);
            let viewport = Viewport {
                center: Complex::new(0.0, 0.0),
                width: side,
                height: side,
            };
            let grid = basin::rasterize(&f, viewport, (res, res), max_iter);
            let mut buf = Vec::new();
            match out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
                Some(ref ext) if ext == "pgm" => grid.write_pgm(&mut buf),
                Some(ref ext) if ext == "csv" => grid.write_csv(&mut buf),
                _ => {
                    return Err(invalid(format!(
                        "{}: render output must end in .pgm or .csv",
                        out.display()
                    )))
                }
            }
            .expect("writing to an in-memory buffer cannot fail");
            write_output(&out, &buf)?;
            let escaped = grid.cells.iter().filter(|&&c| c >= 0).count();
            out!(
                "render: {res}x{res} raster over width {side:.4}, {escaped}/{} pixels escape within {max_iter} steps -> {}",
                res * res,
                out.display()
            );
        }

        Command::Connectivity { poly, max_iter } => {
            let f = load_polynomial(&poly)?;
            if max_iter == 0 {
                return Err(invalid("--max-iter must be at least 1"));
            }
            let report = basin::connectivity(&f, max_iter).map_err(compute_failed)?;
            out!("{}", report.verdict);
        }

        Command::Series { poly, out, n, r0 } => {
            let f = load_polynomial(&poly)?;
            require_monic(&f, "series")?;
            if f.degree() < 2 {
                return Err(invalid("series requires degree at least 2"));
            }
            if n == 0 {
                return Err(invalid("--n must be at least 1"));
            }
            if !(0.0 < r0 && r0 < 1.0) {
                return Err(invalid("--r0 must lie strictly between 0 and 1"));
            }
            require_bounded_critical_orbit(&f, "the series base point")?;
            let w0 = orbit::base_point(&f, r0).map_err(compute_failed)?;
            let report = orbit::series(&f, w0, n).map_err(compute_failed)?;
            let mut buf = Vec::new();
            report
                .write_csv(&mut buf)
                .expect("writing to an in-memory buffer cannot fail");
            write_output(&out, &buf)?;
            let last_ratio = report
                .ratios
                .last()
                .map(|r| format!("{r:.4}"))
                .unwrap_or_else(|| "-".into());
            out!(
                "series: N={n}, base point {}, last ratio {last_ratio} (m^4 = {}) -> {}",
                fmt_complex(w0),
                report.m4,
                out.display()
            );
        }

        Command::Brennan { poly, out, p, samples, seed, rbig, max_iter } => {
            let f = load_polynomial(&poly)?;
            require_monic(&f, "brennan")?;
            if f.degree() < 2 {
                return Err(invalid("brennan requires degree at least 2"));
            }
            if !(2.0..=4.0).contains(&p) {
                return Err(invalid("--p must lie in [2, 4]"));
            }
            if samples < 2 {
                return Err(invalid("--samples must be at least 2"));
            }
            if max_iter == 0 {
                return Err(invalid("--max-iter must be at least 1"));
            }
            let rho = basin::escape_radius(&f);
            let r_big = rbig.unwrap_or(4.0 * rho);
            if r_big < 2.0 * rho {
                return Err(invalid(format!(
                    "--rbig must be at least twice the escape radius ({:.6})",
                    2.0 * rho
                )));
            }
            require_bounded_critical_orbit(&f, "the integral")?;
            let estimate = bottcher::brennan_integral(&f, p, samples, r_big, seed, max_iter);
            write_output(&out, estimate.to_json().as_bytes())?;
            out!(
                "brennan: p={p}, total={:.6}, std_error={:.3e}, {}/{} samples in basin -> {}",
                estimate.total,
                estimate.std_error,
                estimate.samples_in,
                estimate.samples_total,
                out.display()
            );
        }

        Command::Perturb { poly, out, delta, eps_prime, w, samples, seed } => {
            let f = load_polynomial(&poly)?;
            require_monic(&f, "perturb")?;
            if !f.is_binomial() || f.degree() < 2 {
                return Err(invalid(
                    "perturb requires a monic binomial z^m + a0 with m >= 2",
                ));
            }
            if samples == 0 {
                return Err(invalid("--samples must be at least 1"));
            }
            let m = f.degree();
            let a = f.coeffs()[0];
            let (kind, radius, estimate) = match (delta, eps_prime) {
                (Some(d), None) => {
                    if d < 0.0 {
                        return Err(invalid("--delta must be nonnegative"));
                    }
                    if (w - a).norm() <= 1e-9 {
                        return Err(invalid(
                            "--w must differ from the constant coefficient a0 (the ratio is undefined on w = a0)",
                        ));
                    }
                    let est = orbit::u_delta_estimate(m, a, w, d, samples, seed)
                        .map_err(compute_failed)?;
                    ("ratio_shift", d, est)
                }
                (None, Some(e)) => {
                    if e <= 0.0 {
                        return Err(invalid("--eps-prime must be positive"));
                    }
                    if a.norm() > 2.0 {
                        return Err(invalid(
                            "--eps-prime runs require |a0| <= 2 (beyond that every critical orbit escapes)",
                        ));
                    }
                    let est =
                        orbit::v_estimate(m, a, e, samples, seed).map_err(compute_failed)?;
                    ("fiber_derivative_shift", e, est)
                }
                _ => {
                    return Err(invalid("pass exactly one of --delta or --eps-prime"));
                }
            };
            let mut doc = serde_json::json!({
                "kind": kind,
                "m": m,
                "a": [a.re, a.im],
                "radius": radius,
                "samples": samples,
                "seed": seed,
                "value": estimate.value,
                "used": estimate.used,
                "skipped": estimate.skipped,
            });
            if kind == "ratio_shift" {
                doc["w"] = serde_json::json!([w.re, w.im]);
            }
            write_output(&out, doc.to_string().as_bytes())?;
            out!(
                "perturb({kind}): value={:e} over {} samples ({} skipped) -> {}",
                estimate.value,
                estimate.used,
                estimate.skipped,
                out.display()
            );
        }

        Command::Partition { poly, out, n, r0 } => {
            let f = load_polynomial(&poly)?;
            if f.degree() < 2 {
                return Err(invalid("partition requires degree at least 2"));
            }
            if !(0.0 < r0 && r0 < 1.0) {
                return Err(invalid("--r0 must lie strictly between 0 and 1"));
            }
            let count = (f.degree() as u64)
                .checked_pow(n)
                .filter(|&c| c <= PARTITION_ROW_CAP)
                .ok_or_else(|| {
                    invalid(format!(
                        "level {n} of a degree-{} partition exceeds the {PARTITION_ROW_CAP}-cell cap",
                        f.degree()
                    ))
                })?;
            let part = DiskPartition::new(f.degree(), r0, 0.0);
            let mut buf = String::from("k,re,im,r_inner,r_outer,theta_lo,theta_hi\n");
            for k in 0..count {
                let cell = bottcher::partition_point(&part, n, k)
                    .expect("k ranges over exactly the level's cells");
                buf.push_str(&format!(
                    "{k},{},{},{},{},{},{}\n",
                    cell.point.re,
                    cell.point.im,
                    cell.radial.0,
                    cell.radial.1,
                    cell.angular.0,
                    cell.angular.1
                ));
            }
            write_output(&out, buf.as_bytes())?;
            out!(
                "partition: level {n}, {count} cells of the model disk -> {}",
                out.display()
            );
        }

        Command::Info { poly, delta } => {
            let f = load_polynomial(&poly)?;
            out!("degree: {}", f.degree());
            out!("monic: {}", f.is_monic());
            out!(
                "escape radius: {:.12}",
                basin::effective_escape_radius(&f)
            );
            match f.critical_points() {
                Ok(points) => {
                    // Multiple critical points come back from the solver as a
                    // jittered cluster whose spread grows with multiplicity
                    // (~1e-8 for a double point); merge generously for display.
                    let clustered = roots::cluster(&points, 1e-6);
                    out!("critical points ({}):", points.len());
                    for (z, mult) in clustered {
                        out!("  {} (multiplicity {mult})", fmt_complex(z));
                    }
                }
                Err(e) => out!("critical points: solver failed ({e})"),
            }
            match f.delta_condition(delta) {
                Ok(true) => out!("middle coefficients all below {delta}: yes"),
                Ok(false) => out!("middle coefficients all below {delta}: no"),
                Err(_) => out!("middle coefficients all below {delta}: n/a (not monic)"),
            }
            out!("flag defaults:");
            out!("  render:       --res 512, --max-iter 256 (output by extension: .pgm or .csv)");
            out!("  connectivity: --max-iter 1000");
            out!("  series:       --n 10, --r0 0.5");
            out!("  brennan:      --p 2, --samples 1000000, --seed 0, --rbig 4x escape radius, --max-iter {}", bottcher::DEFAULT_POTENTIAL_ITER);
            out!("  perturb:      --w 1.5, --samples 200, --seed 0 (pass --delta or --eps-prime)");
            out!("  partition:    --n 3, --r0 0.5");
            out!("  info:         --delta 0.1");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
