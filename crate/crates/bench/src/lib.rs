//! Benchmark-only crate; the measurements live in `benches/core_ops.rs`.
//! Shared fixture constructors used by the benchmarks are defined here so the
//! bench file stays focused on the measurement loops.

use polybasin::{Complex, Polynomial};

/// The degree-2 polynomial z² − 1, whose basin drives most measurements.
pub fn basilica() -> Polynomial {
    Polynomial::from_pairs(&[(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]).unwrap()
}

/// A full (non-binomial) degree-8 polynomial with coefficients spread in the
/// disk of radius 2 — representative input for the simultaneous root solver.
pub fn dense_octic() -> Polynomial {
    let coeffs = [
        (1.3, -0.4),
        (-0.7, 0.9),
        (0.2, 1.1),
        (-1.6, 0.3),
        (0.8, -1.2),
        (0.1, 0.6),
        (-0.9, -0.5),
        (1.4, 0.2),
        (1.0, 0.0),
    ];
    Polynomial::from_pairs(&coeffs).unwrap()
}

/// A generic off-axis evaluation point.
pub fn probe_point() -> Complex {
    Complex::new(0.7, -0.3)
}
