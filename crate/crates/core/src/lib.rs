//! Numerical toolkit for the dynamics of a polynomial map near infinity.
//!
//! Everything revolves around the escape basin Ω(f) of a degree-m polynomial:
//! the set of points whose forward orbit tends to infinity. The crate computes
//!
//! * the basin's Green's function and the derivative data of the conformal map
//!   F: Ω → 𝔻 built from the Böttcher coordinate ([`bottcher`]),
//! * backward-orbit trees under f and the derivative series S_n summed over
//!   them, with ratio diagnostics against m⁴ ([`orbit`]),
//! * escape radii, connectivity classification from critical orbits, and
//!   escape-time rasters ([`basin`]),
//! * simultaneous polynomial root finding used by all fiber enumeration
//!   ([`roots`]),
//! * the polynomial arithmetic everything sits on ([`poly`]).
//!
//! All operations are pure functions over immutable data; seeded sampling is
//! counter-based, so results are reproducible bit-for-bit for a fixed seed
//! regardless of evaluation order.

pub mod basin;
pub mod bottcher;
pub mod orbit;
pub mod poly;
pub mod roots;

pub use basin::{ConnectivityVerdict, EscapeGrid, EscapeResult, Verdict, Viewport};
pub use bottcher::{BrennanEstimate, DiskPartition, GreenValue, KoebeBounds, PartitionCell};
pub use orbit::{OrbitFrontier, OrbitNode, PerturbEstimate, SeriesReport};
pub use poly::{AffineMap, Iterated, Polynomial};
pub use roots::RootSet;

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;
