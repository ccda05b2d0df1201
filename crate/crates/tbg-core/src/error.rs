use alloc::string::String;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("k = {k} lies within {distance:e} of a Dirac point")]
    NearDiracPoint { k: Complex64, distance: f64 },
    #[error("operator leaks {leakage:e} out of the rotational subspace")]
    NonInvariant { leakage: f64 },
    #[error("magic angle {alpha} moved by {drift:e} between truncations")]
    TruncationUnstable { alpha: Complex64, drift: f64 },
    #[error("eigenvalue cluster at {mu} cannot be separated")]
    AmbiguousCluster { mu: Complex64 },
    #[error("no singular value below threshold (smallest {smallest:e})")]
    EmptyKernel { smallest: f64 },
    #[error("extrapolation did not converge (successive estimates differ by {delta:e})")]
    NonConvergent { delta: f64 },
    #[error("potential has no exact coefficient set; use an exactly representable or scaled potential")]
    InexactCoefficients,
    #[error("flat-band gap inconclusive: flat max {flat_max:e}, next band min {gap_min:e}")]
    InconclusiveGap { flat_max: f64, gap_min: f64 },
    #[error("evaluation point {z} is a pole")]
    PoleAt { z: Complex64 },
    #[error("zero near {location} has ill-conditioned order estimate (slope {slope})")]
    IllConditionedZero { location: Complex64, slope: f64 },
    #[error("Gram determinant {g:e} at k = {k} is numerically singular")]
    SingularSample { k: Complex64, g: f64 },
    #[error("plaquette sum {value} is not close to an integer")]
    NonQuantized { value: f64 },
    #[error("contour passes within {distance:e} of the dual lattice")]
    ContourTooClose { distance: f64 },
    #[error("kernel rank changes on the grid ({expected} vs {found})")]
    RankChange { expected: usize, found: usize },
    #[error("eigensolver failed to converge")]
    Solver,
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;
