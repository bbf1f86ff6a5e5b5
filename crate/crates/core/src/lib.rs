//! Large-order perturbation theory for one-dimensional even anharmonic
//! oscillators.
//!
//! The crate computes exact Rayleigh-Schrodinger orders, the zero-energy
//! euclidean trajectory of the inverted potential, and the asymptotic formulas
//! that describe how the orders grow with `k`.

pub mod density;
pub mod error;
pub mod euclidean;
pub mod fixed_point;
pub mod numerics;
pub mod potential;
pub mod recursion;

pub use error::{Error, PotentialError, Result};
pub use numerics::{BigFloat, Precision, Rational, SignedLog};
pub use potential::{Potential, PotentialValues};
pub use recursion::{compute_series, evaluate_order, PerturbationSeries, WaveOrder};
pub use euclidean::{Branch, EuclideanConstants, EuclideanPoint, Trajectory};
pub use fixed_point::{build_ladder, energy_asymptotic, LadderEnergy, LadderFunction};
pub use density::{DensitySaddle, DiagonalRegion, ExactDensityOrder, ExactGaussianValue};
