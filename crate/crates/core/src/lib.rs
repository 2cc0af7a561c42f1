//! Generative compressed sensing with subsampled unitary measurements.
//!
//! The crate covers the full pipeline for recovering a signal that lies (or
//! nearly lies) in the range of a ReLU generative network from a random
//! subset of its Fourier (or other unitary) coefficients:
//!
//! * [`generative_model`]: `(k, d, n)` ReLU networks, their latent
//!   gradients and the enumeration of their linear pieces.
//! * [`transform`]: unitary operators `F` (identity, 1D/2D DFT, Hadamard,
//!   dense) with adjoints and row access.
//! * [`coherence`]: local coherences of the rows of `F` with respect to the
//!   prior, exactly on small instances and by a Monte-Carlo heuristic.
//! * [`sampling`]: probability vectors, with-replacement row sampling,
//!   preconditioners and sample-complexity bounds.
//! * [`recovery`]: measurement, the (preconditioned) least-squares
//!   objective and multi-restart Adam recovery in the latent space.
//! * [`verification`]: empirical checks of the restricted isometry
//!   property, isotropy of the sampled rows and the end-to-end error bound.
//! * [`experiment`]: uniform vs adapted phase-transition sweeps, the
//!   config grammar, CSV output and SVG plots.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! command line tool uses.

// `!(x > 0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod error;
pub mod experiment;
pub mod generative_model;
pub mod io;
pub mod linalg;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod transform;
pub mod verification;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;

pub type Network = generative_model::GenerativeNetwork<f64>;
pub type Piece = generative_model::ActivationPiece<f64>;
pub type Operator = transform::UnitaryOperator<f64>;
pub type Coherence = coherence::CoherenceVector<f64>;
pub type Probabilities = sampling::ProbabilityVector<f64>;
pub type Plan = sampling::SamplingPlan<f64>;
pub type Precond = sampling::Preconditioner<f64>;
pub type Measurements = recovery::MeasurementSet<f64>;
pub type Recovery = recovery::RecoveryResult<f64>;
pub type RecoveryConfig = recovery::RecoveryConfig<f64>;
pub type Mat = linalg::Matrix<f64>;
pub type C64 = Complex<f64>;
