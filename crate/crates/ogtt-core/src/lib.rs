//! Bayesian damped-oscillator modelling of oral glucose tolerance test (OGTT) data.
//!
//! The library fits the four-parameter damped-oscillator glucose deviation model
//! `g(t) = A e^{-alpha t} cos(omega t - delta)` to per-patient OGTT samples taken at
//! 0/30/60/90/120 minutes. Estimation is Bayesian: a data-driven uniform prior box,
//! a Gaussian noise model, MAP estimation by multi-start Nelder-Mead, posterior
//! sampling with an affine-invariant ensemble (stretch move) MCMC, and marginal
//! density summaries. The fitted `(A, alpha)` pairs feed a linear soft-margin SVM
//! separating healthy patients from those with a diabetic condition.
//!
//! Modules:
//! - [`oscillator`] — closed-form model, compartment reduction and the RK4 oracle
//! - [`cohort`] — OGTT records, CSV interchange, deviation shift, synthetic cohorts
//! - [`bayes`] — prior/likelihood/posterior and MAP estimation
//! - [`optim`] — bounded multi-start Nelder-Mead used by MAP estimation
//! - [`sampler`] — affine-invariant ensemble sampler with the stretch move
//! - [`analysis`] — conditional means, credible intervals, marginal densities
//! - [`svm`] — linear soft-margin SVM over the `(A, alpha)` plane

pub mod analysis;
pub mod bayes;
pub mod cohort;
pub mod optim;
pub mod oscillator;
pub mod sampler;
pub mod seeds;
pub mod svm;

pub use analysis::{MarginalDensity, ParameterSummary, PosteriorSummary};
pub use bayes::{
    GaussianPrior, LikelihoodExponent, MapEstimate, NoiseModel, OptimizerConfig, PriorBox,
};
pub use cohort::{CohortSpec, DeviationData, DiagnosticClass, OgttRecord, SyntheticPatient};
pub use oscillator::{CompartmentParams, OscillatorParams};
pub use sampler::{PosteriorSample, SamplerConfig};
pub use svm::{LabeledPoint, SvmModel, TrainConfig};

/// Number of model parameters: amplitude, damping, frequency, phase.
pub const PARAM_DIM: usize = 4;

/// A point in parameter space, ordered `[A, alpha, omega, delta]`.
pub type ParamVector = [f64; PARAM_DIM];

/// Column names used for parameter vectors in CSV and JSON interchange.
pub const PARAM_NAMES: [&str; PARAM_DIM] = ["A", "alpha", "omega", "delta"];
