//! Hölder-exponent lower bounds for planar Beltrami equations
//! `∂̄f = μ∂f + ν conj(∂f)` and the angular-stretching maps that attain them.
//!
//! Modules, bottom up:
//!
//! - [`periodic`]: angular grids, periodic sampled fields, circles.
//! - [`reduction`]: coefficient pairs and the equivalent divergence-form matrices.
//! - [`stretching`]: maps `|z|^α η(arg z)`, the angular ODE and its periodic exponents.
//! - [`sharp_family`]: the extremal family indexed by `(M, τ)`.
//! - [`estimator`]: the exponent bounds and the weight search.
//! - [`verify`]: residual checks and fitted exponents.

pub mod error;
pub mod estimator;
pub mod field;
pub mod linalg;
pub mod periodic;
pub mod reduction;
pub mod sharp_family;
pub mod stretching;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{
    beta_estimate, classical_bound, corollary_bound, gamma_estimate, mu_zero_bound, nu_zero_bound,
    remark_weights, ExponentReport, OptimizerSettings, SweepConfig, WeightFamily, WeightPair,
};
pub use field::{AngularProfile, PlanarCoefficient};
pub use linalg::Mat2;
pub use periodic::{AngularGrid, CircleSpec, PeriodicField};
pub use reduction::{
    beltrami_to_matrices, matrix_to_beltrami, normalize_matrix, BeltramiPair, MatrixField,
};
pub use sharp_family::{build_family, build_maps, build_matrix, SharpFamily};
pub use stretching::{find_periodic_alpha, solve_system, AngularStretching, KProfile};
pub use verify::{
    beltrami_residual, empirical_holder, weak_form_residual, PolarGrid, ResidualReport,
};
