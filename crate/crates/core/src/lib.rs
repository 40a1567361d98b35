//! Gromov-Wasserstein quantities between Gaussian measures on Euclidean
//! spaces of possibly different dimensions.
//!
//! The closed-form side computes, from the two covariance spectra alone,
//! a lower bound `LGW2^2` and an upper bound `GGW2^2` on the squared
//! Gromov-Wasserstein distance with squared-Euclidean ground costs, the
//! affine map attaining the upper bound, the a-priori cap on their gap, and
//! the exact common value when the spectra are proportional (which covers
//! every 1-D pair). The discrete side evaluates the same objective on
//! weighted point clouds, solves it approximately with an entropic
//! alternating scheme, and cross-checks against an exhaustive permutation
//! oracle at desk scale.
//!
//! Entry points:
//! - [`bounds`]: full `GwBounds` report for two Gaussians;
//! - [`ggw_map`]: the optimal affine map of the Gaussian-restricted problem;
//! - [`w2_squared`]: the classic quadratic Wasserstein closed form;
//! - [`entropic_gw_solve`] / [`brute_force_gw`]: solvers on point clouds;
//! - [`sample`]: seeded Gaussian sampling for experiments.

pub mod closed_form;
pub mod constrained;
pub mod discrete;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod spectral;

pub use closed_form::{
    bounds, ggw2_squared, ggw_map, gw2_proportional, lgw2_squared, reduce_degenerate, w2_squared,
    GwBounds,
};
pub use constrained::{
    max_cross_cov_frobenius, max_trace_rank_one, min_decreasing_unit_inner_product,
};
pub use discrete::{
    assignment_slope_data, brute_force_gw, entropic_gw_solve, gw_objective,
    gw_objective_decomposed, gw_objective_reference, inner_gw_objective,
    inner_gw_objective_reference, random_plan, CouplingPlan, EntropicGwParams, SlopePoint,
    SolveReport,
};
pub use error::{GwError, Result};
pub use gaussian::{
    isserlis_fourth_moment, pca_align, push_forward, sample, squared_coordinate_covariance,
    AffineMap, GaussianMeasure, PointCloud,
};
pub use spectral::{
    psd_classify, schur_complement, schur_feasible, sorted_eig, sym_sqrt, PsdClass,
    SpectralDecomposition, SymmetricMatrix, DEFAULT_PSD_TOL,
};
