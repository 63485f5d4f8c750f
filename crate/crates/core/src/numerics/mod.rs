//! Special functions and stochastic-matrix utilities shared by the analyses.

mod matrix;
mod series;
mod special;

pub use matrix::{matrix_power, stationary_distribution, StochasticMatrix};
pub use series::{
    neumann_first_moment, neumann_second_moment, perturbed_diagonalization_moments, spectral_radius_bound,
    DiagonalizationMoments,
};
pub use special::{
    binomial, erlang_cdf, erlang_cdf_integrals, erlang_cdfs, ln_factorial, lower_incomplete_gamma, poisson_pmf,
    poisson_pmfs,
};
