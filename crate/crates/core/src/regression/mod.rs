//! Least-squares and penalized regression.

mod elastic_net;
mod ols;

pub use elastic_net::{
    default_a_grid, default_lambda_grid, elastic_net_cv, elastic_net_solve, elastic_net_solve_traced, lambda_max,
    predictor_significance, ElasticNetFit, EnetSolution, CONVERGENCE_TOL, MAX_SWEEPS, MIN_PERMUTATIONS,
};
pub use ols::{ols_fit, OlsFit};
