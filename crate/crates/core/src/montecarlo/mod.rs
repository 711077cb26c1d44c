//! Monte Carlo verification: small-ball probabilities and posterior ball
//! ratios, asymptotic maximizing families, and the mean-squared-error and
//! convergence-rate experiments for the Laplacian MAP estimator.
//!
//! Every estimator splits its work into indexed units (sample blocks or
//! replicates), each with its own RNG stream derived from `(seed, index)`, and
//! reduces the unit results in index order. Output is therefore identical for
//! any thread count and for sequential execution.

mod mse;
mod smallball;

pub use mse::{
    build_source, mse_component_analytic, mse_monte_carlo, rate_experiment, MseReport, RateReport, RateRow,
    RateSettings, SourceCondition,
};
pub use smallball::{
    amf_search, amf_search_with, ball_ratios_with, posterior_ball_ratio, prior_ball_prob, AmfReport, BallProbability,
    BallQuery, BallRatio, BallStats, CandidateLayout, CandidateStrategy, McBudget, Potential, MAX_SMALLBALL_DIM,
    MIN_SAMPLES, SAMPLE_BLOCK,
};
