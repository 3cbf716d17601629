//! Numerical laboratory for a communication game in which a biased sender
//! reveals one truthful anecdote to a Bayesian receiver.
//!
//! The crate simulates targeting schemes, estimates their bias and losses by
//! Monte Carlo, solves the translation-invariant equilibrium condition
//! `H(r) = −Δ`, scans commitment-optimal schemes and evaluates the closed-form
//! results for uniform, Laplace and Gaussian noise.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod estimate;
pub mod game;
pub mod noise;
pub mod quadrature;
pub mod report;
pub mod stream;

pub use analysis::{
    asymptotic_commit_loss, closest_of_n_variance, commitment_scan, expert_compare,
    extreme_value_params, three_uniform_targeted_loss, three_uniform_unbiased_loss,
    CommitmentResult, ComparisonResult, ExtremeValueStats, Preference,
};
pub use equilibrium::{
    equilibrium_scan, scan_h, solve_equilibrium, BiasCurve, EquilibriumResult, SolverParams,
};
pub use error::{Error, Result};
pub use estimate::{
    estimate_anecdote_variance, estimate_bias, estimate_h, estimate_receiver_loss,
    estimate_sender_loss, Estimate, LossBreakdown,
};
pub use game::{
    best_response_shift, draw_round, quadratic_utility, receiver_action, select_anecdote,
    ActionRule, GameConfig, RoundDraw, TargetingScheme,
};
pub use noise::{posterior_mean, NoiseDistribution, PosteriorMode};
pub use stream::{McParams, RandomStream};
