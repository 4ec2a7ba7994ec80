//! Quantitative ensemble tests for the supporting results, with standard
//! errors, p-values, and deterministic pass/fail verdicts.

pub mod accum;
pub mod checks;
pub mod gof;
pub mod quad;
pub mod rate;

pub use checks::{
    block_law_check, coupling_identity_check, covariance_test, decomposition_trend_check,
    fourth_moment_check, gamma_law_check, grid_consistency_check, independence_family_test,
    kolmogorov_bound_check, lemma31_check, lemma32a_check, normality_test, rho_tau_check,
    sigma_moment_check, simulate_transport_ensemble, TransportEnsemble,
};
pub use rate::{default_grid_step, rate_experiment};
