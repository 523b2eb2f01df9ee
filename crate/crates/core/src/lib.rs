//! Competitive equilibria of generalized Fisher markets.
//!
//! Buyers' utilities may depend on what other buyers receive (Tullock contest
//! utilities), so the equilibrium is computed as the solution of a variational
//! inequality over the feasible allocations
//! `C = {x >= 0 : sum_n x_nk <= 1}` with map
//! `F_nk(x) = B_n dU_n/dx_nk / sum_k' x_nk' dU_n/dx_nk'`.
//!
//! The crate provides the market model ([`market`]), the VI machinery
//! ([`vi`]), two decentralized learning dynamics ([`solvers`]), a pointwise
//! strict-monotonicity certificate ([`stability`]) and independent reference
//! solutions ([`oracles`]).

// Comparisons are written as `!(v > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod market;
pub mod oracles;
pub mod solvers;
pub mod stability;
pub mod vi;

pub use error::{MarketError, Result};
pub use market::{
    random_instance, random_instance_with, AllocationMatrix, BidMatrix, BudgetDraw, MarketInstance, NkMatrix,
    PriceVector, UtilityFamily, UtilityModel, X_FLOOR,
};
pub use oracles::{brute_force_ve, closed_form_cobb_douglas, solve_eg, OracleMethod, OracleResult};
pub use solvers::{solve_inner_ne, solve_tatonnement, solve_trading_post, SolverConfig, SolverOutcome, SolverTrace};
pub use stability::{assemble_h, certify_monotone, sample_certificate, MonotonicityCertificate, Verdict};
pub use vi::{excess_demand, kkt_residual, vi_gap, vi_map, KktReport};
