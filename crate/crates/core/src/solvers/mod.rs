//! Decentralized learning dynamics and their building blocks.
//!
//! * [`Tatonnement`]: buyers take fast projected steps along `F(x) - p` while
//!   the auctioneer moves prices along excess demand on a slower schedule.
//! * [`TradingPost`]: buyers rescale bids multiplicatively by `F(x) - p`; prices
//!   are bid sums and allocations bid shares.
//! * [`InnerNeSolver`]: equilibrium of the fixed-price game, used to evaluate
//!   aggregate excess demand.

mod inner;
mod lyapunov;
mod projection;
mod schedule;
mod tatonnement;
mod trading_post;

pub use inner::{solve_inner_ne, InnerNeSolver};
pub use lyapunov::lyapunov_kl;
pub use projection::{project_budget, project_capped_simplex, project_scaled_simplex, project_simplex};
pub use schedule::step_size;
pub use tatonnement::{solve_tatonnement, Tatonnement};
pub use trading_post::{replicator_field, solve_trading_post, TradingPost};

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, PriceVector};
use crate::vi::kkt_residual;

/// Tuning shared by every iterative solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stopping tolerance on the iterate change.
    pub epsilon: f64,
    pub alpha_exponent: f64,
    pub beta_exponent: f64,
    pub bid_floor: f64,
    pub record_every: usize,
    /// KKT residual required before a run counts as converged.
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            epsilon: 1e-6,
            alpha_exponent: 0.6,
            beta_exponent: 0.9,
            bid_floor: 1e-9,
            record_every: 10,
            kkt_tol: 1e-5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MarketError::InvalidConfig(msg));
        for (name, e) in [("alpha_exponent", self.alpha_exponent), ("beta_exponent", self.beta_exponent)] {
            if !(e > 0.5 && e <= 1.0) {
                return bad(format!("{name} = {e} must lie in (0.5, 1]"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.kkt_tol > 0.0) {
            return bad("kkt_tol must be positive".into());
        }
        if !(self.bid_floor > 0.0) {
            return bad("bid_floor must be positive".into());
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return bad("max_iters and record_every must be at least 1".into());
        }
        Ok(())
    }

    /// Extra ordering required by the two-timescale scheme: prices must move
    /// on the slower schedule, `beta_t / alpha_t -> 0`.
    pub fn validate_two_timescale(&self) -> Result<()> {
        self.validate()?;
        if self.beta_exponent <= self.alpha_exponent {
            return Err(MarketError::InvalidConfig(format!(
                "beta_exponent ({}) must exceed alpha_exponent ({})",
                self.beta_exponent, self.alpha_exponent
            )));
        }
        Ok(())
    }
}

/// Quantities recorded every `record_every` iterations (plus the start).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub iterations: usize,
    pub price_history: Vec<(usize, Vec<f64>)>,
    /// `||x(t) - x(t-1)||_2` for tatonnement, `||p(t) - p(t-1)||_2` for the
    /// trading post. NaN at `t = 0`.
    pub change_norms: Vec<(usize, f64)>,
    pub kkt_history: Vec<(usize, f64)>,
    /// Lyapunov value against a reference allocation, when one was supplied.
    pub lyapunov_history: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Final iterate of a run together with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub allocation: AllocationMatrix,
    pub prices: PriceVector,
    pub trace: SolverTrace,
}

/// One iteration at a time access to a learning dynamic.
pub trait LearningDynamics {
    /// Advances one iteration and returns the change norm used for stopping.
    fn step(&mut self) -> Result<f64>;
    fn iteration(&self) -> usize;
    fn allocation(&self) -> &AllocationMatrix;
    fn prices(&self) -> PriceVector;
}

/// Runs `dynamics` to convergence, recording the trace.
///
/// Stopping is tested at recorded iterations only: the change norm must be at
/// most `epsilon` and the KKT residual at most `kkt_tol`.
pub(crate) fn drive<D: LearningDynamics>(
    mut dynamics: D,
    market: &MarketInstance,
    cfg: &SolverConfig,
    reference: Option<&AllocationMatrix>,
) -> Result<SolverOutcome> {
    let mut trace = SolverTrace::default();
    let record = |trace: &mut SolverTrace, d: &D, change: f64| -> Result<f64> {
        let t = d.iteration();
        let prices = d.prices();
        let kkt = kkt_residual(market, d.allocation(), &prices)?.total;
        trace.price_history.push((t, prices.into_vec()));
        trace.change_norms.push((t, change));
        trace.kkt_history.push((t, kkt));
        if let Some(x_star) = reference {
            trace.lyapunov_history.push((t, lyapunov_kl(d.allocation(), x_star)?));
        }
        Ok(kkt)
    };

    record(&mut trace, &dynamics, f64::NAN)?;
    while dynamics.iteration() < cfg.max_iters {
        let change = dynamics.step()?;
        if dynamics.iteration().is_multiple_of(cfg.record_every) {
            let kkt = record(&mut trace, &dynamics, change)?;
            if change <= cfg.epsilon && kkt <= cfg.kkt_tol {
                trace.converged = true;
                break;
            }
        }
    }
    trace.iterations = dynamics.iteration();
    let outcome = SolverOutcome {
        allocation: dynamics.allocation().clone(),
        prices: dynamics.prices(),
        trace,
    };
    if outcome.trace.converged {
        Ok(outcome)
    } else {
        Err(MarketError::MaxItersExceeded(Box::new(outcome)))
    }
}
