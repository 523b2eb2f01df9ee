//! Nash equilibrium of the fixed-price game `G(p)`.
//!
//! With prices fixed each buyer maximizes its utility over the budget set
//! `{x >= 0 : sum_k p_k x_k = B_n}`. Optimality is `F_nk = p_k` on goods the
//! buyer holds and `F_nk <= p_k` elsewhere. The solver iterates the
//! proportional-response map `x_nk <- x_nk F_nk(x) / p_k`: new spending on a
//! good is the buyer's current value share of it. Since `sum_k F_nk x_nk = B_n`
//! the budget is spent exactly after every update, iterates stay nonnegative,
//! and the fixed points with positive entries are exactly the optimality conditions.

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, PriceVector};
use crate::vi::{kkt_residual, vi_map, FixedPriceSolver};

use super::SolverConfig;

/// Proportional-response iteration on the fixed-price game.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerNeSolver {
    pub max_iters: usize,
    /// Stops once the joint iterate change is at most `tolerance` and the
    /// best-response residual at most `10 * tolerance`.
    pub tolerance: f64,
}

impl InnerNeSolver {
    pub fn new(max_iters: usize, tolerance: f64) -> Self {
        Self { max_iters, tolerance }
    }

    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self::new(cfg.max_iters, cfg.epsilon)
    }
}

/// Stationarity of the fixed-price best responses.
fn best_response_residual(market: &MarketInstance, x: &AllocationMatrix, p: &PriceVector) -> Result<f64> {
    Ok(kkt_residual(market, x, p)?.stationarity_residual)
}

impl FixedPriceSolver for InnerNeSolver {
    fn solve(&self, market: &MarketInstance, prices: &PriceVector) -> Result<AllocationMatrix> {
        let p = prices.as_slice();
        if p.len() != market.n_goods() || p.iter().any(|&v| !(v > 0.0)) {
            return Err(MarketError::Domain("fixed-price game needs strictly positive prices".into()));
        }
        let (n_buyers, n_goods) = (market.n_buyers(), market.n_goods());
        let mut x = AllocationMatrix::from_fn(n_buyers, n_goods, |n, k| market.budget(n) / (n_goods as f64 * p[k]));
        let mut residual = f64::INFINITY;

        for _ in 0..self.max_iters {
            let f = vi_map(market, &x)?;
            let next = AllocationMatrix::from_fn(n_buyers, n_goods, |n, k| x[(n, k)] * f[(n, k)] / p[k]);
            let change = next.l2_distance(&x);
            x = next;
            if change <= self.tolerance {
                residual = best_response_residual(market, &x, prices)?;
                if residual <= 10.0 * self.tolerance {
                    return Ok(x);
                }
            }
        }
        if residual.is_infinite() {
            residual = best_response_residual(market, &x, prices)?;
        }
        Err(MarketError::InnerSolverDiverged {
            iterations: self.max_iters,
            residual,
        })
    }
}

/// Fixed-price equilibrium with the tolerance and iteration cap of `cfg`.
pub fn solve_inner_ne(market: &MarketInstance, p: &PriceVector, cfg: &SolverConfig) -> Result<AllocationMatrix> {
    InnerNeSolver::from_config(cfg).solve(market, p)
}
