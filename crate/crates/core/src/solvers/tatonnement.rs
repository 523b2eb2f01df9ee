use crate::error::Result;
use crate::market::{AllocationMatrix, MarketInstance, PriceVector, X_FLOOR};
use crate::vi::vi_map;

use super::{drive, project_simplex, step_size, LearningDynamics, SolverConfig, SolverOutcome};

/// Two-timescale tatonnement.
///
/// Each iteration every buyer plays `x_nk <- clamp(x_nk + alpha_t (F_nk(x) - p_k))`
/// and the auctioneer, observing the new demands, sets
/// `p <- Pi_simplex(p + beta_t z)` with `z_k = sum_n x_nk - 1`.
///
/// Demands are clamped to `[X_FLOOR, 1]`: the lower end keeps `F` finite,
/// the upper end is the largest quantity any buyer can hold in `C`.
#[derive(Debug, Clone)]
pub struct Tatonnement<'m> {
    market: &'m MarketInstance,
    cfg: SolverConfig,
    x: AllocationMatrix,
    p: Vec<f64>,
    t: usize,
}

impl<'m> Tatonnement<'m> {
    /// Starts from uniform prices and the budget-feasible even split `x_nk = B_n / (K p_k)`.
    pub fn new(market: &'m MarketInstance, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate_two_timescale()?;
        let k = market.n_goods();
        let p = vec![1.0 / k as f64; k];
        let x = AllocationMatrix::from_fn(market.n_buyers(), k, |n, j| {
            (market.budget(n) / (k as f64 * p[j])).clamp(X_FLOOR, 1.0)
        });
        Ok(Self {
            market,
            cfg: cfg.clone(),
            x,
            p,
            t: 0,
        })
    }

    pub fn run(self) -> Result<SolverOutcome> {
        let market = self.market;
        let cfg = self.cfg.clone();
        drive(self, market, &cfg, None)
    }
}

impl LearningDynamics for Tatonnement<'_> {
    fn step(&mut self) -> Result<f64> {
        let alpha = step_size(self.t, self.cfg.alpha_exponent);
        let beta = step_size(self.t, self.cfg.beta_exponent);
        let f = vi_map(self.market, &self.x)?;
        let (n_buyers, n_goods) = self.x.shape();
        let mut next = self.x.clone();
        for n in 0..n_buyers {
            for k in 0..n_goods {
                next[(n, k)] = (self.x[(n, k)] + alpha * (f[(n, k)] - self.p[k])).clamp(X_FLOOR, 1.0);
            }
        }
        let moved: Vec<f64> = next
            .column_sums()
            .iter()
            .zip(&self.p)
            .map(|(s, p)| p + beta * (s - 1.0))
            .collect();
        self.p = project_simplex(&moved).into_vec();
        let change = next.l2_distance(&self.x);
        self.x = next;
        self.t += 1;
        Ok(change)
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn allocation(&self) -> &AllocationMatrix {
        &self.x
    }

    fn prices(&self) -> PriceVector {
        PriceVector::from_vec_unchecked(self.p.clone())
    }
}

/// Runs [`Tatonnement`] from its default starting point.
pub fn solve_tatonnement(market: &MarketInstance, cfg: &SolverConfig) -> Result<SolverOutcome> {
    Tatonnement::new(market, cfg)?.run()
}
