use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, BidMatrix, MarketInstance, NkMatrix, PriceVector};
use crate::vi::vi_map;

use super::{drive, step_size, LearningDynamics, SolverConfig, SolverOutcome};

/// Trading-post bid dynamics.
///
/// Bids follow `b_nk <- b_nk + alpha_t b_nk (F_nk(x) - p_k)` (floored at
/// `bid_floor`), prices are column sums of the bids and allocations are bid
/// shares, so every good is exactly allocated at every iteration.
#[derive(Debug, Clone)]
pub struct TradingPost<'m> {
    market: &'m MarketInstance,
    cfg: SolverConfig,
    bids: BidMatrix,
    p: Vec<f64>,
    x: AllocationMatrix,
    t: usize,
}

impl<'m> TradingPost<'m> {
    /// Starts from bids `B_n / K`, i.e. every buyer splits its budget evenly.
    pub fn new(market: &'m MarketInstance, cfg: &SolverConfig) -> Result<Self> {
        let k = market.n_goods() as f64;
        let bids = BidMatrix::from_fn(market.n_buyers(), market.n_goods(), |n, _| market.budget(n) / k);
        Self::with_initial_bids(market, cfg, bids)
    }

    pub fn with_initial_bids(market: &'m MarketInstance, cfg: &SolverConfig, bids: BidMatrix) -> Result<Self> {
        cfg.validate()?;
        if bids.shape() != (market.n_buyers(), market.n_goods()) {
            return Err(MarketError::Domain("bid matrix shape does not match the market".into()));
        }
        if bids.as_slice().iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(MarketError::Domain("initial bids must be positive".into()));
        }
        let (p, x) = clear(&bids);
        Ok(Self {
            market,
            cfg: cfg.clone(),
            bids,
            p,
            x,
            t: 0,
        })
    }

    pub fn bids(&self) -> &BidMatrix {
        &self.bids
    }

    pub fn run(self) -> Result<SolverOutcome> {
        self.run_tracking(None)
    }

    /// Runs while recording the Lyapunov value against `reference`.
    pub fn run_tracking(self, reference: Option<&AllocationMatrix>) -> Result<SolverOutcome> {
        let market = self.market;
        let cfg = self.cfg.clone();
        drive(self, market, &cfg, reference)
    }
}

/// Prices as bid sums and allocations as bid shares.
fn clear(bids: &BidMatrix) -> (Vec<f64>, AllocationMatrix) {
    let p = bids.column_sums();
    let x = AllocationMatrix::from_fn(bids.n_buyers(), bids.n_goods(), |n, k| bids[(n, k)] / p[k]);
    (p, x)
}

impl LearningDynamics for TradingPost<'_> {
    fn step(&mut self) -> Result<f64> {
        let alpha = step_size(self.t, self.cfg.alpha_exponent);
        let f = vi_map(self.market, &self.x)?;
        let floor = self.cfg.bid_floor;
        let p = &self.p;
        let bids = &self.bids;
        let next = BidMatrix::from_fn(bids.n_buyers(), bids.n_goods(), |n, k| {
            let b = bids[(n, k)];
            (b + alpha * b * (f[(n, k)] - p[k])).max(floor)
        });
        let (p_next, x_next) = clear(&next);
        let change = p_next
            .iter()
            .zip(&self.p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.bids = next;
        self.p = p_next;
        self.x = x_next;
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

/// Runs [`TradingPost`] from its default bids.
pub fn solve_trading_post(market: &MarketInstance, cfg: &SolverConfig) -> Result<SolverOutcome> {
    TradingPost::new(market, cfg)?.run()
}

/// Continuous-time limit of the bid dynamics in allocation space:
/// `dx_nk/ds = x_nk (F_nk(x) - sum_m F_mk(x) x_mk)`.
pub fn replicator_field(market: &MarketInstance, x: &AllocationMatrix) -> Result<NkMatrix> {
    let f = vi_map(market, x)?;
    let (n_buyers, n_goods) = x.shape();
    let mean: Vec<f64> = (0..n_goods)
        .map(|k| (0..n_buyers).map(|m| f[(m, k)] * x[(m, k)]).sum())
        .collect();
    Ok(NkMatrix::from_fn(n_buyers, n_goods, |n, k| x[(n, k)] * (f[(n, k)] - mean[k])))
}
