//! The VI map `F`, KKT residuals, aggregate excess demand and the VI gap.
//!
//! `F_nk(x) = B_n dU_n/dx_nk / sum_k' dU_n/dx_nk' x_nk'` is the buyer's
//! marginal utility normalized so that `sum_k F_nk(x) x_nk = B_n`. A feasible
//! `x*` solves `VI(C, F)` when `<F(x*), y - x*> <= 0` for every `y` in the
//! capacity set `C = {y >= 0 : sum_n y_nk <= 1}`, and that allocation is the
//! competitive-equilibrium allocation.

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, NkMatrix, PriceVector};

/// Smallest admissible value of `sum_k dU_n/dx_nk x_nk`.
pub const DENOM_FLOOR: f64 = 1e-12;

/// Allocations above this count as "held" for complementarity and price recovery.
pub const ACTIVE_TOL: f64 = 1e-7;

/// Normalizes one buyer's utility gradient into a row of `F`.
pub fn normalize_gradient(buyer: usize, budget: f64, grad: &[f64], x_n: &[f64]) -> Result<Vec<f64>> {
    let denom: f64 = grad.iter().zip(x_n).map(|(g, x)| g * x).sum();
    if !(denom > DENOM_FLOOR) {
        return Err(MarketError::SingularDenominator { buyer, value: denom });
    }
    Ok(grad.iter().map(|g| budget * g / denom).collect())
}

/// Evaluates `F(x)`.
///
/// Rows of buyers with fractional-power utilities are evaluated at `max(x, X_FLOOR)`.
pub fn vi_map(market: &MarketInstance, x: &AllocationMatrix) -> Result<NkMatrix> {
    let xc = market.clamp_to_domain(x);
    let mut out = NkMatrix::zeros(market.n_buyers(), market.n_goods());
    for n in 0..market.n_buyers() {
        let grad = market.utility_gradient(n, &xc)?;
        let row = normalize_gradient(n, market.budget(n), &grad, xc.row(n))?;
        out.row_mut(n).copy_from_slice(&row);
    }
    Ok(out)
}

/// `<F(x) - F(x'), x - x'>`; nonpositive for a monotone (decreasing) `F`.
pub fn monotonicity_product(market: &MarketInstance, x: &AllocationMatrix, x2: &AllocationMatrix) -> Result<f64> {
    let f1 = vi_map(market, x)?;
    let f2 = vi_map(market, x2)?;
    Ok(f1.sub(&f2).dot(&x.sub(x2)))
}

/// Residuals of the combined KKT system at `(x, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `max |F - p + gamma|` together with `gamma_nk x_nk` complementarity.
    pub stationarity_residual: f64,
    /// `max_k |p_k (sum_n x_nk - 1)|`.
    pub complementarity_residual: f64,
    /// `max_k max(0, sum_n x_nk - 1)`.
    pub feasibility_residual: f64,
    /// Recovered multipliers `gamma_nk = max(0, p_k - F_nk)`.
    pub multipliers_gamma: NkMatrix,
    pub total: f64,
}

impl KktReport {
    pub fn is_certified(&self, tol: f64) -> bool {
        self.total <= tol
    }
}

/// KKT residual of a candidate competitive equilibrium.
///
/// `gamma` is recovered from stationarity plus dual feasibility, so
/// `F - p + gamma = max(0, F - p)`. That term is checked on every entry, the
/// complementarity `gamma_nk x_nk = 0` as `min(x, |gamma x|)`.
pub fn kkt_residual(market: &MarketInstance, x: &AllocationMatrix, p: &PriceVector) -> Result<KktReport> {
    if p.len() != market.n_goods() {
        return Err(MarketError::Domain(format!(
            "price vector has {} entries, market has {} goods",
            p.len(),
            market.n_goods()
        )));
    }
    let f = vi_map(market, x)?;
    let gamma = NkMatrix::from_fn(market.n_buyers(), market.n_goods(), |n, k| (p[k] - f[(n, k)]).max(0.0));
    let mut stationarity: f64 = 0.0;
    for n in 0..market.n_buyers() {
        for k in 0..market.n_goods() {
            let g = gamma[(n, k)];
            let xnk = x[(n, k)];
            stationarity = stationarity
                .max((f[(n, k)] - p[k] + g).abs())
                .max(xnk.min((g * xnk).abs()));
        }
    }
    let sums = x.column_sums();
    let complementarity = sums
        .iter()
        .enumerate()
        .map(|(k, s)| (p[k] * (s - 1.0)).abs())
        .fold(0.0, f64::max);
    let feasibility = sums.iter().map(|s| (s - 1.0).max(0.0)).fold(0.0, f64::max);
    Ok(KktReport {
        stationarity_residual: stationarity,
        complementarity_residual: complementarity,
        feasibility_residual: feasibility,
        multipliers_gamma: gamma,
        total: stationarity.max(complementarity).max(feasibility),
    })
}

/// Computes the Nash equilibrium of the fixed-price game `G(p)`.
///
/// Implementations must be reentrant; `excess_demand` may call them from
/// several threads on distinct prices.
pub trait FixedPriceSolver {
    fn solve(&self, market: &MarketInstance, p: &PriceVector) -> Result<AllocationMatrix>;
}

/// Demand at fixed prices together with the excess demand `z(p)`.
#[derive(Debug, Clone)]
pub struct ExcessDemand {
    pub demand: AllocationMatrix,
    pub z: Vec<f64>,
}

/// `z_k(p) = sum_n x*_nk(p) - 1` where `x*(p)` solves `G(p)`.
pub fn excess_demand(market: &MarketInstance, p: &PriceVector, inner: &impl FixedPriceSolver) -> Result<ExcessDemand> {
    if p.len() != market.n_goods() || p.as_slice().iter().any(|&v| !(v > 0.0)) {
        return Err(MarketError::Domain("excess demand needs strictly positive prices".into()));
    }
    let demand = inner.solve(market, p)?;
    let z = demand.column_sums().into_iter().map(|s| s - 1.0).collect();
    Ok(ExcessDemand { demand, z })
}

/// `max_{y in C} <F(x), y - x>`.
///
/// `C` is a product of per-good capped simplices, so the maximizer gives all of
/// good `k` to the buyer with the largest positive `F_nk` (or nobody).
pub fn vi_gap(market: &MarketInstance, x: &AllocationMatrix) -> Result<f64> {
    let f = vi_map(market, x)?;
    let best: f64 = (0..market.n_goods())
        .map(|k| (0..market.n_buyers()).map(|n| f[(n, k)]).fold(0.0, f64::max))
        .sum();
    Ok((best - f.dot(x)).max(0.0))
}
