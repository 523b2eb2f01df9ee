//! Market instances, utility models and the N×K containers shared by every
//! other module.
//!
//! A market has `N` buyers and `K` goods, each good in unit supply. Buyer
//! budgets sum to one, so equilibrium prices live on the unit simplex.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MarketError, Result};

/// Lower clamp applied to allocations before evaluating gradients of
/// utilities with fractional powers (`x^(rho-1)` is unbounded at zero).
pub const X_FLOOR: f64 = 1e-9;

/// Tolerance on `sum_n B_n = 1`.
pub const BUDGET_SUM_TOL: f64 = 1e-12;

/// Tolerance on row normalizations such as `sum_k a_nk = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Row-major `N x K` matrix indexed by `(buyer, good)`.
///
/// Used for allocations, bids and values of the VI map alike.
#[derive(Debug, Clone, PartialEq)]
pub struct NkMatrix {
    n_buyers: usize,
    n_goods: usize,
    data: Vec<f64>,
}

/// Demands `x_nk` (units of good `k` held by buyer `n`).
pub type AllocationMatrix = NkMatrix;

/// Trading-post bids `b_nk` (currency buyer `n` places on good `k`).
pub type BidMatrix = NkMatrix;

impl NkMatrix {
    pub fn filled(n_buyers: usize, n_goods: usize, value: f64) -> Self {
        Self {
            n_buyers,
            n_goods,
            data: vec![value; n_buyers * n_goods],
        }
    }

    pub fn zeros(n_buyers: usize, n_goods: usize) -> Self {
        Self::filled(n_buyers, n_goods, 0.0)
    }

    pub fn from_fn(n_buyers: usize, n_goods: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_buyers * n_goods);
        for n in 0..n_buyers {
            for k in 0..n_goods {
                data.push(f(n, k));
            }
        }
        Self {
            n_buyers,
            n_goods,
            data,
        }
    }

    /// Builds a matrix from rows; rows must be non-empty, equally long and finite.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_buyers = rows.len();
        let n_goods = rows.first().map_or(0, Vec::len);
        if n_buyers == 0 || n_goods == 0 {
            return Err(MarketError::InvariantViolation("matrix must be at least 1x1".into()));
        }
        if rows.iter().any(|r| r.len() != n_goods) {
            return Err(MarketError::InvariantViolation("ragged matrix rows".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MarketError::InvariantViolation("matrix entries must be finite".into()));
        }
        Ok(Self {
            n_buyers,
            n_goods,
            data,
        })
    }

    /// Like [`NkMatrix::from_rows`] but additionally rejects negative entries.
    pub fn allocation(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::from_rows(rows)?;
        if !m.is_nonnegative() {
            return Err(MarketError::InvariantViolation("allocations must be nonnegative".into()));
        }
        Ok(m)
    }

    pub fn n_buyers(&self) -> usize {
        self.n_buyers
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_buyers, self.n_goods)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_goods..(n + 1) * self.n_goods]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.n_goods..(n + 1) * self.n_goods]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_goods)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.n_buyers).map(|n| self[(n, k)]).sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_goods).map(|k| self.column_sum(k)).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// Membership in the capacity set: nonnegative with every column sum at most `1 + tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.is_nonnegative() && self.column_sums().iter().all(|&s| s <= 1.0 + tol)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_buyers: self.n_buyers,
            n_goods: self.n_goods,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        Self {
            n_buyers: self.n_buyers,
            n_goods: self.n_goods,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Index<(usize, usize)> for NkMatrix {
    type Output = f64;

    fn index(&self, (n, k): (usize, usize)) -> &f64 {
        debug_assert!(n < self.n_buyers && k < self.n_goods);
        &self.data[n * self.n_goods + k]
    }
}

impl IndexMut<(usize, usize)> for NkMatrix {
    fn index_mut(&mut self, (n, k): (usize, usize)) -> &mut f64 {
        debug_assert!(n < self.n_buyers && k < self.n_goods);
        &mut self.data[n * self.n_goods + k]
    }
}

/// Nonnegative price per good.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(MarketError::InvariantViolation("price vector is empty".into()));
        }
        if prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(MarketError::InvariantViolation(
                "prices must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(prices))
    }

    pub fn uniform(n_goods: usize) -> Self {
        Self(vec![1.0 / n_goods as f64; n_goods])
    }

    pub(crate) fn from_vec_unchecked(prices: Vec<f64>) -> Self {
        Self(prices)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn in_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| p >= -tol) && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for PriceVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UtilityFamily {
    Tullock,
    CobbDouglas,
    Linear,
}

impl UtilityFamily {
    pub fn name(self) -> &'static str {
        match self {
            UtilityFamily::Tullock => "tullock",
            UtilityFamily::CobbDouglas => "cobb_douglas",
            UtilityFamily::Linear => "linear",
        }
    }

    /// Continuous, concave and homogeneous of degree one in the buyer's own bundle.
    pub fn is_cch(self) -> bool {
        matches!(self, UtilityFamily::CobbDouglas | UtilityFamily::Linear)
    }
}

impl fmt::Display for UtilityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for UtilityFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tullock" => Ok(UtilityFamily::Tullock),
            "cobb_douglas" | "cobb-douglas" | "cd" => Ok(UtilityFamily::CobbDouglas),
            "linear" => Ok(UtilityFamily::Linear),
            other => Err(format!("unknown utility family `{other}`")),
        }
    }
}

/// Per-buyer utility model.
///
/// * `Tullock`: multi-resource contest success function
///   `U_n = q_n / sum_m q_m` with effort `q_n = sum_k a_nk x_nk^rho_nk`.
///   Depends on every buyer's allocation.
/// * `CobbDouglas`: `U_n = prod_k x_nk^a_nk` with `sum_k a_nk = 1`.
/// * `Linear`: `U_n = sum_k v_nk x_nk`.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityModel {
    Tullock { a: Vec<f64>, rho: Vec<f64> },
    CobbDouglas { a: Vec<f64> },
    Linear { v: Vec<f64> },
}

impl UtilityModel {
    pub fn family(&self) -> UtilityFamily {
        match self {
            UtilityModel::Tullock { .. } => UtilityFamily::Tullock,
            UtilityModel::CobbDouglas { .. } => UtilityFamily::CobbDouglas,
            UtilityModel::Linear { .. } => UtilityFamily::Linear,
        }
    }

    pub fn n_goods(&self) -> usize {
        match self {
            UtilityModel::Tullock { a, .. } | UtilityModel::CobbDouglas { a } => a.len(),
            UtilityModel::Linear { v } => v.len(),
        }
    }

    /// Whether the gradient contains `x^(power < 1)` terms and so needs `x >= X_FLOOR`.
    pub fn has_fractional_power(&self) -> bool {
        !matches!(self, UtilityModel::Linear { .. })
    }

    fn validate(&self, buyer: usize, n_goods: usize) -> Result<()> {
        let bad = |msg: String| Err(MarketError::InvariantViolation(format!("buyer {buyer}: {msg}")));
        if self.n_goods() != n_goods {
            return bad(format!("expected {n_goods} parameters per vector, got {}", self.n_goods()));
        }
        let check_weights = |a: &[f64]| -> Result<()> {
            if a.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
                return bad("weights a must lie in (0, 1]".into());
            }
            let sum: f64 = a.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return bad(format!("weights a sum to {sum}, expected 1"));
            }
            Ok(())
        };
        match self {
            UtilityModel::Tullock { a, rho } => {
                if rho.len() != n_goods {
                    return bad("rho length differs from a".into());
                }
                check_weights(a)?;
                if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                    return bad("rho must lie strictly inside (0, 1)".into());
                }
            }
            UtilityModel::CobbDouglas { a } => check_weights(a)?,
            UtilityModel::Linear { v } => {
                if v.iter().any(|&w| !w.is_finite() || w < 0.0) {
                    return bad("linear values must be finite and nonnegative".into());
                }
                if !v.iter().any(|&w| w > 0.0) {
                    return bad("linear values need at least one positive entry".into());
                }
            }
        }
        Ok(())
    }
}

/// Tullock effort `q(x) = sum_k a_k x_k^rho_k`.
fn tullock_effort(a: &[f64], rho: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(rho)
        .zip(x)
        .map(|((&a, &r), &x)| a * x.powf(r))
        .sum()
}

/// Immutable market: budgets plus one utility model per buyer.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    n_goods: usize,
    budgets: Vec<f64>,
    utilities: Vec<UtilityModel>,
}

impl MarketInstance {
    pub fn new(budgets: Vec<f64>, utilities: Vec<UtilityModel>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(MarketError::InvariantViolation("market needs at least one buyer".into()));
        }
        if budgets.len() != utilities.len() {
            return Err(MarketError::InvariantViolation(format!(
                "{} budgets for {} utility models",
                budgets.len(),
                utilities.len()
            )));
        }
        if budgets.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(MarketError::InvariantViolation("budgets must be positive".into()));
        }
        let total: f64 = budgets.iter().sum();
        if (total - 1.0).abs() > BUDGET_SUM_TOL {
            return Err(MarketError::InvariantViolation(format!(
                "budgets sum to {total}, expected 1"
            )));
        }
        let n_goods = utilities[0].n_goods();
        if n_goods == 0 {
            return Err(MarketError::InvariantViolation("market needs at least one good".into()));
        }
        for (n, u) in utilities.iter().enumerate() {
            u.validate(n, n_goods)?;
        }
        Ok(Self {
            n_goods,
            budgets,
            utilities,
        })
    }

    pub fn n_buyers(&self) -> usize {
        self.budgets.len()
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn budget(&self, n: usize) -> f64 {
        self.budgets[n]
    }

    pub fn utilities(&self) -> &[UtilityModel] {
        &self.utilities
    }

    pub fn utility(&self, n: usize) -> &UtilityModel {
        &self.utilities[n]
    }

    /// The common family when every buyer shares one, else `None`.
    pub fn family(&self) -> Option<UtilityFamily> {
        let first = self.utilities[0].family();
        self.utilities
            .iter()
            .all(|u| u.family() == first)
            .then_some(first)
    }

    /// Every buyer is CCH in its own bundle and ignores the others.
    pub fn is_cch(&self) -> bool {
        self.utilities.iter().all(|u| u.family().is_cch())
    }

    fn check_shape(&self, x: &AllocationMatrix) -> Result<()> {
        if x.shape() != (self.n_buyers(), self.n_goods) {
            return Err(MarketError::Domain(format!(
                "allocation is {:?}, market is {}x{}",
                x.shape(),
                self.n_buyers(),
                self.n_goods
            )));
        }
        Ok(())
    }

    fn tullock_total_effort(&self, x: &AllocationMatrix) -> f64 {
        self.utilities
            .iter()
            .enumerate()
            .map(|(m, u)| match u {
                UtilityModel::Tullock { a, rho } => tullock_effort(a, rho, x.row(m)),
                // Non-Tullock buyers exert no effort in the contest.
                _ => 0.0,
            })
            .sum()
    }

    /// `U_n(x_n, x_-n)`.
    pub fn utility_value(&self, n: usize, x: &AllocationMatrix) -> Result<f64> {
        self.check_shape(x)?;
        let xn = x.row(n);
        match &self.utilities[n] {
            UtilityModel::Tullock { a, rho } => {
                let total = self.tullock_total_effort(x);
                if total <= 0.0 {
                    return Err(MarketError::DegenerateMarket);
                }
                Ok(tullock_effort(a, rho, xn) / total)
            }
            UtilityModel::CobbDouglas { a } => {
                Ok(a.iter().zip(xn).map(|(&a, &x)| x.powf(a)).product())
            }
            UtilityModel::Linear { v } => Ok(v.iter().zip(xn).map(|(v, x)| v * x).sum()),
        }
    }

    /// `(dU_n / dx_nk)_k`. Fractional-power families require `x_nk >= X_FLOOR`.
    pub fn utility_gradient(&self, n: usize, x: &AllocationMatrix) -> Result<Vec<f64>> {
        self.check_shape(x)?;
        let xn = x.row(n);
        let model = &self.utilities[n];
        if model.has_fractional_power() {
            if let Some(k) = xn.iter().position(|&v| v < X_FLOOR) {
                return Err(MarketError::Domain(format!(
                    "x[{n}][{k}] = {:e} is below the floor {X_FLOOR:e}",
                    xn[k]
                )));
            }
        }
        match model {
            UtilityModel::Tullock { a, rho } => {
                let total = self.tullock_total_effort(x);
                if total <= 0.0 {
                    return Err(MarketError::DegenerateMarket);
                }
                let own = tullock_effort(a, rho, xn);
                let scale = (total - own) / (total * total);
                Ok(a.iter()
                    .zip(rho)
                    .zip(xn)
                    .map(|((&a, &r), &x)| a * r * x.powf(r - 1.0) * scale)
                    .collect())
            }
            UtilityModel::CobbDouglas { a } => {
                let u: f64 = a.iter().zip(xn).map(|(&a, &x)| x.powf(a)).product();
                Ok(a.iter().zip(xn).map(|(&a, &x)| a * u / x).collect())
            }
            UtilityModel::Linear { v } => Ok(v.clone()),
        }
    }

    /// Copy of `x` where rows of fractional-power buyers are clamped to `X_FLOOR`.
    pub fn clamp_to_domain(&self, x: &AllocationMatrix) -> AllocationMatrix {
        let mut out = x.clone();
        for n in 0..self.n_buyers() {
            if self.utilities[n].has_fractional_power() {
                for v in out.row_mut(n) {
                    *v = v.max(X_FLOOR);
                }
            }
        }
        out
    }
}

/// How generated instances assign budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetDraw {
    #[default]
    Uniform,
    Random,
}

/// Seeded instance with uniform budgets `1/N`.
pub fn random_instance(seed: u64, n_buyers: usize, n_goods: usize, family: UtilityFamily) -> MarketInstance {
    random_instance_with(seed, n_buyers, n_goods, family, BudgetDraw::Uniform)
}

/// Seeded instance generator.
///
/// Preference weights are drawn uniformly on `[0.1, 0.9]` per entry and then
/// normalized, which keeps every row strictly inside the simplex. Tullock
/// exponents are uniform on `[0.1, 0.8]`; larger exponents push equilibrium
/// allocations below `1e-5` where the explicit buyer step cannot settle.
pub fn random_instance_with(
    seed: u64,
    n_buyers: usize,
    n_goods: usize,
    family: UtilityFamily,
    budgets: BudgetDraw,
) -> MarketInstance {
    assert!(n_buyers >= 1 && n_goods >= 1, "market needs N >= 1 and K >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..n_goods).map(|_| rng.random_range(0.1..0.9)).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    };
    let utilities = (0..n_buyers)
        .map(|_| match family {
            UtilityFamily::Tullock => {
                let a = weights(&mut rng);
                let rho = (0..n_goods).map(|_| rng.random_range(0.1..0.8)).collect();
                UtilityModel::Tullock { a, rho }
            }
            UtilityFamily::CobbDouglas => UtilityModel::CobbDouglas { a: weights(&mut rng) },
            UtilityFamily::Linear => UtilityModel::Linear {
                v: (0..n_goods).map(|_| rng.random_range(0.1..1.0)).collect(),
            },
        })
        .collect();
    let budgets = match budgets {
        BudgetDraw::Uniform => vec![1.0 / n_buyers as f64; n_buyers],
        BudgetDraw::Random => {
            let raw: Vec<f64> = (0..n_buyers).map(|_| rng.random_range(0.5..1.5)).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|b| b / sum).collect()
        }
    };
    MarketInstance::new(budgets, utilities).expect("generator produces valid instances")
}
