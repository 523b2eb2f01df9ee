//! Euclidean projections used by the solvers.

use crate::error::{MarketError, Result};
use crate::market::PriceVector;

/// Projects `v` onto `{y >= 0 : sum y = total}` by sorting and thresholding.
pub fn project_scaled_simplex(v: &[f64], total: f64) -> Vec<f64> {
    debug_assert!(v.iter().all(|x| x.is_finite()), "projection input must be finite");
    debug_assert!(total > 0.0);
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - total) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|&x| (x - threshold).max(0.0)).collect()
}

/// Nearest point of the price simplex `{p >= 0 : sum p = 1}`.
pub fn project_simplex(v: &[f64]) -> PriceVector {
    PriceVector::from_vec_unchecked(project_scaled_simplex(v, 1.0))
}

/// Projects onto the capped simplex `{y >= 0 : sum y <= 1}` (one good's column of `C`).
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        clipped
    } else {
        project_scaled_simplex(v, 1.0)
    }
}

/// Maps a bundle onto the budget set `{x >= 0 : sum_k p_k x_k = budget}`.
///
/// Works in spend coordinates `y_k = p_k x_k`, projecting `y` onto the simplex
/// scaled by the budget and mapping back.
pub fn project_budget(x_n: &[f64], p: &[f64], budget: f64) -> Result<Vec<f64>> {
    if p.len() != x_n.len() {
        return Err(MarketError::Domain("bundle and price lengths differ".into()));
    }
    if let Some(k) = p.iter().position(|&pk| !(pk > 0.0)) {
        return Err(MarketError::Domain(format!("price p[{k}] = {} is not positive", p[k])));
    }
    if !(budget > 0.0) {
        return Err(MarketError::Domain("budget must be positive".into()));
    }
    let spend: Vec<f64> = x_n.iter().zip(p).map(|(x, p)| x * p).collect();
    Ok(project_scaled_simplex(&spend, budget)
        .into_iter()
        .zip(p)
        .map(|(y, p)| y / p)
        .collect())
}
