//! Exhaustive grid search for the variational equilibrium of a tiny market.
//!
//! Every good is fully allocated at equilibrium when marginal utilities are
//! positive, so the search runs over the saturated face of `C`: each column is
//! a composition of `grid` into `N` parts. The best grid point is refined by a
//! pattern search over transfers between buyers.

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, PriceVector};
use crate::vi::{vi_gap, vi_map};

use super::{OracleMethod, OracleResult};

pub const MIN_GRID: usize = 50;
const MAX_CELLS: usize = 4;
const REFINE_FLOOR: f64 = 1e-12;

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Gap at `x`, or `None` where the VI map is undefined.
fn gap_at(market: &MarketInstance, x: &AllocationMatrix) -> Result<Option<f64>> {
    match vi_gap(market, x) {
        Ok(g) => Ok(Some(g)),
        Err(MarketError::SingularDenominator { .. } | MarketError::DegenerateMarket | MarketError::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Unit moves on the saturated face: in each chosen column, one buyer gives to another.
fn moves(n_buyers: usize, n_goods: usize) -> Vec<Vec<(usize, usize, usize)>> {
    let transfers: Vec<(usize, usize)> = (0..n_buyers)
        .flat_map(|from| (0..n_buyers).filter(move |&to| to != from).map(move |to| (from, to)))
        .collect();
    let mut out: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new()];
    for k in 0..n_goods {
        let mut extended = Vec::new();
        for m in &out {
            extended.push(m.clone());
            for &(from, to) in &transfers {
                let mut next = m.clone();
                next.push((k, from, to));
                extended.push(next);
            }
        }
        out = extended;
    }
    out.retain(|m| !m.is_empty());
    out
}

/// Grid minimizer of `vi_gap` on the saturated face, locally refined.
pub fn brute_force_ve(market: &MarketInstance, grid: usize) -> Result<OracleResult> {
    let (n_buyers, n_goods) = (market.n_buyers(), market.n_goods());
    let cells = n_buyers * n_goods;
    if cells > MAX_CELLS {
        return Err(MarketError::TooLarge(cells));
    }
    if grid < MIN_GRID {
        return Err(MarketError::Domain(format!("grid must have at least {MIN_GRID} points per axis, got {grid}")));
    }
    let columns = compositions(grid, n_buyers);
    let h0 = 1.0 / grid as f64;

    let mut best: Option<(f64, AllocationMatrix)> = None;
    let mut index = vec![0usize; n_goods];
    loop {
        let x = AllocationMatrix::from_fn(n_buyers, n_goods, |n, k| columns[index[k]][n] as f64 * h0);
        if let Some(g) = gap_at(market, &x)? {
            if best.as_ref().is_none_or(|(b, _)| g < *b) {
                best = Some((g, x));
            }
        }
        // Odometer over the per-good column choices.
        let mut k = 0;
        while k < n_goods {
            index[k] += 1;
            if index[k] < columns.len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
        if k == n_goods {
            break;
        }
    }
    let Some((mut best_gap, mut x)) = best else {
        return Err(MarketError::Domain("the VI map is undefined at every grid point".into()));
    };

    let moves = moves(n_buyers, n_goods);
    let mut h = h0;
    while h >= REFINE_FLOOR {
        let mut improved = false;
        for m in &moves {
            if m.iter().any(|&(k, from, _)| x[(from, k)] < h) {
                continue;
            }
            let mut trial = x.clone();
            for &(k, from, to) in m {
                trial[(from, k)] -= h;
                trial[(to, k)] += h;
            }
            if let Some(g) = gap_at(market, &trial)? {
                if g < best_gap {
                    best_gap = g;
                    x = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }

    let f = vi_map(market, &x)?;
    let p = (0..n_goods)
        .map(|k| (0..n_buyers).map(|n| f[(n, k)]).fold(0.0, f64::max))
        .collect();
    OracleResult::audited(market, x, PriceVector::new(p)?, OracleMethod::BruteForce)
}
