//! Eisenberg-Gale program `max sum_n B_n log U_n(x_n)` over `C`.
//!
//! For CCH utilities the gradient of the objective is exactly the VI map `F`
//! (Euler's identity), so the solver only needs `vi_map`. It is a spectral
//! projected gradient method: Barzilai-Borwein step lengths, projection onto
//! the per-good capped simplices and a nonmonotone Armijo line search.

use std::collections::VecDeque;

use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, NkMatrix, PriceVector};
use crate::solvers::{project_capped_simplex, SolverConfig, SolverOutcome, SolverTrace};
use crate::vi::{kkt_residual, vi_map, ACTIVE_TOL};

use super::{OracleMethod, OracleResult};

const NONMONOTONE_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const SPECTRAL_MIN: f64 = 1e-10;
const SPECTRAL_MAX: f64 = 1e10;

/// `sum_n B_n log U_n(x)`; `-inf` where some utility vanishes.
pub fn eg_objective(market: &MarketInstance, x: &AllocationMatrix) -> Result<f64> {
    (0..market.n_buyers()).try_fold(0.0, |acc, n| {
        let u = market.utility_value(n, x)?;
        Ok(acc + market.budget(n) * if u > 0.0 { u.ln() } else { f64::NEG_INFINITY })
    })
}

fn project_columns(x: &NkMatrix) -> NkMatrix {
    let (n_buyers, n_goods) = x.shape();
    let mut out = NkMatrix::zeros(n_buyers, n_goods);
    let mut column = vec![0.0; n_buyers];
    for k in 0..n_goods {
        for (n, c) in column.iter_mut().enumerate() {
            *c = x[(n, k)];
        }
        for (n, v) in project_capped_simplex(&column).into_iter().enumerate() {
            out[(n, k)] = v;
        }
    }
    out
}

fn axpy(x: &NkMatrix, a: f64, d: &NkMatrix) -> NkMatrix {
    NkMatrix::from_fn(x.n_buyers(), x.n_goods(), |n, k| x[(n, k)] + a * d[(n, k)])
}

/// `p_k = max F_nk` over buyers holding more than `ACTIVE_TOL` of good `k`.
fn recover_prices(x: &AllocationMatrix, f: &NkMatrix) -> PriceVector {
    let (n_buyers, n_goods) = x.shape();
    let p = (0..n_goods)
        .map(|k| {
            let active = (0..n_buyers)
                .filter(|&n| x[(n, k)] > ACTIVE_TOL)
                .map(|n| f[(n, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            let p = if active.is_finite() {
                active
            } else {
                (0..n_buyers).map(|n| f[(n, k)]).fold(0.0, f64::max)
            };
            p.max(0.0)
        })
        .collect();
    PriceVector::from_vec_unchecked(p)
}

/// Solves the Eisenberg-Gale program for a market of CCH buyers.
///
/// Stops when the projected-gradient residual `||P(x + F) - x||_inf` is at most
/// `cfg.epsilon` and the recovered `(x, p)` has KKT residual at most `cfg.kkt_tol`.
pub fn solve_eg(market: &MarketInstance, cfg: &SolverConfig) -> Result<OracleResult> {
    cfg.validate()?;
    if let Some((n, u)) = market.utilities().iter().enumerate().find(|(_, u)| !u.family().is_cch()) {
        return Err(MarketError::WrongFamily {
            method: "solve_eg",
            expected: "CCH (Cobb-Douglas or linear)",
            buyer: n,
            found: u.family(),
        });
    }
    let (n_buyers, n_goods) = (market.n_buyers(), market.n_goods());
    // Budgets sum to one, so giving each buyer B_n of every good saturates C.
    let mut x = project_columns(&AllocationMatrix::from_fn(n_buyers, n_goods, |n, _| market.budget(n)));
    let mut value = eg_objective(market, &x)?;
    let mut g = vi_map(market, &x)?;
    let mut recent: VecDeque<f64> = VecDeque::from([value]);
    let mut spectral = {
        let r = project_columns(&axpy(&x, 1.0, &g)).max_abs_diff(&x);
        if r > 0.0 { (1.0 / r).clamp(SPECTRAL_MIN, SPECTRAL_MAX) } else { 1.0 }
    };

    for iteration in 0..cfg.max_iters {
        let residual = project_columns(&axpy(&x, 1.0, &g)).max_abs_diff(&x);
        if residual <= cfg.epsilon {
            let p = recover_prices(&x, &g);
            if kkt_residual(market, &x, &p)?.total <= cfg.kkt_tol {
                return OracleResult::audited(market, x, p, OracleMethod::EisenbergGale);
            }
        }
        let d = project_columns(&axpy(&x, spectral, &g)).sub(&x);
        let slope = g.dot(&d);
        if !(slope > 0.0) {
            // No ascent left at this resolution.
            let p = recover_prices(&x, &g);
            return finish_or_fail(market, cfg, x, p, iteration);
        }
        let reference = recent.iter().copied().fold(f64::INFINITY, f64::min);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = axpy(&x, step, &d);
            let trial_value = eg_objective(market, &trial)?;
            if trial_value.is_finite() {
                let trial_g = vi_map(market, &trial)?;
                // Concavity turns a gradient test into a sufficient-increase test,
                // which stays meaningful once objective differences hit round-off.
                if trial_value >= reference + ARMIJO * step * slope || trial_g.dot(&d) >= ARMIJO * slope {
                    accepted = Some((trial, trial_value, trial_g));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_value, next_g)) = accepted else {
            let p = recover_prices(&x, &g);
            return finish_or_fail(market, cfg, x, p, iteration);
        };
        let s = next.sub(&x);
        let sy = s.dot(&g.sub(&next_g));
        spectral = if sy > 0.0 {
            (s.dot(&s) / sy).clamp(SPECTRAL_MIN, SPECTRAL_MAX)
        } else {
            SPECTRAL_MAX
        };
        x = next;
        value = next_value;
        g = next_g;
        recent.push_back(value);
        if recent.len() > NONMONOTONE_MEMORY {
            recent.pop_front();
        }
    }
    let p = recover_prices(&x, &g);
    finish_or_fail(market, cfg, x, p, cfg.max_iters)
}

fn finish_or_fail(
    market: &MarketInstance,
    cfg: &SolverConfig,
    x: AllocationMatrix,
    p: PriceVector,
    iterations: usize,
) -> Result<OracleResult> {
    if kkt_residual(market, &x, &p)?.total <= cfg.kkt_tol {
        return OracleResult::audited(market, x, p, OracleMethod::EisenbergGale);
    }
    Err(MarketError::MaxItersExceeded(Box::new(SolverOutcome {
        allocation: x,
        prices: p,
        trace: SolverTrace {
            iterations,
            ..SolverTrace::default()
        },
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{random_instance, UtilityFamily, UtilityModel};
    use crate::oracles::closed_form_cobb_douglas;

    #[test]
    fn matches_cobb_douglas_closed_form() {
        for seed in 0..10 {
            let market = random_instance(seed, 4, 3, UtilityFamily::CobbDouglas);
            let eg = solve_eg(&market, &SolverConfig::default()).unwrap();
            let cf = closed_form_cobb_douglas(&market).unwrap();
            assert!(eg.allocation.max_abs_diff(&cf.allocation) <= 1e-4, "seed {seed}");
            assert!(eg.certified_kkt <= 1e-4);
            assert_eq!(eg.method, OracleMethod::EisenbergGale);
        }
    }

    #[test]
    fn disjoint_linear_buyers_take_their_good() {
        let market = MarketInstance::new(
            vec![0.5, 0.5],
            vec![UtilityModel::Linear { v: vec![1.0, 0.0] }, UtilityModel::Linear { v: vec![0.0, 1.0] }],
        )
        .unwrap();
        let r = solve_eg(&market, &SolverConfig::default()).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0]];
        for (n, row) in want.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                assert!((r.allocation[(n, k)] - w).abs() <= 1e-6);
            }
        }
        assert!(r.certified_kkt <= 1e-4);
    }

    #[test]
    fn single_buyer_takes_everything() {
        let market = MarketInstance::new(vec![1.0], vec![UtilityModel::CobbDouglas { a: vec![0.2, 0.3, 0.5] }]).unwrap();
        let r = solve_eg(&market, &SolverConfig::default()).unwrap();
        for v in r.allocation.as_slice() {
            assert!((v - 1.0).abs() <= 1e-9);
        }
        let f = vi_map(&market, &r.allocation).unwrap();
        for k in 0..3 {
            assert!((r.prices[k] - f[(0, k)]).abs() <= 1e-9);
        }
    }

    #[test]
    fn rejects_tullock() {
        let market = random_instance(3, 2, 2, UtilityFamily::Tullock);
        assert!(matches!(solve_eg(&market, &SolverConfig::default()), Err(MarketError::WrongFamily { .. })));
    }
}
