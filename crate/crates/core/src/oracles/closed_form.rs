use crate::error::{MarketError, Result};
use crate::market::{AllocationMatrix, MarketInstance, PriceVector, UtilityModel};

use super::{OracleMethod, OracleResult};

/// Cobb-Douglas equilibrium: `p_k = sum_n B_n a_nk`, `x_nk = B_n a_nk / p_k`.
///
/// The returned `certified_kkt` is the independent check on the formula.
pub fn closed_form_cobb_douglas(market: &MarketInstance) -> Result<OracleResult> {
    let weights = market
        .utilities()
        .iter()
        .enumerate()
        .map(|(n, u)| match u {
            UtilityModel::CobbDouglas { a } => Ok(a.as_slice()),
            other => Err(MarketError::WrongFamily {
                method: "closed_form_cobb_douglas",
                expected: "Cobb-Douglas",
                buyer: n,
                found: other.family(),
            }),
        })
        .collect::<Result<Vec<&[f64]>>>()?;
    let (n_buyers, n_goods) = (market.n_buyers(), market.n_goods());
    let p: Vec<f64> = (0..n_goods)
        .map(|k| (0..n_buyers).map(|n| market.budget(n) * weights[n][k]).sum())
        .collect();
    let x = AllocationMatrix::from_fn(n_buyers, n_goods, |n, k| market.budget(n) * weights[n][k] / p[k]);
    OracleResult::audited(market, x, PriceVector::new(p)?, OracleMethod::ClosedForm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{random_instance, UtilityFamily};

    #[test]
    fn two_buyer_example() {
        let market = MarketInstance::new(
            vec![0.5, 0.5],
            vec![
                UtilityModel::CobbDouglas { a: vec![0.9, 0.1] },
                UtilityModel::CobbDouglas { a: vec![0.1, 0.9] },
            ],
        )
        .unwrap();
        let r = closed_form_cobb_douglas(&market).unwrap();
        assert_eq!(r.method, OracleMethod::ClosedForm);
        for (got, want) in r.prices.as_slice().iter().zip([0.5, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        let want = [[0.9, 0.1], [0.1, 0.9]];
        for (n, row) in want.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                assert!((r.allocation[(n, k)] - w).abs() < 1e-15);
            }
        }
        assert!(r.certified_kkt <= 1e-10);
    }

    #[test]
    fn symmetric_buyers_share_evenly() {
        let market = MarketInstance::new(vec![0.25; 4], vec![UtilityModel::CobbDouglas { a: vec![1.0 / 3.0; 3] }; 4]).unwrap();
        let r = closed_form_cobb_douglas(&market).unwrap();
        for p in r.prices.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        for x in r.allocation.as_slice() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_good_allocates_budget_shares() {
        let market = MarketInstance::new(vec![0.2, 0.8], vec![UtilityModel::CobbDouglas { a: vec![1.0] }; 2]).unwrap();
        let r = closed_form_cobb_douglas(&market).unwrap();
        assert!((r.prices[0] - 1.0).abs() < 1e-15);
        assert!((r.allocation[(0, 0)] - 0.2).abs() < 1e-15);
        assert!((r.allocation[(1, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn audit_passes_on_random_instances() {
        for seed in 0..20 {
            let market = random_instance(seed, 5, 4, UtilityFamily::CobbDouglas);
            assert!(closed_form_cobb_douglas(&market).unwrap().certified_kkt <= 1e-10);
        }
    }

    #[test]
    fn rejects_other_families() {
        let market = random_instance(1, 2, 2, UtilityFamily::Tullock);
        assert!(matches!(
            closed_form_cobb_douglas(&market),
            Err(MarketError::WrongFamily { buyer: 0, .. })
        ));
    }
}
