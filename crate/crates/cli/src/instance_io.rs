//! TOML documents describing a market.
//!
//! ```toml
//! goods = 2
//!
//! [[buyers]]
//! family = "tullock"
//! budget = 0.5
//! a = [0.4, 0.6]
//! rho = [0.3, 0.7]
//!
//! [[buyers]]
//! family = "linear"
//! budget = 0.5
//! v = [1.0, 2.0]
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is lossless.

use std::fs;
use std::path::Path;

use fisher_market::{MarketInstance, UtilityModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    goods: usize,
    buyers: Vec<BuyerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum BuyerDoc {
    Tullock { budget: f64, a: Vec<f64>, rho: Vec<f64> },
    CobbDouglas { budget: f64, a: Vec<f64> },
    Linear { budget: f64, v: Vec<f64> },
}

pub fn serialize_instance(market: &MarketInstance) -> Result<String> {
    let buyers = market
        .utilities()
        .iter()
        .zip(market.budgets())
        .map(|(u, &budget)| match u.clone() {
            UtilityModel::Tullock { a, rho } => BuyerDoc::Tullock { budget, a, rho },
            UtilityModel::CobbDouglas { a } => BuyerDoc::CobbDouglas { budget, a },
            UtilityModel::Linear { v } => BuyerDoc::Linear { budget, v },
        })
        .collect();
    let doc = InstanceDoc {
        goods: market.n_goods(),
        buyers,
    };
    Ok(toml::to_string(&doc)?)
}

pub fn load_instance(text: &str) -> Result<MarketInstance> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Schema {
        path: ".".into(),
        message: e.message().to_string(),
    })?;
    let doc: InstanceDoc = serde_path_to_error::deserialize(de).map_err(CliError::schema)?;
    let mut budgets = Vec::with_capacity(doc.buyers.len());
    let mut utilities = Vec::with_capacity(doc.buyers.len());
    for buyer in doc.buyers {
        let (budget, model) = match buyer {
            BuyerDoc::Tullock { budget, a, rho } => (budget, UtilityModel::Tullock { a, rho }),
            BuyerDoc::CobbDouglas { budget, a } => (budget, UtilityModel::CobbDouglas { a }),
            BuyerDoc::Linear { budget, v } => (budget, UtilityModel::Linear { v }),
        };
        budgets.push(budget);
        utilities.push(model);
    }
    let market = MarketInstance::new(budgets, utilities)?;
    if market.n_goods() != doc.goods {
        return Err(CliError::InvariantViolation(format!(
            "document declares {} goods but buyers carry {}",
            doc.goods,
            market.n_goods()
        )));
    }
    Ok(market)
}

pub fn read_instance(path: &Path) -> Result<MarketInstance> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_instance(&text)
}

pub fn write_instance(market: &MarketInstance, path: &Path) -> Result<()> {
    fs::write(path, serialize_instance(market)?).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fisher_market::{random_instance_with, BudgetDraw, UtilityFamily};

    #[test]
    fn round_trip_is_exact() {
        for family in [UtilityFamily::Tullock, UtilityFamily::CobbDouglas, UtilityFamily::Linear] {
            let market = random_instance_with(17, 4, 3, family, BudgetDraw::Random);
            let text = serialize_instance(&market).unwrap();
            assert_eq!(load_instance(&text).unwrap(), market);
        }
    }

    #[test]
    fn budgets_must_sum_to_one() {
        let text = "goods = 1\n[[buyers]]\nfamily = \"linear\"\nbudget = 0.6\nv = [1.0]\n[[buyers]]\nfamily = \"linear\"\nbudget = 0.5\nv = [1.0]\n";
        assert!(matches!(load_instance(text), Err(CliError::InvariantViolation(_))));
    }

    #[test]
    fn tullock_exponent_bound() {
        let text = "goods = 1\n[[buyers]]\nfamily = \"tullock\"\nbudget = 1.0\na = [1.0]\nrho = [1.5]\n";
        assert!(matches!(load_instance(text), Err(CliError::InvariantViolation(_))));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = "goods = 1\n[[buyers]]\nfamily = \"linear\"\nbudget = \"lots\"\nv = [1.0]\n";
        match load_instance(text) {
            Err(CliError::Schema { path, .. }) => assert!(path.contains("buyers"), "{path}"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn declared_goods_must_match() {
        let text = "goods = 2\n[[buyers]]\nfamily = \"linear\"\nbudget = 1.0\nv = [1.0]\n";
        assert!(matches!(load_instance(text), Err(CliError::InvariantViolation(_))));
    }
}
