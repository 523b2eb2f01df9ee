//! Independent ground truth for the learning dynamics.
//!
//! * [`closed_form_cobb_douglas`]: the classical Cobb-Douglas equilibrium.
//! * [`solve_eg`]: Eisenberg-Gale convex program for markets whose
//!   utilities are continuous, concave and homogeneous of degree one.
//! * [`brute_force_ve`]: grid search for the variational equilibrium on tiny markets.

mod brute_force;
mod closed_form;
mod eg;

pub use brute_force::{brute_force_ve, MIN_GRID};
pub use closed_form::closed_form_cobb_douglas;
pub use eg::{eg_objective, solve_eg};

use std::fmt;

use crate::error::Result;
use crate::market::{AllocationMatrix, MarketInstance, PriceVector};
use crate::vi::kkt_residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    EisenbergGale,
    ClosedForm,
    BruteForce,
}

impl OracleMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::EisenbergGale => "eisenberg_gale",
            Self::ClosedForm => "closed_form",
            Self::BruteForce => "brute_force",
        }
    }
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub allocation: AllocationMatrix,
    pub prices: PriceVector,
    pub method: OracleMethod,
    /// `kkt_residual(allocation, prices).total`, kept for audit.
    pub certified_kkt: f64,
}

impl OracleResult {
    fn audited(market: &MarketInstance, allocation: AllocationMatrix, prices: PriceVector, method: OracleMethod) -> Result<Self> {
        let certified_kkt = kkt_residual(market, &allocation, &prices)?.total;
        Ok(Self {
            allocation,
            prices,
            method,
            certified_kkt,
        })
    }
}
