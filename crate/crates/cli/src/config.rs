//! Experiment configuration.
//!
//! ```toml
//! algorithm = "tatonnement"    # trading_post | eg | closed_form | brute_force | all
//! output_dir = "out"
//! emit = ["price_trace", "error_trace", "kkt_trace", "certificate", "summary"]
//!
//! [instance]                   # either a seeded draw ...
//! seed = 7
//! buyers = 5
//! goods = 3
//! family = "tullock"
//! budgets = "uniform"          # or "random"
//! # path = "market.toml"       # ... or an instance document
//!
//! [solver]                     # every key optional
//! alpha_exponent = 0.6
//! beta_exponent = 0.9
//!
//! [certificate]
//! samples = 50
//! seed = 0
//!
//! [brute_force]
//! grid = 200
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use fisher_market::oracles::MIN_GRID;
use fisher_market::{BudgetDraw, SolverConfig, UtilityFamily};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Tatonnement,
    TradingPost,
    Eg,
    ClosedForm,
    BruteForce,
    All,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tatonnement => "tatonnement",
            Self::TradingPost => "trading_post",
            Self::Eg => "eg",
            Self::ClosedForm => "closed_form",
            Self::BruteForce => "brute_force",
            Self::All => "all",
        }
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, Self::Tatonnement | Self::TradingPost)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Self::Tatonnement, Self::TradingPost, Self::Eg, Self::ClosedForm, Self::BruteForce, Self::All]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    PriceTrace,
    ErrorTrace,
    KktTrace,
    Certificate,
    Summary,
}

impl Emit {
    pub const ALL: [Emit; 5] = [Emit::PriceTrace, Emit::ErrorTrace, Emit::KktTrace, Emit::Certificate, Emit::Summary];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Tullock,
    CobbDouglas,
    Linear,
}

impl From<FamilyName> for UtilityFamily {
    fn from(f: FamilyName) -> Self {
        match f {
            FamilyName::Tullock => UtilityFamily::Tullock,
            FamilyName::CobbDouglas => UtilityFamily::CobbDouglas,
            FamilyName::Linear => UtilityFamily::Linear,
        }
    }
}

impl From<UtilityFamily> for FamilyName {
    fn from(f: UtilityFamily) -> Self {
        match f {
            UtilityFamily::Tullock => FamilyName::Tullock,
            UtilityFamily::CobbDouglas => FamilyName::CobbDouglas,
            UtilityFamily::Linear => FamilyName::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetName {
    #[default]
    Uniform,
    Random,
}

impl From<BudgetName> for BudgetDraw {
    fn from(b: BudgetName) -> Self {
        match b {
            BudgetName::Uniform => BudgetDraw::Uniform,
            BudgetName::Random => BudgetDraw::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Seeded {
        seed: u64,
        buyers: usize,
        goods: usize,
        family: UtilityFamily,
        budgets: BudgetDraw,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub emit: BTreeSet<Emit>,
    pub certificate_samples: usize,
    pub certificate_seed: u64,
    pub grid: usize,
}

pub const DEFAULT_CERTIFICATE_SAMPLES: usize = 50;
pub const DEFAULT_GRID: usize = 200;

impl ExperimentConfig {
    /// Seeded experiment with every optional setting at its default.
    pub fn seeded(seed: u64, buyers: usize, goods: usize, family: UtilityFamily, algorithm: Algorithm) -> Self {
        Self {
            instance: InstanceSource::Seeded {
                seed,
                buyers,
                goods,
                family,
                budgets: BudgetDraw::Uniform,
            },
            algorithm,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            emit: Emit::ALL.into_iter().collect(),
            certificate_samples: DEFAULT_CERTIFICATE_SAMPLES,
            certificate_seed: 0,
            grid: DEFAULT_GRID,
        }
    }

    /// Checks everything that does not need the instance itself.
    pub fn validate(&self) -> Result<()> {
        if matches!(self.algorithm, Algorithm::Tatonnement | Algorithm::All) {
            self.solver.validate_two_timescale()?;
        } else {
            self.solver.validate()?;
        }
        if let InstanceSource::Seeded { buyers, goods, .. } = self.instance {
            if buyers == 0 || goods == 0 {
                return Err(CliError::Validation("instance needs at least one buyer and one good".into()));
            }
        }
        if self.certificate_samples == 0 {
            return Err(CliError::Validation("certificate.samples must be at least 1".into()));
        }
        if self.grid < MIN_GRID {
            return Err(CliError::Validation(format!("brute_force.grid must be at least {MIN_GRID}")));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emit: Option<Vec<Emit>>,
    instance: RawInstance,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    certificate: RawCertificate,
    #[serde(default)]
    brute_force: RawBruteForce,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    buyers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<FamilyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budgets: Option<BudgetName>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bid_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    record_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kkt_tol: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBruteForce {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

fn missing(path: &str) -> CliError {
    CliError::Schema {
        path: path.into(),
        message: "missing field".into(),
    }
}

/// Parses and validates a configuration document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Schema {
        path: ".".into(),
        message: e.message().to_string(),
    })?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(CliError::schema)?;

    let instance = match raw.instance.path.clone() {
        Some(path) => {
            let i = &raw.instance;
            if i.seed.is_some() || i.buyers.is_some() || i.goods.is_some() || i.family.is_some() || i.budgets.is_some() {
                return Err(CliError::Validation("instance.path excludes the seeded-instance keys".into()));
            }
            InstanceSource::File(path)
        }
        None => InstanceSource::Seeded {
            seed: raw.instance.seed.ok_or_else(|| missing("instance.seed"))?,
            buyers: raw.instance.buyers.ok_or_else(|| missing("instance.buyers"))?,
            goods: raw.instance.goods.ok_or_else(|| missing("instance.goods"))?,
            family: raw.instance.family.ok_or_else(|| missing("instance.family"))?.into(),
            budgets: raw.instance.budgets.unwrap_or_default().into(),
        },
    };

    let d = SolverConfig::default();
    let s = raw.solver;
    let solver = SolverConfig {
        max_iters: s.max_iters.unwrap_or(d.max_iters),
        epsilon: s.epsilon.unwrap_or(d.epsilon),
        alpha_exponent: s.alpha_exponent.unwrap_or(d.alpha_exponent),
        beta_exponent: s.beta_exponent.unwrap_or(d.beta_exponent),
        bid_floor: s.bid_floor.unwrap_or(d.bid_floor),
        record_every: s.record_every.unwrap_or(d.record_every),
        kkt_tol: s.kkt_tol.unwrap_or(d.kkt_tol),
    };

    let cfg = ExperimentConfig {
        instance,
        algorithm: raw.algorithm,
        solver,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        emit: raw.emit.map_or_else(|| Emit::ALL.into_iter().collect(), |e| e.into_iter().collect()),
        certificate_samples: raw.certificate.samples.unwrap_or(DEFAULT_CERTIFICATE_SAMPLES),
        certificate_seed: raw.certificate.seed.unwrap_or(0),
        grid: raw.brute_force.grid.unwrap_or(DEFAULT_GRID),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every setting explicitly; `parse_config` reads it back unchanged.
pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    let instance = match &cfg.instance {
        InstanceSource::Seeded {
            seed,
            buyers,
            goods,
            family,
            budgets,
        } => RawInstance {
            seed: Some(*seed),
            buyers: Some(*buyers),
            goods: Some(*goods),
            family: Some((*family).into()),
            budgets: Some(match budgets {
                BudgetDraw::Uniform => BudgetName::Uniform,
                BudgetDraw::Random => BudgetName::Random,
            }),
            path: None,
        },
        InstanceSource::File(path) => RawInstance {
            path: Some(path.clone()),
            ..RawInstance::default()
        },
    };
    let s = &cfg.solver;
    let raw = RawConfig {
        algorithm: cfg.algorithm,
        output_dir: Some(cfg.output_dir.clone()),
        emit: Some(cfg.emit.iter().copied().collect()),
        instance,
        solver: RawSolver {
            max_iters: Some(s.max_iters),
            epsilon: Some(s.epsilon),
            alpha_exponent: Some(s.alpha_exponent),
            beta_exponent: Some(s.beta_exponent),
            bid_floor: Some(s.bid_floor),
            record_every: Some(s.record_every),
            kkt_tol: Some(s.kkt_tol),
        },
        certificate: RawCertificate {
            samples: Some(cfg.certificate_samples),
            seed: Some(cfg.certificate_seed),
        },
        brute_force: RawBruteForce { grid: Some(cfg.grid) },
    };
    Ok(toml::to_string(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "algorithm = \"tatonnement\"\n[instance]\nseed = 7\nbuyers = 5\ngoods = 3\nfamily = \"tullock\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg, ExperimentConfig::seeded(7, 5, 3, UtilityFamily::Tullock, Algorithm::Tatonnement));
        assert_eq!(cfg.solver.alpha_exponent, 0.6);
        assert_eq!(cfg.solver.beta_exponent, 0.9);
    }

    #[test]
    fn slow_price_schedule_is_required_for_tatonnement() {
        let text = format!("{MINIMAL}[solver]\nbeta_exponent = 0.5\n");
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
        let text = format!("{MINIMAL}[solver]\nbeta_exponent = 0.55\nalpha_exponent = 0.6\n");
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
    }

    #[test]
    fn round_trip() {
        let text = "algorithm = \"all\"\noutput_dir = \"runs/a\"\nemit = [\"summary\", \"price_trace\"]\n\
                    [instance]\nseed = 3\nbuyers = 2\ngoods = 2\nfamily = \"cobb_douglas\"\nbudgets = \"random\"\n\
                    [solver]\nepsilon = 1e-7\nkkt_tol = 3.3e-6\n[brute_force]\ngrid = 80\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.emit.len(), 2);
        assert_eq!(parse_config(&serialize_config(&cfg).unwrap()).unwrap(), cfg);

        let file = parse_config("algorithm = \"eg\"\n[instance]\npath = \"m.toml\"\n").unwrap();
        assert_eq!(file.instance, InstanceSource::File("m.toml".into()));
        assert_eq!(parse_config(&serialize_config(&file).unwrap()).unwrap(), file);
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let text = MINIMAL.replace("buyers = 5", "buyers = \"five\"");
        match parse_config(&text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "instance.buyers"),
            other => panic!("{other:?}"),
        }
        match parse_config(&MINIMAL.replace("tatonnement", "gradient")) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "algorithm"),
            other => panic!("{other:?}"),
        }
        match parse_config(&format!("{MINIMAL}[solver]\nstep = 1\n")) {
            Err(CliError::Schema { path, .. }) => assert!(path.starts_with("solver"), "{path}"),
            other => panic!("{other:?}"),
        }
        match parse_config("algorithm = \"eg\"\n[instance]\nseed = 1\n") {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "instance.buyers"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn path_and_seed_are_exclusive() {
        let text = "algorithm = \"eg\"\n[instance]\npath = \"m.toml\"\nseed = 3\n";
        assert!(matches!(parse_config(text), Err(CliError::Validation(_))));
    }
}
