//! Runs the configured algorithms and writes traces, certificate and summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fisher_market::{
    brute_force_ve, closed_form_cobb_douglas, kkt_residual, random_instance_with, sample_certificate, solve_eg,
    solve_tatonnement, solve_trading_post, MarketError, MarketInstance, SolverOutcome, UtilityFamily, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, Emit, ExperimentConfig, InstanceSource};
use crate::error::{CliError, Result};
use crate::instance_io::read_instance;

const BRUTE_FORCE_MAX_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub status: RunStatus,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kkt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub prices: Vec<f64>,
    pub allocation: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub first: Algorithm,
    pub second: Algorithm,
    /// Largest entrywise allocation difference.
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateRecord {
    pub lambda_max: f64,
    pub verdict: String,
    pub samples: usize,
    pub seed: u64,
    pub sample_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub buyers: usize,
    pub goods: usize,
    pub families: Vec<String>,
    pub budgets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub instance: InstanceSummary,
    pub runs: Vec<RunRecord>,
    pub agreement: Vec<Agreement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_error: Option<String>,
}

impl ExperimentReport {
    /// 0 when every run converged, 2 when some run hit its iteration cap, 1 on other failures.
    pub fn exit_code(&self) -> i32 {
        if self.runs.iter().any(|r| r.status == RunStatus::Failed) {
            1
        } else if self.runs.iter().any(|r| r.status == RunStatus::MaxIters) {
            2
        } else {
            0
        }
    }

    pub fn run(&self, algorithm: Algorithm) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.algorithm == algorithm)
    }
}

pub fn build_instance(source: &InstanceSource) -> Result<MarketInstance> {
    match source {
        InstanceSource::Seeded {
            seed,
            buyers,
            goods,
            family,
            budgets,
        } => {
            if *buyers == 0 || *goods == 0 {
                return Err(CliError::Validation("instance needs at least one buyer and one good".into()));
            }
            Ok(random_instance_with(*seed, *buyers, *goods, *family, *budgets))
        }
        InstanceSource::File(path) => read_instance(path),
    }
}

fn all_cobb_douglas(market: &MarketInstance) -> bool {
    market.family() == Some(UtilityFamily::CobbDouglas)
}

fn brute_force_fits(market: &MarketInstance) -> bool {
    market.n_buyers() * market.n_goods() <= BRUTE_FORCE_MAX_CELLS
}

/// Algorithms to run, after checking that each applies to `market`.
pub fn plan(algorithm: Algorithm, market: &MarketInstance) -> Result<Vec<Algorithm>> {
    let fail = |msg: &str| Err(CliError::Validation(format!("{algorithm}: {msg}")));
    match algorithm {
        Algorithm::Eg if !market.is_cch() => fail("needs Cobb-Douglas or linear buyers"),
        Algorithm::ClosedForm if !all_cobb_douglas(market) => fail("needs Cobb-Douglas buyers"),
        Algorithm::BruteForce if !brute_force_fits(market) => fail("needs N*K <= 4"),
        Algorithm::All => {
            let mut algos = vec![Algorithm::Tatonnement, Algorithm::TradingPost];
            if market.is_cch() {
                algos.push(Algorithm::Eg);
            }
            if all_cobb_douglas(market) {
                algos.push(Algorithm::ClosedForm);
            }
            if brute_force_fits(market) {
                algos.push(Algorithm::BruteForce);
            }
            Ok(algos)
        }
        single => Ok(vec![single]),
    }
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

fn write_traces(dir: &Path, algorithm: Algorithm, outcome: &SolverOutcome, emit: &std::collections::BTreeSet<Emit>) -> Result<()> {
    let trace = &outcome.trace;
    if emit.contains(&Emit::PriceTrace) {
        let goods = outcome.prices.len();
        let header = std::iter::once("iter".to_string()).chain((1..=goods).map(|k| format!("p_{k}"))).collect();
        let rows = trace
            .price_history
            .iter()
            .map(|(t, p)| std::iter::once(t.to_string()).chain(p.iter().map(f64::to_string)).collect());
        write_csv(&dir.join(format!("price_trace_{algorithm}.csv")), header, rows)?;
    }
    let series = [
        (Emit::ErrorTrace, "error_trace", "change_norm", &trace.change_norms),
        (Emit::KktTrace, "kkt_trace", "kkt_total", &trace.kkt_history),
    ];
    for (kind, stem, column, values) in series {
        if emit.contains(&kind) {
            let header = vec!["iter".to_string(), column.to_string()];
            let rows = values.iter().map(|(t, v)| vec![t.to_string(), v.to_string()]);
            write_csv(&dir.join(format!("{stem}_{algorithm}.csv")), header, rows)?;
        }
    }
    Ok(())
}

fn record_from(
    market: &MarketInstance,
    algorithm: Algorithm,
    status: RunStatus,
    outcome: (&fisher_market::AllocationMatrix, &fisher_market::PriceVector),
    iterations: usize,
    wall_time_s: f64,
) -> Result<RunRecord> {
    let (x, p) = outcome;
    Ok(RunRecord {
        algorithm,
        status,
        converged: status == RunStatus::Converged,
        iterations,
        wall_time_s,
        final_kkt: Some(kkt_residual(market, x, p)?.total),
        error: None,
        prices: p.as_slice().to_vec(),
        allocation: x.to_rows(),
    })
}

fn failed(algorithm: Algorithm, err: &MarketError, wall_time_s: f64) -> RunRecord {
    RunRecord {
        algorithm,
        status: RunStatus::Failed,
        converged: false,
        iterations: 0,
        wall_time_s,
        final_kkt: None,
        error: Some(err.to_string()),
        prices: Vec::new(),
        allocation: Vec::new(),
    }
}

fn run_one(market: &MarketInstance, algorithm: Algorithm, cfg: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let dynamics = match algorithm {
        Algorithm::Tatonnement => Some(solve_tatonnement(market, &cfg.solver)),
        Algorithm::TradingPost => Some(solve_trading_post(market, &cfg.solver)),
        _ => None,
    };
    if let Some(result) = dynamics {
        let elapsed = start.elapsed().as_secs_f64();
        let (outcome, status) = match result {
            Ok(o) => (o, RunStatus::Converged),
            Err(MarketError::MaxItersExceeded(o)) => (*o, RunStatus::MaxIters),
            Err(e) => return Ok(failed(algorithm, &e, elapsed)),
        };
        write_traces(&cfg.output_dir, algorithm, &outcome, &cfg.emit)?;
        return record_from(
            market,
            algorithm,
            status,
            (&outcome.allocation, &outcome.prices),
            outcome.trace.iterations,
            elapsed,
        );
    }
    let oracle = match algorithm {
        Algorithm::Eg => solve_eg(market, &cfg.solver),
        Algorithm::ClosedForm => closed_form_cobb_douglas(market),
        Algorithm::BruteForce => brute_force_ve(market, cfg.grid),
        _ => unreachable!("dynamics handled above"),
    };
    let elapsed = start.elapsed().as_secs_f64();
    match oracle {
        Ok(r) => record_from(market, algorithm, RunStatus::Converged, (&r.allocation, &r.prices), 0, elapsed),
        Err(MarketError::MaxItersExceeded(o)) => record_from(
            market,
            algorithm,
            RunStatus::MaxIters,
            (&o.allocation, &o.prices),
            o.trace.iterations,
            elapsed,
        ),
        Err(e) => Ok(failed(algorithm, &e, elapsed)),
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, toml::to_string(value)?).map_err(|e| CliError::io(path, e))
}

/// Runs one experiment. Solver failures are recorded in the report (and traces
/// written where a trace exists); only configuration and I/O problems are errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let market = build_instance(&cfg.instance)?;
    let algorithms = plan(cfg.algorithm, &market)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;

    let runs = algorithms
        .iter()
        .map(|&a| run_one(&market, a, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut agreement = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            if !a.allocation.is_empty() && !b.allocation.is_empty() {
                agreement.push(Agreement {
                    first: a.algorithm,
                    second: b.algorithm,
                    max_abs_diff: max_abs_diff(&a.allocation, &b.allocation),
                });
            }
        }
    }

    let (mut certificate, mut certificate_error) = (None, None);
    if cfg.emit.contains(&Emit::Certificate) {
        match sample_certificate(&market, cfg.certificate_samples, cfg.certificate_seed) {
            Ok(c) => {
                let record = CertificateRecord {
                    lambda_max: c.lambda_max,
                    verdict: match c.verdict {
                        Verdict::StrictlyMonotoneAtPoint => "strictly_monotone_at_samples".into(),
                        Verdict::Inconclusive => "inconclusive".into(),
                    },
                    samples: c.sample_points,
                    seed: cfg.certificate_seed,
                    sample_lambdas: c.sample_lambdas,
                };
                write_toml(&cfg.output_dir.join("certificate.toml"), &record)?;
                certificate = Some(record);
            }
            Err(e) => certificate_error = Some(e.to_string()),
        }
    }

    let report = ExperimentReport {
        instance: InstanceSummary {
            buyers: market.n_buyers(),
            goods: market.n_goods(),
            families: market.utilities().iter().map(|u| u.family().to_string()).collect(),
            budgets: market.budgets().to_vec(),
        },
        runs,
        agreement,
        certificate,
        certificate_error,
    };
    if cfg.emit.contains(&Emit::Summary) {
        write_toml(&cfg.output_dir.join("summary.toml"), &report)?;
    }
    Ok(report)
}

/// Copy of `base` for one seed, writing under `base.output_dir/seed_<seed>`.
pub fn config_for_seed(base: &ExperimentConfig, seed: u64) -> Result<ExperimentConfig> {
    let InstanceSource::Seeded {
        buyers,
        goods,
        family,
        budgets,
        ..
    } = base.instance
    else {
        return Err(CliError::Validation("several seeds need a seeded instance, not a file".into()));
    };
    let mut cfg = base.clone();
    cfg.instance = InstanceSource::Seeded {
        seed,
        buyers,
        goods,
        family,
        budgets,
    };
    cfg.output_dir = seed_dir(&base.output_dir, seed);
    Ok(cfg)
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed}"))
}

/// Runs one experiment per seed on a pool of `jobs` workers. Results come back in seed order.
pub fn run_seeds(base: &ExperimentConfig, seeds: &[u64], jobs: usize) -> Result<Vec<(u64, Result<ExperimentReport>)>> {
    let configs = seeds
        .iter()
        .map(|&s| Ok((s, config_for_seed(base, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| configs.into_par_iter().map(|(s, cfg)| (s, run_experiment(&cfg))).collect()))
}
