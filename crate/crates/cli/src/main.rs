use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fisher_cli::config::{InstanceSource, DEFAULT_CERTIFICATE_SAMPLES};
use fisher_cli::experiment::build_instance;
use fisher_cli::{
    parse_config, run_experiment, run_seeds, serialize_instance, Algorithm, CliError, ExperimentConfig,
    ExperimentReport,
};
use fisher_market::{random_instance_with, sample_certificate, BudgetDraw, UtilityFamily};

#[derive(Parser)]
#[command(name = "fisher", version, about = "Competitive equilibria of generalized Fisher markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance document.
    Gen {
        #[command(flatten)]
        market: MarketArgs,
        /// Draw random budgets instead of uniform ones.
        #[arg(long)]
        random_budgets: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment.
    Run(RunArgs),
    /// Sample the monotonicity certificate of an instance.
    Certify {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, default_value_t = DEFAULT_CERTIFICATE_SAMPLES)]
        samples: usize,
        /// Seed for the sample points.
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
    },
    /// Run every applicable algorithm and report pairwise allocation agreement.
    Compare(RunArgs),
}

#[derive(Args, Clone)]
struct MarketArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    buyers: Option<usize>,
    #[arg(long)]
    goods: Option<usize>,
    /// tullock, cobb_douglas or linear.
    #[arg(long)]
    family: Option<UtilityFamily>,
    /// Instance document to load instead of a seeded draw.
    #[arg(long, conflicts_with_all = ["seed", "buyers", "goods", "family"])]
    instance: Option<PathBuf>,
}

impl MarketArgs {
    fn source(&self) -> InstanceSource {
        match &self.instance {
            Some(path) => InstanceSource::File(path.clone()),
            None => InstanceSource::Seeded {
                seed: self.seed.unwrap_or(0),
                buyers: self.buyers.unwrap_or(5),
                goods: self.goods.unwrap_or(3),
                family: self.family.unwrap_or(UtilityFamily::Tullock),
                budgets: BudgetDraw::Uniform,
            },
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Configuration document; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    market: MarketArgs,
    /// tatonnement, trading_post, eg, closed_form, brute_force or all.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    alpha_exp: Option<f64>,
    #[arg(long)]
    beta_exp: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads when running several seeds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Number of consecutive seeds to run, each in its own `seed_<s>` directory.
    #[arg(long, default_value_t = 1)]
    count: u64,
}

impl RunArgs {
    fn config(&self, forced: Option<Algorithm>) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(&fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?)?,
            None => {
                let mut cfg = ExperimentConfig::seeded(0, 5, 3, UtilityFamily::Tullock, Algorithm::Tatonnement);
                cfg.instance = self.market.source();
                cfg
            }
        };
        let m = &self.market;
        if m.instance.is_some() {
            cfg.instance = m.source();
        } else if let InstanceSource::Seeded {
            seed,
            buyers,
            goods,
            family,
            ..
        } = &mut cfg.instance
        {
            *seed = m.seed.unwrap_or(*seed);
            *buyers = m.buyers.unwrap_or(*buyers);
            *goods = m.goods.unwrap_or(*goods);
            *family = m.family.unwrap_or(*family);
        } else if m.seed.is_some() || m.buyers.is_some() || m.goods.is_some() || m.family.is_some() {
            cfg.instance = m.source();
        }
        if let Some(a) = forced.or(self.algo) {
            cfg.algorithm = a;
        }
        let s = &mut cfg.solver;
        s.alpha_exponent = self.alpha_exp.unwrap_or(s.alpha_exponent);
        s.beta_exponent = self.beta_exp.unwrap_or(s.beta_exponent);
        s.epsilon = self.eps.unwrap_or(s.epsilon);
        s.max_iters = self.max_iters.unwrap_or(s.max_iters);
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(report: &ExperimentReport, compare: bool) {
    for r in &report.runs {
        match (&r.error, r.final_kkt) {
            (Some(e), _) => println!("{:<13} failed: {e}", r.algorithm.name()),
            (None, Some(kkt)) if r.algorithm.is_dynamic() => println!(
                "{:<13} {:?} after {} iterations, kkt {kkt:.3e}, {:.3}s",
                r.algorithm.name(),
                r.status,
                r.iterations,
                r.wall_time_s
            ),
            (None, Some(kkt)) => println!("{:<13} {:?}, kkt {kkt:.3e}, {:.3}s", r.algorithm.name(), r.status, r.wall_time_s),
            (None, None) => println!("{:<13} {:?}", r.algorithm.name(), r.status),
        }
    }
    if compare {
        for a in &report.agreement {
            println!("{:<13} vs {:<13} max |dx| = {:.3e}", a.first.name(), a.second.name(), a.max_abs_diff);
        }
    }
}

fn execute(args: &RunArgs, forced: Option<Algorithm>) -> Result<i32, CliError> {
    let cfg = args.config(forced)?;
    let compare = forced == Some(Algorithm::All);
    if args.count <= 1 {
        let report = run_experiment(&cfg)?;
        print_report(&report, compare);
        return Ok(report.exit_code());
    }
    let InstanceSource::Seeded { seed, .. } = cfg.instance else {
        return Err(CliError::Validation("--count needs a seeded instance".into()));
    };
    let seeds: Vec<u64> = (seed..seed + args.count).collect();
    let mut code = 0;
    for (s, result) in run_seeds(&cfg, &seeds, args.jobs)? {
        println!("seed {s}:");
        match result {
            Ok(report) => {
                print_report(&report, compare);
                code = worst(code, report.exit_code());
            }
            Err(e) => {
                println!("  error: {e}");
                code = worst(code, 1);
            }
        }
    }
    Ok(code)
}

/// 1 dominates 2 dominates 0.
fn worst(a: i32, b: i32) -> i32 {
    if a == 1 || b == 1 {
        1
    } else {
        a.max(b)
    }
}

fn generate(market: &MarketArgs, random_budgets: bool, out: Option<&PathBuf>) -> Result<i32, CliError> {
    let InstanceSource::Seeded {
        seed,
        buyers,
        goods,
        family,
        ..
    } = market.source()
    else {
        return Err(CliError::Validation("gen draws a seeded instance; --instance is not accepted".into()));
    };
    if buyers == 0 || goods == 0 {
        return Err(CliError::Validation("instance needs at least one buyer and one good".into()));
    }
    let budgets = if random_budgets { BudgetDraw::Random } else { BudgetDraw::Uniform };
    let text = serialize_instance(&random_instance_with(seed, buyers, goods, family, budgets))?;
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(0)
}

fn certify(market: &MarketArgs, samples: usize, sample_seed: u64) -> Result<i32, CliError> {
    let instance = build_instance(&market.source())?;
    let cert = sample_certificate(&instance, samples, sample_seed)?;
    println!("lambda_max = {:e}", cert.lambda_max);
    println!("verdict    = {:?}", cert.verdict);
    println!("samples    = {}", cert.sample_points);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen {
            market,
            random_budgets,
            out,
        } => generate(market, *random_budgets, out.as_ref()),
        Command::Run(args) => execute(args, None),
        Command::Certify {
            market,
            samples,
            sample_seed,
        } => certify(market, *samples, *sample_seed),
        Command::Compare(args) => execute(args, Some(Algorithm::All)),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
