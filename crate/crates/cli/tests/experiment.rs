use std::fs;
use std::path::Path;

use fisher_cli::config::InstanceSource;
use fisher_cli::experiment::seed_dir;
use fisher_cli::{
    parse_config, run_experiment, run_seeds, write_instance, Algorithm, CliError, ExperimentConfig, RunStatus,
};
use fisher_market::{kkt_residual, random_instance, AllocationMatrix, PriceVector, UtilityFamily};

fn config(dir: &Path, seed: u64, n: usize, k: usize, family: UtilityFamily, algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::seeded(seed, n, k, family, algorithm);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn as_f64s(v: &toml::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_float().unwrap()).collect()
}

#[test]
fn traces_have_the_declared_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5, 5, 3, UtilityFamily::Tullock, Algorithm::All);
    let report = run_experiment(&cfg).unwrap();
    for algo in [Algorithm::Tatonnement, Algorithm::TradingPost] {
        let iterations = report.run(algo).unwrap().iterations;
        let rows = iterations / cfg.solver.record_every + 1;
        let (header, prices) = read_csv(&dir.path().join(format!("price_trace_{algo}.csv")));
        assert_eq!(header, ["iter", "p_1", "p_2", "p_3"]);
        assert_eq!(prices.len(), rows);
        assert!(prices.windows(2).all(|w| w[0][0] < w[1][0]));
        for (stem, column) in [("error_trace", "change_norm"), ("kkt_trace", "kkt_total")] {
            let (header, values) = read_csv(&dir.path().join(format!("{stem}_{algo}.csv")));
            assert_eq!(header, ["iter", column]);
            assert_eq!(values.len(), rows);
            assert!(values.windows(2).all(|w| w[0][0] < w[1][0]));
        }
        if algo == Algorithm::Tatonnement {
            let last = prices.last().unwrap();
            assert!((last[1..].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
    assert!(dir.path().join("certificate.toml").exists());
}

#[test]
fn summary_kkt_matches_the_emitted_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 8, 3, 3, UtilityFamily::CobbDouglas, Algorithm::All);
    run_experiment(&cfg).unwrap();
    let market = random_instance(8, 3, 3, UtilityFamily::CobbDouglas);
    let summary: toml::Table = toml::from_str(&fs::read_to_string(dir.path().join("summary.toml")).unwrap()).unwrap();
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    for run in runs {
        let x = AllocationMatrix::from_rows(run["allocation"].as_array().unwrap().iter().map(as_f64s).collect()).unwrap();
        let p = PriceVector::new(as_f64s(&run["prices"])).unwrap();
        let recomputed = kkt_residual(&market, &x, &p).unwrap().total;
        assert!((recomputed - run["final_kkt"].as_float().unwrap()).abs() <= 1e-12);
    }
    for pair in summary["agreement"].as_array().unwrap() {
        assert!(pair["max_abs_diff"].as_float().unwrap() <= 1e-3);
    }
}

#[test]
fn repeated_runs_write_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(a.path(), 2, 4, 3, UtilityFamily::Tullock, Algorithm::All)).unwrap();
    run_experiment(&config(b.path(), 2, 4, 3, UtilityFamily::Tullock, Algorithm::All)).unwrap();
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
            compared += 1;
        }
    }
    assert_eq!(compared, 6);
}

#[test]
fn iteration_cap_still_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 1, 5, 3, UtilityFamily::Tullock, Algorithm::Tatonnement);
    cfg.solver.max_iters = 35;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.runs[0].status, RunStatus::MaxIters);
    assert_eq!(report.exit_code(), 2);
    let (_, rows) = read_csv(&dir.path().join("price_trace_tatonnement.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn oracle_choice_is_checked_against_the_instance() {
    let dir = tempfile::tempdir().unwrap();
    for algo in [Algorithm::Eg, Algorithm::ClosedForm, Algorithm::BruteForce] {
        let cfg = config(&dir.path().join(algo.name()), 0, 3, 3, UtilityFamily::Tullock, algo);
        assert!(matches!(run_experiment(&cfg), Err(CliError::Validation(_))));
        assert!(!cfg.output_dir.exists());
    }
    let cfg = config(&dir.path().join("lin"), 0, 3, 3, UtilityFamily::Linear, Algorithm::ClosedForm);
    assert!(matches!(run_experiment(&cfg), Err(CliError::Validation(_))));
}

#[test]
fn instance_files_drive_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("market.toml");
    write_instance(&random_instance(4, 2, 2, UtilityFamily::Linear), &path).unwrap();
    let text = format!(
        "algorithm = \"eg\"\noutput_dir = {:?}\nemit = [\"summary\"]\n[instance]\npath = {:?}\n",
        dir.path().join("out"),
        path
    );
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.instance, InstanceSource::File(path));
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.exit_code(), 0);
    assert!(report.runs[0].final_kkt.unwrap() <= 1e-4);
    assert!(dir.path().join("out/summary.toml").exists());
    assert!(!dir.path().join("out/certificate.toml").exists());
}

#[test]
fn seeds_fan_out_into_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(dir.path(), 0, 3, 2, UtilityFamily::Tullock, Algorithm::TradingPost);
    let results = run_seeds(&base, &[10, 11, 12], 3).unwrap();
    assert_eq!(results.iter().map(|(s, _)| *s).collect::<Vec<_>>(), [10, 11, 12]);
    for (seed, result) in results {
        assert_eq!(result.unwrap().exit_code(), 0);
        assert!(seed_dir(dir.path(), seed).join("price_trace_trading_post.csv").exists());
    }
}
