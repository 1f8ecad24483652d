use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use daim_core::linalg::median;
use tempfile::TempDir;

fn daim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daim")).args(args).output().expect("binary runs")
}

fn run_with(dir: &Path, sub: &str, name: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{name}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{name}.csv"));
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    daim(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const SINGLE_INDEX: &str = r#"{"link": "cubic", "d": 3, "k": 1, "n": 5, "noise_sd": 0.0, "beta": [[1.0, 0.0, 0.0]], "seed": 7}"#;

#[test]
fn simulate_noiseless_single_index() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "simulate", "sim", SINGLE_INDEX, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_rows(&dir.path().join("sim.csv"));
    assert_eq!(header, ["x_1", "x_2", "x_3", "y"]);
    assert_eq!(rows.len(), 5);
    for row in rows {
        let x1: f64 = row[0].parse().unwrap();
        let y: f64 = row[3].parse().unwrap();
        assert_eq!(y, x1 * x1 * x1);
    }
    assert!(dir.path().join("sim.truth.json").exists());
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"link": "cubic_sin", "d": 6, "k": 2, "n": 200, "seed": 3}"#;
    assert!(run_with(dir.path(), "simulate", "a", config, &[]).status.success());
    assert!(run_with(dir.path(), "simulate", "b", config, &[]).status.success());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.truth.json")).unwrap(),
        fs::read(dir.path().join("b.truth.json")).unwrap()
    );
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = TempDir::new().unwrap();
    let o = run_with(dir.path(), "simulate", "nod", r#"{"link": "cubic", "k": 1, "n": 5}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`d`"), "{}", stderr(&o));

    let o = run_with(dir.path(), "simulate", "extra", r#"{"link": "cubic", "d": 2, "k": 1, "n": 5, "bogus": 1}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let o = daim(&["simulate", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn simulate_then_decompose(dir: &Path, sim: &str, dec: &str) -> Output {
    let o = run_with(dir, "simulate", "data", sim, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = dir.join("data.csv");
    let config = dec.replace("DATA", data.to_str().unwrap());
    run_with(dir, "decompose", "components", &config, &[])
}

#[test]
fn decompose_recovers_single_index() {
    let dir = TempDir::new().unwrap();
    let sim = r#"{"link": "cubic", "d": 3, "k": 1, "n": 100000, "noise_sd": 0.0, "beta": [[1.0, 0.0, 0.0]], "seed": 7}"#;
    let o = simulate_then_decompose(dir.path(), sim, r#"{"dataset": "DATA", "k": 1, "L": 50, "N": 100, "seed": 1}"#);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("matching_error=")).unwrap().to_string();
    let err: f64 = line.trim_start_matches("matching_error=").parse().unwrap();
    assert!(err <= 0.05, "{err}");
    let (header, rows) = read_rows(&dir.path().join("components.csv"));
    assert_eq!(header, ["component_index", "weight", "v_1", "v_2", "v_3", "exhausted"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][5], "false");
}

#[test]
fn decompose_flags_exhaustion_on_rank_one_data() {
    let dir = TempDir::new().unwrap();
    let sim = r#"{"link": "cubic", "d": 3, "k": 1, "n": 100000, "noise_sd": 0.0, "beta": [[1.0, 0.0, 0.0]], "seed": 7}"#;
    let o = simulate_then_decompose(dir.path(), sim, r#"{"dataset": "DATA", "k": 3, "L": 50, "N": 100, "seed": 1}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("exhausted=true"), "{}", stdout(&o));
    let (_, rows) = read_rows(&dir.path().join("components.csv"));
    assert!(rows.len() < 3);
    assert!(rows.iter().all(|r| r.last().unwrap() == "true"));
}

#[test]
fn decompose_with_undersized_truncation_still_runs() {
    let dir = TempDir::new().unwrap();
    let sim = r#"{"link": "cubic_exp", "d": 30, "k": 3, "s": 3, "n": 20000, "seed": 5}"#;
    let o = simulate_then_decompose(
        dir.path(),
        sim,
        r#"{"dataset": "DATA", "k": 3, "L": 30, "N": 50, "s_bar": 2, "seed": 2}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_rows(&dir.path().join("components.csv"));
    for row in rows {
        let nnz = row[2..row.len() - 1].iter().filter(|v| v.parse::<f64>().unwrap() != 0.0).count();
        assert!(nnz <= 2);
    }
}

#[test]
fn decompose_rejects_malformed_csv() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "x_1,x_2,y\n1.0,oops,2.0\n").unwrap();
    let config = format!(r#"{{"dataset": "{}", "k": 1}}"#, data.display());
    let o = run_with(dir.path(), "decompose", "dec", &config, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

const SMALL_PLAN: &str = r#"{"link": "cubic_tanh", "d": 6, "k_list": [2], "n_list": [3000], "trials": 3, "L": 20, "N": 30, "base_seed": 11}"#;

#[test]
fn experiment_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let a = run_with(dir.path(), "experiment", "serial", SMALL_PLAN, &["--jobs", "1"]);
    let b = run_with(dir.path(), "experiment", "parallel", SMALL_PLAN, &["--jobs", "4"]);
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let sa = fs::read(dir.path().join("serial.csv")).unwrap();
    assert_eq!(sa, fs::read(dir.path().join("parallel.csv")).unwrap());
    let (header, rows) = read_rows(&dir.path().join("serial.csv"));
    assert_eq!(
        header.join(","),
        "trial_id,model,link,d,k,s,s_bar,n,seed,error,inv_signal,psi,wall_ms,exhausted"
    );
    assert_eq!(rows.len(), 3);
    assert!(dir.path().join("serial.meta.json").exists());
}

#[test]
fn experiment_rejects_empty_sample_sizes() {
    let dir = TempDir::new().unwrap();
    let plan = r#"{"link": "cubic", "d": 6, "k_list": [2], "n_list": []}"#;
    let o = run_with(dir.path(), "experiment", "empty", plan, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("empty.csv").exists());
}

#[test]
fn concentration_at_tiny_dimension() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"d_list": [3], "n_list": [1000000], "trials": 5, "seed": 4}"#;
    let o = run_with(dir.path(), "verify-concentration", "conc", cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_rows(&dir.path().join("conc.csv"));
    assert_eq!(header[0..5], ["d", "n", "trial", "seed", "op_error"]);
    let errs: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    // With y = u³ the diagonal entry along β alone has per-sample variance
    // E[ξ⁶ He₃(ξ)²] = 5670, so its standard error at n = 10⁶ is about 0.075.
    let sd = (5670.0f64 / 1e6).sqrt();
    let med = median(&errs);
    assert!(med >= 0.5 * sd && med <= 3.0 * sd, "{errs:?}");
}

#[test]
fn concentration_sparse_column_matches_dense_at_full_support() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"d_list": [6], "n_list": [5000], "trials": 4, "r": 6, "seed": 4}"#;
    let o = run_with(dir.path(), "verify-concentration", "full", cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_rows(&dir.path().join("full.csv"));
    for r in rows {
        let (dense, sparse): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!((dense - sparse).abs() <= 0.05 * dense, "{dense} vs {sparse}");
    }
}
