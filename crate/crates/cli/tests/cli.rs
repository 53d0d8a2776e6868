use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulse-dde"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn body(s: &str) -> Vec<Vec<String>> {
    s.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("pulse-dde-cli-{}-{name}", std::process::id()))
}

#[test]
fn limit_cycle_prints_period() {
    let o = run(&["limit-cycle", "--beta-u", "1", "--beta-l", "1", "--tau", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "period,2.97976"));
}

#[test]
fn every_example_config_runs() {
    let cases: &[(&str, &[&str])] = &[
        ("limit_cycle.toml", &["limit-cycle"]),
        ("simulate.toml", &["simulate"]),
        ("classify.toml", &["classify"]),
        ("clm.toml", &["clm", "--mesh", "200"]),
        ("forced_cycle.toml", &["forced-cycle"]),
        ("lock.toml", &["lock"]),
        ("sweep_beta_u.toml", &["sweep", "--mesh", "50"]),
        ("poincare.toml", &["poincare"]),
        ("embed.toml", &["embed"]),
        ("min_rest_interval.toml", &["treat", "min-rest-interval"]),
        ("fit_band.toml", &["treat", "fit-band"]),
        ("gcsf.toml", &["treat", "gcsf"]),
        ("chemo_scan.toml", &["treat", "chemo-scan", "--window-lo", "0", "--window-hi", "100"]),
        ("verify.toml", &["verify"]),
    ];
    for (cfg, args) in cases {
        let path = configs().join(cfg);
        let mut all: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap();
        all.extend(["--config", p]);
        let o = run(&all);
        assert!(o.status.success(), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("# command: "), "{cfg}: header block missing");
    }
}

#[test]
fn clm_maximum_sits_at_delta2() {
    let cfg = configs().join("clm.toml");
    let o = run(&["clm", "--config", cfg.to_str().unwrap(), "--mesh", "2000"]);
    assert!(o.status.success());
    let rows = body(&stdout(&o));
    let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
    for r in &rows {
        let t: f64 = r[3].parse().unwrap();
        if t > best {
            best = t;
            at = r[0].parse().unwrap();
        }
    }
    // delta2 for unit parameters, a = 0.5, sigma = 1.
    let e = (-1.0f64).exp();
    let z2 = 2.0 * (2.0 - e).ln() + 1.0;
    let d2 = z2 - 1.0 - (1.0 - 0.5 * (1.0 - e)).ln();
    let step = 2.9797602512895 / 2000.0;
    assert!((at - d2).abs() <= step + 1e-12, "max at {at}, delta2 {d2}");
}

#[test]
fn validation_errors_exit_2() {
    let bad = tmp("both.toml");
    std::fs::write(
        &bad,
        "[model.reduced]\ntau = 1.0\nbeta_u = 1.0\nbeta_l = 1.0\n[model.raw]\ngamma = 1.0\ntau_raw = 1.0\nb_l = 2.0\nb_u = 1.0\ntheta = 1.0\n",
    )
    .unwrap();
    let o = run(&["limit-cycle", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one"));
    std::fs::remove_file(&bad).ok();

    let fc = configs().join("forced_cycle.toml");
    let o = run(&["forced-cycle", "--config", fc.to_str().unwrap(), "--a", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("below threshold"));

    let o = run(&["limit-cycle", "--tau=-1", "--beta-u", "1", "--beta-l", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));

    let o = run(&["limit-cycle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn raw_parameters_normalize() {
    let raw = tmp("raw.toml");
    std::fs::write(&raw, "[model.raw]\ngamma = 2.0\ntau_raw = 0.5\nb_l = 4.0\nb_u = 1.0\ntheta = 1.0\n").unwrap();
    let o = run(&["limit-cycle", "--config", raw.to_str().unwrap(), "--format", "json"]);
    std::fs::remove_file(&raw).ok();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // tau = gamma tau_raw, beta_U = theta - b_U/gamma, beta_L = b_L/gamma - theta.
    assert_eq!(v["header"]["tau"], "1");
    assert_eq!(v["header"]["beta_u"], "0.5");
    assert_eq!(v["header"]["beta_l"], "1");
    assert!(v["data"]["period"].as_f64().unwrap() > 0.0);
}

#[test]
fn outputs_are_reproducible() {
    let cfg = configs().join("sweep_beta_u.toml");
    let (a, b) = (tmp("s1.csv"), tmp("s2.csv"));
    for path in [&a, &b] {
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--mesh", "100", "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    std::fs::remove_file(&a).ok();
    std::fs::remove_file(&b).ok();
    assert_eq!(x, y);
    assert!(String::from_utf8_lossy(&x).contains("param_value,kind,x_value"));
}

#[test]
fn chemo_scan_parallel_matches_sequential() {
    let cfg = configs().join("chemo_scan.toml");
    let c = cfg.to_str().unwrap();
    let args = ["treat", "chemo-scan", "--config", c, "--window-lo", "0", "--window-hi", "200"];
    let par = run(&args);
    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    let seq = run(&seq_args);
    assert!(par.status.success() && seq.status.success());
    assert_eq!(body(&stdout(&par)), body(&stdout(&seq)));
}

#[test]
fn verify_passes_with_seed() {
    let o = run(&["verify", "--seed", "7", "--random-cases", "20"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
