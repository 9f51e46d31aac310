use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn optpred(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optpred"));
    cmd.args(args).env_remove("PREDICT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

/// Settings small enough for the lattice experiments to finish in seconds.
fn quick_config() -> Value {
    json!({
        "linear": { "t_end": 1.0, "record_every": 50 },
        "nonlinear": {
            "chain": { "chain": { "samples": 4000, "burn_in": 1000, "thin": 5 }, "replicas": 2, "batches": 20 },
            "ensemble": {
                "count": 60, "t_end": 0.1, "record_every": 10, "histogram_every": 1,
                "replicas": 2, "burn_in": 300, "thin": 5, "batches": 10
            },
            "canonical_sweeps": 500
        }
    })
}

fn write_config(dir: &Path, config: &Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_ok(experiment: &str, dir: &Path, config: &Value) -> Value {
    let cfg = write_config(dir, config);
    let out = dir.join("out");
    let o = optpred(
        &["--config", &cfg, "--experiment", experiment, "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{experiment}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn linear_interpolant_writes_three_widths_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_ok("linear-interpolant", dir.path(), &quick_config());
    let out = dir.path().join("out");
    for w in ["1", "0.5", "0.1"] {
        let interp = out.join(format!("interpolant_sigma{w}.csv"));
        assert_eq!(header(&interp), "x,interp_p,interp_q");
        assert_eq!(fs::read_to_string(&interp).unwrap().lines().count(), 257);
        let points = out.join(format!("points_sigma{w}.csv"));
        assert_eq!(header(&points), "alpha,x,Vp,Vq");
        assert_eq!(fs::read_to_string(&points).unwrap().lines().count(), 6);
    }
    assert_eq!(manifest["experiment"], "linear-interpolant");
    assert_eq!(manifest["seeds"]["master"], 3);
    for key in ["linear_values", "covariance_chain", "lattice_values", "ensemble"] {
        assert!(manifest["seeds"][key].is_u64(), "{key}");
    }
}

#[test]
fn linear_evolve_columns() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("linear-evolve", dir.path(), &quick_config());
    let h = header(&dir.path().join("out/evolve_sigma1.csv"));
    let cols: Vec<&str> = h.split(',').collect();
    assert_eq!(cols.len(), 21);
    assert_eq!(cols[0], "t");
    assert_eq!(cols[1], "exact_Up1");
    assert_eq!(cols[6], "exact_Uq1");
    assert_eq!(cols[11], "approx_Up1");
    assert_eq!(cols[20], "approx_Uq5");
}

#[test]
fn nonlinear_outputs_have_the_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config();
    let m = run_ok("nonlinear-compare", dir.path(), &config);
    let out = dir.path().join("out");
    assert_eq!(
        header(&out.join("compare.csv")),
        "t,mean_Up1,mean_Up2,mean_Uq1,mean_Uq2,eff_Up1,eff_Up2,eff_Uq1,eff_Uq2"
    );
    let polys = m["derived"]["polynomials"].as_array().unwrap();
    assert_eq!(polys.len(), 4);
    assert_eq!(polys[0]["equation"], "dVp1/dt");

    run_ok("spread", dir.path(), &config);
    assert_eq!(header(&out.join("histogram.csv")), "t,bin_lo,bin_hi,density");
    assert_eq!(header(&out.join("variance.csv")), "t,var_Up1");

    run_ok("nonlinear-covariance", dir.path(), &config);
    assert_eq!(header(&out.join("covariance.csv")), "r,c,stderr");

    run_ok("nonlinear-ensemble", dir.path(), &config);
    assert!(header(&out.join("ensemble.csv")).starts_with("t,mean_Up1,"));

    // A saved profile replaces the chain.
    let saved = dir.path().join("profile.csv");
    fs::copy(out.join("covariance.csv"), &saved).unwrap();
    let mut reuse = config.clone();
    reuse["nonlinear"]["profile_csv"] = json!(saved.to_str().unwrap());
    let m = run_ok("nonlinear-effective", dir.path(), &reuse);
    assert_eq!(header(&out.join("effective.csv")), "t,eff_Up1,eff_Up2,eff_Uq1,eff_Uq2");
    assert_eq!(m["derived"]["profile"]["samples"], 0);
}

#[test]
fn same_seed_gives_identical_csv_files() {
    let config = quick_config();
    for experiment in ["linear-evolve", "nonlinear-compare", "spread"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run_ok(experiment, a.path(), &config);
        // Thread count must not change the results.
        let cfg = write_config(b.path(), &config);
        let out = b.path().join("out");
        let o = optpred(
            &["--config", &cfg, "--experiment", experiment, "--out", out.to_str().unwrap()],
            &[("PREDICT_THREADS", "1")],
        );
        assert!(o.status.success());
        for f in ma["outputs"].as_array().unwrap() {
            let f = f.as_str().unwrap();
            let x = fs::read(a.path().join("out").join(f)).unwrap();
            let y = fs::read(b.path().join("out").join(f)).unwrap();
            assert!(x == y, "{experiment}: {f} differs");
        }
    }
}

#[test]
fn different_seeds_give_different_data() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut config = quick_config();
    run_ok("linear-interpolant", a.path(), &config);
    config["seed"] = json!(4);
    run_ok("linear-interpolant", b.path(), &config);
    let f = "out/points_sigma1.csv";
    assert_ne!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    // Unknown experiment.
    assert_eq!(optpred(&["--experiment", "fig9", "--out", out], &[]).status.code(), Some(2));
    // No experiment at all.
    assert_eq!(optpred(&["--out", out], &[]).status.code(), Some(2));
    // Unknown flag.
    assert_eq!(optpred(&["--bogus"], &[]).status.code(), Some(2));
    // Malformed and invalid configurations.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"seed\": -1}").unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(
        optpred(&["--config", bad, "--experiment", "spread", "--out", out], &[]).status.code(),
        Some(2)
    );
    let mut config = quick_config();
    config["linear"]["dt"] = json!(0.0);
    let cfg = write_config(dir.path(), &config);
    assert_eq!(
        optpred(&["--config", &cfg, "--experiment", "linear-evolve", "--out", out], &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        optpred(&["--experiment", "linear-evolve", "--out", out], &[("PREDICT_THREADS", "many")]).status.code(),
        Some(2)
    );
    // A step beyond the stability bound is a numerical failure.
    let mut config = quick_config();
    config["nonlinear"]["ensemble"]["dt"] = json!(0.01);
    let cfg = write_config(dir.path(), &config);
    let o = optpred(&["--config", &cfg, "--experiment", "spread", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));
}
