use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iamcmc"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn run_four_state_writes_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"four_state\"\nseed = 1\nn = 5000\n[target]\nprobs = [0.4, 0.1, 0.1, 0.4]\n");
    let out = d.path().join("out");
    ok(&run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"]));
    assert!(out.join("draws.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let keys: Vec<&str> = report["mode_fractions"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["(0,0)", "(0,1)", "(1,0)", "(1,1)"]);
    assert!(fs::read_dir(out.join("plots")).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg")));
}

#[test]
fn rerun_is_byte_identical_and_seed_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"circle\"\nseed = 3\nn = 2000\nchains = 2\n[target]\nl = 2.0\ncells = 40\n");
    let c = cfg.to_str().unwrap();
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|s| d.path().join(s)).collect();
    ok(&run(&["run", "--config", c, "--out", dirs[0].to_str().unwrap(), "--threads", "2"]));
    ok(&run(&["run", "--config", c, "--out", dirs[1].to_str().unwrap(), "--threads", "1"]));
    ok(&run(&["run", "--config", c, "--out", dirs[2].to_str().unwrap(), "--seed", "4"]));
    let read = |p: &PathBuf| fs::read(p.join("draws.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
}

#[test]
fn invalid_config_reports_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"four_state\"\nseed = 1\nchains = 0\n");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    let cfg = write_config(d.path(), "experiment = \"four_state\"\nseed = 1\nbogus = 2\n");
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let cfg = write_config(d.path(), "experiment = \"four_state\"\n");
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn spectral_grid_rows_and_limits() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("s");
    ok(&run(&["spectral", "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("gap_curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "a,gamma_rs,gamma_env_rs,gamma_env_sys");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 45);
    let last = rows.last().unwrap();
    assert!((last[0] - 0.49).abs() < 1e-12);
    assert!(last[1] < 0.1 && last[2] > 0.9);
    assert!(out.join("plots/gap_curve.svg").exists());

    let one = d.path().join("one");
    ok(&run(&["spectral", "--grid", "0.3", "--out", one.to_str().unwrap()]));
    assert_eq!(fs::read_to_string(one.join("gap_curve.csv")).unwrap().lines().count(), 2);

    let o = run(&["spectral", "--grid", "0.6", "--out", one.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn spectral_circle_family() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("c");
    ok(&run(&["spectral", "--family", "circle", "--grid", "2,4", "--cells", "80", "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("circle_gaps.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "l,gamma_rwm,gamma_env");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn oracle_roundtrip_and_reuse() {
    let d = tempfile::tempdir().unwrap();
    let body = "experiment = \"ma1\"\nseed = 2\nn = 500\n[target]\ndata_len = 100\n[oracle]\naxes = [{ min = -0.5, max = 3.5, count = 41 }, { min = -1.5, max = 1.0, count = 31 }]\n";
    let cfg = write_config(d.path(), body);
    let out = d.path().join("o");
    ok(&run(&["oracle", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let bytes = fs::read(out.join("oracle.bin")).unwrap();
    let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + hlen]).unwrap();
    assert_eq!(header["values"], 41 * 31);
    assert_eq!(bytes.len(), 8 + hlen + 8 * 41 * 31);

    let reuse = format!(
        "experiment = \"ma1\"\nseed = 2\nn = 500\n[target]\ndata_len = 100\n[oracle]\nfile = \"{}\"\n",
        out.join("oracle.bin").display()
    );
    let cfg = write_config(d.path(), &reuse);
    let run_out = d.path().join("r");
    ok(&run(&["run", "--config", cfg.to_str().unwrap(), "--out", run_out.to_str().unwrap()]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run_out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tv_to_oracle"].as_object().unwrap().len(), 2);
}

#[test]
fn oracle_without_bounds_fails() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"mixture_gaussian\"\nseed = 1\n[target]\ndata_len = 50\n");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn compare_writes_side_by_side() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("cmp");
    let cfg = fs::read_to_string(preset("circle.toml")).unwrap().replace("n = 50000", "n = 1000").replace("chains = 4", "chains = 1");
    let cfg = write_config(d.path(), &cfg);
    ok(&run(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(text.starts_with("kernel,"));
    assert_eq!(text.lines().count(), 3);
    assert!(out.join("draws_rwm.csv").exists() && out.join("draws_ia_rwm.csv").exists());
}

#[test]
fn every_preset_parses() {
    for e in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")).unwrap() {
        let p = e.unwrap().path();
        iamcmc::ExperimentConfig::from_file(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
    }
}

#[test]
fn smc_compare_writes_weighted_particles() {
    let d = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(preset("smc_compare.toml"))
        .unwrap()
        .replace("n_particles = 20000", "n_particles = 500")
        .replace("stages = 20", "stages = 4")
        .replace("n = 1000", "n = 50")
        .replace("burn = 1000", "burn = 50")
        .replace("m = 20", "m = 2");
    let cfg = write_config(d.path(), &body);
    let out = d.path().join("smc");
    ok(&run(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out.join("particles.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",weight"));
    assert_eq!(text.lines().count(), 501);
}
