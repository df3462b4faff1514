use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_sgalm");

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn summary_without_time(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn solve_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.cfg");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trace", "--dump-channels", "--seed", "4"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(summary_without_time(&a.join("summary.json")), summary_without_time(&b.join("summary.json")));
    assert_eq!(
        header(&a.join("trace.csv")),
        "iter,fp_round,alm_round,inner_iter,objective,lagrangian,grad_norm,max_violation,step,rho,method"
    );
    assert_eq!(header(&a.join("channels.csv")), "node_id,node_kind,antenna_index,re,im");
    let prov: Value = serde_json::from_str(&fs::read_to_string(a.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["command"], "solve");
    assert_eq!(prov["seed"], 4);
    let s = summary_without_time(&a.join("summary.json"));
    assert_eq!(s["feasible"], true);
    assert_eq!(s["config"]["num_antennas"], 33);
}

#[test]
fn missing_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("desk.cfg")).unwrap();
    let broken = dir.path().join("broken.cfg");
    fs::write(&broken, text.replace("num_targets = 2\n", "")).unwrap();
    let o = run(&["solve", "--config", broken.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_targets"));

    let o = run(&["solve", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["solve", "--config", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert_ne!(code(&o), 0);
}

#[test]
fn infeasible_run_exits_three_only_when_required() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("desk.cfg")).unwrap();
    let hard = dir.path().join("hard.cfg");
    fs::write(
        &hard,
        text.replace("num_antennas = 33", "num_antennas = 9")
            .replace("beampattern_thresholds_dbm = -30", "beampattern_thresholds_dbm = 20"),
    )
    .unwrap();
    let out = dir.path().join("o");
    let base = ["solve", "--config", hard.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&run(&base)), 0);
    let mut strict = base.to_vec();
    strict.push("--require-feasible");
    assert_eq!(code(&run(&strict)), 3);
}

#[test]
fn sweep_and_beampattern_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.cfg");
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--param", "omega_dbm",
        "--values", "-40,-30", "--trials", "2", "--workers", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(header(&out.join("sweep.csv")), "sweep_value,mean_sum_rate,std_sum_rate,feasibility_rate,mean_wall_time_s");

    let out = dir.path().join("bp");
    let o = run(&["beampattern", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--angle-step", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(header(&out.join("beampattern.csv")), "angle_deg,gain_watts,gain_dbm");
    assert_eq!(fs::read_to_string(out.join("beampattern.csv")).unwrap().lines().count(), 182);

    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--param", "num_antennas", "--values", "32"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn trials_produce_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.cfg");
    let out = dir.path().join("t");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "3", "--workers", "3", "--method", "cg"]);
    assert_eq!(code(&o), 0);
    let s = summary_without_time(&out.join("summary.json"));
    assert_eq!(s["aggregate"]["trials"], 3);
    assert_eq!(s["method"], "cg");
    assert_eq!(fs::read_to_string(out.join("trials.csv")).unwrap().lines().count(), 4);
}

#[test]
fn gradcheck_passes_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["gradcheck", "--out", out, "--antennas", "9", "--trials", "5"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    let o = run(&["gradcheck", "--out", out, "--antennas", "9", "--trials", "5", "--corrupt", "1.01"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn convergence_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.cfg");
    let o = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(dir.path().join("trace.csv")).unwrap().lines().count() > 2);
}
