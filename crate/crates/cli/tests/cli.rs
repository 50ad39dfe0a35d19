use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_online-riccati"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn summary_value(out: &Output, key: &str) -> f64 {
    let text = stderr(out);
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in {text}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn solve_dare_scalar() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "abqr.txt", "# scalar\n1 1\n2\n1 1\n1\n1 1\n1\n1 1\n1\n");
    let out_file = dir.path().join("pk.txt");
    let out = run(&["solve-dare", &input, "--out", out_file.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let p: f64 = text.lines().nth(2).unwrap().trim().parse().unwrap();
    assert!((p - 4.2360679775).abs() < 1e-10, "{text}");
    let mats = online_riccati::io::read_matrices(&out_file).unwrap();
    assert_eq!(mats.len(), 2);
    assert!((mats[1][(0, 0)] - 1.6180339887).abs() < 1e-10);
}

#[test]
fn solve_dare_malformed_file() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.txt", "1 1\n2\n1 1\nnope\n");
    let out = run(&["solve-dare", &input]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
    assert_eq!(code(&run(&["solve-dare", "/nonexistent/file"])), 1);
}

#[test]
fn solve_dare_unstabilizable() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "z.txt", "1 1\n2\n1 1\n0\n1 1\n1\n1 1\n1\n");
    assert_eq!(code(&run(&["solve-dare", &input])), 2);
}

#[test]
fn run_online_rejects_zero_horizon() {
    let out = run(&["run-online", "--horizon", "0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("horizon"));
}

#[test]
fn unknown_experiment_and_bad_flags() {
    assert_eq!(code(&run(&["bench", "--experiment", "4"])), 1);
    assert_eq!(code(&run(&["run-online", "--dims", "4"])), 1);
    assert_eq!(code(&run(&["run-online", "--no-such-flag"])), 1);
}

#[test]
fn unstable_explicit_gain_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.toml",
        "n = 1\nm = 1\n[costs]\nkind = \"constant\"\nq_scale = 1.0\nr_scale = 1.0\n\
         [system]\nsource = \"explicit\"\na = [[2.0]]\nb = [[1.0]]\n\
         [initial.gain]\nkind = \"explicit\"\nk = [[0.5]]\n",
    );
    let out = run(&["run-online", "--config", &cfg, "--horizon", "10", "--out", "/dev/null"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn run_online_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["run-online", "--seed", "17", "--horizon", "300", "--dims", "3,2", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,cost_online,cost_comparator,regret_cum,dP_norm,dK_norm,rho_closed_loop,pmax_eig"
    );
    assert_eq!(text.lines().count(), 301);
    let c = dir.path().join("c.csv");
    run(&["run-online", "--seed", "18", "--horizon", "300", "--dims", "3,2", "--out", c.to_str().unwrap()]);
    assert_ne!(fs::read(&c).unwrap(), fs::read(&a).unwrap());
}

#[test]
fn constant_costs_reach_dare_gain() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        "[costs]\nkind = \"constant\"\nq_scale = 2.0\nr_scale = 0.5\n[initial.gain]\nkind = \"bootstrap\"\n",
    );
    let out = run(&["run-online", "--config", &cfg, "--horizon", "200", "--dims", "3,2", "--out", "/dev/null"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(summary_value(&out, "final_gain_error") <= 1e-8);
}

fn assert_round_trip(args: &[&str]) {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.toml");
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--dump-config", "--out", first.to_str().unwrap()]);
    assert_eq!(code(&run(&a)), 0);
    let second = dir.path().join("second.toml");
    let out = run(&[args[0], "--config", first.to_str().unwrap(), "--dump-config", "--out", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&first).unwrap(), fs::read_to_string(&second).unwrap());
}

#[test]
fn dump_config_round_trips() {
    assert_round_trip(&["run-online", "--experiment", "3", "--seed", "18446744073709551615", "--dims", "5,2"]);
    assert_round_trip(&["bench", "--experiment", "2", "--trials", "4", "--horizon", "123"]);
    assert_round_trip(&["probe-bounds", "--dims", "1,1", "--trials", "7"]);
}

#[test]
fn dumped_seed_drives_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    run(&["run-online", "--seed", "5", "--horizon", "50", "--dims", "2,2", "--dump-config", "--out", cfg.to_str().unwrap()]);
    let a = run(&["run-online", "--config", cfg.to_str().unwrap()]);
    let b = run(&["run-online", "--seed", "5", "--horizon", "50", "--dims", "2,2"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn scalar_probe_fills_bound_column() {
    let out = run(&["probe-bounds", "--dims", "1,1", "--trials", "10", "--horizon", "200"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trial,max_eig,max_after_first,bound,flagged,failure");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        let after_first: f64 = r[2].parse().unwrap();
        let bound: f64 = r[3].parse().expect("bound column is filled");
        assert!(after_first <= bound * (1.0 + 1e-12));
        assert_eq!(r[4], "0");
    }
    assert!(stderr(&out).contains("flagged = 0 of 10"));
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn bench_writes_series_and_summary() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "bench",
        "--experiment",
        "2",
        "--horizon",
        "150",
        "--trials",
        "2",
        "--dims",
        "3,2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["online", "fll", "recent"] {
        let rows = csv_rows(&out_dir.join(format!("{name}.csv")));
        assert_eq!(rows[0], "trial,t,cost,cost_comparator,regret_cum");
        assert_eq!(rows.len(), 1 + 2 * 150);
    }
    let rounds = csv_rows(&out_dir.join("rounds.csv"));
    assert!(rounds[0].ends_with("pmax_eig,cost_fll,cost_recent"));
    assert_eq!(rounds.len(), 1 + 2 * 150);
    let summary = csv_rows(&out_dir.join("summary.csv"));
    // checkpoints 10, 100 and 150 for each trial
    assert_eq!(summary.len(), 1 + 2 * 3);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
}
