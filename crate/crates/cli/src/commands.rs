use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use online_riccati::bench::{probe_boundedness, run_trial, AlgorithmSeries, RegretLedger};
use online_riccati::io::{format_matrix, fmt_float, read_matrices, write_matrices, CsvSink, Field};
use online_riccati::matcore::op_norm;
use online_riccati::riccati::{self, DareOptions, DareProblem};
use online_riccati::{Error, SymMat};

use crate::settings::{dump, experiment_config, probe_config};
use crate::{CommonArgs, Failure};

pub const ROUND_HEADER: [&str; 8] =
    ["t", "cost_online", "cost_comparator", "regret_cum", "dP_norm", "dK_norm", "rho_closed_loop", "pmax_eig"];

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish<W: Write>(sink: CsvSink<W>) -> Result<(), Failure> {
    sink.finish()?.flush().context("flushing output")?;
    Ok(())
}

pub fn solve_dare(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let mats = read_matrices(input)?;
    let [a, b, q, r] = <[_; 4]>::try_from(mats).map_err(|m: Vec<_>| {
        Error::Parse { line: 0, msg: format!("expected 4 matrix blocks (A, B, Q, R), found {}", m.len()) }
    })?;
    let prob = DareProblem::new(a, b, SymMat::new(q)?, SymMat::new(r)?)?;
    let sol = riccati::solve_dare(&prob, &DareOptions::default())?;
    println!("# P");
    print!("{}", format_matrix(sol.p.as_mat()));
    println!("# K");
    print!("{}", format_matrix(&sol.k));
    println!("# residual {}", fmt_float(sol.residual));
    println!("# iterations {} (bootstrap steps {})", sol.iterations, sol.bootstrap_steps);
    if let Some(path) = out {
        write_matrices(path, &[sol.p.as_mat(), &sol.k])?;
    }
    Ok(())
}

/// Writes per-round rows for one ledger. With `trial`, a leading trial column and the baseline columns are added.
fn write_rounds<W: Write>(sink: &mut CsvSink<W>, ledger: &RegretLedger, trial: Option<usize>) -> Result<(), Failure> {
    let rows = ledger.diagnostics.len().min(ledger.online.costs.len());
    let mut regret = 0.0;
    let baseline = |s: &Option<AlgorithmSeries>, i: usize| Field::from(s.as_ref().and_then(|s| s.costs.get(i).copied()));
    for (i, rec) in ledger.diagnostics.iter().take(rows).enumerate() {
        let (online, cmp) = (ledger.online.costs[i], ledger.comparator_costs[i]);
        regret += online - cmp;
        let mut fields = Vec::with_capacity(11);
        if let Some(k) = trial {
            fields.push(Field::from(k));
        }
        fields.extend([
            Field::from(rec.t),
            online.into(),
            cmp.into(),
            regret.into(),
            rec.dp_norm.into(),
            rec.dk_norm.into(),
            rec.rho.into(),
            rec.p_max_eig.into(),
        ]);
        if trial.is_some() {
            fields.push(baseline(&ledger.fll, i));
            fields.push(baseline(&ledger.recent, i));
        }
        sink.row(&fields)?;
    }
    Ok(())
}

fn online_failure(ledger: &RegretLedger) -> Result<(), Failure> {
    match &ledger.online.failure {
        Some(e) => Err(e.clone().into()),
        None => Ok(()),
    }
}

pub fn run_online(args: &CommonArgs, experiment: Option<&str>, verbose: u8) -> Result<(), Failure> {
    let mut cfg = experiment_config(args, experiment)?;
    if cfg.trials != 1 {
        return Err(Error::Config("run-online runs a single trial; use `bench` for several".into()).into());
    }
    cfg.baselines.fll = false;
    cfg.baselines.recent = false;
    if args.dump_config {
        return dump(&cfg, args.out.as_deref());
    }
    if verbose > 0 {
        eprintln!("running seed {} with horizon {} (n = {}, m = {})", cfg.seed, cfg.horizon, cfg.n, cfg.m);
    }
    let ledger = run_trial(&cfg, 0)?;
    let mut sink = CsvSink::new(output(args.out.as_deref())?, &ROUND_HEADER)?;
    write_rounds(&mut sink, &ledger, None)?;
    finish(sink)?;
    online_failure(&ledger)?;

    let cp = ledger.final_checkpoint();
    let k_last = ledger.online_gains.last().expect("at least one round");
    let gain_error = op_norm(&(k_last - &cp.comparator.k_star))?;
    eprintln!("horizon = {}", cp.horizon);
    eprintln!("regret = {}", cp.regret_online.map_or_else(|| "n/a".into(), fmt_float));
    eprintln!("comparator_total = {}", fmt_float(cp.comparator.total));
    if ledger.t_star <= cp.horizon {
        eprintln!("t_star = {} (reset {})", ledger.t_star, if ledger.reset_done { "done" } else { "pending" });
    } else {
        eprintln!("t_star = beyond horizon");
    }
    eprintln!("max_rho = {}", fmt_float(ledger.online.max_rho));
    eprintln!("final_gain_error = {}", fmt_float(gain_error));
    Ok(())
}

const SERIES_HEADER: [&str; 5] = ["trial", "t", "cost", "cost_comparator", "regret_cum"];
const SUMMARY_HEADER: [&str; 10] = [
    "trial",
    "horizon",
    "comparator_total",
    "comparator_improved",
    "regret_online",
    "regret_fll",
    "regret_recent",
    "t_star",
    "max_rho_online",
    "max_pmax_eig",
];

pub fn bench(args: &CommonArgs, experiment: Option<&str>, verbose: u8) -> Result<(), Failure> {
    let cfg = experiment_config(args, experiment)?;
    if args.dump_config {
        return dump(&cfg, args.out.as_deref());
    }
    let dir = args.out.clone().unwrap_or_else(|| "bench-output".into());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>, Failure> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };

    let mut header: Vec<&str> = vec!["trial"];
    header.extend(ROUND_HEADER);
    header.extend(["cost_fll", "cost_recent"]);
    let mut rounds = CsvSink::new(create("rounds.csv")?, &header)?;
    let mut series: Vec<(&str, CsvSink<BufWriter<File>>)> = Vec::new();
    for (name, on) in [("online", true), ("fll", cfg.baselines.fll), ("recent", cfg.baselines.recent)] {
        if on {
            series.push((name, CsvSink::new(create(&format!("{name}.csv"))?, &SERIES_HEADER)?));
        }
    }
    let mut summary = CsvSink::new(create("summary.csv")?, &SUMMARY_HEADER)?;
    let mut stdout_summary = CsvSink::new(io::stdout().lock(), &SUMMARY_HEADER)?;

    let mut first_failure = None;
    for trial in 0..cfg.trials {
        if verbose > 0 {
            eprintln!("trial {}/{}", trial + 1, cfg.trials);
        }
        let ledger = run_trial(&cfg, trial)?;
        write_rounds(&mut rounds, &ledger, Some(trial))?;
        for (name, sink) in &mut series {
            let s = match *name {
                "online" => Some(&ledger.online),
                "fll" => ledger.fll.as_ref(),
                _ => ledger.recent.as_ref(),
            };
            let Some(s) = s else { continue };
            let mut regret = 0.0;
            for (i, (c, cmp)) in s.costs.iter().zip(&ledger.comparator_costs).enumerate() {
                regret += c - cmp;
                sink.row(&[trial.into(), (i + 1).into(), (*c).into(), (*cmp).into(), regret.into()])?;
            }
            if let (Some(e), true) = (&s.failure, verbose > 0) {
                eprintln!("trial {trial}: {name} stopped early: {e}");
            }
        }
        for cp in &ledger.checkpoints {
            let row = [
                trial.into(),
                cp.horizon.into(),
                cp.comparator.total.into(),
                cp.comparator.improved.into(),
                cp.regret_online.into(),
                cp.regret_fll.into(),
                cp.regret_recent.into(),
                if ledger.t_star <= ledger.horizon() { ledger.t_star.into() } else { Field::Empty },
                ledger.online.max_rho.into(),
                ledger.max_p_eig().into(),
            ];
            summary.row(&row)?;
            if cp.horizon == ledger.horizon() {
                stdout_summary.row(&row)?;
            }
        }
        if first_failure.is_none() {
            first_failure = ledger.online.failure.clone();
        }
    }
    finish(rounds)?;
    for (_, sink) in series {
        finish(sink)?;
    }
    finish(summary)?;
    finish(stdout_summary)?;
    match first_failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn probe_bounds(args: &CommonArgs, verbose: u8) -> Result<(), Failure> {
    let cfg = probe_config(args)?;
    if args.dump_config {
        return dump(&cfg, args.out.as_deref());
    }
    if verbose > 0 {
        eprintln!("probing {} trials of horizon {} (n = {}, m = {})", cfg.trials, cfg.horizon, cfg.n, cfg.m);
    }
    let report = probe_boundedness(&cfg)?;
    let mut sink = CsvSink::new(
        output(args.out.as_deref())?,
        &["trial", "max_eig", "max_after_first", "bound", "flagged", "failure"],
    )?;
    for t in &report.trials {
        let failure = t.failure.as_ref().map_or(Field::Empty, |e| Field::Text(e.to_string()));
        sink.row(&[t.trial.into(), t.max_eig.into(), t.max_after_first.into(), t.bound.into(), t.flagged.into(), failure])?;
    }
    finish(sink)?;
    eprintln!("flagged = {} of {}", report.flagged(), report.trials.len());
    Ok(())
}
