//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line; the process fails if any criterion does.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use online_riccati::bench::{
    gen_system, probe_boundedness, regret_decomposition, run_trial, ExperimentConfig, ExperimentKind, ProbeConfig,
    RegretLedger,
};
use online_riccati::lyapunov::{solve_stein_transposed_with, stein_residual_transposed, SteinBackend};
use online_riccati::matcore::{max_eig_sym, op_norm, spectral_radius};
use online_riccati::online::{scalar_bound, OnlineParams, OnlineState};
use online_riccati::plant::{propagate_cov, rollout_step, steady_covariance, SystemModel};
use online_riccati::riccati::{
    dare_residual, hewer_step, riccati_step, solve_dare, stabilizing_gain, DareOptions, DareProblem,
};
use online_riccati::stability::{cert_from_value_matrix, covariance_decay_bound, verify_cert, StabilityParams};
use online_riccati::{Mat, SymMat};

const SEEDS: u64 = 10;

fn report(id: usize, name: &str, ok: bool, detail: String, elapsed: Duration) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {verdict}: {name} ({detail}; {:.2}s)", elapsed.as_secs_f64());
}

fn s(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

fn rel(a: &Mat, b: &Mat) -> f64 {
    op_norm(&(a - b)).unwrap() / op_norm(b).unwrap().max(1.0)
}

fn runs(kind: ExperimentKind) -> &'static [RegretLedger] {
    static ONE: OnceLock<Vec<RegretLedger>> = OnceLock::new();
    static TWO: OnceLock<Vec<RegretLedger>> = OnceLock::new();
    static THREE: OnceLock<Vec<RegretLedger>> = OnceLock::new();
    let cell = match kind {
        ExperimentKind::One => &ONE,
        ExperimentKind::Two => &TWO,
        ExperimentKind::Three => &THREE,
        ExperimentKind::Constant => unreachable!("not part of the gate"),
    };
    cell.get_or_init(|| {
        (0..SEEDS)
            .map(|seed| {
                let mut cfg = ExperimentConfig::preset(kind);
                cfg.seed = seed;
                run_trial(&cfg, 0).expect("experiment run")
            })
            .collect()
    })
}

fn all_runs() -> Vec<&'static RegretLedger> {
    [ExperimentKind::One, ExperimentKind::Two, ExperimentKind::Three]
        .into_iter()
        .flat_map(|k| runs(k).iter())
        .collect()
}

fn criterion_01_scalar_dare() {
    let start = Instant::now();
    let prob = DareProblem::new(s(2.0), s(1.0), SymMat::identity(1), SymMat::identity(1)).unwrap();
    let sol = solve_dare(&prob, &DareOptions::default()).unwrap();
    let sqrt5 = 5f64.sqrt();
    let dp = (sol.p[(0, 0)] - (2.0 + sqrt5)).abs();
    let dk = (sol.k[(0, 0)] - (1.0 + sqrt5) / 2.0).abs();
    let drho = (spectral_radius(&prob.closed_loop(&sol.k)).unwrap() - (3.0 - sqrt5) / 2.0).abs();
    let elapsed = start.elapsed();
    let ok = dp <= 1e-9 && dk <= 1e-9 && drho <= 1e-9 && elapsed < Duration::from_secs(1);
    report(1, "scalar DARE closed form", ok, format!("|dP|={dp:.1e}, |dK|={dk:.1e}, |drho|={drho:.1e}"), elapsed);
    assert!(ok);
}

fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymMat::new(g.transpose() * g + Mat::identity(n, n) * 0.1).unwrap()
}

/// Forward recursion from `P₀ = Q` until the step reaches round-off level and stops shrinking.
fn value_iteration(prob: &DareProblem) -> (SymMat, usize) {
    let mut p = prob.q.clone();
    let (mut best, mut since_best) = (f64::INFINITY, 0);
    for it in 1..=1_000_000 {
        let next = riccati_step(&p, prob).unwrap();
        let step = op_norm(&(next.as_mat() - p.as_mat())).unwrap() / op_norm(next.as_mat()).unwrap().max(1.0);
        p = next;
        if step < best {
            (best, since_best) = (step, 0);
        } else {
            since_best += 1;
        }
        if step <= 1e-15 || (best <= 1e-12 && since_best >= 50) {
            return (p, it);
        }
    }
    (p, usize::MAX)
}

fn criterion_02_solver_cross_validation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = DareOptions::default();
    let (mut worst_gap, mut worst_iters, mut failures) = (0.0f64, 0usize, 0usize);
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=4);
        let sys = gen_system(n, m, &mut rng).unwrap();
        let prob = DareProblem::new(sys.a.clone(), sys.b.clone(), random_pd(n, &mut rng), random_pd(m, &mut rng)).unwrap();
        let (mut k, _) = stabilizing_gain(&prob, &opts).unwrap();
        let mut hewer = None;
        for it in 1..=50 {
            let (p, next) = hewer_step(&k, &prob).unwrap();
            k = next;
            if dare_residual(&p, &prob).unwrap() <= 1e-12 * op_norm(p.as_mat()).unwrap().max(1.0) {
                hewer = Some((p, it));
                break;
            }
        }
        let Some((p_hewer, iters)) = hewer else {
            failures += 1;
            continue;
        };
        worst_iters = worst_iters.max(iters);
        let (p_vi, _) = value_iteration(&prob);
        worst_gap = worst_gap.max(rel(p_vi.as_mat(), p_hewer.as_mat()));
    }
    let elapsed = start.elapsed();
    let ok = failures == 0 && worst_gap <= 1e-8 && worst_iters <= 12 && elapsed < Duration::from_secs(30);
    report(
        2,
        "value iteration vs Newton-Hewer",
        ok,
        format!("max rel gap {worst_gap:.1e}, max Hewer iterations {worst_iters}, unconverged {failures}"),
        elapsed,
    );
    assert!(ok);
}

fn criterion_03_stein_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_res, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let raw = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rho = spectral_radius(&raw).unwrap();
        let target = rng.random_range(0.0..=0.95);
        let f = if rho > 0.0 { raw * (target / rho) } else { raw };
        let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = SymMat::new(g.transpose() * g).unwrap();
        let vn = op_norm(v.as_mat()).unwrap().max(1.0);
        let direct = solve_stein_transposed_with(&f, &v, SteinBackend::Direct).unwrap();
        let doubling = solve_stein_transposed_with(&f, &v, SteinBackend::Doubling).unwrap();
        worst_res = worst_res
            .max(stein_residual_transposed(&f, &v, &direct) / vn)
            .max(stein_residual_transposed(&f, &v, &doubling) / vn);
        worst_gap = worst_gap.max(rel(direct.as_mat(), doubling.as_mat()));
    }
    let elapsed = start.elapsed();
    let ok = worst_res <= 1e-10 && worst_gap <= 1e-8 && elapsed < Duration::from_secs(30);
    report(3, "Stein residual and backend agreement", ok, format!("max scaled residual {worst_res:.1e}, max gap {worst_gap:.1e}"), elapsed);
    assert!(ok);
}

fn criterion_04_emitted_gains_stable() {
    let start = Instant::now();
    let ledgers = all_runs();
    let mut worst: f64 = 0.0;
    let mut broken = 0;
    for l in &ledgers {
        if l.online.failure.is_some() || l.diagnostics.len() != l.horizon() {
            broken += 1;
        }
        for r in &l.diagnostics {
            worst = worst.max(r.rho).max(r.rho_next);
        }
    }
    let elapsed = start.elapsed();
    let ok = broken == 0 && worst <= 1.0 - 1e-9 && elapsed < Duration::from_secs(300);
    report(4, "every emitted gain is stabilizing", ok, format!("{} runs, max rho {worst:.9}, failed runs {broken}", ledgers.len()), elapsed);
    assert!(ok);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_05_increment_decay() {
    let start = Instant::now();
    let t0 = 100;
    let mut worst_ratio: f64 = 0.0;
    let mut eq22_violations = 0;
    let ledgers = all_runs();
    for l in &ledgers {
        let d = &l.diagnostics;
        // record r holds ‖P_r − P_{r−1}‖, so t·‖P_{t+1} − P_t‖ is (r − 1)·dp at r = t + 1
        let scaled: Vec<f64> = d.iter().filter(|r| r.t > t0).map(|r| (r.t - 1) as f64 * r.dp_norm).collect();
        let max = scaled.iter().copied().fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(max / median(scaled));

        let m_hat = d.iter().skip(1).map(|r| r.t as f64 * r.dp_norm).fold(0.0, f64::max);
        let b_norm = op_norm(&l.system.b).unwrap();
        let kappa = d
            .iter()
            .map(|r| r.k_norm.max(r.closed_loop_norm))
            .fold(OnlineParams::kappa(&l.params), f64::max);
        let mu = d.iter().map(|r| r.rbar_min_eig).fold(f64::INFINITY, f64::min);
        let sigma = l.params.sigma;
        for w in d.windows(2).skip(1) {
            let t = w[0].t as f64;
            let bound = kappa / mu * (b_norm * m_hat + 2.0 * sigma) / t;
            if w[1].dk_norm > bound * (1.0 + 1e-9) {
                eq22_violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_ratio <= 10.0 && eq22_violations == 0;
    report(
        5,
        "t-scaled value increments bounded; gain increment bound",
        ok,
        format!("worst max/median {worst_ratio:.2}, gain-bound violations {eq22_violations}"),
        elapsed,
    );
    assert!(ok);
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn criterion_06_logarithmic_growth() {
    let start = Instant::now();
    let ledgers = runs(ExperimentKind::One);
    let r3 = mean(ledgers.iter().map(|l| l.checkpoint(1000).unwrap().regret_online.unwrap()));
    let r4 = mean(ledgers.iter().map(|l| l.checkpoint(10_000).unwrap().regret_online.unwrap()));
    let ratio = r4 / r3;
    let elapsed = start.elapsed();
    let ok = r3 > 0.0 && ratio <= 2.5 && elapsed < Duration::from_secs(300);
    report(6, "R(10^4) <= 2.5 R(10^3)", ok, format!("mean R(1e3)={r3:.4e}, mean R(1e4)={r4:.4e}, ratio {ratio:.3}"), elapsed);
    assert!(ok);
}

fn criterion_07_baseline_orderings() {
    let start = Instant::now();
    let avg = |ls: &[RegretLedger], pick: fn(&RegretLedger) -> Option<f64>| {
        mean(ls.iter().map(|l| pick(l).expect("series completed") / l.horizon() as f64))
    };
    let one = runs(ExperimentKind::One);
    let on1 = avg(one, |l| l.final_checkpoint().regret_online);
    let fll1 = avg(one, |l| l.final_checkpoint().regret_fll);
    let two = runs(ExperimentKind::Two);
    let on2 = avg(two, |l| l.final_checkpoint().regret_online);
    let rec2 = avg(two, |l| l.final_checkpoint().regret_recent);
    let ratio = on1 / fll1;
    let elapsed = start.elapsed();
    let ok = (0.5..=2.0).contains(&ratio) && on2 < rec2;
    report(
        7,
        "baseline orderings",
        ok,
        format!("exp1 online/fll avg regret {ratio:.3}; exp2 online {on2:.4e} vs recent {rec2:.4e}"),
        elapsed,
    );
    assert!(ok);
}

fn criterion_08_scalar_boundedness() {
    let start = Instant::now();
    let report_runs = probe_boundedness(&ProbeConfig::scalar(100)).unwrap();
    let mut exceed = 0;
    let mut worst: f64 = 0.0;
    for t in &report_runs.trials {
        let bound = t.bound.expect("scalar bound");
        worst = worst.max(t.max_after_first / bound);
        if t.failure.is_some() || t.max_after_first > bound * (1.0 + 1e-12) {
            exceed += 1;
        }
    }
    let nu = scalar_bound(2.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let sys = SystemModel::with_identity_noise(s(2.0), s(1.0)).unwrap();
    let k1 = s((1.0 + 5f64.sqrt()) / 2.0);
    let mut state = OnlineState::new(sys, k1, OnlineParams::new(1.0, 2.0, nu, 200).unwrap()).unwrap();
    let mut max_p: f64 = 0.0;
    for _ in 0..200 {
        max_p = max_p.max(state.observe(&SymMat::identity(1), &SymMat::identity(1)).unwrap().p_max_eig);
    }
    let elapsed = start.elapsed();
    let ok = exceed == 0
        && (nu - 5.0).abs() <= 1e-12
        && (max_p - (2.0 + 5f64.sqrt())).abs() <= 1e-9
        && max_p <= nu
        && elapsed < Duration::from_secs(30);
    report(
        8,
        "scalar P_t stays below the closed-form bound",
        ok,
        format!("runs over bound {exceed}/100, worst max/bound {worst:.4}; fixed instance nu={nu}, max P={max_p:.10}"),
        elapsed,
    );
    assert!(ok);
}

fn criterion_09_regret_decomposition() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut missing = 0;
    for l in runs(ExperimentKind::One) {
        let parts = regret_decomposition(l).unwrap();
        for h in [100, 1000, 10_000] {
            match parts.iter().find(|d| d.horizon == h) {
                Some(d) => {
                    worst = worst.max(d.relative_error());
                    let cp = l.checkpoint(h).unwrap();
                    if cp.comparator.total <= cp.comparator.total_star {
                        worst_gap = worst_gap.max(d.comparator_gap);
                    }
                }
                None => missing += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = missing == 0 && worst <= 1e-6 && worst_gap <= 1e-9;
    report(
        9,
        "four-term regret decomposition",
        ok,
        format!("max relative error {worst:.1e}, max comparator-gap term {worst_gap:.2e}"),
        elapsed,
    );
    assert!(ok);
}

fn criterion_10_covariance_pipeline() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sys = gen_system(3, 2, &mut rng).unwrap();
    let prob = DareProblem::new(sys.a.clone(), sys.b.clone(), SymMat::identity(3), SymMat::identity(2)).unwrap();
    let k = solve_dare(&prob, &DareOptions::default()).unwrap().k;

    let steps = 4;
    let mut x_cov = SymMat::zeros(3);
    for _ in 0..steps {
        x_cov = propagate_cov(&x_cov, &k, &sys).unwrap();
    }
    let rollouts = 100_000;
    let mut samples = Vec::with_capacity(rollouts);
    for _ in 0..rollouts {
        let mut x = DVector::zeros(3);
        for _ in 0..steps {
            x = rollout_step(&x, &k, &sys, &mut rng).unwrap();
        }
        samples.push(x);
    }
    let mut se2 = 0.0;
    let mut err2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let prods: Vec<f64> = samples.iter().map(|x| x[i] * x[j]).collect();
            let m = mean(prods.iter().copied());
            let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (rollouts - 1) as f64;
            se2 += var / rollouts as f64;
            err2 += (m - x_cov[(i, j)]).powi(2);
        }
    }
    let mc_ok = err2.sqrt() <= 3.0 * se2.sqrt();

    // fixed certified policy: value matrix of unit forcing gives mu = 1
    let f = sys.closed_loop(&k);
    let p = solve_stein_transposed_with(&f, &SymMat::identity(3), SteinBackend::Auto).unwrap();
    let params = StabilityParams::new(1.0, max_eig_sym(&p)).unwrap();
    let cert = cert_from_value_matrix(&p, &sys.a, &sys.b, &k, &params).unwrap();
    let cert_ok = verify_cert(&cert, &sys.a, &sys.b).holds();
    let x_hat = steady_covariance(&k, &sys).unwrap();
    let x1 = SymMat::identity(3).scaled(5.0);
    let gap = op_norm(&(x1.as_mat() - x_hat.as_mat())).unwrap();
    let mut x = x1;
    let mut decay_failures = 0;
    for t in 1..=200 {
        x = propagate_cov(&x, &k, &sys).unwrap();
        let lhs = op_norm(&(x.as_mat() - x_hat.as_mat())).unwrap();
        if lhs > covariance_decay_bound(cert.kappa, cert.gamma, t, gap) * (1.0 + 1e-9) + 1e-12 {
            decay_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mc_ok && cert_ok && decay_failures == 0 && elapsed < Duration::from_secs(60);
    report(
        10,
        "Monte Carlo covariance and certified decay",
        ok,
        format!("MC error {:.3e} vs 3se {:.3e}; decay violations {decay_failures}", err2.sqrt(), 3.0 * se2.sqrt()),
        elapsed,
    );
    assert!(ok);
}

fn criterion_11_boundedness_probe() {
    let start = Instant::now();
    let report_runs = probe_boundedness(&ProbeConfig::default()).unwrap();
    let flagged = report_runs.flagged();
    let worst = report_runs.trials.iter().map(|t| t.max_eig).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let ok = flagged == 0 && report_runs.trials.len() == 100;
    report(11, "n=7, m=5 boundedness probe", ok, format!("flagged {flagged}/100, largest max eig {worst:.3e}"), elapsed);
    assert!(ok);
}

fn main() {
    let criteria: [(usize, fn()); 11] = [
        (1, criterion_01_scalar_dare),
        (2, criterion_02_solver_cross_validation),
        (3, criterion_03_stein_solver),
        (4, criterion_04_emitted_gains_stable),
        (5, criterion_05_increment_decay),
        (6, criterion_06_logarithmic_growth),
        (7, criterion_07_baseline_orderings),
        (8, criterion_08_scalar_boundedness),
        (9, criterion_09_regret_decomposition),
        (10, criterion_10_covariance_pipeline),
        (11, criterion_11_boundedness_probe),
    ];
    let failed: Vec<usize> =
        criteria.iter().filter(|(_, f)| std::panic::catch_unwind(f).is_err()).map(|(id, _)| *id).collect();
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
