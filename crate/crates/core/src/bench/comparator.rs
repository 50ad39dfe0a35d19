use crate::error::{Error, Result};
use crate::lyapunov::solve_stein;
use crate::matcore::{spectral_radius, Mat, SymMat};
use crate::plant::{propagate_with, stage_cost, SystemModel};
use crate::riccati::{solve_dare, solve_dare_from, DareOptions, DareProblem};

use super::costs::CostPair;
use super::ComparatorConfig;

/// Exact expected total cost `Σ_t (Q_t + KᵀR_tK)•X_t` of a fixed gain.
///
/// Writes `X_t = X̂ + D_t` with `D_{t+1} = F D_t Fᵀ` so the steady part is a
/// single trace product against summed costs and only the decaying transient
/// is accumulated round by round.
pub struct FixedCostEvaluator<'a> {
    sys: &'a SystemModel,
    costs: &'a [CostPair],
    x1: &'a SymMat,
    q_sum: Mat,
    r_sum: Mat,
    margin: f64,
}

impl<'a> FixedCostEvaluator<'a> {
    pub fn new(sys: &'a SystemModel, costs: &'a [CostPair], x1: &'a SymMat, margin: f64) -> Self {
        let (n, m) = (sys.state_dim(), sys.input_dim());
        let mut q_sum = Mat::zeros(n, n);
        let mut r_sum = Mat::zeros(m, m);
        for c in costs {
            q_sum += c.q.as_mat();
            r_sum += c.r.as_mat();
        }
        Self { sys, costs, x1, q_sum, r_sum, margin }
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    pub fn averages(&self) -> (SymMat, SymMat) {
        let t = self.costs.len() as f64;
        (SymMat::symmetrize(&self.q_sum / t), SymMat::symmetrize(&self.r_sum / t))
    }

    /// `None` when the gain is outside the admissible stable set.
    pub fn evaluate(&self, k: &Mat) -> Option<f64> {
        let f = self.sys.closed_loop(k);
        if !(spectral_radius(&f).ok()? < 1.0 - self.margin) {
            return None;
        }
        let x_hat = solve_stein(&f, &self.sys.w).ok()?;
        let kxk = k * x_hat.as_mat() * k.transpose();
        let mut total = self.q_sum.dot(x_hat.as_mat()) + self.r_sum.dot(&kxk);
        let mut d = self.x1.as_mat() - x_hat.as_mat();
        let floor = 1e-17 * x_hat.norm().max(f64::MIN_POSITIVE);
        for c in self.costs {
            let scale = d.norm();
            if scale <= floor {
                break;
            }
            total += c.q.dot(&d) + c.r.dot(&(k * &d * k.transpose()));
            d = &f * d * f.transpose();
        }
        total.is_finite().then_some(total)
    }

    /// Per-round expected costs by direct covariance propagation.
    pub fn exact_series(&self, k: &Mat) -> Vec<f64> {
        fixed_gain_costs(self.sys, k, self.costs, self.x1)
    }
}

pub(crate) fn fixed_gain_costs(sys: &SystemModel, k: &Mat, costs: &[CostPair], x1: &SymMat) -> Vec<f64> {
    let f = sys.closed_loop(k);
    let mut x = x1.clone();
    let mut out = Vec::with_capacity(costs.len());
    for c in costs {
        out.push(stage_cost(&x, &c.q, &c.r, k));
        x = propagate_with(&x, &f, &sys.w);
    }
    out
}

/// Compensated sum.
pub(crate) fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Nelder-Mead simplex minimization with standard coefficients.
///
/// Returns the best point, its value and the number of objective evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], scale: &[f64], iterations: usize) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += scale[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let (towards, base) = if fr < worst.1 { (&reflected, fr) } else { (&worst.0, worst.1) };
            let contracted = combine(&centroid, towards, 0.5);
            let fc = eval(&contracted, &mut evals);
            if fc < base {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &entry.0, 0.5);
                    let v = eval(&x, &mut evals);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals)
}

/// Best fixed gain in hindsight for one horizon.
#[derive(Debug, Clone)]
pub struct Comparator {
    pub horizon: usize,
    /// DARE gain of the averaged costs.
    pub k_star: Mat,
    pub p_star: SymMat,
    /// Exact total cost of `K⋆`.
    pub total_star: f64,
    /// Selected comparator `K†`.
    pub k_dagger: Mat,
    /// Exact total cost of `K†`.
    pub total: f64,
    /// The local search found a strictly better gain than `K⋆`.
    pub improved: bool,
    pub evaluations: usize,
}

/// Picks `K†` among `K⋆` and its local-search refinement by exact total cost.
pub fn comparator_fixed(
    sys: &SystemModel,
    costs: &[CostPair],
    x1: &SymMat,
    opts: &ComparatorConfig,
    warm: Option<&Mat>,
) -> Result<Comparator> {
    if costs.is_empty() {
        return Err(Error::Comparator("empty cost sequence".into()));
    }
    let eval = FixedCostEvaluator::new(sys, costs, x1, opts.margin);
    let (qbar, rbar) = eval.averages();
    let prob = DareProblem::new(sys.a.clone(), sys.b.clone(), qbar, rbar)?;
    let dare = DareOptions::default();
    let sol = match warm {
        Some(k0) => solve_dare_from(&prob, k0, &dare),
        None => solve_dare(&prob, &dare),
    }
    .map_err(|e| Error::Comparator(format!("DARE on averaged costs failed: {e}")))?;
    let total_star = neumaier(eval.exact_series(&sol.k));
    let mut best = (sol.k.clone(), total_star);
    let mut improved = false;
    let mut evaluations = 0;
    if opts.search && opts.iterations > 0 {
        let (m, n) = sol.k.shape();
        let spread = sol.k.amax().max(1e-3);
        let scale: Vec<f64> = sol.k.iter().map(|v| 0.05 * v.abs() + 0.01 * spread).collect();
        let objective = |x: &[f64]| eval.evaluate(&Mat::from_column_slice(m, n, x)).unwrap_or(f64::INFINITY);
        let (x, v, count) = nelder_mead(objective, sol.k.as_slice(), &scale, opts.iterations);
        evaluations = count;
        if v.is_finite() {
            let k = Mat::from_column_slice(m, n, &x);
            let total = neumaier(eval.exact_series(&k));
            if total < best.1 {
                best = (k, total);
                improved = true;
            }
        }
    }
    Ok(Comparator {
        horizon: costs.len(),
        k_star: sol.k,
        p_star: sol.p,
        total_star,
        k_dagger: best.0,
        total: best.1,
        improved,
        evaluations,
    })
}
