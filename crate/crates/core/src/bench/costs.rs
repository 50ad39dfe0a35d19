use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_matrices;
use crate::matcore::{min_eig_sym, Mat, SymMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostKind {
    /// `Q = GᵀG`, `R = HᵀH` with `dof` rows of standard normals.
    Wishart { dof: usize },
    /// `Q = I`; the trailing `⌊m/2⌋` diagonal entries of `R` are a shared `r_t ~ U[low, high]`, the rest are 1.
    DiagUniform { low: f64, high: f64 },
    /// As [`CostKind::DiagUniform`] but `r_t` walks on the grid `low + k·step`,
    /// moving up with probability `p_up`, down with `p_down`, and staying put at the ends.
    DiagRandomWalk { low: f64, high: f64, step: f64, p_up: f64, p_down: f64 },
    /// Independent `U[low, high]` diagonal entries for both `Q` and `R`.
    BoxUniform { low: f64, high: f64 },
    Constant { q_scale: f64, r_scale: f64 },
    /// Alternating `Q_t`, `R_t` blocks read from a matrix file.
    Custom { path: PathBuf },
}

impl CostKind {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let range_ok = |low: f64, high: f64| low > 0.0 && low <= high && high.is_finite();
        match *self {
            CostKind::Wishart { dof } if dof < n.max(m) => Err(Error::Config(format!(
                "wishart degrees of freedom {dof} below dimension {}",
                n.max(m)
            ))),
            CostKind::DiagUniform { low, high } | CostKind::BoxUniform { low, high } if !range_ok(low, high) => {
                Err(Error::Config(format!("cost range [{low}, {high}] must satisfy 0 < low <= high")))
            }
            CostKind::DiagRandomWalk { low, high, step, p_up, p_down } => {
                if !range_ok(low, high) || !(step > 0.0) {
                    return Err(Error::Config("random walk needs 0 < low <= high and step > 0".into()));
                }
                if !(p_up >= 0.0 && p_down >= 0.0 && p_up + p_down <= 1.0) {
                    return Err(Error::Config("random walk probabilities must be nonnegative and sum to at most 1".into()));
                }
                Ok(())
            }
            CostKind::Constant { q_scale, r_scale } if !(q_scale > 0.0 && r_scale > 0.0) => {
                Err(Error::Config("constant cost scales must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostPair {
    pub q: SymMat,
    pub r: SymMat,
}

/// Stateful cost stream; the random walk and file-backed kinds carry a cursor.
#[derive(Debug, Clone)]
pub struct CostGenerator {
    kind: CostKind,
    n: usize,
    m: usize,
    walk: Option<(usize, usize)>,
    file: Vec<CostPair>,
    cursor: usize,
}

impl CostGenerator {
    pub fn new(kind: CostKind, n: usize, m: usize) -> Result<Self> {
        kind.validate(n, m)?;
        let mut file = Vec::new();
        if let CostKind::Custom { path } = &kind {
            let mats = read_matrices(path)?;
            if mats.len() % 2 != 0 {
                return Err(Error::Config(format!("{}: odd number of cost blocks", path.display())));
            }
            for pair in mats.chunks(2) {
                let q = SymMat::new(pair[0].clone())?;
                let r = SymMat::new(pair[1].clone())?;
                if q.dim() != n || r.dim() != m {
                    return Err(Error::Config(format!("{}: cost blocks do not match n={n}, m={m}", path.display())));
                }
                file.push(CostPair { q, r });
            }
        }
        Ok(Self { kind, n, m, walk: None, file, cursor: 0 })
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<CostPair> {
        let (n, m) = (self.n, self.m);
        let pair = match self.kind {
            CostKind::Wishart { dof } => CostPair { q: wishart(n, dof, rng)?, r: wishart(m, dof, rng)? },
            CostKind::DiagUniform { low, high } => {
                let r_t = rng.random_range(low..=high);
                CostPair { q: SymMat::identity(n), r: split_diagonal(m, r_t) }
            }
            CostKind::DiagRandomWalk { low, high, step, p_up, p_down } => {
                let top = ((high - low) / step + 1e-9).floor() as usize;
                let (k, _) = *self.walk.get_or_insert_with(|| (rng.random_range(0..=top), top));
                let u: f64 = rng.random();
                let next = if u < p_up {
                    if k < top { k + 1 } else { k }
                } else if u < p_up + p_down {
                    k.saturating_sub(1)
                } else {
                    k
                };
                self.walk = Some((next, top));
                let r_t = (low + k as f64 * step).clamp(low, high);
                CostPair { q: SymMat::identity(n), r: split_diagonal(m, r_t) }
            }
            CostKind::BoxUniform { low, high } => {
                let q: Vec<f64> = (0..n).map(|_| rng.random_range(low..=high)).collect();
                let r: Vec<f64> = (0..m).map(|_| rng.random_range(low..=high)).collect();
                CostPair { q: SymMat::from_diagonal(&q)?, r: SymMat::from_diagonal(&r)? }
            }
            CostKind::Constant { q_scale, r_scale } => CostPair {
                q: SymMat::identity(n).scaled(q_scale),
                r: SymMat::identity(m).scaled(r_scale),
            },
            CostKind::Custom { ref path } => {
                let pair = self.file.get(self.cursor).cloned().ok_or_else(|| {
                    Error::Config(format!("{}: cost stream exhausted after {} rounds", path.display(), self.cursor))
                })?;
                self.cursor += 1;
                pair
            }
        };
        Ok(pair)
    }
}

fn wishart<R: Rng + ?Sized>(dim: usize, dof: usize, rng: &mut R) -> Result<SymMat> {
    let g = Mat::from_fn(dof, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = SymMat::new(g.transpose() * g)?;
    if w.as_mat().clone().cholesky().is_none() {
        return Err(Error::Config(format!("wishart draw with {dof} degrees of freedom is singular")));
    }
    Ok(w)
}

/// First `⌈m/2⌉` diagonal entries 1, the rest `r_t`.
fn split_diagonal(m: usize, r_t: f64) -> SymMat {
    let ones = m.div_ceil(2);
    let d: Vec<f64> = (0..m).map(|i| if i < ones { 1.0 } else { r_t }).collect();
    SymMat::from_diagonal(&d).expect("positive diagonal")
}

pub fn generate_costs<R: Rng + ?Sized>(kind: &CostKind, n: usize, m: usize, horizon: usize, rng: &mut R) -> Result<Vec<CostPair>> {
    let mut generator = CostGenerator::new(kind.clone(), n, m)?;
    (0..horizon).map(|_| generator.next(rng)).collect()
}

/// `(μ, σ)` realized by a stream: the smallest eigenvalue and the largest trace over all `Q_t`, `R_t`.
pub fn cost_bounds(costs: &[CostPair]) -> (f64, f64) {
    let mut mu = f64::INFINITY;
    let mut sigma: f64 = 0.0;
    for c in costs {
        mu = mu.min(min_eig_sym(&c.q)).min(min_eig_sym(&c.r));
        sigma = sigma.max(c.q.trace()).max(c.r.trace());
    }
    (mu, sigma)
}
