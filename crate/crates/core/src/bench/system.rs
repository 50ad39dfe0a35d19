use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{Mat, SymMat};
use crate::plant::SystemModel;
use crate::riccati::{solve_dare, stabilizing_gain, DareOptions, DareProblem};

const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    /// Entries of `A` i.i.d. `U[−a_range, a_range]`, of `B` i.i.d. `U[−b_range, b_range]`; `W = I`.
    RandomUniform { a_range: f64, b_range: f64 },
    /// Row lists. `W` defaults to the identity.
    Explicit {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Vec<Vec<f64>>>,
    },
}

impl Default for SystemSource {
    fn default() -> Self {
        SystemSource::RandomUniform { a_range: 3.0, b_range: 2.0 }
    }
}

pub(crate) fn rows_to_mat(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular list of rows")));
    }
    Ok(Mat::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

impl SystemSource {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            SystemSource::RandomUniform { a_range, b_range } => {
                if !(*a_range >= 0.0 && *b_range >= 0.0 && a_range.is_finite() && b_range.is_finite()) {
                    return Err(Error::Config("system ranges must be finite and nonnegative".into()));
                }
                Ok(())
            }
            SystemSource::Explicit { a, b, w } => {
                let a = rows_to_mat(a, "system.a")?;
                let b = rows_to_mat(b, "system.b")?;
                if a.shape() != (n, n) || b.shape() != (n, m) {
                    return Err(Error::Config(format!(
                        "explicit system is A {:?}, B {:?} but n={n}, m={m}",
                        a.shape(),
                        b.shape()
                    )));
                }
                if let Some(w) = w {
                    if rows_to_mat(w, "system.w")?.shape() != (n, n) {
                        return Err(Error::Config("system.w must be n x n".into()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn build<R: Rng + ?Sized>(&self, n: usize, m: usize, rng: &mut R) -> Result<SystemModel> {
        match self {
            SystemSource::RandomUniform { a_range, b_range } => gen_system_in(n, m, *a_range, *b_range, rng),
            SystemSource::Explicit { a, b, w } => {
                self.validate(n, m)?;
                let a = rows_to_mat(a, "system.a")?;
                let b = rows_to_mat(b, "system.b")?;
                let w = match w {
                    Some(w) => SymMat::new(rows_to_mat(w, "system.w")?)?,
                    None => SymMat::identity(n),
                };
                let sys = SystemModel::new(a, b, w).map_err(|e| Error::Config(e.to_string()))?;
                if !is_admissible(&sys.a, &sys.b) {
                    return Err(Error::NotStabilizable("explicit system admits no stabilizing gain".into()));
                }
                Ok(sys)
            }
        }
    }
}

/// Whether `solve_dare(A, B, I, I)` succeeds.
pub fn is_admissible(a: &Mat, b: &Mat) -> bool {
    let n = a.nrows();
    let m = b.ncols();
    DareProblem::new(a.clone(), b.clone(), SymMat::identity(n), SymMat::identity(m))
        .and_then(|p| solve_dare(&p, &DareOptions::default()))
        .is_ok()
}

/// Random stabilizable system with `A ~ U[−3, 3]`, `B ~ U[−2, 2]` entrywise and `W = I`.
pub fn gen_system<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SystemModel> {
    gen_system_in(n, m, 3.0, 2.0, rng)
}

fn gen_system_in<R: Rng + ?Sized>(n: usize, m: usize, a_range: f64, b_range: f64, rng: &mut R) -> Result<SystemModel> {
    if n == 0 || m == 0 {
        return Err(Error::Generation("dimensions must be positive".into()));
    }
    let mut draw = |range: f64| if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 };
    for _ in 0..MAX_REJECTIONS {
        let a = Mat::from_fn(n, n, |_, _| draw(a_range));
        let b = Mat::from_fn(n, m, |_, _| draw(b_range));
        if is_admissible(&a, &b) {
            return SystemModel::with_identity_noise(a, b);
        }
    }
    Err(Error::Generation(format!("{MAX_REJECTIONS} consecutive draws were not stabilizable")))
}

/// How the first gain `K₁` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGain {
    /// `K⋆` of `(A, B, I, I)`.
    DareIdentity,
    /// First stabilizing gain of value iteration on `(A, B, I, I)`.
    Bootstrap,
    /// `K⋆` for a Wishart cost pair drawn from the initialization stream.
    RandomDare,
    Explicit { k: Vec<Vec<f64>> },
}

impl InitialGain {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if let InitialGain::Explicit { k } = self {
            if rows_to_mat(k, "initial.gain.k")?.shape() != (m, n) {
                return Err(Error::Config("initial gain must be m x n".into()));
            }
        }
        Ok(())
    }
}

pub fn initial_gain<R: Rng + ?Sized>(choice: &InitialGain, sys: &SystemModel, rng: &mut R) -> Result<Mat> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let opts = DareOptions::default();
    let unit = || DareProblem::new(sys.a.clone(), sys.b.clone(), SymMat::identity(n), SymMat::identity(m));
    match choice {
        InitialGain::DareIdentity => Ok(solve_dare(&unit()?, &opts)?.k),
        InitialGain::Bootstrap => Ok(stabilizing_gain(&unit()?, &opts)?.0),
        InitialGain::RandomDare => {
            let dof = 20usize.max(n).max(m);
            let pair = super::costs::CostGenerator::new(super::CostKind::Wishart { dof }, n, m)?.next(rng)?;
            let prob = DareProblem::new(sys.a.clone(), sys.b.clone(), pair.q, pair.r)?;
            Ok(solve_dare(&prob, &opts)?.k)
        }
        InitialGain::Explicit { k } => rows_to_mat(k, "initial.gain.k"),
    }
}
