//! Block recovery routines: regular and penalized `ℓ₁` recovery, the
//! non-Euclidean Block Matching Pursuit, the group-Lasso baseline, and the
//! error bounds that accompany them.

mod bounds;
mod lasso;
mod nebmp;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use bounds::{error_bound, error_bound_from, factor_exponent, BoundParams, BoundVariant, ErrorBound};
pub use lasso::{group_lasso, group_lasso_with, lasso_lambdas, LassoOptions};
pub use nebmp::{nebmp, write_nebmp_log_csv, NebmpParams, NebmpStep};

use crate::blockmodel::{Exponent, RepresentationStructure};
use crate::error::{Error, Result};
use crate::optim::{self, ConeProgram, LinExpr, SolveReport, SolverOptions};
use crate::synthesis::NoiseModel;
use crate::tolerances;

/// Observation `y = Ax + u + ξ` of a signal under a representation structure.
#[derive(Clone, Debug)]
pub struct Observation {
    pub y: DVector<f64>,
    pub a: DMatrix<f64>,
    pub rs: RepresentationStructure,
    pub noise: Option<NoiseModel>,
}

impl Observation {
    pub fn new(
        y: DVector<f64>,
        a: DMatrix<f64>,
        rs: RepresentationStructure,
        noise: Option<NoiseModel>,
    ) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(Error::Dimension(format!("y has length {}, A has {} rows", y.len(), a.nrows())));
        }
        if a.ncols() != rs.signal_dim() {
            return Err(Error::Dimension(format!(
                "A has {} columns, structure expects signals of length {}",
                a.ncols(),
                rs.signal_dim()
            )));
        }
        if let Some(nm) = &noise {
            if nm.dim() != y.len() {
                return Err(Error::Dimension(format!(
                    "noise model is {}-dimensional, y has length {}",
                    nm.dim(),
                    y.len()
                )));
            }
        }
        Ok(Self { y, a, rs, noise })
    }

    /// `y = Ax` with no noise.
    pub fn noiseless(a: DMatrix<f64>, rs: RepresentationStructure, x: &DVector<f64>) -> Result<Self> {
        if x.len() != a.ncols() {
            return Err(Error::Dimension(format!("x has length {}, A has {} columns", x.len(), a.ncols())));
        }
        let y = &a * x;
        Self::new(y, a, rs, None)
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    fn check_contrast(&self, h: &DMatrix<f64>) -> Result<()> {
        if h.nrows() != self.m() || h.ncols() != self.rs.dim() {
            return Err(Error::Dimension(format!(
                "H must be {}×{}, got {}×{}",
                self.m(),
                self.rs.dim(),
                h.nrows(),
                h.ncols()
            )));
        }
        Ok(())
    }

    /// `L_∞(Hᵀ(y − Az))` under the block norms of the structure.
    pub fn fit(&self, h: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
        let r = h.transpose() * (&self.y - &self.a * z);
        self.rs.lp(r.as_slice(), Exponent::Inf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routine {
    Regular,
    Penalized,
    Nebmp,
    GroupLasso,
}

impl Routine {
    pub fn tag(self) -> &'static str {
        match self {
            Routine::Regular => "regular",
            Routine::Penalized => "penalized",
            Routine::Nebmp => "nebmp",
            Routine::GroupLasso => "group_lasso",
        }
    }
}

impl fmt::Display for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Routine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(Routine::Regular),
            "penalized" => Ok(Routine::Penalized),
            "nebmp" => Ok(Routine::Nebmp),
            "group_lasso" | "lasso" => Ok(Routine::GroupLasso),
            _ => Err(Error::InvalidArgument(format!("unknown routine '{s}'"))),
        }
    }
}

/// Output of a recovery routine.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub routine: Routine,
    #[serde(with = "crate::io::vector")]
    pub x_hat: DVector<f64>,
    /// `B·x̂`
    #[serde(with = "crate::io::vector")]
    pub w_hat: DVector<f64>,
    /// criterion value at `x̂`; `L₁(Bx̂)` for the greedy routine
    pub objective: f64,
    pub iterations: usize,
    pub bound: Option<ErrorBound>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub solve: Option<SolveReport>,
    #[serde(skip)]
    pub log: Vec<NebmpStep>,
}

impl RecoveryResult {
    fn new(
        routine: Routine,
        x_hat: DVector<f64>,
        rs: &RepresentationStructure,
        objective: f64,
        iterations: usize,
    ) -> Self {
        let w_hat = rs.represent(&x_hat);
        Self {
            routine,
            x_hat,
            w_hat,
            objective,
            iterations,
            bound: None,
            warnings: Vec::new(),
            solve: None,
            log: Vec::new(),
        }
    }

    pub fn with_bound(mut self, bound: ErrorBound) -> Self {
        self.bound = Some(bound);
        self
    }

    /// `L_p(B(x̂ − x))`.
    pub fn error(&self, x: &DVector<f64>, rs: &RepresentationStructure, p: Exponent) -> f64 {
        let diff = &self.w_hat - rs.represent(x);
        rs.lp(diff.as_slice(), p)
    }
}

/// Shared part of the two `ℓ₁` programs: variables `z`, block epigraphs of
/// `Bz` and the block rows of `Hᵀ(y − Az)`.
struct L1Program {
    program: ConeProgram,
    z: usize,
    l1: LinExpr,
    fit_blocks: Vec<Vec<LinExpr>>,
}

fn l1_program(obs: &Observation, h: &DMatrix<f64>) -> L1Program {
    let rs = &obs.rs;
    let n = obs.n();
    let mut program = ConeProgram::new();
    let z = program.add_vars(n);
    let mut l1 = LinExpr::zero();
    for k in 0..rs.n_blocks() {
        let rows: Vec<LinExpr> = rs
            .block_range(k)
            .map(|i| {
                if rs.is_identity() {
                    LinExpr::var(z + i)
                } else {
                    (0..n).fold(LinExpr::zero(), |e, j| e.term(z + j, rs.b()[(i, j)]))
                }
            })
            .collect();
        let t = program.norm_epigraph("l1", &rows, rs.block_norm(k));
        l1 = l1.term(t, 1.0);
    }
    let ht = h.transpose();
    let hta = &ht * &obs.a;
    let hty = &ht * &obs.y;
    let fit_blocks = (0..rs.n_blocks())
        .map(|k| {
            rs.block_range(k)
                .map(|i| (0..n).fold(LinExpr::constant(hty[i]), |e, j| e.term(z + j, -hta[(i, j)])))
                .collect()
        })
        .collect();
    L1Program { program, z, l1, fit_blocks }
}

fn finish(
    obs: &Observation,
    routine: Routine,
    p: &L1Program,
    opts: &SolverOptions,
    objective: impl Fn(&DVector<f64>) -> f64,
) -> Result<RecoveryResult> {
    let rep = optim::solve(&p.program, opts)?.into_optimal()?;
    let x_hat = DVector::from_column_slice(&rep.primal[p.z..p.z + obs.n()]);
    let value = objective(&x_hat);
    let mut res = RecoveryResult::new(routine, x_hat, &obs.rs, value, rep.iterations as usize);
    res.solve = Some(rep);
    Ok(res)
}

/// `min L₁(Bz)` subject to `L_∞(Hᵀ(y − Az)) ≤ ρ`.
pub fn recover_regular(obs: &Observation, h: &DMatrix<f64>, rho: f64) -> Result<RecoveryResult> {
    recover_regular_with(obs, h, rho, &SolverOptions::with_tol(tolerances::LP_TOL))
}

pub fn recover_regular_with(
    obs: &Observation,
    h: &DMatrix<f64>,
    rho: f64,
    opts: &SolverOptions,
) -> Result<RecoveryResult> {
    obs.check_contrast(h)?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("ρ must be a finite nonnegative number, got {rho}")));
    }
    let mut p = l1_program(obs, h);
    for (k, rows) in p.fit_blocks.iter().enumerate() {
        p.program.norm_le("fit", rows, obs.rs.block_norm(k), LinExpr::constant(rho));
    }
    p.program.minimize(p.l1.clone());
    finish(obs, Routine::Regular, &p, opts, |x| obs.rs.lp(obs.rs.represent(x).as_slice(), Exponent::ONE))
}

/// `min L₁(Bz) + λ·L_∞(Hᵀ(y − Az))`.
pub fn recover_penalized(obs: &Observation, h: &DMatrix<f64>, lambda: f64) -> Result<RecoveryResult> {
    recover_penalized_with(obs, h, lambda, &SolverOptions::with_tol(tolerances::LP_TOL))
}

pub fn recover_penalized_with(
    obs: &Observation,
    h: &DMatrix<f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<RecoveryResult> {
    obs.check_contrast(h)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ must be a finite positive number, got {lambda}")));
    }
    let mut p = l1_program(obs, h);
    let tau = p.program.add_var();
    for (k, rows) in p.fit_blocks.iter().enumerate() {
        p.program.norm_le("fit", rows, obs.rs.block_norm(k), LinExpr::var(tau));
    }
    p.program.minimize(p.l1.clone().term(tau, lambda));
    finish(obs, Routine::Penalized, &p, opts, |x| {
        obs.rs.lp(obs.rs.represent(x).as_slice(), Exponent::ONE) + lambda * obs.fit(h, x)
    })
}
