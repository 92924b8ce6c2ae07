use nalgebra::DVector;

use super::{Observation, RecoveryResult, Routine};
use crate::blockmodel::{spectral_norm, BlockNorm, RepresentationStructure};
use crate::error::{Error, Result};
use crate::tolerances;

#[derive(Clone, Copy, Debug)]
pub struct LassoOptions {
    pub max_iter: usize,
    /// bound on the sup-norm of the gradient mapping at termination
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { max_iter: 200_000, tol: tolerances::LASSO_STATIONARITY }
    }
}

/// Penalty levels `λ_k = c·(σ/m)(√n_k + 2√ln K)`.
///
/// A simple default scaling with block size and the number of blocks; the
/// constant `c` is left to the caller.
pub fn lasso_lambdas(rs: &RepresentationStructure, m: usize, sigma: f64, c: f64) -> Vec<f64> {
    let log_k = (rs.n_blocks() as f64).ln().max(0.0);
    rs.block_dims().iter().map(|&nk| c * sigma / m as f64 * ((nk as f64).sqrt() + 2.0 * log_k.sqrt())).collect()
}

/// `min (1/m)‖Az − y‖₂² + 2Σ_k λ_k‖z[k]‖₂` by accelerated proximal gradient.
pub fn group_lasso(obs: &Observation, lambdas: &[f64]) -> Result<RecoveryResult> {
    group_lasso_with(obs, lambdas, &LassoOptions::default())
}

pub fn group_lasso_with(obs: &Observation, lambdas: &[f64], opts: &LassoOptions) -> Result<RecoveryResult> {
    let rs = &obs.rs;
    if !rs.is_identity() || rs.block_norms().iter().any(|&r| r != BlockNorm::L2) {
        return Err(Error::InvalidArgument("group Lasso needs B = I and ℓ2 block norms".into()));
    }
    if lambdas.len() != rs.n_blocks() || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!("need {} finite nonnegative penalty levels", rs.n_blocks())));
    }
    let a = &obs.a;
    let m = obs.m() as f64;
    let n = obs.n();
    let lip = 2.0 / m * spectral_norm(a).powi(2);
    let objective = |z: &DVector<f64>| {
        let pen: f64 =
            (0..rs.n_blocks()).map(|k| lambdas[k] * z.rows(rs.block_range(k).start, rs.block_dims()[k]).norm()).sum();
        (a * z - &obs.y).norm_squared() / m + 2.0 * pen
    };
    if lip == 0.0 {
        let z = DVector::zeros(n);
        let f = objective(&z);
        return Ok(RecoveryResult::new(Routine::GroupLasso, z, rs, f, 0));
    }
    let grad = |z: &DVector<f64>| a.transpose() * (a * z - &obs.y) * (2.0 / m);
    let prox = |mut u: DVector<f64>| {
        for (k, &lambda) in lambdas.iter().enumerate() {
            let range = rs.block_range(k);
            let mut blk = u.rows_mut(range.start, range.len());
            let nrm = blk.norm();
            let thr = 2.0 * lambda / lip;
            if nrm <= thr {
                blk.fill(0.0);
            } else {
                blk *= 1.0 - thr / nrm;
            }
        }
        u
    };

    let mut x = DVector::zeros(n);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let x_new = prox(&y - grad(&y) / lip);
        // restart momentum when it points uphill
        let restart = (&y - &x_new).dot(&(&x_new - &x)) > 0.0;
        let t_new = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        y = if restart { x_new.clone() } else { &x_new + (&x_new - &x) * ((t - 1.0) / t_new) };
        x = x_new;
        t = t_new;
        let mapping = (&x - prox(&x - grad(&x) / lip)) * lip;
        if mapping.amax() <= opts.tol {
            converged = true;
            break;
        }
    }
    let f = objective(&x);
    let mut res = RecoveryResult::new(Routine::GroupLasso, x, rs, f, iterations);
    if !converged {
        res.warnings.push(format!("stationarity tolerance {} not reached in {} iterations", opts.tol, opts.max_iter));
    }
    Ok(res)
}
