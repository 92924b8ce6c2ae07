use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{add_contrast_vars, h_from_primal, reduce, v_entry};
use crate::blockmodel::{spectral_norm, BlockNorm, Exponent, RepresentationStructure};
use crate::conditions::Certificate;
use crate::error::{Error, Result};
use crate::optim::{self, ConeProgram, LinExpr, SolverOptions};
use crate::tolerances;

/// Observation noise `u + ξ` with `u ∈ {Ev : ‖v‖₂ ≤ 1}` and `ξ = Dη`, `η ~ N(0, I)`,
/// together with the confidence level `ε`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub e: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn new(e: DMatrix<f64>, d: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !e.is_square() || !d.is_square() || e.nrows() != d.nrows() {
            return Err(Error::Dimension(format!(
                "noise factors must be square and equal in size, got {}×{} and {}×{}",
                e.nrows(),
                e.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { e, d, epsilon })
    }

    /// White Gaussian noise `σ·η` with no deterministic part.
    pub fn gaussian(m: usize, sigma: f64, epsilon: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(m, m), DMatrix::identity(m, m) * sigma, epsilon)
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    fn check(&self, h: &DMatrix<f64>) -> Result<()> {
        if h.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "H has {} rows, noise model is {}-dimensional",
                h.nrows(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Upper-tail standard normal quantile: the `z` with `P(N(0,1) > z) = δ`.
pub fn erfinv_upper(delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "tail probability must lie in (0, 1)");
    std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * delta)
}

fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// `ρ = max_i ‖Eᵀhᵢ‖₂ + ErfInv(ε/(2N))·‖Dᵀhᵢ‖₂` over the columns `hᵢ` of `H`.
pub fn rho_epsilon(h: &DMatrix<f64>, noise: &NoiseModel) -> Result<f64> {
    noise.check(h)?;
    if h.ncols() == 0 {
        return Ok(0.0);
    }
    let z = erfinv_upper(noise.epsilon / (2.0 * h.ncols() as f64));
    let eh = column_norms(&(noise.e.transpose() * h));
    let dh = column_norms(&(noise.d.transpose() * h));
    Ok(eh.iter().zip(&dh).map(|(a, b)| a + z * b).fold(0.0, f64::max))
}

/// Union-bound radius for `L_∞(Hᵀ(u + ξ))` under the structure's block norms.
///
/// With `c = ErfInv(ε/(2N))`, all `|hᵢᵀξ| ≤ c‖Dᵀhᵢ‖₂` hold jointly with
/// probability `≥ 1 − ε`; block `k` then contributes
/// `sup_u ‖H[k]ᵀu‖ + ‖(c‖Dᵀh^{kt}‖₂)_t‖_(k)`. For `ℓ∞` blocks this is [`rho_epsilon`];
/// for `ℓ1` blocks the deterministic part is bounded by `Σ_t ‖Eᵀh^{kt}‖₂`.
pub fn rho_epsilon_blocks(h: &DMatrix<f64>, rs: &RepresentationStructure, noise: &NoiseModel) -> Result<f64> {
    noise.check(h)?;
    if h.ncols() != rs.dim() {
        return Err(Error::Dimension(format!("H has {} columns, structure has {}", h.ncols(), rs.dim())));
    }
    let z = erfinv_upper(noise.epsilon / (2.0 * h.ncols() as f64));
    let eth = noise.e.transpose() * h;
    let eh = column_norms(&eth);
    let dh: Vec<f64> = column_norms(&(noise.d.transpose() * h)).into_iter().map(|v| z * v).collect();
    let mut rho = 0.0f64;
    for k in 0..rs.n_blocks() {
        let r = rs.block_range(k);
        let norm = rs.block_norm(k);
        let det = match norm {
            BlockNorm::Linf => eh[r.clone()].iter().fold(0.0, |m: f64, v| m.max(*v)),
            BlockNorm::L1 => eh[r.clone()].iter().sum(),
            BlockNorm::L2 => spectral_norm(&eth.columns(r.start, r.len()).into_owned()),
        };
        rho = rho.max(det + norm.apply(&dh[r]));
    }
    Ok(rho)
}

/// Empirical `(1−ε)`-quantile of `max_k [sup_u ‖H[k]ᵀu‖ + ‖H[k]ᵀξ‖_(k)]`.
///
/// This is an estimate, not a guarantee.
pub fn rho_monte_carlo<R: Rng>(
    h: &DMatrix<f64>,
    rs: &RepresentationStructure,
    noise: &NoiseModel,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    noise.check(h)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let eth = noise.e.transpose() * h;
    let eh = column_norms(&eth);
    let det: Vec<f64> = (0..rs.n_blocks())
        .map(|k| {
            let r = rs.block_range(k);
            match rs.block_norm(k) {
                BlockNorm::Linf => eh[r].iter().fold(0.0, |m: f64, v| m.max(*v)),
                BlockNorm::L1 => eh[r].iter().sum(),
                BlockNorm::L2 => spectral_norm(&eth.columns(r.start, r.len()).into_owned()),
            }
        })
        .collect();
    let hd = h.transpose() * &noise.d;
    let m = noise.dim();
    let mut values: Vec<f64> = (0..samples)
        .map(|_| {
            let eta = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let xi = &hd * eta;
            let mags = rs.magnitudes(xi.as_slice());
            mags.iter().zip(&det).map(|(a, b)| a + b).fold(0.0, f64::max)
        })
        .collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let idx = (((1.0 - noise.epsilon) * samples as f64).ceil() as usize).clamp(1, samples) - 1;
    Ok(values[idx])
}

/// Minimizes the noise radius `ρ` over contrasts whose residual satisfies
/// `‖V^{kℓ}‖_{∞,∞} ≤ κ/s` for all blocks (`ℓ∞` blocks, `q = ∞`).
pub fn synthesize_rho(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    s: usize,
    kappa: f64,
    noise: &NoiseModel,
) -> Result<Certificate> {
    if rs.require_uniform_norm()? != BlockNorm::Linf {
        return Err(Error::InvalidArgument("ρ-synthesis requires ℓ∞ blocks".into()));
    }
    rs.check_s(s)?;
    if !(0.0..0.5).contains(&kappa) {
        return Err(Error::InvalidArgument(format!("κ must lie in [0, ½), got {kappa}")));
    }
    if noise.dim() != a.nrows() {
        return Err(Error::Dimension("noise model does not match the number of observations".into()));
    }
    let red = reduce(a, rs)?;
    let (m, n) = (a.nrows(), rs.dim());
    let mut p = ConeProgram::new();
    let h_first = add_contrast_vars(&mut p, &red, n);
    let bound = kappa / s as f64;
    let mut rows = Vec::new();
    for a_row in 0..n {
        for k in 0..rs.n_blocks() {
            // ‖row a of V^{kℓ}‖₁ ≤ κ/s
            let exprs: Vec<LinExpr> = rs.block_range(k).map(|b| v_entry(h_first, &red.a_tilde, a_row, b)).collect();
            let first = p.add_vars(exprs.len());
            let mut sum = LinExpr::constant(-bound);
            for (i, e) in exprs.into_iter().enumerate() {
                rows.push(e.clone().term(first + i, -1.0));
                rows.push(e.negated().term(first + i, -1.0));
                sum = sum.term(first + i, 1.0);
            }
            rows.push(sum);
        }
    }
    p.le("row-l1-of-residual-blocks", rows);
    let rho = p.add_var();
    let z = erfinv_upper(noise.epsilon / (2.0 * n as f64));
    let e_zero = noise.e.iter().all(|v| *v == 0.0);
    let d_zero = noise.d.iter().all(|v| *v == 0.0);
    let mut budget_rows = Vec::with_capacity(n);
    for col in 0..n {
        let h_col = |mat: &DMatrix<f64>| -> Vec<LinExpr> {
            (0..m).map(|j| (0..m).fold(LinExpr::zero(), |e, i| e.term(h_first + col * m + i, mat[(i, j)]))).collect()
        };
        let mut total = LinExpr::var(rho).negated();
        if !e_zero {
            let t = p.norm_epigraph("uncertainty", &h_col(&noise.e), BlockNorm::L2);
            total = total.term(t, 1.0);
        }
        if !d_zero {
            let t = p.norm_epigraph("gaussian", &h_col(&noise.d), BlockNorm::L2);
            total = total.term(t, z);
        }
        budget_rows.push(total);
    }
    p.le("noise-budget", budget_rows);
    p.le("rho-nonnegative", vec![LinExpr::var(rho).negated()]);
    p.minimize(LinExpr::var(rho));
    let rep = optim::solve(&p, &SolverOptions::with_tol(tolerances::SOCP_TOL.min(1e-8)))?;
    let rep = rep.into_optimal()?;
    let h = h_from_primal(&rep.primal, h_first, m, n);
    let mut cert = Certificate::from_contrast(a, h, rs, s, Exponent::Inf, "synthesize_rho")?;
    cert.rho = Some(rho_epsilon(&cert.h, noise)?);
    cert.epsilon = Some(noise.epsilon);
    Ok(cert)
}
