use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Observation, RecoveryResult, Routine};
use crate::blockmodel::{BlockNorm, Exponent};
use crate::error::{Error, Result};
use crate::linalg;

/// Parameters of the non-Euclidean Block Matching Pursuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NebmpParams {
    /// bound on every entry of `Ω`
    pub gamma_bar: f64,
    /// bound on `L_∞(Hᵀ(u + ξ))`
    pub rho: f64,
    pub s: usize,
    /// guess for `L₁(Bx − [Bx]^s)`
    pub upsilon: f64,
    pub iters: usize,
}

impl NebmpParams {
    /// `κ = sγ̄`.
    pub fn kappa(&self) -> f64 {
        self.s as f64 * self.gamma_bar
    }

    /// `α₀ = (L_{s,1}(Hᵀy) + sρ + υ)/(1 − sγ̄)`.
    pub fn alpha0(&self, ls1: f64) -> f64 {
        (ls1 + self.s as f64 * self.rho + self.upsilon) / (1.0 - self.kappa())
    }

    /// `α_∞ = (2sρ + υ)/(1 − 2sγ̄)`.
    pub fn alpha_inf(&self) -> f64 {
        (2.0 * self.s as f64 * self.rho + self.upsilon) / (1.0 - 2.0 * self.kappa())
    }

    /// `α_k = (2sγ̄)^k (α₀ − α_∞) + α_∞`.
    pub fn alpha_closed_form(&self, alpha0: f64, k: usize) -> f64 {
        let ai = self.alpha_inf();
        (2.0 * self.kappa()).powi(k as i32) * (alpha0 - ai) + ai
    }

    /// Guaranteed `L_p(Bv^{(t)} − Bx)` after `t` steps, given `L_{s,1}(Hᵀy)`.
    pub fn error_bound(&self, ls1: f64, p: Exponent, t: usize) -> f64 {
        let s = self.s as f64;
        let kappa = self.kappa();
        let limit = (2.0 * self.rho + self.upsilon / s) / (1.0 - 2.0 * kappa);
        let start = ((ls1 + self.upsilon) / s + self.rho) / (1.0 - kappa);
        s.powf(p.recip()) * (limit + (2.0 * kappa).powi(t as i32) * (start - limit))
    }
}

/// One row of the iteration log; `err_blocks` holds the block norms of
/// `Bv^{(k)} − Bx` when the true signal is known.
#[derive(Clone, Debug, Serialize)]
pub struct NebmpStep {
    pub k: usize,
    pub alpha: f64,
    pub err_blocks: Option<Vec<f64>>,
}

impl NebmpStep {
    pub fn error(&self, p: Exponent) -> Option<f64> {
        self.err_blocks.as_ref().map(|e| p.norm(e))
    }
}

/// Runs the matching pursuit for `params.iters` steps.
///
/// The representation update is `v ← v + B⁺Δ`. With `truth` the log also
/// records the per-block errors of every iterate.
pub fn nebmp(
    obs: &Observation,
    h: &DMatrix<f64>,
    params: &NebmpParams,
    truth: Option<&DVector<f64>>,
) -> Result<RecoveryResult> {
    obs.check_contrast(h)?;
    let rs = &obs.rs;
    let NebmpParams { gamma_bar, rho, s, upsilon, iters } = *params;
    rs.check_s(s)?;
    for k in 0..rs.n_blocks() {
        if rs.block_norm(k) == BlockNorm::L1 && rs.block_dims()[k] > 1 {
            return Err(Error::InvalidArgument("matching pursuit needs ℓ2 or ℓ∞ block norms".into()));
        }
    }
    if !(gamma_bar >= 0.0 && rho >= 0.0 && upsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("need γ̄ ≥ 0, ρ ≥ 0, υ ≥ 0; got {gamma_bar}, {rho}, {upsilon}")));
    }
    if params.kappa() >= 1.0 {
        return Err(Error::ConditionViolated(format!("sγ̄ = {} ≥ 1", params.kappa())));
    }
    if let Some(x) = truth {
        if x.len() != obs.n() {
            return Err(Error::Dimension(format!("true signal has length {}, expected {}", x.len(), obs.n())));
        }
    }
    let mut warnings = Vec::new();
    if 2.0 * params.kappa() >= 1.0 {
        let msg = format!("2sγ̄ = {} ≥ 1: no convergence guarantee", 2.0 * params.kappa());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let b_pinv = if rs.is_identity() { None } else { Some(linalg::pinv_full_row_rank(rs.b())?) };
    let ht = h.transpose();
    let hta = &ht * &obs.a;
    let hty = &ht * &obs.y;
    let ls1 = rs.lsp(hty.as_slice(), s, Exponent::ONE)?;
    let w_true = truth.map(|x| rs.represent(x));
    let record = |k: usize, alpha: f64, v: &DVector<f64>| NebmpStep {
        k,
        alpha,
        err_blocks: w_true.as_ref().map(|w| rs.magnitudes((rs.represent(v) - w).as_slice())),
    };

    let mut v = DVector::zeros(obs.n());
    let mut alpha = params.alpha0(ls1);
    let mut log = vec![record(0, alpha, &v)];
    let sf = s as f64;
    for k in 1..=iters {
        let g = &hty - &hta * &v;
        let thr = gamma_bar * alpha + rho;
        let mut delta = DVector::zeros(rs.dim());
        for j in 0..rs.n_blocks() {
            let range = rs.block_range(j);
            match rs.block_norm(j) {
                BlockNorm::L2 => {
                    let gj = g.rows(range.start, range.len());
                    let nrm = gj.norm();
                    if nrm > thr {
                        delta.rows_mut(range.start, range.len()).copy_from(&(gj * ((nrm - thr) / nrm)));
                    }
                }
                BlockNorm::Linf | BlockNorm::L1 => {
                    for i in range {
                        let gi = g[i];
                        delta[i] = gi.signum() * (gi.abs() - thr).max(0.0);
                    }
                }
            }
        }
        match &b_pinv {
            None => v += &delta,
            Some(bp) => v += bp * &delta,
        }
        alpha = 2.0 * sf * gamma_bar * alpha + 2.0 * sf * rho + upsilon;
        log.push(record(k, alpha, &v));
    }
    let objective = rs.lp(rs.represent(&v).as_slice(), Exponent::ONE);
    let mut res = RecoveryResult::new(Routine::Nebmp, v, rs, objective, iters);
    res.warnings = warnings;
    res.log = log;
    Ok(res)
}

/// Writes the log as CSV with columns `k,alpha_k,Linf_err,L1_err`; error
/// columns are empty without ground truth.
pub fn write_nebmp_log_csv<W: Write>(log: &[NebmpStep], w: &mut W) -> Result<()> {
    writeln!(w, "k,alpha_k,Linf_err,L1_err")?;
    for step in log {
        let cell = |p| step.error(p).map(|e| format!("{e:e}")).unwrap_or_default();
        writeln!(w, "{},{:e},{},{}", step.k, step.alpha, cell(Exponent::Inf), cell(Exponent::ONE))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::RepresentationStructure;
    use crate::conditions::Certificate;
    use crate::synthesis::synthesize_kappa;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn params(gamma_bar: f64, s: usize, iters: usize) -> NebmpParams {
        NebmpParams { gamma_bar, rho: 0.0, s, upsilon: 0.0, iters }
    }

    #[test]
    fn alpha_substitution() {
        let p = params(0.25, 1, 1);
        let a0 = p.alpha0(1.0);
        assert_relative_eq!(a0, 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p.alpha_closed_form(a0, 1), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_observation_stays_at_zero() {
        let rs = RepresentationStructure::uniform(4, 2, BlockNorm::L2).unwrap();
        let a = DMatrix::identity(4, 4);
        let obs = Observation::noiseless(a.clone(), rs, &DVector::zeros(4)).unwrap();
        let p = NebmpParams { gamma_bar: 0.1, rho: 0.2, s: 1, upsilon: 0.05, iters: 5 };
        let res = nebmp(&obs, &a, &p, None).unwrap();
        assert_relative_eq!(res.log[0].alpha, (0.2 + 0.05) / 0.9, epsilon = 1e-15);
        assert_eq!(res.x_hat, DVector::zeros(4));
    }

    #[test]
    fn rejects_kappa_at_least_one_and_warns_at_half() {
        let rs = RepresentationStructure::uniform(4, 2, BlockNorm::Linf).unwrap();
        let a = DMatrix::identity(4, 4);
        let obs = Observation::noiseless(a.clone(), rs, &DVector::zeros(4)).unwrap();
        assert!(nebmp(&obs, &a, &params(0.5, 2, 3), None).is_err());
        let res = nebmp(&obs, &a, &params(0.3, 2, 3), None).unwrap();
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn certified_run_obeys_guarantees() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut a = DMatrix::from_fn(16, 24, |_, _| StandardNormal.sample(&mut rng));
        for mut c in a.column_iter_mut() {
            let nrm = c.norm();
            c /= nrm;
        }
        for r in [BlockNorm::Linf, BlockNorm::L2] {
            let rs = RepresentationStructure::uniform(24, 3, r).unwrap();
            let c = synthesize_kappa(&a, &rs, 1, r).unwrap();
            let cert = Certificate::from_contrast(&a, c.certificate.h.clone(), &rs, 1, Exponent::Inf, "test").unwrap();
            let gamma_bar = cert.omega.max();
            let p = params(gamma_bar, 1, 40);
            assert!(2.0 * p.kappa() < 1.0, "2sγ̄ = {}", 2.0 * p.kappa());
            let mut x = DVector::zeros(24);
            for i in 9..12 {
                x[i] = StandardNormal.sample(&mut rng);
            }
            let obs = Observation::noiseless(a.clone(), rs.clone(), &x).unwrap();
            let res = nebmp(&obs, &cert.h, &p, Some(&x)).unwrap();
            let ls1 = rs.lsp((cert.h.transpose() * &obs.y).as_slice(), 1, Exponent::ONE).unwrap();
            let mags = rs.magnitudes(x.as_slice());
            for step in &res.log {
                assert_relative_eq!(step.alpha, p.alpha_closed_form(res.log[0].alpha, step.k), epsilon = 1e-12);
                let err = step.err_blocks.as_ref().unwrap();
                assert!(err.iter().zip(&mags).all(|(e, m)| *e <= m + 1e-9));
                assert!(step.error(Exponent::ONE).unwrap() <= step.alpha + 1e-9);
                if step.k > 0 {
                    for pe in [Exponent::ONE, Exponent::TWO, Exponent::Inf] {
                        assert!(step.error(pe).unwrap() <= p.error_bound(ls1, pe, step.k) + 1e-9);
                    }
                }
            }
            let last = res.log.last().unwrap();
            assert!(last.error(Exponent::Inf).unwrap() <= last.alpha + 1e-12);
            assert!(last.alpha < res.log[0].alpha * (2.0 * p.kappa()).powi(39));
        }
    }

    #[test]
    fn bound_equals_scaled_alpha() {
        let p = NebmpParams { gamma_bar: 0.1, rho: 0.03, s: 3, upsilon: 0.2, iters: 0 };
        let a0 = p.alpha0(2.5);
        for t in 0..20 {
            for pe in [Exponent::ONE, Exponent::TWO, Exponent::Inf] {
                let scaled = 3f64.powf(pe.recip() - 1.0) * p.alpha_closed_form(a0, t);
                assert_relative_eq!(p.error_bound(2.5, pe, t), scaled, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn log_csv_layout() {
        let log = vec![
            NebmpStep { k: 0, alpha: 1.0, err_blocks: Some(vec![0.5, 0.25]) },
            NebmpStep { k: 1, alpha: 0.5, err_blocks: None },
        ];
        let mut buf = Vec::new();
        write_nebmp_log_csv(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,alpha_k,Linf_err,L1_err");
        assert_eq!(lines[1], "0,1e0,5e-1,7.5e-1");
        assert_eq!(lines[2], "1,5e-1,,");
    }
}
