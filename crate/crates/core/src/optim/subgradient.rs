use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub enum StepSchedule {
    /// `α₀/√(k+1)`; `None` calibrates `α₀` from the first oracle call
    InvSqrt {
        alpha0: Option<f64>,
    },
    /// `α₀/(k+1)`
    Harmonic {
        alpha0: Option<f64>,
    },
    Constant(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct SubgradientOptions {
    pub schedule: StepSchedule,
    pub max_iter: usize,
    /// stop once `f_best` falls below this value
    pub target: Option<f64>,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::InvSqrt { alpha0: None },
            max_iter: crate::tolerances::SUBGRADIENT_MAX_ITER,
            target: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubgradientResult {
    pub x_best: DVector<f64>,
    pub f_best: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Normalized subgradient descent keeping the best iterate.
///
/// `oracle` returns `(f(x), g)` with `g ∈ ∂f(x)`. A zero subgradient ends the
/// run since `x` is then optimal.
pub fn subgradient_minimize<F>(mut oracle: F, x0: DVector<f64>, opts: &SubgradientOptions) -> Result<SubgradientResult>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut x = x0;
    let (f0, g0) = oracle(&x)?;
    if !f0.is_finite() {
        return Err(Error::InvalidArgument("objective is not finite at the starting point".into()));
    }
    let mut best = (x.clone(), f0);
    let mut history = vec![f0];
    let mut g = g0;
    let calibrated = |a: Option<f64>| a.unwrap_or_else(|| (0.5 * f0.abs()).max(1e-3));
    let alpha0 = match opts.schedule {
        StepSchedule::InvSqrt { alpha0 } | StepSchedule::Harmonic { alpha0 } => calibrated(alpha0),
        StepSchedule::Constant(a) => a,
    };
    let mut iterations = 0;
    for k in 0..opts.max_iter {
        if opts.target.is_some_and(|t| best.1 <= t) {
            break;
        }
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let step = match opts.schedule {
            StepSchedule::InvSqrt { .. } => alpha0 / ((k + 1) as f64).sqrt(),
            StepSchedule::Harmonic { .. } => alpha0 / (k + 1) as f64,
            StepSchedule::Constant(a) => a,
        };
        x.axpy(-step / gn, &g, 1.0);
        let (f, gk) = oracle(&x)?;
        iterations = k + 1;
        history.push(f);
        if f < best.1 {
            best = (x.clone(), f);
        }
        g = gk;
    }
    Ok(SubgradientResult { x_best: best.0, f_best: best.1, iterations, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_l1() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let oracle = |x: &DVector<f64>| {
            let d = x - &c;
            let f = d.iter().map(|v| v.abs()).sum();
            Ok((f, d.map(|v| v.signum())))
        };
        let r = subgradient_minimize(oracle, DVector::zeros(3), &SubgradientOptions::default()).unwrap();
        assert!(r.f_best < 5e-2, "{}", r.f_best);
        assert!(r.history.len() > 1);
    }

    #[test]
    fn stops_on_zero_subgradient() {
        let oracle = |_: &DVector<f64>| Ok((1.0, DVector::zeros(2)));
        let r = subgradient_minimize(oracle, DVector::zeros(2), &SubgradientOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
    }
}
