use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    build_contrasts, gen_matrix, gen_signal, stream_rng, ContrastName, ContrastSet, ExperimentConfig, MatrixType,
    RoutineDesc, SparsityMode,
};
use crate::blockmodel::BlockNorm;
use crate::error::{Error, Result};
use crate::recovery::{group_lasso, lasso_lambdas, recover_penalized, Observation};

/// One trial of a comparison: `‖x̂ − x‖_∞` per routine (`None` on failure)
/// and the resulting ratings.
#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub errors: Vec<Option<f64>>,
    pub ratings: Vec<f64>,
    /// index of the routine with the smallest error
    pub winner: Option<usize>,
}

/// Average ratings of the routines over all trials of one sample.
#[derive(Clone, Debug, Serialize)]
pub struct RatingTable {
    pub matrix_type: MatrixType,
    pub s_mode: SparsityMode,
    /// sparsity of the test signals
    pub s: usize,
    pub routines: Vec<String>,
    pub mean: Vec<f64>,
    /// trials in which each routine failed (rated 0)
    pub failures: Vec<usize>,
    /// winner of each trial, by name
    pub winners: Vec<String>,
    pub trials: Vec<TrialOutcome>,
}

/// `min_j e_j / e_i`, with failures rated 0 and every routine attaining the
/// smallest error rated 1.
pub fn ratings_from_errors(errors: &[Option<f64>]) -> Vec<f64> {
    let best = errors.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    errors
        .iter()
        .map(|e| match e {
            None => 0.0,
            Some(e) if *e == best => 1.0,
            Some(e) => best / e,
        })
        .collect()
}

fn contrast_names(routines: &[RoutineDesc]) -> Vec<ContrastName> {
    let mut names: Vec<ContrastName> = Vec::new();
    for r in routines {
        if let RoutineDesc::Penalized { contrast, .. } = r {
            if !names.contains(contrast) {
                names.push(*contrast);
            }
        }
    }
    names
}

/// Test-signal sparsity; `s_* = 0` falls back to `s = 1`.
fn resolve_s(cfg: &ExperimentConfig, set: &ContrastSet) -> Result<usize> {
    let base = set.s_star().max(1);
    let s = match cfg.s_mode {
        SparsityMode::Certified => base,
        SparsityMode::DoubleCertified => (2 * base).min(cfg.k),
        SparsityMode::Explicit(s) => s,
    };
    if s == 0 || s > cfg.k {
        return Err(Error::SparsityOutOfRange { s, k: cfg.k });
    }
    Ok(s)
}

fn sample_offset(mode: SparsityMode) -> u64 {
    match mode {
        SparsityMode::Certified => 0,
        SparsityMode::DoubleCertified => 1 << 32,
        SparsityMode::Explicit(_) => 2 << 32,
    }
}

/// Signal and unit-variance noise of one trial.
fn draw_trial(cfg: &ExperimentConfig, s: usize, trial: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut rng = stream_rng(cfg.seed, 1 + trial as u64 + sample_offset(cfg.s_mode));
    let x = gen_signal(&cfg.structure(BlockNorm::L2)?, s, &mut rng)?;
    let xi = DVector::from_fn(cfg.m, |_, _| StandardNormal.sample(&mut rng));
    Ok((x, xi))
}

#[allow(clippy::too_many_arguments)]
fn run_routine(
    cfg: &ExperimentConfig,
    a: &DMatrix<f64>,
    set: &ContrastSet,
    routine: RoutineDesc,
    s: usize,
    sigma: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<f64> {
    let outcome = match routine {
        RoutineDesc::Penalized { r, contrast } => {
            let h = set.h(contrast)?;
            cfg.structure(r)
                .and_then(|rs| Observation::new(y.clone(), a.clone(), rs, None))
                .and_then(|obs| recover_penalized(&obs, h, 2.0 * s as f64))
        }
        RoutineDesc::Lasso => cfg.structure(BlockNorm::L2).and_then(|rs| {
            let lambdas = lasso_lambdas(&rs, cfg.m, sigma, cfg.lasso_c);
            Observation::new(y.clone(), a.clone(), rs, None).and_then(|obs| group_lasso(&obs, &lambdas))
        }),
    };
    match outcome {
        Ok(res) => Some((&res.x_hat - x).amax()),
        Err(e) => {
            log::warn!("{} failed: {e}", routine.name());
            None
        }
    }
}

fn trial_errors(
    cfg: &ExperimentConfig,
    a: &DMatrix<f64>,
    set: &ContrastSet,
    s: usize,
    sigma: f64,
    trial: usize,
) -> Result<Vec<Option<f64>>> {
    let (x, xi) = draw_trial(cfg, s, trial)?;
    let y = a * &x + xi * sigma;
    Ok(cfg.routines.iter().map(|&r| run_routine(cfg, a, set, r, s, sigma, &x, &y)).collect())
}

/// Draws the matrix from stream 0 and builds the contrasts the routines need.
fn prepare(cfg: &ExperimentConfig) -> Result<(DMatrix<f64>, ContrastSet)> {
    cfg.validate()?;
    let a = gen_matrix(cfg, &mut stream_rng(cfg.seed, 0))?;
    let set = build_contrasts(&a, cfg, &contrast_names(&cfg.routines), false)?;
    Ok((a, set))
}

pub fn run_ratings(cfg: &ExperimentConfig) -> Result<RatingTable> {
    let (a, set) = prepare(cfg)?;
    run_ratings_with(cfg, &a, &set)
}

/// Ratings protocol on a given matrix: every trial draws an `s`-block-sparse
/// signal, observes `y = Ax + σξ`, runs every routine and rates it by the
/// ratio of the smallest `‖·‖_∞` error to its own.
pub fn run_ratings_with(cfg: &ExperimentConfig, a: &DMatrix<f64>, set: &ContrastSet) -> Result<RatingTable> {
    cfg.validate()?;
    let s = resolve_s(cfg, set)?;
    let trials: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let errors = trial_errors(cfg, a, set, s, cfg.sigma, t)?;
            let ratings = ratings_from_errors(&errors);
            let winner = ratings.iter().position(|&r| r == 1.0);
            Ok(TrialOutcome { trial: t, errors, ratings, winner })
        })
        .collect::<Result<_>>()?;
    let nr = cfg.routines.len();
    let mut mean = vec![0.0; nr];
    let mut failures = vec![0; nr];
    for t in &trials {
        for i in 0..nr {
            mean[i] += t.ratings[i] / trials.len() as f64;
            failures[i] += usize::from(t.errors[i].is_none());
        }
    }
    let routines: Vec<String> = cfg.routines.iter().map(RoutineDesc::name).collect();
    let winners = trials.iter().map(|t| t.winner.map_or_else(|| "none".into(), |w| routines[w].clone())).collect();
    Ok(RatingTable { matrix_type: cfg.matrix_type, s_mode: cfg.s_mode, s, routines, mean, failures, winners, trials })
}

/// Average of `‖x̂ − x‖_∞/σ` for one routine at one noise level.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub routine: String,
    pub mean_ratio: f64,
    pub std: f64,
    /// trials in which the routine failed (left out of the average)
    pub failures: usize,
}

pub fn run_sigma_sweep(cfg: &ExperimentConfig, sigmas: &[f64]) -> Result<Vec<SweepRow>> {
    check_sigmas(sigmas)?;
    let (a, set) = prepare(cfg)?;
    run_sigma_sweep_with(cfg, &a, &set, sigmas)
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!("σ values must be positive and finite, got {sigmas:?}")));
    }
    Ok(())
}

/// The same signals and noise directions are reused at every `σ`.
pub fn run_sigma_sweep_with(
    cfg: &ExperimentConfig,
    a: &DMatrix<f64>,
    set: &ContrastSet,
    sigmas: &[f64],
) -> Result<Vec<SweepRow>> {
    check_sigmas(sigmas)?;
    cfg.validate()?;
    let s = resolve_s(cfg, set)?;
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let errors: Vec<Vec<Option<f64>>> =
            (0..cfg.trials).into_par_iter().map(|t| trial_errors(cfg, a, set, s, sigma, t)).collect::<Result<_>>()?;
        for (i, routine) in cfg.routines.iter().enumerate() {
            let ratios: Vec<f64> = errors.iter().filter_map(|e| e[i]).map(|e| e / sigma).collect();
            let n = ratios.len() as f64;
            let mean = ratios.iter().sum::<f64>() / n;
            let std = if ratios.len() > 1 {
                (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            rows.push(SweepRow {
                sigma,
                routine: routine.name(),
                mean_ratio: mean,
                std,
                failures: cfg.trials - ratios.len(),
            });
        }
    }
    Ok(rows)
}

/// Both samples (`s_*` and `2s_*`) for each matrix type, with the contrast
/// sets behind them.
#[derive(Clone, Debug)]
pub struct Table2 {
    pub contrast_sets: Vec<(MatrixType, ContrastSet)>,
    pub samples: Vec<RatingTable>,
    pub routines: Vec<RoutineDesc>,
    /// average rating over all trials of all samples
    pub mean: Vec<f64>,
}

pub fn run_table2(cfg: &ExperimentConfig, types: &[MatrixType]) -> Result<Table2> {
    let mut contrast_sets = Vec::new();
    let mut samples = Vec::new();
    for &t in types {
        let base = ExperimentConfig { matrix_type: t, ..cfg.clone() };
        base.validate()?;
        let a = gen_matrix(&base, &mut stream_rng(base.seed, 0))?;
        let set = build_contrasts(&a, &base, &ContrastName::ALL, true)?;
        for mode in [SparsityMode::Certified, SparsityMode::DoubleCertified] {
            let c = ExperimentConfig { s_mode: mode, ..base.clone() };
            samples.push(run_ratings_with(&c, &a, &set)?);
        }
        contrast_sets.push((t, set));
    }
    let nr = cfg.routines.len();
    let total: usize = samples.iter().map(|s| s.trials.len()).sum();
    let mut mean = vec![0.0; nr];
    for sample in &samples {
        for t in &sample.trials {
            for (acc, rating) in mean.iter_mut().zip(&t.ratings) {
                *acc += rating / total as f64;
            }
        }
    }
    Ok(Table2 { contrast_sets, samples, routines: cfg.routines.clone(), mean })
}

/// CSV with columns `matrix_type,s_mode,s,routine,rating,failures`.
pub fn write_ratings_csv<W: Write>(table: &RatingTable, w: &mut W) -> Result<()> {
    writeln!(w, "matrix_type,s_mode,s,routine,rating,failures")?;
    for (i, name) in table.routines.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            table.matrix_type, table.s_mode, table.s, name, table.mean[i], table.failures[i]
        )?;
    }
    Ok(())
}

/// CSV with columns `sigma,routine,mean_ratio,std`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: &mut W) -> Result<()> {
    writeln!(w, "sigma,routine,mean_ratio,std")?;
    for row in rows {
        writeln!(w, "{},{},{},{}", row.sigma, row.routine, row.mean_ratio, row.std)?;
    }
    Ok(())
}

/// Overall ratings laid out with one row per `r` and one column per contrast,
/// the Lasso in the `r = 2` row: `r,MI,MBI,H(1),H(2),H(inf),Lasso`.
pub fn write_table2_csv<W: Write>(table: &Table2, w: &mut W) -> Result<()> {
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let row_of = |r: BlockNorm| BlockNorm::ALL.iter().position(|&x| x == r).expect("listed norm");
    for (i, routine) in table.routines.iter().enumerate() {
        match routine {
            RoutineDesc::Penalized { r, contrast } => {
                let col = ContrastName::ALL.iter().position(|c| c == contrast).expect("listed contrast");
                cells.insert((row_of(*r), col), table.mean[i]);
            }
            RoutineDesc::Lasso => {
                cells.insert((row_of(BlockNorm::L2), ContrastName::ALL.len()), table.mean[i]);
            }
        }
    }
    let header: Vec<String> = ContrastName::ALL.iter().map(ToString::to_string).collect();
    writeln!(w, "r,{},Lasso", header.join(","))?;
    for (ri, r) in BlockNorm::ALL.iter().enumerate() {
        let row: Vec<String> = (0..=ContrastName::ALL.len())
            .map(|c| cells.get(&(ri, c)).map(|v| format!("{v:.4}")).unwrap_or_else(|| "N/A".into()))
            .collect();
        writeln!(w, "{r},{}", row.join(","))?;
    }
    Ok(())
}
