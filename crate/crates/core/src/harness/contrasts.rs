use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{ContrastName, ExperimentConfig};
use crate::blockmodel::BlockNorm;
use crate::error::Result;
use crate::synthesis::{
    certified_level, contrast_incoherence, goodness_upper_bound, max_certifiable_s, rho_epsilon_blocks,
    IncoherenceMode, NoiseModel,
};

/// A candidate contrast; `h` is `None` when it could not be built.
#[derive(Clone, Debug)]
pub struct ContrastEntry {
    pub name: ContrastName,
    pub h: Option<DMatrix<f64>>,
    pub note: Option<String>,
}

/// Certified level of one contrast under one block norm.
#[derive(Clone, Debug, Serialize)]
pub struct Table1Row {
    pub r: BlockNorm,
    pub contrast: ContrastName,
    /// largest `s` with `κ₁ < ½` (0 if none)
    pub s: usize,
    pub kappa1: f64,
    pub kappa_inf: f64,
    /// `ρ_ε` of the contrast for white noise of level `σ`
    pub rho: Option<f64>,
}

/// Candidate contrasts of one sensing matrix with their certified levels and,
/// optionally, nullspace upper bounds per norm.
#[derive(Clone, Debug)]
pub struct ContrastSet {
    pub entries: Vec<ContrastEntry>,
    pub table: Vec<Table1Row>,
    pub s_bar: Vec<(BlockNorm, Option<usize>)>,
}

impl ContrastSet {
    pub fn h(&self, name: ContrastName) -> Option<&DMatrix<f64>> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.h.as_ref())
    }

    /// Best certified level over all contrasts and norms.
    pub fn s_star(&self) -> usize {
        self.table.iter().map(|r| r.s).max().unwrap_or(0)
    }

    /// Best certified level under norm `r`.
    pub fn s_star_for(&self, r: BlockNorm) -> usize {
        self.table.iter().filter(|row| row.r == r).map(|row| row.s).max().unwrap_or(0)
    }
}

/// Builds the requested contrasts for `a` and evaluates each under every
/// block norm; with `upper_bounds` also searches `Ker A` for `s̄(r)`.
pub fn build_contrasts(
    a: &DMatrix<f64>,
    cfg: &ExperimentConfig,
    names: &[ContrastName],
    upper_bounds: bool,
) -> Result<ContrastSet> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(names.len());
    for &name in names {
        let built =
            match name {
                ContrastName::MI => contrast_incoherence(a, &cfg.structure(BlockNorm::L2)?, IncoherenceMode::MI)
                    .map(|c| c.certificate.h),
                ContrastName::MBI => contrast_incoherence(a, &cfg.structure(BlockNorm::L2)?, IncoherenceMode::MBI)
                    .map(|c| c.certificate.h),
                ContrastName::Synth(r) => {
                    max_certifiable_s(a, &cfg.structure(r)?, r).map(|scan| scan.best().certificate.h.clone())
                }
            };
        entries.push(match built {
            Ok(h) => ContrastEntry { name, h: Some(h), note: None },
            Err(e) => ContrastEntry { name, h: None, note: Some(e.to_string()) },
        });
    }
    let noise = if cfg.sigma > 0.0 { Some(NoiseModel::gaussian(cfg.m, cfg.sigma, cfg.epsilon)?) } else { None };
    let mut table = Vec::new();
    for r in BlockNorm::ALL {
        let rs = cfg.structure(r)?;
        for e in &entries {
            let Some(h) = &e.h else { continue };
            let (s, kappa1, kappa_inf) = certified_level(a, h, &rs, r)?;
            let rho = noise.as_ref().map(|nm| rho_epsilon_blocks(h, &rs, nm)).transpose()?;
            table.push(Table1Row { r, contrast: e.name, s, kappa1, kappa_inf, rho });
        }
    }
    let mut s_bar = Vec::new();
    if upper_bounds {
        for r in BlockNorm::ALL {
            let g = goodness_upper_bound(a, &cfg.structure(r)?, r, cfg.goodness_budget)?;
            s_bar.push((r, g.s_bar));
        }
    }
    Ok(ContrastSet { entries, table, s_bar })
}

/// CSV with columns `r,contrast_name,s,kappa1,kappa_inf,rho`, followed by one
/// `nullspace_upper_bound` row per norm (empty `s` when no witness was found).
pub fn write_table1_csv<W: Write>(set: &ContrastSet, w: &mut W) -> Result<()> {
    writeln!(w, "r,contrast_name,s,kappa1,kappa_inf,rho")?;
    for row in &set.table {
        let rho = row.rho.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{}", row.r, row.contrast, row.s, row.kappa1, row.kappa_inf, rho)?;
    }
    for (r, s_bar) in &set.s_bar {
        let s = s_bar.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{r},nullspace_upper_bound,{s},,,")?;
    }
    Ok(())
}
