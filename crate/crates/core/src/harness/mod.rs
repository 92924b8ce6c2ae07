//! Seeded experiment generators, the ratings protocol for comparing
//! recovery routines, and the σ sweep.

mod contrasts;
mod ratings;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use contrasts::{build_contrasts, write_table1_csv, ContrastEntry, ContrastSet, Table1Row};
pub use ratings::{
    ratings_from_errors, run_ratings, run_ratings_with, run_sigma_sweep, run_sigma_sweep_with, run_table2,
    write_ratings_csv, write_sweep_csv, write_table2_csv, RatingTable, SweepRow, Table2, TrialOutcome,
};

use crate::blockmodel::{BlockNorm, RepresentationStructure};
use crate::error::{Error, Result};
use crate::linalg;
use crate::synthesis::DEFAULT_GOODNESS_BUDGET;

/// Random sensing matrix families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixType {
    /// random row subset of a Sylvester Hadamard matrix
    H,
    /// independent standard normal entries
    G,
    /// independent ±1 entries
    R,
    /// every `d`-column part is block diagonal with `d` Gaussian `(m/d)×1` blocks
    T,
}

impl MatrixType {
    pub const ALL: [MatrixType; 4] = [MatrixType::H, MatrixType::G, MatrixType::R, MatrixType::T];
}

impl fmt::Display for MatrixType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for MatrixType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" | "h" => Ok(MatrixType::H),
            "G" | "g" => Ok(MatrixType::G),
            "R" | "r" => Ok(MatrixType::R),
            "T" | "t" => Ok(MatrixType::T),
            _ => Err(Error::InvalidArgument(format!("unknown matrix type '{s}' (expected H, G, R or T)"))),
        }
    }
}

/// How the sparsity of test signals is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// the best certified level `s_*` over all contrasts and norms
    Certified,
    /// `2s_*`
    DoubleCertified,
    Explicit(usize),
}

impl fmt::Display for SparsityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsityMode::Certified => f.write_str("certified"),
            SparsityMode::DoubleCertified => f.write_str("double_certified"),
            SparsityMode::Explicit(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SparsityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "certified" => Ok(SparsityMode::Certified),
            "double_certified" | "double" => Ok(SparsityMode::DoubleCertified),
            _ => s
                .parse::<usize>()
                .map(SparsityMode::Explicit)
                .map_err(|_| Error::InvalidArgument(format!("unknown sparsity mode '{s}'"))),
        }
    }
}

/// Candidate contrast matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContrastName {
    MI,
    MBI,
    /// `κ`-optimal contrast synthesized for the given block norm
    Synth(BlockNorm),
}

impl ContrastName {
    pub const ALL: [ContrastName; 5] = [
        ContrastName::MI,
        ContrastName::MBI,
        ContrastName::Synth(BlockNorm::L1),
        ContrastName::Synth(BlockNorm::L2),
        ContrastName::Synth(BlockNorm::Linf),
    ];
}

impl fmt::Display for ContrastName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContrastName::MI => f.write_str("MI"),
            ContrastName::MBI => f.write_str("MBI"),
            ContrastName::Synth(r) => write!(f, "H({r})"),
        }
    }
}

impl FromStr for ContrastName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown contrast '{s}'")))
    }
}

/// A recovery routine taking part in the comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoutineDesc {
    /// penalized recovery with `λ = 2s` under block norm `r`
    Penalized { r: BlockNorm, contrast: ContrastName },
    /// group Lasso with the default penalty levels
    Lasso,
}

impl RoutineDesc {
    /// The fifteen penalized routines (five contrasts, three norms) and the Lasso.
    pub fn full_set() -> Vec<RoutineDesc> {
        let mut out = Vec::new();
        for r in BlockNorm::ALL {
            for contrast in ContrastName::ALL {
                out.push(RoutineDesc::Penalized { r, contrast });
            }
        }
        out.push(RoutineDesc::Lasso);
        out
    }

    pub fn name(&self) -> String {
        match self {
            RoutineDesc::Penalized { r, contrast } => format!("r={r}/{contrast}"),
            RoutineDesc::Lasso => "lasso".into(),
        }
    }
}

impl fmt::Display for RoutineDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for RoutineDesc {
    type Err = Error;

    /// Parses `lasso` or `r=<1|2|inf>/<contrast>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "lasso" {
            return Ok(RoutineDesc::Lasso);
        }
        let bad = || Error::InvalidArgument(format!("bad routine '{s}' (expected lasso or r=<1|2|inf>/<contrast>)"));
        let rest = s.strip_prefix("r=").ok_or_else(bad)?;
        let (r, c) = rest.split_once('/').ok_or_else(bad)?;
        Ok(RoutineDesc::Penalized { r: r.parse()?, contrast: c.parse()? })
    }
}

/// Parameters of one experiment series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub matrix_type: MatrixType,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
    pub s_mode: SparsityMode,
    pub trials: usize,
    pub seed: u64,
    pub routines: Vec<RoutineDesc>,
    /// confidence level for the `ρ` column of the certified-levels table
    pub epsilon: f64,
    /// multiplier of the Lasso penalty levels
    pub lasso_c: f64,
    /// supports examined per `s` by the nullspace search
    pub goodness_budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            matrix_type: MatrixType::H,
            m: 24,
            n: 32,
            k: 8,
            d: 4,
            sigma: 0.001,
            s_mode: SparsityMode::Certified,
            trials: 100,
            seed: 0,
            routines: RoutineDesc::full_set(),
            epsilon: 0.05,
            lasso_c: 1.0,
            goodness_budget: DEFAULT_GOODNESS_BUDGET,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 || self.d == 0 || self.k == 0 {
            return bad("m, K and d must be positive".into());
        }
        if self.n != self.k * self.d {
            return bad(format!("n = {} must equal K·d = {}·{}", self.n, self.k, self.d));
        }
        if self.matrix_type == MatrixType::H && self.m > self.n {
            return bad(format!("type H needs m ≤ n, got {} > {}", self.m, self.n));
        }
        if self.matrix_type == MatrixType::H && !self.n.is_power_of_two() {
            return bad(format!("type H needs n a power of two, got {}", self.n));
        }
        if self.matrix_type == MatrixType::T && !self.m.is_multiple_of(self.d) {
            return bad(format!("type T needs d | m, got m = {}, d = {}", self.m, self.d));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("σ must be finite and nonnegative, got {}", self.sigma));
        }
        if self.trials == 0 {
            return bad("at least one trial is needed".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("ε must lie in (0, 1), got {}", self.epsilon));
        }
        if self.routines.is_empty() {
            return bad("no routines selected".into());
        }
        Ok(())
    }

    /// `B = I` with `K` blocks of size `d` under norm `r`.
    pub fn structure(&self, r: BlockNorm) -> Result<RepresentationStructure> {
        RepresentationStructure::uniform(self.n, self.d, r)
    }
}

/// Generator for substream `stream` of `seed`; stream 0 draws the matrix,
/// stream `t + 1` draws trial `t`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sylvester Hadamard matrix of order `2^k`.
pub fn sylvester_hadamard(order: usize) -> Result<DMatrix<f64>> {
    if !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("Hadamard order must be a power of two, got {order}")));
    }
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < order {
        let k = h.nrows();
        let mut next = DMatrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    Ok(h)
}

/// Raw draw of the matrix family, before column normalization.
pub fn gen_matrix_raw<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    Ok(match cfg.matrix_type {
        MatrixType::H => {
            let full = sylvester_hadamard(n)?;
            let mut rows = rand::seq::index::sample(rng, n, m).into_vec();
            rows.sort_unstable();
            full.select_rows(&rows)
        }
        MatrixType::G => DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng)),
        MatrixType::R => DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 }),
        MatrixType::T => {
            let h = m / cfg.d;
            let mut a = DMatrix::zeros(m, n);
            for j in 0..n {
                let slot = j % cfg.d;
                for i in slot * h..(slot + 1) * h {
                    a[(i, j)] = StandardNormal.sample(rng);
                }
            }
            a
        }
    })
}

/// Draws a sensing matrix and scales every column to unit `ℓ₂` norm.
pub fn gen_matrix<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<DMatrix<f64>> {
    let mut a = gen_matrix_raw(cfg, rng)?;
    for mut c in a.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c /= nrm;
        }
    }
    Ok(a)
}

/// Signal with exactly `s` nonzero representation blocks on a uniformly
/// random support, entries standard normal; `x = B⁺w` for general `B`.
pub fn gen_signal<R: Rng>(rs: &RepresentationStructure, s: usize, rng: &mut R) -> Result<DVector<f64>> {
    if s > rs.n_blocks() {
        return Err(Error::SparsityOutOfRange { s, k: rs.n_blocks() });
    }
    let mut support = rand::seq::index::sample(rng, rs.n_blocks(), s).into_vec();
    support.sort_unstable();
    let mut w = DVector::zeros(rs.dim());
    for k in support {
        for i in rs.block_range(k) {
            w[i] = StandardNormal.sample(rng);
        }
    }
    if rs.is_identity() {
        Ok(w)
    } else {
        Ok(linalg::pinv_full_row_rank(rs.b())? * w)
    }
}
