//! Representation structures, block vectors and the norms built on them.
//!
//! A [`RepresentationStructure`] fixes the linear map `B`, the partition of
//! `Bx` into `K` blocks and the norm used to measure each block. Everything
//! downstream (conditions, synthesis, recovery) speaks in terms of the block
//! magnitudes `‖w[k]‖_(k)` and the norms `L_p` / `L_{s,p}` of the magnitude
//! vector.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Norm applied to a single block: `ℓ1`, `ℓ2` or `ℓ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockNorm {
    L1,
    L2,
    Linf,
}

impl BlockNorm {
    pub const ALL: [BlockNorm; 3] = [BlockNorm::L1, BlockNorm::L2, BlockNorm::Linf];

    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            BlockNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            BlockNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            BlockNorm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Norm conjugate to this one (`ℓ1 ↔ ℓ∞`, `ℓ2 ↔ ℓ2`).
    pub fn dual(self) -> BlockNorm {
        match self {
            BlockNorm::L1 => BlockNorm::Linf,
            BlockNorm::L2 => BlockNorm::L2,
            BlockNorm::Linf => BlockNorm::L1,
        }
    }

    pub fn exponent(self) -> Exponent {
        match self {
            BlockNorm::L1 => Exponent::ONE,
            BlockNorm::L2 => Exponent::TWO,
            BlockNorm::Linf => Exponent::Inf,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            BlockNorm::L1 => "1",
            BlockNorm::L2 => "2",
            BlockNorm::Linf => "inf",
        }
    }
}

impl fmt::Display for BlockNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for BlockNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(BlockNorm::L1),
            "2" | "l2" => Ok(BlockNorm::L2),
            "inf" | "linf" | "infinity" | "∞" => Ok(BlockNorm::Linf),
            other => Err(Error::Parse(format!("unknown block norm '{other}'"))),
        }
    }
}

impl Serialize for BlockNorm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for BlockNorm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(1.0) => Ok(BlockNorm::L1),
            Raw::Num(2.0) => Ok(BlockNorm::L2),
            Raw::Num(x) => Err(serde::de::Error::custom(format!("unsupported block norm {x}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A norm exponent `p ∈ [1, ∞]`, with infinity kept as its own variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Exponent::Inf)
        } else {
            Err(Error::InvalidArgument(format!("norm exponent {p} outside [1, ∞]")))
        }
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Inf => 0.0,
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Exponent::Inf)
    }

    /// Value as an `f64` (`f64::INFINITY` for the infinite exponent).
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Inf => f64::INFINITY,
        }
    }

    /// `‖v‖_p` of a plain vector.
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            Exponent::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Exponent::Finite(1.0) => v.iter().map(|x| x.abs()).sum(),
            Exponent::Finite(2.0) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Exponent::Finite(p) => {
                // scale by the max entry to keep |x|^p in range
                let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Inf => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Inf),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::Parse(format!("bad exponent '{other}'")))?;
                Exponent::finite(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Inf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => Exponent::finite(p).map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The tuple `(B, n₁..n_K, block norms)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationStructure {
    b: DMatrix<f64>,
    block_dims: Vec<usize>,
    offsets: Vec<usize>,
    norms: Vec<BlockNorm>,
    identity: bool,
}

impl RepresentationStructure {
    /// Builds a structure with one norm per block (`norms.len() == 1` means uniform).
    pub fn new(b: DMatrix<f64>, block_dims: Vec<usize>, norms: Vec<BlockNorm>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidArgument("structure needs at least one block".into()));
        }
        if block_dims.contains(&0) {
            return Err(Error::InvalidArgument("block dimensions must be positive".into()));
        }
        let total: usize = block_dims.iter().sum();
        if total != b.nrows() {
            return Err(Error::Dimension(format!("block dims sum to {total} but B has {} rows", b.nrows())));
        }
        let norms = match norms.len() {
            1 => vec![norms[0]; block_dims.len()],
            k if k == block_dims.len() => norms,
            k => return Err(Error::Dimension(format!("{k} block norms given for {} blocks", block_dims.len()))),
        };
        let mut offsets = Vec::with_capacity(block_dims.len() + 1);
        offsets.push(0);
        for d in &block_dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        let identity = b.is_square() && b == DMatrix::identity(b.nrows(), b.ncols());
        Ok(Self { b, block_dims, offsets, norms, identity })
    }

    /// `B = I_n` with the given partition and a uniform block norm.
    pub fn identity(block_dims: Vec<usize>, norm: BlockNorm) -> Result<Self> {
        let n = block_dims.iter().sum();
        Self::new(DMatrix::identity(n, n), block_dims, vec![norm])
    }

    /// `B = I_n` with `n / d` equal blocks of size `d`.
    pub fn uniform(n: usize, d: usize, norm: BlockNorm) -> Result<Self> {
        if d == 0 || !n.is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!("block size {d} does not divide n={n}")));
        }
        Self::identity(vec![d; n / d], norm)
    }

    /// The standard structure: `B = I_n`, scalar blocks, absolute value.
    pub fn standard(n: usize) -> Result<Self> {
        Self::identity(vec![1; n], BlockNorm::Linf)
    }

    /// Same partition and `B`, different uniform block norm.
    pub fn with_norm(&self, norm: BlockNorm) -> Self {
        Self { norms: vec![norm; self.n_blocks()], ..self.clone() }
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Number of blocks `K`.
    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Dimension `N` of the representation space.
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Dimension `n` of the signal space.
    pub fn signal_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn block_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Index of the block containing coordinate `i` of the representation.
    pub fn block_of(&self, i: usize) -> usize {
        match self.offsets.binary_search(&i) {
            Ok(k) => k,
            Err(k) => k - 1,
        }
    }

    pub fn block_norm(&self, k: usize) -> BlockNorm {
        self.norms[k]
    }

    pub fn block_norms(&self) -> &[BlockNorm] {
        &self.norms
    }

    pub fn uniform_norm(&self) -> Option<BlockNorm> {
        let first = self.norms[0];
        self.norms.iter().all(|&n| n == first).then_some(first)
    }

    pub fn require_uniform_norm(&self) -> Result<BlockNorm> {
        self.uniform_norm().ok_or(Error::MixedBlockNorms)
    }

    /// Common block size when all blocks have the same dimension.
    pub fn equal_block_dim(&self) -> Option<usize> {
        let d = self.block_dims[0];
        self.block_dims.iter().all(|&x| x == d).then_some(d)
    }

    pub fn max_block_dim(&self) -> usize {
        *self.block_dims.iter().max().unwrap()
    }

    pub fn check_s(&self, s: usize) -> Result<()> {
        if s == 0 || s > self.n_blocks() {
            Err(Error::SparsityOutOfRange { s, k: self.n_blocks() })
        } else {
            Ok(())
        }
    }

    /// Block magnitudes of a representation vector `w ∈ R^N`.
    pub fn magnitudes(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.dim());
        (0..self.n_blocks()).map(|k| self.norms[k].apply(&w[self.block_range(k)])).collect()
    }

    /// `L_p(w)`.
    pub fn lp(&self, w: &[f64], p: Exponent) -> f64 {
        p.norm(&self.magnitudes(w))
    }

    /// `L_{s,p}(w) = L_p(w^s)`.
    pub fn lsp(&self, w: &[f64], s: usize, p: Exponent) -> Result<f64> {
        self.check_s(s)?;
        Ok(sp_norm(&self.magnitudes(w), s, p))
    }

    /// Representation `Bx` of a signal.
    pub fn represent(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            x.clone()
        } else {
            &self.b * x
        }
    }

    pub fn block_vector(&self, data: DVector<f64>) -> Result<BlockVector<'_>> {
        BlockVector::new(data, self)
    }
}

/// Indices of the `s` largest entries of `u` (by absolute value), ties broken by
/// ascending index. Returned in ascending index order.
pub fn top_s_indices(u: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    // stable sort keeps ascending index among equal magnitudes
    idx.sort_by(|&a, &b| u[b].abs().partial_cmp(&u[a].abs()).unwrap_or(std::cmp::Ordering::Equal));
    idx.truncate(s.min(u.len()));
    idx.sort_unstable();
    idx
}

/// `‖u‖_{s,p}`: the `ℓ_p` norm of the `s` largest-magnitude entries of `u`.
pub fn sp_norm(u: &[f64], s: usize, p: Exponent) -> f64 {
    let kept: Vec<f64> = top_s_indices(u, s).into_iter().map(|i| u[i]).collect();
    p.norm(&kept)
}

/// A vector of `R^N` viewed through a representation structure.
#[derive(Clone, Debug)]
pub struct BlockVector<'a> {
    data: DVector<f64>,
    structure: &'a RepresentationStructure,
}

impl<'a> BlockVector<'a> {
    pub fn new(data: DVector<f64>, structure: &'a RepresentationStructure) -> Result<Self> {
        if data.len() != structure.dim() {
            return Err(Error::Dimension(format!(
                "block vector has length {} but structure has N={}",
                data.len(),
                structure.dim()
            )));
        }
        Ok(Self { data, structure })
    }

    pub fn from_blocks(blocks: &[Vec<f64>], structure: &'a RepresentationStructure) -> Result<Self> {
        let flat: Vec<f64> = blocks.iter().flatten().copied().collect();
        for (k, blk) in blocks.iter().enumerate() {
            if k >= structure.n_blocks() || blk.len() != structure.block_dims()[k] {
                return Err(Error::Dimension(format!("block {k} does not match the structure")));
            }
        }
        Self::new(DVector::from_vec(flat), structure)
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }

    pub fn structure(&self) -> &'a RepresentationStructure {
        self.structure
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.data.as_slice()[self.structure.block_range(k)]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.structure.magnitudes(self.data.as_slice())
    }

    /// `w^s`: all but the `s` largest-magnitude blocks zeroed.
    pub fn project_top_s(&self, s: usize) -> Result<BlockVector<'a>> {
        self.structure.check_s(s)?;
        let keep = top_s_indices(&self.magnitudes(), s);
        let mut out = DVector::zeros(self.data.len());
        for k in keep {
            let r = self.structure.block_range(k);
            out.rows_mut(r.start, r.len()).copy_from(&self.data.rows(r.start, r.len()));
        }
        Ok(BlockVector { data: out, structure: self.structure })
    }

    /// `w_I`: blocks outside `support` zeroed.
    pub fn restrict(&self, support: &[usize]) -> BlockVector<'a> {
        let mut out = DVector::zeros(self.data.len());
        for &k in support {
            let r = self.structure.block_range(k);
            out.rows_mut(r.start, r.len()).copy_from(&self.data.rows(r.start, r.len()));
        }
        BlockVector { data: out, structure: self.structure }
    }

    pub fn lp(&self, p: Exponent) -> f64 {
        p.norm(&self.magnitudes())
    }

    pub fn lsp(&self, s: usize, p: Exponent) -> Result<f64> {
        self.structure.lsp(self.data.as_slice(), s, p)
    }

    /// s-block concentration `υ_s(w) = L₁(w − w^s)`.
    pub fn concentration(&self, s: usize) -> Result<f64> {
        Ok((self.lp(Exponent::ONE) - self.lsp(s, Exponent::ONE)?).max(0.0))
    }

    pub fn nonzero_blocks(&self) -> usize {
        self.magnitudes().iter().filter(|&&m| m > 0.0).count()
    }
}

/// Induced norm `‖M‖_{r,θ} = max_{‖u‖_r ≤ 1} ‖Mu‖_θ` for the tractable pairs:
/// `r = 1` (max column `ℓ_θ` norm), `θ = ∞` (max row `ℓ_{r*}` norm) and
/// `r = θ = 2` (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>, r: BlockNorm, theta: BlockNorm) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    match (r, theta) {
        (BlockNorm::L1, _) => Ok(m.column_iter().map(|c| theta.apply(c.as_slice())).fold(0.0, f64::max)),
        (_, BlockNorm::Linf) => {
            let dual = r.dual();
            Ok((0..m.nrows())
                .map(|i| {
                    let row: Vec<f64> = m.row(i).iter().copied().collect();
                    dual.apply(&row)
                })
                .fold(0.0, f64::max))
        }
        (BlockNorm::L2, BlockNorm::L2) => Ok(spectral_norm(m)),
        _ => Err(Error::IntractablePair { r: r.to_string(), theta: theta.to_string() }),
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().iter().fold(0.0, |a, &b| a.max(b))
}
