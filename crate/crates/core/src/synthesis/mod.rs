//! Construction of contrast matrices `H`.
//!
//! * closed-form contrasts from mutual (block-)incoherence,
//! * minimization of `κ₁^{r,s}(H) = max_ℓ ‖Col_ℓ Ω^r(H)‖_{s,1}`: an LP for
//!   `r ∈ {1, ∞}`, a subgradient method for `r = 2`,
//! * the joint `(H, ρ)` program for `ℓ∞` blocks and the noise radius `ρ_ε`,
//! * upper bounds on the sparsity any contrast can certify, from kernel
//!   vectors violating the nullspace property.

mod goodness;
mod noise;

pub use goodness::{goodness_upper_bound, GoodnessBound, DEFAULT_GOODNESS_BUDGET};
pub use noise::{erfinv_upper, rho_epsilon, rho_epsilon_blocks, rho_monte_carlo, synthesize_rho, NoiseModel};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blockmodel::{spectral_norm, top_s_indices, BlockNorm, Exponent, RepresentationStructure};
use crate::conditions::{self, block_gram_inverses, Certificate, Incoherence};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{self, ConeProgram, LinExpr, SolverOptions, SubgradientOptions};
use crate::tolerances;

/// Which incoherence contrast to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IncoherenceMode {
    /// scalar blocks (standard mutual incoherence)
    MI,
    /// the blocks of the structure
    MBI,
}

impl std::fmt::Display for IncoherenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IncoherenceMode::MI => "MI",
            IncoherenceMode::MBI => "MBI",
        })
    }
}

/// Contrast `H = (1+μ)⁻¹[A[1]C₁⁻¹, …, A[K]C_K⁻¹]`.
#[derive(Clone, Debug)]
pub struct IncoherenceContrast {
    pub mode: IncoherenceMode,
    pub mu: f64,
    /// largest `s` with `s < (1+μ)/(2μ)`; `None` when `μ = 0` (every `s`)
    pub formula_s: Option<usize>,
    /// certificate at `q = ∞` and `s = max(1, min(formula_s, K))`, with `κ`
    /// computed from `Ω` under the structure's own block norm
    pub certificate: Certificate,
}

/// The incoherence contrast of `A`; `MI` uses scalar blocks for `μ` and `H`.
pub fn contrast_incoherence(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    mode: IncoherenceMode,
) -> Result<IncoherenceContrast> {
    if !rs.is_identity() {
        return Err(Error::InvalidArgument("incoherence contrasts require B = I".into()));
    }
    let partition = match mode {
        IncoherenceMode::MBI => RepresentationStructure::identity(rs.block_dims().to_vec(), BlockNorm::L2)?,
        IncoherenceMode::MI => RepresentationStructure::standard(rs.dim())?,
    };
    let report = conditions::mutual_block_incoherence(a, &partition)?;
    let mu = match report.mu {
        Incoherence::Finite(mu) => mu,
        Incoherence::Infinite => return Err(Error::InfiniteIncoherence),
    };
    let inv = block_gram_inverses(a, &partition).ok_or(Error::InfiniteIncoherence)?;
    let mut h = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, ck_inv) in inv.iter().enumerate() {
        let r = partition.block_range(k);
        let block = a.columns(r.start, r.len()) * ck_inv / (1.0 + mu);
        h.columns_mut(r.start, r.len()).copy_from(&block);
    }
    let formula_s = report.mu.max_certified_s();
    let s = formula_s.unwrap_or(rs.n_blocks()).clamp(1, rs.n_blocks());
    let certificate = Certificate::from_contrast(a, h, rs, s, Exponent::Inf, &format!("contrast_incoherence/{mode}"))?;
    Ok(IncoherenceContrast { mode, mu, formula_s, certificate })
}

/// How a synthesized contrast was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SynthesisMethod {
    /// globally optimal linear program
    LinearProgram,
    /// heuristic subgradient descent, certified afterwards
    Subgradient,
}

/// Result of minimizing `κ₁^{r,s}(H)`.
#[derive(Clone, Debug)]
pub struct SynthesizedContrast {
    /// certificate at `q = 1` (its `κ` is `κ₁`)
    pub certificate: Certificate,
    pub kappa1: f64,
    pub kappa_inf: f64,
    pub method: SynthesisMethod,
    /// objective reported by the optimizer (LP value or best subgradient value)
    pub optimizer_value: f64,
}

impl SynthesizedContrast {
    fn from_h(
        a: &DMatrix<f64>,
        h: DMatrix<f64>,
        rs: &RepresentationStructure,
        s: usize,
        method: SynthesisMethod,
        value: f64,
    ) -> Result<Self> {
        let tag = match method {
            SynthesisMethod::LinearProgram => "synthesize_kappa/lp",
            SynthesisMethod::Subgradient => "synthesize_kappa/subgradient",
        };
        let certificate = Certificate::from_contrast(a, h, rs, s, Exponent::ONE, tag)?;
        let kappa1 = certificate.kappa;
        let kappa_inf = certificate.kappa_at(s, Exponent::Inf);
        Ok(Self { certificate, kappa1, kappa_inf, method, optimizer_value: value })
    }

    /// `κ₁ < ½`.
    pub fn certifies(&self) -> bool {
        self.kappa1 < 0.5
    }
}

/// `Ã = AB⁺` together with an orthonormal basis `Q` of `range(A·Ker B)`;
/// admissible contrasts satisfy `QᵀH = 0`.
struct Reduced {
    a_tilde: DMatrix<f64>,
    q: DMatrix<f64>,
}

fn reduce(a: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<Reduced> {
    if a.ncols() != rs.signal_dim() {
        return Err(Error::Dimension(format!("A has {} columns, structure expects {}", a.ncols(), rs.signal_dim())));
    }
    if rs.is_identity() {
        return Ok(Reduced { a_tilde: a.clone(), q: DMatrix::zeros(a.nrows(), 0) });
    }
    let b_pinv = linalg::pinv_full_row_rank(rs.b())?;
    let kernel = linalg::null_space(rs.b());
    Ok(Reduced { a_tilde: a * b_pinv, q: linalg::range_basis(&(a * kernel)) })
}

/// Adds the `m×N` contrast variables (column-major) and returns the index of `H[0,0]`.
fn add_contrast_vars(p: &mut ConeProgram, red: &Reduced, n_rep: usize) -> usize {
    let m = red.a_tilde.nrows();
    let first = p.add_vars(m * n_rep);
    if red.q.ncols() > 0 {
        let mut rows = Vec::new();
        for col in 0..n_rep {
            for j in 0..red.q.ncols() {
                let mut e = LinExpr::zero();
                for i in 0..m {
                    e = e.term(first + col * m + i, red.q[(i, j)]);
                }
                rows.push(e);
            }
        }
        p.eq("contrast-vanishes-on-kernel-of-B", rows);
    }
    first
}

/// `V_ab = δ_ab − Σ_i H_{ia} Ã_{ib}` as an affine expression.
fn v_entry(h_first: usize, a_tilde: &DMatrix<f64>, a: usize, b: usize) -> LinExpr {
    let m = a_tilde.nrows();
    let mut e = LinExpr::constant(if a == b { 1.0 } else { 0.0 });
    e.terms.reserve(m);
    for i in 0..m {
        e = e.term(h_first + a * m + i, -a_tilde[(i, b)]);
    }
    e
}

fn h_from_primal(x: &[f64], first: usize, m: usize, n_rep: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(m, n_rep, &x[first..first + m * n_rep])
}

/// Variables `ω_{kℓ} ≥ ‖V^{kℓ}‖_{r,r}` for `r ∈ {1, ∞}` (row-major indices).
fn add_omega_bounds(
    p: &mut ConeProgram,
    rs: &RepresentationStructure,
    h_first: usize,
    a_tilde: &DMatrix<f64>,
    r: BlockNorm,
) -> usize {
    let n = rs.dim();
    let kk = rs.n_blocks();
    let u_first = p.add_vars(n * n);
    let mut abs_rows = Vec::with_capacity(2 * n * n);
    for a in 0..n {
        for b in 0..n {
            let v = v_entry(h_first, a_tilde, a, b);
            let u = u_first + a * n + b;
            abs_rows.push(v.clone().term(u, -1.0));
            abs_rows.push(v.negated().term(u, -1.0));
        }
    }
    p.le("abs-residual", abs_rows);
    let omega_first = p.add_vars(kk * kk);
    let mut rows = Vec::new();
    for k in 0..kk {
        for l in 0..kk {
            let w = omega_first + k * kk + l;
            let (rk, rl) = (rs.block_range(k), rs.block_range(l));
            match r {
                // max row ℓ1 norm of the block
                BlockNorm::Linf => {
                    for a in rk.clone() {
                        let mut e = LinExpr::var(w).negated();
                        for b in rl.clone() {
                            e = e.term(u_first + a * n + b, 1.0);
                        }
                        rows.push(e);
                    }
                }
                // max column ℓ1 norm of the block
                BlockNorm::L1 => {
                    for b in rl.clone() {
                        let mut e = LinExpr::var(w).negated();
                        for a in rk.clone() {
                            e = e.term(u_first + a * n + b, 1.0);
                        }
                        rows.push(e);
                    }
                }
                BlockNorm::L2 => unreachable!("spectral blocks are not LP-representable"),
            }
        }
    }
    p.le("block-norm", rows);
    omega_first
}

/// Builds the LP minimizing `κ₁^{r,s}(H)` for `r ∈ {1, ∞}`; returns the
/// program and the index of the first contrast variable.
pub fn kappa_program(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    s: usize,
    r: BlockNorm,
) -> Result<(ConeProgram, usize)> {
    if r == BlockNorm::L2 {
        return Err(Error::InvalidArgument("the κ-program is linear only for r ∈ {1, ∞}".into()));
    }
    rs.check_s(s)?;
    let red = reduce(a, rs)?;
    Ok(build_kappa_program(&red, rs, s, r))
}

fn build_kappa_program(red: &Reduced, rs: &RepresentationStructure, s: usize, r: BlockNorm) -> (ConeProgram, usize) {
    let kk = rs.n_blocks();
    let mut p = ConeProgram::new();
    let h_first = add_contrast_vars(&mut p, red, rs.dim());
    let omega_first = add_omega_bounds(&mut p, rs, h_first, &red.a_tilde, r);
    let t = p.add_var();
    for l in 0..kk {
        let col: Vec<LinExpr> = (0..kk).map(|k| LinExpr::var(omega_first + k * kk + l)).collect();
        p.top_s_sum_le(&format!("top-s-column-{l}"), &col, s, LinExpr::var(t));
    }
    p.minimize(LinExpr::var(t));
    (p, h_first)
}

/// Minimizes `κ₁^{r,s}(H)`; globally for `r ∈ {1, ∞}`, heuristically for `r = 2`.
pub fn synthesize_kappa(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    s: usize,
    r: BlockNorm,
) -> Result<SynthesizedContrast> {
    synthesize_kappa_with(a, rs, s, r, &SubgradientOptions::default())
}

/// [`synthesize_kappa`] with explicit subgradient settings for `r = 2`.
pub fn synthesize_kappa_with(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    s: usize,
    r: BlockNorm,
    sg: &SubgradientOptions,
) -> Result<SynthesizedContrast> {
    rs.check_s(s)?;
    let rs = rs.with_norm(r);
    let red = reduce(a, &rs)?;
    match r {
        BlockNorm::L1 | BlockNorm::Linf => {
            let (p, h_first) = build_kappa_program(&red, &rs, s, r);
            let rep = optim::solve(&p, &SolverOptions::with_tol(tolerances::LP_TOL))?.into_optimal()?;
            let h = h_from_primal(&rep.primal, h_first, a.nrows(), rs.dim());
            SynthesizedContrast::from_h(a, h, &rs, s, SynthesisMethod::LinearProgram, rep.objective)
        }
        BlockNorm::L2 => synthesize_spectral(a, &rs, &red, s, sg),
    }
}

/// `κ₁^{2,s}` of a contrast and one subgradient with respect to `H`.
fn spectral_kappa_and_subgradient(
    h: &DMatrix<f64>,
    red: &Reduced,
    rs: &RepresentationStructure,
    s: usize,
) -> (f64, DMatrix<f64>) {
    let n = rs.dim();
    let kk = rs.n_blocks();
    let v = DMatrix::identity(n, n) - h.transpose() * &red.a_tilde;
    let mut omega = DMatrix::zeros(kk, kk);
    for k in 0..kk {
        for l in 0..kk {
            omega[(k, l)] = spectral_norm(&conditions::block_of(&v, rs, k, l));
        }
    }
    let (mut best, mut best_l, mut best_support) = (f64::NEG_INFINITY, 0, Vec::new());
    for l in 0..kk {
        let col: Vec<f64> = omega.column(l).iter().copied().collect();
        let support = top_s_indices(&col, s);
        let val: f64 = support.iter().map(|&k| col[k]).sum();
        if val > best {
            (best, best_l, best_support) = (val, l, support);
        }
    }
    // G = Σ_{k ∈ support} u_k v_kᵀ placed in block (k, best_l); ∂f/∂H = −Ã Gᵀ
    let mut g = DMatrix::zeros(n, n);
    let rl = rs.block_range(best_l);
    for &k in &best_support {
        let block = conditions::block_of(&v, rs, k, best_l);
        let svd = block.svd(true, true);
        let (u, vt) = (svd.u.expect("U"), svd.v_t.expect("Vᵀ"));
        let imax = svd.singular_values.imax();
        if svd.singular_values[imax] == 0.0 {
            continue;
        }
        let outer = u.column(imax) * vt.row(imax);
        let rk = rs.block_range(k);
        g.view_mut((rk.start, rl.start), (rk.len(), rl.len())).copy_from(&outer);
    }
    let mut grad = -(&red.a_tilde * g.transpose());
    if red.q.ncols() > 0 {
        grad -= &red.q * (red.q.transpose() * &grad);
    }
    (best, grad)
}

fn synthesize_spectral(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    red: &Reduced,
    s: usize,
    sg: &SubgradientOptions,
) -> Result<SynthesizedContrast> {
    let (m, n) = (a.nrows(), rs.dim());
    let start = if rs.is_identity() {
        contrast_incoherence(a, rs, IncoherenceMode::MBI).ok().map(|c| c.certificate.h)
    } else {
        None
    };
    let start = match start {
        Some(h) => h,
        None => {
            let (p, h_first) = build_kappa_program(red, rs, s, BlockNorm::Linf);
            let rep = optim::solve(&p, &SolverOptions::with_tol(tolerances::LP_TOL))?.into_optimal()?;
            h_from_primal(&rep.primal, h_first, m, n)
        }
    };
    let oracle = |x: &DVector<f64>| {
        let h = DMatrix::from_column_slice(m, n, x.as_slice());
        let (f, g) = spectral_kappa_and_subgradient(&h, red, rs, s);
        Ok((f, DVector::from_column_slice(g.as_slice())))
    };
    let res = optim::subgradient_minimize(oracle, DVector::from_column_slice(start.as_slice()), sg)?;
    let h = DMatrix::from_column_slice(m, n, res.x_best.as_slice());
    SynthesizedContrast::from_h(a, h, rs, s, SynthesisMethod::Subgradient, res.f_best)
}

/// Largest sparsity `3√m/(2√d)` any `Ω`-based certificate with `κ ≤ ½` can
/// reach when `2m ≤ n`, `B = I` and all blocks have size `d`.
pub fn certification_ceiling(m: usize, d: usize) -> f64 {
    1.5 * (m as f64).sqrt() / (d as f64).sqrt()
}

/// Outcome of the linear scan over `s`.
#[derive(Clone, Debug)]
pub struct KappaScan {
    pub r: BlockNorm,
    /// largest `s` with optimal `κ₁ < ½` (0 if none)
    pub s_star: usize,
    /// optimal contrast at `s = 1, 2, …` up to and including the first failure
    pub contrasts: Vec<SynthesizedContrast>,
}

impl KappaScan {
    /// The contrast at `s_star`, or at `s = 1` when nothing is certified.
    pub fn best(&self) -> &SynthesizedContrast {
        &self.contrasts[self.s_star.max(1) - 1]
    }
}

/// Scans `s = 1, 2, …` until the optimal `κ₁` reaches `½`.
pub fn max_certifiable_s(a: &DMatrix<f64>, rs: &RepresentationStructure, r: BlockNorm) -> Result<KappaScan> {
    max_certifiable_s_with(a, rs, r, &SubgradientOptions::default())
}

pub fn max_certifiable_s_with(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    r: BlockNorm,
    sg: &SubgradientOptions,
) -> Result<KappaScan> {
    let mut contrasts = Vec::new();
    let mut s_star = 0;
    for s in 1..=rs.n_blocks() {
        let c = synthesize_kappa_with(a, rs, s, r, sg)?;
        let ok = c.certifies();
        contrasts.push(c);
        if !ok {
            break;
        }
        s_star = s;
    }
    if let (true, Some(d)) = (rs.is_identity(), rs.equal_block_dim()) {
        if 2 * a.nrows() <= a.ncols() && s_star as f64 > certification_ceiling(a.nrows(), d) {
            return Err(Error::Solver(format!(
                "certified s = {s_star} exceeds the ceiling {:.3} for m = {}, d = {d}",
                certification_ceiling(a.nrows(), d),
                a.nrows()
            )));
        }
    }
    Ok(KappaScan { r, s_star, contrasts })
}

/// Largest `s` at which a fixed contrast has `κ₁^{r,s}(H) < ½` (0 if none),
/// with the corresponding `κ₁` and `κ∞` (those at `s = 1` when none).
pub fn certified_level(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    rs: &RepresentationStructure,
    r: BlockNorm,
) -> Result<(usize, f64, f64)> {
    let rs = rs.with_norm(r);
    let v = conditions::residual_v(a, h, &rs)?;
    let omega = conditions::omega_matrix(&v, &rs)?;
    let mut best = (
        0,
        conditions::kappa_from_omega(&omega, 1, Exponent::ONE),
        conditions::kappa_from_omega(&omega, 1, Exponent::Inf),
    );
    for s in 1..=rs.n_blocks() {
        let k1 = conditions::kappa_from_omega(&omega, s, Exponent::ONE);
        if k1 >= 0.5 {
            break;
        }
        best = (s, k1, conditions::kappa_from_omega(&omega, s, Exponent::Inf));
    }
    Ok(best)
}
