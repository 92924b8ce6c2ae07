//! Verification of the recovery condition `Q_{s,q}(κ)` through the residual
//! matrix `V`, the block-norm matrix `Ω` and the bound `ν̂_{s,q}(V)`, together
//! with incoherence and block-RIP diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockmodel::{operator_norm, sp_norm, BlockNorm, Exponent, RepresentationStructure};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tolerances;

/// A contrast `H` together with its residual `V` and the certified `κ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "H", with = "crate::io::rows")]
    pub h: DMatrix<f64>,
    #[serde(rename = "V", with = "crate::io::rows")]
    pub v: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub omega: DMatrix<f64>,
    pub block_dims: Vec<usize>,
    pub s: usize,
    pub q: Exponent,
    pub r: BlockNorm,
    pub kappa: f64,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub provenance: String,
}

impl Certificate {
    /// Builds the certificate for contrast `h` at `(s, q)` with the smallest
    /// certifiable `κ`.
    pub fn from_contrast(
        a: &DMatrix<f64>,
        h: DMatrix<f64>,
        rs: &RepresentationStructure,
        s: usize,
        q: Exponent,
        provenance: &str,
    ) -> Result<Self> {
        let r = rs.require_uniform_norm()?;
        rs.check_s(s)?;
        let v = residual_v(a, &h, rs)?;
        let omega = omega_matrix(&v, rs)?;
        let kappa = kappa_from_omega(&omega, s, q);
        Ok(Self {
            h,
            v,
            omega,
            block_dims: rs.block_dims().to_vec(),
            s,
            q,
            r,
            kappa,
            rho: None,
            epsilon: None,
            provenance: provenance.to_string(),
        })
    }

    /// Smallest `κ` certified by the stored `Ω` at `(s, q)`.
    pub fn kappa_at(&self, s: usize, q: Exponent) -> f64 {
        kappa_from_omega(&self.omega, s, q)
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }
}

/// `V = (B − HᵀA)B⁺`, which is `I − HᵀA` when `B = I`.
pub fn residual_v(a: &DMatrix<f64>, h: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<DMatrix<f64>> {
    check_shapes(a, h, rs)?;
    let hta = h.transpose() * a;
    if rs.is_identity() {
        return Ok(DMatrix::identity(rs.dim(), rs.dim()) - hta);
    }
    let b_pinv = linalg::pinv_full_row_rank(rs.b())?;
    Ok((rs.b() - hta) * b_pinv)
}

fn check_shapes(a: &DMatrix<f64>, h: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<()> {
    if a.ncols() != rs.signal_dim() {
        return Err(Error::Dimension(format!(
            "A has {} columns, structure expects signals of length {}",
            a.ncols(),
            rs.signal_dim()
        )));
    }
    if h.nrows() != a.nrows() || h.ncols() != rs.dim() {
        return Err(Error::Dimension(format!("H is {}×{}, expected {}×{}", h.nrows(), h.ncols(), a.nrows(), rs.dim())));
    }
    Ok(())
}

/// Block `V^{kℓ}` of a matrix partitioned conformally with `rs`.
pub fn block_of(v: &DMatrix<f64>, rs: &RepresentationStructure, k: usize, l: usize) -> DMatrix<f64> {
    let rk = rs.block_range(k);
    let rl = rs.block_range(l);
    v.view((rk.start, rl.start), (rk.len(), rl.len())).into_owned()
}

/// `Ω` with `Ω[k][ℓ] = ‖V^{kℓ}‖_{r,r}` for the uniform block norm `r`.
pub fn omega_matrix(v: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<DMatrix<f64>> {
    let r = rs.require_uniform_norm()?;
    if v.nrows() != rs.dim() || v.ncols() != rs.dim() {
        return Err(Error::Dimension(format!("V is {}×{}, expected {n}×{n}", v.nrows(), v.ncols(), n = rs.dim())));
    }
    let kk = rs.n_blocks();
    let mut omega = DMatrix::zeros(kk, kk);
    for k in 0..kk {
        for l in 0..kk {
            omega[(k, l)] = operator_norm(&block_of(v, rs, k, l), r, r)?;
        }
    }
    Ok(omega)
}

/// `max_ℓ ‖Col_ℓ Ω‖_{s,q}`.
pub fn nu_hat_from_omega(omega: &DMatrix<f64>, s: usize, q: Exponent) -> f64 {
    omega.column_iter().map(|c| sp_norm(c.as_slice(), s, q)).fold(0.0, f64::max)
}

/// `s^{1−1/q} · max_ℓ ‖Col_ℓ Ω‖_{s,q}`.
pub fn kappa_from_omega(omega: &DMatrix<f64>, s: usize, q: Exponent) -> f64 {
    (s as f64).powf(1.0 - q.recip()) * nu_hat_from_omega(omega, s, q)
}

/// `ν̂_{s,q}(V)`.
pub fn nu_hat(v: &DMatrix<f64>, rs: &RepresentationStructure, s: usize, q: Exponent) -> Result<f64> {
    rs.check_s(s)?;
    Ok(nu_hat_from_omega(&omega_matrix(v, rs)?, s, q))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub valid: bool,
    pub kappa_min: f64,
    pub margin: f64,
    /// relative Frobenius residual of `VB + HᵀA = B`
    pub residual: f64,
}

/// Checks the residual identity and the `Ω` bound at the stored `(s, q, κ)`.
pub fn verify_certificate(cert: &Certificate, a: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<Verification> {
    check_shapes(a, &cert.h, rs)?;
    if cert.v.nrows() != rs.dim() || cert.v.ncols() != rs.dim() {
        return Err(Error::Dimension(format!(
            "V is {}×{}, expected {n}×{n}",
            cert.v.nrows(),
            cert.v.ncols(),
            n = rs.dim()
        )));
    }
    if cert.block_dims != rs.block_dims() {
        return Err(Error::Dimension("certificate block partition differs from the structure".into()));
    }
    let rs = rs.with_norm(cert.r);
    rs.check_s(cert.s)?;
    let lhs = &cert.v * rs.b() + cert.h.transpose() * a;
    let residual = linalg::rel_frobenius(&lhs, rs.b());
    let omega = omega_matrix(&cert.v, &rs)?;
    let kappa_min = kappa_from_omega(&omega, cert.s, cert.q);
    let margin = cert.kappa - kappa_min;
    let valid = residual <= tolerances::RESIDUAL_IDENTITY && margin >= -tolerances::CERTIFICATE_MARGIN;
    Ok(Verification { valid, kappa_min, margin, residual })
}

/// Moves a certificate from `(s, q)` to `(s', q')` with `s' ≤ s`, `q' ≥ q`.
///
/// `H` is scaled by `c = s^{1/q}(s')^{−1/q'}` and `κ' = κ·s^{1/q−1}(s')^{1−1/q'}`.
/// `V` becomes `(1−c)I + cV` so that `VB + HᵀA = B` keeps holding. The result
/// is tagged as derived and is not re-verified here.
pub fn rescale_certificate(cert: &Certificate, s_new: usize, q_new: Exponent) -> Result<Certificate> {
    if s_new == 0 || s_new > cert.s {
        return Err(Error::InvalidArgument(format!("rescaling needs 1 ≤ s' ≤ s = {}, got {s_new}", cert.s)));
    }
    if q_new < cert.q {
        return Err(Error::InvalidArgument(format!("rescaling needs q' ≥ q = {}, got {q_new}", cert.q)));
    }
    let (s, s2) = (cert.s as f64, s_new as f64);
    let c = s.powf(cert.q.recip()) * s2.powf(-q_new.recip());
    let kappa = cert.kappa * s.powf(cert.q.recip() - 1.0) * s2.powf(1.0 - q_new.recip());
    let n = cert.v.nrows();
    let v = DMatrix::identity(n, n) * (1.0 - c) + &cert.v * c;
    let rs = RepresentationStructure::identity(cert.block_dims.clone(), cert.r)?;
    let omega = omega_matrix(&v, &rs)?;
    Ok(Certificate {
        h: &cert.h * c,
        v,
        omega,
        block_dims: cert.block_dims.clone(),
        s: s_new,
        q: q_new,
        r: cert.r,
        kappa,
        rho: cert.rho.map(|r| r * c),
        epsilon: cert.epsilon,
        provenance: format!("derived-by-rescaling({})", cert.provenance),
    })
}

/// `κ·s^{1/q−1}`, the quantity preserved by [`rescale_certificate`].
pub fn rescale_invariant(kappa: f64, s: usize, q: Exponent) -> f64 {
    kappa * (s as f64).powf(q.recip() - 1.0)
}

/// Re-reads an `ℓ2`-block certificate under `ℓ∞` block norms, with `κ → √d κ`
/// where `d` is the largest block size. Not re-verified.
pub fn relax_l2_to_linf(cert: &Certificate) -> Result<Certificate> {
    if cert.r != BlockNorm::L2 {
        return Err(Error::InvalidArgument("relaxation applies to ℓ2-block certificates".into()));
    }
    let d = cert.block_dims.iter().copied().max().unwrap_or(1) as f64;
    let rs = RepresentationStructure::identity(cert.block_dims.clone(), BlockNorm::Linf)?;
    Ok(Certificate {
        omega: omega_matrix(&cert.v, &rs)?,
        r: BlockNorm::Linf,
        kappa: d.sqrt() * cert.kappa,
        provenance: format!("derived-by-l2-to-linf({})", cert.provenance),
        ..cert.clone()
    })
}

/// `RHS − LHS` of `L_{s,q}(Bx) ≤ s^{1/q} L_∞(HᵀAx) + κ s^{1/q−1} L₁(Bx)` at a
/// single signal `x`; negative values are violations.
pub fn condition_slack(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    rs: &RepresentationStructure,
    s: usize,
    q: Exponent,
    kappa: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    let w = rs.represent(x);
    let lhs = rs.lsp(w.as_slice(), s, q)?;
    let hax = rs.lp((h.transpose() * (a * x)).as_slice(), Exponent::Inf);
    let sf = s as f64;
    let l1 = rs.lp(w.as_slice(), Exponent::ONE);
    Ok(sf.powf(q.recip()) * hax + kappa * sf.powf(q.recip() - 1.0) * l1 - lhs)
}

/// Incoherence value that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Incoherence {
    Finite(f64),
    Infinite,
}

impl Incoherence {
    pub fn value(self) -> f64 {
        match self {
            Incoherence::Finite(v) => v,
            Incoherence::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Incoherence::Finite(v) => Some(v),
            Incoherence::Infinite => None,
        }
    }

    /// Largest `s ≥ 1` with `s < (1+μ)/(2μ)`, or 0 when none; `None` means unlimited (μ = 0).
    pub fn max_certified_s(self) -> Option<usize> {
        match self {
            Incoherence::Infinite => Some(0),
            Incoherence::Finite(0.0) => None,
            Incoherence::Finite(mu) => {
                let bound = (1.0 + mu) / (2.0 * mu);
                let s = bound.ceil() as usize;
                Some(if (s as f64) < bound { s } else { s.saturating_sub(1) })
            }
        }
    }
}

impl Serialize for Incoherence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Incoherence::Finite(v) => s.serialize_f64(*v),
            Incoherence::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IncoherenceReport {
    pub mu: Incoherence,
    /// within-block column coherence (equal block sizes, unit columns)
    pub nu: Option<f64>,
    pub mu_b: Option<f64>,
    pub chi: Option<f64>,
    pub mu_bar: Option<f64>,
}

/// Inverses of the block Gram matrices `C_k = A[k]ᵀA[k]`, `None` if one is singular.
pub(crate) fn block_gram_inverses(a: &DMatrix<f64>, rs: &RepresentationStructure) -> Option<Vec<DMatrix<f64>>> {
    (0..rs.n_blocks())
        .map(|k| {
            let r = rs.block_range(k);
            let ak = a.columns(r.start, r.len());
            linalg::spd_inverse(&(ak.transpose() * ak))
        })
        .collect()
}

fn require_identity_b(a: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<()> {
    if !rs.is_identity() {
        return Err(Error::InvalidArgument("operation requires B = I".into()));
    }
    if a.ncols() != rs.dim() {
        return Err(Error::Dimension(format!("A has {} columns, structure has {}", a.ncols(), rs.dim())));
    }
    Ok(())
}

/// Mutual block-incoherence `μ = max_{k≠ℓ} σ_max(C_k⁻¹A[k]ᵀA[ℓ])` and the
/// related coherence quantities for equal blocks with unit columns.
pub fn mutual_block_incoherence(a: &DMatrix<f64>, rs: &RepresentationStructure) -> Result<IncoherenceReport> {
    require_identity_b(a, rs)?;
    let kk = rs.n_blocks();
    let blocks: Vec<DMatrix<f64>> = (0..kk)
        .map(|k| {
            let r = rs.block_range(k);
            a.columns(r.start, r.len()).into_owned()
        })
        .collect();
    let mu = match block_gram_inverses(a, rs) {
        None => Incoherence::Infinite,
        Some(inv) => {
            let mut mu = 0.0f64;
            for k in 0..kk {
                let left = &inv[k] * blocks[k].transpose();
                for l in (0..kk).filter(|&l| l != k) {
                    mu = mu.max(linalg_sigma_max(&(&left * &blocks[l])));
                }
            }
            Incoherence::Finite(mu)
        }
    };
    let unit_columns = a.column_iter().all(|c| (c.norm() - 1.0).abs() <= 1e-9);
    let (mut nu, mut mu_b, mut chi, mut mu_bar) = (None, None, None, None);
    if let (Some(d), true) = (rs.equal_block_dim(), unit_columns) {
        let mut nu_v = 0.0f64;
        let mut mub = 0.0f64;
        for k in 0..kk {
            let gk = blocks[k].transpose() * &blocks[k];
            for i in 0..d {
                for j in (0..d).filter(|&j| j != i) {
                    nu_v = nu_v.max(gk[(i, j)].abs());
                }
            }
            for l in (0..kk).filter(|&l| l != k) {
                mub = mub.max(linalg_sigma_max(&(blocks[k].transpose() * &blocks[l])));
            }
        }
        let mub = mub / d as f64;
        nu = Some(nu_v);
        mu_b = Some(mub);
        let df = d as f64;
        let premise = 1.0 - (df - 1.0) * nu_v;
        if premise > 0.0 {
            chi = Some((premise + df * mub) / (2.0 * df * mub));
            mu_bar = Some(df * mub / premise);
        }
    }
    Ok(IncoherenceReport { mu, nu, mu_b, chi, mu_bar })
}

fn linalg_sigma_max(m: &DMatrix<f64>) -> f64 {
    crate::blockmodel::spectral_norm(m)
}

/// Default cap on the number of supports enumerated by [`brip_brute_force`].
pub const BRIP_BUDGET: u128 = 100_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Visits all `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Smallest `δ` for which `A` satisfies block-RIP of order `k`, by enumerating
/// every `k`-block support.
pub fn brip_brute_force(a: &DMatrix<f64>, rs: &RepresentationStructure, k: usize) -> Result<f64> {
    require_identity_b(a, rs)?;
    rs.check_s(k)?;
    let count = binomial(rs.n_blocks(), k);
    if count > BRIP_BUDGET {
        return Err(Error::BudgetExceeded { count, budget: BRIP_BUDGET });
    }
    let mut delta = 0.0f64;
    for_each_subset(rs.n_blocks(), k, |support| {
        let cols: Vec<usize> = support.iter().flat_map(|&b| rs.block_range(b)).collect();
        let sub = a.select_columns(&cols);
        let gram = sub.transpose() * &sub;
        let eig = gram.symmetric_eigenvalues();
        let lo = eig.iter().fold(f64::INFINITY, |m, &e| m.min(e));
        let hi = eig.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
        delta = delta.max((1.0 - lo).max(hi - 1.0));
    });
    Ok(delta)
}

/// Norm paired with a block-RIP contrast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ContrastNorm {
    /// plain Euclidean norm of `Hᵀ(·)`
    L2,
    /// `L_∞` of `Hᵀ(·)` under the `ℓ2` block structure
    LInf,
}

/// Contrast obtained from a block-RIP constant. These are verification-only
/// objects: the `Ω` machinery does not apply to them.
#[derive(Clone, Debug, Serialize)]
pub struct BripCertificate {
    #[serde(rename = "H", with = "crate::io::rows")]
    pub h: DMatrix<f64>,
    pub norm: ContrastNorm,
    pub s: usize,
    pub q: Exponent,
    pub r: BlockNorm,
    pub kappa: f64,
    /// set when `κ ≥ ½`, i.e. the certificate does not validate recovery
    pub warning: bool,
}

/// The two contrasts implied by block-RIP of order `2s` with constant `δ`:
/// `s^{−1/2}(1−δ)^{−1/2} I_m` with the Euclidean norm and `(1−δ)^{−1} A` with
/// `L_∞`, both at `q = 2` and `κ = δ/(1−δ)`.
pub fn brip_certificate(a: &DMatrix<f64>, delta: f64, s: usize) -> Result<(BripCertificate, BripCertificate)> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("δ must lie in [0, 1), got {delta}")));
    }
    if s == 0 {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    let kappa = delta / (1.0 - delta);
    let m = a.nrows();
    let base = |h: DMatrix<f64>, norm| BripCertificate {
        h,
        norm,
        s,
        q: Exponent::TWO,
        r: BlockNorm::L2,
        kappa,
        warning: kappa >= 0.5,
    };
    let scale = 1.0 / ((s as f64).sqrt() * (1.0 - delta).sqrt());
    Ok((base(DMatrix::identity(m, m) * scale, ContrastNorm::L2), base(a / (1.0 - delta), ContrastNorm::LInf)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn residual_examples() {
        let rs = RepresentationStructure::standard(2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let v = residual_v(&a, &DMatrix::identity(2, 2), &rs).unwrap();
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
        let v = residual_v(&a, &DMatrix::zeros(2, 2), &rs).unwrap();
        assert_eq!(v, DMatrix::identity(2, 2));
    }

    #[test]
    fn residual_identity_with_general_b() {
        let b = gaussian(4, 6, 1);
        let a = gaussian(3, 6, 2);
        let h = gaussian(3, 4, 3);
        let rs = RepresentationStructure::new(b.clone(), vec![2, 2], vec![BlockNorm::L2]).unwrap();
        let v = residual_v(&a, &h, &rs).unwrap();
        // VB + HᵀA = B holds exactly when HᵀA vanishes on Ker B; here it only
        // holds after projecting onto the row space of B.
        let pinv = linalg::pinv_full_row_rank(&b).unwrap();
        let lhs = (&v * &b + h.transpose() * &a) * &pinv;
        assert!((lhs - &b * &pinv).norm() < 1e-10);
    }

    #[test]
    fn nu_hat_examples() {
        let rs = RepresentationStructure::uniform(6, 2, BlockNorm::L2).unwrap();
        assert_eq!(nu_hat(&DMatrix::zeros(6, 6), &rs, 1, Exponent::Inf).unwrap(), 0.0);
        for r in BlockNorm::ALL {
            let rs = rs.with_norm(r);
            let id = DMatrix::identity(6, 6);
            assert_eq!(omega_matrix(&id, &rs).unwrap(), DMatrix::identity(3, 3));
            assert_eq!(nu_hat(&id, &rs, 1, Exponent::Inf).unwrap(), 1.0);
        }
    }

    #[test]
    fn nu_hat_matches_exhaustive_top_two() {
        let rs = RepresentationStructure::uniform(8, 2, BlockNorm::Linf).unwrap();
        let v = gaussian(8, 8, 5);
        let omega = omega_matrix(&v, &rs).unwrap();
        let mut best = 0.0f64;
        for l in 0..4 {
            for i in 0..4 {
                for j in i + 1..4 {
                    best = best.max(omega[(i, l)] + omega[(j, l)]);
                }
            }
        }
        assert_abs_diff_eq!(nu_hat(&v, &rs, 2, Exponent::ONE).unwrap(), best, epsilon = 1e-12);
    }

    fn cert(a: &DMatrix<f64>, h: DMatrix<f64>, rs: &RepresentationStructure, s: usize, q: Exponent) -> Certificate {
        Certificate::from_contrast(a, h, rs, s, q, "test").unwrap()
    }

    #[test]
    fn verify_examples() {
        let rs = RepresentationStructure::standard(3).unwrap();
        let a = DMatrix::identity(3, 3);
        let c = cert(&a, DMatrix::identity(3, 3), &rs, 2, Exponent::TWO);
        let ver = verify_certificate(&c, &a, &rs).unwrap();
        assert!(ver.valid);
        assert_eq!(ver.kappa_min, 0.0);

        let mut c = cert(&a, DMatrix::zeros(3, 3), &rs, 1, Exponent::Inf);
        c.kappa = 0.4;
        let ver = verify_certificate(&c, &a, &rs).unwrap();
        assert!(!ver.valid);
        assert_abs_diff_eq!(ver.kappa_min, 1.0);
    }

    #[test]
    fn tampered_contrast_fails_residual_check() {
        let rs = RepresentationStructure::uniform(8, 2, BlockNorm::L2).unwrap();
        let a = gaussian(6, 8, 9);
        let mut c = cert(&a, gaussian(6, 8, 10) * 0.1, &rs, 1, Exponent::Inf);
        assert!(verify_certificate(&c, &a, &rs).unwrap().valid);
        c.h[(0, 0)] += 1e-3;
        let ver = verify_certificate(&c, &a, &rs).unwrap();
        assert!(!ver.valid);
        assert!(ver.residual > 1e-8);
    }

    #[test]
    fn rescale_examples() {
        let rs = RepresentationStructure::uniform(8, 2, BlockNorm::Linf).unwrap();
        let a = gaussian(6, 8, 11);
        let c = cert(&a, gaussian(6, 8, 12) * 0.2, &rs, 4, Exponent::Inf);
        let same = rescale_certificate(&c, 4, Exponent::Inf).unwrap();
        assert_eq!(same.h, c.h);
        assert_abs_diff_eq!(same.kappa, c.kappa, epsilon = 1e-15);
        let half = rescale_certificate(&c, 2, Exponent::Inf).unwrap();
        assert_eq!(half.h, c.h);
        assert_abs_diff_eq!(half.kappa, c.kappa / 2.0, epsilon = 1e-15);
        assert!(verify_certificate(&half, &a, &rs).unwrap().valid);
        assert!(rescale_certificate(&c, 5, Exponent::Inf).is_err());
        let c1 = cert(&a, c.h.clone(), &rs, 2, Exponent::TWO);
        assert!(rescale_certificate(&c1, 2, Exponent::ONE).is_err());
    }

    #[test]
    fn l2_to_linf_relaxation() {
        let rs = RepresentationStructure::uniform(8, 4, BlockNorm::L2).unwrap();
        let a = gaussian(6, 8, 13);
        let c = cert(&a, gaussian(6, 8, 14) * 0.1, &rs, 1, Exponent::Inf);
        let relaxed = relax_l2_to_linf(&c).unwrap();
        assert_abs_diff_eq!(relaxed.kappa, 2.0 * c.kappa, epsilon = 1e-15);
        assert_eq!(relaxed.r, BlockNorm::Linf);
        assert_eq!(relaxed.h, c.h);
    }

    #[test]
    fn incoherence_examples() {
        let rs = RepresentationStructure::uniform(4, 2, BlockNorm::L2).unwrap();
        let rep = mutual_block_incoherence(&DMatrix::identity(4, 4), &rs).unwrap();
        assert_eq!(rep.mu, Incoherence::Finite(0.0));
        assert_eq!(rep.nu, Some(0.0));

        let half = gaussian(4, 2, 3);
        let mut a = DMatrix::zeros(4, 4);
        a.columns_mut(0, 2).copy_from(&half);
        a.columns_mut(2, 2).copy_from(&half);
        let mu = mutual_block_incoherence(&a, &rs).unwrap().mu.value();
        assert!(mu >= 1.0 - 1e-12);

        let mut sing = DMatrix::identity(4, 4);
        sing.set_column(1, &sing.column(0).into_owned());
        assert_eq!(mutual_block_incoherence(&sing, &rs).unwrap().mu, Incoherence::Infinite);
    }

    #[test]
    fn incoherence_matches_svd_oracle() {
        let rs = RepresentationStructure::uniform(8, 2, BlockNorm::L2).unwrap();
        let a = gaussian(6, 8, 21);
        let mu = mutual_block_incoherence(&a, &rs).unwrap().mu.value();
        let mut oracle = 0.0f64;
        for k in 0..4 {
            let ak = a.columns(2 * k, 2);
            let ck = ak.transpose() * ak;
            let ck_inv = ck.clone().try_inverse().unwrap();
            for l in (0..4).filter(|&l| l != k) {
                let m = &ck_inv * ak.transpose() * a.columns(2 * l, 2);
                let sv = m.svd(false, false).singular_values;
                oracle = oracle.max(sv.max());
            }
        }
        assert_abs_diff_eq!(mu, oracle, epsilon = 1e-10);
    }

    #[test]
    fn max_certified_s_from_mu() {
        assert_eq!(Incoherence::Finite(1.0).max_certified_s(), Some(0));
        // (1+0.2)/0.4 = 3 → s < 3 → 2
        assert_eq!(Incoherence::Finite(0.2).max_certified_s(), Some(2));
        assert_eq!(Incoherence::Finite(0.3).max_certified_s(), Some(2));
        assert_eq!(Incoherence::Finite(0.0).max_certified_s(), None);
        assert_eq!(Incoherence::Infinite.max_certified_s(), Some(0));
    }

    #[test]
    fn brip_examples() {
        let rs = RepresentationStructure::uniform(4, 2, BlockNorm::L2).unwrap();
        assert_abs_diff_eq!(brip_brute_force(&DMatrix::identity(4, 4), &rs, 2).unwrap(), 0.0, epsilon = 1e-12);
        let mut a = DMatrix::identity(4, 4);
        a.set_column(2, &a.column(0).into_owned());
        assert!(brip_brute_force(&a, &rs, 2).unwrap() >= 1.0 - 1e-12);
        let big = RepresentationStructure::standard(40).unwrap();
        assert!(matches!(brip_brute_force(&DMatrix::identity(40, 40), &big, 20), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn brip_certificate_examples() {
        let a = gaussian(3, 5, 1);
        let (c1, c2) = brip_certificate(&a, 0.0, 1).unwrap();
        assert_eq!(c1.h, DMatrix::identity(3, 3));
        assert_eq!(c1.kappa, 0.0);
        assert_eq!(c2.h, a);
        let (c1, _) = brip_certificate(&a, 0.5, 1).unwrap();
        assert_abs_diff_eq!(c1.kappa, 1.0);
        assert!(c1.warning);
        let (c1, _) = brip_certificate(&a, 0.2, 3).unwrap();
        assert_abs_diff_eq!(c1.kappa, 0.25, epsilon = 1e-15);
        assert!(!c1.warning);
        assert!(brip_certificate(&a, 1.0, 1).is_err());
    }

    #[test]
    fn certificate_json_round_trip() {
        let rs = RepresentationStructure::uniform(4, 2, BlockNorm::L2).unwrap();
        let a = gaussian(3, 4, 2);
        let c = cert(&a, gaussian(3, 4, 3), &rs, 1, Exponent::Inf);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"q\":\"inf\""));
        assert!(text.contains("\"r\":\"2\""));
        let back: Certificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back.h, c.h);
        assert_eq!(back.q, Exponent::Inf);
    }
}
