use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blockmodel::{top_s_indices, BlockNorm, Exponent, RepresentationStructure};
use crate::error::Result;
use crate::linalg;
use crate::optim::{self, ConeProgram, LinExpr, SolverOptions};
use crate::tolerances;

/// Supports examined per sparsity level unless the caller says otherwise.
pub const DEFAULT_GOODNESS_BUDGET: usize = 200;

/// Local iterations of the linearization for one starting support.
const LINEARIZATION_STEPS: usize = 20;

/// Outcome of the search for kernel vectors violating the nullspace property.
#[derive(Clone, Debug)]
pub struct GoodnessBound {
    /// `s − 1` for the smallest `s` with a witness; `None` if no witness was found
    pub s_bar: Option<usize>,
    /// kernel vector `x` with `L_{s,1}(Bx) ≥ ½ L₁(Bx)`
    pub witness: Option<DVector<f64>>,
    /// `L_{s,1}(Bx)/L₁(Bx)` of the witness, or the best ratio seen at the largest `s` tried
    pub ratio: f64,
    /// starting supports examined over all `s`
    pub candidates: usize,
}

struct Search<'a> {
    w_basis: DMatrix<f64>,
    rs: &'a RepresentationStructure,
    r: BlockNorm,
}

impl Search<'_> {
    fn ratio(&self, w: &DVector<f64>, s: usize) -> f64 {
        let mags = self.rs.magnitudes(w.as_slice());
        let total: f64 = mags.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        crate::blockmodel::sp_norm(&mags, s, Exponent::ONE) / total
    }

    fn block_rows(&self, support: &[usize]) -> DMatrix<f64> {
        let rows: Vec<usize> = support.iter().flat_map(|&k| self.rs.block_range(k)).collect();
        self.w_basis.select_rows(&rows)
    }

    /// Dual vector `g` with `‖g‖_* = 1` and `gᵀv = ‖v‖_r`.
    fn subgradient(&self, v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; v.len()];
        match self.r {
            BlockNorm::Linf => {
                let j = (0..v.len()).fold(0, |b, j| if v[j].abs() > v[b].abs() { j } else { b });
                g[j] = if v[j] < 0.0 { -1.0 } else { 1.0 };
            }
            BlockNorm::L1 => {
                for (gi, vi) in g.iter_mut().zip(v) {
                    *gi = if *vi < 0.0 { -1.0 } else { 1.0 };
                }
            }
            BlockNorm::L2 => {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    for (gi, vi) in g.iter_mut().zip(v) {
                        *gi = vi / n;
                    }
                } else {
                    g[0] = 1.0;
                }
            }
        }
        g
    }

    /// `max Σ_{k∈I} g_kᵀ(Wc)[k]` subject to `L₁(Wc) ≤ 1`.
    fn linear_step(&self, support: &[usize], w: &DVector<f64>) -> Result<DVector<f64>> {
        let p_dim = self.w_basis.ncols();
        let mut p = ConeProgram::new();
        let c = p.add_vars(p_dim);
        let row = |i: usize| (0..p_dim).fold(LinExpr::zero(), |e, j| e.term(c + j, self.w_basis[(i, j)]));
        let mut objective = LinExpr::zero();
        for &k in support {
            let range = self.rs.block_range(k);
            let g = self.subgradient(&w.as_slice()[range.clone()]);
            for (gi, i) in g.into_iter().zip(range) {
                objective = objective.plus(&row(i).scaled(-gi));
            }
        }
        let mut total = LinExpr::constant(-1.0);
        for k in 0..self.rs.n_blocks() {
            let exprs: Vec<LinExpr> = self.rs.block_range(k).map(row).collect();
            let t = p.norm_epigraph("block", &exprs, self.r);
            total = total.term(t, 1.0);
        }
        p.le("unit-l1", vec![total]);
        p.minimize(objective);
        let tol = if self.r == BlockNorm::L2 { tolerances::SOCP_TOL.min(1e-8) } else { tolerances::LP_TOL };
        let rep = optim::solve(&p, &SolverOptions::with_tol(tol))?.into_optimal()?;
        Ok(&self.w_basis * DVector::from_column_slice(&rep.primal[c..c + p_dim]))
    }

    /// Successive linearization from a starting support; returns the best
    /// representation found and its ratio at level `s`.
    fn climb(&self, support: &[usize], s: usize) -> Result<(DVector<f64>, f64)> {
        let sub = self.block_rows(support);
        let svd = sub.svd(false, true);
        let vt = svd.v_t.expect("Vᵀ");
        let imax = svd.singular_values.imax();
        let mut w = &self.w_basis * vt.row(imax).transpose();
        let mut best = (w.clone(), self.ratio(&w, s));
        let mut current = support.to_vec();
        for _ in 0..LINEARIZATION_STEPS {
            let next = self.linear_step(&current, &w)?;
            let ratio = self.ratio(&next, s);
            let improved = ratio > best.1 + 1e-10;
            if ratio > best.1 {
                best = (next.clone(), ratio);
            }
            let mags = self.rs.magnitudes(next.as_slice());
            let new_support = top_s_indices(&mags, s);
            if !improved && new_support == current {
                break;
            }
            w = next;
            current = new_support;
        }
        Ok(best)
    }
}

/// Searches `Ker A` for `x` with `L_{s,1}(Bx) ≥ ½ L₁(Bx)` at increasing `s`.
///
/// A witness at level `s` proves that no contrast certifies `s`, giving the
/// upper bound `s̄ = s − 1`. Without a witness nothing is claimed.
pub fn goodness_upper_bound(
    a: &DMatrix<f64>,
    rs: &RepresentationStructure,
    r: BlockNorm,
    budget: usize,
) -> Result<GoodnessBound> {
    let rs = rs.with_norm(r);
    if !rs.is_identity() {
        // full row rank is required for the representation of kernel vectors
        linalg::pinv_full_row_rank(rs.b())?;
    }
    let z = linalg::null_space(a);
    let none = |candidates| GoodnessBound { s_bar: None, witness: None, ratio: 0.0, candidates };
    if z.ncols() == 0 {
        return Ok(none(0));
    }
    let w_basis = rs.b() * &z;
    if w_basis.norm() <= tolerances::RANK {
        return Ok(none(0));
    }
    let search = Search { w_basis, rs: &rs, r };
    let kk = rs.n_blocks();
    let energy: Vec<f64> = (0..kk).map(|k| search.block_rows(&[k]).norm()).collect();
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&x, &y| energy[y].total_cmp(&energy[x]));
    let mut candidates = 0;
    let mut carried: Option<DVector<f64>> = None;
    let mut last_ratio = 0.0;
    for s in 1..=kk {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ s as u64);
        let mut tried: HashSet<Vec<usize>> = HashSet::new();
        let mut best: Option<(DVector<f64>, f64)> = None;
        let mut queue: Vec<Vec<usize>> = Vec::new();
        if let Some(w) = &carried {
            queue.push(top_s_indices(&rs.magnitudes(w.as_slice()), s));
        }
        let mut greedy: Vec<usize> = order[..s].to_vec();
        greedy.sort_unstable();
        queue.push(greedy);
        let mut used = 0;
        while used < budget {
            let support = match queue.pop() {
                Some(sup) => sup,
                None => {
                    // 2-swaps around the incumbent, then random supports
                    let mut next = None;
                    if let Some((w, _)) = &best {
                        let inc = top_s_indices(&rs.magnitudes(w.as_slice()), s);
                        'swap: for &out in inc.iter().rev() {
                            for &inn in &order {
                                if inc.contains(&inn) {
                                    continue;
                                }
                                let mut cand: Vec<usize> = inc.iter().copied().filter(|&k| k != out).collect();
                                cand.push(inn);
                                cand.sort_unstable();
                                if !tried.contains(&cand) {
                                    next = Some(cand);
                                    break 'swap;
                                }
                            }
                        }
                    }
                    match next {
                        Some(c) => c,
                        None => {
                            let mut cand = rand::seq::index::sample(&mut rng, kk, s).into_vec();
                            cand.sort_unstable();
                            if tried.contains(&cand) && tried.len() as u128 >= binomial(kk, s) {
                                break;
                            }
                            cand
                        }
                    }
                }
            };
            if !tried.insert(support.clone()) {
                continue;
            }
            used += 1;
            let (w, ratio) = search.climb(&support, s)?;
            if best.as_ref().is_none_or(|b| ratio > b.1) {
                best = Some((w, ratio));
            }
            let (bw, br) = best.as_ref().expect("set above");
            if *br >= 0.5 - tolerances::NULLSPACE_RATIO {
                let coeffs = solve_coefficients(&search.w_basis, bw);
                return Ok(GoodnessBound {
                    s_bar: Some(s - 1),
                    witness: Some(&z * coeffs),
                    ratio: *br,
                    candidates: candidates + used,
                });
            }
        }
        candidates += used;
        if let Some((w, ratio)) = best {
            last_ratio = ratio;
            carried = Some(w);
        }
    }
    Ok(GoodnessBound { s_bar: None, witness: None, ratio: last_ratio, candidates })
}

/// Coefficients `c` with `Wc = w` for `w` in the range of `W`.
fn solve_coefficients(w_basis: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    w_basis.clone().svd(true, true).solve(w, 1e-12).expect("SVD with both factors")
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn duplicated_identity_has_witness_at_one() {
        let mut a = DMatrix::zeros(3, 6);
        a.columns_mut(0, 3).copy_from(&DMatrix::identity(3, 3));
        a.columns_mut(3, 3).copy_from(&DMatrix::identity(3, 3));
        let rs = RepresentationStructure::standard(6).unwrap();
        for r in BlockNorm::ALL {
            let g = goodness_upper_bound(&a, &rs, r, 20).unwrap();
            assert_eq!(g.s_bar, Some(0), "{r}");
            let x = g.witness.unwrap();
            assert!((&a * &x).norm() < 1e-9);
            assert_abs_diff_eq!(g.ratio, 0.5, epsilon = 1e-7);
        }
    }

    #[test]
    fn invertible_matrix_has_no_bound() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let rs = RepresentationStructure::standard(2).unwrap();
        let g = goodness_upper_bound(&a, &rs, BlockNorm::Linf, 10).unwrap();
        assert!(g.s_bar.is_none());
        assert!(g.witness.is_none());
    }

    #[test]
    fn witness_is_a_genuine_violation() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(6, 12, |_, _| StandardNormal.sample(&mut rng));
        let rs = RepresentationStructure::uniform(12, 2, BlockNorm::L2).unwrap();
        let g = goodness_upper_bound(&a, &rs, BlockNorm::L2, 30).unwrap();
        let s_bar = g.s_bar.expect("a 6×12 matrix has a violating kernel vector");
        let x = g.witness.unwrap();
        assert!((&a * &x).norm() < 1e-8 * x.norm());
        let ratio = rs.lsp(x.as_slice(), s_bar + 1, Exponent::ONE).unwrap() / rs.lp(x.as_slice(), Exponent::ONE);
        assert!(ratio >= 0.5 - 1e-7);
    }
}
