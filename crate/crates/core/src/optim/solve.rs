use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{NonnegativeConeT, SecondOrderConeT, ZeroConeT},
};

use super::{ConeProgram, ConstraintKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: crate::tolerances::LP_TOL, max_iter: 200 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Outcome of a conic solve.
///
/// `dual` holds one multiplier per compiled cone row; when the status is
/// [`SolveStatus::Infeasible`] it is the backend's Farkas-type certificate.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub iterations: u32,
    pub diagnostics: String,
}

impl SolveReport {
    /// Primal point if the solve reached optimality, an error otherwise.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(Error::Infeasible(self.diagnostics)),
            SolveStatus::Unbounded => Err(Error::Solver(format!("unbounded: {}", self.diagnostics))),
            SolveStatus::MaxIter => Err(Error::Solver(format!("not converged: {}", self.diagnostics))),
        }
    }
}

struct Compiled {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn compile(p: &ConeProgram) -> Compiled {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let push_cone = |cones: &mut Vec<SupportedConeT<f64>>, cone: SupportedConeT<f64>| {
        // merge runs of zero / nonnegative cones
        match (cones.last_mut(), &cone) {
            (Some(ZeroConeT(n)), ZeroConeT(k)) => *n += *k,
            (Some(NonnegativeConeT(n)), NonnegativeConeT(k)) => *n += *k,
            _ => cones.push(cone),
        }
    };
    for c in p.constraints() {
        // clarabel form: A x + s = b, s ∈ K
        let sign = match c.kind {
            ConstraintKind::Eq | ConstraintKind::Le => 1.0,
            ConstraintKind::Soc => -1.0,
        };
        for e in &c.exprs {
            let r = b.len();
            for &(v, coef) in &e.terms {
                rows.push(r);
                cols.push(v);
                vals.push(sign * coef);
            }
            b.push(-sign * e.constant);
        }
        let k = c.exprs.len();
        let cone = match c.kind {
            ConstraintKind::Eq => ZeroConeT(k),
            ConstraintKind::Le => NonnegativeConeT(k),
            ConstraintKind::Soc => SecondOrderConeT(k),
        };
        push_cone(&mut cones, cone);
    }
    let a = CscMatrix::new_from_triplets(b.len(), p.n_vars(), rows, cols, vals);
    Compiled { a, b, cones }
}

/// Solves `p` with the interior-point backend and post-checks the result.
///
/// A reported optimum is downgraded to [`SolveStatus::MaxIter`] when the
/// returned point violates the constraints or the duality gap exceeds the
/// tolerance by more than a small factor.
pub fn solve(p: &ConeProgram, opts: &SolverOptions) -> Result<SolveReport> {
    p.validate()?;
    let n = p.n_vars();
    if n == 0 {
        return Err(Error::InvalidArgument("program has no variables".into()));
    }
    let compiled = compile(p);
    let q: Vec<f64> = {
        let mut q = vec![0.0; n];
        for &(v, c) in &p.objective().terms {
            q[v] += c;
        }
        q
    };
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.tol)
        .tol_gap_rel(opts.tol)
        .tol_feas(opts.tol)
        .tol_ktratio(1e-7_f64.max(opts.tol))
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&pmat, &q, &compiled.a, &compiled.b, &compiled.cones, settings)
        .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let constant = p.objective().constant;
    let primal = sol.x.clone();
    let dual = sol.z.clone();
    let objective = p.objective_at(&primal);
    let dual_objective = sol.obj_val_dual + constant;
    let gap = (objective - dual_objective).abs() / 1f64.max(objective.abs().min(dual_objective.abs()));
    let b_inf = compiled.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let x_inf = primal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let primal_residual = p.max_violation(&primal) / (1.0 + b_inf + x_inf);
    let mut status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::MaxIter,
    };
    let mut diagnostics = format!("backend status {:?} after {} iterations", sol.status, sol.iterations);
    if status == SolveStatus::Optimal {
        let slack = 1e3 * opts.tol.max(1e-9);
        if primal_residual > slack || gap > slack {
            diagnostics.push_str(&format!("; rejected: residual {primal_residual:.3e}, gap {gap:.3e}"));
            status = SolveStatus::MaxIter;
        }
    }
    Ok(SolveReport {
        status,
        primal,
        dual,
        objective,
        dual_objective,
        gap,
        primal_residual,
        iterations: sol.iterations,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::BlockNorm;
    use crate::optim::LinExpr;

    /// Brute-force LP oracle: enumerate every basis of `n` active rows in
    /// `G x ≤ h` and return the best feasible vertex value.
    fn vertex_oracle(g: &[Vec<f64>], h: &[f64], c: &[f64]) -> f64 {
        let n = c.len();
        let m = g.len();
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let a = nalgebra::DMatrix::from_fn(n, n, |i, j| g[idx[i]][j]);
            let rhs = nalgebra::DVector::from_fn(n, |i, _| h[idx[i]]);
            if let Some(x) = a.lu().solve(&rhs) {
                let feasible = (0..m).all(|r| (0..n).map(|j| g[r][j] * x[j]).sum::<f64>() <= h[r] + 1e-9);
                if feasible {
                    best = best.min((0..n).map(|j| c[j] * x[j]).sum());
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < m - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn lp_matches_vertex_enumeration() {
        // small bounded LPs with random data
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 3;
            let mut g: Vec<Vec<f64>> = Vec::new();
            let mut h = Vec::new();
            for j in 0..n {
                let mut up = vec![0.0; n];
                up[j] = 1.0;
                g.push(up.clone());
                h.push(2.0);
                up[j] = -1.0;
                g.push(up);
                h.push(2.0);
            }
            for _ in 0..3 {
                g.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
                h.push(rng.random_range(0.1..1.0));
            }
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut p = ConeProgram::new();
            let x = p.add_vars(n);
            let mut obj = LinExpr::zero();
            for (j, &cj) in c.iter().enumerate() {
                obj = obj.term(x + j, cj);
            }
            p.minimize(obj);
            let rows = g
                .iter()
                .zip(&h)
                .map(|(row, &hi)| {
                    let mut e = LinExpr::constant(-hi);
                    for (j, &v) in row.iter().enumerate() {
                        e = e.term(x + j, v);
                    }
                    e
                })
                .collect();
            p.le("g", rows);
            let rep = solve(&p, &SolverOptions::default()).unwrap().into_optimal().unwrap();
            let oracle = vertex_oracle(&g, &h, &c);
            assert!((rep.objective - oracle).abs() < 1e-6, "{} vs {}", rep.objective, oracle);
            assert!(rep.gap < 1e-6);
        }
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut p = ConeProgram::new();
        let x = p.add_var();
        p.minimize(LinExpr::var(x));
        p.le("a", vec![LinExpr::var(x).add_const(-1.0)]);
        p.le("b", vec![LinExpr::var(x).negated().add_const(2.0)]);
        let rep = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
        assert!(matches!(rep.into_optimal(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unbounded_program_is_reported() {
        let mut p = ConeProgram::new();
        let x = p.add_var();
        p.minimize(LinExpr::var(x));
        p.le("a", vec![LinExpr::var(x).add_const(-1.0)]);
        let rep = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Unbounded);
    }

    #[test]
    fn socp_projection_onto_ball() {
        // min ‖x − (3,4)‖₂ s.t. ‖x‖₂ ≤ 1  →  5 − 1 = 4
        let mut p = ConeProgram::new();
        let x = p.add_vars(2);
        let diff = vec![LinExpr::var(x).add_const(-3.0), LinExpr::var(x + 1).add_const(-4.0)];
        let t = p.norm_epigraph("d", &diff, BlockNorm::L2);
        p.norm_le("ball", &[LinExpr::var(x), LinExpr::var(x + 1)], BlockNorm::L2, LinExpr::constant(1.0));
        p.minimize(LinExpr::var(t));
        let rep = solve(&p, &SolverOptions::with_tol(1e-9)).unwrap().into_optimal().unwrap();
        assert!((rep.objective - 4.0).abs() < 1e-6);
        assert!((rep.primal[x] - 0.6).abs() < 1e-5);
    }

    #[test]
    fn top_s_sum_matches_sorting() {
        // maximize Σ x subject to top-2 sum of |x| ≤ 1 and x ≤ 0.3
        let mut p = ConeProgram::new();
        let x = p.add_vars(4);
        let vals: Vec<LinExpr> = (0..4).map(|i| LinExpr::var(x + i)).collect();
        p.top_s_sum_le("top", &vals, 2, LinExpr::constant(1.0));
        p.le("cap", (0..4).map(|i| LinExpr::var(x + i).add_const(-0.3)).collect());
        p.le("pos", (0..4).map(|i| LinExpr::var(x + i).negated()).collect());
        p.minimize((0..4).fold(LinExpr::zero(), |e, i| e.term(x + i, -1.0)));
        let rep = solve(&p, &SolverOptions::default()).unwrap().into_optimal().unwrap();
        assert!((rep.objective + 1.2).abs() < 1e-6, "{}", rep.objective);
    }
}
