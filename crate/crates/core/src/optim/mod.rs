//! Convex-programming substrate.
//!
//! Programs are written against [`ConeProgram`] using affine expressions in the
//! decision variables. Norm constraints (`ℓ1`, `ℓ2`, `ℓ∞`, top-`s` sums) are
//! compiled here into linear inequalities and second-order cones so callers
//! never manipulate cones directly. [`solve`] hands the compiled program to an
//! interior-point backend and checks the returned primal-dual pair.

mod lptext;
mod solve;
mod subgradient;

pub use solve::{solve, SolveReport, SolveStatus, SolverOptions};
pub use subgradient::{subgradient_minimize, StepSchedule, SubgradientOptions, SubgradientResult};

use crate::blockmodel::BlockNorm;

/// Affine expression `Σ cᵢ·x_{vᵢ} + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(mut self, v: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, a: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= a;
        }
        self.constant *= a;
        self
    }

    pub fn negated(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

/// Cone membership requested by a constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// every expression equals zero
    Eq,
    /// every expression is `≤ 0`
    Le,
    /// `‖(e₁, …, e_k)‖₂ ≤ e₀`
    Soc,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub tag: String,
    pub kind: ConstraintKind,
    pub exprs: Vec<LinExpr>,
}

impl Constraint {
    /// Largest violation of the constraint at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self.kind {
            ConstraintKind::Eq => self.exprs.iter().map(|e| e.eval(x).abs()).fold(0.0, f64::max),
            ConstraintKind::Le => self.exprs.iter().map(|e| e.eval(x).max(0.0)).fold(0.0, f64::max),
            ConstraintKind::Soc => {
                let head = self.exprs[0].eval(x);
                let tail = self.exprs[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
                (tail - head).max(0.0)
            }
        }
    }
}

/// A minimization problem with linear objective over linear and second-order
/// cone constraints.
#[derive(Clone, Debug, Default)]
pub struct ConeProgram {
    n_vars: usize,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    /// Adds `n` consecutive variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.n_vars;
        self.n_vars += n;
        first
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn eq(&mut self, tag: impl Into<String>, exprs: Vec<LinExpr>) {
        self.push(tag.into(), ConstraintKind::Eq, exprs);
    }

    pub fn le(&mut self, tag: impl Into<String>, exprs: Vec<LinExpr>) {
        self.push(tag.into(), ConstraintKind::Le, exprs);
    }

    /// `‖tail‖₂ ≤ head`.
    pub fn soc(&mut self, tag: impl Into<String>, head: LinExpr, tail: Vec<LinExpr>) {
        let mut exprs = Vec::with_capacity(tail.len() + 1);
        exprs.push(head);
        exprs.extend(tail);
        self.push(tag.into(), ConstraintKind::Soc, exprs);
    }

    fn push(&mut self, tag: String, kind: ConstraintKind, exprs: Vec<LinExpr>) {
        if exprs.is_empty() {
            return;
        }
        self.constraints.push(Constraint { tag, kind, exprs });
    }

    /// `‖exprs‖_norm ≤ bound`.
    pub fn norm_le(&mut self, tag: &str, exprs: &[LinExpr], norm: BlockNorm, bound: LinExpr) {
        match norm {
            BlockNorm::Linf => {
                let mut rows = Vec::with_capacity(2 * exprs.len());
                for e in exprs {
                    rows.push(e.clone().plus(&bound.clone().negated()));
                    rows.push(e.clone().negated().plus(&bound.clone().negated()));
                }
                self.le(tag, rows);
            }
            BlockNorm::L1 => {
                if exprs.len() == 1 {
                    return self.norm_le(tag, exprs, BlockNorm::Linf, bound);
                }
                let first = self.add_vars(exprs.len());
                let mut rows = Vec::with_capacity(2 * exprs.len() + 1);
                let mut sum = bound.negated();
                for (i, e) in exprs.iter().enumerate() {
                    let u = LinExpr::var(first + i);
                    rows.push(e.clone().plus(&u.clone().negated()));
                    rows.push(e.clone().negated().plus(&u.clone().negated()));
                    sum = sum.term(first + i, 1.0);
                }
                rows.push(sum);
                self.le(tag, rows);
            }
            BlockNorm::L2 => {
                if exprs.len() == 1 {
                    return self.norm_le(tag, exprs, BlockNorm::Linf, bound);
                }
                self.soc(tag, bound, exprs.to_vec());
            }
        }
    }

    /// New variable `t` with `t ≥ ‖exprs‖_norm`.
    pub fn norm_epigraph(&mut self, tag: &str, exprs: &[LinExpr], norm: BlockNorm) -> usize {
        let t = self.add_var();
        self.norm_le(tag, exprs, norm, LinExpr::var(t));
        t
    }

    /// `sum of the s largest of values ≤ bound`, for expressions known to be
    /// nonnegative at every feasible point.
    pub fn top_s_sum_le(&mut self, tag: &str, values: &[LinExpr], s: usize, bound: LinExpr) {
        if s >= values.len() {
            let mut total = bound.negated();
            for v in values {
                total = total.plus(v);
            }
            self.le(tag, vec![total]);
            return;
        }
        // s·τ + Σ u_k ≤ bound,  u_k ≥ v_k − τ,  u_k ≥ 0
        let tau = self.add_var();
        let first = self.add_vars(values.len());
        let mut rows = Vec::with_capacity(2 * values.len() + 1);
        let mut total = bound.negated().term(tau, s as f64);
        for (k, v) in values.iter().enumerate() {
            let u = first + k;
            rows.push(v.clone().term(tau, -1.0).term(u, -1.0));
            rows.push(LinExpr::var(u).negated());
            total = total.term(u, 1.0);
        }
        rows.push(total);
        self.le(tag, rows);
    }

    /// Objective value at `x` (including the constant term).
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }

    /// Writes the program in a plain-text LP-like format.
    pub fn write_lp_text<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        lptext::write(self, w)
    }

    pub(crate) fn validate(&self) -> crate::error::Result<()> {
        let check =
            |e: &LinExpr| e.terms.iter().all(|&(v, c)| v < self.n_vars && c.is_finite()) && e.constant.is_finite();
        if !check(&self.objective) {
            return Err(crate::error::Error::InvalidArgument(
                "objective references unknown variable or non-finite data".into(),
            ));
        }
        for c in &self.constraints {
            if !c.exprs.iter().all(check) {
                return Err(crate::error::Error::InvalidArgument(format!(
                    "constraint '{}' references unknown variable or non-finite data",
                    c.tag
                )));
            }
            if c.kind == ConstraintKind::Soc && c.exprs.len() < 2 {
                return Err(crate::error::Error::InvalidArgument(format!("cone '{}' has no tail", c.tag)));
            }
        }
        Ok(())
    }
}
