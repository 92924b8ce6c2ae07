use std::io::Write;

use super::{ConeProgram, ConstraintKind, LinExpr};

fn fmt_expr(e: &LinExpr) -> String {
    let mut out = String::new();
    for (i, &(v, c)) in e.terms.iter().enumerate() {
        if i > 0 || c < 0.0 {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&format!("{} x{}", c.abs(), v));
    }
    if e.constant != 0.0 || e.terms.is_empty() {
        if e.constant < 0.0 {
            out.push_str(" - ");
        } else if !out.is_empty() {
            out.push_str(" + ");
        }
        out.push_str(&format!("{}", e.constant.abs()));
    }
    out.trim_start().to_string()
}

pub(super) fn write<W: Write>(p: &ConeProgram, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "\\ variables: {}", p.n_vars)?;
    writeln!(w, "minimize")?;
    writeln!(w, "  obj: {}", fmt_expr(&p.objective))?;
    writeln!(w, "subject to")?;
    for (ci, c) in p.constraints.iter().enumerate() {
        match c.kind {
            ConstraintKind::Eq | ConstraintKind::Le => {
                let op = if c.kind == ConstraintKind::Eq { "=" } else { "<=" };
                for (ri, e) in c.exprs.iter().enumerate() {
                    // move the constant to the right-hand side
                    let lhs = LinExpr { terms: e.terms.clone(), constant: 0.0 };
                    writeln!(w, "  {}_{}_{}: {} {} {}", c.tag, ci, ri, fmt_expr(&lhs), op, -e.constant)?;
                }
            }
            ConstraintKind::Soc => {
                let tail: Vec<String> = c.exprs[1..].iter().map(fmt_expr).collect();
                writeln!(w, "  {}_{}: norm2( {} ) <= {}", c.tag, ci, tail.join(" ; "), fmt_expr(&c.exprs[0]))?;
            }
        }
    }
    writeln!(w, "free")?;
    writeln!(w, "  x0 .. x{}", p.n_vars.saturating_sub(1))?;
    writeln!(w, "end")
}
