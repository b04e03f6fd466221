//! Free-format MPS export, handy for cross-checking a model in another solver.

use std::fmt::Write as _;

use crate::model::{MipProgram, Relation, VarId};

pub fn write_mps(mip: &MipProgram, name: &str) -> String {
    let lp = &mip.lp;
    let mut is_int = vec![false; lp.num_vars()];
    for b in &mip.binaries {
        is_int[b.0] = true;
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n N obj\n");
    for (i, c) in lp.constraints().iter().enumerate() {
        let kind = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        let _ = writeln!(out, " {kind} r{i}");
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, c) in lp.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            by_col[v.0].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, entries) in by_col.iter().enumerate() {
        if is_int[j] != in_int {
            let tag = if is_int[j] { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, " M{j} 'MARKER' {tag}");
            in_int = is_int[j];
        }
        let col = lp.name(VarId(j));
        let cost = lp.cost(VarId(j));
        if cost != 0.0 || entries.is_empty() {
            let _ = writeln!(out, " {col} obj {cost}");
        }
        for &(i, a) in entries {
            let _ = writeln!(out, " {col} r{i} {a}");
        }
    }
    if in_int {
        out.push_str(" Mend 'MARKER' 'INTEND'\n");
    }
    out.push_str("RHS\n");
    for (i, c) in lp.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, " rhs r{i} {}", c.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_vars() {
        let u = lp.upper(VarId(j));
        if u.is_finite() {
            let _ = writeln!(out, " UP bnd {} {u}", lp.name(VarId(j)));
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearProgram;

    #[test]
    fn marks_integer_block() {
        let mut mip = MipProgram::new(LinearProgram::new());
        let x = mip.lp.add_var(1.0);
        let y = mip.add_binary(2.0);
        mip.lp.add_constraint(vec![(x, 1.0), (y, 3.0)], Relation::Ge, 1.0);
        let text = write_mps(&mip, "t");
        assert!(text.contains(" M1 'MARKER' 'INTORG'"));
        assert!(text.contains(" G r0"));
        assert!(text.contains(" UP bnd x1 1"));
        assert!(text.ends_with("ENDATA\n"));
    }
}
