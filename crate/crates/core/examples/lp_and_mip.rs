//! The bundled solver on its own: a small LP and a knapsack-style MIP with
//! an SOS1 group.

use dynfleet::lp::{solve_lp, solve_mip, LinearProgram, MipOptions, MipProgram, Relation};

fn main() -> Result<(), dynfleet::lp::LpError> {
    // min -x - 2y  s.t.  x + y <= 4,  x + 3y <= 6,  x <= 3
    let mut lp = LinearProgram::new();
    let x = lp.add_bounded_var(-1.0, 3.0);
    let y = lp.add_var(-2.0);
    lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
    lp.add_constraint(vec![(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
    let sol = solve_lp(&lp)?;
    println!("LP {}: objective {:.3}, x = {:.3}, y = {:.3}", sol.status, sol.objective, sol.value(x), sol.value(y));

    // Pick at most one size per item (SOS1) under a weight budget.
    let mut mip = MipProgram::new(LinearProgram::new());
    let items = [(3.0, [(2.0, 3.0), (4.0, 5.0)]), (2.0, [(1.0, 2.0), (3.0, 4.5)]), (4.0, [(3.0, 6.0), (5.0, 8.0)])];
    let mut budget = Vec::new();
    let mut chosen = Vec::new();
    for (i, (_, sizes)) in items.iter().enumerate() {
        let mut group = Vec::new();
        for (s, &(weight, value)) in sizes.iter().enumerate() {
            let v = mip.add_binary(-value);
            mip.lp.set_name(v, format!("item{i}_size{s}"));
            budget.push((v, weight));
            group.push((v, weight));
            chosen.push(v);
        }
        mip.add_sos1(group);
    }
    mip.lp.add_constraint(budget, Relation::Le, 7.0);
    let sol = solve_mip(&mip, &MipOptions::default())?;
    println!("MIP {}: objective {:.3} after {} nodes", sol.status, sol.objective, sol.nodes);
    for v in chosen {
        if sol.value(v) > 0.5 {
            println!("  {}", mip.lp.name(v));
        }
    }
    Ok(())
}
