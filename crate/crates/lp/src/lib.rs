//! A small dense-kernel LP/MIP solver.
//!
//! Models are built with [`LinearProgram`] (all variables nonnegative, with
//! optional upper bounds) and [`MipProgram`] (adds binaries and SOS1 groups).
//! [`solve_lp`] runs a bounded revised simplex; [`solve_mip`] wraps it in
//! branch-and-bound that branches on SOS1 groups before single binaries.

mod error;
mod lu;
mod mip;
mod model;
mod mps;
mod simplex;

pub use error::LpError;
pub use mip::{solve_mip, MipOptions};
pub use model::{Constraint, LinearProgram, MipProgram, Relation, Solution, Sos1Group, Status, VarId};
pub use mps::write_mps;

use simplex::{Engine, LpStatus, StdForm};

pub fn solve_lp(lp: &LinearProgram) -> Result<Solution, LpError> {
    lp.validate()?;
    let mut engine = Engine::new(StdForm::from_lp(lp));
    let status = engine.optimize()?;
    let status = match status {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible => return Ok(Solution::without_point(Status::Infeasible, engine.iterations)),
        LpStatus::Unbounded => return Ok(Solution::without_point(Status::Unbounded, engine.iterations)),
    };
    let objective = engine.objective_value();
    Ok(Solution {
        status,
        objective,
        values: engine.structural_values(),
        bound: objective,
        gap: 0.0,
        nodes: 0,
        iterations: engine.iterations,
    })
}
