use std::fmt;

use crate::error::LpError;

/// Index of a decision variable inside a [`LinearProgram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization problem over variables bounded below by zero.
///
/// Every variable has lower bound 0 and an optional finite upper bound.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub(crate) cost: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) names: Vec<String>,
    pub(crate) constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable in `[0, +inf)`.
    pub fn add_var(&mut self, cost: f64) -> VarId {
        self.add_bounded_var(cost, f64::INFINITY)
    }

    /// Adds a variable in `[0, upper]`.
    pub fn add_bounded_var(&mut self, cost: f64, upper: f64) -> VarId {
        let id = VarId(self.cost.len());
        self.cost.push(cost);
        self.upper.push(upper);
        self.names.push(String::new());
        id
    }

    pub fn set_name(&mut self, var: VarId, name: impl Into<String>) {
        self.names[var.0] = name.into();
    }

    pub fn name(&self, var: VarId) -> String {
        let n = &self.names[var.0];
        if n.is_empty() {
            var.to_string()
        } else {
            n.clone()
        }
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.cost[var.0] = cost;
    }

    pub fn set_upper(&mut self, var: VarId, upper: f64) {
        self.upper[var.0] = upper;
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { terms, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn cost(&self, var: VarId) -> f64 {
        self.cost[var.0]
    }

    pub fn upper(&self, var: VarId) -> f64 {
        self.upper[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.cost.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Largest absolute violation over all constraints and bounds.
    ///
    /// Each row is scaled by its largest absolute coefficient, matching the
    /// scaling the solver works in.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in values.iter().enumerate() {
            worst = worst.max(-v).max(v - self.upper[j]);
        }
        for c in &self.constraints {
            let scale = c.terms.iter().fold(0.0f64, |m, (_, a)| m.max(a.abs())).max(1e-300);
            let lhs: f64 = c.terms.iter().map(|(v, a)| a * values[v.0]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let mut referenced = vec![false; self.num_vars()];
        for (j, &c) in self.cost.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::InvalidModel(format!("non-finite cost on {}", self.name(VarId(j)))));
            }
            if c != 0.0 {
                referenced[j] = true;
            }
            if self.upper[j].is_nan() || self.upper[j] < 0.0 {
                return Err(LpError::InvalidModel(format!("bad upper bound on {}", self.name(VarId(j)))));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::InvalidModel(format!("non-finite rhs in row {i}")));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.num_vars() {
                    return Err(LpError::InvalidModel(format!("row {i} references unknown {v}")));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidModel(format!("non-finite coefficient in row {i}")));
                }
                referenced[v.0] = true;
            }
        }
        if let Some(j) = referenced.iter().position(|r| !r) {
            return Err(LpError::InvalidModel(format!(
                "{} appears in no constraint and not in the objective",
                self.name(VarId(j))
            )));
        }
        Ok(())
    }
}

/// Variables of which at most one may be nonzero, each carrying an
/// ordering weight. Members must be binaries.
#[derive(Clone, Debug)]
pub struct Sos1Group {
    pub members: Vec<(VarId, f64)>,
}

/// A [`LinearProgram`] with binary variables and SOS1 groups.
#[derive(Clone, Debug, Default)]
pub struct MipProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
    pub sos1: Vec<Sos1Group>,
}

impl MipProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self { lp, binaries: Vec::new(), sos1: Vec::new() }
    }

    pub fn add_binary(&mut self, cost: f64) -> VarId {
        let v = self.lp.add_bounded_var(cost, 1.0);
        self.binaries.push(v);
        v
    }

    pub fn add_sos1(&mut self, members: Vec<(VarId, f64)>) {
        self.sos1.push(Sos1Group { members });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        let mut is_binary = vec![false; self.lp.num_vars()];
        for b in &self.binaries {
            if b.0 >= is_binary.len() {
                return Err(LpError::InvalidModel(format!("unknown binary {b}")));
            }
            is_binary[b.0] = true;
        }
        let mut seen = vec![false; self.lp.num_vars()];
        for (g, group) in self.sos1.iter().enumerate() {
            let mut last = f64::NEG_INFINITY;
            for &(v, w) in &group.members {
                if !is_binary.get(v.0).copied().unwrap_or(false) {
                    return Err(LpError::InvalidModel(format!("SOS1 group {g} member {v} is not binary")));
                }
                if seen[v.0] {
                    return Err(LpError::InvalidModel(format!("{v} belongs to more than one SOS1 group")));
                }
                seen[v.0] = true;
                if !(w > last) || w <= 0.0 {
                    return Err(LpError::InvalidModel(format!(
                        "SOS1 group {g} weights must be positive and strictly increasing"
                    )));
                }
                last = w;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped with a proven relative gap within the requested tolerance
    /// but not closed.
    GapLimit,
    TimeLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::GapLimit => "gap_limit",
            Status::TimeLimit => "time_limit",
        }
    }

    /// Whether an incumbent satisfying the requested tolerance is available.
    pub fn is_solved(self) -> bool {
        matches!(self, Status::Optimal | Status::GapLimit)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Proven lower bound on the optimum (equals `objective` for LPs).
    pub bound: f64,
    /// Relative gap `(objective - bound) / max(|objective|, 1)`.
    pub gap: f64,
    pub nodes: usize,
    pub iterations: usize,
}

impl Solution {
    pub(crate) fn without_point(status: Status, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            bound: f64::NAN,
            gap: f64::INFINITY,
            nodes: 0,
            iterations,
        }
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}
