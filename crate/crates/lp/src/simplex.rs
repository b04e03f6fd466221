//! Bounded-variable revised simplex.
//!
//! Rows are scaled to unit max-norm and put in the form `A x + s = b` with
//! one slack per row: `s` in `[0, inf)` for inequalities (a `>=` row is
//! negated first) and `s` in `[0, 0]` for equalities. Every column carries
//! finite lower and possibly infinite upper bounds.
//!
//! The engine runs the dual simplex whenever the current basis is dual
//! feasible (the common case for warm starts inside branch-and-bound) and a
//! two-phase primal simplex with artificial columns otherwise.

use log::trace;

use crate::error::LpError;
use crate::lu::{BasisFactor, SparseCols};
use crate::model::{LinearProgram, Relation};

pub(crate) const FEAS_TOL: f64 = 1e-7;
pub(crate) const OPT_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 32;
const STALL_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub(crate) struct BasisSnapshot {
    pub basis: Vec<usize>,
    pub state: Vec<VarState>,
}

pub(crate) struct StdForm {
    pub m: usize,
    pub n_struct: usize,
    pub cols: SparseCols,
    /// Structural part of the matrix by rows, for computing pivot rows.
    row_start: Vec<usize>,
    row_entries: Vec<(usize, f64)>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl StdForm {
    pub fn from_lp(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut slack_upper = Vec::with_capacity(m);
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = c.terms.iter().map(|(v, a)| (v.0, *a)).collect();
            terms.sort_by_key(|t| t.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
            for (j, a) in terms {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += a,
                    _ => merged.push((j, a)),
                }
            }
            let norm = merged.iter().fold(0.0f64, |acc, t| acc.max(t.1.abs()));
            let mut scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            if c.relation == Relation::Ge {
                scale = -scale;
            }
            for (j, a) in merged {
                if a != 0.0 {
                    per_col[j].push((i, a * scale));
                }
            }
            rhs.push(c.rhs * scale);
            slack_upper.push(if c.relation == Relation::Eq { 0.0 } else { f64::INFINITY });
        }
        let mut row_count = vec![0usize; m + 1];
        for col in &per_col {
            for &(i, _) in col {
                row_count[i + 1] += 1;
            }
        }
        for i in 0..m {
            row_count[i + 1] += row_count[i];
        }
        let row_start = row_count;
        let mut fill = row_start.clone();
        let mut row_entries = vec![(0usize, 0.0f64); row_start[m]];
        for (j, col) in per_col.iter().enumerate() {
            for &(i, a) in col {
                row_entries[fill[i]] = (j, a);
                fill[i] += 1;
            }
        }
        let mut cols = SparseCols::new();
        for col in per_col {
            cols.push_col(col);
        }
        for i in 0..m {
            cols.push_col([(i, 1.0)]);
        }
        let mut cost = lp.cost.clone();
        cost.extend(std::iter::repeat(0.0).take(m));
        let mut lower = vec![0.0; n + m];
        let mut upper = lp.upper.clone();
        upper.extend(slack_upper);
        for j in 0..n {
            lower[j] = 0.0;
        }
        Self { m, n_struct: n, cols, row_start, row_entries, cost, lower, upper, rhs }
    }

    pub fn slack(&self, row: usize) -> usize {
        self.n_struct + row
    }

    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.row_entries[self.row_start[i]..self.row_start[i + 1]]
    }
}

pub(crate) struct Engine {
    pub sf: StdForm,
    pub state: Vec<VarState>,
    pub basis: Vec<usize>,
    pub x: Vec<f64>,
    factor: Option<BasisFactor>,
    pub iterations: usize,
    /// Iterations at the start of the current `optimize` call.
    solve_start: usize,
    iteration_limit: usize,
}

impl Engine {
    pub fn new(sf: StdForm) -> Self {
        let n = sf.cols.num_cols();
        let m = sf.m;
        let iteration_limit = 50 * (n + m) + 20_000;
        let mut e = Self {
            sf,
            state: vec![VarState::AtLower; n],
            basis: Vec::with_capacity(m),
            x: vec![0.0; n],
            factor: None,
            iterations: 0,
            solve_start: 0,
            iteration_limit,
        };
        e.reset_to_slack_basis();
        e
    }

    fn n(&self) -> usize {
        self.sf.cols.num_cols()
    }

    pub fn reset_to_slack_basis(&mut self) {
        let n = self.n();
        self.basis.clear();
        for j in 0..n {
            self.state[j] = if self.sf.cost[j] < 0.0 && self.sf.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
        }
        for i in 0..self.sf.m {
            let s = self.sf.slack(i);
            self.basis.push(s);
            self.state[s] = VarState::Basic;
        }
        self.factor = None;
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot { basis: self.basis.clone(), state: self.state.clone() }
    }

    pub fn restore(&mut self, snap: &BasisSnapshot) {
        self.basis.clone_from(&snap.basis);
        self.state.clone_from(&snap.state);
        // Artificial columns added after the snapshot was taken stay nonbasic.
        self.state.resize(self.n(), VarState::AtLower);
        self.factor = None;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.sf.lower[j] = lower;
        self.sf.upper[j] = upper;
        if self.state[j] == VarState::AtUpper && !upper.is_finite() {
            self.state[j] = VarState::AtLower;
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.sf.lower[j], self.sf.upper[j])
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtUpper => self.sf.upper[j],
            _ => self.sf.lower[j],
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _ in 0..8 {
            match BasisFactor::factorize(self.sf.m, &self.basis, &self.sf.cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    self.compute_xb();
                    return Ok(());
                }
                Err(sing) => {
                    trace!(
                        "repairing singular basis: {} dependent columns",
                        sing.dependent_positions.len()
                    );
                    for (&p, &row) in sing.dependent_positions.iter().zip(&sing.free_rows) {
                        let old = self.basis[p];
                        self.state[old] = VarState::AtLower;
                        let s = self.sf.slack(row);
                        self.basis[p] = s;
                        self.state[s] = VarState::Basic;
                    }
                }
            }
        }
        Err(LpError::SingularBasis)
    }

    fn factor(&self) -> &BasisFactor {
        self.factor.as_ref().expect("basis factorized")
    }

    fn compute_xb(&mut self) {
        let mut r = self.sf.rhs.clone();
        for j in 0..self.n() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                let (idx, val) = self.sf.cols.col(j);
                for (&i, &a) in idx.iter().zip(val) {
                    r[i] -= a * v;
                }
            }
        }
        let xb = self.factor().ftran(&r);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn dense_col(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.sf.m];
        let (idx, val) = self.sf.cols.col(j);
        for (&i, &v) in idx.iter().zip(val) {
            a[i] = v;
        }
        a
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.factor().btran(&cb)
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.sf.upper[j] - self.sf.lower[j] <= 0.0
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub fn primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| {
                let v = self.x[j];
                (self.sf.lower[j] - v).max(v - self.sf.upper[j]).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn dual_infeasibility(&self, cost: &[f64]) -> f64 {
        let y = self.duals(cost);
        let mut worst = 0.0f64;
        for j in 0..self.n() {
            if self.state[j] == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let d = cost[j] - self.sf.cols.dot(j, &y);
            let v = match self.state[j] {
                VarState::AtLower => -d,
                VarState::AtUpper => d,
                VarState::Basic => 0.0,
            };
            worst = worst.max(v);
        }
        worst
    }

    fn tick(&mut self) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations - self.solve_start > self.iteration_limit {
            return Err(LpError::IterationLimit(self.iteration_limit));
        }
        Ok(())
    }

    fn pivot(&mut self, pos: usize, entering: usize, alpha: &[f64], leaving: VarState) -> Result<(), LpError> {
        let old = self.basis[pos];
        self.state[old] = leaving;
        self.x[old] = self.nonbasic_value(old);
        self.basis[pos] = entering;
        self.state[entering] = VarState::Basic;
        let needs_refactor = {
            let f = self.factor.as_mut().expect("basis factorized");
            f.update(pos, alpha);
            f.num_updates() >= REFACTOR_EVERY
        };
        if needs_refactor {
            self.refactor()?;
        }
        Ok(())
    }

    /// Primal simplex from a primal feasible basis.
    fn primal(&mut self, cost: &[f64]) -> Result<LpStatus, LpError> {
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = self.objective(cost);
        loop {
            self.tick()?;
            let y = self.duals(cost);
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n() {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let d = cost[j] - self.sf.cols.dot(j, &y);
                let score = match self.state[j] {
                    VarState::AtLower if d < -OPT_TOL => -d,
                    VarState::AtUpper if d > OPT_TOL => d,
                    _ => continue,
                };
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if enter.map_or(true, |(_, best)| score > best.abs()) {
                    enter = Some((j, d));
                }
            }
            let Some((q, dq)) = enter else {
                return Ok(LpStatus::Optimal);
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.factor().ftran(&self.dense_col(q));

            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for (p, &j) in self.basis.iter().enumerate() {
                let delta = -dir * alpha[p];
                if delta < -PIVOT_TOL {
                    theta_max = theta_max.min((self.x[j] - self.sf.lower[j] + FEAS_TOL) / -delta);
                } else if delta > PIVOT_TOL && self.sf.upper[j].is_finite() {
                    theta_max = theta_max.min((self.sf.upper[j] - self.x[j] + FEAS_TOL) / delta);
                }
            }
            let flip = self.sf.upper[q] - self.sf.lower[q];
            if !theta_max.is_finite() && !flip.is_finite() {
                return Ok(LpStatus::Unbounded);
            }
            let mut leave: Option<(usize, f64, VarState)> = None;
            let mut leave_mag = 0.0;
            for (p, &j) in self.basis.iter().enumerate() {
                let delta = -dir * alpha[p];
                let (ratio, to) = if delta < -PIVOT_TOL {
                    ((self.x[j] - self.sf.lower[j]) / -delta, VarState::AtLower)
                } else if delta > PIVOT_TOL && self.sf.upper[j].is_finite() {
                    ((self.sf.upper[j] - self.x[j]) / delta, VarState::AtUpper)
                } else {
                    continue;
                };
                if ratio > theta_max {
                    continue;
                }
                let better = if bland {
                    leave.map_or(true, |(lp, _, _)| j < self.basis[lp])
                } else {
                    delta.abs() > leave_mag
                };
                if better {
                    leave = Some((p, ratio.max(0.0), to));
                    leave_mag = delta.abs();
                }
            }

            let theta;
            match leave {
                Some((p, ratio, to)) if ratio < flip => {
                    theta = ratio;
                    self.x[q] += dir * theta;
                    for (pp, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= dir * alpha[pp] * theta;
                    }
                    self.pivot(p, q, &alpha, to)?;
                }
                _ => {
                    theta = flip;
                    self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = self.nonbasic_value(q);
                    for (pp, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= dir * alpha[pp] * theta;
                    }
                }
            }

            let obj = self.objective(cost);
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
            last_obj = obj;
        }
    }

    /// Dual simplex from a dual feasible basis.
    ///
    /// Reduced costs are updated from the pivot row, which is assembled
    /// row-wise from the (usually sparse) row of the basis inverse.
    fn dual(&mut self, cost: &[f64]) -> Result<LpStatus, LpError> {
        let m = self.sf.m;
        let n = self.n();
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = self.objective(cost);
        let mut d = self.reduced_costs(cost);
        let mut arow = vec![0.0; n];
        let mut touched = vec![false; n];
        let mut list: Vec<usize> = Vec::new();
        let mut e = vec![0.0; m];
        loop {
            self.tick()?;
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.basis.iter().enumerate() {
                let v = self.x[j];
                let infeas = (self.sf.lower[j] - v).max(v - self.sf.upper[j]);
                if infeas <= FEAS_TOL {
                    continue;
                }
                let better = if bland {
                    leave.map_or(true, |(lp, _)| j < self.basis[lp])
                } else {
                    leave.map_or(true, |(_, best)| infeas > best)
                };
                if better {
                    leave = Some((p, infeas));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Optimal);
            };
            let leaving = self.basis[r];
            let below = self.x[leaving] < self.sf.lower[leaving];
            e[r] = 1.0;
            let rho = self.factor().btran(&e);
            e[r] = 0.0;

            for &j in &list {
                arow[j] = 0.0;
                touched[j] = false;
            }
            list.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                for &(j, a) in self.sf.row(i) {
                    if !touched[j] {
                        touched[j] = true;
                        list.push(j);
                    }
                    arow[j] += a * ri;
                }
                let s = self.sf.slack(i);
                touched[s] = true;
                list.push(s);
                arow[s] = ri;
            }
            for j in self.sf.n_struct + m..n {
                let a = self.sf.cols.dot(j, &rho);
                if a != 0.0 {
                    touched[j] = true;
                    list.push(j);
                    arow[j] = a;
                }
            }

            let mut theta_max = f64::INFINITY;
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for &j in &list {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = arow[j];
                let ok = match (self.state[j], below) {
                    (VarState::AtLower, true) => a < -PIVOT_TOL,
                    (VarState::AtUpper, true) => a > PIVOT_TOL,
                    (VarState::AtLower, false) => a > PIVOT_TOL,
                    (VarState::AtUpper, false) => a < -PIVOT_TOL,
                    _ => false,
                };
                if !ok {
                    continue;
                }
                let dabs = match self.state[j] {
                    VarState::AtLower => d[j].max(0.0),
                    _ => (-d[j]).max(0.0),
                };
                theta_max = theta_max.min((dabs + OPT_TOL) / a.abs());
                cands.push((j, dabs / a.abs(), a.abs()));
            }
            if cands.is_empty() {
                return Ok(LpStatus::Infeasible);
            }
            let mut enter: Option<(usize, f64, f64)> = None;
            for &(j, ratio, mag) in &cands {
                if ratio > theta_max {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some((bj, br, bm)) => {
                        if bland {
                            ratio < br - 1e-15 || (ratio <= br + 1e-15 && j < bj)
                        } else {
                            mag > bm
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, mag));
                }
            }
            let (q, _, _) = enter.expect("candidate within Harris bound");
            let alpha = self.factor().ftran(&self.dense_col(q));
            if alpha[r].abs() < PIVOT_TOL || (alpha[r] - arow[q]).abs() > 1e-6 * (1.0 + alpha[r].abs()) {
                // Row and column computations disagree; rebuild and retry.
                self.refactor()?;
                d = self.reduced_costs(cost);
                continue;
            }
            let target = if below { self.sf.lower[leaving] } else { self.sf.upper[leaving] };
            let t = (self.x[leaving] - target) / alpha[r];
            let mut obj = last_obj + d[q] * t;
            self.x[q] += t;
            for (p, &j) in self.basis.iter().enumerate() {
                self.x[j] -= alpha[p] * t;
            }
            self.x[leaving] = target;

            let theta_d = d[q] / arow[q];
            for &j in &list {
                if self.state[j] != VarState::Basic {
                    d[j] -= theta_d * arow[j];
                }
            }
            d[q] = 0.0;
            d[leaving] = -theta_d;

            let to = if below { VarState::AtLower } else { VarState::AtUpper };
            self.pivot(r, q, &alpha, to)?;
            if self.factor().num_updates() == 0 {
                d = self.reduced_costs(cost);
                obj = self.objective(cost);
            }

            if obj > last_obj + 1e-12 * (1.0 + last_obj.abs()) {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
            last_obj = obj;
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let y = self.duals(cost);
        (0..self.n())
            .map(|j| if self.state[j] == VarState::Basic { 0.0 } else { cost[j] - self.sf.cols.dot(j, &y) })
            .collect()
    }

    /// Phase one from the slack basis with artificial columns on violated rows.
    /// Returns `false` when the problem is infeasible.
    fn phase_one(&mut self) -> Result<bool, LpError> {
        self.reset_to_slack_basis();
        for j in 0..self.n() {
            if self.state[j] == VarState::AtUpper && self.sf.cost[j] < 0.0 {
                // Start structurals at their lower bound; phase one ignores costs.
                self.state[j] = VarState::AtLower;
            }
        }
        self.refactor()?;
        let mut added = Vec::new();
        for i in 0..self.sf.m {
            let s = self.sf.slack(i);
            let v = self.x[s];
            let target = v.clamp(self.sf.lower[s], self.sf.upper[s]);
            if (v - target).abs() <= FEAS_TOL {
                continue;
            }
            let sign = if v > target { 1.0 } else { -1.0 };
            self.sf.cols.push_col([(i, sign)]);
            self.sf.cost.push(0.0);
            self.sf.lower.push(0.0);
            self.sf.upper.push(f64::INFINITY);
            self.state.push(VarState::Basic);
            self.x.push((v - target).abs());
            let a = self.n() - 1;
            self.state[s] = if target == self.sf.lower[s] { VarState::AtLower } else { VarState::AtUpper };
            self.basis[i] = a;
            added.push(a);
        }
        if added.is_empty() {
            return Ok(true);
        }
        self.iteration_limit += 50 * added.len();
        self.refactor()?;
        let mut phase_cost = vec![0.0; self.n()];
        for &a in &added {
            phase_cost[a] = 1.0;
        }
        let status = self.primal(&phase_cost)?;
        debug_assert_eq!(status, LpStatus::Optimal);
        let infeas: f64 = added.iter().map(|&a| self.x[a]).sum();
        let scale = 1.0 + self.sf.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for &a in &added {
            self.sf.upper[a] = 0.0;
        }
        if infeas > FEAS_TOL * scale {
            return Ok(false);
        }
        self.compute_xb();
        Ok(true)
    }

    /// Optimizes from the current basis.
    pub fn optimize(&mut self) -> Result<LpStatus, LpError> {
        let cost = self.sf.cost.clone();
        self.solve_start = self.iterations;
        if self.factor.is_some() {
            // Warm start from the basis left by the previous solve; only
            // bounds changed since.
            self.compute_xb();
        } else {
            self.refactor()?;
        }
        let mut used_phase_one = false;
        for _ in 0..6 {
            let primal_ok = self.primal_infeasibility() <= FEAS_TOL;
            let dual_ok = self.dual_infeasibility(&cost) <= OPT_TOL;
            if primal_ok && dual_ok {
                return Ok(LpStatus::Optimal);
            }
            if dual_ok {
                if self.dual(&cost)? == LpStatus::Infeasible {
                    return Ok(LpStatus::Infeasible);
                }
            } else {
                if !primal_ok {
                    if used_phase_one {
                        // Numerical trouble after a full phase one; start over.
                        self.reset_to_slack_basis();
                    }
                    used_phase_one = true;
                    if !self.phase_one()? {
                        return Ok(LpStatus::Infeasible);
                    }
                }
                if self.primal(&cost)? == LpStatus::Unbounded {
                    return Ok(LpStatus::Unbounded);
                }
            }
            self.refactor()?;
        }
        if self.primal_infeasibility() <= 10.0 * FEAS_TOL {
            Ok(LpStatus::Optimal)
        } else {
            Err(LpError::IterationLimit(self.iterations))
        }
    }

    pub fn objective_value(&self) -> f64 {
        (0..self.sf.n_struct).map(|j| self.sf.cost[j] * self.x[j]).sum()
    }

    pub fn structural_values(&self) -> Vec<f64> {
        (0..self.sf.n_struct)
            .map(|j| self.x[j].clamp(self.sf.lower[j], self.sf.upper[j]))
            .collect()
    }
}
