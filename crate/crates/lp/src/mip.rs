//! LP-based branch-and-bound with SOS1 branching.
//!
//! The search dives until it holds an incumbent and then always expands
//! the open node with the lowest bound. Branching candidates are scored
//! with pseudocosts (objective change per unit of fractional mass pushed
//! out), learned from the children solved so far.

use std::rc::Rc;
use std::time::{Duration, Instant};

use log::debug;

use crate::error::LpError;
use crate::model::{relative_gap, MipProgram, Relation, Solution, Status};
use crate::simplex::{BasisSnapshot, Engine, LpStatus, StdForm};

#[derive(Clone, Debug)]
pub struct MipOptions {
    /// Relative gap at which search stops.
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Distance from 0 or 1 below which a binary counts as integral.
    pub int_tol: f64,
    /// A known feasible point; used as the first incumbent when it checks out.
    pub incumbent: Option<Vec<f64>>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-6, time_limit: None, node_limit: None, int_tol: 1e-6, incumbent: None }
    }
}

impl MipOptions {
    pub fn with_gap(gap_tol: f64) -> Self {
        Self { gap_tol, ..Self::default() }
    }
}

struct Node {
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Rc<BasisSnapshot>>,
    bound: f64,
    /// The branch that created this node, for pseudocost updates.
    origin: Option<Origin>,
}

#[derive(Clone, Copy)]
struct Origin {
    group: usize,
    side: usize,
    parent_obj: f64,
    moved: f64,
}

/// Average objective increase per unit of LP mass pushed out, per group and
/// side of the split.
struct Pseudocosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
}

impl Pseudocosts {
    fn new(groups: usize) -> Self {
        Self { sum: vec![[0.0; 2]; groups], count: vec![[0; 2]; groups] }
    }

    fn record(&mut self, o: Origin, obj: f64) {
        let gain = (obj - o.parent_obj).max(0.0) / o.moved.max(1e-6);
        self.sum[o.group][o.side] += gain;
        self.count[o.group][o.side] += 1;
    }

    fn estimate(&self, group: usize, side: usize) -> f64 {
        let c = self.count[group][side];
        if c > 0 {
            return self.sum[group][side] / f64::from(c);
        }
        // Unseen: the mean over groups that have data, else 1.
        let (s, n) = self
            .sum
            .iter()
            .zip(&self.count)
            .fold((0.0, 0u32), |(s, n), (a, b)| if b[side] > 0 { (s + a[side] / f64::from(b[side]), n + 1) } else { (s, n) });
        if n > 0 {
            s / f64::from(n)
        } else {
            1.0
        }
    }
}

struct Group {
    members: Vec<(usize, f64)>,
    convexity_slack: usize,
}

enum Branch {
    /// Two children with the mass each one pushes out; the SOS group when
    /// the split is on a group.
    Children(Vec<(usize, f64, f64)>, Vec<(usize, f64, f64)>, Option<(usize, f64, f64)>),
    Integral,
}

pub fn solve_mip(mip: &MipProgram, opts: &MipOptions) -> Result<Solution, LpError> {
    mip.validate()?;
    if !(opts.gap_tol >= 0.0) {
        return Err(LpError::InvalidParameter(format!("gap_tol {}", opts.gap_tol)));
    }
    let start = Instant::now();
    let mut lp = mip.lp.clone();
    let n = lp.num_vars();
    let mut conv_rows = Vec::with_capacity(mip.sos1.len());
    for g in &mip.sos1 {
        let terms = g.members.iter().map(|&(v, _)| (v, 1.0)).collect();
        conv_rows.push(lp.add_constraint(terms, Relation::Le, 1.0));
    }
    let sf = StdForm::from_lp(&lp);
    let groups: Vec<Group> = mip
        .sos1
        .iter()
        .zip(&conv_rows)
        .map(|(g, &row)| Group {
            members: g.members.iter().map(|&(v, w)| (v.0, w)).collect(),
            convexity_slack: sf.slack(row),
        })
        .collect();
    let mut in_group = vec![false; n];
    for g in &groups {
        for &(j, _) in &g.members {
            in_group[j] = true;
        }
    }
    let binaries: Vec<usize> = mip.binaries.iter().map(|v| v.0).collect();
    let mut engine = Engine::new(sf);
    let root_bounds: Vec<(f64, f64)> = (0..engine.sf.cols.num_cols()).map(|j| engine.bounds(j)).collect();

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(hint) = &opts.incumbent {
        if hint.len() == n && point_is_feasible(mip, hint, opts.int_tol) {
            incumbent = Some((mip.lp.objective_value(hint), hint.clone()));
        } else {
            debug!("ignoring infeasible incumbent hint");
        }
    }

    let mut open: Vec<Node> = vec![Node { changes: Vec::new(), basis: None, bound: f64::NEG_INFINITY, origin: None }];
    let mut pc = Pseudocosts::new(groups.len());
    let mut dive: Option<Node> = None;
    let mut dirty: Vec<usize> = Vec::new();
    let mut pruned_bound = f64::INFINITY;
    let mut nodes = 0usize;
    let mut root_status = None;
    let mut stopped = None;

    loop {
        let node = match dive.take() {
            Some(nd) => nd,
            None => {
                let Some(best) = (0..open.len()).min_by(|&a, &b| open[a].bound.total_cmp(&open[b].bound)) else {
                    break;
                };
                open.swap_remove(best)
            }
        };
        if let Some((inc, _)) = &incumbent {
            if node.bound >= prune_level(*inc, opts.gap_tol) {
                pruned_bound = pruned_bound.min(node.bound);
                continue;
            }
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            stopped = Some(Status::TimeLimit);
            open.push(node);
            break;
        }
        if opts.node_limit.is_some_and(|l| nodes >= l) {
            stopped = Some(Status::TimeLimit);
            open.push(node);
            break;
        }
        nodes += 1;

        if let Some(snap) = &node.basis {
            engine.restore(snap);
        }
        for &j in &dirty {
            let (lo, hi) = root_bounds[j];
            engine.set_bounds(j, lo, hi);
        }
        dirty.clear();
        for &(j, lo, hi) in &node.changes {
            engine.set_bounds(j, lo, hi);
            dirty.push(j);
        }
        let status = engine.optimize()?;
        if root_status.is_none() {
            root_status = Some(status);
            if status == LpStatus::Unbounded {
                return Ok(Solution::without_point(Status::Unbounded, engine.iterations));
            }
        }
        if status != LpStatus::Optimal {
            continue;
        }
        let obj = engine.objective_value();
        if let Some(o) = node.origin {
            pc.record(o, obj);
        }
        let bound = obj.max(node.bound);
        if let Some((inc, _)) = &incumbent {
            if bound >= prune_level(*inc, opts.gap_tol) {
                pruned_bound = pruned_bound.min(bound);
                continue;
            }
        }
        let x = engine.structural_values();
        match choose_branch(&x, &groups, &binaries, &in_group, opts.int_tol, &pc) {
            Branch::Integral => {
                let mut point = x;
                for &b in &binaries {
                    point[b] = point[b].round();
                }
                if incumbent.as_ref().map_or(true, |(inc, _)| obj < *inc) {
                    debug!("incumbent {obj} at node {nodes}");
                    incumbent = Some((obj, point));
                }
            }
            Branch::Children(first, second, split) => {
                let snap = Rc::new(engine.snapshot());
                let origin = |side: usize| {
                    split.map(|(group, m0, m1)| Origin { group, side, parent_obj: obj, moved: if side == 0 { m0 } else { m1 } })
                };
                let mut a = node.changes.clone();
                a.extend(first);
                let mut b = node.changes;
                b.extend(second);
                open.push(Node { changes: b, basis: Some(snap), bound, origin: origin(1) });
                if incumbent.is_none() {
                    // Dive for a first incumbent, reusing the basis the
                    // engine holds now.
                    dive = Some(Node { changes: a, basis: None, bound, origin: origin(0) });
                } else {
                    let basis = open.last().and_then(|nd| nd.basis.clone());
                    open.push(Node { changes: a, basis, bound, origin: origin(0) });
                }
            }
        }
    }

    if root_status == Some(LpStatus::Infeasible) && incumbent.is_none() {
        return Ok(Solution::without_point(Status::Infeasible, engine.iterations));
    }
    let open_bound = open.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let Some((objective, values)) = incumbent else {
        let status = stopped.unwrap_or(Status::Infeasible);
        let mut s = Solution::without_point(status, engine.iterations);
        s.nodes = nodes;
        s.bound = open_bound;
        return Ok(s);
    };
    let bound = objective.min(pruned_bound).min(open_bound);
    let gap = relative_gap(objective, bound);
    let status = if gap <= 1e-9 {
        Status::Optimal
    } else if gap <= opts.gap_tol {
        Status::GapLimit
    } else {
        stopped.unwrap_or(Status::GapLimit)
    };
    Ok(Solution { status, objective, values, bound, gap, nodes, iterations: engine.iterations })
}

fn prune_level(incumbent: f64, gap_tol: f64) -> f64 {
    incumbent - gap_tol * incumbent.abs().max(1.0)
}

/// The split of one SOS group: members left on the "low" side, and the LP
/// mass each child pushes out.
struct Split {
    low: Vec<(usize, f64, f64)>,
    high: Vec<(usize, f64, f64)>,
    moved_low: f64,
    moved_high: f64,
}

fn split_group(x: &[f64], group: &Group, tol: f64) -> Split {
    let total: f64 = group.members.iter().map(|&(j, _)| x[j]).sum();
    let v: f64 = group.members.iter().map(|&(j, w)| w * x[j]).sum();
    let mut split = if 1.0 - total > tol { 0.0 } else { f64::NAN };
    for &(j, w) in &group.members {
        if x[j] > tol && w < v && !(w <= split) {
            split = w;
        }
    }
    if split.is_nan() {
        // Support is all above the weighted mean (numerical edge); split
        // below the smallest supported weight instead.
        split = group.members.iter().find(|&&(j, _)| x[j] > tol).map_or(0.0, |&(_, w)| w);
    }
    // `low` keeps weights up to the split, `high` the rest.
    let mut high = vec![(group.convexity_slack, 0.0, 0.0)];
    let mut low = Vec::new();
    let mut mass_low = (1.0 - total).max(0.0);
    let mut mass_high = 0.0;
    for &(j, w) in &group.members {
        if w > split {
            low.push((j, 0.0, 0.0));
            mass_high += x[j];
        } else {
            high.push((j, 0.0, 0.0));
            mass_low += x[j];
        }
    }
    Split { low, high, moved_low: mass_high, moved_high: mass_low }
}

fn choose_branch(x: &[f64], groups: &[Group], binaries: &[usize], in_group: &[bool], tol: f64, pc: &Pseudocosts) -> Branch {
    let mut best: Option<(f64, usize, Split)> = None;
    for (g, group) in groups.iter().enumerate() {
        let total: f64 = group.members.iter().map(|&(j, _)| x[j]).sum();
        let closed = (1.0 - total).max(0.0);
        let mut support = usize::from(closed > tol);
        for &(j, _) in &group.members {
            support += usize::from(x[j] > tol);
        }
        if support < 2 {
            continue;
        }
        let sp = split_group(x, group, tol);
        // Product rule on the estimated increase of both children.
        let score = (pc.estimate(g, 0) * sp.moved_low).max(1e-6) * (pc.estimate(g, 1) * sp.moved_high).max(1e-6);
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, g, sp));
        }
    }
    if let Some((_, g, sp)) = best {
        // Explore the side that keeps more of the LP mass first.
        return if sp.moved_low <= sp.moved_high {
            Branch::Children(sp.low, sp.high, Some((g, sp.moved_low, sp.moved_high)))
        } else {
            Branch::Children(sp.high, sp.low, Some((g, sp.moved_high, sp.moved_low)))
        };
    }
    let mut pick: Option<(f64, usize)> = None;
    for &j in binaries {
        if in_group[j] {
            continue;
        }
        let frac = x[j].min(1.0 - x[j]);
        if frac > tol && pick.map_or(true, |(f, _)| frac > f) {
            pick = Some((frac, j));
        }
    }
    match pick {
        Some((_, j)) => {
            let down = vec![(j, 0.0, 0.0)];
            let up = vec![(j, 1.0, 1.0)];
            if x[j] >= 0.5 {
                Branch::Children(up, down, None)
            } else {
                Branch::Children(down, up, None)
            }
        }
        None => Branch::Integral,
    }
}

fn point_is_feasible(mip: &MipProgram, x: &[f64], tol: f64) -> bool {
    if mip.lp.max_violation(x) > 1e-6 {
        return false;
    }
    if mip.binaries.iter().any(|b| (x[b.0] - x[b.0].round()).abs() > tol) {
        return false;
    }
    mip.sos1.iter().all(|g| g.members.iter().filter(|(v, _)| x[v.0] > tol).count() <= 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearProgram;

    #[test]
    fn sos_branch_splits_support() {
        let groups = vec![Group { members: vec![(0, 1.0), (1, 2.0), (2, 3.0)], convexity_slack: 9 }];
        let x = [0.5, 0.0, 0.5];
        let Branch::Children(a, b, _) = choose_branch(&x, &groups, &[0, 1, 2], &[true; 3], 1e-6, &Pseudocosts::new(1)) else {
            panic!("expected a branch");
        };
        let all: Vec<usize> = a.iter().chain(&b).map(|c| c.0).collect();
        assert!(all.contains(&9));
        assert_eq!(a.len() + b.len(), 4);
    }

    #[test]
    fn hint_is_used_as_incumbent() {
        let mut mip = MipProgram::new(LinearProgram::new());
        let a = mip.add_binary(-1.0);
        let b = mip.add_binary(-1.0);
        mip.lp.add_constraint(vec![(a, 2.0), (b, 2.0)], Relation::Le, 3.0);
        let opts = MipOptions { incumbent: Some(vec![1.0, 0.0]), ..MipOptions::default() };
        let s = solve_mip(&mip, &opts).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-9);
    }
}
