//! Solving the allocation model, fleet sizing and re-evaluation on true demand.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use dynfleet_lp::{solve_lp, solve_mip, LinearProgram, MipOptions, Relation, Status, VarId};
use serde::{Deserialize, Serialize};

use crate::domain::{DemandSnapshot, FleetConfig, Network, OdPair, PredictionSnapshot, Station};
use crate::error::{Error, Result};
use crate::formulation::{build_formulation, MilpBuild};
use crate::routes::RouteSet;

/// Penalty per unserved passenger, as a multiple of the base-route trip.
pub const ELASTIC_FACTOR: f64 = 10.0;

pub fn truncate_predictions(pred: &PredictionSnapshot) -> BTreeMap<OdPair, f64> {
    pred.values.iter().map(|(&od, &v)| (od, v.max(0.0))).collect()
}

/// `(dynamic, static)` bus counts: `D = ceil(alpha * pi)`, `S = pi - D`.
pub fn dynamic_split(pi: u32, alpha: f64) -> (u32, u32) {
    let v = alpha * f64::from(pi);
    let r = v.round();
    // 0.1 * 30 is 3.0000000000000004 in floating point.
    let d = if (v - r).abs() <= 1e-9 * v.abs().max(1.0) { r } else { v.ceil() };
    let d = (d.max(0.0) as u32).min(pi);
    (d, pi - d)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    /// Buses per route of a known allocation, tried as the first incumbent.
    pub hint: Option<Vec<u32>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-6, time_limit: None, hint: None }
    }
}

impl SolveOptions {
    pub fn with_gap(gap_tol: f64) -> Self {
        Self { gap_tol, ..Self::default() }
    }
}

/// Completes an allocation to a full model point by solving the LP with
/// every level indicator fixed. `None` if the allocation does not fit the
/// model or cannot carry the demand.
fn hint_point(build: &MilpBuild, buses: &[u32]) -> Result<Option<Vec<f64>>> {
    if buses.len() != build.y.len() {
        return Ok(None);
    }
    let mut lp = build.mip.lp.clone();
    for (row, &k) in build.y.iter().zip(buses) {
        for (i, v) in row.iter().enumerate() {
            let Some(v) = *v else { continue };
            if i as u32 + 1 == k {
                lp.add_constraint(vec![(v, 1.0)], Relation::Ge, 1.0);
            } else {
                lp.set_upper(v, 0.0);
            }
        }
        if k > 0 && row.get(k as usize - 1).copied().flatten().is_none() {
            return Ok(None);
        }
    }
    let sol = solve_lp(&lp)?;
    Ok((sol.status == Status::Optimal).then_some(sol.values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Buses per route, indexed by route id.
    pub buses: Vec<u32>,
    pub objective: f64,
    pub status: String,
    pub gap: f64,
    pub seconds: f64,
    /// Whether the model needed unmet-demand columns to be feasible.
    pub elastic: bool,
}

impl Allocation {
    pub fn total_buses(&self) -> u32 {
        self.buses.iter().sum()
    }

    /// `{route_id: bus_count}` for routes that run at least one bus.
    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<String, u32> =
            self.buses.iter().enumerate().filter(|(_, &k)| k > 0).map(|(r, &k)| (r.to_string(), k)).collect();
        Ok(serde_json::to_string(&map)?)
    }

    /// All `pi` buses on the base route.
    pub fn all_on_base(routes: &RouteSet, pi: u32) -> Self {
        let mut buses = vec![0; routes.len()];
        buses[routes.base_route] = pi;
        Self { buses, objective: f64::NAN, status: "fixed".into(), gap: 0.0, seconds: 0.0, elastic: false }
    }
}

pub fn optimize_fleet(build: &MilpBuild, opts: &SolveOptions) -> Result<Allocation> {
    let start = Instant::now();
    let incumbent = match &opts.hint {
        Some(buses) => hint_point(build, buses)?,
        None => None,
    };
    let mip_opts = MipOptions { gap_tol: opts.gap_tol, time_limit: opts.time_limit, incumbent, ..MipOptions::default() };
    let sol = solve_mip(&build.mip, &mip_opts)?;
    match sol.status {
        Status::Infeasible => {
            let total: f64 = build.demand.values().sum();
            return Err(Error::Infeasible(format!(
                "route capacity rows cannot carry {total:.1} passengers with fleet budget {} of capacity {} \
                 and base-route floor {}",
                build.fleet.fleet_size,
                build.fleet.capacity,
                dynamic_split(build.fleet.fleet_size, build.fleet.dynamic_fraction).1
            )));
        }
        Status::Unbounded => return Err(Error::Infeasible("model is unbounded".into())),
        Status::TimeLimit if sol.values.is_empty() => {
            return Err(Error::Infeasible("time limit reached before any allocation was found".into()));
        }
        _ => {}
    }
    let buses = build
        .y
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter_map(|(i, v)| v.filter(|v| sol.value(*v) > 0.5).map(|_| i as u32 + 1))
                .sum()
        })
        .collect();
    let elastic = build.unmet.values().any(|&u| sol.value(u) > 1e-7);
    Ok(Allocation {
        buses,
        objective: sol.objective,
        status: sol.status.as_str().to_string(),
        gap: sol.gap,
        seconds: start.elapsed().as_secs_f64(),
        elastic,
    })
}

/// Price of one unserved passenger.
pub fn elastic_penalty(routes: &RouteSet) -> f64 {
    let base = routes.base();
    ELASTIC_FACTOR * (base.cycle_time / 2.0 + base.path_time())
}

/// Solves the strict model and, if that is infeasible, retries with priced
/// unmet-demand columns.
pub fn optimize_with_fallback(
    network: &Network,
    routes: &RouteSet,
    demand: &BTreeMap<OdPair, f64>,
    fleet: &FleetConfig,
    opts: &SolveOptions,
) -> Result<Allocation> {
    let build = build_formulation(network, routes, demand, fleet, None)?;
    let polished = |build: &MilpBuild| -> Result<SolveOptions> {
        let hint = match &opts.hint {
            Some(h) => Some(polish_allocation(build, routes, h)?),
            None => None,
        };
        Ok(SolveOptions { hint, ..opts.clone() })
    };
    match optimize_fleet(&build, &polished(&build)?) {
        Err(Error::Infeasible(_)) => {
            let build = build_formulation(network, routes, demand, fleet, Some(elastic_penalty(routes)))?;
            let mut alloc = optimize_fleet(&build, &polished(&build)?)?;
            alloc.elastic = true;
            Ok(alloc)
        }
        other => other,
    }
}

/// Local search from `buses`: repeatedly applies the best move of the
/// neighbourhood below while it lowers the fixed-allocation cost. Moves
/// respect the fleet split of `build`. Returns `buses` unchanged when it does
/// not fit the model or cannot carry the demand.
pub fn polish_allocation(build: &MilpBuild, routes: &RouteSet, buses: &[u32]) -> Result<Vec<u32>> {
    let pi = build.fleet.fleet_size;
    let (dynamic, fixed) = dynamic_split(pi, build.fleet.dynamic_fraction);
    let allowed = |r: usize, k: u32| {
        if r == routes.base_route {
            k >= fixed
        } else {
            k <= dynamic
        }
    };
    if buses.len() != routes.len()
        || buses.iter().sum::<u32>() > pi
        || buses.iter().enumerate().any(|(r, &k)| !allowed(r, k))
    {
        return Ok(buses.to_vec());
    }
    let n = build.demand.keys().map(|od| od.origin.max(od.destination) + 1).max().unwrap_or(0);
    let n = n.max(routes.routes.iter().flat_map(|r| r.stops.iter()).max().map_or(0, |&s| s + 1));
    let penalty = (!build.unmet.is_empty()).then(|| elastic_penalty(routes));
    let cost = |b: &[u32]| -> Result<Option<f64>> {
        let alloc = Allocation { buses: b.to_vec(), ..Allocation::all_on_base(routes, 0) };
        let (lp, _, _) = assignment_lp(&alloc, &build.demand, n, routes, build.fleet.capacity, penalty);
        if lp.num_vars() == 0 {
            return Ok(Some(0.0));
        }
        let sol = solve_lp(&lp)?;
        Ok((sol.status == Status::Optimal).then_some(sol.objective))
    };
    let mut best = buses.to_vec();
    let Some(mut best_cost) = cost(&best)? else { return Ok(best) };
    loop {
        let current = best.clone();
        let spare = pi - current.iter().sum::<u32>();
        let mut improved = false;
        // Shift some or all buses of one route (or unused buses) to another
        // route, optionally together with one more bus from the base route
        // or the spare pool.
        let mut cands = BTreeSet::new();
        let sources = (spare > 0).then_some(None).into_iter().chain((0..routes.len()).filter(|&r| current[r] > 0).map(Some));
        for from in sources {
            let avail = from.map_or(spare, |f| current[f]);
            for to in (0..routes.len()).filter(|&t| Some(t) != from) {
                for t in 1..=avail {
                    let mut cand = current.clone();
                    if let Some(f) = from {
                        cand[f] -= t;
                    }
                    cand[to] += t;
                    let left = pi - cand.iter().sum::<u32>();
                    let base = routes.base_route;
                    let mut extra = cand.clone();
                    extra[to] += 1;
                    if left > 0 {
                        cands.insert(extra.clone());
                    }
                    if to != base && cand[base] > 0 {
                        extra[base] -= 1;
                        cands.insert(extra);
                    }
                    cands.insert(cand);
                }
            }
        }
        for cand in cands {
            if cand.iter().enumerate().any(|(r, &k)| !allowed(r, k)) {
                continue;
            }
            if let Some(c) = cost(&cand)? {
                if c < best_cost - 1e-9 * (1.0 + best_cost.abs()) {
                    best_cost = c;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

/// Solves the dynamic shares in the order given, handing each allocation to
/// the next share as a starting incumbent. With ascending shares the
/// objectives never increase, because an allocation that respects the base
/// route floor of one share respects it for every larger share.
pub fn optimize_alpha_chain(
    network: &Network,
    routes: &RouteSet,
    demand: &BTreeMap<OdPair, f64>,
    capacity: u32,
    fleet_size: u32,
    alphas: &[f64],
    opts: &SolveOptions,
) -> Vec<Result<Allocation>> {
    let mut hint = opts.hint.clone();
    alphas
        .iter()
        .map(|&alpha| {
            let opts = SolveOptions { hint: hint.clone(), ..opts.clone() };
            let res = FleetConfig::new(capacity, fleet_size, alpha)
                .and_then(|fleet| optimize_with_fallback(network, routes, demand, &fleet, &opts));
            if let Ok(a) = &res {
                hint = Some(a.buses.clone());
            }
            res
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    ReassignTrueDemand,
    ObjectiveOnPredictions,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluationResult {
    /// Passenger-minutes of served demand, penalties excluded.
    pub f: f64,
    pub unserved: f64,
    pub feasible: bool,
}

/// Fixed-allocation assignment LP. Returns the LP, the cost-bearing columns
/// and the unmet-demand columns.
fn assignment_lp(
    allocation: &Allocation,
    demand: &BTreeMap<OdPair, f64>,
    n: usize,
    routes: &RouteSet,
    gamma: u32,
    penalty: Option<f64>,
) -> (LinearProgram, Vec<VarId>, Vec<VarId>) {
    let mut lp = LinearProgram::new();
    let mut served = Vec::new();
    let mut slack = Vec::new();
    let mut origins: BTreeMap<Station, BTreeMap<Station, f64>> = BTreeMap::new();
    for (od, &v) in demand {
        if v > 0.0 {
            origins.entry(od.origin).or_default().insert(od.destination, v);
        }
    }
    let mut cover: BTreeMap<(usize, bool, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    for (&o, dests) in &origins {
        let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
        for (r, route) in routes.routes.iter().enumerate() {
            let k = allocation.buses[r];
            if k == 0 {
                continue;
            }
            let wait = route.cycle_time / (2.0 * f64::from(k));
            let m = route.stops.len();
            for p in 0..m {
                for q in 0..m {
                    if p == q || route.stops[q] == o {
                        continue;
                    }
                    let z = lp.add_var(route.ride_time(p, q) + wait);
                    served.push(z);
                    rows[route.stops[q]].push((z, 1.0));
                    rows[route.stops[p]].push((z, -1.0));
                    let (lo, hi, fwd) = if p < q { (p, q, true) } else { (q, p, false) };
                    for leg in lo..hi {
                        cover.entry((r, fwd, leg)).or_default().push((z, 1.0));
                    }
                }
            }
        }
        for (s, mut terms) in rows.into_iter().enumerate() {
            if s == o {
                continue;
            }
            let rhs = dests.get(&s).copied().unwrap_or(0.0);
            if let (Some(pen), true) = (penalty, rhs > 0.0) {
                let u = lp.add_var(pen);
                slack.push(u);
                terms.push((u, 1.0));
            }
            if terms.is_empty() && rhs == 0.0 {
                continue;
            }
            if terms.is_empty() {
                // Unreachable and no slack: force infeasibility explicitly.
                let dummy = lp.add_var(0.0);
                lp.add_constraint(vec![(dummy, 0.0)], Relation::Eq, rhs);
                continue;
            }
            lp.add_constraint(terms, Relation::Eq, rhs);
        }
    }
    for ((r, _, _), terms) in cover {
        lp.add_constraint(terms, Relation::Le, f64::from(gamma) * f64::from(allocation.buses[r]));
    }
    (lp, served, slack)
}

pub fn evaluate_allocation(
    allocation: &Allocation,
    true_demand: &DemandSnapshot,
    routes: &RouteSet,
    gamma: u32,
    mode: EvaluationMode,
) -> Result<EvaluationResult> {
    if mode == EvaluationMode::ObjectiveOnPredictions {
        return Ok(EvaluationResult { f: allocation.objective, unserved: 0.0, feasible: !allocation.elastic });
    }
    let n = routes.routes.iter().flat_map(|r| r.stops.iter()).max().map_or(0, |&s| s + 1);
    let n = n.max(true_demand.counts.keys().map(|od| od.origin.max(od.destination) + 1).max().unwrap_or(0));
    let (lp, served, slack) =
        assignment_lp(allocation, &true_demand.counts, n, routes, gamma, Some(elastic_penalty(routes)));
    if lp.num_vars() == 0 {
        return Ok(EvaluationResult { f: 0.0, unserved: 0.0, feasible: true });
    }
    let sol = solve_lp(&lp)?;
    if sol.status != Status::Optimal {
        return Err(Error::Infeasible(format!("evaluation LP ended {}", sol.status)));
    }
    let f: f64 = served.iter().map(|&z| lp.cost(z) * sol.value(z)).sum();
    let unserved: f64 = slack.iter().map(|&u| sol.value(u)).sum();
    let unserved = if unserved > 1e-7 { unserved } else { 0.0 };
    Ok(EvaluationResult { f, unserved, feasible: unserved == 0.0 })
}

/// Whether `allocation` can carry `demand` in full.
pub fn allocation_is_feasible(
    allocation: &Allocation,
    demand: &BTreeMap<OdPair, f64>,
    n: usize,
    routes: &RouteSet,
    gamma: u32,
) -> Result<bool> {
    let (mut lp, served, _) = assignment_lp(allocation, demand, n, routes, gamma, None);
    if lp.num_vars() == 0 {
        return Ok(true);
    }
    for z in served {
        lp.set_cost(z, 0.0);
    }
    // Zero costs leave columns unreferenced only if they sit in no row; every
    // segment sits in a balance row, so validation still passes.
    Ok(solve_lp(&lp)?.status == Status::Optimal)
}

/// Heaviest directed arc load when everyone rides the base route.
pub fn base_route_peak_load(routes: &RouteSet, demand: &BTreeMap<OdPair, f64>) -> f64 {
    let base = routes.base();
    let legs = base.stops.len() - 1;
    let mut fwd = vec![0.0; legs];
    let mut back = vec![0.0; legs];
    for (od, &v) in demand {
        if v <= 0.0 {
            continue;
        }
        let (Some(p), Some(q)) = (base.position(od.origin), base.position(od.destination)) else {
            continue;
        };
        if p < q {
            fwd[p..q].iter_mut().for_each(|x| *x += v);
        } else {
            back[q..p].iter_mut().for_each(|x| *x += v);
        }
    }
    fwd.into_iter().chain(back).fold(0.0, f64::max)
}

/// Smallest fleet whose all-static configuration carries every given hour.
pub fn min_feasible_fleet(
    network: &Network,
    routes: &RouteSet,
    gamma: u32,
    hours: &[DemandSnapshot],
    cap: u32,
) -> Result<u32> {
    if hours.is_empty() {
        return Err(Error::InvalidArgument("fleet sizing needs at least one hour".into()));
    }
    if gamma == 0 {
        return Err(Error::InvalidArgument("capacity must be positive".into()));
    }
    let peak = hours.iter().map(|h| base_route_peak_load(routes, &h.counts)).fold(0.0, f64::max);
    let start = ((peak / f64::from(gamma)) - 1e-9).ceil().max(1.0) as u32;
    let mut pi = start;
    'scan: while pi <= cap {
        let alloc = Allocation::all_on_base(routes, pi);
        for h in hours {
            if !allocation_is_feasible(&alloc, &h.counts, network.len(), routes, gamma)? {
                pi += 1;
                continue 'scan;
            }
        }
        return Ok(pi);
    }
    // Report the first hour that fails at the cap.
    let alloc = Allocation::all_on_base(routes, cap);
    for h in hours {
        if !allocation_is_feasible(&alloc, &h.counts, network.len(), routes, gamma)? {
            return Err(Error::Infeasible(format!(
                "hour {} needs more than {cap} buses of capacity {gamma}",
                h.hour_index
            )));
        }
    }
    Err(Error::Infeasible(format!("no fleet size up to {cap} is feasible")))
}
