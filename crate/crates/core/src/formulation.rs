//! Mixed-integer program for route allocation.
//!
//! Two builders share the allocation part (one SOS1 group of level
//! indicators `y[r][k]` per route, the fleet budget and the base-route
//! floor) and differ in how passengers are modelled:
//!
//! * [`build_literal`] keeps one commodity per OD pair with per-route arc
//!   flows `x`, boardings `b` split by allocation level, and alightings `a`.
//!   Each route copy conserves flow on its own and a per-station coupling row
//!   carries the demand across routes.
//! * [`build_formulation`] (the default) merges commodities that share an
//!   origin and models a ride as a segment `z` from one stop of a route to
//!   another. A segment covers the route arcs between its two stops, so
//!   capacity rows look the same, and its cost is the in-vehicle time. This
//!   is the path decomposition of the literal model and has the same optimum
//!   with far fewer rows and columns.

use std::collections::BTreeMap;

use dynfleet_lp::{LinearProgram, MipProgram, Relation, VarId};

use crate::domain::{FleetConfig, Network, OdPair, Station};
use crate::error::{Error, Result};
use crate::fleet::dynamic_split;
use crate::routes::RouteSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulationKind {
    Compact,
    Literal,
}

/// A ride on `route` from stop position `from` to position `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub origin: Station,
    pub route: usize,
    pub from: usize,
    pub to: usize,
    pub var: VarId,
}

#[derive(Clone, Debug)]
pub struct MilpBuild {
    pub kind: FormulationKind,
    pub mip: MipProgram,
    /// `y[r][k - 1]`; `None` where the level is ruled out up front.
    pub y: Vec<Vec<Option<VarId>>>,
    pub segments: Vec<Segment>,
    /// Literal model only: `(od, route, arc index)`, arcs forward then backward.
    pub x: BTreeMap<(OdPair, usize, usize), VarId>,
    /// Literal model only: `(od, route, k, stop position)`.
    pub b: BTreeMap<(OdPair, usize, u32, usize), VarId>,
    /// Literal model only: `(od, route, stop position)`.
    pub a: BTreeMap<(OdPair, usize, usize), VarId>,
    /// Elastic unmet-demand columns, when requested.
    pub unmet: BTreeMap<OdPair, VarId>,
    pub big_m: f64,
    pub demand: BTreeMap<OdPair, f64>,
    pub fleet: FleetConfig,
}

impl MilpBuild {
    pub fn num_y(&self) -> usize {
        self.y.iter().flatten().filter(|v| v.is_some()).count()
    }
}

fn check_demand(network: &Network, demand: &BTreeMap<OdPair, f64>) -> Result<()> {
    for (od, &v) in demand {
        if od.origin >= network.len() || od.destination >= network.len() {
            return Err(Error::InvalidArgument(format!(
                "demand for OD ({}, {}) outside the {}-station network",
                od.origin,
                od.destination,
                network.len()
            )));
        }
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("demand must be nonnegative and finite, got {v}")));
        }
    }
    Ok(())
}

/// Allocation block shared by both builders.
struct Allocation {
    y: Vec<Vec<Option<VarId>>>,
    /// `sum_k k * y[r][k]` terms per route.
    level_terms: Vec<Vec<(VarId, f64)>>,
}

fn add_allocation(mip: &mut MipProgram, routes: &RouteSet, fleet: &FleetConfig, prune: bool) -> Allocation {
    let pi = fleet.fleet_size;
    let (dynamic, fixed) = dynamic_split(pi, fleet.dynamic_fraction);
    let mut y = Vec::with_capacity(routes.len());
    let mut level_terms = Vec::with_capacity(routes.len());
    let mut budget = Vec::new();
    for r in 0..routes.len() {
        let is_base = r == routes.base_route;
        let mut row = Vec::with_capacity(pi as usize);
        let mut terms = Vec::new();
        let mut group = Vec::new();
        for k in 1..=pi {
            // Below the floor the base route is closed off; in the compact
            // model other routes also cannot exceed the dynamic share.
            let allowed = if is_base { k >= fixed } else { !prune || k <= dynamic };
            if !allowed && prune {
                row.push(None);
                continue;
            }
            let v = mip.add_binary(0.0);
            mip.lp.set_name(v, format!("y_{r}_{k}"));
            if !allowed {
                mip.lp.set_upper(v, 0.0);
            }
            row.push(Some(v));
            terms.push((v, f64::from(k)));
            group.push((v, f64::from(k)));
            budget.push((v, f64::from(k)));
        }
        if !group.is_empty() {
            mip.add_sos1(group);
        }
        y.push(row);
        level_terms.push(terms);
    }
    mip.lp.add_constraint(budget, Relation::Le, f64::from(pi));
    if fixed >= 1 {
        let base: Vec<(VarId, f64)> = y[routes.base_route].iter().flatten().map(|&v| (v, 1.0)).collect();
        mip.lp.add_constraint(base, Relation::Ge, 1.0);
    }
    Allocation { y, level_terms }
}

/// Default compact model. `elastic_penalty` adds per-OD unmet-demand columns.
pub fn build_formulation(
    network: &Network,
    routes: &RouteSet,
    demand: &BTreeMap<OdPair, f64>,
    fleet: &FleetConfig,
    elastic_penalty: Option<f64>,
) -> Result<MilpBuild> {
    check_demand(network, demand)?;
    let n = network.len();
    let gamma = f64::from(fleet.capacity);
    let total: f64 = demand.values().sum();
    let mut mip = MipProgram::new(LinearProgram::new());
    let alloc = add_allocation(&mut mip, routes, fleet, true);

    let mut by_origin: BTreeMap<Station, Vec<(Station, f64)>> = BTreeMap::new();
    for (od, &v) in demand {
        if v > 0.0 {
            by_origin.entry(od.origin).or_default().push((od.destination, v));
        }
    }

    let usable: Vec<bool> = alloc.level_terms.iter().map(|t| !t.is_empty()).collect();
    let mut segments = Vec::new();
    // (route, direction, leg) -> covering segment vars
    let mut cover: BTreeMap<(usize, bool, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    // (origin, route, boards at the origin) -> segment vars
    let mut boardings: BTreeMap<(Station, usize, bool), Vec<(VarId, f64)>> = BTreeMap::new();
    let mut balance: BTreeMap<(Station, Station), Vec<(VarId, f64)>> = BTreeMap::new();
    for &o in by_origin.keys() {
        for (r, route) in routes.routes.iter().enumerate() {
            if !usable[r] {
                continue;
            }
            let m = route.stops.len();
            for p in 0..m {
                for q in 0..m {
                    if p == q || route.stops[q] == o {
                        continue;
                    }
                    let var = mip.lp.add_var(route.ride_time(p, q));
                    mip.lp.set_name(var, format!("z_{o}_{r}_{p}_{q}"));
                    segments.push(Segment { origin: o, route: r, from: p, to: q, var });
                    let (lo, hi, fwd) = if p < q { (p, q, true) } else { (q, p, false) };
                    for leg in lo..hi {
                        cover.entry((r, fwd, leg)).or_default().push((var, 1.0));
                    }
                    boardings.entry((o, r, route.stops[p] == o)).or_default().push((var, 1.0));
                    balance.entry((o, route.stops[q])).or_default().push((var, 1.0));
                    if route.stops[p] != o {
                        balance.entry((o, route.stops[p])).or_default().push((var, -1.0));
                    }
                }
            }
        }
    }

    let mut unmet = BTreeMap::new();
    for (&o, dests) in &by_origin {
        let want: BTreeMap<Station, f64> = dests.iter().copied().collect();
        for s in 0..n {
            if s == o {
                continue;
            }
            let rhs = want.get(&s).copied().unwrap_or(0.0);
            let mut terms = balance.remove(&(o, s)).unwrap_or_default();
            if let (Some(pen), true) = (elastic_penalty, rhs > 0.0) {
                let u = mip.lp.add_var(pen);
                mip.lp.set_name(u, format!("u_{o}_{s}"));
                terms.push((u, 1.0));
                unmet.insert(OdPair::new(o, s), u);
            }
            if terms.is_empty() {
                if rhs > 0.0 {
                    return Err(Error::Infeasible(format!("no route reaches station {s} from {o}")));
                }
                continue;
            }
            mip.lp.add_constraint(terms, Relation::Eq, rhs);
        }
    }

    for ((r, _, _), mut terms) in cover {
        for &(v, k) in &alloc.level_terms[r] {
            terms.push((v, -gamma * k));
        }
        mip.lp.add_constraint(terms, Relation::Le, 0.0);
    }

    // Waiting is charged per origin so that a level indicator has to cover
    // the share of each origin's demand that boards at that level, not just
    // a share of the total. Some optimal solution routes every passenger on
    // a simple path, so a passenger boards at its origin once and boards any
    // one route at most once per pair of its stops.
    let out_of: BTreeMap<Station, f64> = by_origin.iter().map(|(&o, d)| (o, d.iter().map(|x| x.1).sum())).collect();
    for ((o, r, first), mut link) in boardings {
        let route = &routes.routes[r];
        let arcs = 2.0 * (route.stops.len() - 1) as f64;
        let per_passenger = if first { 1.0 } else { (route.stops.len() / 2) as f64 };
        for &(y, k) in &alloc.level_terms[r] {
            let wait = route.cycle_time / (2.0 * k);
            let b = mip.lp.add_var(wait);
            mip.lp.set_name(b, format!("B_{o}_{r}_{k}{}", if first { "o" } else { "t" }));
            link.push((b, -1.0));
            let big_m = (out_of[&o] * per_passenger).min(gamma * k * arcs);
            mip.lp.add_constraint(vec![(b, 1.0), (y, -big_m)], Relation::Le, 0.0);
        }
        mip.lp.add_constraint(link, Relation::Eq, 0.0);
    }

    Ok(MilpBuild {
        kind: FormulationKind::Compact,
        mip,
        y: alloc.y,
        segments,
        x: BTreeMap::new(),
        b: BTreeMap::new(),
        a: BTreeMap::new(),
        unmet,
        big_m: total,
        demand: demand.clone(),
        fleet: *fleet,
    })
}

/// One commodity per OD pair with route-level arc flows, boardings per
/// allocation level and alightings. Big-M is the total demand.
pub fn build_literal(
    network: &Network,
    routes: &RouteSet,
    demand: &BTreeMap<OdPair, f64>,
    fleet: &FleetConfig,
) -> Result<MilpBuild> {
    check_demand(network, demand)?;
    let n = network.len();
    let gamma = f64::from(fleet.capacity);
    let pi = fleet.fleet_size;
    let big_m: f64 = demand.values().sum();
    let mut mip = MipProgram::new(LinearProgram::new());
    let alloc = add_allocation(&mut mip, routes, fleet, false);

    let mut x = BTreeMap::new();
    let mut b = BTreeMap::new();
    let mut a = BTreeMap::new();
    let mut capacity: BTreeMap<(usize, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    for (&od, &g) in demand {
        if g <= 0.0 {
            continue;
        }
        let mut coupling: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
        for (r, route) in routes.routes.iter().enumerate() {
            let m = route.stops.len();
            let legs = m - 1;
            // Arc j < legs goes stops[j] -> stops[j+1]; arc legs + j goes back.
            let mut arc_vars = Vec::with_capacity(2 * legs);
            for j in 0..2 * legs {
                let cost = if j < legs { route.leg_times[j] } else { route.back_leg_times[j - legs] };
                let v = mip.lp.add_var(cost);
                x.insert((od, r, j), v);
                capacity.entry((r, j)).or_default().push((v, 1.0));
                arc_vars.push(v);
            }
            for p in 0..m {
                let s = route.stops[p];
                let mut row = Vec::new();
                for k in 1..=pi {
                    let v = mip.lp.add_var(route.cycle_time / (2.0 * f64::from(k)));
                    b.insert((od, r, k, p), v);
                    row.push((v, 1.0));
                    coupling[s].push((v, 1.0));
                }
                let av = mip.lp.add_var(0.0);
                a.insert((od, r, p), av);
                row.push((av, -1.0));
                coupling[s].push((av, -1.0));
                // inflow - outflow at stop p
                if p > 0 {
                    row.push((arc_vars[p - 1], 1.0));
                    row.push((arc_vars[legs + p - 1], -1.0));
                }
                if p < legs {
                    row.push((arc_vars[p], -1.0));
                    row.push((arc_vars[legs + p], 1.0));
                }
                mip.lp.add_constraint(row, Relation::Eq, 0.0);
            }
            for k in 1..=pi {
                let y = alloc.y[r][(k - 1) as usize].expect("literal model keeps every level");
                let mut row: Vec<(VarId, f64)> = (0..m).map(|p| (b[&(od, r, k, p)], 1.0)).collect();
                row.push((y, -big_m));
                mip.lp.add_constraint(row, Relation::Le, 0.0);
            }
        }
        for (s, terms) in coupling.into_iter().enumerate() {
            let rhs = if s == od.origin {
                g
            } else if s == od.destination {
                -g
            } else {
                0.0
            };
            mip.lp.add_constraint(terms, Relation::Eq, rhs);
        }
    }
    for ((r, _), mut terms) in capacity {
        for &(v, k) in &alloc.level_terms[r] {
            terms.push((v, -gamma * k));
        }
        mip.lp.add_constraint(terms, Relation::Le, 0.0);
    }

    Ok(MilpBuild {
        kind: FormulationKind::Literal,
        mip,
        y: alloc.y,
        segments: Vec::new(),
        x,
        b,
        a,
        unmet: BTreeMap::new(),
        big_m,
        demand: demand.clone(),
        fleet: *fleet,
    })
}
