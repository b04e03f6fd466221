//! Instance generators and an independent reference model shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dynfleet::data::{default_start, generate_synthetic, ingest_reader, synthetic_network, write_trips, IntensityProfile};
use dynfleet::domain::{DemandSnapshot, FleetConfig, Network, OdPair};
use dynfleet::experiment::ExperimentConfig;
use dynfleet::fleet::dynamic_split;
use dynfleet::lp::{solve_lp, LinearProgram, Relation, Status, VarId};
use dynfleet::noise::Family;
use dynfleet::routes::{enumerate_routes, RouteSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Tiny {
    pub network: Network,
    pub routes: RouteSet,
    pub demand: BTreeMap<OdPair, f64>,
    pub fleet: FleetConfig,
}

/// 3 or 4 stations, at most 6 routes (the full-cover route plus a random
/// subset of the others), fleet of at most 3 and at most 6 OD pairs.
pub fn tiny_instance(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=4usize);
    let coords: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0))).collect();
    let names = (0..n).map(|i| format!("N{i}")).collect();
    let network = Network::from_coordinates(names, &coords, 2.0);
    let all = enumerate_routes(&network).unwrap();
    let mut others: Vec<usize> = (0..all.len()).filter(|&r| r != all.base_route).collect();
    others.shuffle(&mut rng);
    others.truncate(rng.random_range(0..=5usize.min(others.len())));
    others.sort_unstable();
    let mut routes: Vec<_> = others.iter().chain([&all.base_route]).map(|&r| all.routes[r].clone()).collect();
    for (i, r) in routes.iter_mut().enumerate() {
        r.id = i;
    }
    let routes = RouteSet { base_route: routes.len() - 1, routes };

    let mut pairs: Vec<OdPair> = (0..n).flat_map(|o| (0..n).filter(move |&d| d != o).map(move |d| OdPair::new(o, d))).collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(rng.random_range(1..=6usize.min(pairs.len())));
    let demand = pairs.into_iter().map(|od| (od, f64::from(rng.random_range(1..=9u32)))).collect();
    let pi = rng.random_range(1..=3u32);
    let alpha = [0.0, 0.34, 0.5, 0.67, 1.0][rng.random_range(0..5usize)];
    let gamma = rng.random_range(6..=20u32);
    Tiny { network, routes, demand, fleet: FleetConfig::new(gamma, pi, alpha).unwrap() }
}

/// Every allocation the model admits: at most `pi` buses in total and the
/// base route at or above the static share (and running at all when that
/// share is positive).
pub fn admissible_allocations(routes: &RouteSet, fleet: &FleetConfig) -> Vec<Vec<u32>> {
    let pi = fleet.fleet_size;
    let (_, fixed) = dynamic_split(pi, fleet.dynamic_fraction);
    let mut out = Vec::new();
    let mut cur = vec![0u32; routes.len()];
    fn rec(r: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if r == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[r] = k;
            rec(r + 1, left - k, cur, out);
        }
        cur[r] = 0;
    }
    rec(0, pi, &mut cur, &mut out);
    out.retain(|a| a[routes.base_route] >= fixed && (fixed == 0 || a[routes.base_route] >= 1));
    out
}

/// Passenger-minutes of the best assignment for a fixed allocation, from a
/// per-OD arc-flow model: each OD pair gets its own copy of every running
/// route with forward and backward arc flows, boardings (charged the route
/// wait) and alightings, coupled per station. `None` if infeasible.
pub fn arc_lp_cost(routes: &RouteSet, buses: &[u32], demand: &BTreeMap<OdPair, f64>, gamma: u32, n: usize) -> Option<f64> {
    let mut lp = LinearProgram::new();
    let mut arc_load: BTreeMap<(usize, bool, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    for (&od, &q) in demand {
        if q <= 0.0 {
            continue;
        }
        let mut station: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
        for (r, route) in routes.routes.iter().enumerate() {
            let k = buses[r];
            if k == 0 {
                continue;
            }
            let wait = route.cycle_time / (2.0 * f64::from(k));
            let m = route.stops.len();
            let fwd: Vec<VarId> = (0..m - 1).map(|p| lp.add_var(route.leg_times[p])).collect();
            let back: Vec<VarId> = (0..m - 1).map(|p| lp.add_var(route.back_leg_times[p])).collect();
            for (p, &s) in route.stops.iter().enumerate() {
                let board = lp.add_var(wait);
                let alight = lp.add_var(0.0);
                // board + arriving arcs = alight + leaving arcs
                let mut row = vec![(board, 1.0), (alight, -1.0)];
                if p > 0 {
                    row.push((fwd[p - 1], 1.0));
                    row.push((back[p - 1], -1.0));
                }
                if p + 1 < m {
                    row.push((back[p], 1.0));
                    row.push((fwd[p], -1.0));
                }
                lp.add_constraint(row, Relation::Eq, 0.0);
                station[s].push((alight, 1.0));
                station[s].push((board, -1.0));
            }
            for p in 0..m - 1 {
                arc_load.entry((r, true, p)).or_default().push((fwd[p], 1.0));
                arc_load.entry((r, false, p)).or_default().push((back[p], 1.0));
            }
        }
        for (s, terms) in station.into_iter().enumerate() {
            let rhs = if s == od.destination {
                q
            } else if s == od.origin {
                -q
            } else {
                0.0
            };
            if terms.is_empty() {
                if rhs != 0.0 {
                    return None;
                }
                continue;
            }
            lp.add_constraint(terms, Relation::Eq, rhs);
        }
    }
    for ((r, _, _), terms) in arc_load {
        lp.add_constraint(terms, Relation::Le, f64::from(gamma) * f64::from(buses[r]));
    }
    if lp.num_vars() == 0 {
        return Some(0.0);
    }
    let sol = solve_lp(&lp).unwrap();
    (sol.status == Status::Optimal).then_some(sol.objective)
}

/// Exhaustive optimum over admissible allocations; `None` if none carries
/// the demand.
pub fn oracle_optimum(t: &Tiny) -> Option<(f64, Vec<u32>)> {
    let mut best: Option<(f64, Vec<u32>)> = None;
    for a in admissible_allocations(&t.routes, &t.fleet) {
        if let Some(c) = arc_lp_cost(&t.routes, &a, &t.demand, t.fleet.capacity, t.network.len()) {
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, a));
            }
        }
    }
    best
}

/// Synthetic hours for a network built by `synthetic_network(stations, seed)`.
pub fn synthetic_hours(stations: usize, days: usize, profile: &IntensityProfile, seed: u64) -> (Network, Vec<DemandSnapshot>) {
    let network = synthetic_network(stations, seed);
    let records = generate_synthetic(stations, 24 * days, profile, default_start(), seed).unwrap();
    let mut csv = Vec::new();
    write_trips(&records, &mut csv).unwrap();
    let hours = ingest_reader(&csv[..], "synthetic", &network).unwrap().snapshots;
    (network, hours)
}

/// Desk scale: 4 stations (11 routes), 20 hours, every family at four noise
/// levels, two capacities and three dynamic shares (144 result rows).
pub fn desk_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        families: Family::ALL.to_vec(),
        sigmas: vec![0.5, 1.0, 2.0, 3.0],
        gammas: vec![20, 40],
        alphas: vec![0.0, 0.2, 0.4],
        n_hours: 20,
        sizing_hours: 24,
        ..ExperimentConfig::default()
    }
}

pub fn desk_data(seed: u64) -> (Network, Vec<DemandSnapshot>) {
    synthetic_hours(4, 7, &IntensityProfile::default(), seed)
}
