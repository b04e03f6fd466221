//! Candidate routes: one shortest Hamiltonian path per station subset.

use serde::Serialize;

use crate::domain::{Network, Station};
use crate::error::{Error, Result};

pub const MAX_STATIONS: usize = 12;
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub id: usize,
    pub stops: Vec<Station>,
    /// Travel time of each leg `stops[i] -> stops[i + 1]`.
    pub leg_times: Vec<f64>,
    /// Travel time of each leg `stops[i + 1] -> stops[i]`.
    pub back_leg_times: Vec<f64>,
    pub cycle_time: f64,
}

impl Route {
    pub fn path_time(&self) -> f64 {
        self.leg_times.iter().sum()
    }

    pub fn arcs_forward(&self) -> Vec<(Station, Station)> {
        self.stops.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn arcs_backward(&self) -> Vec<(Station, Station)> {
        self.stops.windows(2).rev().map(|w| (w[1], w[0])).collect()
    }

    pub fn position(&self, s: Station) -> Option<usize> {
        self.stops.iter().position(|&x| x == s)
    }

    /// In-vehicle time riding from stop position `p` to position `q`.
    pub fn ride_time(&self, p: usize, q: usize) -> f64 {
        if p < q {
            self.leg_times[p..q].iter().sum()
        } else {
            self.back_leg_times[q..p].iter().sum()
        }
    }

    /// Expected wait with `k` evenly spaced buses: half the headway.
    pub fn waiting_time(&self, k: u32) -> Result<f64> {
        waiting_time(self.cycle_time, k)
    }
}

pub fn waiting_time(cycle_time: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("waiting time needs at least one bus".into()));
    }
    Ok(cycle_time / (2.0 * f64::from(k)))
}

#[derive(Clone, Debug)]
pub struct RouteSet {
    pub routes: Vec<Route>,
    pub base_route: usize,
}

#[derive(Serialize)]
struct RouteRecord<'a> {
    id: usize,
    stops: Vec<&'a str>,
    cycle_time: f64,
}

impl RouteSet {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn base(&self) -> &Route {
        &self.routes[self.base_route]
    }

    /// `table[r][k - 1]` is the wait on route `r` with `k` buses, `k = 1..=pi`.
    pub fn waiting_table(&self, pi: u32) -> Vec<Vec<f64>> {
        self.routes
            .iter()
            .map(|r| (1..=pi).map(|k| r.cycle_time / (2.0 * f64::from(k))).collect())
            .collect()
    }

    pub fn to_json(&self, network: &Network) -> Result<String> {
        let records: Vec<RouteRecord> = self
            .routes
            .iter()
            .map(|r| RouteRecord {
                id: r.id,
                stops: r.stops.iter().map(|&s| network.nodes[s].as_str()).collect(),
                cycle_time: r.cycle_time,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)?)
    }
}

/// One route per subset of two or more stations, each the cheapest
/// Hamiltonian path over the subset. Legs between non-adjacent stops use
/// the shortest network path. Ties go to the lexicographically smallest
/// stop sequence.
pub fn enumerate_routes(network: &Network) -> Result<RouteSet> {
    let n = network.len();
    if n > MAX_STATIONS {
        return Err(Error::TooManyStations(n));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two stations".into()));
    }
    let d = network.shortest_times();
    let full = 1usize << n;
    // best[mask][first]: cheapest path covering exactly `mask` that starts at `first`.
    let mut best = vec![vec![f64::INFINITY; n]; full];
    for s in 0..n {
        best[1 << s][s] = 0.0;
    }
    let mut masks: Vec<usize> = (1..full).collect();
    masks.sort_by_key(|m| m.count_ones());
    for &mask in &masks {
        if mask.count_ones() < 2 {
            continue;
        }
        for first in 0..n {
            if mask & (1 << first) == 0 {
                continue;
            }
            let rest = mask & !(1 << first);
            let mut v = f64::INFINITY;
            for next in 0..n {
                if rest & (1 << next) != 0 {
                    v = v.min(d[first][next] + best[rest][next]);
                }
            }
            best[mask][first] = v;
        }
    }

    let mut subsets: Vec<usize> = (1..full).filter(|m| m.count_ones() >= 2).collect();
    let members = |m: usize| (0..n).filter(move |&s| m & (1 << s) != 0).collect::<Vec<_>>();
    subsets.sort_by(|&a, &b| a.count_ones().cmp(&b.count_ones()).then_with(|| members(a).cmp(&members(b))));

    let mut routes = Vec::with_capacity(subsets.len());
    for (id, &mask) in subsets.iter().enumerate() {
        let target = (0..n).filter(|&s| mask & (1 << s) != 0).map(|s| best[mask][s]).fold(f64::INFINITY, f64::min);
        if !target.is_finite() {
            return Err(Error::InvalidArgument("network is not connected".into()));
        }
        let mut stops = Vec::new();
        let mut rest = mask;
        let mut remaining = target;
        let mut current: Option<Station> = None;
        while rest != 0 {
            let pick = (0..n)
                .filter(|&s| rest & (1 << s) != 0)
                .find(|&s| {
                    let step = current.map_or(0.0, |c| d[c][s]);
                    (step + best[rest][s] - remaining).abs() <= TIE_TOL * (1.0 + remaining.abs())
                })
                .expect("DP path reconstructs");
            remaining = best[rest][pick];
            rest &= !(1 << pick);
            stops.push(pick);
            current = Some(pick);
        }
        let leg_times: Vec<f64> = stops.windows(2).map(|w| d[w[0]][w[1]]).collect();
        let back_leg_times: Vec<f64> = stops.windows(2).map(|w| d[w[1]][w[0]]).collect();
        let cycle_time = 2.0 * leg_times.iter().sum::<f64>();
        routes.push(Route { id, stops, leg_times, back_leg_times, cycle_time });
    }
    let base_route = routes.len() - 1;
    Ok(RouteSet { routes, base_route })
}
