//! Stations, demand snapshots and fleet parameters.

use std::collections::{BTreeMap, VecDeque};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;

pub type Station = usize;

/// Stations with a directed travel-time matrix in minutes.
///
/// `travel_time[s][t]` is `None` when there is no direct arc from `s` to `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<String>,
    pub travel_time: Vec<Vec<Option<f64>>>,
}

impl Network {
    /// A complete network with the given symmetric matrix (diagonal ignored).
    pub fn complete(nodes: Vec<String>, times: Vec<Vec<f64>>) -> Self {
        let travel_time = times
            .iter()
            .enumerate()
            .map(|(s, row)| row.iter().enumerate().map(|(t, &v)| (s != t).then_some(v)).collect())
            .collect();
        Self { nodes, travel_time }
    }

    /// Complete network from planar coordinates, travel time proportional to
    /// Euclidean distance.
    pub fn from_coordinates(nodes: Vec<String>, coords: &[(f64, f64)], minutes_per_unit: f64) -> Self {
        let times = coords
            .iter()
            .map(|a| coords.iter().map(|b| ((a.0 - b.0).hypot(a.1 - b.1)) * minutes_per_unit).collect())
            .collect();
        Self::complete(nodes, times)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn arcs(&self) -> Vec<(Station, Station)> {
        let mut out = Vec::new();
        for (s, row) in self.travel_time.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if s != t && v.is_some() {
                    out.push((s, t));
                }
            }
        }
        out
    }

    pub fn station(&self, name: &str) -> Option<Station> {
        self.nodes.iter().position(|n| n == name)
    }

    /// All-pairs shortest travel times (Floyd-Warshall).
    pub fn shortest_times(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for s in 0..n {
            d[s][s] = 0.0;
            for t in 0..n {
                if let Some(v) = self.travel_time[s][t] {
                    if s != t {
                        d[s][t] = v;
                    }
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    /// Every OD pair with distinct endpoints, in row-major order.
    pub fn od_pairs(&self) -> Vec<OdPair> {
        let n = self.len();
        (0..n).flat_map(|o| (0..n).filter(move |&d| d != o).map(move |d| OdPair::new(o, d))).collect()
    }
}

pub fn validate_network(network: Network) -> Result<Network> {
    let n = network.len();
    let mut problems = Vec::new();
    if n < 2 {
        problems.push(format!("need at least 2 stations, got {n}"));
    }
    if network.travel_time.len() != n || network.travel_time.iter().any(|r| r.len() != n) {
        problems.push(format!("travel-time matrix must be {n}x{n}"));
        return Err(Error::InvalidNetwork(problems));
    }
    for s in 0..n {
        for t in 0..n {
            match network.travel_time[s][t] {
                Some(_) if s == t => problems.push(format!("self-loop at {}", network.nodes[s])),
                Some(v) if !(v > 0.0) || !v.is_finite() => problems.push(format!(
                    "travel time {} -> {} is {v}, must be positive",
                    network.nodes[s], network.nodes[t]
                )),
                _ => {}
            }
        }
    }
    if n >= 2 {
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    let arc = if forward { network.travel_time[u][v] } else { network.travel_time[v][u] };
                    if u != v && arc.is_some() && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen
        };
        let (fw, bw) = (reach(true), reach(false));
        for s in 0..n {
            if !fw[s] || !bw[s] {
                problems.push(format!("station {} is not strongly connected to the rest", network.nodes[s]));
            }
        }
    }
    if problems.is_empty() {
        Ok(network)
    } else {
        Err(Error::InvalidNetwork(problems))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OdPair {
    pub origin: Station,
    pub destination: Station,
}

impl OdPair {
    pub fn new(origin: Station, destination: Station) -> Self {
        assert_ne!(origin, destination, "OD pair needs distinct endpoints");
        Self { origin, destination }
    }
}

/// Hourly ground-truth trip counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandSnapshot {
    pub hour_index: usize,
    pub hour: Option<NaiveDateTime>,
    pub counts: BTreeMap<OdPair, f64>,
}

impl DemandSnapshot {
    pub fn new(hour_index: usize, counts: BTreeMap<OdPair, f64>) -> Self {
        Self { hour_index, hour: None, counts }
    }

    pub fn total_passengers(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn get(&self, od: OdPair) -> f64 {
        self.counts.get(&od).copied().unwrap_or(0.0)
    }
}

/// Noisy predictions for one hour; values may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSnapshot {
    pub hour_index: usize,
    pub values: BTreeMap<OdPair, f64>,
    pub spec: Option<NoiseSpec>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub capacity: u32,
    pub fleet_size: u32,
    pub dynamic_fraction: f64,
}

impl FleetConfig {
    pub fn new(capacity: u32, fleet_size: u32, dynamic_fraction: f64) -> Result<Self> {
        if capacity == 0 || fleet_size == 0 {
            return Err(Error::InvalidArgument("capacity and fleet size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&dynamic_fraction) {
            return Err(Error::InvalidArgument(format!("dynamic fraction {dynamic_fraction} outside [0, 1]")));
        }
        Ok(Self { capacity, fleet_size, dynamic_fraction })
    }

    pub fn dynamic_buses(&self) -> u32 {
        crate::fleet::dynamic_split(self.fleet_size, self.dynamic_fraction).0
    }
}

/// Mean and Bessel-corrected SD pooled over every (hour, OD) cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PooledStats {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

pub fn sample_sd(snapshots: &[DemandSnapshot]) -> Result<PooledStats> {
    let values: Vec<f64> = snapshots.iter().flat_map(|s| s.counts.values().copied()).collect();
    pooled(&values)
}

pub(crate) fn pooled(values: &[f64]) -> Result<PooledStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("sample SD needs 2 observations, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(PooledStats { mean, sd: (ss / (n - 1) as f64).sqrt(), count: n })
}
