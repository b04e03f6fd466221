//! Trip records: synthesis, CSV ingestion and hour selection.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike};
use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{DemandSnapshot, Network, OdPair};
use crate::error::{Error, Result};

pub const TRIPS_HEADER: [&str; 4] = ["hour_utc", "origin", "destination", "count"];

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub hour: NaiveDateTime,
    pub origin: String,
    pub destination: String,
    pub count: f64,
}

/// Daily demand pattern for the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityProfile {
    /// Mean trips per OD pair per hour, averaged over the day.
    pub rate: f64,
    pub peak_factor: f64,
    pub offpeak_factor: f64,
    /// Hours of day (0-23) that use the peak factor.
    pub peak_hours: Vec<u32>,
    /// Log-normal spread of OD attractiveness; 0 makes every pair alike.
    pub od_spread: f64,
    /// Extra weight on trips into the first station before noon and out of
    /// it from noon on, a commuter tide around a hub. 1 disables it.
    #[serde(default = "one")]
    pub hub_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for IntensityProfile {
    fn default() -> Self {
        Self {
            rate: 8.0,
            peak_factor: 2.0,
            offpeak_factor: 0.6,
            peak_hours: vec![7, 8, 9, 16, 17, 18],
            od_spread: 0.5,
            hub_weight: 1.0,
        }
    }
}

impl IntensityProfile {
    /// Multipliers per hour of day, scaled to average 1.
    fn hourly_factors(&self) -> [f64; 24] {
        let mut f = [self.offpeak_factor; 24];
        for &h in &self.peak_hours {
            if h < 24 {
                f[h as usize] = self.peak_factor;
            }
        }
        let mean = f.iter().sum::<f64>() / 24.0;
        if mean > 0.0 {
            f.iter_mut().for_each(|v| *v /= mean);
        }
        f
    }
}

pub fn station_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("S{i}")).collect()
}

/// Stations scattered over a 10 x 10 km square, buses at 30 km/h.
pub fn synthetic_network(n_stations: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e65_7477_6f72_6b);
    let mut coords: Vec<(f64, f64)> = Vec::with_capacity(n_stations);
    while coords.len() < n_stations {
        let p = (rng.random_range(0.0..10.0f64), rng.random_range(0.0..10.0f64));
        if coords.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) > 0.8) {
            coords.push(p);
        }
    }
    let mut net = Network::from_coordinates(station_names(n_stations), &coords, 2.0);
    for row in &mut net.travel_time {
        for v in row.iter_mut().flatten() {
            *v = (*v * 10.0).round() / 10.0;
        }
    }
    net
}

pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 12, 2).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
}

/// Poisson counts per OD pair and hour; every pair appears in every hour.
pub fn generate_synthetic(
    n_stations: usize,
    horizon_hours: usize,
    profile: &IntensityProfile,
    start: NaiveDateTime,
    seed: u64,
) -> Result<Vec<TripRecord>> {
    if n_stations < 2 {
        return Err(Error::InvalidArgument("need at least two stations".into()));
    }
    if !(profile.rate >= 0.0) {
        return Err(Error::InvalidArgument("rate must be nonnegative".into()));
    }
    if !(profile.hub_weight >= 0.0) {
        return Err(Error::InvalidArgument("hub weight must be nonnegative".into()));
    }
    let names = station_names(n_stations);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> =
        (0..n_stations).flat_map(|o| (0..n_stations).filter(move |&d| d != o).map(move |d| (o, d))).collect();
    let mut weights: Vec<f64> = if profile.od_spread > 0.0 {
        let normal = Normal::new(0.0, profile.od_spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pairs.iter().map(|_| normal.sample(&mut rng).exp()).collect()
    } else {
        vec![1.0; pairs.len()]
    };
    let mean_w = weights.iter().sum::<f64>() / weights.len() as f64;
    weights.iter_mut().for_each(|w| *w /= mean_w);
    let factors = profile.hourly_factors();
    let mut out = Vec::with_capacity(horizon_hours * pairs.len());
    for h in 0..horizon_hours {
        let hour = start + Duration::hours(h as i64);
        let f = factors[hour.hour() as usize];
        let tide_in = hour.hour() < 12;
        for (&(o, d), &w) in pairs.iter().zip(&weights) {
            let hub = if (tide_in && d == 0) || (!tide_in && o == 0) { profile.hub_weight } else { 1.0 };
            let lambda = profile.rate * f * w * hub;
            let count = if lambda > 0.0 {
                Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng)
            } else {
                0.0
            };
            out.push(TripRecord { hour, origin: names[o].clone(), destination: names[d].clone(), count });
        }
    }
    Ok(out)
}

pub fn format_hour(h: &NaiveDateTime) -> String {
    h.format("%Y-%m-%dT%H:00:00Z").to_string()
}

fn parse_hour(s: &str) -> Option<NaiveDateTime> {
    let t = s.trim();
    let parsed = DateTime::parse_from_rfc3339(t)
        .map(|d| d.naive_utc())
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S").ok())
        .or_else(|| NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M").ok())
        .or_else(|| NaiveDateTime::parse_from_str(&format!("{t}:00"), "%Y-%m-%dT%H:%M").ok())?;
    parsed.with_minute(0)?.with_second(0)?.with_nanosecond(0)
}

pub fn write_trips(records: &[TripRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIPS_HEADER)?;
    for r in records {
        w.write_record([format_hour(&r.hour), r.origin.clone(), r.destination.clone(), format!("{}", r.count)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub snapshots: Vec<DemandSnapshot>,
    /// Rows naming a station outside the network.
    pub dropped: usize,
}

/// Aggregates trip rows into hourly snapshots over every OD pair of `network`.
pub fn ingest_trips(path: &Path, network: &Network) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, &path.display().to_string(), network)
}

pub fn ingest_reader(input: impl Read, label: &str, network: &Network) -> Result<Ingested> {
    let parse_err = |line: u64, msg: String| Error::Parse { path: label.to_string(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => {
            warn!("{label}: empty trips file");
            return Ok(Ingested { snapshots: Vec::new(), dropped: 0 });
        }
        Some(h) => h?,
    };
    if header.iter().collect::<Vec<_>>() != TRIPS_HEADER {
        return Err(parse_err(1, format!("expected header {}", TRIPS_HEADER.join(","))));
    }
    let mut hours: BTreeMap<NaiveDateTime, BTreeMap<OdPair, f64>> = BTreeMap::new();
    let mut dropped = 0;
    for (i, row) in records.enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        if row.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", row.len())));
        }
        let hour = parse_hour(&row[0]).ok_or_else(|| parse_err(line, format!("bad hour {:?}", &row[0])))?;
        let count: f64 = row[3].parse().map_err(|_| parse_err(line, format!("bad count {:?}", &row[3])))?;
        if !(count >= 0.0) || !count.is_finite() {
            return Err(parse_err(line, format!("count must be nonnegative, got {count}")));
        }
        if row[1] == row[2] {
            return Err(parse_err(line, "origin equals destination".into()));
        }
        let (Some(o), Some(d)) = (network.station(&row[1]), network.station(&row[2])) else {
            dropped += 1;
            continue;
        };
        *hours.entry(hour).or_default().entry(OdPair::new(o, d)).or_insert(0.0) += count;
    }
    if dropped > 0 {
        warn!("{label}: dropped {dropped} rows with unknown stations");
    }
    let all = network.od_pairs();
    let snapshots = hours
        .into_iter()
        .enumerate()
        .map(|(i, (hour, seen))| {
            let counts = all.iter().map(|od| (*od, seen.get(od).copied().unwrap_or(0.0))).collect();
            DemandSnapshot { hour_index: i + 1, hour: Some(hour), counts }
        })
        .collect();
    Ok(Ingested { snapshots, dropped })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourSelection {
    RandomN,
    BusiestN,
}

/// Picks `n` hours, returned in their original order.
pub fn select_hours(snapshots: &[DemandSnapshot], mode: HourSelection, n: usize, seed: u64) -> Result<Vec<DemandSnapshot>> {
    if n > snapshots.len() {
        return Err(Error::InvalidArgument(format!("asked for {n} hours, only {} available", snapshots.len())));
    }
    let mut idx: Vec<usize> = (0..snapshots.len()).collect();
    match mode {
        HourSelection::RandomN => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            idx.shuffle(&mut rng);
        }
        HourSelection::BusiestN => {
            // Stable sort keeps earlier hours first among equal totals.
            idx.sort_by(|&a, &b| snapshots[b].total_passengers().total_cmp(&snapshots[a].total_passengers()));
        }
    }
    idx.truncate(n);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| snapshots[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snaps(totals: &[f64]) -> Vec<DemandSnapshot> {
        totals
            .iter()
            .enumerate()
            .map(|(i, &t)| DemandSnapshot::new(i + 1, BTreeMap::from([(OdPair::new(0, 1), t)])))
            .collect()
    }

    #[test]
    fn busiest_two() {
        let s = select_hours(&snaps(&[5.0, 9.0, 7.0]), HourSelection::BusiestN, 2, 0).unwrap();
        let totals: Vec<f64> = s.iter().map(DemandSnapshot::total_passengers).collect();
        assert_eq!(totals, vec![9.0, 7.0]);
    }

    #[test]
    fn busiest_ties_prefer_earlier() {
        let s = select_hours(&snaps(&[4.0, 6.0, 6.0, 6.0]), HourSelection::BusiestN, 2, 0).unwrap();
        assert_eq!(s.iter().map(|h| h.hour_index).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn selecting_everything_is_identity() {
        let all = snaps(&[1.0, 3.0, 2.0]);
        for mode in [HourSelection::RandomN, HourSelection::BusiestN] {
            assert_eq!(select_hours(&all, mode, 3, 9).unwrap(), all);
        }
        assert!(select_hours(&all, HourSelection::RandomN, 4, 9).is_err());
    }

    #[test]
    fn random_selection_is_seeded() {
        let all = snaps(&(0..50).map(f64::from).collect::<Vec<_>>());
        let a = select_hours(&all, HourSelection::RandomN, 10, 4).unwrap();
        assert_eq!(a, select_hours(&all, HourSelection::RandomN, 10, 4).unwrap());
        assert_ne!(a, select_hours(&all, HourSelection::RandomN, 10, 5).unwrap());
    }

    #[test]
    fn zero_intensity_gives_zero_counts() {
        let p = IntensityProfile { rate: 0.0, ..IntensityProfile::default() };
        let recs = generate_synthetic(3, 5, &p, default_start(), 1).unwrap();
        assert_eq!(recs.len(), 30);
        assert!(recs.iter().all(|r| r.count == 0.0));
    }

    #[test]
    fn ingest_sums_duplicates_and_drops_unknown() {
        let net = Network::complete(station_names(2), vec![vec![1.0; 2]; 2]);
        let text = "hour_utc,origin,destination,count\n\
                    2024-12-02T08:00:00Z,S1,S2,3\n\
                    2024-12-02T08:00:00Z,S1,S2,4\n\
                    2024-12-02T08:00:00Z,S1,X9,4\n";
        let ing = ingest_reader(text.as_bytes(), "mem", &net).unwrap();
        assert_eq!(ing.dropped, 1);
        assert_eq!(ing.snapshots.len(), 1);
        assert_eq!(ing.snapshots[0].get(OdPair::new(0, 1)), 7.0);
        assert_eq!(ing.snapshots[0].get(OdPair::new(1, 0)), 0.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let net = Network::complete(station_names(2), vec![vec![1.0; 2]; 2]);
        let text = "hour_utc,origin,destination,count\n2024-12-02T08:00:00Z,S1,S2,3\nnot-a-time,S1,S2,1\n";
        match ingest_reader(text.as_bytes(), "mem", &net) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let empty = ingest_reader("".as_bytes(), "mem", &net).unwrap();
        assert!(empty.snapshots.is_empty());
    }
}
