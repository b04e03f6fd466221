//! The sweep over noise family, noise level, bus capacity, dynamic share
//! and hour.
//!
//! Work is split into one task per (noise condition, capacity, hour). A task
//! solves its dynamic shares in ascending order and hands each allocation
//! to the next share as a starting incumbent: an allocation that is valid
//! for a share is valid for every larger one, so objectives never get worse
//! as the share grows. Tasks run on a rayon pool and are collected in task
//! order, so the output does not depend on the number of workers.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{select_hours, HourSelection};
use crate::domain::{sample_sd, DemandSnapshot, Network, OdPair};
use crate::error::{Error, Result};
use crate::fleet::{
    dynamic_split, evaluate_allocation, min_feasible_fleet, optimize_alpha_chain, truncate_predictions,
    EvaluationMode, SolveOptions,
};
use crate::metrics::{
    prediction_errors, time_metrics, vtts_gain, LossDenominator, PredictionErrors, TimeMetrics, DEFAULT_VTTS,
    DEFAULT_YEARLY_TRIPS,
};
use crate::noise::{make_noise_spec, perturb, Family};
use crate::routes::{enumerate_routes, RouteSet};

pub const RESULTS_HEADER: [&str; 18] = [
    "family",
    "sigma",
    "gamma",
    "alpha",
    "pi",
    "dynamic",
    "static",
    "mape",
    "rmsne",
    "t_i_mean",
    "t_i_sd",
    "t_loss",
    "t_loss_rel",
    "t_gain",
    "t_gain_rel",
    "vtts_eur_year",
    "status",
    "gap",
];

/// Differences between two evaluations smaller than this (relative) are
/// solver noise and count as ties.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub families: Vec<Family>,
    /// Noise levels with a row in the output; 0 may be listed explicitly.
    /// The noise-free baseline is always solved.
    pub sigmas: Vec<f64>,
    pub gammas: Vec<u32>,
    /// Dynamic shares with a row in the output. Share 0 is always solved.
    pub alphas: Vec<f64>,
    pub n_hours: usize,
    pub hour_selection: HourSelection,
    pub evaluation: EvaluationMode,
    pub gap_tol: f64,
    /// Per-solve limit in seconds. Runs that hit it are not reproducible.
    pub time_limit: Option<f64>,
    /// EUR per hour.
    pub vtts: f64,
    pub yearly_trips: f64,
    /// Fixed fleet size per capacity; capacities not listed are sized from
    /// the data.
    pub fleet_sizes: BTreeMap<u32, u32>,
    /// Busiest hours used for fleet sizing.
    pub sizing_hours: usize,
    /// Largest fleet tried when sizing.
    pub fleet_cap: u32,
    pub loss_denominator: LossDenominator,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            families: Family::ALL.to_vec(),
            sigmas: vec![0.5, 1.0, 2.0, 3.0],
            gammas: vec![10, 20, 30, 40],
            alphas: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            n_hours: 100,
            hour_selection: HourSelection::RandomN,
            evaluation: EvaluationMode::ReassignTrueDemand,
            gap_tol: 1e-2,
            time_limit: None,
            vtts: DEFAULT_VTTS,
            yearly_trips: DEFAULT_YEARLY_TRIPS,
            fleet_sizes: BTreeMap::new(),
            sizing_hours: 100,
            fleet_cap: 1000,
            loss_denominator: LossDenominator::TotalTime,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.families.is_empty() || self.sigmas.is_empty() || self.gammas.is_empty() || self.alphas.is_empty() {
            return bad("families, sigmas, gammas and alphas must be nonempty".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return bad(format!("sigma {s} must be finite and nonnegative"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if self.gammas.contains(&0) {
            return bad("capacities must be positive".into());
        }
        if self.n_hours == 0 {
            return bad("n_hours must be positive".into());
        }
        if !(self.gap_tol >= 0.0) {
            return bad(format!("gap_tol {} must be nonnegative", self.gap_tol));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return bad("time_limit must be positive".into());
        }
        if !(self.vtts >= 0.0) || !(self.yearly_trips >= 0.0) {
            return bad("vtts and yearly_trips must be nonnegative".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Output shares plus share 0, ascending and deduplicated.
    fn solve_alphas(&self) -> Vec<f64> {
        let mut a = self.alphas.clone();
        a.push(0.0);
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }
}

/// One row of the results table. Missing values are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub family: Family,
    pub sigma: f64,
    pub gamma: u32,
    pub alpha: f64,
    pub pi: u32,
    pub dynamic: u32,
    pub static_buses: u32,
    pub mape: f64,
    pub rmsne: f64,
    pub t_i_mean: f64,
    pub t_i_sd: f64,
    pub t_loss: f64,
    pub t_loss_rel: f64,
    pub t_gain: f64,
    pub t_gain_rel: f64,
    pub vtts_eur_year: f64,
    pub status: String,
    pub gap: f64,
    /// Passengers left unserved on realized demand, summed over hours.
    pub unserved: f64,
    /// Hours whose model needed unmet-demand columns on the predictions.
    pub elastic_hours: usize,
}

impl ResultRow {
    pub fn empty(family: Family, sigma: f64, gamma: u32, alpha: f64, pi: u32) -> Self {
        let (dynamic, static_buses) = dynamic_split(pi, alpha);
        Self {
            family,
            sigma,
            gamma,
            alpha,
            pi,
            dynamic,
            static_buses,
            mape: f64::NAN,
            rmsne: f64::NAN,
            t_i_mean: f64::NAN,
            t_i_sd: f64::NAN,
            t_loss: f64::NAN,
            t_loss_rel: f64::NAN,
            t_gain: f64::NAN,
            t_gain_rel: f64::NAN,
            vtts_eur_year: f64::NAN,
            status: "missing".into(),
            gap: f64::NAN,
            unserved: 0.0,
            elastic_hours: 0,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self.status.as_str(), "optimal" | "gap_limit")
    }

    fn fields(&self) -> [String; 18] {
        [
            self.family.as_str().to_string(),
            self.sigma.to_string(),
            self.gamma.to_string(),
            self.alpha.to_string(),
            self.pi.to_string(),
            self.dynamic.to_string(),
            self.static_buses.to_string(),
            fmt_num(self.mape, 6),
            fmt_num(self.rmsne, 6),
            fmt_num(self.t_i_mean, 6),
            fmt_num(self.t_i_sd, 6),
            fmt_num(self.t_loss, 6),
            fmt_num(self.t_loss_rel, 6),
            fmt_num(self.t_gain, 6),
            fmt_num(self.t_gain_rel, 6),
            fmt_num(self.vtts_eur_year, 0),
            self.status.clone(),
            if self.gap.is_nan() { "NA".into() } else { format!("{:.3e}", self.gap) },
        ]
    }
}

pub(crate) fn fmt_num(v: f64, decimals: usize) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    let s = format!("{v:.decimals$}");
    // No "-0.000000".
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn parse_num(s: &str) -> std::result::Result<f64, String> {
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| format!("not a number: {s:?}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub version: String,
    pub wall_seconds: f64,
    pub jobs: usize,
    pub gap_tol: f64,
    pub hours: Vec<usize>,
    pub sigma_g: f64,
    pub g_bar: f64,
    pub fleet_sizes: BTreeMap<u32, u32>,
    pub solves: usize,
    pub failed_solves: usize,
    pub max_gap: f64,
    pub unserved_total: f64,
    pub elastic_solves: usize,
}

#[derive(Clone, Debug)]
pub struct ResultsStore {
    pub rows: Vec<ResultRow>,
    pub metadata: RunMetadata,
}

impl ResultsStore {
    pub fn all_solved(&self) -> bool {
        self.rows.iter().all(ResultRow::is_solved)
    }

    pub fn row(&self, family: Family, sigma: f64, gamma: u32, alpha: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.sigma == sigma && r.gamma == gamma && r.alpha == alpha)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub fn write_rows(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results table written by [`write_rows`]. The unserved and
/// elastic counts are not part of the table and come back as zero.
pub fn read_rows(input: impl Read, label: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Parse { path: label.into(), line: 1, msg: "unexpected results header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let err = |msg: String| Error::Parse { path: label.into(), line, msg };
        let num = |k: usize| parse_num(&rec[k]).map_err(err);
        let int = |k: usize| rec[k].parse::<u32>().map_err(|_| err(format!("not an integer: {:?}", &rec[k])));
        let family: Family = rec[0].parse().map_err(|e: Error| err(e.to_string()))?;
        rows.push(ResultRow {
            family,
            sigma: num(1)?,
            gamma: int(2)?,
            alpha: num(3)?,
            pi: int(4)?,
            dynamic: int(5)?,
            static_buses: int(6)?,
            mape: num(7)?,
            rmsne: num(8)?,
            t_i_mean: num(9)?,
            t_i_sd: num(10)?,
            t_loss: num(11)?,
            t_loss_rel: num(12)?,
            t_gain: num(13)?,
            t_gain_rel: num(14)?,
            vtts_eur_year: num(15)?,
            status: rec[16].to_string(),
            gap: num(17)?,
            unserved: 0.0,
            elastic_hours: 0,
        });
    }
    Ok(rows)
}

/// Outcome of one (condition, capacity, share, hour) solve.
#[derive(Clone, Debug)]
pub struct HourOutcome {
    /// Trip time of the allocation under the configured evaluation mode.
    pub f: f64,
    pub status: String,
    pub gap: f64,
    pub unserved: f64,
    pub elastic: bool,
    pub buses: Vec<u32>,
}

type Outcome = std::result::Result<HourOutcome, String>;

/// Noise condition: `None` is the noise-free baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Condition {
    family: Option<Family>,
    sigma: f64,
}

const STATUS_ORDER: [&str; 6] = ["optimal", "gap_limit", "time_limit", "infeasible", "unbounded", "error"];

fn worse(a: &str, b: &str) -> String {
    let rank = |s: &str| STATUS_ORDER.iter().position(|x| *x == s).unwrap_or(STATUS_ORDER.len());
    if rank(a) >= rank(b) { a } else { b }.to_string()
}

struct Sweep<'a> {
    config: &'a ExperimentConfig,
    network: &'a Network,
    routes: &'a RouteSet,
    hours: &'a [DemandSnapshot],
    predictions: Vec<Vec<BTreeMap<OdPair, f64>>>,
    conditions: Vec<Condition>,
    alphas: Vec<f64>,
    fleet_sizes: BTreeMap<u32, u32>,
}

impl Sweep<'_> {
    fn task(&self, c: usize, gamma: u32, h: usize) -> Vec<Outcome> {
        let pi = self.fleet_sizes[&gamma];
        let truth = &self.hours[h];
        let opts = SolveOptions {
            gap_tol: self.config.gap_tol,
            time_limit: self.config.time_limit.map(Duration::from_secs_f64),
            hint: None,
        };
        let chain = optimize_alpha_chain(self.network, self.routes, &self.predictions[c][h], gamma, pi, &self.alphas, &opts);
        chain
            .into_iter()
            .zip(&self.alphas)
            .map(|(res, &alpha)| {
                let res = res.and_then(|alloc| {
                    let ev = evaluate_allocation(&alloc, truth, self.routes, gamma, self.config.evaluation)?;
                    debug!(
                        "gamma {gamma} alpha {alpha} hour {}: {} gap {:.1e} in {:.2}s",
                        truth.hour_index, alloc.status, alloc.gap, alloc.seconds
                    );
                    Ok(HourOutcome {
                        f: ev.f,
                        status: alloc.status,
                        gap: alloc.gap,
                        unserved: ev.unserved,
                        elastic: alloc.elastic,
                        buses: alloc.buses,
                    })
                });
                res.map_err(|e| {
                    warn!("gamma {gamma} alpha {alpha} hour {}: {e}", truth.hour_index);
                    match e {
                        Error::Infeasible(_) => "infeasible".to_string(),
                        _ => "error".to_string(),
                    }
                })
            })
            .collect()
    }
}

/// Runs the full sweep on `snapshots` (all available hours) using `jobs`
/// worker threads.
pub fn run_experiment(
    config: &ExperimentConfig,
    network: &Network,
    snapshots: &[DemandSnapshot],
    jobs: usize,
) -> Result<ResultsStore> {
    config.validate()?;
    let start = Instant::now();
    let routes = enumerate_routes(network)?;
    let hours = select_hours(snapshots, config.hour_selection, config.n_hours, config.seed)?;
    let stats = sample_sd(&hours)?;
    let (sigma_g, g_bar) = (stats.sd, stats.mean);

    let mut fleet_sizes = BTreeMap::new();
    let mut sizing: Option<Vec<DemandSnapshot>> = None;
    for &gamma in &config.gammas {
        let pi = match config.fleet_sizes.get(&gamma) {
            Some(&pi) => pi,
            None => {
                let busy = match &sizing {
                    Some(b) => b,
                    None => {
                        let n = config.sizing_hours.min(snapshots.len());
                        sizing.insert(select_hours(snapshots, HourSelection::BusiestN, n, config.seed)?)
                    }
                };
                min_feasible_fleet(network, &routes, gamma, busy, config.fleet_cap)?
            }
        };
        info!("capacity {gamma}: fleet {pi}");
        fleet_sizes.insert(gamma, pi);
    }

    let mut conditions = vec![Condition { family: None, sigma: 0.0 }];
    for &family in &config.families {
        for &sigma in &config.sigmas {
            if sigma > 0.0 {
                conditions.push(Condition { family: Some(family), sigma });
            }
        }
    }
    let mut predictions = Vec::with_capacity(conditions.len());
    for cond in &conditions {
        let spec = match cond.family {
            Some(f) => Some(make_noise_spec(f, cond.sigma)?),
            None => None,
        };
        predictions.push(
            hours
                .iter()
                .map(|h| truncate_predictions(&perturb(h, spec.as_ref(), sigma_g, config.seed)))
                .collect::<Vec<_>>(),
        );
    }

    let sweep = Sweep {
        config,
        network,
        routes: &routes,
        hours: &hours,
        predictions,
        conditions,
        alphas: config.solve_alphas(),
        fleet_sizes,
    };
    let mut tasks = Vec::new();
    for c in 0..sweep.conditions.len() {
        for &gamma in &config.gammas {
            for h in 0..hours.len() {
                tasks.push((c, gamma, h));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Vec<Outcome>> = pool.install(|| tasks.par_iter().map(|&(c, g, h)| sweep.task(c, g, h)).collect());
    let mut solved: BTreeMap<(usize, u32, usize), Vec<Outcome>> = BTreeMap::new();
    for (key, r) in tasks.into_iter().zip(results) {
        solved.insert(key, r);
    }

    let rows = assemble_rows(&sweep, &solved, g_bar)?;
    let outcomes = solved.values().flatten();
    let (mut solves, mut failed, mut elastic, mut unserved, mut max_gap) = (0, 0, 0, 0.0, 0.0f64);
    for o in outcomes {
        solves += 1;
        match o {
            Ok(o) => {
                elastic += usize::from(o.elastic);
                unserved += o.unserved;
                max_gap = max_gap.max(o.gap);
            }
            Err(_) => failed += 1,
        }
    }
    let metadata = RunMetadata {
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_seconds: start.elapsed().as_secs_f64(),
        jobs: jobs.max(1),
        gap_tol: config.gap_tol,
        hours: hours.iter().map(|h| h.hour_index).collect(),
        sigma_g,
        g_bar,
        fleet_sizes: sweep.fleet_sizes.clone(),
        solves,
        failed_solves: failed,
        max_gap,
        unserved_total: unserved,
        elastic_solves: elastic,
    };
    Ok(ResultsStore { rows, metadata })
}

fn assemble_rows(
    sweep: &Sweep<'_>,
    solved: &BTreeMap<(usize, u32, usize), Vec<Outcome>>,
    g_bar: f64,
) -> Result<Vec<ResultRow>> {
    let config = sweep.config;
    let n = sweep.hours.len();
    let p: Vec<f64> = sweep.hours.iter().map(DemandSnapshot::total_passengers).collect();
    let alpha_idx = |a: f64| sweep.alphas.iter().position(|&x| x == a).expect("share was solved");
    let mut rows = Vec::new();
    for &family in &config.families {
        for &sigma in &config.sigmas {
            let c = if sigma > 0.0 {
                sweep
                    .conditions
                    .iter()
                    .position(|k| k.family == Some(family) && k.sigma == sigma)
                    .expect("condition was solved")
            } else {
                0
            };
            let errors = if c == 0 {
                PredictionErrors { mape: 0.0, rmsne: 0.0 }
            } else {
                prediction_errors(&sweep.predictions[c], sweep.hours, g_bar)?
            };
            for &gamma in &config.gammas {
                let pi = sweep.fleet_sizes[&gamma];
                for &alpha in &config.alphas {
                    let mut row = ResultRow::empty(family, sigma, gamma, alpha, pi);
                    row.mape = errors.mape;
                    row.rmsne = errors.rmsne;
                    let a = alpha_idx(alpha);
                    let a0 = alpha_idx(0.0);
                    let mut status = "optimal".to_string();
                    let mut gap = 0.0f64;
                    let mut series = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
                    let mut complete = true;
                    for h in 0..n {
                        let noisy = &solved[&(c, gamma, h)][a];
                        let perfect = &solved[&(0, gamma, h)][a];
                        let static_noisy = &solved[&(c, gamma, h)][a0];
                        for o in [noisy, perfect, static_noisy] {
                            match o {
                                Ok(o) => {
                                    status = worse(&status, &o.status);
                                    gap = gap.max(o.gap);
                                }
                                Err(s) => {
                                    status = worse(&status, s);
                                    complete = false;
                                }
                            }
                        }
                        if let Ok(o) = noisy {
                            row.unserved += o.unserved;
                            row.elastic_hours += usize::from(o.elastic);
                        }
                        if let (Ok(nz), Ok(pf), Ok(st)) = (noisy, perfect, static_noisy) {
                            let f_perfect = if (nz.f - pf.f).abs() <= TIE_TOL * pf.f.abs() { nz.f } else { pf.f };
                            series.0.push(nz.f);
                            series.1.push(f_perfect);
                            series.2.push(st.f);
                        }
                    }
                    row.status = status;
                    row.gap = gap;
                    if complete {
                        match time_metrics(&series.0, &series.1, &series.2, &p, config.loss_denominator) {
                            Ok(m) => fill_time(&mut row, &m, config),
                            Err(e) => {
                                warn!("metrics for {family} sigma {sigma} gamma {gamma} alpha {alpha}: {e}");
                                row.status = worse(&row.status, "error");
                            }
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

fn fill_time(row: &mut ResultRow, m: &TimeMetrics, config: &ExperimentConfig) {
    row.t_i_mean = m.t_i_mean;
    row.t_i_sd = m.t_i_sd;
    row.t_loss = m.t_loss;
    row.t_loss_rel = m.t_loss_rel;
    row.t_gain = m.t_gain;
    row.t_gain_rel = m.t_gain_rel;
    row.vtts_eur_year = vtts_gain(m.t_gain, config.vtts, config.yearly_trips);
}
