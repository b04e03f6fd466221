//! Table output from a results store.
//!
//! Every report is a small CSV table. Cells with no data print `NA`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::{fmt_num, ResultRow};
use crate::fleet::dynamic_split;
use crate::metrics::{vtts_gain, DEFAULT_VTTS, DEFAULT_YEARLY_TRIPS};
use crate::noise::Family;

/// Fleet sizes per bus capacity for the reference case study, for
/// reproducing its split table without its data.
pub const REFERENCE_FLEET_SIZES: [(u32, u32); 4] = [(10, 38), (20, 19), (30, 13), (40, 10)];

/// Dynamic shares reported in the split table.
pub const REFERENCE_ALPHAS: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportKind {
    /// Time loss per passenger (minutes).
    TableA,
    /// Relative time loss (%).
    TableB,
    /// Time gain per passenger (minutes).
    TableC,
    /// Relative time gain (%).
    TableD,
    /// Dynamic/static bus split.
    TableIii,
    /// Mean (SD) trip time per passenger under perfect predictions.
    TableIv,
    /// Yearly value of the worst-case time gain.
    TableVi,
    /// Worst-case relative gain per capacity and share.
    MinRelGain,
    /// Long-format rows for plotting.
    PlotData,
}

impl ReportKind {
    pub const ALL: [ReportKind; 9] = [
        ReportKind::TableA,
        ReportKind::TableB,
        ReportKind::TableC,
        ReportKind::TableD,
        ReportKind::TableIii,
        ReportKind::TableIv,
        ReportKind::TableVi,
        ReportKind::MinRelGain,
        ReportKind::PlotData,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::TableA => "table_a",
            ReportKind::TableB => "table_b",
            ReportKind::TableC => "table_c",
            ReportKind::TableD => "table_d",
            ReportKind::TableIii => "table_iii",
            ReportKind::TableIv => "table_iv",
            ReportKind::TableVi => "table_vi",
            ReportKind::MinRelGain => "min_rel_gain",
            ReportKind::PlotData => "plotdata",
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown report kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    /// EUR per hour.
    pub vtts: f64,
    pub yearly_trips: f64,
    /// Fleet sizes for the split table; taken from the rows when `None`.
    pub fleet_sizes: Option<BTreeMap<u32, u32>>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { vtts: DEFAULT_VTTS, yearly_trips: DEFAULT_YEARLY_TRIPS, fleet_sizes: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Cell by row index and column name.
    pub fn cell(&self, row: usize, column: &str) -> Option<&str> {
        let c = self.header.iter().position(|h| h == column)?;
        self.rows.get(row)?.get(c).map(String::as_str)
    }
}

/// Grid keys found in the rows. Floats are keyed by their bits; values
/// parsed from the same decimal text always agree.
struct Grid {
    families: Vec<Family>,
    sigmas: Vec<f64>,
    gammas: Vec<u32>,
    alphas: Vec<f64>,
    cells: BTreeMap<(Family, u64, u32, u64), usize>,
}

fn key(v: f64) -> u64 {
    v.to_bits()
}

fn sorted_floats(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let set: BTreeSet<u64> = vals.map(key).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v
}

impl Grid {
    fn new(rows: &[ResultRow]) -> Self {
        let fams: BTreeSet<Family> = rows.iter().map(|r| r.family).collect();
        let families = Family::ALL.into_iter().filter(|f| fams.contains(f)).collect();
        Self {
            families,
            sigmas: sorted_floats(rows.iter().map(|r| r.sigma)),
            gammas: rows.iter().map(|r| r.gamma).collect::<BTreeSet<_>>().into_iter().collect(),
            alphas: sorted_floats(rows.iter().map(|r| r.alpha)),
            cells: rows
                .iter()
                .enumerate()
                .map(|(i, r)| ((r.family, key(r.sigma), r.gamma, key(r.alpha)), i))
                .collect(),
        }
    }

    fn get<'a>(&self, rows: &'a [ResultRow], f: Family, sigma: f64, gamma: u32, alpha: f64) -> Option<&'a ResultRow> {
        self.cells.get(&(f, key(sigma), gamma, key(alpha))).map(|&i| &rows[i])
    }
}

fn pct(v: f64) -> f64 {
    v * 100.0
}

fn alpha_label(a: f64) -> String {
    format!("{}", (a * 100.0).round())
}

pub fn report(rows: &[ResultRow], kind: ReportKind, opts: &ReportOptions) -> Table {
    match kind {
        ReportKind::TableA => appendix_table(rows, |r| r.t_loss, 2, false),
        ReportKind::TableB => appendix_table(rows, |r| pct(r.t_loss_rel), 2, false),
        ReportKind::TableC => appendix_table(rows, |r| r.t_gain, 2, true),
        ReportKind::TableD => appendix_table(rows, |r| pct(r.t_gain_rel), 2, false),
        ReportKind::TableIii => {
            let sizes = match &opts.fleet_sizes {
                Some(s) => s.clone(),
                None => rows.iter().map(|r| (r.gamma, r.pi)).collect(),
            };
            let alphas = if rows.is_empty() { REFERENCE_ALPHAS.to_vec() } else { Grid::new(rows).alphas };
            split_table(&sizes, &alphas)
        }
        ReportKind::TableIv => trip_time_table(rows),
        ReportKind::TableVi => {
            worst_case_table(rows, |r| r.t_gain, |v| fmt_num(vtts_gain(v, opts.vtts, opts.yearly_trips), 0))
        }
        ReportKind::MinRelGain => worst_case_table(rows, |r| r.t_gain_rel, |v| fmt_num(pct(v), 2)),
        ReportKind::PlotData => plot_data(rows),
    }
}

/// Writes `<kind>.csv` under `dir` and returns its path.
pub fn write_report(rows: &[ResultRow], kind: ReportKind, opts: &ReportOptions, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{kind}.csv"));
    report(rows, kind, opts).write_csv(File::create(&path)?)?;
    Ok(path)
}

/// Rows `(alpha, sigma)`, column groups capacity x family. The zero share
/// is left out; the zero noise level only where `with_perfect` is set.
fn appendix_table(rows: &[ResultRow], value: impl Fn(&ResultRow) -> f64, decimals: usize, with_perfect: bool) -> Table {
    let grid = Grid::new(rows);
    let mut header = vec!["alpha".to_string(), "sigma".to_string()];
    for &g in &grid.gammas {
        for f in &grid.families {
            header.push(format!("g{g}_{f}"));
        }
    }
    let mut out = Vec::new();
    for &a in grid.alphas.iter().filter(|&&a| a > 0.0) {
        for &s in grid.sigmas.iter().filter(|&&s| with_perfect || s > 0.0) {
            let mut line = vec![alpha_label(a), s.to_string()];
            for &g in &grid.gammas {
                for &f in &grid.families {
                    line.push(grid.get(rows, f, s, g, a).map_or("NA".into(), |r| fmt_num(value(r), decimals)));
                }
            }
            out.push(line);
        }
    }
    Table { header, rows: out }
}

/// Rows capacity, columns `D`/`S` per share.
pub fn split_table(fleet_sizes: &BTreeMap<u32, u32>, alphas: &[f64]) -> Table {
    let mut header = vec!["gamma".to_string(), "pi".to_string()];
    for &a in alphas {
        header.push(format!("D_{}", alpha_label(a)));
        header.push(format!("S_{}", alpha_label(a)));
    }
    let rows = fleet_sizes
        .iter()
        .map(|(&g, &pi)| {
            let mut line = vec![g.to_string(), pi.to_string()];
            for &a in alphas {
                let (d, s) = dynamic_split(pi, a);
                line.push(d.to_string());
                line.push(s.to_string());
            }
            line
        })
        .collect();
    Table { header, rows }
}

/// Perfect-prediction rows only; the families agree there, so the first
/// one present is used.
fn trip_time_table(rows: &[ResultRow]) -> Table {
    let grid = Grid::new(rows);
    let mut header = vec!["alpha".to_string()];
    header.extend(grid.gammas.iter().map(|g| format!("g{g}")));
    let mut out = Vec::new();
    for &a in &grid.alphas {
        let mut line = vec![alpha_label(a)];
        for &g in &grid.gammas {
            let r = grid.families.iter().find_map(|&f| grid.get(rows, f, 0.0, g, a));
            line.push(match r {
                Some(r) if !r.t_i_mean.is_nan() => format!("{:.2} (±{:.2})", r.t_i_mean, r.t_i_sd),
                _ => "NA".into(),
            });
        }
        out.push(line);
    }
    Table { header, rows: out }
}

/// Minimum of a metric over families and noise levels, rows share, columns
/// capacity. A cell is NA if any contributing row is missing its value.
fn worst_case_table(rows: &[ResultRow], value: impl Fn(&ResultRow) -> f64, show: impl Fn(f64) -> String) -> Table {
    let grid = Grid::new(rows);
    let mut header = vec!["alpha".to_string()];
    header.extend(grid.gammas.iter().map(|g| format!("g{g}")));
    let mut out = Vec::new();
    for &a in grid.alphas.iter().filter(|&&a| a > 0.0) {
        let mut line = vec![alpha_label(a)];
        for &g in &grid.gammas {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.gamma == g && key(r.alpha) == key(a))
                .map(&value)
                .collect();
            let cell = if vals.is_empty() || vals.iter().any(|v| v.is_nan()) {
                "NA".into()
            } else {
                show(vals.into_iter().fold(f64::INFINITY, f64::min))
            };
            line.push(cell);
        }
        out.push(line);
    }
    Table { header, rows: out }
}

const PLOT_METRICS: [&str; 9] =
    ["mape", "rmsne", "t_i_mean", "t_i_sd", "t_loss", "t_loss_rel", "t_gain", "t_gain_rel", "vtts_eur_year"];

fn plot_data(rows: &[ResultRow]) -> Table {
    let header = ["family", "sigma", "gamma", "alpha", "metric", "value"].map(String::from).to_vec();
    let mut out = Vec::new();
    for r in rows {
        let vals = [r.mape, r.rmsne, r.t_i_mean, r.t_i_sd, r.t_loss, r.t_loss_rel, r.t_gain, r.t_gain_rel, r.vtts_eur_year];
        for (m, v) in PLOT_METRICS.iter().zip(vals) {
            out.push(vec![
                r.family.to_string(),
                r.sigma.to_string(),
                r.gamma.to_string(),
                r.alpha.to_string(),
                m.to_string(),
                fmt_num(v, 6),
            ]);
        }
    }
    Table { header, rows: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(v: f64) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for f in Family::ALL {
            for s in [0.5, 1.0] {
                for g in [10, 20] {
                    for a in [0.0, 0.2] {
                        let mut r = ResultRow::empty(f, s, g, a, 12);
                        r.t_gain_rel = v;
                        r.t_gain = v;
                        r.status = "optimal".into();
                        rows.push(r);
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn constant_input_gives_constant_min_table() {
        let t = report(&filled(0.25), ReportKind::MinRelGain, &ReportOptions::default());
        assert_eq!(t.header, ["alpha", "g10", "g20"]);
        assert_eq!(t.rows, vec![vec!["20", "25.00", "25.00"]]);
    }

    #[test]
    fn reference_split_table() {
        let sizes = REFERENCE_FLEET_SIZES.into_iter().collect();
        let t = split_table(&sizes, &REFERENCE_ALPHAS);
        assert_eq!(t.rows[0], ["10", "38", "0", "38", "4", "34", "8", "30", "12", "26", "16", "22"]);
        assert_eq!(t.cell(2, "D_40"), Some("6"));
        assert_eq!(t.cell(2, "S_40"), Some("7"));
    }

    #[test]
    fn missing_cells_print_na() {
        let mut rows = filled(1.0);
        rows.retain(|r| !(r.family == Family::Uniform && r.sigma == 1.0 && r.gamma == 20));
        let t = report(&rows, ReportKind::TableC, &ReportOptions::default());
        let c = t.header.iter().position(|h| h == "g20_uniform").unwrap();
        assert_eq!(t.rows[1][1], "1");
        assert_eq!(t.rows[1][c], "NA");
        assert_eq!(t.rows[0][c], "1.00");
    }

    #[test]
    fn kinds_round_trip() {
        for k in ReportKind::ALL {
            assert_eq!(k.as_str().parse::<ReportKind>().unwrap(), k);
        }
        assert!("table_z".parse::<ReportKind>().is_err());
    }
}
