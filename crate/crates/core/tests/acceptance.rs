//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test --release --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{desk_config, desk_data, oracle_optimum, synthetic_hours, tiny_instance};
use dynfleet::data::{select_hours, HourSelection, IntensityProfile};
use dynfleet::domain::{DemandSnapshot, Network, OdPair};
use dynfleet::experiment::{run_experiment, write_rows, ExperimentConfig, ResultRow, ResultsStore};
use dynfleet::fleet::{dynamic_split, min_feasible_fleet, optimize_alpha_chain, optimize_fleet, SolveOptions};
use dynfleet::formulation::build_formulation;
use dynfleet::metrics::{closed_form_errors, prediction_errors, DEFAULT_VTTS, DEFAULT_YEARLY_TRIPS};
use dynfleet::noise::{make_noise_spec, perturb, raw_moment, Family};
use dynfleet::report::{report, ReportKind, ReportOptions};
use dynfleet::routes::enumerate_routes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn fixture(name: &str) -> csv::Reader<std::fs::File> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn moments() -> Outcome {
    let start = Instant::now();
    let (mut ok, mut total, mut misses) = (0, 0, Vec::new());
    for rec in fixture("table_ii_moments.csv").records() {
        let rec = rec.unwrap();
        let family: Family = rec[0].parse().unwrap();
        let sigma: f64 = rec[1].parse().unwrap();
        let order: u32 = rec[2].parse().unwrap();
        let printed: f64 = rec[3].parse().unwrap();
        let got = raw_moment(&make_noise_spec(family, sigma).unwrap(), order);
        total += 1;
        let good = if printed == 0.0 { got.abs() < 5e-3 } else { ((got - printed) / printed).abs() <= 5e-3 };
        if good {
            ok += 1;
        } else {
            misses.push(format!("{family} sigma {sigma} order {order}: {got:.4} vs {printed}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (ok == total && total == 48 && secs < 10.0, format!("{ok}/{total} within 0.5% in {secs:.2}s {}", misses.join("; ")))
}

fn split() -> Outcome {
    let (mut ok, mut total) = (0, 0);
    for rec in fixture("table_iii_split.csv").records() {
        let rec = rec.unwrap();
        let pi: u32 = rec[1].parse().unwrap();
        let alpha = rec[2].parse::<f64>().unwrap() / 100.0;
        let want: (u32, u32) = (rec[3].parse().unwrap(), rec[4].parse().unwrap());
        let got = dynamic_split(pi, alpha);
        total += 2;
        ok += usize::from(got.0 == want.0) + usize::from(got.1 == want.1);
    }
    (ok == total && total == 40, format!("{ok}/{total} entries exact"))
}

fn annual_value() -> Outcome {
    let mut rdr = fixture("table_c_t_gain.csv");
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let alpha = rec[0].parse::<f64>().unwrap() / 100.0;
        let sigma: f64 = rec[1].parse().unwrap();
        for (col, name) in header.iter().enumerate().skip(2) {
            let (g, fam) = name[1..].split_once('_').unwrap();
            let mut r = ResultRow::empty(fam.parse().unwrap(), sigma, g.parse().unwrap(), alpha, 0);
            r.t_gain = rec[col].parse().unwrap();
            r.status = "optimal".into();
            rows.push(r);
        }
    }
    let table = report(&rows, ReportKind::TableVi, &ReportOptions::default());
    let tol = 0.05 * (DEFAULT_VTTS / 60.0) * DEFAULT_YEARLY_TRIPS;
    let (mut ok, mut total, mut misses) = (0, 0, Vec::new());
    for (i, rec) in fixture("table_vi_eur.csv").records().enumerate() {
        let rec = rec.unwrap();
        for g in ["g10", "g20", "g30", "g40"] {
            let want: f64 = rec[["g10", "g20", "g30", "g40"].iter().position(|x| *x == g).unwrap() + 1].parse().unwrap();
            let got: f64 = table.cell(i, g).unwrap().parse().unwrap();
            total += 1;
            if (got - want).abs() <= tol {
                ok += 1;
            } else {
                misses.push(format!("alpha {} {g}: {got} vs {want}", &rec[0]));
            }
        }
    }
    (ok == total && total == 16, format!("{ok}/{total} within {tol:.0} EUR {}", misses.join("; ")))
}

fn error_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=12usize);
        let stations = rng.random_range(2..=6usize);
        let pairs: Vec<OdPair> = (0..stations)
            .flat_map(|o| (0..stations).filter(move |&d| d != o).map(move |d| OdPair::new(o, d)))
            .collect();
        let sigma_g = rng.random_range(0.1..5.0);
        let g_bar = rng.random_range(0.5..20.0);
        let mut truth = Vec::new();
        let mut preds = Vec::new();
        let mut eps = Vec::new();
        for h in 0..n {
            let e: Vec<f64> = pairs.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
            let counts: BTreeMap<OdPair, f64> = pairs.iter().map(|&od| (od, rng.random_range(0.0..30.0))).collect();
            preds.push(counts.iter().zip(&e).map(|((&od, &g), &x)| (od, g + sigma_g * x)).collect());
            truth.push(DemandSnapshot::new(h, counts));
            eps.push(e);
        }
        let def = prediction_errors(&preds, &truth, g_bar).unwrap();
        let closed = closed_form_errors(&eps, sigma_g, g_bar);
        worst = worst.max(((def.mape - closed.mape) / closed.mape).abs());
        worst = worst.max(((def.rmsne - closed.rmsne) / closed.rmsne).abs());
    }
    (worst <= 1e-9, format!("100 matrices, worst relative difference {worst:.2e}"))
}

fn milp_oracle() -> Outcome {
    let start = Instant::now();
    let (mut ok, mut infeasible, mut misses) = (0, 0, Vec::new());
    for seed in 0..50 {
        let t = tiny_instance(1000 + seed);
        let build = build_formulation(&t.network, &t.routes, &t.demand, &t.fleet, None).unwrap();
        let got = optimize_fleet(&build, &SolveOptions::with_gap(0.0));
        match (oracle_optimum(&t), got) {
            (Some((want, _)), Ok(a)) if (a.objective - want).abs() <= 1e-6 => ok += 1,
            (None, Err(dynfleet::Error::Infeasible(_))) => {
                ok += 1;
                infeasible += 1;
            }
            (want, got) => misses.push(format!("seed {seed}: {:?} vs {:?}", want.map(|w| w.0), got.map(|a| a.objective))),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok == 50 && secs < 120.0,
        format!("{ok}/50 agree ({infeasible} infeasible both ways) in {secs:.1}s {}", misses.join("; ")),
    )
}

fn monotonicity() -> Outcome {
    let alphas = [0.0, 0.1, 0.2, 0.3, 0.4];
    let mut problems = Vec::new();
    let mut cells = 0;
    for seed in 0..20u64 {
        let (net, hours) = desk_data(500 + seed);
        let routes = enumerate_routes(&net).unwrap();
        let busy = select_hours(&hours, HourSelection::BusiestN, 24, seed).unwrap();
        let sizes: Vec<u32> =
            [10, 20, 30, 40].iter().map(|&g| min_feasible_fleet(&net, &routes, g, &busy, 1000).unwrap()).collect();
        if sizes.windows(2).any(|w| w[1] > w[0]) {
            problems.push(format!("instance {seed}: fleet sizes {sizes:?}"));
        }
        let hour = &hours[(seed as usize * 7) % hours.len()];
        let objs: Vec<f64> = optimize_alpha_chain(&net, &routes, &hour.counts, 20, sizes[1], &alphas, &SolveOptions::with_gap(1e-2))
            .into_iter()
            .map(|r| r.unwrap().objective)
            .collect();
        if objs.windows(2).any(|w| w[1] > w[0]) {
            problems.push(format!("instance {seed}: objectives {objs:?}"));
        }
        let cfg = ExperimentConfig { n_hours: 5, alphas: alphas.to_vec(), gap_tol: 1e-9, ..desk_config(500 + seed) };
        let store = run_experiment(&cfg, &net, &hours, 4).unwrap();
        for r in &store.rows {
            cells += 1;
            if !(r.t_loss >= 0.0) {
                problems.push(format!("instance {seed}: t_loss {} at {} {} {} {}", r.t_loss, r.family, r.sigma, r.gamma, r.alpha));
            }
            if r.alpha == 0.0 && r.t_gain != 0.0 {
                problems.push(format!("instance {seed}: t_gain {} at share 0", r.t_gain));
            }
        }
    }
    (problems.is_empty(), format!("20 instances, {cells} sweep cells {}", problems.join("; ")))
}

fn csv_without_family(rows: &[&ResultRow]) -> String {
    let owned: Vec<ResultRow> = rows.iter().map(|r| (*r).clone()).collect();
    let mut buf = Vec::new();
    write_rows(&owned, &mut buf).unwrap();
    String::from_utf8(buf).unwrap().lines().skip(1).map(|l| l.split_once(',').unwrap().1.to_string() + "\n").collect()
}

/// Every family at sigma 0 on the desk data.
fn noise_free(net: &Network, data: &[DemandSnapshot]) -> Outcome {
    let cfg = ExperimentConfig { sigmas: vec![0.0], ..desk_config(42) };
    let store = run_experiment(&cfg, net, data, 1).unwrap();
    let hours = select_hours(data, cfg.hour_selection, cfg.n_hours, cfg.seed).unwrap();
    let mut problems = Vec::new();
    for h in &hours {
        if perturb(h, None, 3.0, 1).values != h.counts {
            problems.push(format!("hour {} perturbed without noise", h.hour_index));
        }
    }
    let zero: Vec<&ResultRow> = store.rows.iter().filter(|r| r.sigma == 0.0).collect();
    for r in &zero {
        if (r.mape, r.rmsne, r.t_loss, r.t_loss_rel) != (0.0, 0.0, 0.0, 0.0) {
            problems.push(format!("{} gamma {} alpha {} not trivial", r.family, r.gamma, r.alpha));
        }
    }
    let by_family: Vec<String> =
        Family::ALL.iter().map(|&f| csv_without_family(&zero.iter().copied().filter(|r| r.family == f).collect::<Vec<_>>())).collect();
    if by_family.windows(2).any(|w| w[0] != w[1]) {
        problems.push("rows differ across families".into());
    }
    (problems.is_empty() && !zero.is_empty(), format!("{} noise-free rows {}", zero.len(), problems.join("; ")))
}

fn trend() -> Outcome {
    let profile = IntensityProfile { rate: 9.0, ..IntensityProfile::default() };
    let (net, hours) = synthetic_hours(6, 7, &profile, 7);
    let alphas = vec![0.1, 0.2, 0.3, 0.4];
    let gammas = vec![20, 25];
    let cfg = ExperimentConfig {
        families: vec![Family::Gaussian],
        sigmas: vec![0.0],
        gammas: gammas.clone(),
        alphas: alphas.clone(),
        n_hours: 20,
        sizing_hours: 20,
        gap_tol: 1e-2,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let store = run_experiment(&cfg, &net, &hours, 1).unwrap();
    let elapsed = start.elapsed();
    let row = |g: u32, a: f64| store.row(Family::Gaussian, 0.0, g, a).unwrap();
    let mut problems = Vec::new();
    let mut lines = Vec::new();
    for &g in &gammas {
        let gains: Vec<f64> = alphas.iter().map(|&a| row(g, a).t_gain).collect();
        if gains.windows(2).any(|w| !(w[1] > w[0])) {
            problems.push(format!("gamma {g}: mean gain not strictly increasing"));
        }
        lines.push(format!("gamma {g} (fleet {}): gains {:?}", store.metadata.fleet_sizes[&g], gains.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()));
    }
    for &a in &alphas {
        let times: Vec<f64> = gammas.iter().map(|&g| row(g, a).t_i_mean).collect();
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            problems.push(format!("alpha {a}: trip time not increasing with capacity {times:?}"));
        }
    }
    if elapsed > Duration::from_secs(30 * 60) {
        problems.push("over 30 minutes".into());
    }
    if !store.all_solved() {
        problems.push("unsolved cells".into());
    }
    (
        problems.is_empty(),
        format!("{:.0}s; {}; {}", elapsed.as_secs_f64(), lines.join("; "), problems.join("; ")),
    )
}

fn slack(store: &ResultsStore) -> Outcome {
    let rows = &store.rows;
    let elastic = rows.iter().filter(|r| r.elastic_hours != 0).count();
    let unserved: Vec<String> = rows
        .iter()
        .filter(|r| r.unserved != 0.0)
        .map(|r| format!("{} {} {} {}: {}", r.family, r.sigma, r.gamma, r.alpha, r.unserved))
        .collect();
    let ok = elastic == 0 && unserved.is_empty() && store.metadata.elastic_solves == 0 && store.metadata.unserved_total == 0.0;
    let detail = format!(
        "{} cells; {} solved elastic on predictions ({} solves); {} with unserved true demand {}",
        rows.len(),
        elastic,
        store.metadata.elastic_solves,
        unserved.len(),
        unserved.join("; ")
    );
    (ok, detail)
}

/// Criteria whose name contains any positional argument; all when none given.
fn selected(name: &str) -> bool {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    if !selected(name) {
        return true;
    }
    let start = Instant::now();
    let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    };
    println!("{} {name}: {} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, detail.trim(), start.elapsed().as_secs_f64());
    ok
}

fn main() -> ExitCode {
    let mut all = true;
    all &= run("1 noise moments", moments);
    all &= run("2 dynamic/static split", split);
    all &= run("3 annual value of worst-case gains", annual_value);
    all &= run("4 MAPE/RMSNE closed form", error_identity);
    all &= run("5 MILP vs enumeration", milp_oracle);
    all &= run("6 monotonicity", monotonicity);

    let (net, hours) = desk_data(42);
    all &= run("7 noise-free baseline", || noise_free(&net, &hours));
    all &= run("8 trend on synthetic data", trend);

    let desk = ["9 determinism", "10 no unserved demand"];
    if desk.iter().any(|n| selected(n)) {
        let cfg = desk_config(42);
        let sweeps = catch_unwind(|| {
            let one = run_experiment(&cfg, &net, &hours, 1).unwrap();
            let eight = run_experiment(&cfg, &net, &hours, 8).unwrap();
            (one, eight)
        });
        match &sweeps {
            Ok((one, eight)) => {
                all &= run(desk[0], || {
                    let (a, b) = (one.to_csv_string(), eight.to_csv_string());
                    (a == b && one.rows.len() == 144, format!("{} rows, jobs 1 and 8 identical: {}", one.rows.len(), a == b))
                });
                all &= run(desk[1], || slack(one));
            }
            Err(_) => {
                for name in desk {
                    println!("FAIL {name}: desk sweep panicked");
                }
                all = false;
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
