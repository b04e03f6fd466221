//! A small end-to-end sweep on synthetic data, printed as CSV.
//!
//! Pass a worker count as the first argument (default 2). Set
//! `RUST_LOG=debug` to follow the individual solves.

use dynfleet::data::{default_start, generate_synthetic, ingest_reader, synthetic_network, write_trips, IntensityProfile};
use dynfleet::experiment::{run_experiment, ExperimentConfig};
use dynfleet::noise::Family;

fn main() -> dynfleet::Result<()> {
    env_logger::init();
    let jobs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let network = synthetic_network(4, 1);
    let records = generate_synthetic(4, 24 * 7, &IntensityProfile::default(), default_start(), 1)?;
    let mut csv = Vec::new();
    write_trips(&records, &mut csv)?;
    let hours = ingest_reader(&csv[..], "synthetic", &network)?.snapshots;
    let config = ExperimentConfig {
        families: vec![Family::Gaussian, Family::NegWeibull],
        sigmas: vec![0.0, 1.0, 3.0],
        gammas: vec![20, 40],
        alphas: vec![0.0, 0.2, 0.4],
        n_hours: 10,
        sizing_hours: 20,
        ..ExperimentConfig::default()
    };
    let store = run_experiment(&config, &network, &hours, jobs)?;
    print!("{}", store.to_csv_string());
    let m = &store.metadata;
    eprintln!("{} solves in {:.1}s, fleet sizes {:?}, max gap {:.1e}", m.solves, m.wall_seconds, m.fleet_sizes, m.max_gap);
    Ok(())
}
