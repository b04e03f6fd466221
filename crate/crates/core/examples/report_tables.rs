//! Report tables: the dynamic/static split for the reference fleet sizes,
//! and every report kind for a tiny synthetic sweep.

use dynfleet::data::{default_start, generate_synthetic, ingest_reader, synthetic_network, write_trips, IntensityProfile};
use dynfleet::experiment::{run_experiment, ExperimentConfig};
use dynfleet::metrics::{vtts_gain, DEFAULT_VTTS, DEFAULT_YEARLY_TRIPS};
use dynfleet::noise::Family;
use dynfleet::report::{report, split_table, ReportKind, ReportOptions, REFERENCE_ALPHAS, REFERENCE_FLEET_SIZES};

fn main() -> dynfleet::Result<()> {
    let sizes = REFERENCE_FLEET_SIZES.into_iter().collect();
    print!("{}", split_table(&sizes, &REFERENCE_ALPHAS).to_csv_string());
    println!("0.5 min per trip is worth {} EUR a year\n", vtts_gain(0.5, DEFAULT_VTTS, DEFAULT_YEARLY_TRIPS));

    let network = synthetic_network(4, 9);
    let records = generate_synthetic(4, 48, &IntensityProfile::default(), default_start(), 9)?;
    let mut csv = Vec::new();
    write_trips(&records, &mut csv)?;
    let hours = ingest_reader(&csv[..], "synthetic", &network)?.snapshots;
    let config = ExperimentConfig {
        families: vec![Family::Uniform, Family::Exponential],
        sigmas: vec![0.0, 1.0],
        gammas: vec![20, 30],
        alphas: vec![0.0, 0.2, 0.4],
        n_hours: 4,
        sizing_hours: 10,
        ..ExperimentConfig::default()
    };
    let store = run_experiment(&config, &network, &hours, 1)?;
    for kind in ReportKind::ALL {
        println!("== {kind}");
        print!("{}", report(&store.rows, kind, &ReportOptions::default()).to_csv_string());
    }
    Ok(())
}
