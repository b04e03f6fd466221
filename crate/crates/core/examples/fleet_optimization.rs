//! Allocates a fixed fleet over the candidate routes for one hour of demand
//! and shows how the optimum moves as more buses become dynamic.

use dynfleet::data::{default_start, generate_synthetic, ingest_reader, synthetic_network, write_trips, IntensityProfile};
use dynfleet::fleet::{optimize_alpha_chain, SolveOptions};
use dynfleet::routes::enumerate_routes;

fn main() -> dynfleet::Result<()> {
    let network = synthetic_network(5, 11);
    let routes = enumerate_routes(&network)?;
    let records = generate_synthetic(5, 24, &IntensityProfile::default(), default_start(), 11)?;
    let mut csv = Vec::new();
    write_trips(&records, &mut csv)?;
    let hours = ingest_reader(&csv[..], "synthetic", &network)?.snapshots;
    let hour = &hours[8];
    println!("hour {}: {} passengers", hour.hour_index, hour.total_passengers());

    let (capacity, fleet) = (30, 8);
    let alphas = [0.0, 0.25, 0.5];
    let results = optimize_alpha_chain(&network, &routes, &hour.counts, capacity, fleet, &alphas, &SolveOptions::with_gap(1e-3));
    for (alpha, res) in alphas.iter().zip(results) {
        let alloc = res?;
        let per_pax = alloc.objective / hour.total_passengers();
        println!("alpha {alpha:.2}: {:.2} min per trip ({}), buses {}", per_pax, alloc.status, alloc.to_json()?);
    }
    Ok(())
}
