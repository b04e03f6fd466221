//! Smallest all-static fleet per bus capacity over the busiest hours.

use dynfleet::data::{
    default_start, generate_synthetic, ingest_reader, select_hours, synthetic_network, write_trips, HourSelection,
    IntensityProfile,
};
use dynfleet::fleet::min_feasible_fleet;
use dynfleet::routes::enumerate_routes;

fn main() -> dynfleet::Result<()> {
    let network = synthetic_network(6, 7);
    let routes = enumerate_routes(&network)?;
    let records = generate_synthetic(6, 24 * 7, &IntensityProfile::default(), default_start(), 7)?;
    let mut csv = Vec::new();
    write_trips(&records, &mut csv)?;
    let hours = ingest_reader(&csv[..], "synthetic", &network)?.snapshots;
    let busiest = select_hours(&hours, HourSelection::BusiestN, 20, 0)?;
    for gamma in [10, 20, 30, 40] {
        let pi = min_feasible_fleet(&network, &routes, gamma, &busiest, 500)?;
        println!("capacity {gamma:>2}: {pi} buses");
    }
    Ok(())
}
