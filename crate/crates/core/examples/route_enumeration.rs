//! Candidate routes of a small synthetic network and their waiting times.

use dynfleet::data::synthetic_network;
use dynfleet::routes::enumerate_routes;

fn main() -> dynfleet::Result<()> {
    let network = synthetic_network(5, 3);
    let routes = enumerate_routes(&network)?;
    println!("{} stations, {} routes", network.len(), routes.len());
    for r in &routes.routes {
        let stops: Vec<&str> = r.stops.iter().map(|&s| network.nodes[s].as_str()).collect();
        let mark = if r.id == routes.base_route { " (base)" } else { "" };
        println!(
            "{:>3}  {:<20} cycle {:>6.1} min, wait with 1/2/4 buses {:>5.1} {:>5.1} {:>5.1}{mark}",
            r.id,
            stops.join("-"),
            r.cycle_time,
            r.waiting_time(1)?,
            r.waiting_time(2)?,
            r.waiting_time(4)?,
        );
    }
    Ok(())
}
