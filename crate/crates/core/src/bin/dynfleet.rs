use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use dynfleet::data::{
    default_start, generate_synthetic, ingest_trips, select_hours, synthetic_network, write_trips, HourSelection,
    IntensityProfile,
};
use dynfleet::domain::{validate_network, Network};
use dynfleet::experiment::{read_rows, run_experiment, ExperimentConfig};
use dynfleet::fleet::min_feasible_fleet;
use dynfleet::report::{write_report, ReportKind, ReportOptions, REFERENCE_FLEET_SIZES};
use dynfleet::routes::enumerate_routes;
use dynfleet::{Error, Result};

/// Fleet sizing experiments for mixed static/dynamic feeder buses.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic network and hourly trip counts.
    Synth {
        #[arg(long, default_value_t = 6)]
        stations: usize,
        #[arg(long, default_value_t = 168)]
        hours: usize,
        /// Mean trips per OD pair and hour.
        #[arg(long, default_value_t = 8.0)]
        rate: f64,
    },
    /// Check a trips file and summarize its hours.
    Ingest {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        trips: PathBuf,
    },
    /// Enumerate candidate routes.
    Routes {
        #[arg(long)]
        network: PathBuf,
    },
    /// Smallest all-static fleet per capacity over the busiest hours.
    FleetSize {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        trips: PathBuf,
    },
    /// Run the sweep; writes results.csv and metadata.json.
    Run {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        trips: PathBuf,
    },
    /// Write report tables from a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Report kinds; all of them when omitted.
        #[arg(long, value_delimiter = ',')]
        kind: Vec<String>,
        /// Use the reference fleet sizes for the split table.
        #[arg(long)]
        reference_fleet: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_network(path: &Path) -> Result<Network> {
    let net: Network = serde_json::from_str(&fs::read_to_string(path)?)?;
    validate_network(net)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// `Ok(false)` means the command ran but some cell was not solved.
fn run(cli: &Cli) -> Result<bool> {
    if cli.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be positive".into()));
    }
    let cfg = load_config(cli)?;
    let out = &cli.out_dir;
    fs::create_dir_all(out)?;
    match &cli.cmd {
        Cmd::Synth { stations, hours, rate } => {
            let net = synthetic_network(*stations, cfg.seed);
            let profile = IntensityProfile { rate: *rate, ..IntensityProfile::default() };
            let records = generate_synthetic(*stations, *hours, &profile, default_start(), cfg.seed)?;
            write(out, "network.json", &serde_json::to_string_pretty(&net)?)?;
            let mut buf = Vec::new();
            write_trips(&records, &mut buf)?;
            write(out, "trips.csv", std::str::from_utf8(&buf).expect("utf-8"))?;
        }
        Cmd::Ingest { network, trips } => {
            let net = load_network(network)?;
            let ing = ingest_trips(trips, &net)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["hour_index", "hour_utc", "passengers"])?;
            for s in &ing.snapshots {
                let hour = s.hour.as_ref().map(dynfleet::data::format_hour).unwrap_or_default();
                w.write_record([s.hour_index.to_string(), hour, s.total_passengers().to_string()])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write(out, "hours.csv", std::str::from_utf8(&bytes).expect("utf-8"))?;
            info!("{} hours, {} rows dropped", ing.snapshots.len(), ing.dropped);
        }
        Cmd::Routes { network } => {
            let net = load_network(network)?;
            let routes = enumerate_routes(&net)?;
            info!("{} routes, base route {}", routes.len(), routes.base_route);
            write(out, "routes.json", &routes.to_json(&net)?)?;
        }
        Cmd::FleetSize { network, trips } => {
            let net = load_network(network)?;
            let routes = enumerate_routes(&net)?;
            let snaps = ingest_trips(trips, &net)?.snapshots;
            let n = cfg.sizing_hours.min(snaps.len());
            let busy = select_hours(&snaps, HourSelection::BusiestN, n, cfg.seed)?;
            let mut sizes = std::collections::BTreeMap::new();
            for &g in &cfg.gammas {
                let pi = min_feasible_fleet(&net, &routes, g, &busy, cfg.fleet_cap)?;
                info!("capacity {g}: {pi} buses");
                sizes.insert(g, pi);
            }
            write(out, "fleet_sizes.json", &serde_json::to_string_pretty(&sizes)?)?;
        }
        Cmd::Run { network, trips } => {
            let net = load_network(network)?;
            let snaps = ingest_trips(trips, &net)?.snapshots;
            let store = run_experiment(&cfg, &net, &snaps, cli.jobs)?;
            store.write_csv(fs::File::create(out.join("results.csv"))?)?;
            write(out, "metadata.json", &serde_json::to_string_pretty(&store.metadata)?)?;
            let bad = store.rows.iter().filter(|r| !r.is_solved()).count();
            if bad > 0 {
                error!("{bad} of {} cells not solved", store.rows.len());
            }
            return Ok(bad == 0);
        }
        Cmd::Report { results, kind, reference_fleet } => {
            let rows = read_rows(fs::File::open(results)?, &results.display().to_string())?;
            let kinds: Vec<ReportKind> = if kind.is_empty() {
                ReportKind::ALL.to_vec()
            } else {
                kind.iter().map(|k| k.parse()).collect::<Result<_>>()?
            };
            let opts = ReportOptions {
                vtts: cfg.vtts,
                yearly_trips: cfg.yearly_trips,
                fleet_sizes: reference_fleet.then(|| REFERENCE_FLEET_SIZES.into_iter().collect()),
            };
            for k in kinds {
                let path = write_report(&rows, k, &opts, out)?;
                info!("wrote {}", path.display());
            }
        }
    }
    Ok(true)
}
