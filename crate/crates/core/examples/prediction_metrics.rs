//! Perturbs a week of synthetic demand with each noise family and reports
//! MAPE/RMSNE next to the closed-form values computed from the raw draws.

use dynfleet::data::{default_start, generate_synthetic, ingest_reader, synthetic_network, write_trips, IntensityProfile};
use dynfleet::domain::sample_sd;
use dynfleet::fleet::truncate_predictions;
use dynfleet::metrics::{closed_form_errors, prediction_errors};
use dynfleet::noise::{draw_noise, make_noise_spec, perturb, Family};

fn main() -> dynfleet::Result<()> {
    let network = synthetic_network(6, 2);
    let records = generate_synthetic(6, 24 * 7, &IntensityProfile::default(), default_start(), 2)?;
    let mut csv = Vec::new();
    write_trips(&records, &mut csv)?;
    let hours = ingest_reader(&csv[..], "synthetic", &network)?.snapshots;
    let stats = sample_sd(&hours)?;
    println!("pooled mean {:.3}, sd {:.3} over {} cells", stats.mean, stats.sd, stats.count);

    let seed = 5;
    for family in Family::ALL {
        let spec = make_noise_spec(family, 1.0)?;
        let preds: Vec<_> = hours.iter().map(|h| perturb(h, Some(&spec), stats.sd, seed)).collect();
        let truncated: Vec<_> = preds.iter().map(truncate_predictions).collect();
        let raw: Vec<_> = preds.iter().map(|p| p.values.clone()).collect();
        let eps: Vec<Vec<f64>> = hours
            .iter()
            .map(|h| h.counts.keys().map(|&od| draw_noise(&spec, h.hour_index, od, seed).epsilon).collect())
            .collect();
        let before = prediction_errors(&raw, &hours, stats.mean)?;
        let closed = closed_form_errors(&eps, stats.sd, stats.mean);
        let after = prediction_errors(&truncated, &hours, stats.mean)?;
        println!(
            "{:<12} MAPE {:.4} (closed form {:.4}, truncated {:.4})  RMSNE {:.4} (closed form {:.4}, truncated {:.4})",
            family.as_str(),
            before.mape,
            closed.mape,
            after.mape,
            before.rmsne,
            closed.rmsne,
            after.rmsne
        );
    }
    Ok(())
}
