//! Prediction-error and trip-time measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{DemandSnapshot, OdPair};
use crate::error::{Error, Result};

/// Default value of travel time savings, EUR per hour.
pub const DEFAULT_VTTS: f64 = 13.43;
/// Default trips per year used to annualize gains.
pub const DEFAULT_YEARLY_TRIPS: f64 = 1.075e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrors {
    pub mape: f64,
    pub rmsne: f64,
}

/// MAPE and RMSNE of (already truncated) predictions, normalized by the
/// pooled mean `g_bar`. `preds[i]` pairs with `truth[i]`.
pub fn prediction_errors(
    preds: &[BTreeMap<OdPair, f64>],
    truth: &[DemandSnapshot],
    g_bar: f64,
) -> Result<PredictionErrors> {
    if !(g_bar > 0.0) {
        return Err(Error::Degenerate(format!("mean demand must be positive, got {g_bar}")));
    }
    if preds.len() != truth.len() || preds.is_empty() {
        return Err(Error::InvalidArgument("predictions and ground truth must cover the same hours".into()));
    }
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for (p, t) in preds.iter().zip(truth) {
        if p.len() != t.counts.len() || p.keys().zip(t.counts.keys()).any(|(a, b)| a != b) {
            return Err(Error::InvalidArgument(format!("hour {} has mismatched OD cells", t.hour_index)));
        }
        let q = t.counts.len() as f64;
        let (mut a, mut s) = (0.0, 0.0);
        for (pv, tv) in p.values().zip(t.counts.values()) {
            let e = (pv - tv) / g_bar;
            a += e.abs();
            s += e * e;
        }
        abs_sum += a / q;
        sq_sum += s / q;
    }
    let n = preds.len() as f64;
    Ok(PredictionErrors { mape: abs_sum / n, rmsne: (sq_sum / n).sqrt() })
}

/// The same measures written directly in terms of the noise draws,
/// before truncation: `eps[i][od]`, common scale `sigma_g`.
pub fn closed_form_errors(eps: &[Vec<f64>], sigma_g: f64, g_bar: f64) -> PredictionErrors {
    let n = eps.len() as f64;
    let q = eps.first().map_or(0, Vec::len) as f64;
    let abs: f64 = eps.iter().flatten().map(|e| e.abs()).sum();
    let sq: f64 = eps.iter().flatten().map(|e| e * e).sum();
    PredictionErrors {
        mape: sigma_g / (g_bar * q * n) * abs,
        rmsne: sigma_g / (g_bar * (q * n).sqrt()) * sq.sqrt(),
    }
}

/// Which quantity normalizes the relative loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossDenominator {
    /// Perfect-prediction trip time `F` (passenger-minutes).
    #[default]
    TotalTime,
    /// Perfect-prediction time per passenger `F / P`.
    PerPassenger,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeMetrics {
    pub t_i_mean: f64,
    pub t_i_sd: f64,
    pub t_loss: f64,
    pub t_loss_rel: f64,
    pub t_gain: f64,
    pub t_gain_rel: f64,
}

/// Per-hour series in passenger-minutes (`f_*`) and passengers (`p`).
pub fn time_metrics(
    f_noisy: &[f64],
    f_perfect: &[f64],
    f_static_noisy: &[f64],
    p: &[f64],
    denominator: LossDenominator,
) -> Result<TimeMetrics> {
    let n = p.len();
    if n == 0 || f_noisy.len() != n || f_perfect.len() != n || f_static_noisy.len() != n {
        return Err(Error::InvalidArgument("time series must be nonempty and of equal length".into()));
    }
    if let Some(i) = p.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate(format!("hour {i} has no passengers")));
    }
    if let Some(i) = f_perfect.iter().chain(f_static_noisy).position(|&v| v == 0.0) {
        return Err(Error::Degenerate(format!("zero trip time used as a denominator (series entry {i})")));
    }
    let nf = n as f64;
    let t_i: Vec<f64> = f_noisy.iter().zip(p).map(|(f, p)| f / p).collect();
    let t_i_mean = t_i.iter().sum::<f64>() / nf;
    let t_i_sd = if n > 1 {
        (t_i.iter().map(|t| (t - t_i_mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut m = TimeMetrics { t_i_mean, t_i_sd, ..TimeMetrics::default() };
    for i in 0..n {
        let loss = f_noisy[i] - f_perfect[i];
        let gain = f_static_noisy[i] - f_noisy[i];
        m.t_loss += loss / p[i];
        m.t_loss_rel += match denominator {
            LossDenominator::TotalTime => loss / f_perfect[i],
            LossDenominator::PerPassenger => loss / (f_perfect[i] / p[i]),
        };
        m.t_gain += gain / p[i];
        m.t_gain_rel += gain / f_static_noisy[i];
    }
    m.t_loss /= nf;
    m.t_loss_rel /= nf;
    m.t_gain /= nf;
    m.t_gain_rel /= nf;
    Ok(m)
}

/// Yearly value of a per-trip time gain, rounded to the nearest 1000.
pub fn vtts_gain(t_gain_minutes: f64, nu_per_hour: f64, yearly_trips: f64) -> f64 {
    (vtts_gain_exact(t_gain_minutes, nu_per_hour, yearly_trips) / 1000.0).round() * 1000.0
}

pub fn vtts_gain_exact(t_gain_minutes: f64, nu_per_hour: f64, yearly_trips: f64) -> f64 {
    t_gain_minutes * (nu_per_hour / 60.0) * yearly_trips
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(g: f64) -> DemandSnapshot {
        DemandSnapshot::new(1, BTreeMap::from([(OdPair::new(0, 1), g)]))
    }

    #[test]
    fn single_cell_errors() {
        let pred = vec![BTreeMap::from([(OdPair::new(0, 1), 12.0)])];
        let e = prediction_errors(&pred, &[one_cell(10.0)], 10.0).unwrap();
        assert!((e.mape - 0.2).abs() < 1e-15 && (e.rmsne - 0.2).abs() < 1e-15);
        let exact = vec![one_cell(10.0).counts];
        let e = prediction_errors(&exact, &[one_cell(10.0)], 10.0).unwrap();
        assert_eq!((e.mape, e.rmsne), (0.0, 0.0));
        assert!(prediction_errors(&exact, &[one_cell(10.0)], 0.0).is_err());
    }

    #[test]
    fn loss_example() {
        let m = time_metrics(&[100.0, 300.0], &[90.0, 280.0], &[100.0, 300.0], &[10.0, 20.0], LossDenominator::TotalTime)
            .unwrap();
        assert!((m.t_loss - 1.0).abs() < 1e-15);
        assert_eq!(m.t_gain, 0.0);
        let same = time_metrics(&[5.0], &[5.0], &[7.0], &[2.0], LossDenominator::TotalTime).unwrap();
        assert_eq!((same.t_loss, same.t_loss_rel), (0.0, 0.0));
        assert!(time_metrics(&[1.0], &[1.0], &[1.0], &[0.0], LossDenominator::TotalTime).is_err());
    }

    #[test]
    fn vtts_examples() {
        assert_eq!(vtts_gain(0.0, 13.43, 1.075e6), 0.0);
        assert_eq!(vtts_gain(3.4, 13.43, 1.075e6), 818_000.0);
        let a = vtts_gain_exact(1.3, 13.43, 1e6);
        assert!((vtts_gain_exact(1.3, 13.43, 2e6) - 2.0 * a).abs() < 1e-9);
    }
}
