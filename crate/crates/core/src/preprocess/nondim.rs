//! Nondimensionalization by data-driven characteristic scales.
//!
//! Per-channel scale: the inter-quartile range, floored at 1e-9; channels with
//! numerically zero IQR fall back to max|x| (or 1) and are flagged. Time
//! scale: the dominant oscillation period when a periodogram peak exceeds
//! five times the median bin power (checked across channels, strongest peak
//! wins), otherwise the total duration. The original unit vectors are kept so
//! raw-unit typing stays possible downstream.

use crate::scalar::Scalar;
use crate::util::spectrum;
use crate::util::stats;

use super::{ScaledDataset, SmoothedState, Trajectory};

const IQR_FLOOR: f64 = 1e-9;
const PEAK_THRESHOLD: f64 = 5.0;

fn channel_scale<S: Scalar>(values: &[S]) -> (S, bool) {
    let iqr = stats::iqr(values);
    if iqr.as_f64() >= IQR_FLOOR {
        (iqr, false)
    } else {
        let maxabs = values.iter().fold(S::zero(), |acc, v| acc.max(v.abs()));
        if maxabs > S::zero() {
            (maxabs, true)
        } else {
            (S::one(), true)
        }
    }
}

/// Dominant period across channels, if any channel shows a qualifying peak.
fn dominant_period_any<S: Scalar>(traj: &Trajectory<S>, smoothed: &SmoothedState<S>) -> Option<f64> {
    let n = traj.len();
    let dt = (traj.times[n - 1] - traj.times[0]).as_f64() / (n - 1) as f64;
    let mut best: Option<(f64, f64)> = None; // (peak ratio, period)
    for ch in &smoothed.values {
        let spec = spectrum::periodogram(ch, dt);
        if spec.is_empty() {
            continue;
        }
        let mut powers: Vec<f64> = spec.iter().map(|&(_, p)| p).collect();
        powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = powers[powers.len() / 2].max(1e-300);
        let &(w, p) = spec
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let ratio = p / median;
        if ratio > PEAK_THRESHOLD && best.map_or(true, |(r, _)| ratio > r) {
            best = Some((ratio, 2.0 * std::f64::consts::PI / w));
        }
    }
    best.map(|(_, period)| period)
}

/// Rescale a smoothed trajectory to order-unity dimensionless variables.
pub fn nondimensionalize<S: Scalar>(
    traj: &Trajectory<S>,
    smoothed: &SmoothedState<S>,
) -> ScaledDataset<S> {
    let m = traj.len();
    let d = smoothed.values.len();
    let q = traj.inputs.len();

    let mut state_scales = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for (i, ch) in smoothed.values.iter().enumerate() {
        let (scale, flag) = channel_scale(ch);
        if flag {
            degenerate.push(i);
        }
        state_scales.push(scale);
    }
    let input_scales: Vec<S> = traj
        .inputs
        .iter()
        .map(|ch| channel_scale(ch).0)
        .collect();

    let total = (traj.times[m - 1] - traj.times[0]).as_f64();
    let t_star = S::of(dominant_period_any(traj, smoothed).unwrap_or(total));

    let times: Vec<S> = traj.times.iter().map(|&t| t / t_star).collect();
    let state_rows: Vec<Vec<S>> = (0..m)
        .map(|k| (0..d).map(|i| smoothed.values[i][k] / state_scales[i]).collect())
        .collect();
    let input_rows: Vec<Vec<S>> = (0..m)
        .map(|k| (0..q).map(|j| traj.inputs[j][k] / input_scales[j]).collect())
        .collect();
    let derivs: Vec<Vec<S>> = (0..d)
        .map(|i| {
            smoothed.derivatives[i]
                .iter()
                .map(|&dz| dz * t_star / state_scales[i])
                .collect()
        })
        .collect();

    ScaledDataset {
        times,
        state_rows,
        input_rows,
        derivs,
        state_scales,
        input_scales,
        time_scale: t_star,
        unit_table: traj.channel_units.clone(),
        degenerate_channels: degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::DimVector;
    use rand::Rng;

    fn smoothed_identity<S: Scalar>(traj: &Trajectory<S>) -> SmoothedState<S> {
        // values = observations, derivatives = centered differences
        let m = traj.len();
        let derivs = traj
            .channels
            .iter()
            .map(|y| {
                let mut d = vec![S::zero(); m];
                for i in 1..m - 1 {
                    d[i] = (y[i + 1] - y[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
                }
                d[0] = (y[1] - y[0]) / (traj.times[1] - traj.times[0]);
                d[m - 1] = (y[m - 1] - y[m - 2]) / (traj.times[m - 1] - traj.times[m - 2]);
                d
            })
            .collect();
        SmoothedState {
            values: traj.channels.clone(),
            derivatives: derivs,
            methods: vec![],
        }
    }

    #[test]
    fn uniform_channel_scale_is_half_range() {
        let mut rng = crate::util::rng::stream(2, crate::util::rng::Stream::Noise, 0);
        let n = 20_000;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
        let expected = stats::iqr(&y); // oracle on the same sample
        let traj = Trajectory::new(t, vec![y], vec![DimVector::DIMENSIONLESS], vec![], vec![]).unwrap();
        let sm = smoothed_identity(&traj);
        let ds = nondimensionalize(&traj, &sm);
        assert!((ds.state_scales[0] - expected).abs() < 1e-12);
        assert!((expected - 5.0).abs() < 0.15, "IQR of U(0,10) near 5, got {expected}");
    }

    #[test]
    fn scaled_channel_has_unit_iqr() {
        let n = 512;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|&x| 3.0 * (x * 0.9).sin() + 1.0).collect();
        let traj = Trajectory::new(t, vec![y], vec![DimVector::DIMENSIONLESS], vec![], vec![]).unwrap();
        let sm = smoothed_identity(&traj);
        let ds = nondimensionalize(&traj, &sm);
        let col: Vec<f64> = ds.state_rows.iter().map(|r| r[0]).collect();
        assert!((stats::iqr(&col) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_iqr_channel_is_left_unchanged() {
        // a channel already scaled to IQR 1 gets scale 1
        let n = 101;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect(); // ramp, IQR = 0.5
        let y2: Vec<f64> = y.iter().map(|v| v * 2.0).collect(); // IQR = 1
        let traj =
            Trajectory::new(t, vec![y2.clone()], vec![DimVector::DIMENSIONLESS], vec![], vec![])
                .unwrap();
        let sm = smoothed_identity(&traj);
        let ds = nondimensionalize(&traj, &sm);
        assert!((ds.state_scales[0] - 1.0).abs() < 1e-9);
        for (r, orig) in ds.state_rows.iter().zip(&y2) {
            assert!((r[0] - orig).abs() < 1e-9);
        }
    }

    #[test]
    fn slow_sine_period_detected_within_five_percent() {
        let n = 700;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect(); // 70 s
        let y: Vec<f64> = t
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x / 7.0).sin())
            .collect();
        let traj = Trajectory::new(t, vec![y], vec![DimVector::DIMENSIONLESS], vec![], vec![]).unwrap();
        let sm = smoothed_identity(&traj);
        let ds = nondimensionalize(&traj, &sm);
        assert!(
            (ds.time_scale - 7.0).abs() / 7.0 < 0.05,
            "t_star = {}",
            ds.time_scale
        );
    }

    #[test]
    fn constant_channel_is_flagged_with_fallback_scale() {
        let n = 64;
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = vec![2.5; n];
        let traj = Trajectory::new(t, vec![y], vec![DimVector::DIMENSIONLESS], vec![], vec![]).unwrap();
        let sm = smoothed_identity(&traj);
        let ds = nondimensionalize(&traj, &sm);
        assert_eq!(ds.degenerate_channels, vec![0]);
        assert!((ds.state_scales[0] - 2.5).abs() < 1e-12);
    }
}
