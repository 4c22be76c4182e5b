//! Periodograms for peak detection and period estimation.
//!
//! Spectral internals run in `f64` regardless of the caller's scalar type;
//! peak locations and amplitudes are converted back on the way out.

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::scalar::Scalar;

/// One-sided periodogram of a mean-removed signal on a uniform grid.
/// Returns (angular frequency, power) pairs for bins `1..n/2` — the DC bin is
/// dropped. `dt` is the sample spacing.
pub fn periodogram<S: Scalar>(y: &[S], dt: f64) -> Vec<(f64, f64)> {
    let n = y.len();
    if n < 4 {
        return Vec::new();
    }
    let mean: f64 = y.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = y
        .iter()
        .map(|v| Complex64::new(v.as_f64() - mean, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    (1..n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() / (n as f64);
            (k as f64 * df, p)
        })
        .collect()
}

/// Local maxima of the periodogram, sorted by descending power, at most `k`.
pub fn top_peaks(spec: &[(f64, f64)], k: usize) -> Vec<(f64, f64)> {
    let mut peaks: Vec<(f64, f64)> = spec
        .iter()
        .enumerate()
        .filter(|&(i, &(_, p))| {
            let left = if i == 0 { 0.0 } else { spec[i - 1].1 };
            let right = if i + 1 == spec.len() { 0.0 } else { spec[i + 1].1 };
            p >= left && p >= right && p > 0.0
        })
        .map(|(_, &pk)| pk)
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    peaks.truncate(k);
    peaks
}

/// Dominant period if a spectral peak stands out (power above `threshold`
/// times the median bin power); otherwise `None`.
pub fn dominant_period<S: Scalar>(y: &[S], dt: f64, threshold: f64) -> Option<f64> {
    let spec = periodogram(y, dt);
    if spec.is_empty() {
        return None;
    }
    let mut powers: Vec<f64> = spec.iter().map(|&(_, p)| p).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = powers[powers.len() / 2];
    let &(w, p) = spec
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if p > threshold * median.max(1e-300) {
        Some(2.0 * std::f64::consts::PI / w)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_peak_lands_in_the_right_bin() {
        let n = 1024;
        let dt = 0.05;
        let w0 = 2.0 * std::f64::consts::PI * 1.0; // 1 Hz
        let y: Vec<f64> = (0..n).map(|i| (w0 * i as f64 * dt).sin()).collect();
        let spec = periodogram(&y, dt);
        let peaks = top_peaks(&spec, 1);
        let bin = 2.0 * std::f64::consts::PI / (n as f64 * dt);
        assert!((peaks[0].0 - w0).abs() <= bin, "peak at {} vs {}", peaks[0].0, w0);
    }

    #[test]
    fn dominant_period_of_slow_sine() {
        let dt = 0.1;
        let n = 700; // 70 s of sin(2 pi t / 7)
        let y: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * (i as f64 * dt) / 7.0).sin())
            .collect();
        let p = dominant_period(&y, dt, 5.0).unwrap();
        assert!((p - 7.0).abs() / 7.0 < 0.05, "period {p}");
    }

    #[test]
    fn constant_signal_has_no_dominant_period() {
        let y = vec![3.0_f64; 256];
        assert!(dominant_period(&y, 0.01, 5.0).is_none());
    }
}
