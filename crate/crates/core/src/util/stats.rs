//! Order statistics and correlations.

use crate::scalar::Scalar;

/// Linear-interpolation quantile (the numpy default). `q` in [0, 1].
pub fn quantile<S: Scalar>(data: &[S], q: f64) -> S {
    assert!(!data.is_empty(), "quantile of empty slice");
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        let frac = S::of(pos - lo as f64);
        v[lo] + (v[hi] - v[lo]) * frac
    }
}

/// Inter-quartile range.
pub fn iqr<S: Scalar>(data: &[S]) -> S {
    quantile(data, 0.75) - quantile(data, 0.25)
}

pub fn mean<S: Scalar>(data: &[S]) -> S {
    data.iter().copied().sum::<S>() / S::of(data.len() as f64)
}

/// Sample standard deviation (n-1 denominator); zero for n < 2.
pub fn std_dev<S: Scalar>(data: &[S]) -> S {
    if data.len() < 2 {
        return S::zero();
    }
    let m = mean(data);
    let ss: S = data.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / S::of((data.len() - 1) as f64)).sqrt()
}

/// Pearson correlation; returns `None` when either side is (numerically)
/// constant.
pub fn pearson<S: Scalar>(x: &[S], y: &[S]) -> Option<S> {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = S::zero();
    let mut sxx = S::zero();
    let mut syy = S::zero();
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom <= S::of(1e-300) {
        None
    } else {
        Some((sxy / denom).max(-S::one()).min(S::one()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iqr_of_linear_ramp() {
        let v: Vec<f64> = (0..101).map(|i| i as f64 / 10.0).collect();
        assert!((iqr(&v) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_perfect_and_constant() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let c = vec![2.0; 50];
        assert!(pearson(&x, &c).is_none());
    }
}
