//! Low-discrepancy sequences for deterministic probe points.

/// Van der Corput radical inverse in the given base.
fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut x = 0.0;
    let mut f = inv;
    while n > 0 {
        x += (n % base) as f64 * f;
        n /= base;
        f *= inv;
    }
    x
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `count` Halton points in the axis-aligned box given by `(lo, hi)` pairs.
/// Deterministic; dimensions beyond the prime table wrap (fine for the probe
/// sizes used here).
pub fn halton_box(count: usize, box_dims: &[(f64, f64)]) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            box_dims
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[d % PRIMES.len()]);
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_points_fill_the_box() {
        let pts = halton_box(256, &[(0.5, 2.0), (-1.0, 1.0)]);
        assert_eq!(pts.len(), 256);
        for p in &pts {
            assert!(p[0] >= 0.5 && p[0] <= 2.0);
            assert!(p[1] >= -1.0 && p[1] <= 1.0);
        }
        // crude uniformity: mean near box center
        let mx: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / 256.0;
        assert!((mx - 1.25).abs() < 0.05);
    }
}
