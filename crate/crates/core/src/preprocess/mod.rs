//! Stage 1–2 preprocessing: smoothing, derivative estimation, estimator
//! selection, and nondimensionalization.

mod nondim;
mod select;
mod spline;
mod tv;

pub use nondim::nondimensionalize;
pub use select::{select_method, MethodChoice};
pub use spline::{spline_smooth_fixed_alpha, spline_smooth_gcv, SplineFit, GCV_ALPHA_GRID};
pub use tv::{tv_differentiate, TvResult};

use serde::{Deserialize, Serialize};

use crate::grammar::DimVector;
use crate::scalar::Scalar;

/// Observed trajectory: a strictly increasing time grid, observed channels
/// with units, and optional exogenous inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    /// Channel-major observed values, `d_o` channels of length `M`.
    pub channels: Vec<Vec<S>>,
    pub channel_units: Vec<DimVector>,
    /// Channel-major inputs, `q` channels of length `M`.
    pub inputs: Vec<Vec<S>>,
    pub input_units: Vec<DimVector>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("time grid is not strictly increasing at index {0}")]
    NonMonotonicTime(usize),
    #[error("non-finite value in channel {channel} at index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("degenerate time grid: the smoothing system is singular")]
    DegenerateTimeGrid,
    #[error("channel length {got} does not match the time grid length {want}")]
    LengthMismatch { want: usize, got: usize },
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(
        times: Vec<S>,
        channels: Vec<Vec<S>>,
        channel_units: Vec<DimVector>,
        inputs: Vec<Vec<S>>,
        input_units: Vec<DimVector>,
    ) -> Result<Self, PreprocessError> {
        let m = times.len();
        if m < 8 {
            return Err(PreprocessError::TooFewSamples { need: 8, got: m });
        }
        for i in 1..m {
            if !(times[i] > times[i - 1]) {
                return Err(PreprocessError::NonMonotonicTime(i));
            }
        }
        for (c, ch) in channels.iter().chain(inputs.iter()).enumerate() {
            if ch.len() != m {
                return Err(PreprocessError::LengthMismatch { want: m, got: ch.len() });
            }
            if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
                return Err(PreprocessError::NonFinite { channel: c, index: i });
            }
        }
        assert_eq!(channels.len(), channel_units.len());
        assert_eq!(inputs.len(), input_units.len());
        Ok(Trajectory {
            times,
            channels,
            channel_units,
            inputs,
            input_units,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Whether the grid spacing is uniform to the given relative tolerance.
    pub fn is_uniform(&self, rtol: f64) -> bool {
        let n = self.times.len();
        if n < 3 {
            return true;
        }
        let span = (self.times[n - 1] - self.times[0]).as_f64();
        let h = span / (n - 1) as f64;
        self.times.windows(2).all(|w| {
            let d = (w[1] - w[0]).as_f64();
            (d - h).abs() <= rtol * h
        })
    }
}

/// Per-channel derivative estimator and its tuned hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DerivMethod<S> {
    Spline { alpha: S },
    Tv { beta: S, converged: bool, resampled: bool },
}

/// Smoothed values and derivative estimates on the observation grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothedState<S> {
    pub values: Vec<Vec<S>>,
    pub derivatives: Vec<Vec<S>>,
    pub methods: Vec<DerivMethod<S>>,
}

/// Nondimensionalized dataset: what the search, fitting, and scoring stages
/// consume. State rows are sample-major for the fitting hot loop; derivative
/// targets stay channel-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaledDataset<S> {
    /// Scaled times `t / t_star`.
    pub times: Vec<S>,
    /// Sample-major scaled smoothed state, `M x d`.
    pub state_rows: Vec<Vec<S>>,
    /// Sample-major scaled inputs, `M x q`.
    pub input_rows: Vec<Vec<S>>,
    /// Channel-major scaled derivative targets `d x M`.
    pub derivs: Vec<Vec<S>>,
    pub state_scales: Vec<S>,
    pub input_scales: Vec<S>,
    pub time_scale: S,
    /// Original units per state channel (raw-unit typing stays possible).
    pub unit_table: Vec<DimVector>,
    /// Channels whose IQR was numerically zero (scale fell back to max|x|).
    pub degenerate_channels: Vec<usize>,
}

impl<S: Scalar> ScaledDataset<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.derivs.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.input_rows.first().map_or(0, |r| r.len())
    }

    /// Restrict to a contiguous index range (used by train/validation splits).
    pub fn slice(&self, range: std::ops::Range<usize>) -> ScaledDataset<S> {
        ScaledDataset {
            times: self.times[range.clone()].to_vec(),
            state_rows: self.state_rows[range.clone()].to_vec(),
            input_rows: self.input_rows[range.clone()].to_vec(),
            derivs: self.derivs.iter().map(|d| d[range.clone()].to_vec()).collect(),
            state_scales: self.state_scales.clone(),
            input_scales: self.input_scales.clone(),
            time_scale: self.time_scale,
            unit_table: self.unit_table.clone(),
            degenerate_channels: self.degenerate_channels.clone(),
        }
    }

    /// Gather the rows with the given indices (used by bootstrap resampling).
    pub fn gather(&self, idx: &[usize]) -> ScaledDataset<S> {
        ScaledDataset {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            state_rows: idx.iter().map(|&i| self.state_rows[i].clone()).collect(),
            input_rows: idx.iter().map(|&i| self.input_rows[i].clone()).collect(),
            derivs: self
                .derivs
                .iter()
                .map(|d| idx.iter().map(|&i| d[i]).collect())
                .collect(),
            state_scales: self.state_scales.clone(),
            input_scales: self.input_scales.clone(),
            time_scale: self.time_scale,
            unit_table: self.unit_table.clone(),
            degenerate_channels: self.degenerate_channels.clone(),
        }
    }

    /// Concatenate several datasets sample-wise (multi-trajectory fitting).
    /// Scales and units are taken from the first.
    pub fn concat(parts: &[&ScaledDataset<S>]) -> ScaledDataset<S> {
        assert!(!parts.is_empty());
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            out.times.extend_from_slice(&p.times);
            out.state_rows.extend_from_slice(&p.state_rows);
            out.input_rows.extend_from_slice(&p.input_rows);
            for (d, src) in out.derivs.iter_mut().zip(&p.derivs) {
                d.extend_from_slice(src);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_validation_catches_bad_input() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![vec![0.0; 10]];
        let units = vec![DimVector::DIMENSIONLESS];
        assert!(Trajectory::new(t.clone(), y.clone(), units.clone(), vec![], vec![]).is_ok());

        let short: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert!(matches!(
            Trajectory::new(short, vec![vec![0.0; 5]], units.clone(), vec![], vec![]),
            Err(PreprocessError::TooFewSamples { .. })
        ));

        let mut bad_t = t.clone();
        bad_t[4] = bad_t[3];
        assert!(matches!(
            Trajectory::new(bad_t, y.clone(), units.clone(), vec![], vec![]),
            Err(PreprocessError::NonMonotonicTime(4))
        ));

        let mut bad_y = y;
        bad_y[0][2] = f64::NAN;
        assert!(matches!(
            Trajectory::new(t, bad_y, units, vec![], vec![]),
            Err(PreprocessError::NonFinite { .. })
        ));
    }
}
