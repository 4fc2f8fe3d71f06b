use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Paired inputs `X` (`T_sum × p`) and outputs `Y` (`T_sum × h`), with
/// optional ground truth when the series came from a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDataset {
    x: Array2<f64>,
    y: Array2<f64>,
    change_points: Option<Vec<usize>>,
    noise_sigma: Option<f64>,
    change_signals: Option<Vec<f64>>,
}

impl SeriesDataset {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::shape(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::config("dataset has no rows"));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::config("dataset needs at least one input and one output column"));
        }
        if let Some(pos) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            x,
            y,
            change_points: None,
            noise_sigma: None,
            change_signals: None,
        })
    }

    /// Attach ground-truth change points (strictly increasing, inside `(0, T_sum)`).
    pub fn with_change_points(mut self, cps: Vec<usize>) -> Result<Self> {
        validate_change_points(&cps, self.len())?;
        self.change_points = Some(cps);
        Ok(self)
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("noise sigma must be finite and >= 0"));
        }
        self.noise_sigma = Some(sigma);
        Ok(self)
    }

    /// Per-change signal estimates `E‖f_{j+1}(X) − f_j(X)‖²`, one per change point.
    pub fn with_change_signals(mut self, signals: Vec<f64>) -> Result<Self> {
        let expected = self.change_points.as_ref().map_or(0, Vec::len);
        if signals.len() != expected {
            return Err(Error::config(format!(
                "{} change signals for {expected} change points",
                signals.len()
            )));
        }
        self.change_signals = Some(signals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    /// Rows `[start, end)` of both matrices.
    pub fn rows(&self, start: usize, end: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
        (
            self.x.slice(s![start..end, ..]),
            self.y.slice(s![start..end, ..]),
        )
    }

    pub fn change_points(&self) -> Option<&[usize]> {
        self.change_points.as_deref()
    }

    pub fn noise_sigma(&self) -> Option<f64> {
        self.noise_sigma
    }

    pub fn change_signals(&self) -> Option<&[f64]> {
        self.change_signals.as_deref()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.x, self.y)
    }
}

pub(crate) fn validate_change_points(cps: &[usize], len: usize) -> Result<()> {
    if cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("change points must be strictly increasing"));
    }
    if let Some(&bad) = cps.iter().find(|&&c| c == 0 || c >= len) {
        return Err(Error::config(format!(
            "change point {bad} outside (0, {len})"
        )));
    }
    Ok(())
}

/// Build a lagged regression dataset from a raw series: row `i` of the
/// result has inputs `(y_{i+q-1}, …, y_i)` and output `y_{i+q}`.
pub fn lagged(series: ArrayView2<'_, f64>, lags: usize) -> Result<SeriesDataset> {
    let (n, h) = series.dim();
    if lags == 0 {
        return Err(Error::config("lag count must be >= 1"));
    }
    if lags >= n {
        return Err(Error::SeriesTooShort {
            len: n,
            required: lags + 1,
        });
    }
    let rows = n - lags;
    let mut x = Array2::zeros((rows, lags * h));
    for i in 0..rows {
        let t = i + lags;
        for k in 1..=lags {
            x.slice_mut(s![i, (k - 1) * h..k * h])
                .assign(&series.row(t - k));
        }
    }
    let y = series.slice(s![lags.., ..]).to_owned();
    SeriesDataset::new(x, y)
}
