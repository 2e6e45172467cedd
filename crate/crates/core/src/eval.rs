//! Forecast metrics and residual correlation diagnostics.
//!
//! `ecm` and `offdiag_energy` work on raw residuals; `crosslag_cov` and
//! `acf` remove the per-sensor mean first.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Entries with `|y| <= MAPE_THRESHOLD` are excluded from MAPE by default.
pub const MAPE_THRESHOLD: f64 = 1e-6;

/// MAPE with the number of excluded entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    /// Mean absolute percentage error, in percent.
    pub percent: f64,
    /// Entries skipped because `|y| <= threshold`.
    pub masked: usize,
}

fn check_same(a: &[f64], b: &[f64], ctx: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(shape_err(ctx, (a.len(), 1), (b.len(), 1)));
    }
    if a.is_empty() {
        return Err(Error::UndefinedMetric(alloc::format!("{ctx}: empty input")));
    }
    Ok(())
}

/// `100 * mean |y - yhat| / |y|` over entries with `|y| > threshold`.
pub fn mape(y_true: &[f64], y_pred: &[f64], threshold: f64) -> Result<Mape> {
    check_same(y_true, y_pred, "mape")?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        if math::abs(y) > threshold {
            sum += math::abs(y - p) / math::abs(y);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "mape: every target is masked".into(),
        ));
    }
    Ok(Mape {
        percent: 100.0 * sum / used as f64,
        masked: y_true.len() - used,
    })
}

/// Root mean squared error.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_same(y_true, y_pred, "rmse")?;
    let s: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(math::sqrt(s / y_true.len() as f64))
}

/// Orientation of the error correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `E^T E / T`, sensor by sensor (`N x N`).
    #[default]
    Spatial,
    /// `E E^T / N`, time step by time step (`T x T`).
    Temporal,
}

/// Error correlation matrix of a `T x N` residual matrix.
pub fn ecm(residuals: &Matrix, orientation: Orientation) -> Result<Matrix> {
    let (t, n) = residuals.shape();
    if t < 2 {
        return Err(Error::Validation(alloc::format!(
            "ecm needs at least 2 time steps, got {t}"
        )));
    }
    Ok(match orientation {
        Orientation::Spatial => {
            let mut c = Matrix::zeros(n, n);
            for row in residuals.row_iter() {
                c.add_outer(row, row, 1.0 / t as f64);
            }
            c
        }
        Orientation::Temporal => {
            let mut c = Matrix::zeros(t, t);
            for i in 0..t {
                for j in 0..=i {
                    let v = crate::linalg::dot(residuals.row(i), residuals.row(j)) / n as f64;
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
            c
        }
    })
}

/// Residuals with each column's mean removed.
pub fn demean(residuals: &Matrix) -> Matrix {
    let means = residuals.col_means();
    let mut out = residuals.clone();
    for t in 0..out.rows() {
        for (v, m) in out.row_mut(t).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

/// `(1 / (T - ts)) sum_t e_t e_{t+ts}^T` over mean-removed residuals.
/// Entry `(i, j)` pairs sensor `i` at time `t` with sensor `j` at `t + ts`.
pub fn crosslag_cov(residuals: &Matrix, ts: usize) -> Result<Matrix> {
    let (t, n) = residuals.shape();
    if ts >= t {
        return Err(Error::Validation(alloc::format!(
            "lag {ts} must be below the series length {t}"
        )));
    }
    let e = demean(residuals);
    let mut c = Matrix::zeros(n, n);
    let scale = 1.0 / (t - ts) as f64;
    for s in 0..t - ts {
        c.add_outer(e.row(s), e.row(s + ts), scale);
    }
    Ok(c)
}

/// Sample autocorrelation with its `+/- 2 / sqrt(T)` band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acf {
    /// `acf[k]` for `k = 0..=L`, `acf[0] = 1`.
    pub values: Vec<f64>,
    /// Half-width of the band.
    pub band: f64,
}

impl Acf {
    /// Fraction of lags `1..=L` whose `|acf|` exceeds the band.
    pub fn exceed_fraction(&self) -> f64 {
        let lags = &self.values[1..];
        if lags.is_empty() {
            return 0.0;
        }
        lags.iter().filter(|v| math::abs(**v) > self.band).count() as f64 / lags.len() as f64
    }
}

/// Mean-removed sample autocorrelation up to lag `max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Acf> {
    let t = series.len();
    if max_lag >= t {
        return Err(Error::Validation(alloc::format!(
            "max lag {max_lag} must be below the series length {t}"
        )));
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if c0 == 0.0 {
        return Err(Error::UndefinedMetric("acf of a constant series".into()));
    }
    let values = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                crate::linalg::dot(&centered[..t - k], &centered[k..]) / c0
            }
        })
        .collect();
    Ok(Acf {
        values,
        band: 2.0 / math::sqrt(t as f64),
    })
}

/// `norm(offdiag(A)) / norm(A)` (Frobenius); 0 for the zero matrix.
pub fn offdiag_energy(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Validation(
            "offdiag_energy needs a square matrix".into(),
        ));
    }
    let total = m.frobenius();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut off = m.clone();
    for i in 0..m.rows() {
        off[(i, i)] = 0.0;
    }
    Ok(off.frobenius() / total)
}

/// Metrics and diagnostics for one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// MAPE in percent.
    pub mape_percent: f64,
    /// Entries excluded from MAPE.
    pub mape_masked: usize,
    /// RMSE in original units.
    pub rmse: f64,
    /// Spatial ECM `E^T E / T`.
    pub ecm_spatial: Matrix,
    /// Mean of the diagonal of the temporal ECM `E E^T / N`.
    pub ecm_temporal_mean_diag: f64,
    /// Off-diagonal energy of the temporal ECM.
    pub ecm_temporal_offdiag_energy: f64,
    /// Per-sensor ACF (`None` where the residual series is constant).
    pub acf: Vec<Option<Acf>>,
    /// Cross-lag covariance for each requested lag, `(lag, matrix)`.
    pub crosslag: Vec<(usize, Matrix)>,
    /// Off-diagonal energy of `ecm_spatial`.
    pub offdiag_energy: f64,
}

/// Build a [`MetricsReport`] from `T x N` targets and predictions.
pub fn metrics_report(
    y_true: &Matrix,
    y_pred: &Matrix,
    max_lag: usize,
    crosslags: &[usize],
    mape_threshold: f64,
) -> Result<MetricsReport> {
    if y_true.shape() != y_pred.shape() {
        return Err(shape_err("metrics_report", y_true.shape(), y_pred.shape()));
    }
    let m = mape(y_true.as_slice(), y_pred.as_slice(), mape_threshold)?;
    let r = rmse(y_true.as_slice(), y_pred.as_slice())?;
    let resid = y_true.sub(y_pred)?;
    let spatial = ecm(&resid, Orientation::Spatial)?;
    let temporal = ecm(&resid, Orientation::Temporal)?;
    let t = resid.rows();
    let lag = max_lag.min(t.saturating_sub(1));
    let acfs = (0..resid.cols())
        .map(|j| acf(&resid.col(j), lag).ok())
        .collect();
    let crosslag = crosslags
        .iter()
        .filter(|&&ts| ts < t)
        .map(|&ts| crosslag_cov(&resid, ts).map(|c| (ts, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        mape_percent: m.percent,
        mape_masked: m.masked,
        rmse: r,
        offdiag_energy: offdiag_energy(&spatial)?,
        ecm_temporal_mean_diag: temporal.diag().iter().sum::<f64>() / t as f64,
        ecm_temporal_offdiag_energy: offdiag_energy(&temporal)?,
        ecm_spatial: spatial,
        acf: acfs,
        crosslag,
    })
}

/// Median of a slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median over sensors of the ACF band-exceedance fraction at lags `1..=max_lag`.
pub fn median_acf_exceedance(residuals: &Matrix, max_lag: usize) -> Result<f64> {
    let fr = (0..residuals.cols())
        .map(|j| acf(&residuals.col(j), max_lag).map(|a| a.exceed_fraction()))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&fr))
}
