use crate::data::{ProtocolKind, ProtocolRecording};
use crate::error::{Error, Result};

use super::predict::ProtocolPrediction;

pub const VO2PEAK_WINDOW_S: usize = 20;

/// Highest 20-sample moving average.
pub fn vo2peak(series: &[f64]) -> Result<f64> {
    if series.len() < VO2PEAK_WINDOW_S {
        return Err(Error::InvalidArgument(format!(
            "VO2peak needs at least {} samples, got {}",
            VO2PEAK_WINDOW_S,
            series.len()
        )));
    }
    Ok(series
        .windows(VO2PEAK_WINDOW_S)
        .map(|w| w.iter().sum::<f64>() / VO2PEAK_WINDOW_S as f64)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrtOptions {
    /// Length of the pre-onset baseline averaged for the horizontal line.
    pub baseline_s: usize,
    /// Ramp data before onset + fit_start_s is left out of the linear fit,
    /// so the initial exponential curvature does not bend the line.
    pub fit_start_s: usize,
    /// Ramp samples at or above this VO2 (the ventilatory threshold) are
    /// excluded; `None` uses the whole ramp.
    pub upper_vo2: Option<f64>,
    /// Minimum t statistic of the ramp slope.
    pub min_slope_t: f64,
}

impl Default for MrtOptions {
    fn default() -> Self {
        Self { baseline_s: 120, fit_start_s: 90, upper_vo2: None, min_slope_t: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrtFit {
    pub mrt_s: f64,
    pub baseline_vo2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub onset_s: f64,
}

/// Mean response time of a ramp test: the time from ramp onset to where the
/// line fitted to the sub-threshold ramp VO2 crosses the baseline mean.
/// Onset is the last second at the initial work rate, where the linear
/// increase starts.
pub fn mean_response_time(ramp: &ProtocolRecording, opts: &MrtOptions) -> Result<MrtFit> {
    let wr = &ramp.work_rate_w;
    let onset = wr
        .iter()
        .position(|&w| w > wr[0])
        .ok_or_else(|| Error::Data("ramp work rate never rises above its baseline".into()))?
        - 1;
    if onset < opts.baseline_s {
        return Err(Error::Data(format!("only {} s of baseline before the ramp, need {}", onset, opts.baseline_s)));
    }
    let vo2 = &ramp.vo2_mlpm;
    let baseline = vo2[onset - opts.baseline_s..onset].iter().sum::<f64>() / opts.baseline_s as f64;
    let end = match opts.upper_vo2 {
        Some(limit) => onset + vo2[onset..].iter().position(|&v| v >= limit).unwrap_or(vo2.len() - onset),
        None => vo2.len(),
    };
    if end - onset < 120 {
        return Err(Error::Data(format!("only {} s of sub-threshold ramp data, need 120", end - onset)));
    }
    let start = onset + opts.fit_start_s;
    if end < start + 10 {
        return Err(Error::Data("too few ramp samples left for the linear fit".into()));
    }
    let t = &ramp.time_s[start..end];
    let y = &vo2[start..end];
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - mt) * (x - mt)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - mt) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let sse: f64 = t.iter().zip(y).map(|(x, v)| (v - intercept - slope * x).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    let significant = slope > 0.0 && (se == 0.0 || slope / se > opts.min_slope_t);
    if !significant {
        return Err(Error::Data(format!("ramp slope {:.4} ml/min/s is not significantly positive", slope)));
    }
    let onset_s = ramp.time_s[onset];
    let cross = (baseline - intercept) / slope;
    Ok(MrtFit { mrt_s: cross - onset_s, baseline_vo2: baseline, slope, intercept, onset_s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when fewer than two values.
    pub sd: f64,
}

impl ErrorStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { n, mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { n, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    /// Signed per-second error (predicted − true) for each protocol kind present.
    pub per_kind: Vec<(ProtocolKind, ErrorStats)>,
    pub combined: ErrorStats,
    /// Per-participant VO2peak error over ramp predictions, if any.
    pub vo2peak: Option<ErrorStats>,
}

pub fn error_table(predictions: &[ProtocolPrediction]) -> Result<ErrorTable> {
    let errors = |p: &ProtocolPrediction| p.vo2_pred.iter().zip(&p.vo2_true).map(|(a, b)| a - b).collect::<Vec<_>>();
    let mut per_kind = Vec::new();
    for kind in ProtocolKind::ALL {
        let e: Vec<f64> = predictions.iter().filter(|p| p.kind == kind).flat_map(errors).collect();
        if predictions.iter().any(|p| p.kind == kind) {
            per_kind.push((kind, ErrorStats::of(&e)));
        }
    }
    let all: Vec<f64> = predictions.iter().flat_map(errors).collect();
    let peak_errors = predictions
        .iter()
        .filter(|p| p.kind == ProtocolKind::Ramp && p.len() >= VO2PEAK_WINDOW_S)
        .map(|p| Ok(vo2peak(&p.vo2_pred)? - vo2peak(&p.vo2_true)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ErrorTable {
        per_kind,
        combined: ErrorStats::of(&all),
        vo2peak: (!peak_errors.is_empty()).then(|| ErrorStats::of(&peak_errors)),
    })
}
