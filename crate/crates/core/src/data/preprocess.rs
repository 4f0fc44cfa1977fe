//! Signal conditioning applied before windowing: breath-level median
//! filtering, resampling to 1 Hz, device alignment and ventilation calibration.

use crate::error::{Error, Result};

/// Centered running median over up to 5 samples. Near the ends the window
/// shrinks symmetrically (to 3, then 1 samples) so it stays centered, which
/// leaves monotone series unchanged.
pub fn median_filter5(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mut buf = Vec::with_capacity(5);
    (0..n)
        .map(|i| {
            let h = 2.min(i).min(n - 1 - i);
            buf.clear();
            buf.extend_from_slice(&series[i - h..=i + h]);
            buf.sort_by(f64::total_cmp);
            buf[h]
        })
        .collect()
}

/// Linear interpolation onto the integer seconds in [ceil(t0), floor(t_end)].
/// Returns (times, values).
pub fn resample_1hz(timestamps: &[f64], values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if timestamps.len() != values.len() {
        return Err(Error::InvalidArgument("timestamps and values differ in length".into()));
    }
    if timestamps.len() < 2 {
        return Err(Error::InvalidArgument("resampling needs at least two samples".into()));
    }
    if timestamps.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("resample_1hz"));
    }
    for w in timestamps.windows(2) {
        if w[1] == w[0] {
            return Err(Error::InvalidArgument(format!("duplicate timestamp {}", w[0])));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidArgument("timestamps must be strictly increasing".into()));
        }
    }
    let start = timestamps[0].ceil() as i64;
    let end = timestamps[timestamps.len() - 1].floor() as i64;
    let mut times = Vec::new();
    let mut out = Vec::new();
    let mut j = 0;
    for t in start..=end {
        let t = t as f64;
        while j + 2 < timestamps.len() && timestamps[j + 1] < t {
            j += 1;
        }
        let (t0, t1) = (timestamps[j], timestamps[j + 1]);
        let (v0, v1) = (values[j], values[j + 1]);
        let v = if t == t1 { v1 } else { v0 + (v1 - v0) * (t - t0) / (t1 - t0) };
        times.push(t);
        out.push(v);
    }
    Ok((times, out))
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

fn variance_is_zero(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// Lag (in samples) by which `candidate` trails `reference`: a positive lag L
/// means candidate[t + L] lines up with reference[t]. Each lag is scored by
/// the Pearson correlation over the overlapping samples; ties go to the lag
/// closest to zero.
pub fn align_by_xcorr(reference: &[f64], candidate: &[f64], max_lag: usize) -> Result<i64> {
    if reference.len() < 2 * max_lag || candidate.len() < 2 * max_lag || reference.len() < 2 || candidate.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "series of length {} and {} too short for max lag {}",
            reference.len(),
            candidate.len(),
            max_lag
        )));
    }
    if variance_is_zero(reference) || variance_is_zero(candidate) {
        return Err(Error::InvalidArgument("cross-correlation of a constant series is undefined".into()));
    }
    let mut best: Option<(i64, f64)> = None;
    let max_lag = max_lag as i64;
    let lags = std::iter::once(0).chain((1..=max_lag).flat_map(|l| [l, -l]));
    for lag in lags {
        let (r0, c0) = if lag >= 0 { (0, lag as usize) } else { ((-lag) as usize, 0) };
        let n = (reference.len() - r0.min(reference.len())).min(candidate.len() - c0.min(candidate.len()));
        if n < 2 {
            continue;
        }
        if let Some(r) = pearson(&reference[r0..r0 + n], &candidate[c0..c0 + n]) {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((lag, r));
            }
        }
    }
    best.map(|(l, _)| l).ok_or_else(|| Error::InvalidArgument("no lag with a defined correlation".into()))
}

/// Ordinary least-squares fit reference ≈ slope·raw + intercept.
pub fn calibrate_ve(raw: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if raw.len() != reference.len() || raw.len() < 2 {
        return Err(Error::InvalidArgument("calibration needs two equal-length series of at least 2 samples".into()));
    }
    if variance_is_zero(raw) {
        return Err(Error::InvalidArgument("raw ventilation is constant".into()));
    }
    let n = raw.len() as f64;
    let mx = raw.iter().sum::<f64>() / n;
    let my = reference.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in raw.iter().zip(reference) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Heart-rate-reserve fraction (HR − HR_rest)/(HR_max − HR_rest), unclipped.
pub fn compute_hrr(hr: &[f64], hr_rest: f64, hr_max: f64) -> Result<Vec<f64>> {
    if !(hr_max > hr_rest) {
        return Err(Error::InvalidArgument(format!("hr_max {} must exceed hr_rest {}", hr_max, hr_rest)));
    }
    let range = hr_max - hr_rest;
    Ok(hr.iter().map(|h| (h - hr_rest) / range).collect())
}
