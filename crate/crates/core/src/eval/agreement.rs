use crate::error::{Error, Result};

pub const LOA_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlandAltmanReport {
    pub bias: f64,
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub within_sd: f64,
    pub between_sd: f64,
    pub n_pairs: usize,
    pub n_participants: usize,
    /// False when the repeated-measures analysis was not possible (one
    /// participant) and the standard method was used instead.
    pub repeated_measures: bool,
}

impl BlandAltmanReport {
    fn from_parts(
        bias: f64,
        within_var: f64,
        between_var: f64,
        n_pairs: usize,
        n_participants: usize,
        rm: bool,
    ) -> Self {
        let sd = (within_var + between_var).sqrt();
        Self {
            bias,
            sd,
            loa_low: bias - LOA_Z * sd,
            loa_high: bias + LOA_Z * sd,
            within_sd: within_var.sqrt(),
            between_sd: between_var.sqrt(),
            n_pairs,
            n_participants,
            repeated_measures: rm,
        }
    }
}

/// Classic Bland–Altman on independent (true, predicted) pairs: bias is the
/// mean difference (predicted − true), SD the sample SD of the differences.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltmanReport> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("Bland-Altman needs at least two pairs".into()));
    }
    let d: Vec<f64> = pairs.iter().map(|(t, p)| p - t).collect();
    let n = d.len() as f64;
    let bias = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - bias) * (x - bias)).sum::<f64>() / (n - 1.0);
    Ok(BlandAltmanReport::from_parts(bias, var, 0.0, d.len(), 1, false))
}

/// Repeated-measures Bland–Altman with one-way variance components.
///
/// With differences d_ij (predicted − true) for participant i of m
/// participants, n_i pairs each, N pairs total:
///
/// ```text
/// bias  = mean of all d_ij
/// SSW   = Σ_i Σ_j (d_ij − d̄_i)²        σ²_w = SSW / (N − m)
/// SSB   = Σ_i n_i (d̄_i − bias)²
/// σ²_b  = max(0, SSB / N − σ²_w · m / N)
/// SD    = √(σ²_b + σ²_w),   LoA = bias ± 1.96·SD
/// ```
///
/// A single participant falls back to [`bland_altman`] with
/// `repeated_measures = false`.
pub fn bland_altman_rm(groups: &[Vec<(f64, f64)>]) -> Result<BlandAltmanReport> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("Bland-Altman needs at least one participant".into()));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "every participant needs at least two pairs, found one with {}",
            g.len()
        )));
    }
    if groups.len() == 1 {
        return bland_altman(&groups[0]);
    }
    let diffs: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|(t, p)| p - t).collect()).collect();
    let m = diffs.len() as f64;
    let total: usize = diffs.iter().map(Vec::len).sum();
    let n = total as f64;
    let bias = diffs.iter().flatten().sum::<f64>() / n;
    let mut ssw = 0.0;
    let mut ssb = 0.0;
    for d in &diffs {
        let ni = d.len() as f64;
        let mi = d.iter().sum::<f64>() / ni;
        ssw += d.iter().map(|x| (x - mi) * (x - mi)).sum::<f64>();
        ssb += ni * (mi - bias) * (mi - bias);
    }
    let within = ssw / (n - m);
    let between = (ssb / n - within * m / n).max(0.0);
    Ok(BlandAltmanReport::from_parts(bias, within, between, total, diffs.len(), true))
}
