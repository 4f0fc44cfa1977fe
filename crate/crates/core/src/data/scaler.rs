use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::recording::{ProtocolKind, ProtocolRecording};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    WorkRate,
    HeartRate,
    HeartRateReserve,
    BreathingFrequency,
    MinuteVentilation,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::WorkRate,
        Feature::HeartRate,
        Feature::HeartRateReserve,
        Feature::BreathingFrequency,
        Feature::MinuteVentilation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::WorkRate => "wr",
            Feature::HeartRate => "hr",
            Feature::HeartRateReserve => "hrr",
            Feature::BreathingFrequency => "bf",
            Feature::MinuteVentilation => "ve",
        }
    }

    pub fn column(self, rec: &ProtocolRecording) -> &[f64] {
        match self {
            Feature::WorkRate => &rec.work_rate_w,
            Feature::HeartRate => &rec.hr_bpm,
            Feature::HeartRateReserve => &rec.hrr_frac,
            Feature::BreathingFrequency => &rec.bf_brpm,
            Feature::MinuteVentilation => &rec.ve_lpm,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown feature {:?}", s)))
    }
}

/// Ordered list of model input channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet(Vec<Feature>);

impl Default for FeatureSet {
    fn default() -> Self {
        Self(Feature::ALL.to_vec())
    }
}

impl FeatureSet {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config("feature set is empty".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::Config(format!("feature {} listed twice", f)));
            }
        }
        Ok(Self(features))
    }

    pub fn hr_only() -> Self {
        Self(vec![Feature::HeartRate])
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Comma-separated names, e.g. `wr,hr,hrr,bf,ve`.
    pub fn to_list(&self) -> String {
        self.0.iter().map(|f| f.name()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_list(s: &str) -> Result<Self> {
        Self::new(s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZStats {
    pub mean: f64,
    pub std: f64,
}

impl ZStats {
    /// Population mean and standard deviation.
    pub fn fit<'a>(name: &str, values: impl Iterator<Item = &'a f64> + Clone) -> Result<Self> {
        let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        if n == 0 {
            return Err(Error::Data(format!("no training values for {}", name)));
        }
        let mean = sum / n as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::Data(format!("{} has zero variance in the training data", name)));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Training-set statistics. HR, HRR, BF, VE and the VO2 target are z-scored;
/// WR is min-max scaled without clipping, so unseen work rates extrapolate
/// linearly outside [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub wr_min: f64,
    pub wr_max: f64,
    pub hr: ZStats,
    pub hrr: ZStats,
    pub bf: ZStats,
    pub ve: ZStats,
    pub vo2: ZStats,
}

impl FeatureScaler {
    pub fn fit(train: &[&ProtocolRecording]) -> Result<Self> {
        if train.iter().all(|r| r.is_empty()) {
            return Err(Error::Data("cannot fit a scaler on an empty training set".into()));
        }
        let col = |f: fn(&ProtocolRecording) -> &Vec<f64>| train.iter().flat_map(move |r| f(r).iter());
        let wr_min = col(|r| &r.work_rate_w).copied().fold(f64::INFINITY, f64::min);
        let wr_max = col(|r| &r.work_rate_w).copied().fold(f64::NEG_INFINITY, f64::max);
        if !(wr_max > wr_min) {
            return Err(Error::Data("work rate is constant across the training data".into()));
        }
        Ok(Self {
            wr_min,
            wr_max,
            hr: ZStats::fit("hr", col(|r| &r.hr_bpm))?,
            hrr: ZStats::fit("hrr", col(|r| &r.hrr_frac))?,
            bf: ZStats::fit("bf", col(|r| &r.bf_brpm))?,
            ve: ZStats::fit("ve", col(|r| &r.ve_lpm))?,
            vo2: ZStats::fit("vo2", col(|r| &r.vo2_mlpm))?,
        })
    }

    pub fn scale(&self, feature: Feature, v: f64) -> f64 {
        match feature {
            Feature::WorkRate => (v - self.wr_min) / (self.wr_max - self.wr_min),
            Feature::HeartRate => self.hr.apply(v),
            Feature::HeartRateReserve => self.hrr.apply(v),
            Feature::BreathingFrequency => self.bf.apply(v),
            Feature::MinuteVentilation => self.ve.apply(v),
        }
    }

    pub fn unscale(&self, feature: Feature, z: f64) -> f64 {
        match feature {
            Feature::WorkRate => z * (self.wr_max - self.wr_min) + self.wr_min,
            Feature::HeartRate => self.hr.invert(z),
            Feature::HeartRateReserve => self.hrr.invert(z),
            Feature::BreathingFrequency => self.bf.invert(z),
            Feature::MinuteVentilation => self.ve.invert(z),
        }
    }

    pub fn scale_target(&self, vo2: f64) -> f64 {
        self.vo2.apply(vo2)
    }

    pub fn unscale_target(&self, z: f64) -> f64 {
        self.vo2.invert(z)
    }

    pub fn standardize(&self, rec: &ProtocolRecording, features: &FeatureSet) -> StandardizedRecording {
        let n = rec.len();
        let f = features.len();
        let mut data = Vec::with_capacity(n * f);
        for t in 0..n {
            for &feat in features.features() {
                data.push(self.scale(feat, feat.column(rec)[t]));
            }
        }
        StandardizedRecording {
            participant_id: rec.participant_id.clone(),
            kind: rec.kind,
            start_time_s: rec.time_s.first().copied().unwrap_or(0.0),
            n_features: f,
            features: data,
            target: rec.vo2_mlpm.iter().map(|&v| self.scale_target(v)).collect(),
        }
    }
}

/// Model-ready rows of one recording: `features` is row-major L × F.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedRecording {
    pub participant_id: String,
    pub kind: ProtocolKind,
    pub start_time_s: f64,
    pub n_features: usize,
    pub features: Vec<f64>,
    pub target: Vec<f64>,
}

impl StandardizedRecording {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * self.n_features..(t + 1) * self.n_features]
    }
}
