use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio converting body mass (kg) to resting VO2 (ml/min): one MET.
pub const ML_PER_KG_PER_MET: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub participant_id: String,
    pub mass_kg: f64,
    pub hr_rest_bpm: f64,
    pub hr_max_bpm: f64,
    pub vo2peak_ml_min: f64,
    pub vt_vo2_ml_min: f64,
    pub wr_90vt_w: f64,
    pub wr_vt_w: f64,
    pub wr_d50_w: f64,
}

impl ParticipantProfile {
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.mass_kg,
            self.hr_rest_bpm,
            self.hr_max_bpm,
            self.vo2peak_ml_min,
            self.vt_vo2_ml_min,
            self.wr_90vt_w,
            self.wr_vt_w,
            self.wr_d50_w,
        ];
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("profile {}: {}", self.participant_id, msg)));
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return bad("all quantities must be finite and positive");
        }
        if self.hr_max_bpm <= self.hr_rest_bpm {
            return bad("hr_max must exceed hr_rest");
        }
        if self.vt_vo2_ml_min >= self.vo2peak_ml_min {
            return bad("VT VO2 must be below VO2peak");
        }
        if !(self.wr_90vt_w < self.wr_vt_w && self.wr_vt_w < self.wr_d50_w) {
            return bad("work-rate anchors must satisfy wr_90vt < wr_vt < wr_d50");
        }
        Ok(())
    }

    /// Peak work rate implied by the anchors: the Δ50 work rate is the
    /// midpoint of VT and peak on the linear VO2/WR relation.
    pub fn wr_peak_w(&self) -> f64 {
        2.0 * self.wr_d50_w - self.wr_vt_w
    }

    pub fn resting_vo2_ml_min(&self) -> f64 {
        ML_PER_KG_PER_MET * self.mass_kg
    }
}

#[cfg(test)]
pub(crate) fn test_profile() -> ParticipantProfile {
    ParticipantProfile {
        participant_id: "T01".into(),
        mass_kg: 70.0,
        hr_rest_bpm: 60.0,
        hr_max_bpm: 190.0,
        vo2peak_ml_min: 2940.0,
        vt_vo2_ml_min: 1764.0,
        wr_90vt_w: 101.74,
        wr_vt_w: 113.4,
        wr_d50_w: 172.2,
    }
}
