use crate::data::ProtocolKind;
use crate::error::{Error, Result};

use super::prbs::{prbs15, DEFAULT_SEED, PRBS_LENGTH};
use super::profile::ParticipantProfile;

pub const UNIT_S: usize = 30;
pub const WARMUP_UNITS: usize = 7;
pub const PRBS_REPETITIONS: usize = 2;
pub const PRBS_DURATION_S: usize = (WARMUP_UNITS + PRBS_REPETITIONS * PRBS_LENGTH) * UNIT_S;
pub const LOW_WR_W: f64 = 25.0;
pub const RAMP_BASELINE_S: usize = 240;
pub const RAMP_SLOPE_W_PER_S: f64 = 25.0 / 60.0;

/// 1 Hz work-rate series. `baseline_w` is the work rate the participant is in
/// steady state with just before t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkRateProfile {
    pub kind: ProtocolKind,
    pub work_rate_w: Vec<f64>,
    pub baseline_w: f64,
}

impl WorkRateProfile {
    pub fn len(&self) -> usize {
        self.work_rate_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.work_rate_w.is_empty()
    }

    pub fn time_s(&self) -> Vec<f64> {
        (0..self.len()).map(|t| t as f64).collect()
    }
}

/// (low, high) work rates of a PRBS protocol.
pub fn prbs_levels(kind: ProtocolKind, profile: &ParticipantProfile) -> Result<(f64, f64)> {
    match kind {
        ProtocolKind::LowModerate => Ok((LOW_WR_W, profile.wr_90vt_w)),
        ProtocolKind::LowHigh => Ok((LOW_WR_W, profile.wr_d50_w)),
        ProtocolKind::VtHigh => Ok((profile.wr_vt_w, profile.wr_d50_w)),
        ProtocolKind::Ramp => Err(Error::InvalidArgument("RAMP is not a PRBS protocol".into())),
    }
}

/// Unit-level bit pattern of a full PRBS session: the last seven units of the
/// sequence as warm-up, then two complete repetitions.
pub fn prbs_session_bits() -> Vec<u8> {
    let seq = prbs15(DEFAULT_SEED).expect("default seed is nonzero");
    let mut bits = seq[PRBS_LENGTH - WARMUP_UNITS..].to_vec();
    for _ in 0..PRBS_REPETITIONS {
        bits.extend_from_slice(&seq);
    }
    bits
}

pub fn ramp_work_rate(t: usize) -> f64 {
    if t < RAMP_BASELINE_S {
        LOW_WR_W
    } else {
        LOW_WR_W + RAMP_SLOPE_W_PER_S * (t - RAMP_BASELINE_S) as f64
    }
}

pub fn build_protocol(kind: ProtocolKind, profile: &ParticipantProfile) -> Result<WorkRateProfile> {
    profile.validate()?;
    let work_rate_w: Vec<f64> = match kind {
        ProtocolKind::Ramp => {
            let wr_peak = profile.wr_peak_w();
            if wr_peak <= LOW_WR_W {
                return Err(Error::InvalidArgument(format!(
                    "profile {}: peak work rate {:.1} W does not exceed the {} W baseline",
                    profile.participant_id, wr_peak, LOW_WR_W
                )));
            }
            let ramp_s = ((wr_peak - LOW_WR_W) / RAMP_SLOPE_W_PER_S).floor() as usize;
            (0..=RAMP_BASELINE_S + ramp_s).map(ramp_work_rate).collect()
        }
        _ => {
            let (low, high) = prbs_levels(kind, profile)?;
            prbs_session_bits()
                .into_iter()
                .flat_map(|b| std::iter::repeat_n(if b == 1 { high } else { low }, UNIT_S))
                .collect()
        }
    };
    let baseline_w = work_rate_w[0];
    Ok(WorkRateProfile { kind, work_rate_w, baseline_w })
}
