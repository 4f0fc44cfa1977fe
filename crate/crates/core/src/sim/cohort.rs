use rayon::prelude::*;

use crate::data::{ProtocolKind, ProtocolRecording};
use crate::error::{Error, Result};
use crate::rng::{tag_of, RngStream};

use super::kinetics::{simulate_responses, KineticsParams, SimSettings};
use super::profile::ParticipantProfile;
use super::protocol::{build_protocol, LOW_WR_W};

#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub profile: ParticipantProfile,
    /// One recording per protocol kind, in `ProtocolKind::ALL` order.
    pub recordings: Vec<ProtocolRecording>,
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

fn clamped_normal(rng: &mut RngStream, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    (mean + sd * rng.normal()).clamp(lo, hi)
}

pub fn sample_profile(id: String, settings: &SimSettings, rng: &mut RngStream) -> Result<ParticipantProfile> {
    let mass_kg = clamped_normal(rng, 70.0, 11.0, 50.0, 100.0);
    let vo2peak_per_kg = clamped_normal(rng, 42.0, 6.0, 30.0, 60.0);
    let hr_rest_bpm = clamped_normal(rng, 60.0, 5.0, 45.0, 80.0);
    let hr_max_bpm = clamped_normal(rng, 190.0, 6.0, 175.0, 205.0);
    let vt_fraction = rng.uniform_range(0.55, 0.65);

    let vo2peak_ml_min = vo2peak_per_kg * mass_kg;
    let vt_vo2_ml_min = vt_fraction * vo2peak_ml_min;
    let wr_vt_w = settings.work_rate_for_vo2(vt_vo2_ml_min, mass_kg);
    let wr_peak_w = settings.work_rate_for_vo2(vo2peak_ml_min, mass_kg);
    let profile = ParticipantProfile {
        participant_id: id,
        mass_kg,
        hr_rest_bpm,
        hr_max_bpm,
        vo2peak_ml_min,
        vt_vo2_ml_min,
        wr_90vt_w: 0.9 * wr_vt_w,
        wr_vt_w,
        wr_d50_w: 0.5 * (wr_vt_w + wr_peak_w),
    };
    if profile.wr_90vt_w <= LOW_WR_W {
        return Err(Error::Config(format!(
            "participant {}: 90% VT work rate {:.1} W is not above the {} W low level; check the VO2 intercept",
            profile.participant_id, profile.wr_90vt_w, LOW_WR_W
        )));
    }
    profile.validate()?;
    Ok(profile)
}

pub fn simulate_member(
    profile: ParticipantProfile,
    settings: &SimSettings,
    root: &RngStream,
    index: usize,
) -> Result<CohortMember> {
    let params = KineticsParams::for_profile(&profile, settings)?;
    let recordings = ProtocolKind::ALL
        .iter()
        .map(|&kind| {
            let wr = build_protocol(kind, &profile)?;
            let mut rng = root.derive_path(&[tag_of("noise"), index as u64, kind.index() as u64]);
            simulate_responses(&wr, &profile, &params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohortMember { profile, recordings })
}

pub fn generate_cohort(n_participants: usize, seed: u64) -> Result<Vec<CohortMember>> {
    generate_cohort_with(n_participants, seed, &SimSettings::default())
}

/// Each participant draws its profile from the stream (seed, "profile", i) and
/// each recording its noise from (seed, "noise", i, protocol), so results do
/// not depend on evaluation order.
pub fn generate_cohort_with(n_participants: usize, seed: u64, settings: &SimSettings) -> Result<Vec<CohortMember>> {
    if n_participants == 0 {
        return Err(Error::InvalidArgument("cohort needs at least one participant".into()));
    }
    settings.validate()?;
    let root = RngStream::new(seed);
    (0..n_participants)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.derive_path(&[tag_of("profile"), i as u64]);
            let profile = sample_profile(participant_id(i), settings, &mut rng)?;
            simulate_member(profile, settings, &root, i)
        })
        .collect()
}
