//! Exercise protocols and a first-order cardiorespiratory response simulator
//! that produces synthetic recordings.

mod cohort;
mod kinetics;
mod prbs;
mod profile;
mod protocol;

pub use cohort::{
    generate_cohort, generate_cohort_with, participant_id, sample_profile, simulate_member, CohortMember,
};
pub use kinetics::{
    latent_trajectories, simulate_responses, step_response, KineticsParams, SignalKinetics, SimSettings,
};
pub use prbs::{prbs15, Lfsr4, DEFAULT_SEED as PRBS_DEFAULT_SEED, PRBS_LENGTH};
pub use profile::{ParticipantProfile, ML_PER_KG_PER_MET};
pub use protocol::{
    build_protocol, prbs_levels, prbs_session_bits, ramp_work_rate, WorkRateProfile, LOW_WR_W, PRBS_DURATION_S,
    RAMP_BASELINE_S, UNIT_S, WARMUP_UNITS,
};
