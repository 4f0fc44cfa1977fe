use serde::{Deserialize, Serialize};

use crate::data::ProtocolRecording;
use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::profile::ParticipantProfile;
use super::protocol::WorkRateProfile;

/// First-order response of one signal to work rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalKinetics {
    pub gain: f64,
    pub intercept: f64,
    pub tau_on_s: f64,
    pub tau_off_s: f64,
    pub noise_sd: f64,
    /// Optional saturation level of the steady state and the state itself.
    pub ceiling: Option<f64>,
}

impl SignalKinetics {
    pub fn steady_state(&self, work_rate_w: f64) -> f64 {
        let y = self.intercept + self.gain * work_rate_w;
        match self.ceiling {
            Some(c) => y.min(c),
            None => y,
        }
    }

    /// Exact solution of dY/dt = (Yss − Y)/tau over one second with the work
    /// rate held constant.
    pub fn step(&self, y: f64, work_rate_w: f64) -> f64 {
        let target = self.steady_state(work_rate_w);
        let tau = if target > y { self.tau_on_s } else { self.tau_off_s };
        target + (y - target) * (-1.0 / tau).exp()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let finite = [self.gain, self.intercept, self.tau_on_s, self.tau_off_s, self.noise_sd]
            .iter()
            .chain(self.ceiling.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(format!("{} kinetics contain non-finite values", name)));
        }
        if self.tau_on_s <= 0.0 || self.tau_off_s <= 0.0 {
            return Err(Error::InvalidArgument(format!("{} time constants must be positive", name)));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidArgument(format!("{} noise SD must be non-negative", name)));
        }
        Ok(())
    }
}

/// Closed-form response to a single step from `y0` towards `target`.
pub fn step_response(y0: f64, target: f64, tau_s: f64, t_s: f64) -> f64 {
    target + (y0 - target) * (-t_s / tau_s).exp()
}

/// Population-level simulator settings from which per-participant kinetics
/// are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub vo2_gain_ml_min_per_w: f64,
    /// VO2 intercept of the steady-state line, per kg of body mass.
    pub vo2_intercept_ml_min_per_kg: f64,
    pub vo2_tau_s: (f64, f64),
    pub hr_tau_s: (f64, f64),
    pub ve_tau_s: (f64, f64),
    pub bf_tau_s: (f64, f64),
    /// Litres of ventilation per ml of oxygen uptake.
    pub ve_per_vo2: f64,
    pub bf_rest_brpm: f64,
    pub bf_peak_brpm: f64,
    pub vo2_noise_sd: f64,
    pub hr_noise_sd: f64,
    pub ve_noise_sd: f64,
    pub bf_noise_sd: f64,
    pub noise: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            vo2_gain_ml_min_per_w: 10.0,
            vo2_intercept_ml_min_per_kg: 9.0,
            vo2_tau_s: (30.0, 35.0),
            hr_tau_s: (40.0, 60.0),
            ve_tau_s: (45.0, 70.0),
            bf_tau_s: (40.0, 60.0),
            ve_per_vo2: 0.025,
            bf_rest_brpm: 14.0,
            bf_peak_brpm: 40.0,
            vo2_noise_sd: 40.0,
            hr_noise_sd: 1.5,
            ve_noise_sd: 1.0,
            bf_noise_sd: 1.0,
            noise: true,
        }
    }
}

impl SimSettings {
    pub fn noiseless() -> Self {
        Self { noise: false, ..Self::default() }
    }

    pub fn vo2_intercept(&self, mass_kg: f64) -> f64 {
        self.vo2_intercept_ml_min_per_kg * mass_kg
    }

    /// Work rate whose steady-state VO2 equals `vo2`.
    pub fn work_rate_for_vo2(&self, vo2_ml_min: f64, mass_kg: f64) -> f64 {
        (vo2_ml_min - self.vo2_intercept(mass_kg)) / self.vo2_gain_ml_min_per_w
    }

    pub fn validate(&self) -> Result<()> {
        let taus = [self.vo2_tau_s, self.hr_tau_s, self.ve_tau_s, self.bf_tau_s];
        if taus.iter().any(|(a, b)| !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0)) {
            return Err(Error::Config("simulator time constants must be finite and positive".into()));
        }
        let rest = [
            self.vo2_gain_ml_min_per_w,
            self.vo2_intercept_ml_min_per_kg,
            self.ve_per_vo2,
            self.bf_rest_brpm,
            self.bf_peak_brpm,
            self.vo2_noise_sd,
            self.hr_noise_sd,
            self.ve_noise_sd,
            self.bf_noise_sd,
        ];
        if rest.iter().any(|v| !v.is_finite() || *v < 0.0) || self.vo2_gain_ml_min_per_w == 0.0 {
            return Err(Error::Config("simulator gains and noise levels must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsParams {
    pub vo2: SignalKinetics,
    pub hr: SignalKinetics,
    pub ve: SignalKinetics,
    pub bf: SignalKinetics,
}

impl KineticsParams {
    /// Kinetics for one participant. HR rises linearly with VO2 from rest to
    /// hr_max at VO2peak; VE is proportional to VO2; BF rises linearly from its
    /// resting value to its peak at the peak work rate.
    pub fn for_profile(profile: &ParticipantProfile, settings: &SimSettings) -> Result<Self> {
        profile.validate()?;
        settings.validate()?;
        let noise = |sd: f64| if settings.noise { sd } else { 0.0 };
        let vo2_gain = settings.vo2_gain_ml_min_per_w;
        let vo2_int = settings.vo2_intercept(profile.mass_kg);
        let vo2_rest = profile.resting_vo2_ml_min();
        let hr_per_vo2 = (profile.hr_max_bpm - profile.hr_rest_bpm) / (profile.vo2peak_ml_min - vo2_rest);
        let wr_peak = profile.wr_peak_w();
        let params = Self {
            vo2: SignalKinetics {
                gain: vo2_gain,
                intercept: vo2_int,
                tau_on_s: settings.vo2_tau_s.0,
                tau_off_s: settings.vo2_tau_s.1,
                noise_sd: noise(settings.vo2_noise_sd),
                ceiling: None,
            },
            hr: SignalKinetics {
                gain: hr_per_vo2 * vo2_gain,
                intercept: profile.hr_rest_bpm + hr_per_vo2 * (vo2_int - vo2_rest),
                tau_on_s: settings.hr_tau_s.0,
                tau_off_s: settings.hr_tau_s.1,
                noise_sd: noise(settings.hr_noise_sd),
                ceiling: Some(profile.hr_max_bpm),
            },
            ve: SignalKinetics {
                gain: settings.ve_per_vo2 * vo2_gain,
                intercept: settings.ve_per_vo2 * vo2_int,
                tau_on_s: settings.ve_tau_s.0,
                tau_off_s: settings.ve_tau_s.1,
                noise_sd: noise(settings.ve_noise_sd),
                ceiling: None,
            },
            bf: SignalKinetics {
                gain: (settings.bf_peak_brpm - settings.bf_rest_brpm) / wr_peak,
                intercept: settings.bf_rest_brpm,
                tau_on_s: settings.bf_tau_s.0,
                tau_off_s: settings.bf_tau_s.1,
                noise_sd: noise(settings.bf_noise_sd),
                ceiling: None,
            },
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.vo2.validate("VO2")?;
        self.hr.validate("HR")?;
        self.ve.validate("VE")?;
        self.bf.validate("BF")
    }
}

/// Noise-free state trajectories of (VO2, HR, VE, BF), starting in
/// equilibrium with the profile's baseline work rate. Entry t is the state at
/// second t; the work rate of second t drives the update to t + 1.
pub fn latent_trajectories(wr: &WorkRateProfile, params: &KineticsParams) -> [Vec<f64>; 4] {
    let signals = [&params.vo2, &params.hr, &params.ve, &params.bf];
    signals.map(|k| {
        let mut y = k.steady_state(wr.baseline_w);
        let mut out = Vec::with_capacity(wr.len());
        for &w in &wr.work_rate_w {
            out.push(y);
            y = k.step(y, w);
        }
        out
    })
}

pub fn simulate_responses(
    wr: &WorkRateProfile,
    profile: &ParticipantProfile,
    params: &KineticsParams,
    rng: &mut RngStream,
) -> Result<ProtocolRecording> {
    profile.validate()?;
    params.validate()?;
    if wr.is_empty() || !wr.baseline_w.is_finite() || wr.work_rate_w.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("work-rate profile must be non-empty, finite and non-negative".into()));
    }
    let [vo2, hr, ve, bf] = latent_trajectories(wr, params);
    let hr_range = profile.hr_max_bpm - profile.hr_rest_bpm;
    let hr_hi = profile.hr_max_bpm + 0.05 * hr_range;
    let mut rec = ProtocolRecording::empty(profile.participant_id.clone(), wr.kind);
    for t in 0..wr.len() {
        let noise: [f64; 4] = std::array::from_fn(|_| rng.normal());
        let vo2_m = (vo2[t] + params.vo2.noise_sd * noise[0]).max(0.0);
        let hr_m = (hr[t] + params.hr.noise_sd * noise[1]).clamp(profile.hr_rest_bpm, hr_hi);
        let ve_m = (ve[t] + params.ve.noise_sd * noise[2]).max(0.0);
        let bf_m = (bf[t] + params.bf.noise_sd * noise[3]).max(0.0);
        let hrr = (hr_m - profile.hr_rest_bpm) / hr_range;
        rec.push_row([t as f64, wr.work_rate_w[t], hr_m, hrr, bf_m, ve_m, vo2_m]);
    }
    rec.validate()?;
    Ok(rec)
}
