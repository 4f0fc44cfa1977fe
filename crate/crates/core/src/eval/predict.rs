use crate::data::{FeatureScaler, FeatureSet, ProtocolKind, ProtocolRecording};
use crate::error::{Error, Result};
use crate::model::TcnModel;
use crate::train::recording_predictions;

/// Per-second predictions for one recording, starting at the first second
/// with a full receptive field (the first RF − 1 seconds are the cold start).
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolPrediction {
    pub participant_id: String,
    pub kind: ProtocolKind,
    pub time_s: Vec<f64>,
    pub vo2_true: Vec<f64>,
    pub vo2_pred: Vec<f64>,
}

impl ProtocolPrediction {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.vo2_true.iter().copied().zip(self.vo2_pred.iter().copied()).collect()
    }
}

pub fn predict_protocol(
    model: &TcnModel,
    recording: &ProtocolRecording,
    scaler: &FeatureScaler,
    features: &FeatureSet,
) -> Result<ProtocolPrediction> {
    let rf = model.receptive_field();
    if features.len() != model.config().input_features {
        return Err(Error::Data(format!(
            "model expects {} features, feature set has {}",
            model.config().input_features,
            features.len()
        )));
    }
    if recording.len() < rf {
        return Err(Error::Data(format!(
            "{} {}: recording of {} s is shorter than the receptive field {}",
            recording.participant_id,
            recording.kind,
            recording.len(),
            rf
        )));
    }
    let std = scaler.standardize(recording, features);
    let z = recording_predictions(model, &std)?;
    let start = rf - 1;
    let vo2_pred: Vec<f64> = z[start..].iter().map(|&v| scaler.unscale_target(v)).collect();
    if vo2_pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction"));
    }
    Ok(ProtocolPrediction {
        participant_id: recording.participant_id.clone(),
        kind: recording.kind,
        time_s: recording.time_s[start..].to_vec(),
        vo2_true: recording.vo2_mlpm[start..].to_vec(),
        vo2_pred,
    })
}
