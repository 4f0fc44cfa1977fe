//! Agreement statistics, error tables, VO2peak, mean response time and
//! activity-intensity classification.

mod agreement;
mod metrics;
mod mets;
mod predict;

pub use agreement::{bland_altman, bland_altman_rm, BlandAltmanReport, LOA_Z};
pub use metrics::{
    error_table, mean_response_time, vo2peak, ErrorStats, ErrorTable, MrtFit, MrtOptions, VO2PEAK_WINDOW_S,
};
pub use mets::{
    classify_mets, confusion_by_second, vo2_to_mets, ConfusionMatrix3, MetsCategory, MODERATE_METS, VIGOROUS_METS,
};
pub use predict::{predict_protocol, ProtocolPrediction};
