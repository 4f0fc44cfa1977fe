//! Recordings, preprocessing, feature scaling, sliding windows and
//! participant-level splits.

mod preprocess;
mod recording;
mod scaler;
mod split;
mod windows;

pub use preprocess::{align_by_xcorr, calibrate_ve, compute_hrr, median_filter5, resample_1hz};
pub use recording::{ProtocolKind, ProtocolRecording, CSV_HEADER, HRR_MAX};
pub use scaler::{Feature, FeatureScaler, FeatureSet, StandardizedRecording, ZStats};
pub use split::{split_by_participant, ParticipantSplit};
pub use windows::{make_windows, WindowDataset, WindowProvenance};
