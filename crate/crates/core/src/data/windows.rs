use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::recording::ProtocolKind;
use super::scaler::StandardizedRecording;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowProvenance<'a> {
    pub participant_id: &'a str,
    pub kind: ProtocolKind,
    pub end_time_s: f64,
}

/// Sliding windows of length T over standardized recordings. Windows are
/// stored as (recording, end row) pairs and read as contiguous slices of the
/// recording's row-major feature matrix, so no data is duplicated.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    window_len: usize,
    n_features: usize,
    recordings: Vec<StandardizedRecording>,
    index: Vec<(usize, usize)>,
}

impl WindowDataset {
    /// Every stride-1 window of every recording; window i of a recording
    /// covers rows [i, i + T) and is labelled with the target at row i + T − 1.
    pub fn new(recordings: Vec<StandardizedRecording>, window_len: usize) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        let n_features = recordings.first().map_or(0, |r| r.n_features);
        let mut index = Vec::new();
        for (ri, rec) in recordings.iter().enumerate() {
            if rec.n_features != n_features {
                return Err(Error::Data("recordings disagree on the number of features".into()));
            }
            if rec.len() < window_len {
                return Err(Error::Data(format!(
                    "{} {}: length {} shorter than window {}",
                    rec.participant_id,
                    rec.kind,
                    rec.len(),
                    window_len
                )));
            }
            index.extend((window_len - 1..rec.len()).map(|end| (ri, end)));
        }
        Ok(Self { window_len, n_features, recordings, index })
    }

    /// Keep every `stride`-th window of each recording, starting with the first.
    pub fn strided(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        let t = self.window_len;
        self.index.retain(|&(_, end)| (end + 1 - t).is_multiple_of(stride));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn recordings(&self) -> &[StandardizedRecording] {
        &self.recordings
    }

    /// (recording index, end row) of every window, grouped by recording.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.index
    }

    /// T × F row-major slice of window `i`.
    pub fn window(&self, i: usize) -> &[f64] {
        let (r, end) = self.index[i];
        let f = self.n_features;
        &self.recordings[r].features[(end + 1 - self.window_len) * f..(end + 1) * f]
    }

    pub fn target(&self, i: usize) -> f64 {
        let (r, end) = self.index[i];
        self.recordings[r].target[end]
    }

    pub fn provenance(&self, i: usize) -> WindowProvenance<'_> {
        let (r, end) = self.index[i];
        let rec = &self.recordings[r];
        WindowProvenance {
            participant_id: &rec.participant_id,
            kind: rec.kind,
            end_time_s: rec.start_time_s + end as f64,
        }
    }

    pub fn participants(&self) -> BTreeSet<&str> {
        self.recordings.iter().map(|r| r.participant_id.as_str()).collect()
    }

    /// Inputs [B × T × F] and targets [B × 1] for the given window indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.window_len * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!("window index {} out of range", i)));
            }
            inputs.extend_from_slice(self.window(i));
            targets.push(self.target(i));
        }
        Ok((
            Tensor::new(&[indices.len(), self.window_len, self.n_features], inputs)?,
            Tensor::new(&[indices.len(), 1], targets)?,
        ))
    }
}

/// Windows of a single recording.
pub fn make_windows(recording: &StandardizedRecording, window_len: usize) -> Result<WindowDataset> {
    WindowDataset::new(vec![recording.clone()], window_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, len: usize) -> StandardizedRecording {
        StandardizedRecording {
            participant_id: id.into(),
            kind: ProtocolKind::VtHigh,
            start_time_s: 0.0,
            n_features: 2,
            features: (0..len * 2).map(|v| v as f64).collect(),
            target: (0..len).map(|v| 1000.0 + v as f64).collect(),
        }
    }

    #[test]
    fn window_count_law() {
        assert_eq!(make_windows(&rec("a", 5), 5).unwrap().len(), 1);
        let ds = make_windows(&rec("a", 1110), 218).unwrap();
        assert_eq!(ds.len(), 893);
        let ends: Vec<f64> = (0..ds.len()).map(|i| ds.provenance(i).end_time_s).collect();
        assert_eq!(ends, (217..1110).map(|t| t as f64).collect::<Vec<_>>());
        assert!(make_windows(&rec("a", 4), 5).is_err());
    }

    #[test]
    fn windows_and_targets() {
        let ds = make_windows(&rec("a", 10), 3).unwrap();
        assert_eq!(ds.window(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ds.target(0), 1002.0);
        assert_eq!(ds.window(7), &[14.0, 15.0, 16.0, 17.0, 18.0, 19.0]);
        let (x, y) = ds.batch(&[7, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 3, 2]);
        assert_eq!(y.data(), &[1009.0, 1002.0]);
    }

    #[test]
    fn striding() {
        let ds = WindowDataset::new(vec![rec("a", 10), rec("b", 7)], 3).unwrap();
        assert_eq!(ds.len(), 8 + 5);
        let s = ds.strided(3).unwrap();
        let ends: Vec<(&str, f64)> =
            (0..s.len()).map(|i| (s.provenance(i).participant_id, s.provenance(i).end_time_s)).collect();
        assert_eq!(ends, vec![("a", 2.0), ("a", 5.0), ("a", 8.0), ("b", 2.0), ("b", 5.0)]);
    }
}
