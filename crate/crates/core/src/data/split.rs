use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Participant-level partition; no participant appears in more than one part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl ParticipantSplit {
    pub fn role(&self, participant: &str) -> Option<&'static str> {
        let has = |v: &[String]| v.iter().any(|p| p == participant);
        if has(&self.train) {
            Some("train")
        } else if has(&self.val) {
            Some("val")
        } else if has(&self.test) {
            Some("test")
        } else {
            None
        }
    }
}

/// Seeded shuffle of the distinct participant IDs, then a 50/25/25 cut
/// (validation and test sizes rounded, at least one each). Each part is
/// returned sorted.
pub fn split_by_participant(participants: &[String], seed: u64) -> Result<ParticipantSplit> {
    let mut ids: Vec<String> = participants.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = ids.len();
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 participants to split, got {}", n)));
    }
    RngStream::new(seed).shuffle(&mut ids);
    let n_val = ((n as f64) * 0.25).round().max(1.0) as usize;
    let n_test = ((n as f64) * 0.25).round().max(1.0) as usize;
    let n_train = n - n_val - n_test;
    let mut test = ids.split_off(n_train + n_val);
    let mut val = ids.split_off(n_train);
    let mut train = ids;
    train.sort();
    val.sort();
    test.sort();
    Ok(ParticipantSplit { train, val, test })
}
