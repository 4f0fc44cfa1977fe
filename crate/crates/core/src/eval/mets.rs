use std::fmt;

use crate::error::{Error, Result};
use crate::sim::ML_PER_KG_PER_MET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetsCategory {
    Light,
    Moderate,
    Vigorous,
}

impl MetsCategory {
    pub const ALL: [MetsCategory; 3] = [MetsCategory::Light, MetsCategory::Moderate, MetsCategory::Vigorous];

    pub fn label(self) -> &'static str {
        match self {
            MetsCategory::Light => "light",
            MetsCategory::Moderate => "moderate",
            MetsCategory::Vigorous => "vigorous",
        }
    }
}

impl fmt::Display for MetsCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const MODERATE_METS: f64 = 3.0;
pub const VIGOROUS_METS: f64 = 6.0;

pub fn vo2_to_mets(vo2_ml_min: f64, mass_kg: f64) -> Result<f64> {
    if !(mass_kg > 0.0) {
        return Err(Error::InvalidArgument(format!("body mass must be positive, got {}", mass_kg)));
    }
    Ok(vo2_ml_min / mass_kg / ML_PER_KG_PER_MET)
}

/// Light below 3.0 METs, moderate from 3.0 up to 6.0, vigorous from 6.0.
pub fn classify_mets(mets: f64) -> MetsCategory {
    if mets >= VIGOROUS_METS {
        MetsCategory::Vigorous
    } else if mets >= MODERATE_METS {
        MetsCategory::Moderate
    } else {
        MetsCategory::Light
    }
}

/// Counts indexed [true category][predicted category].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix3 {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix3 {
    pub fn add(&mut self, truth: MetsCategory, pred: MetsCategory) {
        self.counts[truth as usize][pred as usize] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix3) {
        for i in 0..3 {
            for j in 0..3 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, truth: MetsCategory) -> u64 {
        self.counts[truth as usize].iter().sum()
    }

    /// Fraction of seconds on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }
}

pub fn confusion_by_second(true_vo2: &[f64], pred_vo2: &[f64], mass_kg: f64) -> Result<ConfusionMatrix3> {
    if true_vo2.len() != pred_vo2.len() {
        return Err(Error::InvalidArgument(format!("series lengths differ: {} vs {}", true_vo2.len(), pred_vo2.len())));
    }
    let mut m = ConfusionMatrix3::default();
    for (&t, &p) in true_vo2.iter().zip(pred_vo2) {
        m.add(classify_mets(vo2_to_mets(t, mass_kg)?), classify_mets(vo2_to_mets(p, mass_kg)?));
    }
    Ok(m)
}
