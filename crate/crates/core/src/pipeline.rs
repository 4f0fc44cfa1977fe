//! End-to-end steps shared by the command-line tool and the test suites:
//! split and scale a cohort, train a model, evaluate it on held-out
//! participants and write the reports.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::RunConfig;
use crate::data::{
    split_by_participant, FeatureScaler, FeatureSet, ParticipantSplit, ProtocolKind, StandardizedRecording,
    WindowDataset,
};
use crate::error::{Error, Result};
use crate::eval::{
    bland_altman, bland_altman_rm, confusion_by_second, error_table, predict_protocol, vo2peak, BlandAltmanReport,
    ConfusionMatrix3, ErrorTable, ProtocolPrediction, VO2PEAK_WINDOW_S,
};
use crate::report;
use crate::sim::CohortMember;
use crate::store::SavedModel;
use crate::train::{train_with_progress, EpochRecord, GridData};

/// Cohort split by participant, scaler fitted on the training participants,
/// and the standardized training and validation recordings.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub features: FeatureSet,
    pub split: ParticipantSplit,
    pub scaler: FeatureScaler,
    pub train: Vec<StandardizedRecording>,
    pub val: Vec<StandardizedRecording>,
}

fn members_in<'a>(members: &'a [CohortMember], ids: &'a [String]) -> impl Iterator<Item = &'a CohortMember> + 'a {
    members.iter().filter(move |m| ids.contains(&m.profile.participant_id))
}

pub fn prepare(members: &[CohortMember], features: &FeatureSet, split_seed: u64) -> Result<PreparedData> {
    let ids: Vec<String> = members.iter().map(|m| m.profile.participant_id.clone()).collect();
    let split = split_by_participant(&ids, split_seed)?;
    let train_recs: Vec<_> = members_in(members, &split.train).flat_map(|m| m.recordings.iter()).collect();
    let scaler = FeatureScaler::fit(&train_recs)?;
    let standardize = |part: &[String]| -> Vec<StandardizedRecording> {
        members_in(members, part).flat_map(|m| m.recordings.iter()).map(|r| scaler.standardize(r, features)).collect()
    };
    Ok(PreparedData {
        features: features.clone(),
        train: standardize(&split.train),
        val: standardize(&split.val),
        split,
        scaler,
    })
}

impl PreparedData {
    pub fn grid_data(&self, train_stride: usize, val_stride: usize) -> GridData {
        GridData { train: self.train.clone(), val: self.val.clone(), train_stride, val_stride }
    }
}

/// Trains the configured architecture and packages the best-epoch weights
/// with the scaler and split.
pub fn train_model(
    members: &[CohortMember],
    cfg: &RunConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SavedModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    let features = cfg.data.feature_set()?;
    let prepared = prepare(members, &features, cfg.data.split_seed)?;
    let config = cfg.tcn_config()?;
    let rf = config.receptive_field();
    let train_ds = WindowDataset::new(prepared.train.clone(), rf)?.strided(cfg.data.train_stride)?;
    let val_ds = WindowDataset::new(prepared.val.clone(), rf)?.strided(cfg.data.val_stride)?;
    let out = train_with_progress(&config, &cfg.training, &train_ds, &val_ds, on_epoch)?;
    let saved = SavedModel {
        model: out.model,
        features,
        scaler: prepared.scaler,
        split: prepared.split,
        best_epoch: out.best_epoch,
        best_val_mse: out.best_val_mse,
    };
    Ok((saved, out.history))
}

/// Participants to evaluate: the model's test split unless a list is given.
/// Training participants are refused unless `allow_train_leak` is set.
pub fn select_participants(
    saved: &SavedModel,
    requested: Option<&[String]>,
    allow_train_leak: bool,
) -> Result<Vec<String>> {
    let ids = match requested {
        Some(r) if !r.is_empty() => r.to_vec(),
        _ => saved.split.test.clone(),
    };
    if ids.is_empty() {
        return Err(Error::Config("no participants selected for evaluation".into()));
    }
    if !allow_train_leak {
        let leaked: Vec<&String> = ids.iter().filter(|id| saved.split.train.contains(id)).collect();
        if !leaked.is_empty() {
            return Err(Error::Config(format!(
                "participants {:?} were used for training; pass --allow-train-leak to evaluate them anyway",
                leaked
            )));
        }
    }
    Ok(ids)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub predictions: Vec<ProtocolPrediction>,
    pub table: ErrorTable,
    pub agreement: BlandAltmanReport,
    pub vo2peak_agreement: Option<BlandAltmanReport>,
    pub confusion: ConfusionMatrix3,
    pub masses: BTreeMap<String, f64>,
}

pub fn evaluate(saved: &SavedModel, members: &[CohortMember], participants: &[String]) -> Result<Evaluation> {
    let mut predictions = Vec::new();
    let mut groups = Vec::new();
    let mut confusion = ConfusionMatrix3::default();
    let mut masses = BTreeMap::new();
    let mut peaks = Vec::new();
    for id in participants {
        let member = members
            .iter()
            .find(|m| &m.profile.participant_id == id)
            .ok_or_else(|| Error::Data(format!("participant {} is not in the cohort", id)))?;
        let mass = member.profile.mass_kg;
        masses.insert(id.clone(), mass);
        let mut pairs = Vec::new();
        for rec in &member.recordings {
            let p = predict_protocol(&saved.model, rec, &saved.scaler, &saved.features)?;
            confusion.merge(&confusion_by_second(&p.vo2_true, &p.vo2_pred, mass)?);
            pairs.extend(p.pairs());
            if p.kind == ProtocolKind::Ramp && p.len() >= VO2PEAK_WINDOW_S {
                peaks.push((vo2peak(&p.vo2_true)?, vo2peak(&p.vo2_pred)?));
            }
            predictions.push(p);
        }
        groups.push(pairs);
    }
    Ok(Evaluation {
        table: error_table(&predictions)?,
        agreement: bland_altman_rm(&groups)?,
        vo2peak_agreement: if peaks.len() >= 2 { Some(bland_altman(&peaks)?) } else { None },
        confusion,
        masses,
        predictions,
    })
}

pub const EVAL_FILES: [&str; 6] = [
    "error_table.csv",
    "bland_altman.csv",
    "bland_altman_points.csv",
    "confusion_matrix.csv",
    "mets_trace.csv",
    "summary.csv",
];

pub fn write_evaluation(dir: &Path, ev: &Evaluation) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report::write_error_table(&dir.join(EVAL_FILES[0]), &ev.table)?;
    let mut analyses = vec![("vo2", &ev.agreement)];
    if let Some(p) = &ev.vo2peak_agreement {
        analyses.push(("vo2peak", p));
    }
    report::write_bland_altman(&dir.join(EVAL_FILES[1]), &analyses)?;
    report::write_difference_points(&dir.join(EVAL_FILES[2]), &ev.predictions)?;
    report::write_confusion(&dir.join(EVAL_FILES[3]), &ev.confusion)?;
    report::write_mets_trace(&dir.join(EVAL_FILES[4]), &ev.predictions, |id| ev.masses[id])?;
    let summary = vec![
        ("participants".to_string(), ev.masses.keys().cloned().collect::<Vec<_>>().join(" ")),
        ("recordings".to_string(), ev.predictions.len().to_string()),
        ("seconds".to_string(), ev.confusion.total().to_string()),
        ("mean_error_mlpm".to_string(), ev.table.combined.mean.to_string()),
        ("sd_error_mlpm".to_string(), ev.table.combined.sd.to_string()),
        ("loa_low_mlpm".to_string(), ev.agreement.loa_low.to_string()),
        ("loa_high_mlpm".to_string(), ev.agreement.loa_high.to_string()),
        ("mets_accuracy".to_string(), ev.confusion.accuracy().to_string()),
    ];
    report::write_key_values(&dir.join(EVAL_FILES[5]), &summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_cohort;

    #[test]
    fn prepare_keeps_participants_apart() {
        let members = generate_cohort(4, 8).unwrap();
        let p = prepare(&members, &FeatureSet::default(), 1).unwrap();
        assert_eq!((p.split.train.len(), p.split.val.len(), p.split.test.len()), (2, 1, 1));
        assert_eq!(p.train.len(), 8);
        assert_eq!(p.val.len(), 4);
        for r in &p.val {
            assert!(!p.split.train.contains(&r.participant_id));
        }
    }

    #[test]
    fn small_end_to_end() {
        let members = generate_cohort(3, 5).unwrap();
        let mut cfg = RunConfig::default();
        cfg.model.filters = 4;
        cfg.model.kernel = 2;
        cfg.model.dilations = 2;
        cfg.training.epochs = 1;
        cfg.data.train_stride = 50;
        cfg.data.val_stride = 50;
        let (saved, history) = train_model(&members, &cfg, |_| {}).unwrap();
        assert_eq!(history.len(), 1);
        let ids = select_participants(&saved, None, false).unwrap();
        assert_eq!(ids, saved.split.test);
        assert!(select_participants(&saved, Some(&saved.split.train), false).is_err());
        assert!(select_participants(&saved, Some(&saved.split.train), true).is_ok());
        let ev = evaluate(&saved, &members, &ids).unwrap();
        assert_eq!(ev.predictions.len(), 4);
        assert!(!ev.agreement.repeated_measures);
        let dir = tempfile::tempdir().unwrap();
        write_evaluation(dir.path(), &ev).unwrap();
        for f in EVAL_FILES {
            assert!(dir.path().join(f).exists(), "{}", f);
        }
    }
}
