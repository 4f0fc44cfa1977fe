//! Plot-ready CSV outputs.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{
    classify_mets, vo2_to_mets, BlandAltmanReport, ConfusionMatrix3, ErrorStats, ErrorTable, MetsCategory,
    ProtocolPrediction,
};
use crate::train::{EpochRecord, GridResult};

struct CsvOut<'p> {
    path: &'p Path,
    w: csv::Writer<BufWriter<File>>,
}

impl<'p> CsvOut<'p> {
    fn create(path: &'p Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(header)?;
        Ok(Self { path, w })
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        self.w.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        use std::io::Write;
        self.w.flush().map_err(|e| Error::io(self.path, e))?;
        let mut inner = self.w.into_inner().map_err(|e| Error::io(self.path, e.into_error()))?;
        inner.flush().map_err(|e| Error::io(self.path, e))
    }
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut out = CsvOut::create(path, &["epoch", "train_mse", "val_mse"])?;
    for r in history {
        out.row([r.epoch.to_string(), r.train_mse.to_string(), r.val_mse.to_string()])?;
    }
    out.finish()
}

pub const GRID_HEADER: [&str; 8] =
    ["rank", "filters", "kernel", "dilations", "receptive_field", "param_count", "best_epoch", "best_val_mse"];

pub fn write_grid_results(path: &Path, results: &[GridResult]) -> Result<()> {
    let mut out = CsvOut::create(path, &GRID_HEADER)?;
    for (i, r) in results.iter().enumerate() {
        out.row([
            (i + 1).to_string(),
            r.config.num_filters.to_string(),
            r.config.kernel_size.to_string(),
            r.config.dilation_depth.to_string(),
            r.receptive_field.to_string(),
            r.param_count.to_string(),
            r.best_epoch.to_string(),
            r.best_val_mse.to_string(),
        ])?;
    }
    out.finish()
}

pub fn write_error_table(path: &Path, table: &ErrorTable) -> Result<()> {
    let mut out = CsvOut::create(path, &["protocol", "n", "mean_error_mlpm", "sd_error_mlpm"])?;
    let row = |label: &str, s: &ErrorStats| [label.to_string(), s.n.to_string(), s.mean.to_string(), s.sd.to_string()];
    for (kind, s) in &table.per_kind {
        out.row(row(kind.label(), s))?;
    }
    out.row(row("combined", &table.combined))?;
    if let Some(p) = &table.vo2peak {
        out.row(row("vo2peak", p))?;
    }
    out.finish()
}

pub fn write_bland_altman(path: &Path, analyses: &[(&str, &BlandAltmanReport)]) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &[
            "analysis",
            "method",
            "n_pairs",
            "n_participants",
            "bias_mlpm",
            "sd_mlpm",
            "within_sd_mlpm",
            "between_sd_mlpm",
            "loa_low_mlpm",
            "loa_high_mlpm",
        ],
    )?;
    for (name, r) in analyses {
        out.row([
            name.to_string(),
            if r.repeated_measures { "repeated_measures" } else { "standard" }.to_string(),
            r.n_pairs.to_string(),
            r.n_participants.to_string(),
            r.bias.to_string(),
            r.sd.to_string(),
            r.within_sd.to_string(),
            r.between_sd.to_string(),
            r.loa_low.to_string(),
            r.loa_high.to_string(),
        ])?;
    }
    out.finish()
}

/// One row per predicted second: the points of a Bland–Altman plot.
pub fn write_difference_points(path: &Path, predictions: &[ProtocolPrediction]) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &["participant_id", "protocol", "time_s", "vo2_true_mlpm", "vo2_pred_mlpm", "mean_mlpm", "diff_mlpm"],
    )?;
    for p in predictions {
        for i in 0..p.len() {
            let (t, y) = (p.vo2_true[i], p.vo2_pred[i]);
            out.row([
                p.participant_id.clone(),
                p.kind.label().to_string(),
                p.time_s[i].to_string(),
                t.to_string(),
                y.to_string(),
                (0.5 * (t + y)).to_string(),
                (y - t).to_string(),
            ])?;
        }
    }
    out.finish()
}

pub fn write_confusion(path: &Path, m: &ConfusionMatrix3) -> Result<()> {
    let mut out = CsvOut::create(path, &["true_category", "pred_light", "pred_moderate", "pred_vigorous", "total"])?;
    for cat in MetsCategory::ALL {
        let row = m.counts[cat as usize];
        out.row([
            cat.label().to_string(),
            row[0].to_string(),
            row[1].to_string(),
            row[2].to_string(),
            m.row_total(cat).to_string(),
        ])?;
    }
    out.finish()
}

/// Concatenated per-second METs of every evaluated recording.
pub fn write_mets_trace(path: &Path, predictions: &[ProtocolPrediction], mass_of: impl Fn(&str) -> f64) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &[
            "participant_id",
            "protocol",
            "time_s",
            "vo2_true_mlpm",
            "vo2_pred_mlpm",
            "mets_true",
            "mets_pred",
            "category_true",
            "category_pred",
        ],
    )?;
    for p in predictions {
        let mass = mass_of(&p.participant_id);
        for i in 0..p.len() {
            let mt = vo2_to_mets(p.vo2_true[i], mass)?;
            let mp = vo2_to_mets(p.vo2_pred[i], mass)?;
            out.row([
                p.participant_id.clone(),
                p.kind.label().to_string(),
                p.time_s[i].to_string(),
                p.vo2_true[i].to_string(),
                p.vo2_pred[i].to_string(),
                mt.to_string(),
                mp.to_string(),
                classify_mets(mt).label().to_string(),
                classify_mets(mp).label().to_string(),
            ])?;
        }
    }
    out.finish()
}

pub const PREDICTION_HEADER: [&str; 5] = ["time_s", "vo2_true_mlpm", "vo2_pred_mlpm", "mets_pred", "category_pred"];

/// Per-second predictions of one recording; only seconds with a full
/// receptive field have rows.
pub fn write_predictions(path: &Path, p: &ProtocolPrediction, mass_kg: f64) -> Result<()> {
    let mut out = CsvOut::create(path, &PREDICTION_HEADER)?;
    for i in 0..p.len() {
        let mets = vo2_to_mets(p.vo2_pred[i], mass_kg)?;
        out.row([
            p.time_s[i].to_string(),
            p.vo2_true[i].to_string(),
            p.vo2_pred[i].to_string(),
            mets.to_string(),
            classify_mets(mets).label().to_string(),
        ])?;
    }
    out.finish()
}

pub fn write_key_values(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut out = CsvOut::create(path, &["key", "value"])?;
    for (k, v) in rows {
        out.row([k.clone(), v.clone()])?;
    }
    out.finish()
}
