//! On-disk artifacts: cohort directories (TOML manifest plus one CSV per
//! recording) and the binary model file.
//!
//! Model file layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes   "TCNVO2MF"
//! version  u32       1
//! hlen     u32       length of the header in bytes
//! header   hlen      UTF-8 "key=value" lines: architecture, feature list,
//!                    scaler statistics, participant split, best epoch
//! count    u64       number of parameters
//! params   count×f64 flat parameter vector in slot order
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureScaler, FeatureSet, ParticipantSplit, ProtocolKind, ProtocolRecording, ZStats};
use crate::error::{Error, Result};
use crate::model::{param_count, TcnConfig, TcnModel};
use crate::sim::{CohortMember, ParticipantProfile};

pub const MANIFEST_FILE: &str = "cohort.toml";
pub const MODEL_MAGIC: &[u8; 8] = b"TCNVO2MF";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub profile: ParticipantProfile,
    /// Protocol label → CSV path relative to the manifest.
    pub recordings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "participant")]
    pub participants: Vec<ManifestEntry>,
}

pub fn recording_file_name(participant_id: &str, kind: ProtocolKind) -> String {
    format!("{}_{}.csv", participant_id, kind.slug())
}

pub fn write_cohort(dir: &Path, members: &[CohortMember], seed: Option<u64>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut participants = Vec::with_capacity(members.len());
    for m in members {
        let mut recordings = BTreeMap::new();
        for r in &m.recordings {
            let name = recording_file_name(&m.profile.participant_id, r.kind);
            r.write_csv(&dir.join(&name))?;
            recordings.insert(r.kind.label().to_string(), name);
        }
        participants.push(ManifestEntry { profile: m.profile.clone(), recordings });
    }
    let manifest = CohortManifest { seed, participants };
    let text = toml::to_string_pretty(&manifest).map_err(|e| Error::Data(format!("manifest serialization: {}", e)))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<CohortManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))
}

/// Loads every recording listed in the directory's manifest. Recordings of a
/// participant are returned in protocol order.
pub fn load_cohort(dir: &Path) -> Result<Vec<CohortMember>> {
    let manifest = read_manifest(dir)?;
    if manifest.participants.is_empty() {
        return Err(Error::Data(format!("{}: manifest lists no participants", dir.display())));
    }
    let mut seen = BTreeSet::new();
    let mut members = Vec::with_capacity(manifest.participants.len());
    for entry in manifest.participants {
        let id = entry.profile.participant_id.clone();
        if !seen.insert(id.clone()) {
            return Err(Error::Data(format!("participant {} listed twice", id)));
        }
        entry.profile.validate().map_err(|e| Error::Data(e.to_string()))?;
        let mut recordings = Vec::with_capacity(entry.recordings.len());
        for (label, file) in &entry.recordings {
            let kind: ProtocolKind = label.parse().map_err(|e: Error| Error::Data(e.to_string()))?;
            recordings.push(ProtocolRecording::read_csv(&dir.join(file), id.clone(), kind)?);
        }
        recordings.sort_by_key(|r| r.kind);
        members.push(CohortMember { profile: entry.profile, recordings });
    }
    Ok(members)
}

/// A trained model together with everything needed to apply it to raw
/// recordings.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: TcnModel,
    pub features: FeatureSet,
    pub scaler: FeatureScaler,
    pub split: ParticipantSplit,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

fn header_lines(m: &SavedModel) -> Vec<(String, String)> {
    let c = m.model.config();
    let s = &m.scaler;
    let mut kv: Vec<(String, String)> = vec![
        ("filters".into(), c.num_filters.to_string()),
        ("kernel".into(), c.kernel_size.to_string()),
        ("dilations".into(), c.dilation_depth.to_string()),
        ("input_features".into(), c.input_features.to_string()),
        ("dropout".into(), c.dropout_rate.to_string()),
        ("features".into(), m.features.to_list()),
        ("wr_min".into(), s.wr_min.to_string()),
        ("wr_max".into(), s.wr_max.to_string()),
    ];
    for (name, z) in [("hr", s.hr), ("hrr", s.hrr), ("bf", s.bf), ("ve", s.ve), ("vo2", s.vo2)] {
        kv.push((format!("{}_mean", name), z.mean.to_string()));
        kv.push((format!("{}_std", name), z.std.to_string()));
    }
    kv.push(("train".into(), m.split.train.join(",")));
    kv.push(("val".into(), m.split.val.join(",")));
    kv.push(("test".into(), m.split.test.join(",")));
    kv.push(("best_epoch".into(), m.best_epoch.to_string()));
    kv.push(("best_val_mse".into(), m.best_val_mse.to_string()));
    kv
}

struct Header(BTreeMap<String, String>);

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.0.get(key).map(String::as_str).ok_or_else(|| Error::Data(format!("model header lacks {:?}", key)))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.parse().map_err(|_| Error::Data(format!("model header field {:?} is malformed", key)))
    }

    fn ids(&self, key: &str) -> Result<Vec<String>> {
        let v = self.get(key)?;
        Ok(if v.is_empty() { Vec::new() } else { v.split(',').map(str::to_string).collect() })
    }

    fn z(&self, name: &str) -> Result<ZStats> {
        Ok(ZStats { mean: self.num(&format!("{}_mean", name))?, std: self.num(&format!("{}_std", name))? })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Data("model file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

impl SavedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header: String = header_lines(self).iter().map(|(k, v)| format!("{}={}\n", k, v)).collect();
        let values = self.model.weights().values();
        let mut out = Vec::with_capacity(24 + header.len() + 8 * values.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(Error::Data("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported model format version {}", version)));
        }
        let hlen = u32::from_le_bytes(r.array()?) as usize;
        let text = std::str::from_utf8(r.take(hlen)?).map_err(|_| Error::Data("model header is not UTF-8".into()))?;
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Data(format!("malformed model header line {:?}", line)))?;
            map.insert(k.to_string(), v.to_string());
        }
        let h = Header(map);
        let config = TcnConfig::new(h.num("filters")?, h.num("kernel")?, h.num("dilations")?)
            .with_input_features(h.num("input_features")?)
            .with_dropout(h.num("dropout")?);
        config.validate().map_err(|e| Error::Data(e.to_string()))?;
        let features = FeatureSet::parse_list(h.get("features")?).map_err(|e| Error::Data(e.to_string()))?;
        if features.len() != config.input_features {
            return Err(Error::Data("model header feature list disagrees with input_features".into()));
        }
        let scaler = FeatureScaler {
            wr_min: h.num("wr_min")?,
            wr_max: h.num("wr_max")?,
            hr: h.z("hr")?,
            hrr: h.z("hrr")?,
            bf: h.z("bf")?,
            ve: h.z("ve")?,
            vo2: h.z("vo2")?,
        };
        let split = ParticipantSplit { train: h.ids("train")?, val: h.ids("val")?, test: h.ids("test")? };
        let count = u64::from_le_bytes(r.array()?) as usize;
        if count != param_count(&config) {
            return Err(Error::Data(format!(
                "model file holds {} parameters, architecture needs {}",
                count,
                param_count(&config)
            )));
        }
        let values = (0..count).map(|_| Ok(f64::from_le_bytes(r.array()?))).collect::<Result<Vec<f64>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Data("trailing bytes after model parameters".into()));
        }
        Ok(Self {
            model: TcnModel::from_values(config, values)?,
            features,
            scaler,
            split,
            best_epoch: h.num("best_epoch")?,
            best_val_mse: h.num("best_val_mse")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{}: {}", path.display(), msg)),
            other => other,
        })
    }
}
