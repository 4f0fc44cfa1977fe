use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["time_s", "work_rate_w", "hr_bpm", "hrr_frac", "bf_brpm", "ve_lpm", "vo2_mlpm"];

/// Upper bound accepted for the heart-rate-reserve fraction.
pub const HRR_MAX: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Ramp,
    LowModerate,
    LowHigh,
    VtHigh,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] =
        [ProtocolKind::Ramp, ProtocolKind::LowModerate, ProtocolKind::LowHigh, ProtocolKind::VtHigh];

    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::Ramp => "RAMP",
            ProtocolKind::LowModerate => "L-M",
            ProtocolKind::LowHigh => "L-H",
            ProtocolKind::VtHigh => "VT-H",
        }
    }

    /// Lower-case token used in file names.
    pub fn slug(self) -> &'static str {
        match self {
            ProtocolKind::Ramp => "ramp",
            ProtocolKind::LowModerate => "lm",
            ProtocolKind::LowHigh => "lh",
            ProtocolKind::VtHigh => "vth",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_prbs(self) -> bool {
        self != ProtocolKind::Ramp
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s) || k.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol kind {:?}", s)))
    }
}

/// One participant-protocol session on a 1 Hz grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRecording {
    pub participant_id: String,
    pub kind: ProtocolKind,
    pub time_s: Vec<f64>,
    pub work_rate_w: Vec<f64>,
    pub hr_bpm: Vec<f64>,
    pub hrr_frac: Vec<f64>,
    pub bf_brpm: Vec<f64>,
    pub ve_lpm: Vec<f64>,
    pub vo2_mlpm: Vec<f64>,
}

impl ProtocolRecording {
    pub fn empty(participant_id: impl Into<String>, kind: ProtocolKind) -> Self {
        Self {
            participant_id: participant_id.into(),
            kind,
            time_s: Vec::new(),
            work_rate_w: Vec::new(),
            hr_bpm: Vec::new(),
            hrr_frac: Vec::new(),
            bf_brpm: Vec::new(),
            ve_lpm: Vec::new(),
            vo2_mlpm: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    fn columns(&self) -> [&[f64]; 7] {
        [&self.time_s, &self.work_rate_w, &self.hr_bpm, &self.hrr_frac, &self.bf_brpm, &self.ve_lpm, &self.vo2_mlpm]
    }

    pub fn push_row(&mut self, row: [f64; 7]) {
        self.time_s.push(row[0]);
        self.work_rate_w.push(row[1]);
        self.hr_bpm.push(row[2]);
        self.hrr_frac.push(row[3]);
        self.bf_brpm.push(row[4]);
        self.ve_lpm.push(row[5]);
        self.vo2_mlpm.push(row[6]);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let who = || format!("{} {}", self.participant_id, self.kind);
        if n == 0 {
            return Err(Error::Data(format!("{}: empty recording", who())));
        }
        if self.columns().iter().any(|c| c.len() != n) {
            return Err(Error::Data(format!("{}: ragged columns", who())));
        }
        for w in self.time_s.windows(2) {
            if w[1] - w[0] != 1.0 {
                return Err(Error::Data(format!("{}: time step {} → {} is not exactly 1 s", who(), w[0], w[1])));
            }
        }
        for (name, col) in CSV_HEADER.iter().zip(self.columns()).skip(1) {
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Data(format!("{}: {} has invalid value {}", who(), name, v)));
            }
        }
        if let Some(v) = self.hrr_frac.iter().find(|v| **v > HRR_MAX) {
            return Err(Error::Data(format!("{}: hrr_frac {} above {}", who(), v, HRR_MAX)));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            w.write_record(self.columns().iter().map(|c| c[i].to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        inner.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, participant_id: impl Into<String>, kind: ProtocolKind) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(BufReader::new(file));
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Data(format!(
                "{}: header must be {:?}, got {:?}",
                path.display(),
                CSV_HEADER,
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut rec = ProtocolRecording::empty(participant_id, kind);
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let mut row = [0.0; 7];
            for (slot, field) in row.iter_mut().zip(record.iter()) {
                *slot = field.trim().parse().map_err(|_| {
                    Error::Data(format!("{}: row {}: cannot parse {:?}", path.display(), line + 2, field))
                })?;
            }
            rec.push_row(row);
        }
        rec.validate()?;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProtocolRecording {
        let mut r = ProtocolRecording::empty("P01", ProtocolKind::LowHigh);
        for t in 0..5 {
            let t = t as f64;
            r.push_row([t, 25.0, 100.0 + t, 0.3, 20.0, 30.5, 1000.0 + 0.1 * t]);
        }
        r
    }

    #[test]
    fn kind_parsing() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.label().parse::<ProtocolKind>().unwrap(), k);
            assert_eq!(k.slug().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("MAXX".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = sample();
        r.write_csv(&path).unwrap();
        let back = ProtocolRecording::read_csv(&path, "P01", ProtocolKind::LowHigh).unwrap();
        assert_eq!(back, r);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("time_s,work_rate_w,hr_bpm,hrr_frac,bf_brpm,ve_lpm,vo2_mlpm\n"));
    }

    #[test]
    fn invariants() {
        let mut r = sample();
        r.time_s[3] = 3.5;
        assert!(r.validate().is_err());
        let mut r = sample();
        r.hrr_frac[1] = 1.2;
        assert!(r.validate().is_err());
        let mut r = sample();
        r.vo2_mlpm[0] = f64::NAN;
        assert!(r.validate().is_err());
        let mut r = sample();
        r.hr_bpm[0] = -1.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,wr,hr,hrr,bf,ve,vo2\n0,1,2,0.1,4,5,6\n").unwrap();
        assert!(ProtocolRecording::read_csv(&path, "P", ProtocolKind::Ramp).is_err());
    }
}
