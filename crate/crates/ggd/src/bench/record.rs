//! The experiment CSV: one [`BenchRecord`] per run.

use std::fs::{File, OpenOptions};
use std::io::{self, Read};
use std::path::Path;

use ggd_core::{Backend, MetricReport};

use crate::error::{GgdError, Result};

pub const HEADER: [&str; 12] = [
    "image_name",
    "zeta",
    "backend",
    "delta",
    "rho",
    "rank",
    "re",
    "psnr",
    "ssim",
    "wall_ms",
    "seed",
    "converged",
];

/// One run. Failed runs carry no metrics or time and `converged == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub image_name: String,
    pub zeta: f64,
    pub backend: Backend,
    pub delta: usize,
    pub rho: usize,
    pub rank: usize,
    pub metrics: Option<MetricReport>,
    pub wall_ms: Option<f64>,
    pub seed: u64,
    pub converged: bool,
}

impl BenchRecord {
    pub fn psnr(&self) -> Option<f64> {
        self.metrics.map(|m| m.psnr)
    }

    pub fn ssim(&self) -> Option<f64> {
        self.metrics.map(|m| m.ssim)
    }

    fn fields(&self) -> [String; 12] {
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        [
            self.image_name.clone(),
            format_real(self.zeta),
            self.backend.name().to_string(),
            self.delta.to_string(),
            self.rho.to_string(),
            self.rank.to_string(),
            opt(self.metrics.map(|m| m.re)),
            opt(self.psnr()),
            opt(self.ssim()),
            opt(self.wall_ms),
            self.seed.to_string(),
            self.converged.to_string(),
        ]
    }

    fn from_fields(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != HEADER.len() {
            return Err(GgdError::Invalid(format!("expected {} columns, found {}", HEADER.len(), row.len())));
        }
        let bad = |col: &str, v: &str| GgdError::Invalid(format!("bad {col} value {v:?}"));
        let int = |i: usize| row[i].parse::<usize>().map_err(|_| bad(HEADER[i], &row[i]));
        let opt = |i: usize| -> Result<Option<f64>> {
            match &row[i] {
                "" => Ok(None),
                v => parse_real(v).map(Some).ok_or_else(|| bad(HEADER[i], v)),
            }
        };
        let (re, psnr, ssim) = (opt(6)?, opt(7)?, opt(8)?);
        let metrics = match (re, psnr, ssim) {
            (Some(re), Some(psnr), Some(ssim)) => Some(MetricReport { re, psnr, ssim }),
            (None, None, None) => None,
            _ => return Err(GgdError::Invalid("metrics must be all present or all blank".into())),
        };
        Ok(Self {
            image_name: row[0].to_string(),
            zeta: parse_real(&row[1]).ok_or_else(|| bad("zeta", &row[1]))?,
            backend: row[2].parse()?,
            delta: int(3)?,
            rho: int(4)?,
            rank: int(5)?,
            metrics,
            wall_ms: opt(9)?,
            seed: row[10].parse().map_err(|_| bad("seed", &row[10]))?,
            converged: row[11].parse().map_err(|_| bad("converged", &row[11]))?,
        })
    }
}

/// Shortest representation that parses back to the same value; infinities
/// are written as `inf`.
fn format_real(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse().ok()
}

/// Appends records to a CSV file, writing the header only when the file is
/// new or empty.
pub struct CsvSink {
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GgdError::io(path, e))?;
        let empty = file.metadata().map_err(|e| GgdError::io(path, e))?.len() == 0;
        let mut writer = csv::Writer::from_writer(file);
        if empty {
            writer.write_record(HEADER)?;
            writer.flush().map_err(|e| GgdError::io(path, e))?;
        }
        Ok(Self { writer })
    }

    /// Writes and flushes one row, so an interrupted sweep keeps its rows.
    pub fn push(&mut self, record: &BenchRecord) -> Result<()> {
        self.writer.write_record(record.fields())?;
        self.writer.flush().map_err(|e| GgdError::Csv(e.into()))
    }
}

pub fn write_records(out: impl io::Write, records: &[BenchRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HEADER)?;
    for r in records {
        writer.write_record(r.fields())?;
    }
    writer.flush().map_err(|e| GgdError::Csv(e.into()))
}

pub fn read_records(input: impl Read) -> Result<Vec<BenchRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(GgdError::Invalid(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    reader.records().map(|row| BenchRecord::from_fields(&row?)).collect()
}

pub fn read_records_from(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    read_records(File::open(path).map_err(|e| GgdError::io(path, e))?)
}

/// Which metric a [`best_rows`] selection maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Psnr,
    Ssim,
}

/// Per `(image_name, zeta, backend)` group in first-appearance order, the
/// row with the largest metric; ties keep the earlier row. Groups without a
/// completed run are skipped.
pub fn best_rows(records: &[BenchRecord], by: Criterion) -> Vec<&BenchRecord> {
    let key = |r: &BenchRecord| match by {
        Criterion::Psnr => r.psnr(),
        Criterion::Ssim => r.ssim(),
    };
    let mut best: Vec<&BenchRecord> = Vec::new();
    for r in records {
        let Some(score) = key(r) else { continue };
        let slot = best
            .iter_mut()
            .find(|b| b.image_name == r.image_name && b.zeta == r.zeta && b.backend == r.backend);
        match slot {
            Some(b) => {
                if score > key(b).expect("only scored rows are kept") {
                    *b = r;
                }
            }
            None => best.push(r),
        }
    }
    best
}
