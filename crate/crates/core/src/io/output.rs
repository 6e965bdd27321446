//! CSV tables, checksums and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{DiagnosticsRecord, GRADIENT_EXPONENTS};
use crate::error::{Error, Result};

use super::config::SimConfig;

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses one CSV cell; empty cells read as `None`.
pub fn parse_cell(cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::InvalidArgument(format!("not a number: {cell:?}")))
}

/// Buffered CSV file with a fixed header.
pub struct CsvTable {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl CsvTable {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(header)?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
            width: header.len(),
        })
    }

    pub fn row(&mut self, values: &[Option<f64>]) -> Result<()> {
        debug_assert_eq!(values.len(), self.width);
        self.writer
            .write_record(values.iter().map(|v| v.map(fmt_f64).unwrap_or_default()))?;
        Ok(())
    }

    pub fn values(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.width);
        self.writer.write_record(values.iter().map(|&v| fmt_f64(v)))?;
        Ok(())
    }

    /// Writes a row whose first cell is a text label.
    pub fn labelled(&mut self, label: &str, values: &[f64]) -> Result<()> {
        let mut rec = vec![label.to_string()];
        rec.extend(values.iter().map(|&v| fmt_f64(v)));
        self.writer.write_record(rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// A CSV file read back: header plus cells (`None` for empty or label cells).
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Text labels found in the first column, by row index.
    pub labels: BTreeMap<usize, String>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    let mut labels = BTreeMap::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            match parse_cell(cell) {
                Ok(v) => row.push(v),
                Err(_) if c == 0 => {
                    labels.insert(r, cell.to_string());
                    row.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        rows.push(row);
    }
    Ok(Table { header, rows, labels })
}

pub const DIAGNOSTICS_HEADER: [&str; 10] = [
    "t",
    "mass",
    "l1_pressure",
    "linf_density",
    "linf_pressure",
    "bv",
    "dt_l1",
    "grad_l2_sq",
    "ab_min",
    "comp_residual",
];

pub const GRADIENT_HEADER: [&str; 6] = ["grad_l2", "grad_l4", "grad_l6", "grad_l8", "grad_l10", "grad_linf"];

pub fn diagnostics_header(with_gradients: bool) -> Vec<&'static str> {
    let mut h = DIAGNOSTICS_HEADER.to_vec();
    if with_gradients {
        h.extend(GRADIENT_HEADER);
    }
    h
}

/// Cells of one diagnostics row, in header order.
pub fn diagnostics_row(rec: &DiagnosticsRecord, with_gradients: bool) -> Vec<Option<f64>> {
    let mut row = vec![
        Some(rec.t),
        Some(rec.mass),
        Some(rec.l1_pressure),
        Some(rec.linf_density),
        Some(rec.linf_pressure),
        Some(rec.bv),
        rec.dt_l1,
        Some(rec.grad_l2_sq),
        Some(rec.ab_min),
        Some(rec.comp_residual),
    ];
    if with_gradients {
        for q in GRADIENT_EXPONENTS {
            let v = rec.lq_grad_norms.iter().find(|(e, _)| *e == q).map(|&(_, v)| v);
            row.push(v);
        }
    }
    row
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

/// Record of one run: the resolved config, code version, outcome, summary
/// numbers and a checksum for every emitted file.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: SimConfig,
    pub status: String,
    pub summary: BTreeMap<String, f64>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config: &SimConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            status: "running".into(),
            summary: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    /// Lists `files` (relative to `dir`) with their checksums and writes
    /// `dir/manifest`.
    pub fn write(&mut self, dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        self.files.clear();
        for f in files {
            let name = f
                .strip_prefix(dir)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/");
            self.files.push(ManifestEntry {
                file: name,
                sha256: sha256_file(f)?,
            });
        }
        let path = dir.join("manifest");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn cells_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let back = parse_cell(&fmt_f64(v)).unwrap().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = CsvTable::create(&path, &["t", "v"]).unwrap();
        t.row(&[Some(0.1), None]).unwrap();
        t.values(&[1.0 / 3.0, -2e-300]).unwrap();
        t.labelled("total", &[7.5]).unwrap();
        t.finish().unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back.header, vec!["t", "v"]);
        assert_eq!(back.rows[0], vec![Some(0.1), None]);
        assert_eq!(back.rows[1], vec![Some(1.0 / 3.0), Some(-2e-300)]);
        assert_eq!(back.labels.get(&2).map(String::as_str), Some("total"));
        assert_eq!(back.rows[2][1], Some(7.5));
    }

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        std::fs::write(&path, "abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
