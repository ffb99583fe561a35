//! Report files: `report.json` plus CSV tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::schatten::{BoundCheck, SingularSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub singular_value: f64,
    pub method: String,
    pub t: f64,
    pub label: String,
}

impl SpectrumRow {
    pub fn rows(spectrum: &SingularSpectrum, t: f64, label: &str) -> Vec<Self> {
        spectrum
            .values
            .iter()
            .enumerate()
            .map(|(index, &v)| SpectrumRow {
                index,
                singular_value: v,
                method: spectrum.method.to_string(),
                t,
                label: label.to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub id: String,
    pub p: String,
    pub t: Option<f64>,
    pub value: f64,
    pub bound: Option<f64>,
    pub holds: Option<bool>,
    pub fitted_constant: Option<f64>,
}

impl From<&BoundCheck> for BoundRow {
    fn from(c: &BoundCheck) -> Self {
        Self {
            id: c.id.clone(),
            p: c.p.map(|p| p.to_string()).unwrap_or_default(),
            t: c.t,
            value: c.value,
            bound: c.bound,
            holds: c.holds,
            fitted_constant: c.fitted_constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub atoms: usize,
    pub t: f64,
    pub y_hs_squared: f64,
    pub k_hs_squared: f64,
    pub k_law: f64,
    pub k_law_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub n: i64,
    pub bin_lo: f64,
    pub bin_mass: f64,
    pub contribution_p: f64,
}

/// Everything a scenario writes to its output directory.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub report: serde_json::Value,
    pub spectra: Vec<SpectrumRow>,
    pub bounds: Vec<BoundRow>,
    pub growth: Vec<GrowthRow>,
    pub bins: Vec<BinRow>,
    /// Extra named CSV files as `(file name, rows of cells)` with a header row.
    pub tables: Vec<(String, Vec<Vec<String>>)>,
    /// Extra files written verbatim as `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Outputs {
    /// Writes `report.json` and every nonempty table; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let report = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&self.report)?;
        text.push('\n');
        std::fs::write(&report, text)?;
        written.push(report);
        macro_rules! table {
            ($rows:expr, $name:literal) => {
                if !$rows.is_empty() {
                    let path = dir.join($name);
                    write_rows(&path, &$rows)?;
                    written.push(path);
                }
            };
        }
        table!(self.spectra, "spectra.csv");
        table!(self.bounds, "bounds.csv");
        table!(self.growth, "growth.csv");
        table!(self.bins, "bins.csv");
        for (name, rows) in &self.tables {
            let path = dir.join(name);
            let mut w = csv::Writer::from_path(&path)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
            written.push(path);
        }
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}
