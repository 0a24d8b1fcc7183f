//! Dataset CSV files and run configuration.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::UnitVector;
use crate::grids::GridShape;
use crate::manova::ScoreKind;

/// Reads a dataset: one direction per row, either as `d` direction cosines
/// or, under a `lon,lat` header, as longitude/latitude in degrees (`d = 3`).
/// A header row is optional for cosines.
pub fn read_dataset(path: &Path) -> Result<Vec<UnitVector>> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_dataset(file)
}

pub fn parse_dataset<R: Read>(reader: R) -> Result<Vec<UnitVector>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut out: Vec<UnitVector> = Vec::new();
    let mut lonlat = false;
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            let names: Vec<String> = rec.iter().map(str::to_ascii_lowercase).collect();
            lonlat = names == ["lon", "lat"];
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse(format!("row {line}: expected {w} fields, found {}", rec.len())));
        }
        let values = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("row {line}: '{f}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        let coords = if lonlat { lonlat_to_xyz(values[0], values[1]) } else { values };
        let p = UnitVector::new(coords).map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Parse("dataset has no observations".into()));
    }
    Ok(out)
}

/// Degrees to a point of `S^2`.
pub fn lonlat_to_xyz(lon: f64, lat: f64) -> Vec<f64> {
    let (lon, lat) = (lon.to_radians(), lat.to_radians());
    vec![lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Writes `x1..xd` columns with shortest round-trip formatting.
pub fn write_dataset<W: Write>(writer: W, sample: &[UnitVector]) -> Result<()> {
    let d = sample.first().map_or(0, UnitVector::dim);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=d).map(|k| format!("x{k}"))).map_err(csv_err)?;
    for p in sample {
        w.write_record(p.as_slice().iter().map(f64::to_string)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes rows with a header derived from `T`'s field names.
pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Shape(GridShape),
    Named(GridName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridName {
    Auto,
}

impl GridSpec {
    pub fn resolve(&self, n: usize, d: usize) -> Result<GridShape> {
        match self {
            Self::Named(GridName::Auto) => GridShape::auto(n, d),
            Self::Shape(s) => {
                let s = GridShape::new(s.n_r, s.n_s, s.n_0)?;
                s.check_size(n)?;
                Ok(s)
            }
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Named(GridName::Auto)
    }
}

/// Settings shared by the test commands, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_score")]
    pub score: ScoreKind,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_n_mc() -> usize {
    2000
}

fn default_score() -> ScoreKind {
    ScoreKind::Uniform
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha: default_alpha(),
            n_mc: default_n_mc(),
            grid: GridSpec::default(),
            score: default_score(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_mc < crate::gof::MIN_MC {
            return Err(invalid(format!("n_mc must be >= {}, got {}", crate::gof::MIN_MC, self.n_mc)));
        }
        if let GridSpec::Shape(s) = self.grid {
            GridShape::new(s.n_r, s.n_s, s.n_0)?;
        }
        Ok(())
    }
}
