//! Delimited-text datasets and assignment files.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{HfdpError, Result};
use crate::model::dataset::LabeledDataset;

/// Allowed number of attribute levels in an input file.
pub const MAX_LEVELS: usize = 20;

/// A dataset read from disk with the names behind its indices.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: LabeledDataset<f64>,
    pub feature_names: Vec<String>,
    /// `level_names[a]` is the file value mapped to level `a`, in first-appearance order.
    pub level_names: Vec<String>,
}

fn data_err(line: Option<usize>, message: impl Into<String>) -> HfdpError {
    HfdpError::Data { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> HfdpError {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HfdpError::Io(io),
        kind => data_err(line, format!("{kind:?}")),
    }
}

/// Reads a comma-separated file with a header row. An empty `features` list
/// selects every column except the attribute column.
pub fn load_csv(path: &Path, features: &[String], attribute: &str) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| data_err(Some(1), format!("missing column '{name}'")))
    };
    let attr_col = col(attribute)?;
    let feature_names: Vec<String> = if features.is_empty() {
        header.iter().filter(|h| h.as_str() != attribute).cloned().collect()
    } else {
        features.to_vec()
    };
    if feature_names.is_empty() {
        return Err(data_err(Some(1), "no feature columns"));
    }
    let feature_cols = feature_names.iter().map(|f| col(f)).collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut level_names: Vec<String> = Vec::new();
    let mut level_index: HashMap<String, usize> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(csv_err)?;
        for (&c, name) in feature_cols.iter().zip(&feature_names) {
            let cell = record.get(c).ok_or_else(|| data_err(Some(line), format!("missing value for '{name}'")))?;
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| data_err(Some(line), format!("cannot parse '{cell}' in column '{name}' as a number")))?;
            if !v.is_finite() {
                return Err(data_err(Some(line), format!("non-finite value in column '{name}'")));
            }
            points.push(v);
        }
        let level = record.get(attr_col).ok_or_else(|| data_err(Some(line), "missing attribute value"))?.trim().to_string();
        let next = level_names.len();
        let a = *level_index.entry(level.clone()).or_insert_with(|| {
            level_names.push(level);
            next
        });
        labels.push(a);
    }
    if labels.is_empty() {
        return Err(data_err(None, "file holds no data rows"));
    }
    if level_names.len() < 2 || level_names.len() > MAX_LEVELS {
        return Err(data_err(None, format!("attribute has {} levels; between 2 and {MAX_LEVELS} are required", level_names.len())));
    }
    let r = level_names.len();
    let dataset = LabeledDataset::new(points, feature_names.len(), labels, r)?;
    Ok(LoadedDataset { dataset, feature_names, level_names })
}

/// Writes features with 17 significant digits so reloading is exact.
pub fn write_dataset(
    path: &Path,
    dataset: &LabeledDataset<f64>,
    feature_names: &[String],
    attribute: &str,
    level_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
    header.push(attribute);
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.point(i).iter().map(|v| format!("{v:.16e}")).collect();
        rec.push(level_names[dataset.labels()[i]].clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns `row,cluster`, both 0-based.
pub fn write_assignment(path: &Path, assignment: &[usize]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "row,cluster")?;
    for (i, k) in assignment.iter().enumerate() {
        writeln!(f, "{i},{k}")?;
    }
    Ok(())
}

/// Reads an assignment file; every row index `0..N` must appear exactly once.
pub fn read_assignment(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let mut pairs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(csv_err)?;
        let field = |j: usize| -> Result<usize> {
            let cell = record.get(j).ok_or_else(|| data_err(Some(line), "expected two columns"))?;
            cell.trim().parse().map_err(|_| data_err(Some(line), format!("cannot parse '{cell}' as a non-negative integer")))
        };
        pairs.push((field(0)?, field(1)?, line));
    }
    if pairs.is_empty() {
        return Err(data_err(None, "assignment file holds no rows"));
    }
    let mut out = vec![usize::MAX; pairs.len()];
    for (i, k, line) in pairs {
        if i >= out.len() || out[i] != usize::MAX {
            return Err(data_err(Some(line), format!("row index {i} is out of range or repeated")));
        }
        out[i] = k;
    }
    Ok(out)
}
