use std::collections::BTreeSet;
use std::path::Path;

use super::dataset::MultimodalDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor;

fn csv_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e.to_string()))
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| csv_err(path, line, format!("column `{column}`: non-numeric cell `{cell}`")))?;
    if !v.is_finite() {
        return Err(csv_err(
            path,
            line,
            format!("column `{column}`: non-finite value `{cell}`"),
        ));
    }
    Ok(v)
}

/// A headed, all-numeric CSV file. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_numeric_csv(path: impl AsRef<Path>) -> Result<NumericTable> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .zip(&headers)
            .map(|(cell, col)| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    parse_cell(path, line, col, cell).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { headers, rows })
}

struct ModalityFile {
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn read_modality(path: &Path, label_column: &str) -> Result<ModalityFile> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, 1, e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| csv_err(path, 1, format!("missing label column `{label_column}`")))?;
    if headers.len() < 2 {
        return Err(csv_err(path, 1, "no feature columns besides the label"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (j, (cell, col)) in record.iter().zip(headers.iter()).enumerate() {
            if j == label_idx {
                labels.push(cell.to_owned());
            } else {
                row.push(parse_cell(path, line, col, cell)?);
            }
        }
        features.push(row);
    }
    Ok(ModalityFile { features, labels })
}

/// Loads one CSV file per modality. Every file carries the same label column;
/// all other columns become that modality's features. Labels are indexed in
/// lexicographic order of their string values.
pub fn load_csv<P: AsRef<Path>>(paths: &[P], label_column: &str) -> Result<MultimodalDataset> {
    if paths.is_empty() {
        return Err(Error::Empty("no CSV files given".into()));
    }
    let files = paths
        .iter()
        .map(|p| read_modality(p.as_ref(), label_column))
        .collect::<Result<Vec<_>>>()?;

    let n = files[0].labels.len();
    if n == 0 {
        return Err(csv_err(paths[0].as_ref(), 2, "file has no data rows"));
    }
    for (p, f) in paths.iter().zip(&files).skip(1) {
        if f.labels.len() != n {
            return Err(csv_err(
                p.as_ref(),
                0,
                format!("row-count mismatch: {} rows, expected {n}", f.labels.len()),
            ));
        }
        if let Some(i) = (0..n).find(|&i| f.labels[i] != files[0].labels[i]) {
            return Err(csv_err(
                p.as_ref(),
                i as u64 + 2,
                format!(
                    "label `{}` disagrees with `{}` in the first file",
                    f.labels[i], files[0].labels[i]
                ),
            ));
        }
    }

    let names: Vec<String> = files[0]
        .labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<usize> = files[0]
        .labels
        .iter()
        .map(|l| names.binary_search(l).expect("label collected above"))
        .collect();

    let features = files
        .iter()
        .map(|f| {
            let cols = f.features[0].len();
            Tensor::matrix(n, cols, f.features.concat())
        })
        .collect::<Result<Vec<_>>>()?;

    MultimodalDataset::new(features, labels, names.len())?.with_class_names(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn loads_two_modalities() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "acc.csv", "x,y,label\n1,2,walk\n3,4,sit\n5,6,walk\n");
        let b = write(&dir, "gyro.csv", "label,g\nwalk,0.5\nsit,-1\nwalk,2e-1\n");
        let ds = load_csv(&[a, b], "label").unwrap();
        assert_eq!(ds.num_modalities(), 2);
        assert_eq!(ds.num_samples(), 3);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.class_names().unwrap(), &["sit".to_string(), "walk".to_string()]);
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.features(0).values(), &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(ds.features(1).values(), &[0.5, -1.0, 0.2]);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "a.csv", "x,y,label\n1,2,a\n3,NaN,b\n");
        let msg = load_csv(&[a], "label").unwrap_err().to_string();
        assert!(msg.contains("line 3") && msg.contains("`y`"), "{msg}");
    }

    #[test]
    fn non_numeric_and_missing_label_and_row_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(&dir, "a.csv", "x,label\n1,a\nfoo,b\n");
        let msg = load_csv(&[&a], "label").unwrap_err().to_string();
        assert!(msg.contains("non-numeric") && msg.contains("line 3"), "{msg}");

        let b = write(&dir, "b.csv", "x,y\n1,2\n");
        let msg = load_csv(&[&b], "label").unwrap_err().to_string();
        assert!(msg.contains("missing label column"), "{msg}");

        let c = write(&dir, "c.csv", "x,label\n1,a\n2,b\n");
        let d = write(&dir, "d.csv", "z,label\n1,a\n");
        let msg = load_csv(&[&c, &d], "label").unwrap_err().to_string();
        assert!(msg.contains("row-count mismatch"), "{msg}");
    }
}
