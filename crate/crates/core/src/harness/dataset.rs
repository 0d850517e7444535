//! Directory-per-dataset CSV layout: `train.csv`, `test.csv`, `test_label.csv`.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{LabelTrack, MinMaxScaler, TimeSeries};
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const LABEL_FILE: &str = "test_label.csv";

/// Layout knobs for the tables found in the wild.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub header: bool,
    pub delimiter: u8,
    /// Leading columns to drop (e.g. a timestamp index).
    pub skip_columns: usize,
    /// Reject tables whose remaining column count differs.
    pub expected_dims: Option<usize>,
    /// Min-max normalize both splits with training statistics.
    pub normalize: bool,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            header: true,
            delimiter: b',',
            skip_columns: 0,
            expected_dims: None,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub name: String,
    pub train: TimeSeries,
    pub test: TimeSeries,
    pub test_labels: LabelTrack,
}

impl DatasetBundle {
    pub fn new(
        name: impl Into<String>,
        train: TimeSeries,
        test: TimeSeries,
        test_labels: LabelTrack,
    ) -> Result<Self> {
        if test.len() != test_labels.len() {
            return Err(Error::validation(format!(
                "test split has {} rows but {} labels",
                test.len(),
                test_labels.len()
            )));
        }
        if train.dims() != test.dims() {
            return Err(Error::validation(format!(
                "train has {} dimensions, test has {}",
                train.dims(),
                test.dims()
            )));
        }
        Ok(Self {
            name: name.into(),
            train,
            test,
            test_labels,
        })
    }

    pub fn normalized(&self) -> Result<Self> {
        let scaler = MinMaxScaler::fit(&self.train);
        Ok(Self {
            name: self.name.clone(),
            train: scaler.transform(&self.train)?,
            test: scaler.transform(&self.test)?,
            test_labels: self.test_labels.clone(),
        })
    }
}

fn reader(path: &Path, format: &FormatSpec) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(format.header)
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, row: usize, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a numeric table; `row`/`column` in parse errors are 0-based data
/// coordinates (header excluded, skipped columns included).
pub fn read_table(path: &Path, format: &FormatSpec) -> Result<TimeSeries> {
    let mut rdr = reader(path, format)?;
    let mut values = Vec::new();
    let mut dims: Option<usize> = None;
    let mut rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, row, e))?;
        if record.len() <= format.skip_columns {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: record.len(),
                message: "row has no data columns".into(),
            });
        }
        let width = record.len() - format.skip_columns;
        match dims {
            None => dims = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: record.len(),
                    message: format!("expected {d} data columns, found {width}"),
                })
            }
            _ => {}
        }
        for (column, cell) in record.iter().enumerate().skip(format.skip_columns) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column,
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let dims = dims.ok_or_else(|| Error::validation(format!("{} has no rows", path.display())))?;
    if let Some(expected) = format.expected_dims {
        if expected != dims {
            return Err(Error::validation(format!(
                "{} has {dims} columns, expected {expected}",
                path.display()
            )));
        }
    }
    TimeSeries::from_flat(rows, dims, values)
}

/// Reads 0/1 labels from the last column of each row.
pub fn read_labels(path: &Path, format: &FormatSpec) -> Result<LabelTrack> {
    let mut rdr = reader(path, format)?;
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, row, e))?;
        let column = record.len().saturating_sub(1);
        let cell = record.get(column).unwrap_or("");
        let label = match cell.parse::<f64>() {
            Ok(0.0) => false,
            Ok(1.0) => true,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column,
                    message: format!("label '{cell}' is not 0 or 1"),
                })
            }
        };
        labels.push(label);
    }
    Ok(LabelTrack::new(labels))
}

pub fn load_dataset(dir: &Path, format: &FormatSpec) -> Result<DatasetBundle> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let train = read_table(&dir.join(TRAIN_FILE), format)?;
    let test = read_table(&dir.join(TEST_FILE), format)?;
    let labels = read_labels(&dir.join(LABEL_FILE), format)?;
    let bundle = DatasetBundle::new(name, train, test, labels)?;
    if format.normalize {
        bundle.normalized()
    } else {
        Ok(bundle)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes a table with `x0, x1, ...` headers.
pub fn write_table(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = (0..series.dims()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for row in series.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &LabelTrack) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["label"]).map_err(|e| write_err(path, e))?;
    for b in labels.to_binary() {
        w.write_record([b.to_string()]).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the three files of the layout into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, bundle: &DatasetBundle) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [dir.join(TRAIN_FILE), dir.join(TEST_FILE), dir.join(LABEL_FILE)];
    write_table(&paths[0], &bundle.train)?;
    write_table(&paths[1], &bundle.test)?;
    write_labels(&paths[2], &bundle.test_labels)?;
    Ok(paths.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn toy_fixture_shape() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), TRAIN_FILE, "a,b\n0,10\n1,20\n2,30\n");
        write(dir.path(), TEST_FILE, "a,b\n0,10\n1,40\n2,30\n");
        write(dir.path(), LABEL_FILE, "label\n0\n1\n0\n");
        let b = load_dataset(dir.path(), &FormatSpec::default()).unwrap();
        assert_eq!((b.test.len(), b.test.dims()), (3, 2));
        // test normalized with train statistics
        assert_eq!(b.test.row(1), &[0.5, 1.5]);
        assert_eq!(b.test_labels.to_binary(), vec![0, 1, 0]);
    }

    #[test]
    fn bad_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), LABEL_FILE, "label\n0\n2\n");
        let err = read_labels(&dir.path().join(LABEL_FILE), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), TRAIN_FILE, "a,b\n0,1\n2,oops\n");
        let err = read_table(&dir.path().join(TRAIN_FILE), &FormatSpec::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (1, 1)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_file_is_io() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path(), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), TRAIN_FILE, "a\n0\n1\n");
        write(dir.path(), TEST_FILE, "a\n0\n1\n");
        write(dir.path(), LABEL_FILE, "label\n0\n");
        let err = load_dataset(dir.path(), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn wide_layout_with_index_column() {
        let dir = tempfile::tempdir().unwrap();
        let header: Vec<String> = std::iter::once("timestamp".to_string())
            .chain((0..38).map(|j| format!("c{j}")))
            .collect();
        let mut body = header.join(",") + "\n";
        for t in 0..4 {
            let row: Vec<String> = std::iter::once(t.to_string())
                .chain((0..38).map(|j| ((t * j) % 7).to_string()))
                .collect();
            body += &(row.join(",") + "\n");
        }
        write(dir.path(), TRAIN_FILE, &body);
        let format = FormatSpec {
            skip_columns: 1,
            expected_dims: Some(38),
            ..Default::default()
        };
        let s = read_table(&dir.path().join(TRAIN_FILE), &format).unwrap();
        assert_eq!(s.dims(), 38);
        let wrong = FormatSpec {
            expected_dims: Some(38),
            ..Default::default()
        };
        assert!(read_table(&dir.path().join(TRAIN_FILE), &wrong).is_err());
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let train = TimeSeries::from_rows(&[[0.125, -3.0], [1.0, 2.5]]).unwrap();
        let test = TimeSeries::from_rows(&[[0.1, 0.2]]).unwrap();
        let bundle = DatasetBundle::new("x", train, test, LabelTrack::new(vec![true])).unwrap();
        write_dataset(dir.path(), &bundle).unwrap();
        let raw = FormatSpec {
            normalize: false,
            ..Default::default()
        };
        let back = load_dataset(dir.path(), &raw).unwrap();
        assert_eq!(back.train, bundle.train);
        assert_eq!(back.test_labels, bundle.test_labels);
    }
}
