//! CSV tables, mask files and atomic file output.
//!
//! Tables have one header row of column names; every field is a float written
//! with 17 significant digits, so finite values survive a write/read cycle bit
//! for bit. Datasets are tables whose final column is the target.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::boundary::GridDomain;
use crate::error::{Error, Result};
use crate::gp::TrainingSet;

/// Column-named numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// `rows x columns.len()`.
    pub data: DMatrix<f64>,
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Table {
    pub fn new(columns: Vec<String>, data: DMatrix<f64>) -> Result<Table> {
        if columns.len() != data.ncols() {
            return Err(Error::invalid(format!("{} column names for {} columns", columns.len(), data.ncols())));
        }
        if let Some(c) = columns.iter().find(|c| c.is_empty() || c.contains([',', '\n', '"'])) {
            return Err(Error::invalid(format!("column name {c:?} cannot be written to CSV")));
        }
        Ok(Table { columns, data })
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.data.column(i).into_owned())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in 0..self.data.nrows() {
            for c in 0..self.data.ncols() {
                if c > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}", format_float(self.data[(r, c)]));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty file, expected a header row".into(),
        })?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if let Some(pos) = columns.iter().position(|c| c.is_empty()) {
            return Err(Error::Parse {
                line: 1,
                message: format!("header column {} is empty", pos + 1),
            });
        }
        let mut values = Vec::new();
        let mut n_rows = 0;
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", columns.len(), fields.len()),
                });
            }
            for (f, name) in fields.iter().zip(&columns) {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("column '{name}': cannot parse {:?} as a number", f.trim()),
                })?;
                values.push(v);
            }
            n_rows += 1;
        }
        let data = DMatrix::from_row_slice(n_rows, columns.len(), &values);
        Ok(Table { columns, data })
    }
}

/// A training set with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input_names: Vec<String>,
    pub target_name: String,
    pub data: TrainingSet,
}

impl Dataset {
    pub fn new(input_names: Vec<String>, target_name: &str, data: TrainingSet) -> Result<Dataset> {
        if input_names.len() != data.dim() {
            return Err(Error::invalid(format!("{} input names for {} input columns", input_names.len(), data.dim())));
        }
        Ok(Dataset {
            input_names,
            target_name: target_name.to_string(),
            data,
        })
    }

    pub fn to_table(&self) -> Result<Table> {
        let (n, d) = (self.data.len(), self.data.dim());
        let mut m = DMatrix::zeros(n, d + 1);
        m.columns_mut(0, d).copy_from(self.data.x());
        m.set_column(d, self.data.y());
        let mut cols = self.input_names.clone();
        cols.push(self.target_name.clone());
        Table::new(cols, m)
    }

    pub fn to_csv(&self) -> Result<String> {
        Ok(self.to_table()?.to_csv())
    }

    /// Parses a dataset whose final column is `target`.
    pub fn from_csv(text: &str, target: &str) -> Result<Dataset> {
        let t = Table::from_csv(text)?;
        if t.columns.last().map(String::as_str) != Some(target) {
            let message = if t.columns.iter().any(|c| c == target) {
                format!("target column '{target}' must be the last column")
            } else {
                format!("missing target column '{target}' (header: {})", t.columns.join(","))
            };
            return Err(Error::Parse { line: 1, message });
        }
        if t.columns.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "dataset needs at least one input column before the target".into(),
            });
        }
        if t.data.nrows() == 0 {
            return Err(Error::Parse {
                line: 2,
                message: "dataset has no rows".into(),
            });
        }
        let d = t.columns.len() - 1;
        let data = TrainingSet::new(t.data.columns(0, d).into_owned(), t.data.column(d).into_owned())?;
        Ok(Dataset {
            input_names: t.columns[..d].to_vec(),
            target_name: target.to_string(),
            data,
        })
    }
}

pub fn read_dataset(path: &Path, target: &str) -> Result<Dataset> {
    Dataset::from_csv(&std::fs::read_to_string(path)?, target)
}

/// Reads a mask file, spaced so the longer side spans the unit interval
/// including its implicit boundary nodes.
pub fn read_mask(path: &Path) -> Result<GridDomain> {
    let text = std::fs::read_to_string(path)?;
    let probe = GridDomain::parse_mask(&text, 1.0)?;
    GridDomain::parse_mask(&text, 1.0 / (probe.nx().max(probe.ny()) + 1) as f64)
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::from_csv(&std::fs::read_to_string(path)?)
}

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_points, random_vector};

    fn random_dataset() -> Dataset {
        let mut x = random_points(25, 3, 1, 1e3);
        x[(0, 0)] = -0.0;
        x[(1, 1)] = 1e-300;
        x[(2, 2)] = f64::MAX;
        let mut y = random_vector(25, 2);
        y[3] = std::f64::consts::PI;
        let data = TrainingSet::new(x, y).unwrap();
        Dataset::new(vec!["t".into(), "x".into(), "temp".into()], "y", data).unwrap()
    }

    #[test]
    fn write_then_read_is_bitwise_identical() {
        let d = random_dataset();
        let back = Dataset::from_csv(&d.to_csv().unwrap(), "y").unwrap();
        assert_eq!(back.input_names, d.input_names);
        for (a, b) in back.data.x().iter().zip(d.data.x().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.data.y().iter().zip(d.data.y().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pi_round_trips() {
        let s = format_float(std::f64::consts::PI);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), std::f64::consts::PI.to_bits());
        assert_eq!(s, "3.1415926535897931e0");
    }

    #[test]
    fn missing_target_column_is_named() {
        let e = Dataset::from_csv("t,x\n1,2\n", "y").unwrap_err();
        match e {
            Error::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("'y'"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let e = Table::from_csv("a,b\n1,2\n3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = Table::from_csv("a,b\n1,2\n3,zz\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, ref message } if message.contains("'b'")), "{e:?}");
        assert!(matches!(Table::from_csv(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Table::from_csv("a,,b\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("out.csv");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
        let d = random_dataset();
        write_atomic(&p, d.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(read_dataset(&p, "y").unwrap(), d);
    }
}
