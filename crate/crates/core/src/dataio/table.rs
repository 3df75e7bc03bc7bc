use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A numeric table: one row per subject, one column per variable, with one
/// column designated as the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub values: Array2<f64>,
    pub column_names: Vec<String>,
    pub outcome_column: String,
    /// Position of each row in the originally loaded or generated table.
    pub row_ids: Vec<usize>,
    /// Rows discarded at load time because of missing or non-numeric cells.
    pub dropped_at_load: usize,
}

impl RawTable {
    pub fn new(values: Array2<f64>, column_names: Vec<String>, outcome_column: &str) -> Result<Self> {
        if values.ncols() != column_names.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} names",
                values.ncols(),
                column_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if !column_names.iter().any(|c| c == outcome_column) {
            return Err(Error::OutcomeColumnAbsent(outcome_column.to_string()));
        }
        let n = values.nrows();
        Ok(RawTable {
            values,
            column_names,
            outcome_column: outcome_column.to_string(),
            row_ids: (0..n).collect(),
            dropped_at_load: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn outcome_index(&self) -> usize {
        self.column_names
            .iter()
            .position(|c| *c == self.outcome_column)
            .expect("outcome column validated at construction")
    }

    pub fn predictor_indices(&self) -> Vec<usize> {
        let y = self.outcome_index();
        (0..self.column_names.len()).filter(|&j| j != y).collect()
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictor_indices()
            .into_iter()
            .map(|j| self.column_names[j].clone())
            .collect()
    }

    pub(crate) fn select_rows(&self, keep: &[usize]) -> RawTable {
        RawTable {
            values: self.values.select(Axis(0), keep),
            column_names: self.column_names.clone(),
            outcome_column: self.outcome_column.clone(),
            row_ids: keep.iter().map(|&i| self.row_ids[i]).collect(),
            dropped_at_load: self.dropped_at_load,
        }
    }

    pub(crate) fn select_columns(&self, keep: &[usize]) -> RawTable {
        RawTable {
            values: self.values.select(Axis(1), keep),
            column_names: keep.iter().map(|&j| self.column_names[j].clone()).collect(),
            outcome_column: self.outcome_column.clone(),
            row_ids: self.row_ids.clone(),
            dropped_at_load: self.dropped_at_load,
        }
    }

    /// Writes a header row followed by one line per subject.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.column_names)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads a comma-separated numeric table with a header row. Rows with any
/// missing or non-numeric cell are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, outcome_column: &str) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if !header.iter().any(|h| h == outcome_column) {
        return Err(Error::OutcomeColumnAbsent(outcome_column.to_string()));
    }
    let width = header.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let parsed: Option<Vec<f64>> = if record.len() == width {
            record
                .iter()
                .map(|cell| cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        } else {
            None
        };
        match parsed {
            Some(vals) => {
                data.extend(vals);
                rows += 1;
            }
            None => dropped += 1,
        }
    }
    if rows == 0 {
        return Err(Error::NoUsableRows);
    }
    let values = Array2::from_shape_vec((rows, width), data).expect("row-major buffer");
    let mut table = RawTable::new(values, header, outcome_column)?;
    table.dropped_at_load = dropped;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_numeric_table() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let t = load_csv(f.path(), "y").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.predictor_names(), vec!["a", "b"]);
        assert_eq!(t.outcome_index(), 2);
        assert_eq!(t.dropped_at_load, 0);
    }

    #[test]
    fn drops_na_rows() {
        let f = write_tmp("a,b,y\n1,2,3\n4,NA,6\n7,8,9\n");
        let t = load_csv(f.path(), "y").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.dropped_at_load, 1);
        assert_eq!(t.row_ids, vec![0, 1]);
    }

    #[test]
    fn outcome_missing_is_error() {
        let f = write_tmp("a,b\n1,2\n");
        let err = load_csv(f.path(), "y").unwrap_err();
        assert!(err.to_string().contains("outcome column absent"));
    }

    #[test]
    fn empty_and_missing_file() {
        let f = write_tmp("a,y\nNA,1\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::NoUsableRows)));
        assert!(matches!(
            load_csv("/nonexistent/table.csv", "y"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let f = write_tmp("a,a,y\n1,2,3\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::DuplicateColumn(_))));
    }
}
