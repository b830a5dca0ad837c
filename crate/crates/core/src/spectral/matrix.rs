use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::bands::BandName;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Provenance of a feature column. Names render as `PIB:{channel}:{band}`
/// and `MSC:{a}|{b}:{band}` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureColumn {
    Pib { channel: String, band: BandName },
    Msc { a: String, b: String, band: BandName },
}

impl FeatureColumn {
    pub fn band(&self) -> BandName {
        match self {
            FeatureColumn::Pib { band, .. } | FeatureColumn::Msc { band, .. } => *band,
        }
    }
}

impl fmt::Display for FeatureColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureColumn::Pib { channel, band } => write!(f, "PIB:{channel}:{band}"),
            FeatureColumn::Msc { a, b, band } => write!(f, "MSC:{a}|{b}:{band}"),
        }
    }
}

impl FromStr for FeatureColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed feature column `{s}`"));
        let mut parts = s.split(':');
        let (kind, middle, band) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(m), Some(b), None) => (k, m, b),
            _ => return Err(bad()),
        };
        let band: BandName = band.parse()?;
        match kind {
            "PIB" if !middle.is_empty() && !middle.contains('|') => Ok(FeatureColumn::Pib {
                channel: middle.to_string(),
                band,
            }),
            "MSC" => {
                let (a, b) = middle.split_once('|').ok_or_else(bad)?;
                if a.is_empty() || b.is_empty() || a == b || b.contains('|') {
                    return Err(bad());
                }
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                Ok(FeatureColumn::Msc {
                    a: a.to_string(),
                    b: b.to_string(),
                    band,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for FeatureColumn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureColumn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub trial_id: usize,
    pub window_index: usize,
}

/// Sidecar record describing one matrix row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub trial_id: usize,
    pub window_index: usize,
    pub label: Option<String>,
}

/// Windows × named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
    columns: Vec<FeatureColumn>,
    rows: Vec<RowKey>,
    /// Cells whose value was defined by convention (zero-power coherence).
    degenerate: usize,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(values: Array2<T>, columns: Vec<FeatureColumn>, rows: Vec<RowKey>) -> Result<Self> {
        if values.ncols() != columns.len() || values.nrows() != rows.len() {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but has {} row keys and {} columns",
                values.nrows(),
                values.ncols(),
                rows.len(),
                columns.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / values.ncols().max(1), pos % values.ncols().max(1));
            return Err(Error::invalid(format!(
                "non-finite value at row {r}, column {}",
                columns[c]
            )));
        }
        Ok(FeatureMatrix {
            values,
            columns,
            rows,
            degenerate: 0,
        })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.to_string()).collect()
    }

    pub fn rows(&self) -> &[RowKey] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    pub(crate) fn set_degenerate_count(&mut self, n: usize) {
        self.degenerate = n;
    }

    /// Horizontal concatenation; `self`'s columns come first.
    pub fn hconcat(&self, other: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if self.rows != other.rows {
            return Err(Error::invalid("cannot concatenate matrices with different rows"));
        }
        let values = concatenate(Axis(1), &[self.values.view(), other.values.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Ok(FeatureMatrix {
            values,
            columns,
            rows: self.rows.clone(),
            degenerate: self.degenerate + other.degenerate,
        })
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix<T> {
        FeatureMatrix {
            values: self.values.select(Axis(0), idx),
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            degenerate: 0,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix<T> {
        FeatureMatrix {
            values: self.values.select(Axis(1), idx),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows.clone(),
            degenerate: 0,
        }
    }

    /// Writes the matrix as CSV (header = column names) and, next to it, a
    /// JSON array of per-row metadata.
    pub fn write_csv(&self, csv_path: &Path, sidecar_path: &Path, labels: Option<&[String]>) -> Result<()> {
        if let Some(l) = labels {
            if l.len() != self.n_rows() {
                return Err(Error::invalid("label count does not match row count"));
            }
        }
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
        w.write_record(self.columns.iter().map(|c| c.to_string()))
            .map_err(|e| Error::csv(csv_path, e))?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| Error::csv(csv_path, e))?;
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;

        let meta: Vec<RowMeta> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, k)| RowMeta {
                trial_id: k.trial_id,
                window_index: k.window_index,
                label: labels.map(|l| l[i].clone()),
            })
            .collect();
        let f = File::create(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &meta)?;
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`], returning the
    /// per-row sidecar records too.
    pub fn read_csv(csv_path: &Path, sidecar_path: &Path) -> Result<(FeatureMatrix<T>, Vec<RowMeta>)> {
        let f = File::open(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let meta: Vec<RowMeta> = serde_json::from_reader(BufReader::new(f))?;
        let mut r = csv::Reader::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
        let columns = r
            .headers()
            .map_err(|e| Error::csv(csv_path, e))?
            .iter()
            .map(str::parse)
            .collect::<Result<Vec<FeatureColumn>>>()?;
        let mut flat = Vec::with_capacity(meta.len() * columns.len());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(csv_path, e))?;
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|e| Error::Format(format!("{}: `{field}`: {e}", csv_path.display())))?;
                flat.push(T::lit(v));
            }
        }
        let n_rows = if columns.is_empty() {
            0
        } else {
            flat.len() / columns.len()
        };
        if n_rows != meta.len() {
            return Err(Error::Format(format!(
                "{} has {n_rows} rows but sidecar lists {}",
                csv_path.display(),
                meta.len()
            )));
        }
        let values = Array2::from_shape_vec((n_rows, columns.len()), flat).map_err(|e| Error::Format(e.to_string()))?;
        let rows = meta
            .iter()
            .map(|m| RowKey {
                trial_id: m.trial_id,
                window_index: m.window_index,
            })
            .collect();
        Ok((FeatureMatrix::new(values, columns, rows)?, meta))
    }
}
