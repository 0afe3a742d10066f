//! Real-data ingestion and preprocessing.
//!
//! A [`Dataset`] carries its matrix, its column names and an append-only log
//! of every step applied to it, so exported matrices can be traced back to
//! the input file and parameters.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ProvenanceStep {
    Load {
        source: String,
        rows: usize,
        columns: usize,
        dropped_columns: Vec<String>,
    },
    PruneCorrelated {
        threshold: f64,
        /// `(dropped, kept partner, |r|)` in drop order.
        dropped: Vec<(String, String, f64)>,
    },
    NormalizeUnit {
        /// `(column, min, max)` before scaling.
        ranges: Vec<(String, f64, f64)>,
        constant_columns: Vec<String>,
    },
    PcaReduce {
        k: usize,
        explained_variance_ratio: Vec<f64>,
    },
    Split {
        seed_stream: Option<u64>,
        part: usize,
        fractions: Vec<f64>,
        rows: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Points,
    pub column_names: Vec<String>,
    pub provenance: Vec<ProvenanceStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub delimiter: char,
    pub header: bool,
    /// Columns removed after loading (by header name, or `col<j>` without a header).
    pub drop_columns: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            header: true,
            drop_columns: Vec::new(),
        }
    }
}

impl Dataset {
    pub fn new(rows: Points, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != rows.dim() {
            return Err(Error::DimensionMismatch {
                expected: rows.dim(),
                actual: column_names.len(),
            });
        }
        rows.check_finite()?;
        Ok(Self {
            rows,
            column_names,
            provenance: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    fn with_step(mut self, step: ProvenanceStep) -> Self {
        self.provenance.push(step);
        self
    }

    fn keep_columns(&self, keep: &[usize]) -> Result<Points> {
        let mut values = Vec::with_capacity(self.len() * keep.len());
        for row in self.rows.rows() {
            values.extend(keep.iter().map(|&j| row[j]));
        }
        Points::new(keep.len(), values)
    }

    /// Write the matrix as CSV plus a `<path>.provenance.json` sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.column_names)?;
        for row in self.rows.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".provenance.json");
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.provenance)?)?;
        Ok(())
    }
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(file, options)?;
    if let Some(ProvenanceStep::Load { source, .. }) = ds.provenance.first_mut() {
        *source = path.display().to_string();
    }
    Ok(ds)
}

/// Parse delimited numeric text. Parse errors report 1-based data row and column.
pub fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    if !options.delimiter.is_ascii() {
        return Err(Error::InvalidConfig(format!(
            "delimiter {:?} is not ASCII",
            options.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(options.header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = if options.header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut values = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
                row,
                column: (*len as usize).min(*expected_len as usize) + 1,
                message: format!("ragged row: expected {expected_len} fields, found {len}"),
            },
            _ => Error::from(e),
        })?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: record.len().min(w) + 1,
                message: format!("ragged row: expected {w} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
    }
    let width = width.ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let names = names
        .take()
        .unwrap_or_else(|| (0..width).map(|j| format!("col{j}")).collect());
    let all = Dataset::new(Points::new(width, values)?, names)?;

    for name in &options.drop_columns {
        if !all.column_names.contains(name) {
            return Err(Error::InvalidConfig(format!("no column named {name:?} to drop")));
        }
    }
    let keep: Vec<usize> = (0..all.dim())
        .filter(|&j| !options.drop_columns.contains(&all.column_names[j]))
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidConfig("every column was dropped".to_string()));
    }
    let rows = all.keep_columns(&keep)?;
    let column_names = keep.iter().map(|&j| all.column_names[j].clone()).collect();
    let ds = Dataset::new(rows, column_names)?;
    let step = ProvenanceStep::Load {
        source: "<reader>".to_string(),
        rows: ds.len(),
        columns: ds.dim(),
        dropped_columns: options.drop_columns.clone(),
    };
    Ok(ds.with_step(step))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Repeatedly drop the higher-indexed column of the first pair (in index
/// order) whose absolute Pearson correlation exceeds `threshold`.
pub fn prune_correlated(ds: &Dataset, threshold: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "correlation threshold {threshold} outside [0, 1]"
        )));
    }
    let mut columns: Vec<(String, Vec<f64>)> = (0..ds.dim())
        .map(|j| (ds.column_names[j].clone(), ds.rows.column(j)))
        .collect();
    let mut dropped = Vec::new();
    'scan: loop {
        for i in 0..columns.len() {
            for j in i + 1..columns.len() {
                let r = pearson(&columns[i].1, &columns[j].1).abs();
                if r > threshold {
                    let (name, _) = columns.remove(j);
                    dropped.push((name, columns[i].0.clone(), r));
                    continue 'scan;
                }
            }
        }
        break;
    }
    let n = ds.len();
    let mut values = Vec::with_capacity(n * columns.len());
    for i in 0..n {
        values.extend(columns.iter().map(|(_, c)| c[i]));
    }
    let mut out = Dataset::new(
        Points::new(columns.len(), values)?,
        columns.into_iter().map(|(name, _)| name).collect(),
    )?;
    out.provenance = ds.provenance.clone();
    Ok(out.with_step(ProvenanceStep::PruneCorrelated { threshold, dropped }))
}

/// Min-max scale every column onto `[0, 1]`; constant columns become zeros.
pub fn normalize_unit(ds: &Dataset) -> Result<Dataset> {
    let d = ds.dim();
    let mut ranges = Vec::with_capacity(d);
    let mut constant_columns = Vec::new();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in ds.rows.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    for j in 0..d {
        ranges.push((ds.column_names[j].clone(), lo[j], hi[j]));
        if !(hi[j] > lo[j]) {
            constant_columns.push(ds.column_names[j].clone());
        }
    }
    let rows = ds.rows.map_rows(d, |x, out| {
        for j in 0..d {
            let span = hi[j] - lo[j];
            out[j] = if span > 0.0 {
                ((x[j] - lo[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    })?;
    let mut out = Dataset::new(rows, ds.column_names.clone())?;
    out.provenance = ds.provenance.clone();
    Ok(out.with_step(ProvenanceStep::NormalizeUnit {
        ranges,
        constant_columns,
    }))
}

/// Project centered data onto its top-`k` principal directions. Each
/// direction is signed so that its largest-magnitude loading is positive.
pub fn pca_reduce(ds: &Dataset, k: usize) -> Result<Dataset> {
    let d = ds.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidConfig(format!(
            "PCA target dimension {k} must lie in 1..={d}"
        )));
    }
    let mean = ds.rows.mean();
    let cov = DMatrix::from_row_slice(d, d, &ds.rows.covariance()?);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut directions = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let mut lead = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        directions.push(v);
        explained.push(if total > 0.0 {
            eig.eigenvalues[c].max(0.0) / total
        } else {
            0.0
        });
    }

    let rows = ds.rows.map_rows(k, |x, out| {
        for (o, dir) in out.iter_mut().zip(&directions) {
            *o = dir
                .iter()
                .zip(x.iter().zip(&mean))
                .map(|(w, (v, m))| w * (v - m))
                .sum();
        }
    })?;
    let mut out = Dataset::new(rows, (1..=k).map(|i| format!("pc{i}")).collect())?;
    out.provenance = ds.provenance.clone();
    Ok(out.with_step(ProvenanceStep::PcaReduce {
        k,
        explained_variance_ratio: explained,
    }))
}

/// Random disjoint index sets: the parts sized `round(n · f)` for each of
/// `fractions`, preceded by the remainder.
pub fn split_indices<R: Rng + ?Sized>(n: usize, fractions: &[f64], rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f > 0.0)) || total >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "split fractions {fractions:?} must be positive with sum below 1"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (n as f64 * f).round() as usize)
        .collect();
    let held: usize = sizes.iter().sum();
    if held >= n {
        return Err(Error::InsufficientData { needed: held + 1, got: n });
    }
    let mut parts = vec![perm[..n - held].to_vec()];
    let mut start = n - held;
    for s in sizes {
        parts.push(perm[start..start + s].to_vec());
        start += s;
    }
    Ok(parts)
}

pub fn split<R: Rng + ?Sized>(ds: &Dataset, fractions: &[f64], rng: &mut R) -> Result<Vec<Dataset>> {
    let parts = split_indices(ds.len(), fractions, rng)?;
    parts
        .into_iter()
        .enumerate()
        .map(|(part, idx)| {
            let mut out = Dataset::new(ds.rows.select(&idx), ds.column_names.clone())?;
            out.provenance = ds.provenance.clone();
            let rows = out.len();
            Ok(out.with_step(ProvenanceStep::Split {
                seed_stream: None,
                part,
                fractions: fractions.to_vec(),
                rows,
            }))
        })
        .collect()
}
