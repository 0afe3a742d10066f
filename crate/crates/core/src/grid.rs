//! Naive histogram transform estimator: fixed unit bins in the transformed
//! space, counted sparsely, averaged over random transforms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_members, DensityEstimate, EnsembleModel};
use crate::error::{Error, Result};
use crate::points::{check_dim, check_finite, Points};
use crate::rng::stream;
use crate::transform::{HistogramTransform, StretchConfig, TransformRecord};

/// Piecewise-constant density on the partition induced by one transform.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimator {
    transform: HistogramTransform,
    counts: HashMap<Vec<i64>, u64>,
    n: u64,
    volume: f64,
}

impl GridEstimator {
    /// Count the training points falling in each occupied cell.
    pub fn fit(data: &Points, transform: HistogramTransform) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        check_dim(transform.dim(), data.dim())?;
        let d = data.dim();
        let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
        let mut buf = vec![0.0; d];
        let mut index = vec![0; d];
        for x in data.rows() {
            check_finite(x)?;
            transform.bin_index_into(x, &mut buf, &mut index)?;
            match counts.get_mut(index.as_slice()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(index.clone(), 1);
                }
            }
        }
        let volume = transform.cell_volume();
        Ok(Self {
            transform,
            counts,
            n: data.len() as u64,
            volume,
        })
    }

    pub fn transform(&self) -> &HistogramTransform {
        &self.transform
    }

    pub fn counts(&self) -> &HashMap<Vec<i64>, u64> {
        &self.counts
    }

    pub fn count(&self, index: &[i64]) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume
    }

    /// `Σ_cells density · volume`; equals 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let norm = self.n as f64 * self.volume;
        self.counts
            .values()
            .map(|&c| c as f64 / norm * self.volume)
            .sum()
    }

    /// Occupied cells sorted by index.
    pub fn sorted_cells(&self) -> Vec<(Vec<i64>, u64)> {
        let mut cells: Vec<_> = self.counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
        cells.sort();
        cells
    }
}

impl DensityEstimate for GridEstimator {
    fn dim(&self) -> usize {
        self.transform.dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        let d = self.dim();
        let mut buf = vec![0.0; d];
        let mut index = vec![0; d];
        self.transform.bin_index_into(x, &mut buf, &mut index)?;
        let count = self.count(&index);
        Ok(count as f64 / (self.n as f64 * self.volume))
    }
}

/// Fit `T` grid estimators on independent random transforms.
///
/// Member `t` draws its transform from stream `t` of `seed`.
pub fn fit_ensemble(
    data: &Points,
    members: usize,
    cfg: &StretchConfig,
    seed: u64,
) -> Result<EnsembleModel<GridEstimator>> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    cfg.validate()?;
    let d = data.dim();
    let fitted = fit_members(members, |t| {
        let mut rng = stream(seed, t as u64);
        let transform = HistogramTransform::sample(d, cfg, &mut rng)?.with_seed(seed);
        GridEstimator::fit(data, transform)
    })?;
    EnsembleModel::new(fitted)
}

/// Serialized grid member: transform plus sorted `(index, count)` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRecord {
    pub transform: TransformRecord,
    pub n: u64,
    pub cells: Vec<(Vec<i64>, u64)>,
}

impl From<&GridEstimator> for GridRecord {
    fn from(g: &GridEstimator) -> Self {
        Self {
            transform: TransformRecord::from(&g.transform),
            n: g.n,
            cells: g.sorted_cells(),
        }
    }
}

impl TryFrom<GridRecord> for GridEstimator {
    type Error = Error;

    fn try_from(rec: GridRecord) -> Result<Self> {
        let transform = HistogramTransform::try_from(rec.transform)?;
        let d = transform.dim();
        let mut counts = HashMap::with_capacity(rec.cells.len());
        let mut total = 0u64;
        for (index, count) in rec.cells {
            check_dim(d, index.len())?;
            if count == 0 {
                return Err(Error::Model("stored cell with zero count".to_string()));
            }
            total += count;
            if counts.insert(index, count).is_some() {
                return Err(Error::Model("duplicate cell index".to_string()));
            }
        }
        if total != rec.n {
            return Err(Error::Model(format!(
                "cell counts sum to {total}, expected n = {}",
                rec.n
            )));
        }
        let volume = transform.cell_volume();
        Ok(Self {
            transform,
            counts,
            n: rec.n,
            volume,
        })
    }
}
