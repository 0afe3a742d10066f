use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::{check_dim, Points};

/// A fitted density estimate that can be evaluated pointwise.
pub trait DensityEstimate: Send + Sync {
    fn dim(&self) -> usize;

    fn density(&self, x: &[f64]) -> Result<f64>;

    /// Densities at every row of `points`, evaluated in parallel.
    fn densities(&self, points: &Points) -> Result<Vec<f64>> {
        check_dim(self.dim(), points.dim())?;
        points
            .as_slice()
            .par_chunks_exact(points.dim())
            .map(|x| self.density(x))
            .collect()
    }
}

/// Average of `T` fitted members of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<M> {
    members: Vec<M>,
}

impl<M: DensityEstimate> EnsembleModel<M> {
    pub fn new(members: Vec<M>) -> Result<Self> {
        let first = members.first().ok_or_else(|| {
            Error::InvalidConfig("an ensemble needs at least one member".to_string())
        })?;
        let d = first.dim();
        for m in &members {
            check_dim(d, m.dim())?;
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn into_members(self) -> Vec<M> {
        self.members
    }

    /// Number of members `T`.
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// The ensemble formed by the first `t` members.
    pub fn truncated(&self, t: usize) -> Result<Self>
    where
        M: Clone,
    {
        if t == 0 || t > self.members.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot take {t} of {} members",
                self.members.len()
            )));
        }
        Self::new(self.members[..t].to_vec())
    }
}

impl<M: DensityEstimate> DensityEstimate for EnsembleModel<M> {
    fn dim(&self) -> usize {
        self.members[0].dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for m in &self.members {
            total += m.density(x)?;
        }
        Ok(total / self.members.len() as f64)
    }
}

/// Member streams are consumed in index order so that the first `t` members
/// of a `T`-member fit equal a `t`-member fit with the same seed.
pub(crate) fn fit_members<M, F>(count: usize, fit: F) -> Result<Vec<M>>
where
    M: Send,
    F: Fn(usize) -> Result<M> + Sync + Send,
{
    if count == 0 {
        return Err(Error::InvalidConfig(
            "ensemble size T must be at least 1".to_string(),
        ));
    }
    (0..count).into_par_iter().map(fit).collect()
}
