//! Versioned on-disk model format shared by the `fit` and `score` commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveMember, TreeRecord};
use crate::ensemble::{DensityEstimate, EnsembleModel};
use crate::error::Result;
use crate::grid::{GridEstimator, GridRecord};
use crate::kde::{KdeModel, KdeRecord};
use crate::points::Points;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "version")]
pub enum ModelFile {
    #[serde(rename = "nhte-v1")]
    Nhte { members: Vec<GridRecord> },
    #[serde(rename = "ahte-v1")]
    Ahte { members: Vec<TreeRecord> },
    #[serde(rename = "kde-v1")]
    Kde(KdeRecord),
}

/// A fitted model of any supported kind.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Nhte(EnsembleModel<GridEstimator>),
    Ahte(EnsembleModel<AdaptiveMember>),
    Kde(KdeModel),
}

impl SavedModel {
    pub fn to_file(&self) -> ModelFile {
        match self {
            SavedModel::Nhte(m) => ModelFile::Nhte {
                members: m.members().iter().map(GridRecord::from).collect(),
            },
            SavedModel::Ahte(m) => ModelFile::Ahte {
                members: m.members().iter().map(TreeRecord::from).collect(),
            },
            SavedModel::Kde(m) => ModelFile::Kde(KdeRecord::from(m)),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        Ok(match file {
            ModelFile::Nhte { members } => SavedModel::Nhte(EnsembleModel::new(
                members
                    .into_iter()
                    .map(GridEstimator::try_from)
                    .collect::<Result<_>>()?,
            )?),
            ModelFile::Ahte { members } => SavedModel::Ahte(EnsembleModel::new(
                members
                    .into_iter()
                    .map(AdaptiveMember::try_from)
                    .collect::<Result<_>>()?,
            )?),
            ModelFile::Kde(rec) => SavedModel::Kde(KdeModel::try_from(rec)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn estimator(&self) -> &dyn DensityEstimate {
        match self {
            SavedModel::Nhte(m) => m,
            SavedModel::Ahte(m) => m,
            SavedModel::Kde(m) => m,
        }
    }

    pub fn densities(&self, points: &Points) -> Result<Vec<f64>> {
        self.estimator().densities(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::fit_ahte;
    use crate::grid::fit_ensemble;
    use crate::transform::StretchConfig;

    fn data() -> Points {
        Points::from_rows(&[[0.1, 0.4], [0.3, 0.9], [0.6, 0.2], [0.8, 0.5], [0.2, 0.2], [0.5, 0.6]])
            .unwrap()
    }

    #[test]
    fn every_kind_round_trips_with_identical_densities() {
        let d = data();
        let cfg = StretchConfig::from_data(&d, 0.0, 1.0).unwrap();
        let models = [
            SavedModel::Nhte(fit_ensemble(&d, 3, &cfg, 1).unwrap()),
            SavedModel::Ahte(fit_ahte(&d, 3, 2, 1).unwrap()),
            SavedModel::Kde(KdeModel::fit(&d).unwrap()),
        ];
        let queries = Points::from_rows(&[[0.2, 0.3], [0.55, 0.55], [2.0, 2.0]]).unwrap();
        for m in models {
            let json = m.to_json().unwrap();
            let back = SavedModel::from_json(&json).unwrap();
            assert_eq!(m.densities(&queries).unwrap(), back.densities(&queries).unwrap());
            assert_eq!(json, back.to_json().unwrap());
        }
    }

    #[test]
    fn version_tags() {
        let d = data();
        let cfg = StretchConfig::from_data(&d, 0.0, 1.0).unwrap();
        let nhte = SavedModel::Nhte(fit_ensemble(&d, 1, &cfg, 1).unwrap()).to_json().unwrap();
        assert!(nhte.starts_with("{\"version\":\"nhte-v1\""));
        let ahte = SavedModel::Ahte(fit_ahte(&d, 1, 2, 1).unwrap()).to_json().unwrap();
        assert!(ahte.starts_with("{\"version\":\"ahte-v1\""));
    }
}
