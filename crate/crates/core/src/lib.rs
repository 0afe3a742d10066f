//! Histogram transform ensembles for nonparametric density estimation.
//!
//! A histogram transform `H(x) = R·S·x + b` (random rotation, log-uniform
//! stretching, uniform translation) turns the unit integer lattice into a
//! randomized partition of the input space. Averaging the piecewise-constant
//! histogram densities of many such partitions gives a smooth estimate:
//!
//! * [`grid`]: naive ensembles over fixed unit bins in transformed space;
//! * [`adaptive`]: rotation-only transforms followed by recursive
//!   data-dependent splitting;
//! * [`kde`]: a Gaussian kernel density baseline;
//! * [`synth`], [`metrics`], [`datapipe`]: synthetic truths, accuracy
//!   measures and real-data preprocessing for benchmarking.
//!
//! ```
//! use hte_core::{fit_ensemble, DensityEstimate, DensitySpec, StretchConfig, SynthType};
//! use hte_core::rng::stream;
//!
//! let spec = DensitySpec::make(SynthType::BetaToy, 2).unwrap();
//! let train = spec.sample(500, &mut stream(1, 0));
//! let cfg = StretchConfig::from_data(&train, 0.0, 1.0).unwrap();
//! let model = fit_ensemble(&train, 20, &cfg, 7).unwrap();
//! let f = model.density(&[0.2, 0.25]).unwrap();
//! assert!(f > 0.0);
//! ```

pub mod adaptive;
pub mod datapipe;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod kde;
pub mod metrics;
pub mod model;
pub mod points;
pub mod rng;
pub mod synth;
pub mod transform;

pub use adaptive::{fit_ahte, select_split, AdaptiveMember, AdaptiveTree, CellBox, SplitDecision};
pub use ensemble::{DensityEstimate, EnsembleModel};
pub use error::{Error, Result};
pub use grid::{fit_ensemble, GridEstimator};
pub use kde::KdeModel;
pub use metrics::{anll, mae, rate_slope, EvalReport, ANLL_EPSILON};
pub use model::SavedModel;
pub use points::Points;
pub use synth::{DensitySpec, SynthType};
pub use transform::{HistogramTransform, RotationMatrix, StretchConfig};
