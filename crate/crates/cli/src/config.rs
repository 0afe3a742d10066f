//! Experiment configurations.
//!
//! Every field has a default equal to the published protocol, so `{}` is a
//! valid config for every experiment. Unknown keys are rejected.

use std::path::PathBuf;

use hte_core::datapipe::CsvOptions;
use hte_core::{Error, Result, SynthType};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nhte,
    Ahte,
    Kde,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nhte => "nhte",
            Method::Ahte => "ahte",
            Method::Kde => "kde",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nhte" => Ok(Method::Nhte),
            "ahte" => Ok(Method::Ahte),
            "kde" => Ok(Method::Kde),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// Log-stretch interval `(s_min_exp, s_max_exp)` around the reference scale.
pub type StretchPair = (f64, f64);

pub const DEFAULT_M_GRID: [usize; 5] = [1, 3, 10, 20, 40];
pub const DEFAULT_STRETCH_GRID: [StretchPair; 5] =
    [(0.0, 1.0), (-0.5, 0.5), (0.0, 0.5), (0.5, 1.0), (-1.0, 1.0)];

fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidConfig(message.into())
}

fn check_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(invalid(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn check_list(name: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if values.contains(&0) {
        return Err(invalid(format!("{name} entries must be at least 1")));
    }
    Ok(())
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {value}")));
    }
    Ok(())
}

fn check_stretch(pair: StretchPair) -> Result<()> {
    if !(pair.0.is_finite() && pair.1.is_finite() && pair.0 <= pair.1) {
        return Err(invalid(format!(
            "stretch interval ({}, {}) must be finite with min <= max",
            pair.0, pair.1
        )));
    }
    Ok(())
}

fn check_stretch_grid(grid: &[StretchPair]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("stretch_grid must not be empty"));
    }
    grid.iter().try_for_each(|p| check_stretch(*p))
}

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(invalid("methods must not be empty"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub seed: u64,
    pub replications: usize,
    pub d: usize,
    pub n_train: Vec<usize>,
    pub n_test: usize,
    pub members: Vec<usize>,
    pub s_min_exp: f64,
    pub s_max_exp: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 50,
            d: 2,
            n_train: vec![10, 20, 50, 100, 200, 500, 1000],
            n_test: 1000,
            members: vec![1, 2, 5, 20],
            s_min_exp: 0.0,
            s_max_exp: 1.0,
        }
    }
}

impl GapConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("replications", self.replications)?;
        check_positive("d", self.d)?;
        check_positive("n_test", self.n_test)?;
        check_list("n_train", &self.n_train)?;
        check_list("members", &self.members)?;
        if self.n_train.iter().any(|n| *n < 2) {
            return Err(invalid("n_train entries must be at least 2"));
        }
        check_stretch((self.s_min_exp, self.s_max_exp))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthBenchConfig {
    pub seed: u64,
    pub replications: usize,
    pub types: Vec<SynthType>,
    pub dims: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub members: usize,
    pub m_grid: Vec<usize>,
    pub stretch_grid: Vec<StretchPair>,
    pub validation_fraction: f64,
}

impl Default for SynthBenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 20,
            types: vec![SynthType::TypeI, SynthType::TypeII, SynthType::TypeIII, SynthType::TypeIV],
            dims: vec![2, 5],
            n_train: 2000,
            n_test: 10000,
            methods: vec![Method::Nhte, Method::Ahte, Method::Kde],
            members: 100,
            m_grid: DEFAULT_M_GRID.to_vec(),
            stretch_grid: DEFAULT_STRETCH_GRID.to_vec(),
            validation_fraction: 0.3,
        }
    }
}

impl SynthBenchConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("replications", self.replications)?;
        check_positive("n_test", self.n_test)?;
        check_positive("members", self.members)?;
        check_list("dims", &self.dims)?;
        check_list("m_grid", &self.m_grid)?;
        check_methods(&self.methods)?;
        check_stretch_grid(&self.stretch_grid)?;
        check_fraction("validation_fraction", self.validation_fraction)?;
        if self.types.is_empty() {
            return Err(invalid("types must not be empty"));
        }
        if self.types.contains(&SynthType::TypeIV) && self.dims.contains(&1) {
            return Err(invalid("type IV is undefined for d = 1"));
        }
        let held = (self.n_train as f64 * self.validation_fraction).round() as usize;
        if held < 1 || self.n_train - held < 2 {
            return Err(invalid(format!(
                "n_train = {} leaves no room for a validation split",
                self.n_train
            )));
        }
        Ok(())
    }
}

/// `m` values swept for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimGrid {
    pub d: usize,
    pub m: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamStudyConfig {
    pub seed: u64,
    pub replications: usize,
    pub types: Vec<SynthType>,
    pub dims: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    /// Ensemble sizes; every size is a prefix of one fit with the largest.
    pub members: Vec<usize>,
    pub m_grid: Vec<DimGrid>,
}

impl Default for ParamStudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 3,
            types: vec![SynthType::TypeI, SynthType::TypeII, SynthType::TypeIII, SynthType::TypeIV],
            dims: vec![2, 5],
            n_train: 2000,
            n_test: 10000,
            members: vec![5, 20, 100],
            m_grid: vec![
                DimGrid { d: 2, m: (1..=30).collect() },
                DimGrid { d: 5, m: (1..=50).collect() },
            ],
        }
    }
}

impl ParamStudyConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("replications", self.replications)?;
        check_positive("n_train", self.n_train)?;
        check_positive("n_test", self.n_test)?;
        check_list("dims", &self.dims)?;
        check_list("members", &self.members)?;
        if self.types.is_empty() {
            return Err(invalid("types must not be empty"));
        }
        if self.types.contains(&SynthType::TypeIV) && self.dims.contains(&1) {
            return Err(invalid("type IV is undefined for d = 1"));
        }
        for d in &self.dims {
            let grid = self.grid_for(*d)?;
            check_list(&format!("m grid for d = {d}"), grid)?;
        }
        Ok(())
    }

    pub fn grid_for(&self, d: usize) -> Result<&[usize]> {
        self.m_grid
            .iter()
            .find(|g| g.d == d)
            .map(|g| g.m.as_slice())
            .ok_or_else(|| invalid(format!("m_grid has no entry for d = {d}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub seed: u64,
    pub replications: usize,
    pub d: usize,
    pub n_train: Vec<usize>,
    pub n_test: usize,
    /// Smoothness exponent of the ensemble schedule.
    pub alpha: f64,
    /// Single-estimator widths are `single_width_constant · σ̂ · n^{-1/(2+d)}`.
    pub single_width_constant: f64,
    /// Ensemble widths are `ensemble_width_constant · σ̂` times the ensemble
    /// schedule term; `null` uses [`triangular_reference_constant`].
    pub ensemble_width_constant: Option<f64>,
}

/// Normal-reference bandwidth constant of the product triangular kernel,
/// the equivalent kernel of an average over uniformly shifted histograms:
/// the Gaussian rule `(4/(d+2))^{1/(d+4)}` rescaled by
/// `((R(K)/R(φ))^d (μ₂(φ)/μ₂(K))²)^{1/(d+4)}`.
pub fn triangular_reference_constant(d: usize) -> f64 {
    let d = d as f64;
    let roughness_ratio = (2.0 / 3.0) * 2.0 * std::f64::consts::PI.sqrt();
    let moment_ratio = 6.0;
    let gaussian = (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0));
    gaussian * (roughness_ratio.powf(d) * moment_ratio * moment_ratio).powf(1.0 / (d + 4.0))
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 20,
            d: 2,
            n_train: vec![250, 500, 1000, 2000, 4000, 8000, 16000],
            n_test: 2000,
            alpha: 1.0,
            single_width_constant: 3.5,
            ensemble_width_constant: None,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("replications", self.replications)?;
        check_positive("d", self.d)?;
        check_positive("n_test", self.n_test)?;
        check_list("n_train", &self.n_train)?;
        if self.n_train.len() < 3 {
            return Err(invalid("n_train needs at least three sizes to fit a slope"));
        }
        if self.n_train.iter().any(|n| *n < 3) {
            return Err(invalid("n_train entries must be at least 3"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        let constants = [Some(self.single_width_constant), self.ensemble_width_constant];
        if constants.iter().flatten().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(invalid("width constants must be positive"));
        }
        Ok(())
    }

    pub fn ensemble_constant(&self) -> f64 {
        self.ensemble_width_constant
            .unwrap_or_else(|| triangular_reference_constant(self.d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealBenchConfig {
    pub seed: u64,
    pub replications: usize,
    /// Input CSV; the bundled fixture when absent.
    pub data: Option<PathBuf>,
    pub csv: CsvOptions,
    /// Drop one column of every pair with `|r|` above this; `null` skips pruning.
    pub prune_threshold: Option<f64>,
    pub normalize: bool,
    pub pca_dims: Vec<usize>,
    pub test_fraction: f64,
    pub methods: Vec<Method>,
    pub members: usize,
    pub m_grid: Vec<usize>,
    pub stretch_grid: Vec<StretchPair>,
    pub validation_fraction: f64,
}

impl Default for RealBenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 5,
            data: None,
            csv: CsvOptions::default(),
            prune_threshold: Some(0.98),
            normalize: true,
            pca_dims: vec![2, 4],
            test_fraction: 0.3,
            methods: vec![Method::Nhte, Method::Ahte, Method::Kde],
            members: 100,
            m_grid: DEFAULT_M_GRID.to_vec(),
            stretch_grid: DEFAULT_STRETCH_GRID.to_vec(),
            validation_fraction: 0.3,
        }
    }
}

impl RealBenchConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("replications", self.replications)?;
        check_positive("members", self.members)?;
        check_list("pca_dims", &self.pca_dims)?;
        check_list("m_grid", &self.m_grid)?;
        check_methods(&self.methods)?;
        check_stretch_grid(&self.stretch_grid)?;
        check_fraction("test_fraction", self.test_fraction)?;
        check_fraction("validation_fraction", self.validation_fraction)?;
        if let Some(t) = self.prune_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(invalid(format!("prune_threshold must lie in (0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: Method,
    pub data: PathBuf,
    pub csv: CsvOptions,
    pub members: usize,
    pub min_samples_split: usize,
    pub s_min_exp: f64,
    pub s_max_exp: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("members", self.members)?;
        check_positive("min_samples_split", self.min_samples_split)?;
        check_stretch((self.s_min_exp, self.s_max_exp))
    }
}

/// Parse a config file: either a bare config object or a run manifest
/// carrying one under `"config"`.
pub fn parse_config<C: serde::de::DeserializeOwned>(text: &str) -> Result<C> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
    let inner = match value {
        serde_json::Value::Object(mut map) if map.contains_key("config") && map.contains_key("experiment") => {
            map.remove("config").expect("key checked")
        }
        other => other,
    };
    serde_json::from_value(inner).map_err(|e| invalid(format!("invalid config: {e}")))
}
