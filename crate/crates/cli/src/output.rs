//! Result tables, summaries and run manifests.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hte_core::metrics::{mean_std, ANLL_EPSILON};
use hte_core::Result;
use serde::{Deserialize, Serialize};

/// One scored fit. The column set is shared by every experiment; fields that
/// do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub m: Option<usize>,
    pub s_min_exp: Option<f64>,
    pub s_max_exp: Option<f64>,
    pub seed: u64,
    pub anll: f64,
    pub mae: Option<f64>,
    pub epsilon_hits: usize,
}

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

impl ResultRow {
    fn sort_cmp(&self, other: &Self) -> Ordering {
        self.dataset
            .cmp(&other.dataset)
            .then(self.d.cmp(&other.d))
            .then(self.method.cmp(&other.method))
            .then(self.n.cmp(&other.n))
            .then(self.t.cmp(&other.t))
            .then(self.m.cmp(&other.m))
            .then(cmp_opt_f64(self.s_min_exp, other.s_min_exp))
            .then(cmp_opt_f64(self.s_max_exp, other.s_max_exp))
            .then(self.seed.cmp(&other.seed))
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_cmp(b));
}

/// Mean and standard deviation over replications of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub m: Option<usize>,
    pub s_min_exp: Option<f64>,
    pub s_max_exp: Option<f64>,
    pub replications: usize,
    pub anll_mean: f64,
    pub anll_std: f64,
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub epsilon_hits: usize,
}

/// Group sorted rows by everything but the seed. With `pool_tuning`, rows
/// that differ only in their selected `m` or stretch interval are pooled.
pub fn summarize(rows: &[ResultRow], pool_tuning: bool) -> Vec<SummaryRow> {
    let mut sorted = rows.to_vec();
    if pool_tuning {
        for r in &mut sorted {
            r.m = None;
            r.s_min_exp = None;
            r.s_max_exp = None;
        }
    }
    sort_rows(&mut sorted);
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let head = &sorted[start];
        let mut end = start + 1;
        while end < sorted.len() && {
            let mut probe = sorted[end].clone();
            probe.seed = head.seed;
            probe.sort_cmp(head) == Ordering::Equal
        } {
            end += 1;
        }
        let group = &sorted[start..end];
        let anll: Vec<f64> = group.iter().map(|r| r.anll).collect();
        let (anll_mean, anll_std) = mean_std(&anll);
        let mae: Option<Vec<f64>> = group.iter().map(|r| r.mae).collect();
        let (mae_mean, mae_std) = match mae {
            Some(v) => {
                let (m, s) = mean_std(&v);
                (Some(m), Some(s))
            }
            None => (None, None),
        };
        out.push(SummaryRow {
            dataset: head.dataset.clone(),
            method: head.method.clone(),
            d: head.d,
            n: head.n,
            t: head.t,
            m: head.m,
            s_min_exp: head.s_min_exp,
            s_max_exp: head.s_max_exp,
            replications: group.len(),
            anll_mean,
            anll_std,
            mae_mean,
            mae_std,
            epsilon_hits: group.iter().map(|r| r.epsilon_hits).sum(),
        });
        start = end;
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(hte_core::Error::from))
        .collect()
}

/// Parameterizations that the numbers in a run depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub exponential: String,
    pub laplace: String,
    pub bins: String,
    pub quantiles: String,
    pub seeds: String,
    pub outside_support: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            exponential: "rate parameterization: Exp(0.5) has mean 2".into(),
            laplace: "scale parameterization: Laplace(0, 0.5) has variance 0.5".into(),
            bins: "half-open cells [k, k+1) in transformed space; split values go to the upper child".into(),
            quantiles: "linear interpolation between order statistics".into(),
            seeds: "replication seed = root seed + replication index; ensemble member t uses stream t of that seed".into(),
            outside_support: "adaptive trees return 0 outside the padded bounding box of their training cloud".into(),
        }
    }
}

/// Everything needed to rerun an experiment bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub experiment: String,
    pub library_version: String,
    pub config: C,
    pub root_seed: u64,
    pub replication_seeds: Vec<u64>,
    pub epsilon: f64,
    pub conventions: Conventions,
    pub outputs: Vec<String>,
    /// Free-form per-experiment details (for example fitted slopes).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(experiment: &str, config: C, root_seed: u64, replications: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            root_seed,
            replication_seeds: (0..replications)
                .map(|r| hte_core::rng::replication_seed(root_seed, r))
                .collect(),
            epsilon: ANLL_EPSILON,
            conventions: Conventions::default(),
            outputs: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
