//! Seeded experiment runners.
//!
//! Replications run in parallel but every random draw comes from a stream
//! keyed by (replication seed, purpose), and every floating-point reduction
//! runs in a fixed order, so results do not depend on the thread count.

use std::collections::BTreeMap;

use hte_core::datapipe::{self, Dataset, ProvenanceStep};
use hte_core::metrics::{rate_fit, RateFit};
use hte_core::rng::{purpose, replication_seed, stream};
use hte_core::{
    fit_ahte, fit_ensemble, DensityEstimate, DensitySpec, Error, EvalReport, KdeModel, Points,
    Result, StretchConfig, SynthType,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    GapConfig, Method, ParamStudyConfig, RateConfig, RealBenchConfig, StretchPair, SynthBenchConfig,
};
use crate::output::ResultRow;

/// Bundled 500×6 stand-in for a real dataset.
pub const FIXTURE_CSV: &str = include_str!("../fixtures/fixture.csv");

/// Averages of the first `t` members for every `t` in `sizes`, accumulated
/// in member order. Equal to evaluating a fitted ensemble of `t` members.
fn prefix_densities<M: DensityEstimate>(
    members: &[M],
    test: &Points,
    sizes: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut sum = vec![0.0; test.len()];
    let mut out = BTreeMap::new();
    for (i, member) in members.iter().enumerate() {
        for (s, v) in sum.iter_mut().zip(member.densities(test)?) {
            *s += v;
        }
        let t = i + 1;
        if sizes.contains(&t) {
            out.insert(t, sum.iter().map(|s| s / t as f64).collect());
        }
    }
    Ok(out)
}

fn first_rows(pool: &Points, n: usize) -> Points {
    pool.select(&(0..n).collect::<Vec<_>>())
}

struct Draw {
    train: Points,
    test: Points,
    truth: Vec<f64>,
}

fn draw(spec: &DensitySpec, n_train: usize, n_test: usize, seed: u64) -> Result<Draw> {
    let train = spec.sample(n_train, &mut stream(seed, purpose::TRAIN));
    let test = spec.sample(n_test, &mut stream(seed, purpose::TEST));
    let truth = spec.pdfs(&test)?;
    Ok(Draw { train, test, truth })
}

fn flatten(parts: Vec<Result<Vec<ResultRow>>>) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p?);
    }
    crate::output::sort_rows(&mut rows);
    Ok(rows)
}

/// Single and ensemble NHTE accuracy against training-set size on the
/// Beta toy density. Training sets of one replication are nested.
pub fn run_ensemble_gap(cfg: &GapConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let spec = DensitySpec::make(SynthType::BetaToy, cfg.d)?;
    let n_max = *cfg.n_train.iter().max().expect("validated non-empty");
    let t_max = *cfg.members.iter().max().expect("validated non-empty");
    let parts = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(cfg.seed, rep);
            let Draw { train: pool, test, truth } = draw(&spec, n_max, cfg.n_test, seed)?;
            let mut rows = Vec::new();
            for &n in &cfg.n_train {
                let train = first_rows(&pool, n);
                let stretch = StretchConfig::from_data(&train, cfg.s_min_exp, cfg.s_max_exp)?;
                let model = fit_ensemble(&train, t_max, &stretch, seed)?;
                for (t, est) in prefix_densities(model.members(), &test, &cfg.members)? {
                    let report = EvalReport::score(&est, Some(&truth))?;
                    rows.push(ResultRow {
                        dataset: SynthType::BetaToy.name().to_string(),
                        method: Method::Nhte.name().to_string(),
                        d: cfg.d,
                        n,
                        t: Some(t),
                        m: None,
                        s_min_exp: Some(cfg.s_min_exp),
                        s_max_exp: Some(cfg.s_max_exp),
                        seed,
                        anll: report.anll,
                        mae: report.mae,
                        epsilon_hits: report.epsilon_hits,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    flatten(parts)
}

/// Hyper-parameter grids and ensemble size shared by the benchmarks.
#[derive(Debug, Clone)]
pub struct Tuning {
    pub methods: Vec<Method>,
    pub members: usize,
    pub m_grid: Vec<usize>,
    pub stretch_grid: Vec<StretchPair>,
    pub validation_fraction: f64,
}

impl From<&SynthBenchConfig> for Tuning {
    fn from(c: &SynthBenchConfig) -> Self {
        Self {
            methods: c.methods.clone(),
            members: c.members,
            m_grid: c.m_grid.clone(),
            stretch_grid: c.stretch_grid.clone(),
            validation_fraction: c.validation_fraction,
        }
    }
}

impl From<&RealBenchConfig> for Tuning {
    fn from(c: &RealBenchConfig) -> Self {
        Self {
            methods: c.methods.clone(),
            members: c.members,
            m_grid: c.m_grid.clone(),
            stretch_grid: c.stretch_grid.clone(),
            validation_fraction: c.validation_fraction,
        }
    }
}

/// Index of the smallest score; the first wins ties.
fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}

fn validation_split(train: &Points, fraction: f64, seed: u64) -> Result<(Points, Points)> {
    let parts = datapipe::split_indices(
        train.len(),
        &[fraction],
        &mut stream(seed, purpose::VALIDATION_SPLIT),
    )?;
    Ok((train.select(&parts[0]), train.select(&parts[1])))
}

/// `min_samples_split` with the smallest validation ANLL.
pub fn select_min_samples_split(
    fit: &Points,
    validation: &Points,
    grid: &[usize],
    members: usize,
    seed: u64,
) -> Result<usize> {
    let scores = grid
        .iter()
        .map(|&m| {
            let model = fit_ahte(fit, members, m, seed)?;
            Ok(EvalReport::score(&model.densities(validation)?, None)?.anll)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid[argmin(&scores)])
}

/// Stretch interval with the smallest validation ANLL.
pub fn select_stretch(
    fit: &Points,
    validation: &Points,
    grid: &[StretchPair],
    members: usize,
    seed: u64,
) -> Result<StretchPair> {
    let scores = grid
        .iter()
        .map(|&(lo, hi)| {
            let cfg = StretchConfig::from_data(fit, lo, hi)?;
            let model = fit_ensemble(fit, members, &cfg, seed)?;
            Ok(EvalReport::score(&model.densities(validation)?, None)?.anll)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid[argmin(&scores)])
}

/// Tune on a validation split of `train`, refit on all of it, score on `test`.
pub fn run_methods(
    dataset: &str,
    train: &Points,
    test: &Points,
    truth: Option<&[f64]>,
    tuning: &Tuning,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let needs_split = tuning.methods.iter().any(|m| *m != Method::Kde);
    let split = if needs_split {
        Some(validation_split(train, tuning.validation_fraction, seed)?)
    } else {
        None
    };
    let row = |method: Method, t, m, stretch: Option<StretchPair>, report: EvalReport| ResultRow {
        dataset: dataset.to_string(),
        method: method.name().to_string(),
        d: train.dim(),
        n: train.len(),
        t,
        m,
        s_min_exp: stretch.map(|s| s.0),
        s_max_exp: stretch.map(|s| s.1),
        seed,
        anll: report.anll,
        mae: report.mae,
        epsilon_hits: report.epsilon_hits,
    };
    let mut rows = Vec::new();
    for &method in &tuning.methods {
        match method {
            Method::Ahte => {
                let (fit, val) = split.as_ref().expect("split exists for HTE methods");
                let m = select_min_samples_split(fit, val, &tuning.m_grid, tuning.members, seed)?;
                let model = fit_ahte(train, tuning.members, m, seed)?;
                let report = EvalReport::score(&model.densities(test)?, truth)?;
                rows.push(row(method, Some(tuning.members), Some(m), None, report));
            }
            Method::Nhte => {
                let (fit, val) = split.as_ref().expect("split exists for HTE methods");
                let pair = select_stretch(fit, val, &tuning.stretch_grid, tuning.members, seed)?;
                let cfg = StretchConfig::from_data(train, pair.0, pair.1)?;
                let model = fit_ensemble(train, tuning.members, &cfg, seed)?;
                let report = EvalReport::score(&model.densities(test)?, truth)?;
                rows.push(row(method, Some(tuning.members), None, Some(pair), report));
            }
            Method::Kde => {
                let model = KdeModel::fit(train)?;
                let report = EvalReport::score(&model.densities(test)?, truth)?;
                rows.push(row(method, None, None, None, report));
            }
        }
    }
    Ok(rows)
}

/// Tuned NHTE, AHTE and KDE on the synthetic types.
pub fn run_synth_bench(cfg: &SynthBenchConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let tuning = Tuning::from(cfg);
    let mut tasks = Vec::new();
    for &ty in &cfg.types {
        for &d in &cfg.dims {
            for rep in 0..cfg.replications {
                tasks.push((ty, d, rep));
            }
        }
    }
    let parts = tasks
        .into_par_iter()
        .map(|(ty, d, rep)| {
            let seed = replication_seed(cfg.seed, rep);
            let spec = DensitySpec::make(ty, d)?;
            let data = draw(&spec, cfg.n_train, cfg.n_test, seed)?;
            run_methods(ty.name(), &data.train, &data.test, Some(&data.truth), &tuning, seed)
        })
        .collect();
    flatten(parts)
}

/// AHTE accuracy over a grid of ensemble sizes and `min_samples_split`.
pub fn run_param_study(cfg: &ParamStudyConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let t_max = *cfg.members.iter().max().expect("validated non-empty");
    let mut tasks = Vec::new();
    for &ty in &cfg.types {
        for &d in &cfg.dims {
            for rep in 0..cfg.replications {
                for &m in cfg.grid_for(d)? {
                    tasks.push((ty, d, rep, m));
                }
            }
        }
    }
    let parts = tasks
        .into_par_iter()
        .map(|(ty, d, rep, m)| {
            let seed = replication_seed(cfg.seed, rep);
            let spec = DensitySpec::make(ty, d)?;
            let data = draw(&spec, cfg.n_train, cfg.n_test, seed)?;
            let model = fit_ahte(&data.train, t_max, m, seed)?;
            prefix_densities(model.members(), &data.test, &cfg.members)?
                .into_iter()
                .map(|(t, est)| {
                    let report = EvalReport::score(&est, Some(&data.truth))?;
                    Ok(ResultRow {
                        dataset: ty.name().to_string(),
                        method: Method::Ahte.name().to_string(),
                        d,
                        n: cfg.n_train,
                        t: Some(t),
                        m: Some(m),
                        s_min_exp: None,
                        s_max_exp: None,
                        seed,
                        anll: report.anll,
                        mae: report.mae,
                        epsilon_hits: report.epsilon_hits,
                    })
                })
                .collect()
        })
        .collect();
    flatten(parts)
}

/// Deterministic bin widths and ensemble size for one training-set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub single_width: f64,
    pub ensemble_width: f64,
    pub ensemble_members: usize,
}

impl RateSchedule {
    /// Widths `c₁·σ̂·n^{-1/(2+d)}` and `c₂·σ̂·(n/ln n)^{-1/(2(1+α)+d)}`, with
    /// `⌈n^{2α/(2(1+α)+d)}⌉` ensemble members.
    pub fn new(cfg: &RateConfig, n: usize, sigma: f64) -> Self {
        let d = cfg.d as f64;
        let n = n as f64;
        let denom = 2.0 * (1.0 + cfg.alpha) + d;
        Self {
            single_width: cfg.single_width_constant * sigma * n.powf(-1.0 / (2.0 + d)),
            ensemble_width: cfg.ensemble_constant() * sigma * (n / n.ln()).powf(-1.0 / denom),
            ensemble_members: n.powf(2.0 * cfg.alpha / denom).ceil() as usize,
        }
    }
}

/// Pooled per-dimension standard deviation `sqrt(trace(V)/d)`.
pub fn pooled_sigma(data: &Points) -> Result<f64> {
    let d = data.dim();
    let cov = data.covariance()?;
    let sigma = ((0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateData("zero sample variance".to_string()));
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub fit: RateFit,
    /// Mean MAE over replications at each `n` of the grid.
    pub mean_mae: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_grid: Vec<usize>,
    pub single: RateCurve,
    pub ensemble: RateCurve,
    /// Ensemble slope minus single slope; negative when the ensemble converges faster.
    pub slope_gap: f64,
}

pub const SINGLE: &str = "nhte_single";
pub const ENSEMBLE: &str = "nhte_ensemble";

/// Single and ensemble MAE under the theoretical rate schedules.
pub fn run_rate_study(cfg: &RateConfig) -> Result<(Vec<ResultRow>, RateReport)> {
    cfg.validate()?;
    let spec = DensitySpec::make(SynthType::BetaToy, cfg.d)?;
    let n_max = *cfg.n_train.iter().max().expect("validated non-empty");
    let parts = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(cfg.seed, rep);
            let Draw { train: pool, test, truth } = draw(&spec, n_max, cfg.n_test, seed)?;
            let mut rows = Vec::new();
            for &n in &cfg.n_train {
                let train = first_rows(&pool, n);
                let schedule = RateSchedule::new(cfg, n, pooled_sigma(&train)?);
                for (method, width, members) in [
                    (SINGLE, schedule.single_width, 1),
                    (ENSEMBLE, schedule.ensemble_width, schedule.ensemble_members),
                ] {
                    let model = fit_ensemble(&train, members, &StretchConfig::fixed_width(width)?, seed)?;
                    let report = EvalReport::score(&model.densities(&test)?, Some(&truth))?;
                    rows.push(ResultRow {
                        dataset: SynthType::BetaToy.name().to_string(),
                        method: method.to_string(),
                        d: cfg.d,
                        n,
                        t: Some(members),
                        m: None,
                        s_min_exp: None,
                        s_max_exp: None,
                        seed,
                        anll: report.anll,
                        mae: report.mae,
                        epsilon_hits: report.epsilon_hits,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let rows = flatten(parts)?;

    let mut n_grid = cfg.n_train.clone();
    n_grid.sort_unstable();
    n_grid.dedup();
    let curve = |method: &str| -> Result<RateCurve> {
        let mean_mae: Vec<f64> = n_grid
            .iter()
            .map(|&n| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == method && r.n == n)
                    .filter_map(|r| r.mae)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let pairs: Vec<(f64, f64)> = n_grid.iter().map(|&n| n as f64).zip(mean_mae.iter().copied()).collect();
        Ok(RateCurve { fit: rate_fit(&pairs)?, mean_mae })
    };
    let single = curve(SINGLE)?;
    let ensemble = curve(ENSEMBLE)?;
    let report = RateReport {
        slope_gap: ensemble.fit.slope - single.fit.slope,
        n_grid,
        single,
        ensemble,
    };
    Ok((rows, report))
}

/// Preprocessed matrices per PCA dimension, with their provenance.
pub fn prepare_real_data(cfg: &RealBenchConfig) -> Result<(String, Vec<Dataset>)> {
    cfg.validate()?;
    let (name, mut ds) = match &cfg.data {
        Some(path) => {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".to_string());
            (name, datapipe::load_csv(path, &cfg.csv)?)
        }
        None => {
            let mut ds = datapipe::read_csv(FIXTURE_CSV.as_bytes(), &cfg.csv)?;
            if let Some(ProvenanceStep::Load { source, .. }) = ds.provenance.first_mut() {
                *source = "bundled fixture".to_string();
            }
            ("fixture".to_string(), ds)
        }
    };
    if let Some(threshold) = cfg.prune_threshold {
        ds = datapipe::prune_correlated(&ds, threshold)?;
    }
    if cfg.normalize {
        ds = datapipe::normalize_unit(&ds)?;
    }
    let reduced = cfg
        .pca_dims
        .iter()
        .map(|&k| {
            if k > ds.dim() {
                return Err(Error::InvalidConfig(format!(
                    "PCA dimension {k} exceeds the {} columns left after preprocessing",
                    ds.dim()
                )));
            }
            datapipe::pca_reduce(&ds, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, reduced))
}

/// Tuned methods on a preprocessed real dataset; ANLL only.
pub fn run_real_bench(cfg: &RealBenchConfig) -> Result<(Vec<ResultRow>, Vec<Dataset>)> {
    let (name, reduced) = prepare_real_data(cfg)?;
    let tuning = Tuning::from(cfg);
    let mut tasks = Vec::new();
    for (i, _) in reduced.iter().enumerate() {
        for rep in 0..cfg.replications {
            tasks.push((i, rep));
        }
    }
    let parts = tasks
        .into_par_iter()
        .map(|(i, rep)| {
            let seed = replication_seed(cfg.seed, rep);
            let parts = datapipe::split(
                &reduced[i],
                &[cfg.test_fraction],
                &mut stream(seed, purpose::TEST_SPLIT),
            )?;
            run_methods(&name, &parts[0].rows, &parts[1].rows, None, &tuning, seed)
        })
        .collect();
    Ok((flatten(parts)?, reduced))
}
