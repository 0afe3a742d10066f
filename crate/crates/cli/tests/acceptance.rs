//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run alone with `cargo test --release -p hte-cli --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hte_cli::config::{GapConfig, Method, RateConfig, SynthBenchConfig};
use hte_cli::experiments::{run_ensemble_gap, run_rate_study, run_synth_bench};
use hte_cli::output::{summarize, SummaryRow};
use hte_core::rng::stream;
use hte_core::transform::sample_rotation;
use hte_core::{
    anll, fit_ahte, fit_ensemble, mae, AdaptiveTree, DensityEstimate, DensitySpec, GridEstimator,
    Points, StretchConfig, SynthType,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const TABLE_TYPE_III_D2_AHTE: f64 = 3.1647;
const TABLE_TOLERANCE: f64 = 0.05;
const MASS_TOLERANCE: f64 = 1e-6;
const ROTATION_TOLERANCE: f64 = 1e-10;
const METRIC_TOLERANCE: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let (mean, std) = hte_core::metrics::mean_std(v);
    (mean, std / (v.len() as f64).sqrt())
}

fn ensemble_gap() -> Outcome {
    let cfg = GapConfig {
        n_train: vec![1000],
        members: vec![1, 5, 20],
        ..GapConfig::default()
    };
    let rows = run_ensemble_gap(&cfg).expect("ensemble-gap run");
    let mut by_seed: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in &rows {
        by_seed.entry(r.seed).or_default().insert(r.t.unwrap(), r.mae.unwrap());
    }
    let column = |t: usize| by_seed.values().map(|m| m[&t]).collect::<Vec<f64>>();
    let (m1, m5, m20) = (column(1), column(5), column(20));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    let (g15, se15) = mean_and_se(&diff(&m1, &m5));
    let (g520, se520) = mean_and_se(&diff(&m5, &m20));
    let pass = g15 > 2.0 * se15 && g520 > 2.0 * se520;
    outcome(
        pass,
        format!(
            "{} reps, mean MAE T=1 {:.4}, T=5 {:.4}, T=20 {:.4}; gaps {:.4} (2se {:.4}), {:.4} (2se {:.4})",
            by_seed.len(),
            mean_and_se(&m1).0,
            mean_and_se(&m5).0,
            mean_and_se(&m20).0,
            g15,
            2.0 * se15,
            g520,
            2.0 * se520
        ),
    )
}

fn synth_summary() -> Vec<SummaryRow> {
    let cfg = SynthBenchConfig {
        types: vec![SynthType::TypeII, SynthType::TypeIII, SynthType::TypeIV],
        dims: vec![2, 5],
        replications: 20,
        ..SynthBenchConfig::default()
    };
    summarize(&run_synth_bench(&cfg).expect("synth-bench run"), true)
}

fn mean_anll(summary: &[SummaryRow], dataset: &str, d: usize, method: Method) -> f64 {
    summary
        .iter()
        .find(|s| s.dataset == dataset && s.d == d && s.method == method.name())
        .map(|s| s.anll_mean)
        .expect("summary row present")
}

fn table_spot(summary: &[SummaryRow]) -> Outcome {
    let ahte = mean_anll(summary, "III", 2, Method::Ahte);
    let kde = mean_anll(summary, "III", 2, Method::Kde);
    let within = (ahte - TABLE_TYPE_III_D2_AHTE).abs() <= TABLE_TOLERANCE;
    outcome(
        within && ahte < kde,
        format!(
            "type III d=2 over 20 reps: AHTE {ahte:.4} (target {TABLE_TYPE_III_D2_AHTE} ± {TABLE_TOLERANCE}, off by {:+.4}), KDE {kde:.4}",
            ahte - TABLE_TYPE_III_D2_AHTE
        ),
    )
}

fn table_ordering(summary: &[SummaryRow]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for dataset in ["II", "III", "IV"] {
        for d in [2, 5] {
            let a = mean_anll(summary, dataset, d, Method::Ahte);
            let k = mean_anll(summary, dataset, d, Method::Kde);
            let n = mean_anll(summary, dataset, d, Method::Nhte);
            let ok = a <= k && a <= n;
            pass &= ok;
            parts.push(format!(
                "{dataset}/d{d} {} ahte {a:.4} kde {k:.4} nhte {n:.4}",
                if ok { "ok" } else { "VIOLATED" }
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

/// Random synthetic sample of a random type supported in dimension `d`.
fn random_sample<R: Rng>(rng: &mut R, d: usize, n: usize) -> Points {
    let mut kinds = vec![SynthType::TypeI, SynthType::TypeII, SynthType::TypeIII, SynthType::BetaToy];
    if d >= 2 {
        kinds.push(SynthType::TypeIV);
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    DensitySpec::make(kind, d).unwrap().sample(n, rng)
}

/// Integral over the transformed lattice: density at the preimage of every
/// cell centre in the bounding range of the data, times the cell volume.
fn lattice_quadrature(g: &GridEstimator, data: &Points) -> f64 {
    let t = g.transform();
    let d = data.dim();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for x in data.rows() {
        for (j, k) in t.bin_index(x).unwrap().into_iter().enumerate() {
            lo[j] = lo[j].min(k - 1);
            hi[j] = hi[j].max(k + 1);
        }
    }
    let mut total = 0.0;
    let mut k = lo.clone();
    loop {
        let centre: Vec<f64> = k.iter().map(|v| *v as f64 + 0.5).collect();
        total += g.density(&t.invert(&centre).unwrap()).unwrap();
        let mut j = 0;
        loop {
            if j == d {
                return total * g.cell_volume();
            }
            k[j] += 1;
            if k[j] <= hi[j] {
                break;
            }
            k[j] = lo[j];
            j += 1;
        }
    }
}

/// Integral over the root box on the product grid of all leaf boundaries,
/// on which the tree density is constant cell by cell.
fn breakpoint_quadrature(tree: &AdaptiveTree) -> f64 {
    let d = tree.dim();
    let knots: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = tree.leaves().flat_map(|l| [l.bounds.lo[j], l.bounds.hi[j]]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mid: Vec<f64> = (0..d).map(|j| 0.5 * (knots[j][idx[j]] + knots[j][idx[j] + 1])).collect();
        let vol: f64 = (0..d).map(|j| knots[j][idx[j] + 1] - knots[j][idx[j]]).product();
        total += tree.density(&mid).unwrap() * vol;
        let mut j = 0;
        loop {
            if j == d {
                return total;
            }
            idx[j] += 1;
            if idx[j] + 1 < knots[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn mass_invariants() -> Outcome {
    let mut rng = stream(4, 0);
    let mut worst: f64 = 0.0;
    let mut quadratures = 0;
    for _ in 0..200 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=200);
        let data = random_sample(&mut rng, d, n);
        let s_min = rng.random_range(-1.0..0.5);
        let s_max = s_min + rng.random_range(0.0..1.0);
        let members = rng.random_range(1..=4);
        let m = rng.random_range(1..=15);
        let seed: u64 = rng.random();

        let cfg = StretchConfig::from_data(&data, s_min, s_max).unwrap();
        let grid = fit_ensemble(&data, members, &cfg, seed).unwrap();
        let mut ensemble_mass = 0.0;
        for g in grid.members() {
            worst = worst.max((g.total_mass() - 1.0).abs());
            ensemble_mass += g.total_mass();
            if d <= 2 {
                worst = worst.max((lattice_quadrature(g, &data) - 1.0).abs());
                quadratures += 1;
            }
        }
        worst = worst.max((ensemble_mass / members as f64 - 1.0).abs());

        let ahte = fit_ahte(&data, members, m, seed).unwrap();
        let mut ensemble_mass = 0.0;
        for member in ahte.members() {
            let tree = member.tree();
            worst = worst.max((tree.total_mass() - 1.0).abs());
            ensemble_mass += tree.total_mass();
            if d <= 2 {
                worst = worst.max((breakpoint_quadrature(tree) - 1.0).abs());
                quadratures += 1;
            }
        }
        worst = worst.max((ensemble_mass / members as f64 - 1.0).abs());
    }
    outcome(
        worst <= MASS_TOLERANCE,
        format!("200 instances, {quadratures} quadrature cross-checks, max |mass - 1| = {worst:.2e}"),
    )
}

fn brute_force_recount() -> Outcome {
    let mut rng = stream(5, 0);
    let mut mismatches = Vec::new();
    for instance in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=50);
        let data = random_sample(&mut rng, d, n);
        let members = rng.random_range(1..=3);
        let m = rng.random_range(1..=10);
        let seed: u64 = rng.random();

        let cfg = StretchConfig::from_data(&data, -0.5, 1.0).unwrap();
        for g in fit_ensemble(&data, members, &cfg, seed).unwrap().members() {
            let t = g.transform();
            let mut recount: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
            for x in data.rows() {
                let index: Vec<i64> = (0..d)
                    .map(|i| {
                        let y: f64 = (0..d)
                            .map(|j| t.rotation().get(i, j) * t.stretch().scales()[j] * x[j])
                            .sum::<f64>()
                            + t.translation().as_slice()[i];
                        y.floor() as i64
                    })
                    .collect();
                *recount.entry(index).or_default() += 1;
            }
            if recount.into_iter().collect::<Vec<_>>() != g.sorted_cells() {
                mismatches.push(format!("grid #{instance}"));
            }
        }

        for member in fit_ahte(&data, members, m, seed).unwrap().members() {
            let r = member.transform().rotation();
            let rotated: Vec<Vec<f64>> = data
                .rows()
                .map(|x| (0..d).map(|i| (0..d).map(|j| r.get(i, j) * x[j]).sum::<f64>() + 0.0).collect())
                .collect();
            let mut hits = vec![0u32; n];
            let mut total = 0;
            for leaf in member.tree().leaves() {
                let mut count = 0;
                for (p, y) in rotated.iter().enumerate() {
                    if (0..d).all(|j| leaf.bounds.lo[j] <= y[j] && y[j] < leaf.bounds.hi[j]) {
                        count += 1;
                        hits[p] += 1;
                    }
                }
                total += count;
                if count != leaf.count {
                    mismatches.push(format!("tree #{instance}"));
                }
            }
            if total != n as u64 || hits.iter().any(|h| *h != 1) {
                mismatches.push(format!("tree tiling #{instance}"));
            }
        }
    }
    mismatches.dedup();
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "100 instances, grid and leaf counts match direct recounts".to_string()
        } else {
            format!("mismatches: {}", mismatches.join(", "))
        },
    )
}

fn rotation_sampler() -> Outcome {
    let mut rng = stream(6, 0);
    let mut worst_orth: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for d in 1..=8 {
        for _ in 0..1000 {
            let r = sample_rotation(d, &mut rng).unwrap();
            worst_orth = worst_orth.max(r.orthogonality_error());
            worst_det = worst_det.max((r.determinant() - 1.0).abs());
        }
    }
    let bins = 36;
    let draws = 36_000;
    let mut counts = vec![0usize; bins];
    for _ in 0..draws {
        let r = sample_rotation(2, &mut rng).unwrap();
        let angle = r.get(1, 0).atan2(r.get(0, 0));
        let u = (angle + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    outcome(
        worst_orth <= ROTATION_TOLERANCE && worst_det <= ROTATION_TOLERANCE && chi2 < critical,
        format!(
            "d=1..8 x 1000: max orth err {worst_orth:.1e}, max |det-1| {worst_det:.1e}; angle chi2 {chi2:.2} < {critical:.2}"
        ),
    )
}

fn rate_direction() -> Outcome {
    let (_, report) = run_rate_study(&RateConfig::default()).expect("rate-study run");
    let (s, e) = (&report.single.fit, &report.ensemble.fit);
    outcome(
        e.slope < s.slope,
        format!(
            "n={:?}: single slope {:.4} ± {:.4}, ensemble slope {:.4} ± {:.4}, gap {:.4}",
            report.n_grid, s.slope, s.slope_stderr, e.slope, e.slope_stderr, report.slope_gap
        ),
    )
}

fn metrics_exactness() -> Outcome {
    let e = std::f64::consts::E;
    let checks = [
        (mae(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0),
        (mae(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0),
        (mae(&[1.0, 3.0], &[2.0, 1.0]).unwrap(), 1.5),
        (anll(&[1.0; 3]).unwrap().anll, 0.0),
        (anll(&[0.0; 5]).unwrap().anll, -f64::EPSILON.ln()),
        (anll(&[0.0; 5]).unwrap().anll, 36.04365338911715),
        (anll(&[e, e.powi(3)]).unwrap().anll, -2.0),
    ];
    let worst = checks.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let hits = anll(&[0.0, 1.0, 0.0]).unwrap().epsilon_hits;
    outcome(
        worst <= METRIC_TOLERANCE && hits == 2,
        format!("{} examples, max error {worst:.1e}; -ln(eps) = {:.4}", checks.len(), -f64::EPSILON.ln()),
    )
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_hte")).args(args).status().expect("spawn hte");
    assert!(status.success(), "hte {args:?} failed with {status}");
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke");
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let experiments = ["ensemble-gap", "synth-bench", "param-study", "rate-study", "real-bench"];
    for name in experiments {
        let config = configs.join(format!("{name}.json"));
        let first = tmp.path().join(format!("{name}-1"));
        let second = tmp.path().join(format!("{name}-2"));
        let replay = tmp.path().join(format!("{name}-3"));
        let cfg = config.to_str().unwrap();
        run_cli(&[name, "--config", cfg, "--out-dir", first.to_str().unwrap(), "--threads", "1"]);
        run_cli(&[name, "--config", cfg, "--out-dir", second.to_str().unwrap(), "--threads", "3"]);
        let manifest = first.join("manifest.json");
        run_cli(&[name, "--config", manifest.to_str().unwrap(), "--out-dir", replay.to_str().unwrap()]);
        let reference = csv_files(&first);
        if !reference.contains_key("results.csv") {
            differing.push(format!("{name}: no results.csv"));
        }
        for other in [&second, &replay] {
            if csv_files(other) != reference {
                differing.push(format!("{name}: {}", other.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} experiments x 3 runs (1 thread, 3 threads, manifest replay): outputs byte-identical", experiments.len())
        } else {
            format!("differences: {}", differing.join(", "))
        },
    )
}

fn report(id: u32, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = check();
    println!(
        "{} [{id}] {name}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.pass
}

fn main() {
    let mut results = Vec::new();
    results.push(report(1, "ensemble vs single gap", ensemble_gap));
    let start = Instant::now();
    let summary = synth_summary();
    println!("     synthetic benchmark for [2] and [3] took {:.1}s", start.elapsed().as_secs_f64());
    results.push(report(2, "table spot value, type III d=2", || table_spot(&summary)));
    results.push(report(3, "table ordering, types II-IV d=2,5", || table_ordering(&summary)));
    results.push(report(4, "normalization invariants", mass_invariants));
    results.push(report(5, "brute-force recount", brute_force_recount));
    results.push(report(6, "rotation sampler", rotation_sampler));
    results.push(report(7, "rate direction", rate_direction));
    results.push(report(8, "metrics exactness", metrics_exactness));
    results.push(report(9, "determinism", determinism));
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
