mod common;

use common::{ks_critical, ks_statistic};
use hte_core::rng::stream;
use hte_core::transform::{
    sample_rotation, sample_stretch, sample_translation, HistogramTransform, StretchConfig,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn rotations_are_proper_in_every_dimension() {
    for d in 1..=8 {
        let mut rng = stream(100 + d as u64, 0);
        for _ in 0..125 {
            let r = sample_rotation(d, &mut rng).unwrap();
            assert!(r.orthogonality_error() < 1e-10);
            assert!((r.determinant() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn planar_rotation_angle_is_uniform() {
    let mut rng = stream(2718, 0);
    let bins = 16;
    let draws = 10_000;
    let mut counts = vec![0usize; bins];
    for _ in 0..draws {
        let r = sample_rotation(2, &mut rng).unwrap();
        let angle = r.get(1, 0).atan2(r.get(0, 0)).rem_euclid(std::f64::consts::TAU);
        let b = ((angle / std::f64::consts::TAU) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn log_stretch_is_uniform() {
    let cfg = StretchConfig::new(0.0, 1.0, 1.0).unwrap();
    let mut rng = stream(77, 0);
    let logs: Vec<f64> = (0..10_000)
        .map(|_| sample_stretch(1, &cfg, &mut rng).unwrap().scales()[0].ln())
        .collect();
    assert!(logs.iter().all(|l| (0.0..=1.0).contains(l)));
    let d = ks_statistic(logs, |x| x.clamp(0.0, 1.0));
    assert!(d < ks_critical(10_000, 0.001), "KS {d}");
}

#[test]
fn translation_is_uniform() {
    let mut rng = stream(78, 0);
    let xs: Vec<f64> = (0..10_000)
        .map(|_| sample_translation(3, &mut rng).unwrap().as_slice()[0])
        .collect();
    let d = ks_statistic(xs, |x| x.clamp(0.0, 1.0));
    assert!(d < ks_critical(10_000, 0.001), "KS {d}");
}

fn random_transform(d: usize, seed: u64) -> HistogramTransform {
    let cfg = StretchConfig::new(-1.0, 1.0, 2.0).unwrap();
    HistogramTransform::sample(d, &cfg, &mut stream(seed, 0)).unwrap()
}

#[test]
fn monte_carlo_cell_volume() {
    use rand::Rng;
    for seed in [1u64, 2, 3] {
        let t = random_transform(2, seed);
        let target = t.bin_index(&[0.0, 0.0]).unwrap();
        // preimage of the unit square [k, k+1)^2 is a parallelogram; box its corners
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (a, b) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let corner = t
                .invert(&[target[0] as f64 + a, target[1] as f64 + b])
                .unwrap();
            for j in 0..2 {
                lo[j] = lo[j].min(corner[j]);
                hi[j] = hi[j].max(corner[j]);
            }
        }
        let mut rng = stream(seed, 9);
        let draws = 400_000;
        let hits = (0..draws)
            .filter(|_| {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                    lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
                ];
                t.bin_index(&x).unwrap() == target
            })
            .count();
        let estimate = hits as f64 / draws as f64 * (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let rel = (estimate / t.cell_volume() - 1.0).abs();
        assert!(rel < 0.02, "seed {seed}: relative volume error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn apply_then_invert_round_trips(
        d in 1usize..=8,
        seed in any::<u64>(),
        x in proptest::collection::vec(-10.0f64..10.0, 8),
    ) {
        let t = random_transform(d, seed);
        let x = &x[..d];
        let y = t.apply(x).unwrap();
        let back = t.invert(&y).unwrap();
        for (a, b) in back.iter().zip(x) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cell_volume_is_reciprocal_scale_product(d in 1usize..=8, seed in any::<u64>()) {
        let t = random_transform(d, seed);
        let inv: f64 = 1.0 / t.stretch().scales().iter().product::<f64>();
        prop_assert!((t.cell_volume() / inv - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn crossing_a_lattice_plane_increments_one_index(
        d in 1usize..=5,
        seed in any::<u64>(),
        j in 0usize..5,
        x in proptest::collection::vec(-3.0f64..3.0, 5),
    ) {
        let j = j % d;
        let t = random_transform(d, seed);
        let x = &x[..d];
        let y = t.apply(x).unwrap();
        let before = t.bin_index(x).unwrap();
        // move along S^{-1}Rᵀe_j until H(x)_j sits just past the next integer
        let step = y[j].floor() + 1.0 + 1e-6 - y[j];
        let mut y2 = y.clone();
        y2[j] += step;
        let x2 = t.invert(&y2).unwrap();
        let after = t.bin_index(&x2).unwrap();
        let mut expected = before.clone();
        expected[j] += 1;
        // skip the measure-zero cases where another coordinate sits on a boundary
        let near_edge = y.iter().enumerate().any(|(k, v)| k != j && (v - v.round()).abs() < 1e-9);
        prop_assume!(!near_edge);
        prop_assert_eq!(after, expected);
    }

    #[test]
    fn points_sharing_an_index_share_the_cell(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let t = random_transform(2, seed);
        let x = [a, b];
        let y = t.apply(&x).unwrap();
        // replay the definition: any point whose image floors to the same lattice cell
        let cell: Vec<f64> = y.iter().map(|v| v.floor()).collect();
        let inside = t.invert(&[cell[0] + 0.25, cell[1] + 0.75]).unwrap();
        let y_in = t.apply(&inside).unwrap();
        let same = y_in.iter().zip(&y).all(|(p, q)| p.floor() == q.floor());
        prop_assert_eq!(same, t.bin_index(&inside).unwrap() == t.bin_index(&x).unwrap());
        prop_assert!(same);
    }

    #[test]
    fn samplers_are_pure_functions_of_the_seed(d in 1usize..=6, seed in any::<u64>()) {
        prop_assert_eq!(random_transform(d, seed), random_transform(d, seed));
    }
}
