use std::collections::BTreeSet;

use kdloc_core::metrics::Label;
use kdloc_core::synth::*;

/// Normal-approximation 99% interval for a binomial proportion.
fn within_99(successes: usize, n: usize, p: f64) -> bool {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    let phat = successes as f64 / n as f64;
    (phat - p).abs() <= 2.576 * sd + 0.5 / n as f64
}

#[test]
fn token_rate_follows_split_probability() {
    let spec = SyntheticSpec { train_samples: 600, test_samples: 600, ..SyntheticSpec::default() };
    let d = generate_dataset(&spec).unwrap();
    for (samples, p) in [(&d.train, spec.p_train), (&d.test, spec.p_test)] {
        let pos: Vec<_> = samples.iter().filter(|s| s.label == Label::Tb).collect();
        assert!(pos.len() >= 200);
        let tokens = pos.iter().filter(|s| s.has_token).count();
        assert!(within_99(tokens, pos.len(), p), "{tokens}/{} vs {p}", pos.len());
        assert!(samples.iter().filter(|s| s.label == Label::NonTb).all(|s| !s.has_token));
    }
}

#[test]
fn gt_boxes_are_tight_around_bright_pixels() {
    let spec = SyntheticSpec { noise: 0.0, ..SyntheticSpec::default() };
    let d = generate_dataset(&spec).unwrap();
    let w = spec.width;
    for s in d.train.iter().filter(|s| s.label == Label::Tb) {
        let px = s.image.data();
        for b in &s.gt_boxes {
            let lit = |x: usize, y: usize| px[y * w + x] > spec.background;
            assert!((b.x_min..b.x_max).any(|x| lit(x, b.y_min)), "{}: top row empty", s.id);
            assert!((b.x_min..b.x_max).any(|x| lit(x, b.y_max - 1)), "{}: bottom row empty", s.id);
            assert!((b.y_min..b.y_max).any(|y| lit(b.x_min, y)), "{}: left column empty", s.id);
            assert!((b.y_min..b.y_max).any(|y| lit(b.x_max - 1, y)), "{}: right column empty", s.id);
        }
    }
}

#[test]
fn splits_are_disjoint_and_ids_unique() {
    let d = generate_dataset(&SyntheticSpec::default()).unwrap();
    let train: BTreeSet<_> = d.train.iter().map(|s| s.id.as_str()).collect();
    let test: BTreeSet<_> = d.test.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(train.len(), 400);
    assert_eq!(test.len(), 200);
    assert!(train.is_disjoint(&test));
}

#[test]
fn normalization_stats_standardize_the_train_split() {
    let spec = SyntheticSpec { train_samples: 50, test_samples: 5, ..SyntheticSpec::default() };
    let d = generate_dataset(&spec).unwrap();
    let (mean, std) = normalization_stats(&d.train);
    let prep = Preprocess { out_side: 32, crop_side: 32, mean, std };
    let all: Vec<f64> = d.train.iter().flat_map(|s| prep.apply(&s.image).unwrap().into_data()).collect();
    let (m, s) = kdloc_core::math::mean_std(&all);
    assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
}
