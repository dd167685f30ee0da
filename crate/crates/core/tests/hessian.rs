use kdloc_core::hessian::*;
use kdloc_core::kd::KdParams;
use kdloc_core::net::{NetworkSpec, NetworkState};
use kdloc_core::Tensor;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = kdloc_core::math::rng(seed);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-2.0..2.0);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

fn reference_eigenvalues(n: usize, m: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = DMatrix::from_row_slice(n, n, m).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn quadratic_fixture_through_finite_differences() {
    let q = QuadraticLoss { matrix: DenseOperator::new(2, vec![3.0, 1.0, 1.0, 2.0]).unwrap(), theta: vec![0.4, -1.3] };
    let op = FiniteDifferenceHvp::new(q);
    let dense = dense_hessian(&op).unwrap();
    let eig = symmetric_eigen(2, dense.matrix.data()).unwrap();
    assert!((eig.values[1] - 3.6180339887).abs() < 1e-6);
    assert!((eig.values[0] - 1.3819660113).abs() < 1e-6);
    assert!((dense.matrix.trace() - 5.0).abs() < 1e-6);
    let top = lanczos_topk(&op, 2, 2, 42).unwrap();
    assert!((top[0] - 3.6180339887).abs() < 1e-6 && (top[1] - 1.3819660113).abs() < 1e-6);
    let t = hutchinson_trace(&op, 100, 1e-3, 42).unwrap();
    // Rademacher probes: zᵀAz = tr(A) + 2·a₁₂·z₁z₂, so the mean converges fast.
    assert!((t.estimate - 5.0).abs() < 0.3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn jacobi_matches_nalgebra(n in 1usize..12, seed in any::<u64>()) {
        let m = random_symmetric(n, seed);
        let ours = symmetric_eigen(n, &m).unwrap().values;
        let theirs = reference_eigenvalues(n, &m);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn full_lanczos_recovers_spectrum(n in 2usize..15, seed in any::<u64>()) {
        let m = random_symmetric(n, seed);
        let op = DenseOperator::new(n, m.clone()).unwrap();
        let top = lanczos_topk(&op, n, n, seed ^ 1).unwrap();
        let mut expected = reference_eigenvalues(n, &m);
        expected.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
        for (a, b) in top.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", top, expected);
        }
    }

    #[test]
    fn esd_mass_and_trace(n in 2usize..30, seed in any::<u64>()) {
        let m = random_symmetric(n, seed);
        let op = DenseOperator::new(n, m.clone()).unwrap();
        let d = esd(&op, &EsdConfig { probes: 4, ..EsdConfig::default() }, seed).unwrap();
        prop_assert!((d.integral() - 1.0).abs() < 1e-9);
        // Each probe's quadrature is exact for polynomials of low degree:
        // the first moment estimates tr(A)/n.
        let first: f64 = d.nodes.iter().map(|(l, w)| l * w).sum();
        let bound = (m.iter().map(|v| v * v).sum::<f64>()).sqrt();
        prop_assert!((first - op.trace() / n as f64).abs() <= 2.0 * bound);
    }
}

#[test]
fn network_hessian_estimators_agree_with_dense_oracle() {
    let spec = NetworkSpec::small_cnn([1, 8, 8], 2, 3, 2);
    let net = NetworkState::build(spec.clone(), 5).unwrap();
    let mut rng = kdloc_core::math::rng(6);
    let batch = Tensor::new(vec![12, 1, 8, 8], (0..12 * 64).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let loss = NetLoss::new(spec, net.params().to_vec(), batch, labels, LossKind::CrossEntropy).unwrap();
    let op = FiniteDifferenceHvp::new(loss);
    let dense = dense_hessian(&op).unwrap();
    assert!(dense.asymmetry < 1e-6, "asymmetry {}", dense.asymmetry);
    let n = op.dim();
    let mut exact = reference_eigenvalues(n, dense.matrix.data());
    exact.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let top = lanczos_topk(&op, 3, 40.min(n), 42).unwrap();
    for (a, b) in top.iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-3 * b.abs(), "{top:?} vs {:?}", &exact[..3]);
    }
    let sum: f64 = exact.iter().sum();
    assert!((sum - dense.matrix.trace()).abs() < 1e-9 * (1.0 + sum.abs()));
}

#[test]
fn distillation_loss_hessian_is_symmetric() {
    let spec = NetworkSpec::small_cnn([1, 6, 6], 2, 2, 2);
    let student = NetworkState::build(spec.clone(), 1).unwrap();
    let teacher = NetworkState::build(spec.clone(), 2).unwrap();
    let mut rng = kdloc_core::math::rng(3);
    let batch = Tensor::new(vec![4, 1, 6, 6], (0..144).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let teacher_logits = teacher.predict(&batch).unwrap();
    let loss = NetLoss::new(
        spec,
        student.params().to_vec(),
        batch,
        vec![0, 1, 1, 0],
        LossKind::Distillation { teacher_logits, kd: KdParams::default() },
    )
    .unwrap();
    let dense = dense_hessian(&FiniteDifferenceHvp::new(loss)).unwrap();
    assert!(dense.asymmetry < 1e-6);
}

#[test]
fn spectrum_report_is_deterministic() {
    let op = DenseOperator::new(6, random_symmetric(6, 77)).unwrap();
    let cfg = SpectrumConfig { top_k: 3, ..SpectrumConfig::default() };
    let a = spectrum_report(&op, &cfg).unwrap();
    assert_eq!(a, spectrum_report(&op, &cfg).unwrap());
    assert_eq!(a.top_eigenvalues.len(), 3);
    assert!(a.trace_probes <= cfg.trace_max_probes);
}
