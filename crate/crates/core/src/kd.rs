//! Tempered softmax and the distillation objective.
//!
//! The student loss is `(1 - α)·L_ST + α·CE`, where
//! `L_ST = T²·KL(softmax(z_t/T) ‖ softmax(z_s/T))` with the teacher
//! distribution as the reference argument, and `CE` is the ordinary hard
//! label cross-entropy of the student at temperature 1.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::error::{bail_validation, Result};
use crate::tensor::Tensor;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct KdParams {
    pub temperature: f64,
    /// Weight of the hard-label cross-entropy term.
    pub alpha: f64,
}

impl Default for KdParams {
    fn default() -> Self {
        Self { temperature: 2.0, alpha: 0.75 }
    }
}

impl KdParams {
    pub fn new(temperature: f64, alpha: f64) -> Result<Self> {
        let p = Self { temperature, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            bail_validation!("temperature must be positive, got {}", self.temperature);
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            bail_validation!("alpha must lie in [0, 1], got {}", self.alpha);
        }
        Ok(())
    }
}

/// Teacher and student logits for one sample.
#[derive(Debug, Clone, Copy)]
pub struct LogitPair<'a> {
    pub teacher: &'a [f64],
    pub student: &'a [f64],
}

impl<'a> LogitPair<'a> {
    pub fn new(teacher: &'a [f64], student: &'a [f64]) -> Result<Self> {
        if teacher.len() != student.len() {
            bail_validation!("teacher has {} logits, student {}", teacher.len(), student.len());
        }
        if teacher.len() < 2 {
            bail_validation!("need at least two logits");
        }
        if teacher.iter().chain(student).any(|v| !v.is_finite()) {
            bail_validation!("non-finite logit");
        }
        Ok(Self { teacher, student })
    }
}

/// Softmax at temperature 1 with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= sum);
    e
}

pub fn tempered_softmax(z: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        bail_validation!("temperature must be positive, got {temperature}");
    }
    let scaled: Vec<f64> = z.iter().map(|v| v / temperature).collect();
    Ok(softmax(&scaled))
}

fn ln_floor(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `-ln softmax(z)[label]`.
pub fn cross_entropy(z: &[f64], label: usize) -> Result<f64> {
    if label >= z.len() {
        bail_validation!("label {label} out of range for {} classes", z.len());
    }
    Ok(-ln_floor(softmax(z)[label]))
}

/// `T²·KL(softmax(z_t/T) ‖ softmax(z_s/T))`.
pub fn soft_target_loss(pair: LogitPair<'_>, temperature: f64) -> Result<f64> {
    let pt = tempered_softmax(pair.teacher, temperature)?;
    let ps = tempered_softmax(pair.student, temperature)?;
    let kl: f64 = pt
        .iter()
        .zip(&ps)
        .map(|(&t, &s)| if t > 0.0 { t * (ln_floor(t) - ln_floor(s)) } else { 0.0 })
        .sum();
    // KL is non-negative; rounding can leave a -1e-17 residue
    Ok(temperature * temperature * kl.max(0.0))
}

pub fn total_loss(pair: LogitPair<'_>, label: usize, kd: KdParams) -> Result<f64> {
    kd.validate()?;
    let ce = cross_entropy(pair.student, label)?;
    let st = soft_target_loss(pair, kd.temperature)?;
    Ok((1.0 - kd.alpha) * st + kd.alpha * ce)
}

/// Gradient of [`total_loss`] with respect to the student logits:
/// `(1-α)·T·(p_s - p_t) + α·(softmax(z_s) - onehot(label))`.
pub fn total_loss_grad(pair: LogitPair<'_>, label: usize, kd: KdParams) -> Result<Vec<f64>> {
    kd.validate()?;
    if label >= pair.student.len() {
        bail_validation!("label {label} out of range for {} classes", pair.student.len());
    }
    let t = kd.temperature;
    let pt = tempered_softmax(pair.teacher, t)?;
    let ps = tempered_softmax(pair.student, t)?;
    let q = softmax(pair.student);
    Ok((0..q.len())
        .map(|i| {
            let onehot = if i == label { 1.0 } else { 0.0 };
            (1.0 - kd.alpha) * t * (ps[i] - pt[i]) + kd.alpha * (q[i] - onehot)
        })
        .collect())
}

/// Batch-mean distillation loss and its gradient with respect to the
/// `(batch, classes)` student logits.
pub fn total_loss_batch(
    teacher: &Tensor,
    student: &Tensor,
    labels: &[usize],
    kd: KdParams,
) -> Result<(f64, Tensor)> {
    if teacher.shape() != student.shape() || student.shape().len() != 2 {
        bail_validation!("logit shapes {:?} / {:?} differ", teacher.shape(), student.shape());
    }
    let n = student.shape()[0];
    if labels.len() != n {
        bail_validation!("{} labels for a batch of {}", labels.len(), n);
    }
    let mut loss = 0.0;
    let mut grad = vec![];
    for (b, &label) in labels.iter().enumerate() {
        let pair = LogitPair::new(teacher.outer(b), student.outer(b))?;
        loss += total_loss(pair, label, kd)?;
        grad.extend(total_loss_grad(pair, label, kd)?.into_iter().map(|g| g / n as f64));
    }
    Ok((loss / n as f64, Tensor::new(student.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair<'a>(t: &'a [f64], s: &'a [f64]) -> LogitPair<'a> {
        LogitPair::new(t, s).unwrap()
    }

    // Direct-summation oracle for the fixture z_t = [2, 0], z_s = [0, 0], T = 2.
    fn fixture_oracle() -> f64 {
        let e = 1.0f64.exp();
        let (p0, p1) = (e / (e + 1.0), 1.0 / (e + 1.0));
        4.0 * (p0 * (p0 / 0.5).ln() + p1 * (p1 / 0.5).ln())
    }

    #[test]
    fn tempered_softmax_examples() {
        assert_eq!(tempered_softmax(&[0.0, 0.0], 3.0).unwrap(), vec![0.5, 0.5]);
        let p = tempered_softmax(&[2.0, 0.0], 2.0).unwrap();
        assert!((p[0] - 0.73106).abs() < 1e-5 && (p[1] - 0.26894).abs() < 1e-5);
        let p = tempered_softmax(&[5.0, -3.0, 1.0], 1e6).unwrap();
        let spread = p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-3);
        assert!(tempered_softmax(&[1.0, 2.0], 0.0).is_err());
        assert!(tempered_softmax(&[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn soft_target_fixture() {
        let v = soft_target_loss(pair(&[2.0, 0.0], &[0.0, 0.0]), 2.0).unwrap();
        assert!((fixture_oracle() - 0.44376).abs() < 1e-4);
        assert!((v - fixture_oracle()).abs() < 1e-12);
        let swapped = soft_target_loss(pair(&[0.0, 0.0], &[2.0, 0.0]), 2.0).unwrap();
        assert!((swapped - v).abs() > 1e-3, "KL is asymmetric: {swapped} vs {v}");
    }

    #[test]
    fn total_loss_examples() {
        let kd = KdParams::new(2.0, 0.75).unwrap();
        let v = total_loss(pair(&[2.0, 0.0], &[0.0, 0.0]), 0, kd).unwrap();
        let expect = 0.25 * fixture_oracle() + 0.75 * 2.0f64.ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.63080).abs() < 1e-4);

        let ce_only = KdParams::new(2.0, 1.0).unwrap();
        let z_s = [0.3, -1.2];
        let v = total_loss(pair(&[9.0, -4.0], &z_s), 1, ce_only).unwrap();
        assert!((v - cross_entropy(&z_s, 1).unwrap()).abs() < 1e-12);

        let st_only = KdParams::new(3.0, 0.0).unwrap();
        assert!(total_loss(pair(&z_s, &z_s), 0, st_only).unwrap() < 1e-12);
        assert!(total_loss(pair(&z_s, &z_s), 2, st_only).is_err());
    }

    #[test]
    fn grad_structure() {
        let z = [0.4, -0.1, 1.3];
        let g = total_loss_grad(pair(&z, &z), 1, KdParams::new(2.0, 0.0).unwrap()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
        let g = total_loss_grad(pair(&[1.0, 2.0, 3.0], &z), 2, KdParams::new(2.0, 1.0).unwrap()).unwrap();
        let mut expect = softmax(&z);
        expect[2] -= 1.0;
        for (a, b) in g.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn params_are_validated() {
        assert!(KdParams::new(0.0, 0.5).is_err());
        assert!(KdParams::new(1.0, 1.5).is_err());
        assert!(KdParams::new(1.0, -0.1).is_err());
        assert!(LogitPair::new(&[1.0], &[1.0]).is_err());
        assert!(LogitPair::new(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn logits(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-8.0f64..8.0, n)
    }

    proptest! {
        #[test]
        fn soft_target_is_nonnegative(t in logits(4), s in logits(4), temp in 0.2f64..10.0) {
            prop_assert!(soft_target_loss(pair(&t, &s), temp).unwrap() >= 0.0);
        }

        #[test]
        fn soft_target_identity(z in logits(3), temp in 0.1f64..20.0) {
            prop_assert!(soft_target_loss(pair(&z, &z), temp).unwrap() < 1e-12);
        }

        #[test]
        fn temperature_scaling(t in logits(3), s in logits(3), temp in 0.5f64..5.0, c in 0.25f64..4.0) {
            let base = soft_target_loss(pair(&t, &s), temp).unwrap();
            let ct: Vec<f64> = t.iter().map(|v| v * c).collect();
            let cs: Vec<f64> = s.iter().map(|v| v * c).collect();
            let scaled = soft_target_loss(pair(&ct, &cs), c * temp).unwrap();
            let expect = base * (c * temp).powi(2) / (temp * temp);
            prop_assert!((scaled - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }

        #[test]
        fn affine_in_alpha(t in logits(2), s in logits(2), label in 0usize..2) {
            let at = |a: f64| total_loss(pair(&t, &s), label, KdParams::new(2.0, a).unwrap()).unwrap();
            let mid = at(0.5);
            prop_assert!((mid - 0.5 * (at(0.0) + at(1.0))).abs() < 1e-12 * (1.0 + mid.abs()));
        }

        #[test]
        fn grad_matches_central_differences(t in logits(3), s in logits(3), label in 0usize..3,
                                            temp in 0.5f64..4.0, alpha in 0.0f64..1.0) {
            let kd = KdParams::new(temp, alpha).unwrap();
            let g = total_loss_grad(pair(&t, &s), label, kd).unwrap();
            let f = |z: &[f64]| total_loss(pair(&t, z), label, kd).unwrap();
            for i in 0..3 {
                // five-point central stencil
                let h = 1e-3;
                let at = |d: f64| { let mut z = s.clone(); z[i] += d; f(&z) };
                let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
                let denom = g[i].abs().max(fd.abs()).max(1e-4);
                prop_assert!((g[i] - fd).abs() / denom < 1e-7, "i={} g={} fd={}", i, g[i], fd);
            }
        }
    }
}
