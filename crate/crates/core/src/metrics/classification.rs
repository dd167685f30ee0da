//! Binary classification metrics with TB as the positive class.

use alloc::vec::Vec;

use crate::error::{bail_validation, Error, Result};

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    #[cfg_attr(feature = "serde", serde(rename = "non_tb"))]
    NonTb,
    #[cfg_attr(feature = "serde", serde(rename = "tb"))]
    Tb,
}

impl Label {
    /// Class index used by the network: 0 = non-TB, 1 = TB.
    pub fn index(self) -> usize {
        match self {
            Label::NonTb => 0,
            Label::Tb => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::NonTb),
            1 => Some(Label::Tb),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Tb
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLabel {
    /// Probability of the TB class.
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    /// Mean of the per-class precisions (TB and non-TB).
    pub fn macro_precision(&self) -> f64 {
        (ratio(self.tp, self.tp + self.fp) + ratio(self.tn, self.tn + self.fn_)) / 2.0
    }

    /// Mean of the per-class recalls, i.e. of sensitivity and specificity.
    pub fn macro_recall(&self) -> f64 {
        (self.sensitivity() + self.specificity()) / 2.0
    }
}

pub fn confusion(preds: &[Label], truth: &[Label]) -> Result<ConfusionCounts> {
    if preds.len() != truth.len() {
        bail_validation!("{} predictions for {} labels", preds.len(), truth.len());
    }
    if preds.is_empty() {
        bail_validation!("no samples");
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in preds.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// ROC-AUC by midranks: `P(s_pos > s_neg) + ½·P(s_pos = s_neg)`.
pub fn auc(scored: &[ScoredLabel]) -> Result<f64> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        bail_validation!("non-finite score");
    }
    let pos = scored.iter().filter(|s| s.label.is_positive()).count() as u64;
    let neg = scored.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation("AUC undefined: only one class present".into()));
    }
    let mut order: Vec<&ScoredLabel> = scored.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));
    // twice the positive rank sum, with tied groups sharing the midrank
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && order[j].score == order[i].score {
            j += 1;
        }
        // ranks i+1..=j, doubled midrank = i + 1 + j
        let mid2 = (i + 1 + j) as u64;
        let tied_pos = order[i..j].iter().filter(|s| s.label.is_positive()).count() as u64;
        rank_sum2 += mid2 * tied_pos;
        i = j;
    }
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub sensitivity: f64,
    pub specificity: f64,
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub counts: ConfusionCounts,
}

/// Metrics at decision threshold `threshold`: a sample is predicted TB
/// when its score is at least the threshold.
pub fn classification_report(scored: &[ScoredLabel], threshold: f64) -> Result<ClassificationReport> {
    if !(0.0..=1.0).contains(&threshold) {
        bail_validation!("threshold must lie in [0, 1], got {threshold}");
    }
    let preds: Vec<Label> =
        scored.iter().map(|s| if s.score >= threshold { Label::Tb } else { Label::NonTb }).collect();
    let truth: Vec<Label> = scored.iter().map(|s| s.label).collect();
    let counts = confusion(&preds, &truth)?;
    let auc = match auc(scored) {
        Ok(v) => Some(v),
        Err(Error::Validation(_)) if !scored.iter().any(|s| !s.score.is_finite()) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationReport {
        accuracy: counts.accuracy(),
        auc,
        sensitivity: counts.sensitivity(),
        specificity: counts.specificity(),
        avg_precision: counts.macro_precision(),
        avg_recall: counts.macro_recall(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn s(score: f64, tb: bool) -> ScoredLabel {
        ScoredLabel { score, label: if tb { Label::Tb } else { Label::NonTb } }
    }

    fn fixture() -> Vec<ScoredLabel> {
        let mut v = vec![];
        v.extend((0..9).map(|_| s(0.9, true)));
        v.push(s(0.2, true));
        v.extend((0..8).map(|_| s(0.1, false)));
        v.extend((0..2).map(|_| s(0.8, false)));
        v
    }

    #[test]
    fn confusion_fixture_arithmetic() {
        let r = classification_report(&fixture(), 0.5).unwrap();
        assert_eq!(r.counts, ConfusionCounts { tp: 9, tn: 8, fp: 2, fn_: 1 });
        assert_eq!(r.accuracy, 0.85);
        assert_eq!(r.sensitivity, 0.9);
        assert_eq!(r.specificity, 0.8);
        assert_eq!(r.avg_recall, (0.9 + 0.8) / 2.0);
        assert_eq!(r.avg_precision, (9.0 / 11.0 + 8.0 / 9.0) / 2.0);
    }

    #[test]
    fn confusion_basics() {
        let labels = [Label::Tb, Label::NonTb, Label::Tb];
        let c = confusion(&labels, &labels).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(c.tp + c.tn, 3);
        assert!(confusion(&labels, &labels[..2]).is_err());
    }

    #[test]
    fn auc_limits() {
        let sep = [s(0.1, false), s(0.2, false), s(0.8, true), s(0.95, true)];
        assert_eq!(auc(&sep).unwrap(), 1.0);
        let flat = [s(0.5, false), s(0.5, true), s(0.5, true)];
        assert_eq!(auc(&flat).unwrap(), 0.5);
        assert!(auc(&[s(0.3, true), s(0.4, true)]).is_err());
        let r = classification_report(&[s(0.3, true), s(0.7, true)], 0.5).unwrap();
        assert_eq!(r.auc, None);
        assert_eq!(r.sensitivity, 0.5);
    }

    fn arb_scored() -> impl Strategy<Value = Vec<ScoredLabel>> {
        proptest::collection::vec((0u8..6, any::<bool>()), 2..30)
            .prop_map(|v| v.into_iter().map(|(q, tb)| s(q as f64 / 5.0, tb)).collect())
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_map(scored in arb_scored()) {
            prop_assume!(scored.iter().any(|x| x.label.is_positive()) && scored.iter().any(|x| !x.label.is_positive()));
            let mapped: Vec<ScoredLabel> = scored.iter().map(|x| s(x.score * x.score * 0.5 + 0.1, x.label.is_positive())).collect();
            prop_assert_eq!(auc(&scored).unwrap(), auc(&mapped).unwrap());
        }

        #[test]
        fn accuracy_mixes_sensitivity_and_specificity(scored in arb_scored(), thr in 0.0f64..1.0) {
            let r = classification_report(&scored, thr).unwrap();
            let p = scored.iter().filter(|x| x.label.is_positive()).count() as f64;
            let n = scored.len() as f64 - p;
            let mix = (r.sensitivity * p + r.specificity * n) / (p + n);
            prop_assert!((r.accuracy - mix).abs() < 1e-12);
        }
    }
}
