use serde::Serialize;

use crate::error::{Error, Result};

/// Confusion counts with jamming as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Tallies verdicts for known-unjammed and known-jammed scores at threshold `tau`.
    pub fn from_scores(unjammed: &[f64], jammed: &[f64], tau: f64) -> Self {
        let fp = unjammed.iter().filter(|&&s| s >= tau).count() as u64;
        let tp = jammed.iter().filter(|&&s| s >= tau).count() as u64;
        ConfusionCounts {
            tp,
            fp,
            tn: unjammed.len() as u64 - fp,
            fn_: jammed.len() as u64 - tp,
        }
    }
}

/// Classification metrics; `None` marks a metric whose denominator is zero.
///
/// `tpr_paper` and `tnr_paper` are the ratios `TP/(TP+FP)` and `TN/(TN+FN)`.
/// Conventional detection rates are `recall = TP/(TP+FN)` and
/// `specificity = TN/(TN+FP)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub tpr_paper: Option<f64>,
    pub tnr_paper: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        tpr_paper: ratio(c.tp, c.tp + c.fp),
        tnr_paper: ratio(c.tn, c.tn + c.fn_),
        recall: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
    }
}

/// ROC curve points `(fpr, tpr)` and the area under it.
#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Mann–Whitney AUC: the fraction of (jammed, unjammed) pairs in which the
/// jammed score is higher, with ties worth one half.
pub fn roc_auc(unjammed: &[f64], jammed: &[f64]) -> Result<Roc> {
    if unjammed.is_empty() || jammed.is_empty() {
        return Err(Error::Empty("AUC needs both score lists non-empty"));
    }
    if unjammed.iter().chain(jammed).any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    // (score, is_jammed), descending by score.
    let mut all: Vec<(f64, bool)> = unjammed
        .iter()
        .map(|&s| (s, false))
        .chain(jammed.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (n_neg, n_pos) = (unjammed.len() as u64, jammed.len() as u64);
    let mut points = vec![(0.0, 0.0)];
    // Twice the number of concordant pairs plus ties, kept as an integer.
    let mut twice_concordant: u64 = 0;
    let (mut pos_above, mut neg_above) = (0u64, 0u64);
    let mut i = 0;
    while i < all.len() {
        let score = all[i].0;
        let (mut pos_here, mut neg_here) = (0u64, 0u64);
        while i < all.len() && all[i].0 == score {
            if all[i].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            i += 1;
        }
        // Negatives at this score are beaten by every positive above and
        // tie with the positives here.
        twice_concordant += neg_here * (2 * pos_above + pos_here);
        pos_above += pos_here;
        neg_above += neg_here;
        points.push((neg_above as f64 / n_neg as f64, pos_above as f64 / n_pos as f64));
    }
    let auc = twice_concordant as f64 / (2 * n_neg * n_pos) as f64;
    Ok(Roc { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_auc(neg: &[f64], pos: &[f64]) -> f64 {
        let mut twice = 0u64;
        for p in pos {
            for n in neg {
                if p > n {
                    twice += 2;
                } else if p == n {
                    twice += 1;
                }
            }
        }
        twice as f64 / (2 * neg.len() * pos.len()) as f64
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&ConfusionCounts { tp: 3, tn: 5, fp: 1, fn_: 1 });
        assert_eq!(m.accuracy, Some(0.8));
        assert_eq!(m.tpr_paper, Some(0.75));
        let m = metrics(&ConfusionCounts { tp: 0, tn: 9, fp: 0, fn_: 1 });
        assert_eq!(m.tnr_paper, Some(0.9));
        assert_eq!(m.tpr_paper, None);
        let perfect = metrics(&ConfusionCounts { tp: 4, tn: 6, fp: 0, fn_: 0 });
        assert_eq!(
            [perfect.accuracy, perfect.tpr_paper, perfect.tnr_paper, perfect.recall, perfect.specificity],
            [Some(1.0); 5]
        );
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[0.3, 0.4]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.1, 0.3], &[0.2, 0.4]).unwrap().auc, 0.75);
        assert_eq!(roc_auc(&[0.5, 0.1, 0.9], &[0.5, 0.1, 0.9]).unwrap().auc, 0.5);
        assert!(roc_auc(&[], &[1.0]).is_err());
    }

    #[test]
    fn roc_runs_corner_to_corner() {
        let roc = roc_auc(&[0.1, 0.3, 0.3], &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn counts_from_scores_use_inclusive_threshold() {
        let c = ConfusionCounts::from_scores(&[0.1, 0.5], &[0.5, 0.2], 0.5);
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 });
    }

    proptest! {
        #[test]
        fn auc_matches_all_pairs(
            neg in prop::collection::vec(0u8..20, 1..200),
            pos in prop::collection::vec(0u8..20, 1..200),
        ) {
            // Small integer scores force plenty of ties.
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            prop_assert_eq!(roc_auc(&neg, &pos).unwrap().auc, brute_force_auc(&neg, &pos));
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            neg in prop::collection::vec(-5.0f64..5.0, 1..50),
            pos in prop::collection::vec(-5.0f64..5.0, 1..50),
        ) {
            let f = |v: &Vec<f64>| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
            prop_assert_eq!(
                roc_auc(&neg, &pos).unwrap().auc,
                roc_auc(&f(&neg), &f(&pos)).unwrap().auc
            );
        }
    }
}
