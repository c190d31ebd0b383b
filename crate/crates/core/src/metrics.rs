//! Confusion matrix, precision/recall/F1 and the per-class report.
//!
//! Label 1 is the positive class. Rates whose denominator is zero come back
//! as 0 with a `degenerate` flag instead of an error, so a pathological model
//! still gets a full report.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// A ratio of counts, or 0 with `degenerate` set when the denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub degenerate: bool,
}

impl Rate {
    fn ratio(num: usize, den: usize) -> Rate {
        if den == 0 {
            Rate {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Rate {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }
}

pub fn confusion(preds: &[usize], truths: &[usize]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Data(format!(
            "{} predictions but {} labels",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset("no predictions to score".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in preds.iter().zip(truths) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            (p, t) => return Err(Error::Label(if p > 1 { p } else { t })),
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Rate {
        Rate::ratio(self.tp + self.tn, self.total())
    }

    /// The same counts seen with class 0 as the positive class.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn precision(cm: &ConfusionMatrix) -> Rate {
    Rate::ratio(cm.tp, cm.tp + cm.fp)
}

pub fn recall(cm: &ConfusionMatrix) -> Rate {
    Rate::ratio(cm.tp, cm.tp + cm.fn_)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

impl ClassMetrics {
    fn from_confusion(label: usize, cm: &ConfusionMatrix) -> Self {
        let p = precision(cm);
        let r = recall(cm);
        ClassMetrics {
            label,
            precision: p.value,
            recall: r.value,
            f1: f1(p.value, r.value),
            support: cm.tp + cm.fn_,
            precision_degenerate: p.degenerate,
            recall_degenerate: r.degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub confusion: ConfusionMatrix,
    /// Indexed by label: row 0 treats class 0 as positive, row 1 class 1.
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Average,
    pub weighted_avg: Average,
}

pub fn report(preds: &[usize], truths: &[usize]) -> Result<MetricReport> {
    let cm = confusion(preds, truths)?;
    let classes = vec![
        ClassMetrics::from_confusion(0, &cm.swapped()),
        ClassMetrics::from_confusion(1, &cm),
    ];
    let total = cm.total();
    let mean = |f: fn(&ClassMetrics) -> f64| (f(&classes[0]) + f(&classes[1])) / 2.0;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        classes
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    let macro_avg = Average {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        support: total,
    };
    let weighted_avg = Average {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
        support: total,
    };
    Ok(MetricReport {
        accuracy: cm.accuracy().value,
        confusion: cm,
        classes,
        macro_avg,
        weighted_avg,
    })
}

impl MetricReport {
    /// Console table with one row per class (named by `names[label]`), the
    /// macro average, and the support-weighted "avg / total" row.
    pub fn table(&self, names: &[&str]) -> String {
        let label_width = names
            .iter()
            .map(|n| n.len())
            .chain(["avg / total".len()])
            .max()
            .unwrap_or(0)
            + 2;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:label_width$}{:>10}{:>10}{:>10}{:>10}",
            "", "precision", "recall", "f1-score", "support"
        );
        let _ = writeln!(out);
        for c in self.classes.iter().rev() {
            let name = names.get(c.label).copied().unwrap_or("?");
            let flag = if c.precision_degenerate || c.recall_degenerate { "  *" } else { "" };
            let _ = writeln!(
                out,
                "{name:label_width$}{:>10.4}{:>10.4}{:>10.4}{:>10}{flag}",
                c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(out);
        for (name, avg) in [("macro avg", &self.macro_avg), ("avg / total", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{name:label_width$}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                avg.precision, avg.recall, avg.f1, avg.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "accuracy {:.4}", self.accuracy);
        if self.classes.iter().any(|c| c.precision_degenerate || c.recall_degenerate) {
            let _ = writeln!(out, "* a rate had a zero denominator and is reported as 0");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(tp: usize, fp: usize, fn_: usize, tn: usize) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 1, 0], &[1, 1, 0]).unwrap(), cm(2, 0, 0, 1));
        assert_eq!(confusion(&[1, 0], &[0, 1]).unwrap(), cm(0, 1, 1, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[1], &[1, 0]), Err(Error::Data(_))));
        assert!(matches!(confusion(&[], &[]), Err(Error::EmptyDataset(_))));
        assert!(matches!(confusion(&[2], &[1]), Err(Error::Label(2))));
        assert!(matches!(confusion(&[0], &[3]), Err(Error::Label(3))));
    }

    #[test]
    fn ten_fixed_pairs_by_hand() {
        let preds = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1];
        let truths = [1, 0, 0, 1, 1, 0, 1, 0, 0, 1];
        // Hand count: tp at 0,3,6,9; fp at 2,8; fn at 4; tn at 1,5,7.
        assert_eq!(confusion(&preds, &truths).unwrap(), cm(4, 2, 1, 3));
    }

    #[test]
    fn precision_recall_examples() {
        assert_eq!(precision(&cm(8, 2, 0, 0)).value, 0.8);
        assert_eq!(precision(&cm(5, 0, 3, 1)).value, 1.0);
        let p = precision(&cm(0, 0, 4, 1));
        assert_eq!((p.value, p.degenerate), (0.0, true));

        assert!((recall(&cm(8, 0, 1, 0)).value - 0.888889).abs() < 1e-6);
        assert_eq!(recall(&cm(3, 9, 0, 0)).value, 1.0);
        let r = recall(&cm(0, 2, 0, 5));
        assert_eq!((r.value, r.degenerate), (0.0, true));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert!((f1(0.8, 0.888889) - 0.842105).abs() < 1e-6);
        // 2 * 0.9644 / 1.9644; the printed table value of 0.9375 does not follow.
        assert!((f1(1.0, 0.9644) - 0.98188).abs() < 1e-4);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn perfect_report() {
        let truths: Vec<usize> = [vec![1; 125], vec![0; 31]].concat();
        let r = report(&truths, &truths).unwrap();
        assert_eq!((r.classes[1].support, r.classes[0].support), (125, 31));
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
        assert_eq!((r.macro_avg.f1, r.weighted_avg.f1), (1.0, 1.0));
        assert_eq!(r.weighted_avg.support, 156);
    }

    #[test]
    fn all_positive_predictions() {
        let r = report(&[1, 1, 1, 1], &[1, 1, 1, 0]).unwrap();
        let (c1, c0) = (&r.classes[1], &r.classes[0]);
        assert_eq!((c1.precision, c1.recall), (0.75, 1.0));
        assert!((c1.f1 - 6.0 / 7.0).abs() < 1e-12);
        assert!(!c1.precision_degenerate);
        assert_eq!((c0.precision, c0.recall, c0.f1), (0.0, 0.0, 0.0));
        assert!(c0.precision_degenerate && !c0.recall_degenerate);
        assert_eq!(r.weighted_avg.f1, 0.75 * c1.f1 + 0.25 * c0.f1);
        assert_eq!(r.weighted_avg.precision, 0.75 * 0.75);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn table_layout() {
        let r = report(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        let t = r.table(&["not deleted", "deleted"]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].ends_with("precision    recall  f1-score   support"));
        assert!(lines[2].starts_with("deleted"));
        assert!(lines[3].starts_with("not deleted"));
        assert!(t.contains("avg / total"));
        assert!(t.contains("accuracy 0.7500"));
    }

    fn labels(max_len: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1..=max_len).prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..2, n),
                prop::collection::vec(0usize..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn counts_match_recount((preds, truths) in labels(1000)) {
            let c = confusion(&preds, &truths).unwrap();
            let count = |p, t| preds.iter().zip(&truths).filter(|&(&a, &b)| a == p && b == t).count();
            prop_assert_eq!(c, cm(count(1, 1), count(1, 0), count(0, 1), count(0, 0)));
            prop_assert_eq!(c.total(), preds.len());
        }

        #[test]
        fn rates_bounded_and_harmonic((preds, truths) in labels(200)) {
            let r = report(&preds, &truths).unwrap();
            for c in &r.classes {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                if c.precision + c.recall > 0.0 {
                    prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-15);
                    prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-15);
                }
            }
            prop_assert!((0.0..=1.0).contains(&r.accuracy));
            prop_assert_eq!(r.classes[0].support + r.classes[1].support, preds.len());
        }

        #[test]
        fn swapping_labels_swaps_rows((preds, truths) in labels(200)) {
            let flip = |v: &[usize]| v.iter().map(|&x| 1 - x).collect::<Vec<_>>();
            let a = report(&preds, &truths).unwrap();
            let b = report(&flip(&preds), &flip(&truths)).unwrap();
            let strip = |c: &ClassMetrics| (c.precision, c.recall, c.f1, c.support);
            prop_assert_eq!(strip(&a.classes[0]), strip(&b.classes[1]));
            prop_assert_eq!(strip(&a.classes[1]), strip(&b.classes[0]));
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert_eq!(a.macro_avg, b.macro_avg);
        }
    }
}
