//! Confusion-matrix accounting, accuracy/precision/recall/F1, and
//! probability-density histograms.
//!
//! Multiclass metrics use the one-vs-rest reading per class with macro
//! averaging as the headline number; micro averages are computed alongside.
//! Zero denominators define the affected precision/recall/F1 as 0.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label {label} at position {index} outside [0, {classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("true/predicted label counts differ: {true_len} vs {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("metric undefined on an empty confusion matrix")]
    EmptyMatrix,
    #[error("histogram needs at least 2 bins, got {bins}")]
    TooFewBins { bins: usize },
    #[error("histogram input is empty")]
    EmptyInput,
    #[error("probability {value} at position {index} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("cannot merge confusion matrices of {left} and {right} classes")]
    ClassCountMismatch { left: usize, right: usize },
    #[error("binary counts require exactly 2 classes, got {classes}")]
    NotBinary { classes: usize },
}

/// K x K table of true-vs-predicted counts; entry `[i][j]` counts samples
/// with true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, true_class: usize) -> u64 {
        self.counts[true_class * self.classes..(true_class + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|i| self.count(i, predicted)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.count(i, i)).sum()
    }

    /// Adds one count per (true, predicted) pair. Order-independent.
    pub fn accumulate(
        &mut self,
        true_labels: &[usize],
        predicted: &[usize],
    ) -> Result<(), MetricsError> {
        if true_labels.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                true_len: true_labels.len(),
                pred_len: predicted.len(),
            });
        }
        for (i, (&t, &p)) in true_labels.iter().zip(predicted).enumerate() {
            for label in [t, p] {
                if label >= self.classes {
                    return Err(MetricsError::LabelOutOfRange {
                        index: i,
                        label,
                        classes: self.classes,
                    });
                }
            }
        }
        for (&t, &p) in true_labels.iter().zip(predicted) {
            self.counts[t * self.classes + p] += 1;
        }
        Ok(())
    }

    /// Entrywise addition; the associative merge for parallel accumulation.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if self.classes != other.classes {
            return Err(MetricsError::ClassCountMismatch {
                left: self.classes,
                right: other.classes,
            });
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Correct predictions over total: `trace / N`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = cm.total();
    if n == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / n as f64)
}

/// Per-class one-vs-rest precision, recall, and F1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> ClassMetrics {
    let k = cm.classes();
    let mut precision = Vec::with_capacity(k);
    let mut recall = Vec::with_capacity(k);
    let mut f1 = Vec::with_capacity(k);
    for c in 0..k {
        let p = ratio(cm.count(c, c), cm.col_sum(c));
        let r = ratio(cm.count(c, c), cm.row_sum(c));
        precision.push(p);
        recall.push(r);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }
    ClassMetrics { precision, recall, f1 }
}

/// Headline metric bundle for one evaluated model/dataset pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    pub samples: u64,
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricReport, MetricsError> {
    let acc = accuracy(cm)?;
    let per_class = precision_recall_f1(cm);
    let k = cm.classes() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k;

    // Micro: pooled one-vs-rest counts. For single-label classification the
    // pooled FP and FN totals coincide, so micro P = micro R = accuracy.
    let tp: u64 = cm.trace();
    let fp: u64 = (0..cm.classes())
        .map(|c| cm.col_sum(c) - cm.count(c, c))
        .sum();
    let fn_: u64 = (0..cm.classes())
        .map(|c| cm.row_sum(c) - cm.count(c, c))
        .sum();
    let micro_p = ratio(tp, tp + fp);
    let micro_r = ratio(tp, tp + fn_);
    let micro_f1 = if micro_p + micro_r == 0.0 {
        0.0
    } else {
        2.0 * micro_p * micro_r / (micro_p + micro_r)
    };

    Ok(MetricReport {
        accuracy: acc,
        macro_precision: mean(&per_class.precision),
        macro_recall: mean(&per_class.recall),
        macro_f1: mean(&per_class.f1),
        micro_precision: micro_p,
        micro_recall: micro_r,
        micro_f1,
        per_class_precision: per_class.precision,
        per_class_recall: per_class.recall,
        per_class_f1: per_class.f1,
        samples: cm.total(),
    })
}

/// One-vs-rest counts for a 2-class matrix, with `positive` as the positive
/// class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub fn binary_counts(cm: &ConfusionMatrix, positive: usize) -> Result<BinaryCounts, MetricsError> {
    if cm.classes() != 2 {
        return Err(MetricsError::NotBinary {
            classes: cm.classes(),
        });
    }
    let negative = 1 - positive;
    Ok(BinaryCounts {
        tp: cm.count(positive, positive),
        tn: cm.count(negative, negative),
        fp: cm.count(negative, positive),
        fn_: cm.count(positive, negative),
    })
}

impl BinaryCounts {
    /// `(TP + TN) / total answers`.
    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    /// `TP / (TP + FP)`.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TP / (TP + FN)`.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2 * P * R / (P + R)`.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Normalized histogram over [0, 1]; bin masses sum to 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub bin_left: Vec<f64>,
    pub bin_right: Vec<f64>,
    pub density: Vec<f64>,
}

/// Bins per-sample probabilities (e.g. the maximum softmax probability, or
/// the probability assigned to the true class) into a normalized histogram.
/// A value of exactly 1.0 lands in the last bin.
pub fn probability_density_report(values: &[f64], bins: usize) -> Result<Histogram, MetricsError> {
    if bins < 2 {
        return Err(MetricsError::TooFewBins { bins });
    }
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricsError::ValueOutOfRange { index: i, value: v });
        }
    }
    let mut counts = vec![0u64; bins];
    for &v in values {
        let bin = ((v * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let total = values.len() as f64;
    let width = 1.0 / bins as f64;
    Ok(Histogram {
        bin_left: (0..bins).map(|b| b as f64 * width).collect(),
        bin_right: (1..=bins).map(|b| b as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

impl Histogram {
    /// `bin_left,bin_right,density` rows for plotting tools.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for i in 0..self.density.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.bin_left[i], self.bin_right[i], self.density[i]
            ));
        }
        out
    }
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "model,dataset,accuracy,precision,recall,f1,param_count,epochs,seed";

    /// One comparison-table row; precision/recall/F1 are the macro values.
    pub fn csv_row(
        &self,
        model: &str,
        dataset: &str,
        param_count: u64,
        epochs: u64,
        seed: u64,
    ) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            model,
            dataset,
            self.accuracy,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            param_count,
            epochs,
            seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_counts(k: usize, entries: &[(usize, usize, u64)]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(k);
        for &(t, p, n) in entries {
            for _ in 0..n {
                cm.accumulate(&[t], &[p]).unwrap();
            }
        }
        cm
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cm.count(i, j), if i == j { [1, 2, 1][i] } else { 0 });
            }
        }
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn empty_accumulate_is_a_noop_and_empty_accuracy_errors() {
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&[], &[]).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(accuracy(&cm), Err(MetricsError::EmptyMatrix)));
    }

    #[test]
    fn random_pairs_match_naive_counting_oracle() {
        let k = 7;
        let mut seed = 123u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as usize
        };
        let truth: Vec<usize> = (0..1000).map(|_| next() % k).collect();
        let pred: Vec<usize> = (0..1000).map(|_| next() % k).collect();
        let mut cm = ConfusionMatrix::new(k);
        cm.accumulate(&truth, &pred).unwrap();
        // Naive pairwise oracle.
        for i in 0..k {
            for j in 0..k {
                let want = truth
                    .iter()
                    .zip(&pred)
                    .filter(|(&t, &p)| t == i && p == j)
                    .count() as u64;
                assert_eq!(cm.count(i, j), want);
            }
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let mut cm = ConfusionMatrix::new(2);
        assert!(matches!(
            cm.accumulate(&[0, 2], &[1, 0]),
            Err(MetricsError::LabelOutOfRange { index: 1, label: 2, classes: 2 })
        ));
    }

    #[test]
    fn binary_eq_arithmetic() {
        // TP=8, TN=7, FP=3, FN=2 with class 1 positive.
        let cm = from_counts(2, &[(1, 1, 8), (0, 0, 7), (0, 1, 3), (1, 0, 2)]);
        let b = binary_counts(&cm, 1).unwrap();
        assert_eq!(b.accuracy(), 0.75);
        assert_eq!(accuracy(&cm).unwrap(), 0.75); // trace/total coincides at K=2
        assert!((b.precision() - 8.0 / 11.0).abs() <= 1e-15);
        assert!((b.recall() - 0.8).abs() <= 1e-15);
        let per = precision_recall_f1(&cm);
        assert!((per.precision[1] - b.precision()).abs() <= 1e-15);
        assert!((per.recall[1] - b.recall()).abs() <= 1e-15);
        assert!((per.f1[1] - b.f1()).abs() <= 1e-15);
    }

    #[test]
    fn precision_half_when_tp_equals_fp() {
        let cm = from_counts(2, &[(1, 1, 5), (0, 1, 5)]);
        let per = precision_recall_f1(&cm);
        assert_eq!(per.precision[1], 0.5);
    }

    #[test]
    fn f1_equals_p_when_p_equals_r() {
        let cm = from_counts(2, &[(1, 1, 6), (0, 1, 2), (1, 0, 2), (0, 0, 3)]);
        let per = precision_recall_f1(&cm);
        assert_eq!(per.precision[1], per.recall[1]);
        assert_eq!(per.f1[1], per.precision[1]);
    }

    #[test]
    fn zero_denominators_define_zero_metrics() {
        // Class 1 never occurs and is never predicted.
        let cm = from_counts(2, &[(0, 0, 4)]);
        let per = precision_recall_f1(&cm);
        assert_eq!(per.precision[1], 0.0);
        assert_eq!(per.recall[1], 0.0);
        assert_eq!(per.f1[1], 0.0);
    }

    #[test]
    fn f1_lies_between_min_and_max_of_p_and_r() {
        let mut seed = 55u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(99);
            (seed >> 33) % 20
        };
        for _ in 0..200 {
            let cm = from_counts(
                3,
                &[
                    (0, 0, next()), (0, 1, next()), (0, 2, next()),
                    (1, 0, next()), (1, 1, next()), (1, 2, next()),
                    (2, 0, next()), (2, 1, next()), (2, 2, next()),
                ],
            );
            let per = precision_recall_f1(&cm);
            for c in 0..3 {
                let (p, r, f1) = (per.precision[c], per.recall[c], per.f1[c]);
                if p + r > 0.0 {
                    assert!(f1 >= p.min(r) - 1e-12 && f1 <= p.max(r) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn merge_equals_bulk_accumulation() {
        let truth: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let pred: Vec<usize> = (0..100).map(|i| (i * 7 + 3) % 4).collect();
        let mut whole = ConfusionMatrix::new(4);
        whole.accumulate(&truth, &pred).unwrap();
        let mut a = ConfusionMatrix::new(4);
        let mut b = ConfusionMatrix::new(4);
        a.accumulate(&truth[..40], &pred[..40]).unwrap();
        b.accumulate(&truth[40..], &pred[40..]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a, whole);
        assert_eq!(report(&a).unwrap(), report(&whole).unwrap());
    }

    #[test]
    fn histogram_all_ones_mass_in_last_bin() {
        let h = probability_density_report(&[1.0; 50], 10).unwrap();
        assert_eq!(h.density[9], 1.0);
        assert!(h.density[..9].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn histogram_uniform_samples_spread_evenly() {
        let n = 100_000usize;
        let mut seed = 9u64;
        let values: Vec<f64> = (0..n)
            .map(|_| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let h = probability_density_report(&values, 10).unwrap();
        for (b, &d) in h.density.iter().enumerate() {
            assert!((d - 0.1).abs() <= 0.01, "bin {b} density {d}");
        }
        assert!((h.density.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn histogram_degenerate_inputs_error() {
        assert!(matches!(
            probability_density_report(&[], 10),
            Err(MetricsError::EmptyInput)
        ));
        assert!(matches!(
            probability_density_report(&[0.5], 1),
            Err(MetricsError::TooFewBins { bins: 1 })
        ));
        assert!(matches!(
            probability_density_report(&[0.5, 1.5], 4),
            Err(MetricsError::ValueOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn permutation_equivariance_of_per_class_metrics() {
        let cm = from_counts(
            3,
            &[(0, 0, 5), (0, 1, 2), (1, 1, 7), (1, 2, 1), (2, 2, 4), (2, 0, 3)],
        );
        // Relabel classes by the cycle 0->1->2->0.
        let perm = [1usize, 2, 0];
        let mut relabeled = ConfusionMatrix::new(3);
        for i in 0..3 {
            for j in 0..3 {
                for _ in 0..cm.count(i, j) {
                    relabeled.accumulate(&[perm[i]], &[perm[j]]).unwrap();
                }
            }
        }
        let a = precision_recall_f1(&cm);
        let b = precision_recall_f1(&relabeled);
        #[allow(clippy::needless_range_loop)]
        for c in 0..3 {
            assert_eq!(a.precision[c], b.precision[perm[c]]);
            assert_eq!(a.recall[c], b.recall[perm[c]]);
            assert_eq!(a.f1[c], b.f1[perm[c]]);
        }
    }
}
