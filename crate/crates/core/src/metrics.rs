//! Evaluation metrics for binary flow classification.
//!
//! Rate metrics (accuracy, detection rate, false alarm rate, F1) are
//! expressed in percent, matching the reporting convention of the experiment
//! tables. Every ratio uses the convention 0/0 = 0 so degenerate inputs never
//! produce NaN.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{Error, Result};

/// Counts of threshold decisions against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Threshold metrics derived from a confusion matrix, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    /// Recall on the attack class.
    pub detection_rate: f64,
    /// Share of benign traffic flagged as attack.
    pub false_alarm_rate: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Full evaluation of one model on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
    /// Detection rate per attack category (benign excluded), in percent.
    pub per_category_dr: BTreeMap<String, f64>,
    /// Unweighted mean of the per-category detection rates.
    pub per_category_avg: f64,
    /// Wall-clock training time behind this evaluation, in seconds.
    pub train_time_s: f64,
}

fn pct(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        0.0
    } else {
        100.0 * numerator / denominator
    }
}

fn validate_pairs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("metrics require at least one sample"));
    }
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            context: "scores vs labels",
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score at index {i}")));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::invalid(format!(
            "label at index {i} is {}, expected 0 or 1",
            labels[i]
        )));
    }
    Ok(())
}

/// Thresholds `probabilities` (predict attack when `p >= threshold`, so ties
/// go to the attack class) and counts decisions against `labels`.
pub fn confusion(probabilities: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    validate_pairs(probabilities, labels)?;
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for (&p, &y) in probabilities.iter().zip(labels) {
        let predicted_attack = p >= threshold;
        match (y, predicted_attack) {
            (1, true) => cm.true_positives += 1,
            (1, false) => cm.false_negatives += 1,
            (0, true) => cm.false_positives += 1,
            (0, false) => cm.true_negatives += 1,
            _ => unreachable!("labels validated to be 0 or 1"),
        }
    }
    Ok(cm)
}

/// Derives the percent metrics from a confusion matrix.
pub fn binary_metrics(cm: &ConfusionMatrix) -> BinaryMetrics {
    let tp = cm.true_positives as f64;
    let fp = cm.false_positives as f64;
    let tn = cm.true_negatives as f64;
    let fn_ = cm.false_negatives as f64;

    let accuracy = pct(tp + tn, tp + tn + fp + fn_);
    let detection_rate = pct(tp, tp + fn_);
    let false_alarm_rate = pct(fp, fp + tn);
    let precision = pct(tp, tp + fp);
    let f1 = if detection_rate + precision == 0.0 {
        0.0
    } else {
        2.0 * detection_rate * precision / (detection_rate + precision)
    };

    BinaryMetrics {
        accuracy,
        detection_rate,
        false_alarm_rate,
        precision,
        f1,
    }
}

/// Area under the ROC curve, built by sweeping every distinct score as a
/// threshold and integrating with the trapezoidal rule.
///
/// Tied scores are collapsed into a single ROC point, which makes the result
/// equal to the Mann-Whitney statistic with half credit for ties. The sweep
/// accumulates integer TP/FP counts and divides once at the end, so the value
/// is bitwise identical to the pairwise count `(2*wins + ties) / (2*P*N)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    validate_pairs(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l == 1).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut tp: u64 = 0;
    let mut area2pn: u64 = 0; // sum of delta_fp * (tp_before + tp_after), i.e. 2*area*P*N
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        let mut group_tp = 0u64;
        let mut group_fp = 0u64;
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] == 1 {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            i += 1;
        }
        area2pn += group_fp * (2 * tp + group_tp);
        tp += group_tp;
    }
    Ok(area2pn as f64 / (2 * positives * negatives) as f64)
}

/// Detection rate per attack category plus the unweighted average across
/// categories. Rows whose category equals `benign_marker` are excluded.
pub fn per_category_dr(
    probabilities: &[f64],
    categories: &[String],
    threshold: f64,
    benign_marker: &str,
) -> Result<(BTreeMap<String, f64>, f64)> {
    if probabilities.len() != categories.len() {
        return Err(Error::Dimension {
            context: "probabilities vs categories",
            expected: categories.len(),
            actual: probabilities.len(),
        });
    }
    let mut totals: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (&p, category) in probabilities.iter().zip(categories) {
        if category == benign_marker {
            continue;
        }
        let entry = totals.entry(category).or_insert((0, 0));
        entry.1 += 1;
        if p >= threshold {
            entry.0 += 1;
        }
    }
    if totals.is_empty() {
        return Err(Error::invalid("no attack categories present"));
    }
    let per_category: BTreeMap<String, f64> = totals
        .iter()
        .map(|(&cat, &(hit, total))| (cat.to_string(), pct(hit as f64, total as f64)))
        .collect();
    let average = per_category.values().sum::<f64>() / per_category.len() as f64;
    Ok((per_category, average))
}

/// Runs `f` and returns its result together with the elapsed wall-clock
/// seconds. Timing is measurement-only: it never influences any metric.
pub fn measure_time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Exhaustive pairwise form of AUC: wins plus half credit for ties over
    /// all (positive, negative) pairs. Used as the oracle for the sweep.
    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0u64;
        let mut ties = 0u64;
        let mut pairs = 0u64;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1;
                if si > sj {
                    wins += 1;
                } else if si == sj {
                    ties += 1;
                }
            }
        }
        (2 * wins + ties) as f64 / (2 * pairs) as f64
    }

    #[test]
    fn confusion_counts_a_small_batch() {
        let cm = confusion(&[0.6, 0.4, 0.6, 0.4], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!(cm.true_positives, 1);
        assert_eq!(cm.false_negatives, 1);
        assert_eq!(cm.false_positives, 1);
        assert_eq!(cm.true_negatives, 1);
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn threshold_ties_predict_attack() {
        let cm = confusion(&[0.5, 0.5], &[1, 0], 0.5).unwrap();
        assert_eq!(cm.true_positives, 1);
        assert_eq!(cm.false_positives, 1);
        assert_eq!(cm.true_negatives, 0);
    }

    #[test]
    fn confusion_rejects_length_mismatch_and_bad_labels() {
        assert!(confusion(&[0.5], &[1, 0], 0.5).is_err());
        assert!(confusion(&[0.5, 0.5], &[1, 2], 0.5).is_err());
        assert!(confusion(&[f64::NAN], &[1], 0.5).is_err());
        assert!(confusion(&[], &[], 0.5).is_err());
    }

    #[test]
    fn binary_metrics_hand_case() {
        let cm = ConfusionMatrix {
            true_positives: 40,
            true_negatives: 50,
            false_positives: 5,
            false_negatives: 5,
        };
        let m = binary_metrics(&cm);
        assert!(close(m.accuracy, 90.0, 1e-9));
        assert!(close(m.detection_rate, 800.0 / 9.0, 1e-9)); // 88.888...
        assert!(close(m.false_alarm_rate, 100.0 / 11.0, 1e-9)); // 9.0909...
        assert!(close(m.precision, 800.0 / 9.0, 1e-9));
        assert!(close(m.f1, 800.0 / 9.0, 1e-9));
    }

    #[test]
    fn binary_metrics_perfect_classifier() {
        let cm = ConfusionMatrix {
            true_positives: 10,
            true_negatives: 10,
            false_positives: 0,
            false_negatives: 0,
        };
        let m = binary_metrics(&cm);
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.detection_rate, 100.0);
        assert_eq!(m.false_alarm_rate, 0.0);
        assert_eq!(m.f1, 100.0);
    }

    #[test]
    fn zero_over_zero_ratios_are_zero() {
        // No predicted positives and no actual positives.
        let cm = ConfusionMatrix {
            true_positives: 0,
            true_negatives: 3,
            false_positives: 0,
            false_negatives: 0,
        };
        let m = binary_metrics(&cm);
        assert_eq!(m.detection_rate, 0.0);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.false_alarm_rate, 0.0);
    }

    #[test]
    fn accuracy_identity_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let cm = ConfusionMatrix {
                true_positives: rng.random_range(0..50),
                false_positives: rng.random_range(0..50),
                true_negatives: rng.random_range(0..50),
                false_negatives: rng.random_range(0..50),
            };
            if cm.total() == 0 {
                continue;
            }
            let m = binary_metrics(&cm);
            let expected =
                100.0 * (cm.true_positives + cm.true_negatives) as f64 / cm.total() as f64;
            assert!(close(m.accuracy, expected, 1e-12));
        }
    }

    #[test]
    fn auc_perfectly_separated_is_one() {
        let auc = auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_identical_scores_is_half() {
        let auc = auc(&[0.3, 0.3, 0.3, 0.3], &[1, 0, 1, 0]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_classic_quartet() {
        let auc = auc(&[0.9, 0.8, 0.7, 0.1], &[1, 0, 1, 0]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(matches!(
            auc(&[0.1, 0.9], &[1, 1]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn auc_matches_pairwise_oracle_on_random_tied_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let alphabet = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
        for _ in 0..500 {
            let n = rng.random_range(2..=12);
            let scores: Vec<f64> = (0..n)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
            if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                continue;
            }
            let swept = auc(&scores, &labels).unwrap();
            let oracle = pairwise_auc(&scores, &labels);
            assert_eq!(swept, oracle, "scores={scores:?} labels={labels:?}");
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let n = rng.random_range(4..40);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
            labels[0] = 0;
            labels[1] = 1;
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            assert_eq!(
                auc(&scores, &labels).unwrap(),
                auc(&transformed, &labels).unwrap()
            );
        }
    }

    #[test]
    fn per_category_average_is_unweighted() {
        let probs = vec![0.9, 0.9, 0.1, 0.9, 0.1, 0.1];
        let cats: Vec<String> = ["DoS", "DoS", "DoS", "DoS", "Worms", "Benign"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (per, avg) = per_category_dr(&probs, &cats, 0.5, "Benign").unwrap();
        assert!(close(per["DoS"], 75.0, 1e-12));
        assert!(close(per["Worms"], 0.0, 1e-12));
        assert!(close(avg, 37.5, 1e-12));
        assert!(!per.contains_key("Benign"));
    }

    #[test]
    fn per_category_two_categories_hand_case() {
        let probs = vec![0.9, 0.9, 0.9, 0.1];
        let cats: Vec<String> = ["Exploits", "Exploits", "Fuzzers", "Fuzzers"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (per, avg) = per_category_dr(&probs, &cats, 0.5, "Benign").unwrap();
        assert!(close(per["Exploits"], 100.0, 1e-12));
        assert!(close(per["Fuzzers"], 50.0, 1e-12));
        assert!(close(avg, 75.0, 1e-12));
    }

    #[test]
    fn per_category_requires_an_attack_category() {
        let probs = vec![0.9];
        let cats = vec!["Benign".to_string()];
        assert!(per_category_dr(&probs, &cats, 0.5, "Benign").is_err());
    }

    #[test]
    fn overall_dr_is_weighted_mean_of_category_drs() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let names = ["DoS", "Recon", "Worms", "Theft"];
        for _ in 0..50 {
            let n = rng.random_range(20..200);
            let mut probs = Vec::with_capacity(n);
            let mut cats = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                probs.push(rng.random_range(0.0..1.0));
                if rng.random_range(0..3) == 0 {
                    cats.push("Benign".to_string());
                    labels.push(0u8);
                } else {
                    cats.push(names[rng.random_range(0..names.len())].to_string());
                    labels.push(1u8);
                }
            }
            if !labels.contains(&1) {
                continue;
            }
            let cm = confusion(&probs, &labels, 0.5).unwrap();
            let overall = binary_metrics(&cm).detection_rate;
            let (per, _) = per_category_dr(&probs, &cats, 0.5, "Benign").unwrap();
            let mut weighted = 0.0;
            let attack_total = labels.iter().filter(|&&l| l == 1).count() as f64;
            for (cat, dr) in &per {
                let count = cats.iter().filter(|c| *c == cat).count() as f64;
                weighted += dr * count / attack_total;
            }
            assert!(close(overall, weighted, 1e-9));
        }
    }

    #[test]
    fn measure_time_is_nonnegative_and_passes_value_through() {
        let (value, secs) = measure_time(|| 6 * 7);
        assert_eq!(value, 42);
        assert!(secs >= 0.0);
    }
}
