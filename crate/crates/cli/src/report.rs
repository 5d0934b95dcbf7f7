//! Text artifacts: the per-round CSV table and the flat final report.
//!
//! Both formats print numbers through [`fmt_sig`] so reruns of the same
//! experiment produce byte-identical files (timing columns aside).

use fednids_core::federation::RoundReport;
use fednids_core::metrics::EvaluationReport;

/// Formats `x` with six significant digits using plain decimal notation.
///
/// The decimal count adapts to the magnitude (`90.0` → `90.0000`,
/// `9.0909…` → `9.09091`, `0.0123` → `0.0123000`); zero prints as
/// `0.00000`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Renders the federated round table:
/// `round,org_id,accuracy,auc,f1,dr,far,round_time_s`.
pub fn emit_round_table(rounds: &[RoundReport]) -> String {
    let mut out = String::from("round,org_id,accuracy,auc,f1,dr,far,round_time_s\n");
    for round in rounds {
        for (org_id, eval) in &round.evaluations {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                round.round_index,
                org_id,
                fmt_sig(eval.accuracy),
                fmt_sig(eval.auc),
                fmt_sig(eval.f1),
                fmt_sig(eval.detection_rate),
                fmt_sig(eval.false_alarm_rate),
                fmt_sig(round.wall_time_s),
            ));
        }
    }
    out
}

/// Renders evaluation blocks as flat `prefix.metric = value` lines.
///
/// Callers supply the full prefix per block (for example
/// `federated.dnn.enterprise` or `localised.dnn.train_a.eval_b`); blocks are
/// separated by a blank line and emitted in the given order.
pub fn emit_final_report(sections: &[(String, &EvaluationReport)]) -> String {
    let mut out = String::new();
    for (index, (prefix, eval)) in sections.iter().enumerate() {
        if index > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{prefix}.accuracy = {}\n", fmt_sig(eval.accuracy)));
        out.push_str(&format!("{prefix}.auc = {}\n", fmt_sig(eval.auc)));
        out.push_str(&format!("{prefix}.f1 = {}\n", fmt_sig(eval.f1)));
        out.push_str(&format!("{prefix}.dr = {}\n", fmt_sig(eval.detection_rate)));
        out.push_str(&format!(
            "{prefix}.far = {}\n",
            fmt_sig(eval.false_alarm_rate)
        ));
        out.push_str(&format!(
            "{prefix}.train_time_s = {}\n",
            fmt_sig(eval.train_time_s)
        ));
        if !eval.per_category_dr.is_empty() {
            let mean = eval.per_category_dr.values().sum::<f64>()
                / eval.per_category_dr.len() as f64;
            assert!(
                (mean - eval.per_category_avg).abs() <= 1e-9,
                "per-category average {} disagrees with listed categories (mean {mean})",
                eval.per_category_avg
            );
        }
        for (category, dr) in &eval.per_category_dr {
            out.push_str(&format!(
                "{prefix}.category_dr.{category} = {}\n",
                fmt_sig(*dr)
            ));
        }
        out.push_str(&format!(
            "{prefix}.category_dr.average = {}\n",
            fmt_sig(eval.per_category_avg)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample_eval() -> EvaluationReport {
        let mut per_category_dr = BTreeMap::new();
        per_category_dr.insert("DoS".to_string(), 90.0);
        per_category_dr.insert("Reconnaissance".to_string(), 70.0);
        EvaluationReport {
            accuracy: 90.0,
            auc: 0.954321,
            f1: 88.888_888_9,
            detection_rate: 88.888_888_9,
            false_alarm_rate: 9.090_909_1,
            per_category_dr,
            per_category_avg: 80.0,
            train_time_s: 1.25,
        }
    }

    #[test]
    fn fmt_sig_keeps_six_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0.00000");
        assert_eq!(fmt_sig(90.0), "90.0000");
        assert_eq!(fmt_sig(100.0), "100.000");
        assert_eq!(fmt_sig(9.090_909_1), "9.09091");
        assert_eq!(fmt_sig(0.5), "0.500000");
        assert_eq!(fmt_sig(0.0123), "0.0123000");
        assert_eq!(fmt_sig(-3.5), "-3.50000");
        assert_eq!(fmt_sig(123456.7), "123457");
    }

    #[test]
    fn final_report_lists_metrics_then_categories() {
        let eval = sample_eval();
        let text = emit_final_report(&[("federated.dnn.enterprise".to_string(), &eval)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "federated.dnn.enterprise.accuracy = 90.0000");
        assert_eq!(lines[1], "federated.dnn.enterprise.auc = 0.954321");
        assert_eq!(lines[3], "federated.dnn.enterprise.dr = 88.8889");
        assert_eq!(lines[4], "federated.dnn.enterprise.far = 9.09091");
        assert_eq!(lines[6], "federated.dnn.enterprise.category_dr.DoS = 90.0000");
        assert_eq!(
            lines.last().unwrap(),
            &"federated.dnn.enterprise.category_dr.average = 80.0000"
        );
    }

    #[test]
    fn emission_is_reproducible() {
        let eval = sample_eval();
        let sections = vec![
            ("centralised.dnn.a".to_string(), &eval),
            ("centralised.dnn.b".to_string(), &eval),
        ];
        assert_eq!(emit_final_report(&sections), emit_final_report(&sections));
    }

    #[test]
    #[should_panic(expected = "per-category average")]
    fn final_report_rejects_inconsistent_category_average() {
        let mut eval = sample_eval();
        eval.per_category_avg = 55.0;
        emit_final_report(&[("federated.dnn.x".to_string(), &eval)]);
    }
}
