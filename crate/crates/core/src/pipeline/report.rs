use super::{MetricSummary, RankedImportanceReport};

/// Round to `decimals` places, halves away from zero.
pub fn round_half_away(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `"70.7(7.2)"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.1}({:.1})", round_half_away(mean, 1), round_half_away(std, 1))
}

/// A percent weight with two decimals.
pub fn format_weight(percent: f64) -> String {
    format!("{:.2}", round_half_away(percent, 2))
}

/// Plain-text metric line plus the top-`top_k` importance table.
pub fn format_report(summary: &MetricSummary, report: &RankedImportanceReport, top_k: usize) -> String {
    let mut out = String::new();
    out.push_str("Accuracy\tPrecision\tRecall\n");
    out.push_str(&format!(
        "{}\t{}\t{}\n\n",
        format_mean_std(summary.accuracy.mean, summary.accuracy.std),
        format_mean_std(summary.precision.mean, summary.precision.std),
        format_mean_std(summary.recall.mean, summary.recall.std),
    ));
    out.push_str("Rank\tFeature\tWeight (%)\n");
    for (i, e) in report.top(top_k).iter().enumerate() {
        out.push_str(&format!("{}\t{}\t{}\n", i + 1, e.name, format_weight(e.weight)));
    }
    out
}
