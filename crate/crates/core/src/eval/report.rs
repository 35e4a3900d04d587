//! Metrics reports and their table, JSON and CSV renderings.

use serde::Serialize;

use super::cv::Method;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub k: usize,
    pub d: usize,
    pub eta: f64,
    pub seed: u64,
    pub folds: usize,
}

/// Swept parameter attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTag {
    pub name: String,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTag>,
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Arithmetic mean, summed in order.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

impl MetricsReport {
    pub fn from_folds(
        method: Method,
        config: ConfigEcho,
        sweep: Option<SweepTag>,
        folds: Vec<FoldMetrics>,
    ) -> Self {
        Self {
            method,
            sweep,
            mean_accuracy: mean(folds.iter().map(|f| f.accuracy)),
            mean_f1: mean(folds.iter().map(|f| f.f1)),
            folds,
            config,
            error: None,
        }
    }

    pub fn failed(method: Method, config: ConfigEcho, sweep: Option<SweepTag>, error: String) -> Self {
        Self {
            method,
            sweep,
            folds: Vec::new(),
            mean_accuracy: f64::NAN,
            mean_f1: f64::NAN,
            config,
            error: Some(error),
        }
    }

    pub fn tagged(mut self, tag: SweepTag) -> Self {
        if tag.name == "k" {
            self.config.k = tag.value;
        }
        self.sweep = Some(tag);
        self
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

fn row_label(r: &MetricsReport) -> String {
    match &r.sweep {
        Some(tag) => format!("{} ({}={})", r.method, tag.name, tag.value),
        None => r.method.to_string(),
    }
}

/// Aligned `Method | Accuracy | F1` table of mean metrics.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let labels: Vec<String> = reports.iter().map(row_label).collect();
    let width = labels.iter().map(String::len).chain([6]).max().unwrap_or(6);
    let mut out = format!("{:<width$} | {:>8} | {:>8}\n", "Method", "Accuracy", "F1");
    out.push_str(&format!("{}-+-{}-+-{}\n", "-".repeat(width), "-".repeat(8), "-".repeat(8)));
    for (label, r) in labels.iter().zip(reports) {
        match &r.error {
            Some(e) => out.push_str(&format!("{label:<width$} | error: {e}\n")),
            None => out.push_str(&format!(
                "{label:<width$} | {:>8.4} | {:>8.4}\n",
                r.mean_accuracy, r.mean_f1
            )),
        }
    }
    out
}

pub fn to_json(reports: &[MetricsReport]) -> String {
    // NaN means of failed reports serialize as null.
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

/// `param,fold,accuracy,f1` rows: one per fold plus a `mean` row per
/// report; failed reports contribute a single `error` row.
pub fn sweep_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("param,fold,accuracy,f1\n");
    for r in reports {
        let param = r.sweep.as_ref().map(|t| t.value.to_string()).unwrap_or_default();
        if r.is_error() {
            out.push_str(&format!("{param},error,,\n"));
            continue;
        }
        for f in &r.folds {
            out.push_str(&format!("{param},{},{},{}\n", f.fold, f.accuracy, f.f1));
        }
        out.push_str(&format!("{param},mean,{},{}\n", r.mean_accuracy, r.mean_f1));
    }
    out
}
