//! Downstream evaluation: logistic regression on embeddings, accuracy and
//! F1, and the cross-validation harness with its parameter sweeps.

mod cv;
mod logreg;
mod metrics;
mod report;

pub use cv::{cross_validate, cross_validate_with_folds, sweep_d, sweep_k, EvalConfig, Method};
pub use logreg::{sigmoid, train_logreg, LogRegConfig, LogisticModel};
pub use metrics::{accuracy, f1};
pub use report::{render_table, sweep_csv, to_json, ConfigEcho, FoldMetrics, MetricsReport, SweepTag};
