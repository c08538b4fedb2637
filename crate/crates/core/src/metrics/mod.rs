//! AUC, LogLoss, per-slice reporting and paired significance tests.

mod classification;
mod report;
mod ttest;

pub use classification::{auc, logloss};
pub use report::{slice_report, MetricsReport, Prediction, PredictionSet, Slice, SliceMetrics};
pub use ttest::{paired_ttest, regularized_incomplete_beta, student_t_two_sided_p, TTest};
