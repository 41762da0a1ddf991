//! Tracking metrics (OTB precision and success, VOT accuracy, robustness
//! and simplified EAO), evaluation runs and report files.

mod ablation;
mod metrics;
mod report;
mod svg;

pub use ablation::{
    ablation_row, loss_grid, repeat_seeds, run_ablation, sampling_grid, AblationReport, AblationRow, MeanSummary,
    ABLATION_RATES, ABLATION_STRATEGIES,
};
pub use metrics::{
    iou, precision_curve, precision_from_errors, success_auc, success_curve, success_from_ious, success_thresholds,
    vot_metrics, Curve, VotMetrics, BURN_IN, EAO_RANGE, PRECISION_AT, PRECISION_THRESHOLDS, ROBUSTNESS_UNIT,
    SUCCESS_STEPS,
};
pub use report::{
    emit_report, evaluate, relative_drop, Comparison, MetricsReport, OtbSummary, Summary, VideoMetrics, VotSummary,
    BOTH_POLICIES, REPORT_FILES,
};
