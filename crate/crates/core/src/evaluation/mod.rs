//! Verification metrics and insertion/deletion curves.

mod curves;
mod metrics;

pub use curves::{
    baseline_seed, curve_auc, points_auc, random_order, run_curve, write_curves_csv, CurvePoint,
    CurveStudy, Direction, EvalCurve, LabeledPair, MetricKind, OrderingSource, RunManifest,
};
pub use metrics::{compute_eer, threshold_at_fmr, EerPoint, ScoreSet};
