//! Post-hoc analysis of generated driving scenarios: outcome rates, control
//! distributions, a geometric collision taxonomy, and unsupervised clustering
//! of crash geometries to check the taxonomy against the data.
//!
//! Everything here is a pure function over recorded runs; nothing touches the
//! simulator or the learners beyond reading their output records.

mod error;
mod kmeans;
mod metrics;
mod pca;
mod report;
mod taxonomy;

pub use error::{AnalysisError, Result};
pub use kmeans::{kmeans_cluster, Kmeans};
pub use metrics::{
    effectiveness, format_report, macro_metrics, metrics_report, micro_metrics,
    write_histogram_csv, write_report_json, ActionRange, Histogram, MacroMetrics, MetricsReport,
    MicroMetrics, RoleStats, SeriesStats, ACCEL_BIN_WIDTH, STEERING_BIN_WIDTH,
};
pub use pca::{pca_reduce, Pca};
pub use report::{
    cluster_label_report, write_cluster_report_json, ClusterLabelReport, DEFAULT_CLUSTERS,
};
pub use taxonomy::{
    closing_speed, collision_features, label_collision_type, CollisionFeature, CollisionLabel,
    LabeledCollision, HIGH_SPEED_CLOSING, N_COLLISION_LABELS,
};
