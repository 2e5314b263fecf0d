use std::io::Write;
use std::path::Path;

use natadv_learn::ScenarioRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kmeans::kmeans_cluster;
use crate::pca::pca_reduce;
use crate::taxonomy::{collision_features, LabeledCollision, N_COLLISION_LABELS};

/// Default cluster count, one per collision class.
pub const DEFAULT_CLUSTERS: usize = 10;

/// Joint view of unsupervised clusters and geometric collision classes over
/// a batch of runs. The geometric labels are the ground truth; the clusters
/// show whether the crash geometry separates on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabelReport {
    /// Agent-involved collisions found in the batch.
    pub events: usize,
    pub label_counts: [u64; N_COLLISION_LABELS],
    /// `label_counts` normalized by `events`; zeros when no events.
    pub label_ratios: [f64; N_COLLISION_LABELS],
    /// Combined ratio of the three counter-intuitive classes.
    pub counter_intuitive_share: f64,
    /// Clusters actually used (capped by the number of events).
    pub clusters: usize,
    /// `cross_table[cluster][label]` = number of events in both bins.
    pub cross_table: Vec<[u64; N_COLLISION_LABELS]>,
    /// Cluster index per event, parallel to `collisions`.
    pub assignments: Vec<usize>,
    pub collisions: Vec<LabeledCollision>,
}

impl ClusterLabelReport {
    fn empty() -> Self {
        ClusterLabelReport {
            events: 0,
            label_counts: [0; N_COLLISION_LABELS],
            label_ratios: [0.0; N_COLLISION_LABELS],
            counter_intuitive_share: 0.0,
            clusters: 0,
            cross_table: Vec::new(),
            assignments: Vec::new(),
            collisions: Vec::new(),
        }
    }
}

/// Extract, label, project, and cluster every agent-involved collision.
///
/// Feature vectors go through a 2-component projection before clustering so
/// the clusters form in the same plane a scatter plot would show. Requesting
/// more clusters than there are events quietly caps at the event count; a
/// batch with no collisions yields the empty report.
pub fn cluster_label_report(
    records: &[ScenarioRecord],
    k_clusters: usize,
    seed: u64,
    dt: f64,
    wheelbase: f64,
) -> Result<ClusterLabelReport> {
    let collisions: Vec<LabeledCollision> = records
        .par_iter()
        .map(|r| collision_features(r, dt, wheelbase))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    if collisions.is_empty() {
        return Ok(ClusterLabelReport::empty());
    }
    let n = collisions.len();

    let rows: Vec<Vec<f64>> = collisions.iter().map(|c| c.feature.0.to_vec()).collect();
    let pca = pca_reduce(&rows, 2.min(n))?;
    let clusters = k_clusters.min(n);
    let km = kmeans_cluster(&pca.scores, clusters, seed)?;

    let mut label_counts = [0u64; N_COLLISION_LABELS];
    let mut cross_table = vec![[0u64; N_COLLISION_LABELS]; clusters];
    for (c, &cluster) in collisions.iter().zip(&km.assignments) {
        let label = c.label.id as usize;
        label_counts[label] += 1;
        cross_table[cluster][label] += 1;
    }
    let label_ratios = label_counts.map(|c| c as f64 / n as f64);
    let counter_intuitive_share = label_ratios[7..].iter().sum();

    Ok(ClusterLabelReport {
        events: n,
        label_counts,
        label_ratios,
        counter_intuitive_share,
        clusters,
        cross_table,
        assignments: km.assignments,
        collisions,
    })
}

pub fn write_cluster_report_json(report: &ClusterLabelReport, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    Ok(())
}
