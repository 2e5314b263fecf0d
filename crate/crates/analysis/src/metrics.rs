use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use natadv_learn::{invert_bicycle, AdvTermination, ScenarioRecord, VehicleSnap};
use natadv_sim::RoadNetwork;
use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};

/// Acceleration histogram bin width, m/s^2.
pub const ACCEL_BIN_WIDTH: f64 = 0.25;
/// Steering histogram bin width, rad.
pub const STEERING_BIN_WIDTH: f64 = 0.05;

/// Fixed-width histogram over the real line, bins anchored at zero so the
/// same value lands in the same bin no matter what data surrounds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// bin index -> count; bin i covers [i*w, (i+1)*w)
    pub counts: BTreeMap<i64, u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !bin_width.is_finite() || bin_width <= 0.0 {
            return Err(AnalysisError::InvalidInput(format!(
                "bin width must be positive and finite, got {bin_width}"
            )));
        }
        Ok(Histogram { bin_width, counts: BTreeMap::new(), total: 0 })
    }

    pub fn bin_of(&self, v: f64) -> i64 {
        (v / self.bin_width).floor() as i64
    }

    /// Count a sample. Non-finite values are ignored.
    pub fn add(&mut self, v: f64) {
        if v.is_finite() {
            *self.counts.entry(self.bin_of(v)).or_insert(0) += 1;
            self.total += 1;
        }
    }

    /// Normalized density of a bin; integrates to one over all bins.
    pub fn density(&self, bin: i64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let count = self.counts.get(&bin).copied().unwrap_or(0);
        count as f64 / (self.total as f64 * self.bin_width)
    }
}

/// Write a histogram as `bin_lo,bin_hi,count,density` rows.
pub fn write_histogram_csv(hist: &Histogram, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_lo", "bin_hi", "count", "density"])?;
    for (&bin, &count) in &hist.counts {
        let lo = bin as f64 * hist.bin_width;
        w.write_record([
            format!("{lo:.6}"),
            format!("{:.6}", lo + hist.bin_width),
            count.to_string(),
            format!("{:.9}", hist.density(bin)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Closed interval actually visited by a signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionRange {
    pub min: f64,
    pub max: f64,
}

impl ActionRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Range and distribution of one control channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub range: Option<ActionRange>,
    pub histogram: Histogram,
}

impl SeriesStats {
    fn new(bin_width: f64) -> Self {
        SeriesStats { range: None, histogram: Histogram::new(bin_width).expect("const width") }
    }

    fn add(&mut self, v: f64) {
        if !v.is_finite() {
            return;
        }
        self.range = Some(match self.range {
            None => ActionRange { min: v, max: v },
            Some(r) => ActionRange { min: r.min.min(v), max: r.max.max(v) },
        });
        self.histogram.add(v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleStats {
    pub accel: SeriesStats,
    pub steering: SeriesStats,
}

impl RoleStats {
    fn new() -> Self {
        RoleStats {
            accel: SeriesStats::new(ACCEL_BIN_WIDTH),
            steering: SeriesStats::new(STEERING_BIN_WIDTH),
        }
    }
}

/// Run-level outcome rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub runs: usize,
    /// Fraction of runs ending in an agent-AV collision.
    pub collision_rate_av: f64,
    /// Fraction of runs ending in a collision between the agent and any
    /// other vehicle.
    pub collision_rate_other: f64,
    /// Agent lane transitions summed over all runs.
    pub lane_change_count: u64,
}

/// Control statistics split by the role a vehicle played in the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub agent: RoleStats,
    pub av: RoleStats,
    pub background: RoleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub macroscopic: MacroMetrics,
    pub microscopic: MicroMetrics,
}

/// Collision rates and lane-change totals over a batch of runs.
pub fn macro_metrics(records: &[ScenarioRecord], road: &RoadNetwork) -> Result<MacroMetrics> {
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let runs = records.len();
    let av_hits = records
        .iter()
        .filter(|r| r.termination == AdvTermination::AgentAvCollision)
        .count();
    let other_hits = records
        .iter()
        .filter(|r| r.termination == AdvTermination::AgentOtherCollision)
        .count();

    let mut lane_changes = 0u64;
    for rec in records {
        let mut prev = None;
        for step in &rec.steps {
            let Some(agent) = step.vehicles.iter().find(|v| v.id == rec.agent) else {
                continue;
            };
            let lane = road.locate([agent.x, agent.y]).map(|(id, _)| id);
            if let (Some(a), Some(b)) = (prev, lane) {
                if a != b {
                    lane_changes += 1;
                }
            }
            if lane.is_some() {
                prev = lane;
            }
        }
    }

    Ok(MacroMetrics {
        runs,
        collision_rate_av: av_hits as f64 / runs as f64,
        collision_rate_other: other_hits as f64 / runs as f64,
        lane_change_count: lane_changes,
    })
}

fn snap_pair<'a>(
    prev: &'a [VehicleSnap],
    cur: &'a [VehicleSnap],
    id: u64,
) -> Option<(&'a VehicleSnap, &'a VehicleSnap)> {
    Some((
        prev.iter().find(|v| v.id == id)?,
        cur.iter().find(|v| v.id == id)?,
    ))
}

/// Control ranges and histograms per role.
///
/// The agent's controls are taken from the recorded (already clamped)
/// actions. Background and AV controls are not recorded, so they are
/// recovered from consecutive pose snapshots; `dt` and `wheelbase` must match
/// the simulation the records came from.
pub fn micro_metrics(records: &[ScenarioRecord], dt: f64, wheelbase: f64) -> MicroMetrics {
    let mut agent = RoleStats::new();
    let mut av = RoleStats::new();
    let mut background = RoleStats::new();

    for rec in records {
        for step in &rec.steps {
            agent.accel.add(step.action[0]);
            agent.steering.add(step.action[1]);
        }
        for pair in rec.steps.windows(2) {
            let ids: Vec<u64> = pair[1].vehicles.iter().map(|v| v.id).collect();
            for id in ids {
                if id == rec.agent {
                    continue;
                }
                let Some((p, c)) = snap_pair(&pair[0].vehicles, &pair[1].vehicles, id) else {
                    continue;
                };
                let [a, s] = invert_bicycle(p, c, dt, wheelbase);
                let stats = if id == rec.av { &mut av } else { &mut background };
                stats.accel.add(a);
                stats.steering.add(s);
            }
        }
    }

    MicroMetrics { agent, av, background }
}

/// Weighted sum of a naturalness score and an adversariality score. Weights
/// are the caller's contract; nothing forces them to add up to one.
pub fn effectiveness(naturalness: f64, adversariality: f64, w_n: f64, w_a: f64) -> f64 {
    w_n * naturalness + w_a * adversariality
}

/// Both metric families over one batch.
pub fn metrics_report(
    records: &[ScenarioRecord],
    road: &RoadNetwork,
    dt: f64,
    wheelbase: f64,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        macroscopic: macro_metrics(records, road)?,
        microscopic: micro_metrics(records, dt, wheelbase),
    })
}

fn fmt_range(r: &Option<ActionRange>) -> String {
    match r {
        Some(r) => format!("[{:+.2}, {:+.2}]", r.min, r.max),
        None => "n/a".to_string(),
    }
}

/// Fixed-width text summary of a report, suitable for terminals and logs.
pub fn format_report(report: &MetricsReport) -> String {
    let m = &report.macroscopic;
    let mut out = String::new();
    out.push_str(&format!("runs                    {}\n", m.runs));
    out.push_str(&format!(
        "collision rate (AV)     {:.2}%\n",
        m.collision_rate_av * 100.0
    ));
    out.push_str(&format!(
        "collision rate (other)  {:.2}%\n",
        m.collision_rate_other * 100.0
    ));
    out.push_str(&format!("agent lane changes      {}\n", m.lane_change_count));
    out.push('\n');
    out.push_str("role        accel m/s^2      steering rad\n");
    for (name, stats) in [
        ("agent", &report.microscopic.agent),
        ("av", &report.microscopic.av),
        ("background", &report.microscopic.background),
    ] {
        out.push_str(&format!(
            "{name:<11} {:<16} {}\n",
            fmt_range(&stats.accel.range),
            fmt_range(&stats.steering.range),
        ));
    }
    out
}

/// Serialize a report as pretty JSON.
pub fn write_report_json(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use natadv_learn::ScenarioStep;
    use natadv_sim::RoadNetwork;

    fn snap(id: u64, x: f64, y: f64, heading: f64, speed: f64) -> VehicleSnap {
        VehicleSnap { id, x, y, heading, speed, length: 5.0, width: 1.8 }
    }

    fn step(i: u64, action: [f64; 2], vehicles: Vec<VehicleSnap>) -> ScenarioStep {
        ScenarioStep {
            step: i,
            action,
            r_adv: 0.0,
            r_nat: 0.0,
            r_total: 0.0,
            vehicles,
        }
    }

    fn record(termination: AdvTermination, steps: Vec<ScenarioStep>) -> ScenarioRecord {
        ScenarioRecord {
            seed: 0,
            agent: 0,
            av: 1,
            steps,
            termination,
            collisions: vec![],
        }
    }

    #[test]
    fn quiet_runs_have_zero_rates() {
        let road = RoadNetwork::straight(3, 3.5, 400.0);
        let recs: Vec<ScenarioRecord> = (0..10)
            .map(|_| {
                record(
                    AdvTermination::Horizon,
                    vec![step(1, [0.0, 0.0], vec![snap(0, 10.0, 0.0, 0.0, 8.0)])],
                )
            })
            .collect();
        let m = macro_metrics(&recs, &road).unwrap();
        assert_eq!(m.collision_rate_av, 0.0);
        assert_eq!(m.collision_rate_other, 0.0);
        assert_eq!(m.runs, 10);
    }

    #[test]
    fn two_av_hits_in_four_runs_is_half() {
        let road = RoadNetwork::straight(2, 3.5, 400.0);
        let mk = |t| record(t, vec![step(1, [0.0, 0.0], vec![snap(0, 5.0, 0.0, 0.0, 8.0)])]);
        let recs = vec![
            mk(AdvTermination::AgentAvCollision),
            mk(AdvTermination::Horizon),
            mk(AdvTermination::AgentAvCollision),
            mk(AdvTermination::AgentOtherCollision),
        ];
        let m = macro_metrics(&recs, &road).unwrap();
        assert_eq!(m.collision_rate_av, 0.5);
        assert_eq!(m.collision_rate_other, 0.25);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let road = RoadNetwork::straight(2, 3.5, 400.0);
        assert!(matches!(macro_metrics(&[], &road), Err(AnalysisError::Empty)));
    }

    #[test]
    fn lane_transitions_are_counted_once_each() {
        let road = RoadNetwork::straight(3, 3.5, 400.0);
        // lane 0 is y = 0, lane 1 is y = -3.5; drift across and back
        let ys = [0.0, 0.0, -3.5, -3.5, 0.0];
        let steps: Vec<ScenarioStep> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                step(i as u64 + 1, [0.0, 0.0], vec![snap(0, 10.0 + i as f64, y, 0.0, 8.0)])
            })
            .collect();
        let recs = vec![record(AdvTermination::Horizon, steps)];
        let m = macro_metrics(&recs, &road).unwrap();
        assert_eq!(m.lane_change_count, 2);
    }

    #[test]
    fn constant_action_gives_degenerate_range() {
        let steps: Vec<ScenarioStep> = (0..8)
            .map(|i| step(i + 1, [1.25, -0.1], vec![snap(0, i as f64, 0.0, 0.0, 8.0)]))
            .collect();
        let recs = vec![record(AdvTermination::Horizon, steps)];
        let m = micro_metrics(&recs, 0.1, 2.8);
        let r = m.agent.accel.range.unwrap();
        assert_eq!((r.min, r.max), (1.25, 1.25));
        assert_eq!(r.width(), 0.0);
        let s = m.agent.steering.range.unwrap();
        assert_eq!((s.min, s.max), (-0.1, -0.1));
        assert_eq!(m.agent.accel.histogram.counts.len(), 1);
    }

    #[test]
    fn av_accel_is_recovered_from_speed_deltas() {
        // AV speeds up by 0.2 m/s per 0.1 s step: 2 m/s^2
        let steps: Vec<ScenarioStep> = (0..5)
            .map(|i| {
                step(
                    i + 1,
                    [0.0, 0.0],
                    vec![
                        snap(0, i as f64, 0.0, 0.0, 8.0),
                        snap(1, 20.0 + i as f64, 0.0, 0.0, 8.0 + 0.2 * i as f64),
                    ],
                )
            })
            .collect();
        let recs = vec![record(AdvTermination::Horizon, steps)];
        let m = micro_metrics(&recs, 0.1, 2.8);
        let r = m.av.accel.range.unwrap();
        assert!((r.min - 2.0).abs() < 1e-9 && (r.max - 2.0).abs() < 1e-9);
        assert!(m.background.accel.range.is_none(), "no third vehicle present");
    }

    #[test]
    fn weighted_score_matches_hand_arithmetic() {
        assert!((effectiveness(0.81, 0.46, 0.5, 0.5) - 0.635).abs() < 1e-15);
        assert_eq!(effectiveness(0.7, 0.3, 1.0, 0.0), 0.7);
        assert_eq!(effectiveness(0.0, 0.0, 0.4, 0.6), 0.0);
    }

    #[test]
    fn weighted_score_is_linear_in_both_inputs() {
        let (wn, wa) = (0.3, 0.9);
        let (n1, n2, a1, a2) = (0.2, 0.7, 0.5, 0.1);
        let (p, q) = (1.7, -0.4);
        let lhs = effectiveness(p * n1 + q * n2, p * a1 + q * a2, wn, wa);
        let rhs = p * effectiveness(n1, a1, wn, wa) + q * effectiveness(n2, a2, wn, wa);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn bins_anchor_at_zero_and_split_on_boundaries() {
        let mut h = Histogram::new(0.25).unwrap();
        for v in [0.0, 0.1, 0.24, 0.25, -0.01, -0.25] {
            h.add(v);
        }
        assert_eq!(h.counts.get(&0), Some(&3));
        assert_eq!(h.counts.get(&1), Some(&1));
        assert_eq!(h.counts.get(&-1), Some(&2));
        h.add(f64::NAN);
        assert_eq!(h.total, 6, "non-finite samples are dropped");
        let mass: f64 = h.counts.keys().map(|&b| h.density(b) * 0.25).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_rejects_bad_widths() {
        assert!(Histogram::new(0.0).is_err());
        assert!(Histogram::new(-1.0).is_err());
        assert!(Histogram::new(f64::NAN).is_err());
    }

    #[test]
    fn report_text_lists_all_roles() {
        let steps = vec![step(
            1,
            [0.5, 0.0],
            vec![snap(0, 0.0, 0.0, 0.0, 8.0), snap(1, 20.0, 0.0, 0.0, 9.0)],
        )];
        let road = RoadNetwork::straight(2, 3.5, 100.0);
        let recs = vec![record(AdvTermination::Horizon, steps)];
        let report = metrics_report(&recs, &road, 0.1, 2.8).unwrap();
        let text = format_report(&report);
        for needle in ["agent", "av", "background", "collision rate"] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
    }

    #[test]
    fn histogram_csv_round_trips_counts() {
        let mut h = Histogram::new(0.25).unwrap();
        for v in [0.1, 0.1, 0.6, -0.3] {
            h.add(v);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hist.csv");
        write_histogram_csv(&h, &path).unwrap();
        let mut rdr = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        let total: u64 = rows.iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
        assert_eq!(total, 4);
    }
}
