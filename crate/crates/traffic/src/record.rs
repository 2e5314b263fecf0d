//! Canonical trajectory records and per-vehicle episodes.
//!
//! Every ingest path normalizes to this one schema (SI units, 10 Hz frames).
//! Fields a dataset does not provide stay `None`; nothing is silently
//! defaulted at parse time.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::TrafficError;

/// Where an episode's rows came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Ngsim,
    Interaction,
    Canonical,
}

/// One observation of one vehicle at one frame. Positions in meters,
/// speeds in m/s, accelerations in m/s^2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub vehicle_id: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: Option<f64>,
    pub lane: Option<u32>,
    pub preceding: Option<u64>,
    /// Center-to-center distance to the preceding vehicle, along the lane.
    pub space_headway: Option<f64>,
    pub vehicle_class: Option<u8>,
    pub length: Option<f64>,
    pub width: Option<f64>,
}

/// A single vehicle's contiguous track. Frames are strictly increasing;
/// consecutive frames are `dt` seconds apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub vehicle_id: u64,
    pub source: Source,
    pub dt: f64,
    pub records: Vec<TrajectoryRecord>,
}

impl Episode {
    pub fn new(
        vehicle_id: u64,
        source: Source,
        dt: f64,
        records: Vec<TrajectoryRecord>,
    ) -> Result<Self, TrafficError> {
        if records.is_empty() {
            return Err(TrafficError::EmptyEpisode { vehicle: vehicle_id });
        }
        if dt <= 0.0 {
            return Err(TrafficError::NonPositive {
                what: "dt",
                value: dt,
            });
        }
        for pair in records.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(TrafficError::NonMonotonicFrames { vehicle: vehicle_id });
            }
        }
        Ok(Self {
            vehicle_id,
            source,
            dt,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Duration covered by the track in seconds, `(n-1) * dt` for gap-free
    /// frame numbering.
    pub fn duration(&self) -> f64 {
        let first = self.records.first().map(|r| r.frame).unwrap_or(0);
        let last = self.records.last().map(|r| r.frame).unwrap_or(0);
        (last - first) as f64 * self.dt
    }

    /// Index of the record at `frame`, if the track covers it.
    pub fn index_of_frame(&self, frame: u64) -> Option<usize> {
        self.records.binary_search_by_key(&frame, |r| r.frame).ok()
    }

    /// Acceleration series with gaps filled from the speed series: recorded
    /// values win; missing values use central differences of speed
    /// (one-sided at the ends). Tracks shorter than 2 samples get zeros.
    pub fn accel_series(&self) -> Vec<f64> {
        let n = self.records.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if let Some(a) = self.records[i].accel {
                out.push(a);
                continue;
            }
            if n < 2 {
                out.push(0.0);
                continue;
            }
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let df = (self.records[hi].frame - self.records[lo].frame) as f64;
            let dv = self.records[hi].speed - self.records[lo].speed;
            out.push(dv / (df * self.dt));
        }
        out
    }
}

/// Canonical CSV row. Field names are the on-disk column headers.
#[derive(Debug, Serialize, Deserialize)]
struct CanonicalRow {
    vehicle_id: u64,
    frame: u64,
    x_m: f64,
    y_m: f64,
    speed_mps: f64,
    accel_mps2: Option<f64>,
    lane_id: Option<u32>,
    preceding_id: Option<u64>,
    space_headway_m: Option<f64>,
    vehicle_class: Option<u8>,
    length_m: Option<f64>,
    width_m: Option<f64>,
}

impl From<&TrajectoryRecord> for CanonicalRow {
    fn from(r: &TrajectoryRecord) -> Self {
        Self {
            vehicle_id: r.vehicle_id,
            frame: r.frame,
            x_m: r.x,
            y_m: r.y,
            speed_mps: r.speed,
            accel_mps2: r.accel,
            lane_id: r.lane,
            preceding_id: r.preceding,
            space_headway_m: r.space_headway,
            vehicle_class: r.vehicle_class,
            length_m: r.length,
            width_m: r.width,
        }
    }
}

impl From<CanonicalRow> for TrajectoryRecord {
    fn from(r: CanonicalRow) -> Self {
        Self {
            vehicle_id: r.vehicle_id,
            frame: r.frame,
            x: r.x_m,
            y: r.y_m,
            speed: r.speed_mps,
            accel: r.accel_mps2,
            lane: r.lane_id,
            preceding: r.preceding_id,
            space_headway: r.space_headway_m,
            vehicle_class: r.vehicle_class,
            length: r.length_m,
            width: r.width_m,
        }
    }
}

/// Frame rate shared by the supported datasets and everything we emit.
pub const CANONICAL_DT: f64 = 0.1;

/// Writes episodes as canonical CSV, rows ordered by (vehicle, frame).
pub fn write_canonical_csv<W: Write>(writer: W, episodes: &[Episode]) -> Result<(), TrafficError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut order: Vec<&Episode> = episodes.iter().collect();
    order.sort_by_key(|e| e.vehicle_id);
    for ep in order {
        for rec in &ep.records {
            w.serialize(CanonicalRow::from(rec))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads canonical CSV and groups rows into per-vehicle episodes, sorted by
/// vehicle id. Frames must be strictly increasing within a vehicle.
pub fn read_canonical_csv<R: Read>(reader: R) -> Result<Vec<Episode>, TrafficError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut by_vehicle: BTreeMap<u64, Vec<TrajectoryRecord>> = BTreeMap::new();
    for (i, row) in r.deserialize::<CanonicalRow>().enumerate() {
        let row = row.map_err(|e| TrafficError::BadField {
            row: i + 2,
            column: "<row>".into(),
            message: e.to_string(),
        })?;
        by_vehicle.entry(row.vehicle_id).or_default().push(row.into());
    }
    by_vehicle
        .into_iter()
        .map(|(id, mut recs)| {
            recs.sort_by_key(|r| r.frame);
            if recs.windows(2).any(|p| p[1].frame == p[0].frame) {
                return Err(TrafficError::NonMonotonicFrames { vehicle: id });
            }
            Episode::new(id, Source::Canonical, CANONICAL_DT, recs)
        })
        .collect()
}
