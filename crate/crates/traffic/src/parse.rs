//! Dataset readers: NGSIM and INTERACTION CSV exports, plus the canonical
//! schema, all normalized to [`Episode`]s in SI units.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use crate::error::TrafficError;
use crate::record::{read_canonical_csv, Episode, Source, TrajectoryRecord, CANONICAL_DT};

/// US survey feet per NGSIM field, to meters.
pub const FT_TO_M: f64 = 0.3048;

/// Input schema selector for [`parse_trajectories`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Ngsim,
    Interaction,
    Canonical,
}

impl std::str::FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ngsim" => Ok(Self::Ngsim),
            "interaction" => Ok(Self::Interaction),
            "canonical" => Ok(Self::Canonical),
            other => Err(format!(
                "unknown schema `{other}` (expected ngsim, interaction, or canonical)"
            )),
        }
    }
}

/// Parses a CSV stream in the given schema into per-vehicle episodes, sorted
/// by vehicle id. All three supported sources are sampled at 10 Hz.
pub fn parse_trajectories<R: Read>(reader: R, schema: Schema) -> Result<Vec<Episode>, TrafficError> {
    match schema {
        Schema::Canonical => read_canonical_csv(reader),
        Schema::Ngsim => parse_ngsim(reader),
        Schema::Interaction => parse_interaction(reader),
    }
}

/// Case-insensitive header lookup; `aliases` lists accepted spellings.
struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn from_headers(headers: &csv::StringRecord) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        Self { index }
    }

    fn find(&self, aliases: &[&str]) -> Result<usize, TrafficError> {
        aliases
            .iter()
            .find_map(|a| self.index.get(*a).copied())
            .ok_or_else(|| TrafficError::MissingColumn {
                column: aliases[0].to_string(),
            })
    }
}

fn field<'a>(
    row: &'a csv::StringRecord,
    idx: usize,
    row_no: usize,
    column: &str,
) -> Result<&'a str, TrafficError> {
    row.get(idx).map(str::trim).ok_or_else(|| TrafficError::BadField {
        row: row_no,
        column: column.to_string(),
        message: "missing field".into(),
    })
}

fn parse_f64(s: &str, row_no: usize, column: &str) -> Result<f64, TrafficError> {
    s.parse::<f64>().map_err(|e| TrafficError::BadField {
        row: row_no,
        column: column.to_string(),
        message: e.to_string(),
    })
}

fn parse_u64(s: &str, row_no: usize, column: &str) -> Result<u64, TrafficError> {
    // Some exports write integer ids with a decimal point.
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f = parse_f64(s, row_no, column)?;
    if f.fract() == 0.0 && f >= 0.0 {
        Ok(f as u64)
    } else {
        Err(TrafficError::BadField {
            row: row_no,
            column: column.to_string(),
            message: format!("expected non-negative integer, got {s}"),
        })
    }
}

fn group_episodes(
    rows: Vec<TrajectoryRecord>,
    source: Source,
) -> Result<Vec<Episode>, TrafficError> {
    let mut by_vehicle: BTreeMap<u64, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in rows {
        by_vehicle.entry(r.vehicle_id).or_default().push(r);
    }
    by_vehicle
        .into_iter()
        .map(|(id, mut recs)| {
            recs.sort_by_key(|r| r.frame);
            if recs.windows(2).any(|p| p[1].frame == p[0].frame) {
                return Err(TrafficError::NonMonotonicFrames { vehicle: id });
            }
            Episode::new(id, source, CANONICAL_DT, recs)
        })
        .collect()
}

/// NGSIM export: imperial units, one row per vehicle-frame. Positions,
/// speeds, accelerations, headways, and body sizes convert at 0.3048 m/ft.
/// `Preceding == 0` means no leader.
fn parse_ngsim<R: Read>(reader: R) -> Result<Vec<Episode>, TrafficError> {
    let mut r = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(r.headers()?);
    let c_id = cols.find(&["vehicle_id"])?;
    let c_frame = cols.find(&["frame_id"])?;
    let c_x = cols.find(&["local_x"])?;
    let c_y = cols.find(&["local_y"])?;
    let c_vel = cols.find(&["v_vel"])?;
    let c_acc = cols.find(&["v_acc"])?;
    let c_lane = cols.find(&["lane_id"])?;
    let c_prec = cols.find(&["preceding", "preceeding"])?;
    let c_headway = cols.find(&["space_headway", "space_hdwy"])?;
    let c_class = cols.find(&["v_class"])?;
    let c_len = cols.find(&["v_length"])?;
    let c_wid = cols.find(&["v_width"])?;

    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let row_no = i + 2;
        let preceding = match parse_u64(field(&row, c_prec, row_no, "preceding")?, row_no, "preceding")? {
            0 => None,
            v => Some(v),
        };
        rows.push(TrajectoryRecord {
            vehicle_id: parse_u64(field(&row, c_id, row_no, "vehicle_id")?, row_no, "vehicle_id")?,
            frame: parse_u64(field(&row, c_frame, row_no, "frame_id")?, row_no, "frame_id")?,
            x: parse_f64(field(&row, c_x, row_no, "local_x")?, row_no, "local_x")? * FT_TO_M,
            y: parse_f64(field(&row, c_y, row_no, "local_y")?, row_no, "local_y")? * FT_TO_M,
            speed: parse_f64(field(&row, c_vel, row_no, "v_vel")?, row_no, "v_vel")? * FT_TO_M,
            accel: Some(parse_f64(field(&row, c_acc, row_no, "v_acc")?, row_no, "v_acc")? * FT_TO_M),
            lane: Some(
                parse_u64(field(&row, c_lane, row_no, "lane_id")?, row_no, "lane_id")? as u32,
            ),
            preceding,
            space_headway: Some(
                parse_f64(field(&row, c_headway, row_no, "space_headway")?, row_no, "space_headway")?
                    * FT_TO_M,
            ),
            vehicle_class: Some(
                parse_u64(field(&row, c_class, row_no, "v_class")?, row_no, "v_class")? as u8,
            ),
            length: Some(
                parse_f64(field(&row, c_len, row_no, "v_length")?, row_no, "v_length")? * FT_TO_M,
            ),
            width: Some(
                parse_f64(field(&row, c_wid, row_no, "v_width")?, row_no, "v_width")? * FT_TO_M,
            ),
        });
    }
    group_episodes(rows, Source::Ngsim)
}

/// INTERACTION export: SI units already; speed is `hypot(vx, vy)`. The
/// format carries no acceleration, lane, or headway columns, so those stay
/// `None` until annotation. Agent type maps to the class code used by
/// screening (`car` = 2, `truck` = 3).
fn parse_interaction<R: Read>(reader: R) -> Result<Vec<Episode>, TrafficError> {
    let mut r = csv::Reader::from_reader(reader);
    let cols = Columns::from_headers(r.headers()?);
    let c_id = cols.find(&["track_id"])?;
    let c_frame = cols.find(&["frame_id"])?;
    let c_type = cols.find(&["agent_type"])?;
    let c_x = cols.find(&["x"])?;
    let c_y = cols.find(&["y"])?;
    let c_vx = cols.find(&["vx"])?;
    let c_vy = cols.find(&["vy"])?;
    let c_len = cols.find(&["length"])?;
    let c_wid = cols.find(&["width"])?;

    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let row_no = i + 2;
        let vx = parse_f64(field(&row, c_vx, row_no, "vx")?, row_no, "vx")?;
        let vy = parse_f64(field(&row, c_vy, row_no, "vy")?, row_no, "vy")?;
        let class = match field(&row, c_type, row_no, "agent_type")?.to_ascii_lowercase().as_str()
        {
            "car" => Some(2),
            "truck" | "truck_bus" => Some(3),
            _ => None,
        };
        rows.push(TrajectoryRecord {
            vehicle_id: parse_u64(field(&row, c_id, row_no, "track_id")?, row_no, "track_id")?,
            frame: parse_u64(field(&row, c_frame, row_no, "frame_id")?, row_no, "frame_id")?,
            x: parse_f64(field(&row, c_x, row_no, "x")?, row_no, "x")?,
            y: parse_f64(field(&row, c_y, row_no, "y")?, row_no, "y")?,
            speed: vx.hypot(vy),
            accel: None,
            lane: None,
            preceding: None,
            space_headway: None,
            vehicle_class: class,
            length: Some(parse_f64(field(&row, c_len, row_no, "length")?, row_no, "length")?),
            width: Some(parse_f64(field(&row, c_wid, row_no, "width")?, row_no, "width")?),
        });
    }
    group_episodes(rows, Source::Interaction)
}
