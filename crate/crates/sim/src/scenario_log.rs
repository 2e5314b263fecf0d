//! Flat-file exports of simulated scenarios: a per-step per-vehicle CSV and
//! a JSON-lines collision log. Both round-trip exactly.

use std::io;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionEvent;
use crate::road::LaneId;
use crate::vehicle::{ControlAction, VehicleState};
use crate::world::WorldState;

/// One vehicle at one step, with the control that produced the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLogRow {
    pub step: u64,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub steering: f64,
    pub lane: Option<u32>,
}

impl StepLogRow {
    pub fn from_state(step: u64, state: &VehicleState, action: ControlAction) -> Self {
        Self {
            step,
            id: state.id.0,
            x: state.x,
            y: state.y,
            heading: state.heading,
            speed: state.speed,
            accel: action.accel,
            steering: action.steering,
            lane: state.lane.map(|l| l.0),
        }
    }

    pub fn lane_id(&self) -> Option<LaneId> {
        self.lane.map(LaneId)
    }
}

/// All vehicles of one world snapshot as log rows, in id order.
pub fn world_rows(world: &WorldState, actions: impl Fn(crate::VehicleId) -> ControlAction) -> Vec<StepLogRow> {
    world
        .vehicles
        .iter()
        .map(|v| StepLogRow::from_state(world.step_index, v, actions(v.id)))
        .collect()
}

pub fn write_step_log<W: io::Write>(w: W, rows: &[StepLogRow]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_step_log<R: io::Read>(r: R) -> Result<Vec<StepLogRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_collision_log<W: io::Write>(mut w: W, events: &[CollisionEvent]) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_collision_log<R: io::BufRead>(r: R) -> io::Result<Vec<CollisionEvent>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
