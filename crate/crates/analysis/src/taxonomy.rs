use natadv_learn::{invert_bicycle, ScenarioRecord};
use natadv_sim::{relative_features, CollisionEvent, ContactSide, VehicleId};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{AnalysisError, Result};

/// Closing speed above which a rear impact counts as the high-speed class.
pub const HIGH_SPEED_CLOSING: f64 = 15.0;

/// Number of distinct collision classes.
pub const N_COLLISION_LABELS: usize = 10;

/// Per-collision descriptor: `[lateral distance, longitudinal distance,
/// lateral speed, longitudinal speed, relative steering]`, all expressed in
/// the adversarial agent's body frame at the contact step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionFeature(pub [f64; 5]);

impl CollisionFeature {
    pub fn new(values: [f64; 5]) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(CollisionFeature(values))
        } else {
            Err(AnalysisError::NonFinite)
        }
    }
}

/// One of ten geometric collision classes. Classes 7, 8, and 9 are the
/// counter-intuitive ones: crashes a reasonable driver would not produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionLabel {
    pub id: u8,
    pub counter_intuitive: bool,
}

const LABEL_NAMES: [&str; N_COLLISION_LABELS] = [
    "rear_end",
    "side_swipe_left",
    "side_swipe_right",
    "cut_in_left",
    "cut_in_right",
    "front_impact",
    "side_contact",
    "high_speed_rear_impact",
    "t_shaped",
    "rear_to_rear",
];

impl CollisionLabel {
    fn of(id: u8) -> Self {
        CollisionLabel { id, counter_intuitive: id >= 7 }
    }

    pub fn name(&self) -> &'static str {
        LABEL_NAMES[self.id as usize]
    }
}

/// Heading alignment bucket of the two bodies at contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeadingBucket {
    Aligned,
    Perpendicular,
    Opposed,
}

fn bucket(relative_heading: f64) -> HeadingBucket {
    let t = relative_heading.abs();
    if t < FRAC_PI_4 {
        HeadingBucket::Aligned
    } else if t < 3.0 * FRAC_PI_4 {
        HeadingBucket::Perpendicular
    } else {
        HeadingBucket::Opposed
    }
}

/// Approach speed along the center-to-center line, positive when the bodies
/// are converging. Invariant under frame choice and under swapping the two
/// vehicles, so both perspectives of one contact agree on it.
pub fn closing_speed(relative_position: [f64; 2], relative_velocity: [f64; 2]) -> f64 {
    let [px, py] = relative_position;
    let [vx, vy] = relative_velocity;
    let dist = px.hypot(py);
    if dist == 0.0 {
        return vx.hypot(vy);
    }
    -(px * vx + py * vy) / dist
}

/// Classify a contact into one of the ten collision classes.
///
/// The decision is purely geometric, on the contact sides, the heading
/// alignment, and the closing speed; the first matching rule wins:
///
/// 1. both rears touching is `rear_to_rear` (9)
/// 2. a front-to-rear hit closing faster than [`HIGH_SPEED_CLOSING`] is
///    `high_speed_rear_impact` (7)
/// 3. a nose into a flank at perpendicular headings is `t_shaped` (8)
/// 4. front-to-rear at aligned headings is the ordinary `rear_end` (0)
/// 5. front-to-front is `front_impact` (5)
/// 6. flank-on-flank at aligned headings is a side swipe, named for the
///    side the reference vehicle was struck on (1 left, 2 right)
/// 7. any other nose-into-flank is a cut-in, named for the flank of the
///    struck vehicle (3 left, 4 right)
/// 8. everything left over (rear-corner grazes, skewed flank pairs) is
///    `side_contact` (6)
///
/// Swapping the two vehicles in an event flips side swipes into each other
/// and fixes every other label, so both perspectives of one crash agree up to
/// that mirror.
pub fn label_collision_type(ev: &CollisionEvent) -> CollisionLabel {
    use ContactSide::{Front, Rear};
    let (sa, sb) = ev.contact_sides;
    let b = bucket(ev.relative_heading);
    let closing = closing_speed(ev.relative_position, ev.relative_velocity);

    let front_rear = (sa == Front && sb == Rear) || (sa == Rear && sb == Front);
    let nose_flank = (sa == Front && sb.is_lateral()) || (sa.is_lateral() && sb == Front);

    let id = if sa == Rear && sb == Rear {
        9
    } else if front_rear && closing > HIGH_SPEED_CLOSING {
        7
    } else if b == HeadingBucket::Perpendicular && nose_flank {
        8
    } else if front_rear && b == HeadingBucket::Aligned {
        0
    } else if sa == Front && sb == Front {
        5
    } else if b == HeadingBucket::Aligned && sa.is_lateral() && sb.is_lateral() && sa != sb {
        if sa == ContactSide::Left {
            1
        } else {
            2
        }
    } else if nose_flank {
        let struck = if sa == Front { sb } else { sa };
        if struck == ContactSide::Left {
            3
        } else {
            4
        }
    } else {
        6
    };
    CollisionLabel::of(id)
}

/// An agent-involved collision with its feature vector and class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCollision {
    pub step: u64,
    /// The vehicle the agent collided with.
    pub other: u64,
    pub feature: CollisionFeature,
    pub label: CollisionLabel,
}

/// Extract one feature vector and label per agent-involved collision in a
/// run, everything re-expressed in the agent's body frame regardless of which
/// slot the agent occupied in the raw event.
///
/// The other vehicle's steering is not part of the record, so it is recovered
/// from its pose change over the step leading into the contact; `dt` and
/// `wheelbase` must match the values the run was simulated with.
pub fn collision_features(record: &ScenarioRecord, dt: f64, wheelbase: f64) -> Vec<LabeledCollision> {
    let agent = VehicleId(record.agent);
    let mut out = Vec::new();
    for ev in &record.collisions {
        if !ev.involves(agent) {
            continue;
        }
        let other = match ev.other(agent) {
            Some(id) => id,
            None => continue,
        };
        let Some(idx) = record.steps.iter().position(|s| s.step == ev.step_index) else {
            continue;
        };
        let step = &record.steps[idx];
        let (Some(agent_snap), Some(other_snap)) = (
            step.vehicles.iter().find(|v| v.id == agent.0),
            step.vehicles.iter().find(|v| v.id == other.0),
        ) else {
            continue;
        };

        let rel = relative_features(&agent_snap.to_state(), &other_snap.to_state());
        let agent_steer = step.action[1];
        let other_steer = record
            .steps
            .get(idx.wrapping_sub(1))
            .and_then(|prev| prev.vehicles.iter().find(|v| v.id == other.0))
            .map(|prev| invert_bicycle(prev, other_snap, dt, wheelbase)[1])
            .unwrap_or(0.0);

        let sides = if ev.a == agent {
            ev.contact_sides
        } else {
            (ev.contact_sides.1, ev.contact_sides.0)
        };
        let canonical = CollisionEvent {
            step_index: ev.step_index,
            a: agent,
            b: other,
            contact_sides: sides,
            relative_heading: rel[4],
            relative_position: [rel[0], rel[1]],
            relative_velocity: [rel[2], rel[3]],
        };
        let Ok(feature) =
            CollisionFeature::new([rel[0], rel[1], rel[2], rel[3], agent_steer - other_steer])
        else {
            continue;
        };
        out.push(LabeledCollision {
            step: ev.step_index,
            other: other.0,
            feature,
            label: label_collision_type(&canonical),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use natadv_sim::{detect_collision, VehicleState};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn car(id: u64, x: f64, y: f64, heading: f64, speed: f64) -> VehicleState {
        VehicleState::new(id, x, y, heading, speed)
    }

    fn label_of(a: &VehicleState, b: &VehicleState) -> CollisionLabel {
        let ev = detect_collision(0, a, b).expect("fixture bodies must overlap");
        label_collision_type(&ev)
    }

    // One constructed geometry per class, checked against the real contact
    // detector rather than hand-built events.
    fn fixtures() -> Vec<(VehicleState, VehicleState, u8)> {
        vec![
            (car(1, 0.0, 0.0, 0.0, 15.0), car(2, 4.5, 0.0, 0.0, 10.0), 0),
            (car(1, 0.0, 0.0, 0.0, 10.0), car(2, 0.0, 1.5, 0.0, 10.0), 1),
            (car(1, 0.0, 0.0, 0.0, 10.0), car(2, 0.0, -1.5, 0.0, 10.0), 2),
            (car(1, 0.0, 0.0, -0.45, 12.0), car(2, 2.8, -2.0, 0.0, 10.0), 3),
            (car(1, 0.0, 0.0, 0.45, 12.0), car(2, 2.8, 2.0, 0.0, 10.0), 4),
            (car(1, 0.0, 0.0, 0.0, 10.0), car(2, 4.5, 0.0, PI, 10.0), 5),
            (car(1, 0.0, 0.0, 0.0, 5.0), car(2, 0.0, 2.2, FRAC_PI_2, 5.0), 6),
            (car(1, 0.0, 0.0, 0.0, 31.0), car(2, 4.5, 0.0, 0.0, 10.0), 7),
            (car(1, 0.0, 0.0, 0.0, 10.0), car(2, 3.0, 0.0, FRAC_PI_2, 8.0), 8),
            (car(1, 0.0, 0.0, 0.0, 5.0), car(2, -4.5, 0.0, PI, 5.0), 9),
        ]
    }

    #[test]
    fn each_canonical_geometry_gets_its_own_class() {
        for (a, b, want) in fixtures() {
            let got = label_of(&a, &b);
            assert_eq!(got.id, want, "geometry for class {want} labeled {}", got.name());
            assert_eq!(got.counter_intuitive, want >= 7);
            assert_eq!(got.name(), LABEL_NAMES[want as usize]);
        }
    }

    #[test]
    fn rear_to_rear_beats_every_other_rule() {
        // opposed headings, both rears: class 9 even at huge closing speed
        let a = car(1, 0.0, 0.0, 0.0, 30.0);
        let b = car(2, -4.5, 0.0, PI, 30.0);
        assert_eq!(label_of(&a, &b).id, 9);
    }

    #[test]
    fn closing_speed_splits_rear_impacts() {
        let slow = (car(1, 0.0, 0.0, 0.0, 14.9), car(2, 4.5, 0.0, 0.0, 0.0));
        let fast = (car(1, 0.0, 0.0, 0.0, 15.1), car(2, 4.5, 0.0, 0.0, 0.0));
        assert_eq!(label_of(&slow.0, &slow.1).id, 0);
        assert_eq!(label_of(&fast.0, &fast.1).id, 7);
    }

    #[test]
    fn closing_speed_is_swap_invariant() {
        let p = [1.3, -2.1];
        let v = [-0.4, 0.9];
        // the swapped perspective negates both vectors and rotates the frame
        let c1 = closing_speed(p, v);
        let c2 = closing_speed([-p[0], -p[1]], [-v[0], -v[1]]);
        assert!((c1 - c2).abs() < 1e-15);
        assert!((closing_speed([0.0, 0.0], [3.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn fully_overlapped_bodies_still_get_exactly_one_label() {
        let a = car(1, 0.0, 0.0, 0.3, 12.0);
        let b = car(2, 0.0, 0.0, 0.3, 3.0);
        let l = label_of(&a, &b);
        assert!(l.id < 10);
    }

    // Swapping perspectives mirrors the side swipes and fixes all others.
    const SWAP: [u8; 10] = [0, 2, 1, 3, 4, 5, 6, 7, 8, 9];

    proptest! {
        #[test]
        fn both_perspectives_of_one_contact_agree(
            dx in -6.0..6.0f64,
            dy in -2.5..2.5f64,
            ha in -PI..PI,
            hb in -PI..PI,
            va in 0.0..35.0f64,
            vb in 0.0..35.0f64,
        ) {
            let a = car(1, 0.0, 0.0, ha, va);
            let b = car(2, dx, dy, hb, vb);
            if let (Some(ab), Some(ba)) = (detect_collision(0, &a, &b), detect_collision(0, &b, &a)) {
                let la = label_collision_type(&ab);
                let lb = label_collision_type(&ba);
                prop_assert_eq!(lb.id, SWAP[la.id as usize]);
                prop_assert_eq!(la.counter_intuitive, lb.counter_intuitive);
            }
        }

        #[test]
        fn every_event_is_labeled_and_only_the_last_three_are_counter_intuitive(
            dx in -6.0..6.0f64,
            dy in -2.5..2.5f64,
            ha in -PI..PI,
            hb in -PI..PI,
            va in 0.0..35.0f64,
            vb in 0.0..35.0f64,
        ) {
            let a = car(1, 0.0, 0.0, ha, va);
            let b = car(2, dx, dy, hb, vb);
            if let Some(ev) = detect_collision(0, &a, &b) {
                let l1 = label_collision_type(&ev);
                let l2 = label_collision_type(&ev);
                prop_assert_eq!(l1, l2);
                prop_assert!(l1.id < 10);
                prop_assert_eq!(l1.counter_intuitive, l1.id >= 7);
            }
        }
    }

    #[test]
    fn non_finite_feature_is_rejected() {
        assert!(CollisionFeature::new([0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(CollisionFeature::new([0.0; 5]).is_ok());
    }
}
