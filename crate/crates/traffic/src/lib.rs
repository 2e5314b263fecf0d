//! Naturalistic traffic data handling and classical driver models.
//!
//! The crate covers the offline side of the project: parsing recorded
//! trajectory datasets into a canonical form, cleaning and screening them
//! into car-following segments, extracting lane-change events, calibrating
//! IDM and MOBIL against the result, and generating synthetic corpora plus a
//! rule-based background driver built from the calibrated models.

pub mod annotate;
pub mod calibrate;
pub mod error;
pub mod idm;
pub mod lane_change;
pub mod mobil;
pub mod parse;
pub mod pipeline;
pub mod record;
pub mod road_spec;
pub mod screen;
pub mod segment;
pub mod smooth;
pub mod surrogate;
pub mod synth;

pub use annotate::{infer_lane_and_leader, AnnotateSummary};
pub use calibrate::{
    calibrate_idm, calibrate_mobil, corpus_loss, objective_mixed_error, simulate_idm_follower,
    GaConfig, IdmCalibration, MobilCalibration,
};
pub use error::TrafficError;
pub use idm::{
    idm_acceleration, idm_desired_gap, idm_equilibrium_gap, IdmParameters, IdmRanges,
};
pub use lane_change::{extract_lane_change_events, LaneChangeEvent, DEFAULT_HEADING_THRESHOLD};
pub use mobil::{
    accel_toward_lane_leader, is_incentivized, mobil_decide, mobil_incentive, mobil_safety,
    AccelContext, LaneChangeDecision, MobilParameters,
};
pub use parse::{parse_trajectories, Schema, FT_TO_M};
pub use pipeline::{
    far_right_lane_ids, preprocess_corpus, smooth_segment, PreprocessConfig, PreprocessOutput,
    PreprocessSummary, DEFAULT_SMOOTHING_DELTA,
};
pub use record::{
    read_canonical_csv, write_canonical_csv, Episode, Source, TrajectoryRecord, CANONICAL_DT,
};
pub use road_spec::{
    build_road, road_spec_from_json, GeomSegment, LaneSpec, RoadSpec, MAX_ARC_STEP_RAD,
};
pub use screen::{
    screen, screen_corpus, trim_segment, write_screening_report, RejectReason, ScreeningRow,
    ScreeningRules,
};
pub use segment::{
    extract_car_following, CarFollowingSample, CarFollowingSegment, DEFAULT_VEHICLE_LENGTH,
};
pub use smooth::{central_difference, correct_kinematics, sema_filter};
pub use surrogate::{SurrogateConfig, SurrogateDriver};
pub use synth::{generate_synthetic_corpus, SynthConfig};
