//! Metrics and plots: IoU, relative-pose drift, absolute position error.

mod metrics;
pub mod plot;

pub use metrics::{
    ape, ape_report, desk_lengths, iou, kitti_drift, kitti_lengths, length_range, match_stamps, ApeReport, DriftResult,
    LengthDrift, MATCH_TOLERANCE_S,
};
