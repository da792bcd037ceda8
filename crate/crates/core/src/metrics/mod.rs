//! Behavioral metrics and RMSE, computed identically for every trajectory source.

mod highway;
mod merge;
mod rmse;
mod source;

pub use highway::{
    anchor_times, count_faster_lane_changes, extract_highway_anchors, faster_lane_outcome,
    highway_lc_curve, merge_participants, HighwayAnchor, HighwayLcResult,
};
pub use merge::{courtesy_lc_table, merge_outcome, pass_first_curve, CourtesyResult, MergeOutcome, PassFirstResult};
pub use rmse::{predicted_at, rmse_by_horizon, RmseResult, DEFAULT_HORIZONS};
pub use source::{ModelSource, Naturalistic, SourceTag, TrajectorySource};
