//! Merge events, lane assignment and lane changes, interacting-vehicle
//! selection, conflicts and pass order.

mod lanes;
mod merge;
mod path;
mod scene;

pub use lanes::{
    assign_lane, detect_lane_changes, detect_track_lane_changes,
    detect_track_lane_changes_geometric, LaneChange,
};
pub use merge::{
    classify_conflict, courtesy_outcome, extract_merge_events, history_anchor, merge_completion,
    recorded_longitudinal, select_interacting_highway_vehicle, LookbackRecord, LookbackStatus,
    MergeEvent,
};
pub use path::{crossing_time, determine_pass_order, Path, PathSample, PassOrder};
pub use scene::SceneIndex;
