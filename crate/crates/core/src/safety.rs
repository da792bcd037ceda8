//! Collision aversion: inflated axis-aligned boxes around each vehicle,
//! checked between an ego trajectory and recorded neighbours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::events::SceneIndex;
use crate::ingest::Frame;
use crate::metrics::{SourceTag, TrajectorySource};
use crate::model::{AnalysisConfig, Dataset, Point, VehicleId, VehicleTrack, STEP_DT};

/// Vehicle footprint grown by `margin` on every side. Length runs along `y`,
/// width along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyBox {
    pub center: Point,
    pub half_length: f64,
    pub half_width: f64,
    pub margin: f64,
}

impl SafetyBox {
    pub fn new(center: Point, length: f64, width: f64, margin: f64) -> Self {
        SafetyBox {
            center,
            half_length: length / 2.0 + margin,
            half_width: width / 2.0 + margin,
            margin,
        }
    }

    pub fn for_track(track: &VehicleTrack, center: Point, margin: f64) -> Self {
        Self::new(center, track.length, track.width, margin)
    }
}

/// Interval overlap on both axes; touching boxes overlap.
pub fn boxes_overlap(a: &SafetyBox, b: &SafetyBox) -> bool {
    (a.center.x - b.center.x).abs() <= a.half_width + b.half_width
        && (a.center.y - b.center.y).abs() <= a.half_length + b.half_length
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyCell {
    pub interactions: u64,
    #[serde(rename = "unsafe")]
    pub unsafe_count: u64,
    /// Unsafe share in percent; 0 when there are no interactions.
    pub pct: f64,
    pub zero_denominator: bool,
}

impl SafetyCell {
    fn from_counts(interactions: u64, unsafe_count: u64) -> Self {
        SafetyCell {
            interactions,
            unsafe_count,
            pct: if interactions == 0 {
                0.0
            } else {
                unsafe_count as f64 / interactions as f64 * 100.0
            },
            zero_denominator: interactions == 0,
        }
    }
}

/// Unsafe interactions split by whether the ego trajectory changes lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyStats {
    pub source: SourceTag,
    pub frame: Frame,
    pub changed: SafetyCell,
    pub not_changed: SafetyCell,
    /// Instances the source has no trajectory for.
    pub missing: u64,
}

/// Per-instance tally: (lane changed, interactions, unsafe).
type Tally = (bool, u64, u64);

#[allow(clippy::too_many_arguments)]
fn tally_instance(
    ego: &VehicleTrack,
    anchor_t: f64,
    source: &dyn TrajectorySource,
    lane_source: &dyn TrajectorySource,
    dataset: &Dataset,
    index: &SceneIndex,
    config: &AnalysisConfig,
    frame: Frame,
) -> Option<Tally> {
    let path = source.path(ego.id, anchor_t)?;
    let lane_path = lane_source.path(ego.id, anchor_t)?;
    let changed = !lane_path
        .lane_changes(&dataset.site, config.dwell_samples(STEP_DT))
        .is_empty();
    let center = ego.position_at(anchor_t)?;
    let neighbors = index.neighbors_within(dataset, anchor_t, center, config.neighbor_radius, ego.id);
    let mut unsafe_count = 0;
    for (nid, _) in &neighbors {
        let n = dataset.track(*nid).expect("indexed vehicle exists");
        let hit = path.samples.iter().skip(1).any(|s| {
            let p = match frame {
                Frame::Local => n.position_at(s.t),
                Frame::Global => n.global_at(s.t),
            };
            p.is_some_and(|p| {
                boxes_overlap(
                    &SafetyBox::for_track(ego, s.p, config.safety_margin),
                    &SafetyBox::for_track(n, p, config.safety_margin),
                )
            })
        });
        unsafe_count += hit as u64;
    }
    Some((changed, neighbors.len() as u64, unsafe_count))
}

/// Counts unsafe (instance, neighbour) pairs.
///
/// The ego follows `source`; neighbours are those within `neighbor_radius`
/// of the ego at the anchor and follow their recorded tracks. A pair is
/// unsafe if the inflated boxes overlap at any step of the horizon.
/// `lane_source` decides the lane-change stratum, so a global-frame run can
/// borrow lane status from a local-frame trajectory.
pub fn count_unsafe(
    instances: &[(VehicleId, f64)],
    source: &dyn TrajectorySource,
    lane_source: &dyn TrajectorySource,
    dataset: &Dataset,
    index: &SceneIndex,
    config: &AnalysisConfig,
    frame: Frame,
) -> SafetyStats {
    let tallies: Vec<Option<Tally>> = instances
        .par_iter()
        .map(|&(id, t)| {
            let ego = dataset.track(id)?;
            tally_instance(ego, t, source, lane_source, dataset, index, config, frame)
        })
        .collect();
    let mut counts = [[0u64; 2]; 2];
    let mut missing = 0;
    for t in tallies {
        match t {
            Some((changed, n, u)) => {
                counts[changed as usize][0] += n;
                counts[changed as usize][1] += u;
            }
            None => missing += 1,
        }
    }
    SafetyStats {
        source: source.tag(),
        frame,
        changed: SafetyCell::from_counts(counts[1][0], counts[1][1]),
        not_changed: SafetyCell::from_counts(counts[0][0], counts[0][1]),
        missing,
    }
}

/// One line of the paired local/global safety table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyRow {
    pub source: SourceTag,
    pub frame: Frame,
    pub lane_change_status: String,
    pub cell: SafetyCell,
}

/// Local and, when available, global statistics side by side.
pub fn coordinate_frame_report(local: &SafetyStats, global: Option<&SafetyStats>) -> Vec<SafetyRow> {
    std::iter::once(local)
        .chain(global)
        .flat_map(|s| {
            [("changed", s.changed), ("not_changed", s.not_changed)].map(|(status, cell)| SafetyRow {
                source: s.source.clone(),
                frame: s.frame,
                lane_change_status: status.to_string(),
                cell,
            })
        })
        .collect()
}
