use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::source::TrajectorySource;
use crate::events::{detect_track_lane_changes, MergeEvent, SceneIndex};
use crate::kinematics::{snapshot, time_to_collision};
use crate::model::{
    AnalysisConfig, Dataset, LaneId, VehicleId, VehicleTrack, HISTORY_SAMPLES, HORIZON_STEPS, STEP_DT,
    TIME_EPS,
};
use crate::serde_ext;
use crate::stats::{bin_probability, BinnedCurve};

/// A highway-driving decision point: an ego vehicle following a lead vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighwayAnchor {
    pub vehicle_id: VehicleId,
    pub anchor_t: f64,
    pub lane: LaneId,
    pub lead_id: VehicleId,
    /// Time to collision with the lead vehicle at the anchor (s).
    #[serde(with = "serde_ext::f64_ext")]
    pub ttc: f64,
}

/// Vehicles taking part in any merge event, as merger or as selected highway vehicle.
pub fn merge_participants(events: &[MergeEvent]) -> BTreeSet<VehicleId> {
    let mut out = BTreeSet::new();
    for ev in events {
        out.insert(ev.merger_id);
        out.extend(ev.lookbacks.iter().filter_map(|r| r.highway_id));
    }
    out
}

/// Anchor times for one vehicle: the latest sample at or before
/// `first + 2.8 s + k * cadence`, de-duplicated.
pub fn anchor_times(track: &VehicleTrack, cadence: f64) -> Vec<f64> {
    let (Some(first), Some(last)) = (track.first_t(), track.last_t()) else {
        return Vec::new();
    };
    let start = first + (HISTORY_SAMPLES - 1) as f64 * STEP_DT;
    let mut out: Vec<f64> = Vec::new();
    let mut k = 0;
    loop {
        let target = start + k as f64 * cadence;
        if target > last + TIME_EPS {
            break;
        }
        if let Some(i) = track.index_at_or_before(target) {
            let t = track.states[i].t;
            if out.last().is_none_or(|p| (t - p).abs() > TIME_EPS) {
                out.push(t);
            }
        }
        k += 1;
    }
    out
}

fn lead_vehicle(
    dataset: &Dataset,
    index: &SceneIndex,
    ego: &VehicleTrack,
    t: f64,
    lane: LaneId,
    radius: f64,
) -> Option<VehicleId> {
    let ego_y = ego.position_at(t)?.y;
    index
        .active_at(dataset, t)
        .filter(|tr| tr.id != ego.id && tr.lane_at(t) == Some(lane))
        .filter_map(|tr| Some((tr.id, tr.position_at(t)?.y - ego_y)))
        .filter(|(_, gap)| *gap > 0.0 && *gap <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(id, _)| id)
}

/// Highway anchors for every mainline vehicle not involved in a merge.
pub fn extract_highway_anchors(
    dataset: &Dataset,
    index: &SceneIndex,
    excluded: &BTreeSet<VehicleId>,
    config: &AnalysisConfig,
) -> Vec<HighwayAnchor> {
    let site = &dataset.site;
    let tracks: Vec<&VehicleTrack> = dataset
        .tracks
        .values()
        .filter(|t| !excluded.contains(&t.id))
        .collect();
    let per_vehicle: Vec<Vec<HighwayAnchor>> = tracks
        .par_iter()
        .map(|ego| {
            anchor_times(ego, config.highway_anchor_cadence)
                .into_iter()
                .filter_map(|t| {
                    let lane = ego.lane_at(t)?;
                    site.mainline_rank(lane)?;
                    let lead_id = lead_vehicle(dataset, index, ego, t, lane, config.neighbor_radius)?;
                    let lead = dataset.track(lead_id)?;
                    let e = snapshot(ego, t, 0.0).ok()?;
                    let f = snapshot(lead, t, 0.0).ok()?;
                    let ttc = time_to_collision(&e, &f, config.ttc_speed_eps).ok()?;
                    Some(HighwayAnchor {
                        vehicle_id: ego.id,
                        anchor_t: t,
                        lane,
                        lead_id,
                        ttc,
                    })
                })
                .collect()
        })
        .collect();
    per_vehicle.into_iter().flatten().collect()
}

/// Whether `source` moves the ego into a faster lane within
/// `(anchor, anchor + min(tau, horizon)]`. `None` when the source has no trajectory.
pub fn faster_lane_outcome(
    anchor: &HighwayAnchor,
    tau: f64,
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    config: &AnalysisConfig,
) -> Option<bool> {
    let path = source.path(anchor.vehicle_id, anchor.anchor_t)?;
    let end = anchor.anchor_t + tau.min(HORIZON_STEPS as f64 * STEP_DT) + TIME_EPS;
    let site = &dataset.site;
    Some(
        path.lane_changes(site, config.dwell_samples(STEP_DT))
            .iter()
            .any(|c| c.t_lc > anchor.anchor_t + TIME_EPS && c.t_lc <= end && site.is_faster_lane(c.from_lane, c.to_lane)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighwayLcResult {
    pub tau: f64,
    /// P(change into a faster lane) per TTC bin.
    pub curve: BinnedCurve,
    pub missing: u64,
}

pub fn highway_lc_curve(
    anchors: &[HighwayAnchor],
    tau: f64,
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    config: &AnalysisConfig,
) -> HighwayLcResult {
    let mut samples = Vec::with_capacity(anchors.len());
    let mut missing = 0;
    for a in anchors {
        match faster_lane_outcome(a, tau, source, dataset, config) {
            Some(o) => samples.push((a.ttc, o)),
            None => missing += 1,
        }
    }
    HighwayLcResult {
        tau,
        curve: bin_probability(&samples, &config.ttc_bin_edges, config.min_count),
        missing,
    }
}

/// Recorded changes into a faster lane by vehicles outside `excluded`.
pub fn count_faster_lane_changes(dataset: &Dataset, excluded: &BTreeSet<VehicleId>, config: &AnalysisConfig) -> usize {
    let dwell = config.dwell_samples(dataset.sample_dt());
    dataset
        .tracks
        .values()
        .filter(|t| !excluded.contains(&t.id))
        .map(|t| {
            detect_track_lane_changes(t, &dataset.site, dwell)
                .iter()
                .filter(|c| dataset.site.is_faster_lane(c.from_lane, c.to_lane))
                .count()
        })
        .sum()
}
