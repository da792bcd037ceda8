use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lanes::detect_track_lane_changes;
use super::path::{determine_pass_order, Path, PassOrder};
use super::scene::SceneIndex;
use crate::kinematics::{lead_time, snapshot, LeadTimeExclusion};
use crate::model::{
    AnalysisConfig, Dataset, LaneRole, LateralDirection, VehicleId, VehicleTrack, HISTORY_SAMPLES,
    STEP_DT, TIME_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookbackStatus {
    Ok,
    /// The merger or highway vehicle lacks the 3 s of history a prediction needs.
    InsufficientHistory,
    NoHighwayVehicle,
    StoppedVehicle,
    PastMergePoint,
}

/// Interaction state at one look-back offset before the merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookbackRecord {
    pub tau: f64,
    /// `t_m - tau`.
    pub t_l: f64,
    pub status: LookbackStatus,
    /// Latest merger sample at or before `t_l`.
    pub merger_anchor_t: Option<f64>,
    pub highway_id: Option<VehicleId>,
    pub highway_anchor_t: Option<f64>,
    /// Lead time of the merger at `t_l`, from recorded history.
    pub lead_time: Option<f64>,
    pub conflict: Option<bool>,
    /// Recorded outcomes.
    pub pass_order: Option<PassOrder>,
    pub highway_lane_change: Option<bool>,
    pub highway_shoulder_exit: Option<bool>,
}

impl LookbackRecord {
    pub fn merger_passed_first(&self) -> Option<bool> {
        match self.pass_order? {
            PassOrder::MergerFirst => Some(true),
            PassOrder::HighwayFirst => Some(false),
            PassOrder::Undetermined => None,
        }
    }
}

/// One on-ramp merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub event_id: usize,
    pub merger_id: VehicleId,
    /// First sample sustainedly in the outermost mainline lane.
    pub t_m: f64,
    /// Merger's longitudinal position at `t_m`.
    pub merge_point_y: f64,
    pub lookbacks: Vec<LookbackRecord>,
}

impl MergeEvent {
    pub fn lookback(&self, tau: f64) -> Option<&LookbackRecord> {
        self.lookbacks.iter().find(|r| (r.tau - tau).abs() < 1e-9)
    }
}

/// `|lead_time| <= threshold`.
pub fn classify_conflict(lead_time: f64, threshold: f64) -> bool {
    lead_time.abs() <= threshold
}

/// Latest sample at or before `t` with a full prediction history behind it.
pub fn history_anchor(track: &VehicleTrack, t: f64) -> Option<f64> {
    let i = track.index_at_or_before(t)?;
    let anchor = track.states[i].t;
    let first = track.first_t()?;
    let needed = (HISTORY_SAMPLES - 1) as f64 * STEP_DT;
    (anchor - needed >= first - TIME_EPS).then_some(anchor)
}

/// Merge completion time for a vehicle that enters from the ramp side:
/// the track starts on an on-ramp or auxiliary lane and later settles in the
/// outermost mainline lane.
pub fn merge_completion(track: &VehicleTrack, dataset: &Dataset, dwell_samples: usize) -> Option<(f64, f64)> {
    let site = &dataset.site;
    let first_lane = track.states.iter().map(|s| s.lane).find(|l| l.is_known())?;
    if !matches!(site.role(first_lane), Some(LaneRole::Onramp | LaneRole::Auxiliary)) {
        return None;
    }
    let change = detect_track_lane_changes(track, site, dwell_samples)
        .into_iter()
        .find(|c| {
            site.role(c.to_lane) == Some(LaneRole::OutermostMainline)
                && matches!(site.role(c.from_lane), Some(LaneRole::Onramp | LaneRole::Auxiliary))
        })?;
    let y = track.states[track.index_at(change.t_lc)?].y;
    site.in_merge_zone(y).then_some((change.t_lc, y))
}

/// Nearest upstream vehicle in the outermost mainline lane at `t_l`.
///
/// Candidates have not yet reached the merge point and lie within `radius`
/// of the merger's position at `t_l`.
pub fn select_interacting_highway_vehicle(
    dataset: &Dataset,
    index: &SceneIndex,
    merger_id: VehicleId,
    merge_point_y: f64,
    t_l: f64,
    radius: f64,
) -> Option<VehicleId> {
    let merger_y = dataset.track(merger_id)?.position_at(t_l)?.y;
    let outermost = dataset.site.outermost_lane();
    index
        .active_at(dataset, t_l)
        .filter(|tr| tr.id != merger_id)
        .filter(|tr| tr.lane_at(t_l) == Some(outermost))
        .filter_map(|tr| Some((tr.id, tr.position_at(t_l)?.y)))
        .filter(|(_, y)| *y <= merge_point_y && (y - merger_y).abs() <= radius)
        .min_by(|a, b| (merge_point_y - a.1).total_cmp(&(merge_point_y - b.1)).then(a.0.cmp(&b.0)))
        .map(|(id, _)| id)
}

/// Courtesy outcome on a path of the highway vehicle: did it leave the
/// outermost lane toward the median (or the shoulder) by `t_m`?
pub fn courtesy_outcome(
    path: &Path,
    t_m: f64,
    dataset: &Dataset,
    dwell_samples: usize,
) -> (bool, bool) {
    let site = &dataset.site;
    let outermost = site.outermost_lane();
    let mut median = false;
    let mut shoulder = false;
    for c in path.lane_changes(site, dwell_samples) {
        if c.from_lane != outermost || c.t_lc <= path.anchor_t() || c.t_lc > t_m + TIME_EPS {
            continue;
        }
        match c.direction {
            LateralDirection::TowardMedian => median = true,
            LateralDirection::TowardShoulder => shoulder = true,
        }
    }
    (median, shoulder)
}

/// Longitudinal samples of a recorded track from `anchor_t` onward.
pub fn recorded_longitudinal(track: &VehicleTrack, anchor_t: f64) -> Vec<(f64, f64)> {
    let start = track.index_at_or_before(anchor_t).unwrap_or(0);
    track.states[start..].iter().map(|s| (s.t, s.y)).collect()
}

fn lookback_record(
    dataset: &Dataset,
    index: &SceneIndex,
    config: &AnalysisConfig,
    merger: &VehicleTrack,
    t_m: f64,
    merge_point_y: f64,
    tau: f64,
) -> LookbackRecord {
    let t_l = t_m - tau;
    let mut rec = LookbackRecord {
        tau,
        t_l,
        status: LookbackStatus::InsufficientHistory,
        merger_anchor_t: None,
        highway_id: None,
        highway_anchor_t: None,
        lead_time: None,
        conflict: None,
        pass_order: None,
        highway_lane_change: None,
        highway_shoulder_exit: None,
    };
    if !merger.covers(t_l) {
        return rec;
    }
    rec.merger_anchor_t = history_anchor(merger, t_l);
    let Some(hw_id) = select_interacting_highway_vehicle(
        dataset,
        index,
        merger.id,
        merge_point_y,
        t_l,
        config.neighbor_radius,
    ) else {
        rec.status = LookbackStatus::NoHighwayVehicle;
        return rec;
    };
    let highway = dataset.track(hw_id).expect("indexed vehicle exists");
    rec.highway_id = Some(hw_id);
    rec.highway_anchor_t = history_anchor(highway, t_l);

    let (Ok(m), Ok(h)) = (
        snapshot(merger, t_l, merge_point_y),
        snapshot(highway, t_l, merge_point_y),
    ) else {
        rec.status = LookbackStatus::InsufficientHistory;
        return rec;
    };
    match lead_time(&m, &h, config.stopped_speed) {
        Ok(lt) => {
            rec.lead_time = Some(lt);
            rec.conflict = Some(classify_conflict(lt, config.conflict_threshold));
        }
        Err(LeadTimeExclusion::StoppedVehicle) => {
            rec.status = LookbackStatus::StoppedVehicle;
            return rec;
        }
        Err(LeadTimeExclusion::PastMergePoint) => {
            rec.status = LookbackStatus::PastMergePoint;
            return rec;
        }
    }
    let (Some(m_anchor), Some(h_anchor)) = (rec.merger_anchor_t, rec.highway_anchor_t) else {
        rec.status = LookbackStatus::InsufficientHistory;
        return rec;
    };
    rec.status = LookbackStatus::Ok;

    rec.pass_order = Some(determine_pass_order(
        merge_point_y,
        &recorded_longitudinal(merger, m_anchor),
        &recorded_longitudinal(highway, h_anchor),
        config.extrapolation_cap,
    ));
    if let Some(path) = Path::from_track(highway, h_anchor, &dataset.site) {
        let (median, shoulder) =
            courtesy_outcome(&path, t_m, dataset, config.dwell_samples(STEP_DT));
        rec.highway_lane_change = Some(median);
        rec.highway_shoulder_exit = Some(shoulder);
    }
    rec
}

/// Finds every on-ramp merge and resolves the interacting pair at each look-back.
///
/// Work is spread over vehicles; results come back in vehicle-id order with
/// sequential event ids.
pub fn extract_merge_events(
    dataset: &Dataset,
    index: &SceneIndex,
    config: &AnalysisConfig,
) -> Vec<MergeEvent> {
    if !dataset.site.supports_merge_analysis() {
        return Vec::new();
    }
    let dwell = config.dwell_samples(dataset.sample_dt());
    let tracks: Vec<&VehicleTrack> = dataset.tracks.values().collect();
    let mut found: Vec<(VehicleId, f64, f64, Vec<LookbackRecord>)> = tracks
        .par_iter()
        .filter_map(|track| {
            let (t_m, y) = merge_completion(track, dataset, dwell)?;
            let records = config
                .lookbacks
                .iter()
                .map(|&tau| lookback_record(dataset, index, config, track, t_m, y, tau))
                .collect();
            Some((track.id, t_m, y, records))
        })
        .collect();
    found.sort_by_key(|(id, ..)| *id);
    found
        .into_iter()
        .enumerate()
        .map(|(event_id, (merger_id, t_m, merge_point_y, lookbacks))| MergeEvent {
            event_id,
            merger_id,
            t_m,
            merge_point_y,
            lookbacks,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LaneId, SiteProfile, VehicleClass, VehicleState};

    /// Constant-speed vehicle; `lane_of(i)` gives the lane at sample `i`.
    fn vehicle(id: u64, y0: f64, v: f64, n: usize, lane_of: impl Fn(usize) -> i32) -> VehicleTrack {
        let site = SiteProfile::synthetic();
        let mut t = VehicleTrack::new(VehicleId(id), VehicleClass::Auto, 4.5, 1.8);
        t.states = (0..n)
            .map(|i| {
                let lane = LaneId(lane_of(i));
                let x = site.lane_center(lane).unwrap();
                VehicleState::new(i as f64 * 0.4, x, y0 + v * 0.4 * i as f64, lane)
            })
            .collect();
        t
    }

    fn dataset(tracks: Vec<VehicleTrack>) -> Dataset {
        let mut d = Dataset::new(SiteProfile::synthetic(), 2.5);
        for t in tracks {
            d.insert(t);
        }
        d
    }

    #[test]
    fn merger_found_at_first_mainline_sample() {
        let merger = vehicle(1, 0.0, 10.0, 40, |i| if i < 20 { 4 } else { 3 });
        let d = dataset(vec![merger]);
        let idx = SceneIndex::new(&d);
        let ev = extract_merge_events(&d, &idx, &AnalysisConfig::default());
        assert_eq!(ev.len(), 1);
        assert!((ev[0].t_m - 8.0).abs() < 1e-12);
        assert!((ev[0].merge_point_y - 80.0).abs() < 1e-9);
        assert!(ev[0].lookbacks.iter().all(|r| r.status == LookbackStatus::NoHighwayVehicle));
    }

    #[test]
    fn ramp_only_vehicle_is_not_a_merger() {
        let d = dataset(vec![vehicle(1, 0.0, 10.0, 40, |_| 4)]);
        let idx = SceneIndex::new(&d);
        assert!(extract_merge_events(&d, &idx, &AnalysisConfig::default()).is_empty());
    }

    #[test]
    fn nearest_upstream_vehicle_selected() {
        let merger = vehicle(1, 0.0, 10.0, 40, |i| if i < 20 { 4 } else { 3 });
        // At t = 4 s merger is at y = 40; merge point 80.
        let near = vehicle(2, 0.0, 10.0, 40, |_| 3); // y = 40 at t = 4, d = 40
        let far = vehicle(3, -50.0, 10.0, 40, |_| 3); // y = -10, d = 90
        let passed = vehicle(4, 60.0, 10.0, 40, |_| 3); // y = 100, already past
        let other_lane = vehicle(5, 30.0, 10.0, 40, |_| 2);
        let d = dataset(vec![merger, near, far, passed, other_lane]);
        let idx = SceneIndex::new(&d);
        let pick = select_interacting_highway_vehicle(&d, &idx, VehicleId(1), 80.0, 4.0, 100.0);
        assert_eq!(pick, Some(VehicleId(2)));

        let d2 = dataset(vec![
            vehicle(1, 0.0, 10.0, 40, |i| if i < 20 { 4 } else { 3 }),
            vehicle(4, 60.0, 10.0, 40, |_| 3),
        ]);
        let idx2 = SceneIndex::new(&d2);
        assert_eq!(select_interacting_highway_vehicle(&d2, &idx2, VehicleId(1), 80.0, 4.0, 100.0), None);

        let d3 = dataset(vec![vehicle(1, 0.0, 10.0, 40, |i| if i < 20 { 4 } else { 3 })]);
        let idx3 = SceneIndex::new(&d3);
        assert_eq!(select_interacting_highway_vehicle(&d3, &idx3, VehicleId(1), 80.0, 4.0, 100.0), None);
    }

    #[test]
    fn conflict_boundary_inclusive() {
        assert!(classify_conflict(0.5, 1.0));
        assert!(classify_conflict(-1.0, 1.0));
        assert!(!classify_conflict(3.0, 1.0));
    }

    #[test]
    fn full_event_records() {
        // Highway vehicle 12 m behind the merger at equal speed: arrives 1.2 s later.
        let merger = vehicle(1, 0.0, 10.0, 40, |i| if i < 15 { 4 } else { 3 });
        let highway = vehicle(2, -12.0, 10.0, 40, |i| if i < 10 { 3 } else { 2 });
        let d = dataset(vec![merger, highway]);
        let idx = SceneIndex::new(&d);
        let ev = &extract_merge_events(&d, &idx, &AnalysisConfig::default())[0];
        assert!((ev.t_m - 6.0).abs() < 1e-12);
        let r = ev.lookback(3.0).unwrap();
        assert_eq!(r.status, LookbackStatus::Ok);
        assert!((r.lead_time.unwrap() - 1.2).abs() < 1e-9);
        assert_eq!(r.conflict, Some(false));
        assert_eq!(r.pass_order, Some(PassOrder::MergerFirst));
        // Highway vehicle moves to lane 2 at 4.0 s, inside (anchor, t_m].
        assert_eq!(r.highway_lane_change, Some(true));
        // Look-back 1 s: the highway vehicle has already left the outermost lane.
        assert_eq!(ev.lookback(1.0).unwrap().status, LookbackStatus::NoHighwayVehicle);
        // Look-back 5 s: t_l = 1.0 lacks 2.8 s of history behind the anchor.
        assert_eq!(ev.lookback(5.0).unwrap().status, LookbackStatus::InsufficientHistory);
    }

    #[test]
    fn merger_crossing_matches_merge_time() {
        let merger = vehicle(1, 0.0, 10.0, 40, |i| if i < 20 { 4 } else { 3 });
        let rec = recorded_longitudinal(&merger, 4.0);
        let t = super::super::path::crossing_time(&rec, 80.0, 30.0).unwrap();
        assert!((t - 8.0).abs() < 0.4);
    }
}
