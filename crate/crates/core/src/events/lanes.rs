use serde::{Deserialize, Serialize};

use crate::model::{LaneId, LateralDirection, SiteProfile, VehicleId, VehicleState, VehicleTrack};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub vehicle_id: VehicleId,
    /// Time of the first sample in the new lane.
    pub t_lc: f64,
    pub from_lane: LaneId,
    pub to_lane: LaneId,
    pub direction: LateralDirection,
}

/// Lane of a state: the recorded label when the profile knows it, otherwise
/// the lateral interval containing `x`.
pub fn assign_lane(state: &VehicleState, site: &SiteProfile) -> LaneId {
    if state.lane.is_known() && site.contains_lane(state.lane) {
        state.lane
    } else {
        site.lane_for_x(state.x)
    }
}

/// Scans a lane sequence for sustained changes.
///
/// The first known lane is taken as established. A different lane becomes
/// the new established lane, and a change is reported, once it persists for
/// `dwell_samples` consecutive samples; with `tail_sustained` a run that
/// reaches the end of the sequence also counts. `UNKNOWN` samples are skipped.
pub fn detect_lane_changes(
    vehicle_id: VehicleId,
    samples: &[(f64, LaneId)],
    site: &SiteProfile,
    dwell_samples: usize,
    tail_sustained: bool,
) -> Vec<LaneChange> {
    let known: Vec<(f64, LaneId)> = samples.iter().copied().filter(|(_, l)| l.is_known()).collect();
    let mut out = Vec::new();
    let Some(&(_, mut current)) = known.first() else {
        return out;
    };
    if known.len() < 2 {
        return out;
    }
    let dwell = dwell_samples.max(1);
    let mut i = 1;
    while i < known.len() {
        let lane = known[i].1;
        if lane == current {
            i += 1;
            continue;
        }
        let run = known[i..].iter().take_while(|(_, l)| *l == lane).count();
        let reaches_end = i + run == known.len();
        if run >= dwell || (tail_sustained && reaches_end) {
            out.push(LaneChange {
                vehicle_id,
                t_lc: known[i].0,
                from_lane: current,
                to_lane: lane,
                direction: site.direction(current, lane),
            });
            current = lane;
        }
        i += run;
    }
    out
}

/// Lane changes over a whole recorded track, using recorded labels.
pub fn detect_track_lane_changes(
    track: &VehicleTrack,
    site: &SiteProfile,
    dwell_samples: usize,
) -> Vec<LaneChange> {
    let lanes: Vec<(f64, LaneId)> = track
        .states
        .iter()
        .map(|s| (s.t, assign_lane(s, site)))
        .collect();
    detect_lane_changes(track.id, &lanes, site, dwell_samples, false)
}

/// Lane changes over a track using only geometric lane assignment from `x`.
pub fn detect_track_lane_changes_geometric(
    track: &VehicleTrack,
    site: &SiteProfile,
    dwell_samples: usize,
) -> Vec<LaneChange> {
    let lanes: Vec<(f64, LaneId)> = track
        .states
        .iter()
        .map(|s| (s.t, site.lane_for_x(s.x)))
        .collect();
    detect_lane_changes(track.id, &lanes, site, dwell_samples, false)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn seq(lanes: &[i32]) -> Vec<(f64, LaneId)> {
        lanes
            .iter()
            .enumerate()
            .map(|(i, &l)| (i as f64 * 0.4, LaneId(l)))
            .collect()
    }

    fn detect(lanes: &[i32], tail: bool) -> Vec<LaneChange> {
        detect_lane_changes(VehicleId(1), &seq(lanes), &SiteProfile::synthetic(), 2, tail)
    }

    #[test]
    fn assign_lane_prefers_recorded_labels() {
        let site = SiteProfile::synthetic();
        let mut s = VehicleState::new(0.0, 1.8, 0.0, LaneId(3));
        assert_eq!(assign_lane(&s, &site), LaneId(3));
        s.lane = LaneId::UNKNOWN;
        assert_eq!(assign_lane(&s, &site), LaneId(1));
        s.x = -1.0;
        assert_eq!(assign_lane(&s, &site), LaneId::UNKNOWN);
    }

    #[test]
    fn single_sustained_change() {
        let c = detect(&[2, 2, 2, 3, 3, 3], false);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].t_lc, 3.0 * 0.4);
        assert_eq!((c[0].from_lane, c[0].to_lane), (LaneId(2), LaneId(3)));
        assert_eq!(c[0].direction, LateralDirection::TowardShoulder);
    }

    #[test]
    fn jitter_rejected() {
        assert!(detect(&[2, 2, 3, 2, 2], false).is_empty());
        assert!(detect(&[2, 2, 2, 2], false).is_empty());
    }

    #[test]
    fn tail_rule() {
        assert!(detect(&[2, 2, 2, 3], false).is_empty());
        assert_eq!(detect(&[2, 2, 2, 3], true).len(), 1);
    }

    #[test]
    fn unknown_samples_are_skipped() {
        let c = detect(&[2, 2, -1, 1, 1], false);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].direction, LateralDirection::TowardMedian);
        assert_eq!(c[0].t_lc, 3.0 * 0.4);
    }

    proptest! {
        // Every reported change must survive a re-scan of the sequence.
        #[test]
        fn reported_changes_satisfy_dwell(lanes in prop::collection::vec(1i32..=3, 2..60), dwell in 1usize..4) {
            let s = seq(&lanes);
            let changes = detect_lane_changes(VehicleId(1), &s, &SiteProfile::synthetic(), dwell, false);
            let mut established = lanes[0];
            for c in &changes {
                prop_assert_ne!(c.from_lane, c.to_lane);
                prop_assert_eq!(c.from_lane.0, established);
                let i = s.iter().position(|(t, _)| *t == c.t_lc).unwrap();
                let run = lanes[i..].iter().take_while(|l| **l == c.to_lane.0).count();
                prop_assert!(run >= dwell);
                prop_assert_ne!(lanes[i - 1], c.to_lane.0);
                established = c.to_lane.0;
            }
        }
    }
}
