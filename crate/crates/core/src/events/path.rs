use serde::{Deserialize, Serialize};

use super::lanes::{detect_lane_changes, LaneChange};
use crate::model::{LaneId, Point, SiteProfile, VehicleId, VehicleTrack, HORIZON_STEPS, STEP_DT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub p: Point,
    pub lane: LaneId,
}

/// A trajectory starting at an anchor time, on the prediction grid.
///
/// Naturalistic and predicted trajectories are both reduced to this form so
/// every outcome is computed by the same code.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub vehicle_id: VehicleId,
    pub samples: Vec<PathSample>,
}

impl Path {
    /// Recorded trajectory from `anchor_t` over the prediction horizon, using
    /// recorded lane labels. Stops early where the track ends.
    pub fn from_track(track: &VehicleTrack, anchor_t: f64, site: &SiteProfile) -> Option<Path> {
        let mut samples = Vec::with_capacity(HORIZON_STEPS + 1);
        for k in 0..=HORIZON_STEPS {
            let t = anchor_t + STEP_DT * k as f64;
            let Some(p) = track.position_at(t) else { break };
            let recorded = track.lane_at(t).unwrap_or(LaneId::UNKNOWN);
            let lane = if recorded.is_known() && site.contains_lane(recorded) {
                recorded
            } else {
                site.lane_for_x(p.x)
            };
            samples.push(PathSample { t, p, lane });
        }
        (!samples.is_empty()).then_some(Path {
            vehicle_id: track.id,
            samples,
        })
    }

    /// Predicted trajectory: the anchor position followed by the predicted
    /// points, lanes assigned geometrically throughout.
    pub fn from_points(
        vehicle_id: VehicleId,
        anchor_t: f64,
        anchor: Point,
        points: &[Point],
        site: &SiteProfile,
    ) -> Path {
        let samples = std::iter::once(anchor)
            .chain(points.iter().copied())
            .enumerate()
            .map(|(k, p)| PathSample {
                t: anchor_t + STEP_DT * k as f64,
                p,
                lane: site.lane_for_x(p.x),
            })
            .collect();
        Path {
            vehicle_id,
            samples,
        }
    }

    pub fn anchor_t(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Lane changes along the path; a new lane reaching the end of the path
    /// counts as sustained.
    pub fn lane_changes(&self, site: &SiteProfile, dwell_samples: usize) -> Vec<LaneChange> {
        let lanes: Vec<(f64, LaneId)> = self.samples.iter().map(|s| (s.t, s.lane)).collect();
        detect_lane_changes(self.vehicle_id, &lanes, site, dwell_samples, true)
    }

    pub fn longitudinal(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.p.y)).collect()
    }
}

/// First time a longitudinal trajectory reaches `target_y`, interpolating
/// linearly between samples. When it never does, the last segment's speed is
/// held for at most `extrapolation_cap` seconds.
pub fn crossing_time(samples: &[(f64, f64)], target_y: f64, extrapolation_cap: f64) -> Option<f64> {
    let first = samples.first()?;
    if first.1 >= target_y {
        return Some(first.0);
    }
    for w in samples.windows(2) {
        let ((t0, y0), (t1, y1)) = (w[0], w[1]);
        if y1 >= target_y {
            let frac = (target_y - y0) / (y1 - y0);
            return Some(t0 + frac * (t1 - t0));
        }
    }
    let [.., (t0, y0), (t1, y1)] = samples else {
        return None;
    };
    let v = (y1 - y0) / (t1 - t0);
    if !(v > 0.0) {
        return None;
    }
    let dt = (target_y - y1) / v;
    (dt <= extrapolation_cap).then_some(t1 + dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassOrder {
    MergerFirst,
    HighwayFirst,
    Undetermined,
}

/// Which vehicle reaches the merge point first. Equal crossing times go to
/// the highway vehicle.
pub fn determine_pass_order(
    merge_point_y: f64,
    merger: &[(f64, f64)],
    highway: &[(f64, f64)],
    extrapolation_cap: f64,
) -> PassOrder {
    match (
        crossing_time(merger, merge_point_y, extrapolation_cap),
        crossing_time(highway, merge_point_y, extrapolation_cap),
    ) {
        (Some(m), Some(h)) if m < h => PassOrder::MergerFirst,
        (Some(_), Some(_)) => PassOrder::HighwayFirst,
        _ => PassOrder::Undetermined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(t0: f64, y0: f64, v: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| (t0 + 0.4 * i as f64, y0 + v * 0.4 * i as f64)).collect()
    }

    #[test]
    fn crossing_interpolates_and_extrapolates() {
        let s = line(0.0, 0.0, 10.0, 5);
        assert!((crossing_time(&s, 6.0, 30.0).unwrap() - 0.6).abs() < 1e-12);
        assert!((crossing_time(&s, 36.0, 30.0).unwrap() - 3.6).abs() < 1e-12);
        assert_eq!(crossing_time(&s, 1000.0, 30.0), None);
        assert_eq!(crossing_time(&line(0.0, 0.0, 0.0, 5), 1.0, 30.0), None);
    }

    #[test]
    fn pass_order_cases() {
        // Merger crosses at 2.0 s, highway 1.2 s later.
        let merger = line(0.0, 0.0, 10.0, 13);
        let highway = line(0.0, -32.0, 10.0, 13);
        assert_eq!(determine_pass_order(20.0, &merger, &highway, 30.0), PassOrder::MergerFirst);
        assert_eq!(determine_pass_order(20.0, &highway, &merger, 30.0), PassOrder::HighwayFirst);
        let still = line(0.0, 0.0, 0.0, 13);
        assert_eq!(determine_pass_order(20.0, &still, &still, 30.0), PassOrder::Undetermined);
    }

    #[test]
    fn predicted_path_lanes_are_geometric() {
        let site = SiteProfile::synthetic();
        let pts: Vec<Point> = (1..=12).map(|k| Point::new(if k < 4 { 9.0 } else { 5.5 }, k as f64)).collect();
        let path = Path::from_points(VehicleId(3), 10.0, Point::new(9.0, 0.0), &pts, &site);
        assert_eq!(path.samples.len(), 13);
        let lc = path.lane_changes(&site, 2);
        assert_eq!(lc.len(), 1);
        assert_eq!(lc[0].to_lane, LaneId(2));
        assert!((lc[0].t_lc - (10.0 + 4.0 * STEP_DT)).abs() < 1e-12);
    }
}
