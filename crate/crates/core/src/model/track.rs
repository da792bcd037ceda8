use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LaneId, Point, SiteProfile, VehicleId, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Motorcycle,
    Auto,
    Truck,
}

impl VehicleClass {
    /// NGSIM `v_Class` code: 1 motorcycle, 2 auto, 3 truck.
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(VehicleClass::Motorcycle),
            2 => Some(VehicleClass::Auto),
            3 => Some(VehicleClass::Truck),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            VehicleClass::Motorcycle => 1,
            VehicleClass::Auto => 2,
            VehicleClass::Truck => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub gx: Option<f64>,
    pub gy: Option<f64>,
    pub lane: LaneId,
    /// Recorded speed. Informational only; analyses re-estimate speed from `y`.
    pub v: Option<f64>,
}

impl VehicleState {
    pub fn new(t: f64, x: f64, y: f64, lane: LaneId) -> Self {
        VehicleState {
            t,
            x,
            y,
            gx: None,
            gy: None,
            lane,
            v: None,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn global(&self) -> Option<Point> {
        Some(Point::new(self.gx?, self.gy?))
    }
}

/// One vehicle's trajectory, sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub length: f64,
    pub width: f64,
    pub states: Vec<VehicleState>,
}

impl VehicleTrack {
    pub fn new(id: VehicleId, class: VehicleClass, length: f64, width: f64) -> Self {
        VehicleTrack {
            id,
            class,
            length,
            width,
            states: Vec::new(),
        }
    }

    pub fn first_t(&self) -> Option<f64> {
        self.states.first().map(|s| s.t)
    }

    pub fn last_t(&self) -> Option<f64> {
        self.states.last().map(|s| s.t)
    }

    pub fn covers(&self, t: f64) -> bool {
        match (self.first_t(), self.last_t()) {
            (Some(a), Some(b)) => t >= a - TIME_EPS && t <= b + TIME_EPS,
            _ => false,
        }
    }

    /// Index of the sample taken at `t`, if there is one.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let i = self.index_at_or_before(t)?;
        ((self.states[i].t - t).abs() <= TIME_EPS).then_some(i)
    }

    /// Index of the latest sample with time `<= t` (within tolerance).
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        let n = self.states.partition_point(|s| s.t <= t + TIME_EPS);
        n.checked_sub(1)
    }

    /// Linear interpolation of the road-frame position at `t`; exact at sample times.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        self.interpolate(t, |s| Some(s.position()))
    }

    pub fn global_at(&self, t: f64) -> Option<Point> {
        self.interpolate(t, VehicleState::global)
    }

    /// Lane of the latest sample at or before `t`.
    pub fn lane_at(&self, t: f64) -> Option<LaneId> {
        if !self.covers(t) {
            return None;
        }
        self.index_at_or_before(t).map(|i| self.states[i].lane)
    }

    fn interpolate(&self, t: f64, get: impl Fn(&VehicleState) -> Option<Point>) -> Option<Point> {
        if !self.covers(t) {
            return None;
        }
        let i = self.index_at_or_before(t)?;
        let a = &self.states[i];
        if (a.t - t).abs() <= TIME_EPS || i + 1 == self.states.len() {
            return get(a);
        }
        let b = &self.states[i + 1];
        let (pa, pb) = (get(a)?, get(b)?);
        let w = (t - a.t) / (b.t - a.t);
        Some(Point::new(pa.x + w * (pb.x - pa.x), pa.y + w * (pb.y - pa.y)))
    }
}

/// A problem found by [`validate_track`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonMonotoneTime { index: usize },
    NonUniformDt { index: usize, dt: f64 },
    UnknownLane { index: usize, lane: LaneId },
    NonFinite { index: usize },
    BadDimensions,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonMonotoneTime { index } => write!(f, "non-monotone time at sample {index}"),
            Violation::NonUniformDt { index, dt } => {
                write!(f, "non-uniform dt {dt} s at sample {index}")
            }
            Violation::UnknownLane { index, lane } => {
                write!(f, "unknown lane {lane} at sample {index}")
            }
            Violation::NonFinite { index } => write!(f, "non-finite value at sample {index}"),
            Violation::BadDimensions => f.write_str("non-positive vehicle dimensions"),
        }
    }
}

/// Checks a track against its invariants. Never fails; returns every problem found.
///
/// Spacing is checked against the first interval of the track.
pub fn validate_track(track: &VehicleTrack, site: &SiteProfile) -> Vec<Violation> {
    validate_track_at(track, site, None)
}

/// Like [`validate_track`], checking spacing against `1 / sample_hz` when given.
pub fn validate_track_at(
    track: &VehicleTrack,
    site: &SiteProfile,
    sample_hz: Option<f64>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(track.length > 0.0 && track.width > 0.0) {
        out.push(Violation::BadDimensions);
    }
    let expected_dt = sample_hz
        .map(|hz| 1.0 / hz)
        .or(match track.states.as_slice() {
            [a, b, ..] if b.t > a.t => Some(b.t - a.t),
            _ => None,
        });

    for (i, s) in track.states.iter().enumerate() {
        let finite = s.t.is_finite()
            && s.x.is_finite()
            && s.y.is_finite()
            && s.gx.is_none_or(f64::is_finite)
            && s.gy.is_none_or(f64::is_finite);
        if !finite {
            out.push(Violation::NonFinite { index: i });
        }
        if s.lane.is_known() && !site.contains_lane(s.lane) {
            out.push(Violation::UnknownLane {
                index: i,
                lane: s.lane,
            });
        }
        if i == 0 {
            continue;
        }
        let dt = s.t - track.states[i - 1].t;
        if dt.is_nan() || dt <= 0.0 {
            out.push(Violation::NonMonotoneTime { index: i });
        } else if let Some(expected) = expected_dt {
            if (dt - expected).abs() >= TIME_EPS {
                out.push(Violation::NonUniformDt { index: i, dt });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(times: &[f64], lane: i32) -> VehicleTrack {
        let mut t = VehicleTrack::new(VehicleId(1), VehicleClass::Auto, 4.5, 1.8);
        t.states = times
            .iter()
            .map(|&ti| VehicleState::new(ti, 1.8, 10.0 * ti, LaneId(lane)))
            .collect();
        t
    }

    #[test]
    fn well_formed_track_is_ok() {
        let site = SiteProfile::synthetic();
        assert!(validate_track(&track(&[0.0, 0.4, 0.8], 1), &site).is_empty());
    }

    #[test]
    fn repeated_time_is_non_monotone() {
        let site = SiteProfile::synthetic();
        let v = validate_track(&track(&[0.0, 0.4, 0.4], 1), &site);
        assert_eq!(v, vec![Violation::NonMonotoneTime { index: 2 }]);
        assert!(v[0].to_string().starts_with("non-monotone time"));
    }

    #[test]
    fn lane_outside_profile_is_flagged() {
        let site = SiteProfile::synthetic();
        let v = validate_track(&track(&[0.0, 0.4, 0.8], 99), &site);
        assert_eq!(v.len(), 3);
        assert!(v[0].to_string().starts_with("unknown lane"));
    }

    #[test]
    fn uneven_spacing_and_nan_reported() {
        let site = SiteProfile::synthetic();
        let mut t = track(&[0.0, 0.4, 0.9], 1);
        t.states[1].x = f64::NAN;
        let v = validate_track_at(&t, &site, Some(2.5));
        assert!(v.contains(&Violation::NonFinite { index: 1 }));
        assert!(matches!(v.last(), Some(Violation::NonUniformDt { index: 2, .. })));
    }

    #[test]
    fn interpolation_and_lookup() {
        let t = track(&[0.0, 0.4, 0.8], 1);
        assert_eq!(t.index_at(0.4), Some(1));
        assert_eq!(t.index_at(0.5), None);
        assert_eq!(t.index_at_or_before(0.5), Some(1));
        let p = t.position_at(0.6).unwrap();
        assert!((p.y - 6.0).abs() < 1e-12);
        assert_eq!(t.position_at(0.9), None);
        assert_eq!(t.lane_at(0.7), Some(LaneId(1)));
    }
}
