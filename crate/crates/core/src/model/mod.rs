//! Canonical in-memory data model shared by every analysis stage.
//!
//! Everything is in SI units (m, s, m/s). Road frame: `x` lateral, `y`
//! longitudinal and increasing in the direction of travel.

mod config;
mod prediction;
mod site;
mod track;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::AnalysisConfig;
pub use prediction::{
    most_likely_mode, PredictionInstance, PredictionMode, PredictionSet, HISTORY_SAMPLES,
    HORIZON_STEPS, PREDICTION_HZ, STEP_DT,
};
pub use site::{LaneRole, LateralDirection, RawUnit, SiteId, SiteProfile};
pub use track::{validate_track, validate_track_at, VehicleClass, VehicleState, VehicleTrack, Violation};

/// Tolerance used when matching timestamps against a sample grid.
pub const TIME_EPS: f64 = 1e-6;

/// Vehicle identifier as carried by the source data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lane label. Negative values are reserved for [`LaneId::UNKNOWN`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub i32);

impl LaneId {
    pub const UNKNOWN: LaneId = LaneId(-1);

    pub fn is_known(self) -> bool {
        self != Self::UNKNOWN
    }
}

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_known() {
            write!(f, "{}", self.0)
        } else {
            f.write_str("unknown")
        }
    }
}

/// A position in the road frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Millisecond key for a timestamp, used wherever times index a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeKey(pub i64);

impl TimeKey {
    pub fn from_secs(t: f64) -> Self {
        TimeKey((t * 1000.0).round() as i64)
    }

    pub fn secs(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

/// A recording at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub site: SiteProfile,
    pub tracks: BTreeMap<VehicleId, VehicleTrack>,
    pub sample_hz: f64,
    /// Absolute time (ms) of `t = 0`; NGSIM `Global_Time` of the earliest row.
    pub time_origin_ms: i64,
}

impl Dataset {
    pub fn new(site: SiteProfile, sample_hz: f64) -> Self {
        Dataset {
            site,
            tracks: BTreeMap::new(),
            sample_hz,
            time_origin_ms: 0,
        }
    }

    pub fn sample_dt(&self) -> f64 {
        1.0 / self.sample_hz
    }

    pub fn insert(&mut self, track: VehicleTrack) {
        self.tracks.insert(track.id, track);
    }

    pub fn track(&self, id: VehicleId) -> Option<&VehicleTrack> {
        self.tracks.get(&id)
    }

    pub fn sample_count(&self) -> usize {
        self.tracks.values().map(|t| t.states.len()).sum()
    }

    /// Time span covered by any track.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        let mut span: Option<(f64, f64)> = None;
        for track in self.tracks.values() {
            let (Some(a), Some(b)) = (track.first_t(), track.last_t()) else {
                continue;
            };
            span = Some(match span {
                None => (a, b),
                Some((lo, hi)) => (lo.min(a), hi.max(b)),
            });
        }
        span
    }

    /// Diagnostics for every track; empty when the dataset is clean.
    pub fn validate(&self) -> Vec<(VehicleId, Violation)> {
        self.tracks
            .values()
            .flat_map(|t| {
                validate_track_at(t, &self.site, Some(self.sample_hz))
                    .into_iter()
                    .map(move |v| (t.id, v))
            })
            .collect()
    }
}
