use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LaneId;
use crate::error::{Error, Result};

pub const FEET_TO_METERS: f64 = 0.3048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SiteId {
    Us101,
    I80,
    Custom(String),
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteId::Us101 => f.write_str("US101"),
            SiteId::I80 => f.write_str("I80"),
            SiteId::Custom(name) => f.write_str(name),
        }
    }
}

impl FromStr for SiteId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "US101" | "US-101" => SiteId::Us101,
            "I80" | "I-80" => SiteId::I80,
            _ => SiteId::Custom(s.to_string()),
        })
    }
}

impl Serialize for SiteId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SiteId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneRole {
    Mainline,
    OutermostMainline,
    Onramp,
    Auxiliary,
    Offramp,
}

impl LaneRole {
    pub fn is_mainline(self) -> bool {
        matches!(self, LaneRole::Mainline | LaneRole::OutermostMainline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawUnit {
    Feet,
    Meters,
}

impl RawUnit {
    pub fn to_meters(self) -> f64 {
        match self {
            RawUnit::Feet => FEET_TO_METERS,
            RawUnit::Meters => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralDirection {
    TowardMedian,
    TowardShoulder,
}

/// Per-highway configuration: lane roles, lateral lane geometry and the merge zone.
///
/// Lanes are straight and parallel. `lane_boundaries` holds the lateral edges
/// (m) of the intervals listed in `interval_lanes`; interval `i` spans
/// `(lane_boundaries[i], lane_boundaries[i + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site_id: SiteId,
    pub raw_unit: RawUnit,
    pub lane_roles: BTreeMap<LaneId, LaneRole>,
    /// Mainline lanes, innermost (fastest) first.
    pub lane_order: Vec<LaneId>,
    pub lane_boundaries: Vec<f64>,
    pub interval_lanes: Vec<LaneId>,
    /// Longitudinal interval (m) in which merges are accepted.
    pub merge_zone: Option<(f64, f64)>,
}

/// On-disk form: TOML keys must be strings, so roles are keyed by lane number text.
#[derive(Serialize, Deserialize)]
struct SiteProfileFile {
    site_id: String,
    raw_unit: RawUnit,
    lane_order: Vec<i32>,
    lane_boundaries_m: Vec<f64>,
    #[serde(default)]
    interval_lanes: Option<Vec<i32>>,
    #[serde(default)]
    merge_zone_m: Option<[f64; 2]>,
    lane_roles: BTreeMap<String, LaneRole>,
}

impl SiteProfile {
    pub fn new(
        site_id: SiteId,
        raw_unit: RawUnit,
        lane_roles: BTreeMap<LaneId, LaneRole>,
        lane_order: Vec<LaneId>,
        lane_boundaries: Vec<f64>,
        interval_lanes: Vec<LaneId>,
        merge_zone: Option<(f64, f64)>,
    ) -> Result<Self> {
        let site = SiteProfile {
            site_id,
            raw_unit,
            lane_roles,
            lane_order,
            lane_boundaries,
            interval_lanes,
            merge_zone,
        };
        site.check()?;
        Ok(site)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("site profile: {m}")));
        if self.lane_boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("lane_boundaries must be strictly increasing".into());
        }
        if self.lane_boundaries.len() != self.interval_lanes.len() + 1 {
            return bad(format!(
                "{} boundaries for {} lanes",
                self.lane_boundaries.len(),
                self.interval_lanes.len()
            ));
        }
        if self.lane_order.is_empty() {
            return bad("lane_order is empty".into());
        }
        for (i, lane) in self.lane_order.iter().enumerate() {
            let want = if i + 1 == self.lane_order.len() {
                LaneRole::OutermostMainline
            } else {
                LaneRole::Mainline
            };
            if self.lane_roles.get(lane) != Some(&want) {
                return bad(format!("lane {lane} in lane_order must have role {want:?}"));
            }
        }
        let mainline = self.lane_roles.values().filter(|r| r.is_mainline()).count();
        if mainline != self.lane_order.len() {
            return bad("every mainline lane must appear in lane_order".into());
        }
        if let Some(lane) = self.interval_lanes.iter().find(|l| !self.lane_roles.contains_key(l)) {
            return bad(format!("interval lane {lane} has no role"));
        }
        if let Some((a, b)) = self.merge_zone {
            if !(b > a) {
                return bad("merge_zone must be a non-empty interval".into());
            }
        }
        Ok(())
    }

    /// Exactly one on-ramp lane, as merge analysis requires.
    pub fn supports_merge_analysis(&self) -> bool {
        self.lane_roles.values().filter(|r| **r == LaneRole::Onramp).count() == 1
    }

    pub fn contains_lane(&self, lane: LaneId) -> bool {
        self.lane_roles.contains_key(&lane)
    }

    pub fn role(&self, lane: LaneId) -> Option<LaneRole> {
        self.lane_roles.get(&lane).copied()
    }

    pub fn outermost_lane(&self) -> LaneId {
        *self.lane_order.last().expect("validated non-empty")
    }

    /// Position in `lane_order`; 0 is the innermost lane.
    pub fn mainline_rank(&self, lane: LaneId) -> Option<usize> {
        self.lane_order.iter().position(|l| *l == lane)
    }

    /// Geometric lane lookup on right-closed intervals: a point on an interior
    /// boundary belongs to the lower-indexed interval. The outer edge of the
    /// first interval is inclusive.
    pub fn lane_for_x(&self, x: f64) -> LaneId {
        let b = &self.lane_boundaries;
        if !x.is_finite() || b.is_empty() || x < b[0] || x > b[b.len() - 1] {
            return LaneId::UNKNOWN;
        }
        let i = b.partition_point(|edge| *edge < x).saturating_sub(1);
        self.interval_lanes[i.min(self.interval_lanes.len() - 1)]
    }

    /// Lateral center of a lane's interval, when the lane has one.
    pub fn lane_center(&self, lane: LaneId) -> Option<f64> {
        let i = self.interval_lanes.iter().position(|l| *l == lane)?;
        Some(0.5 * (self.lane_boundaries[i] + self.lane_boundaries[i + 1]))
    }

    /// Direction of a move between two lanes. Ramp and auxiliary lanes lie on
    /// the shoulder side of the outermost mainline lane.
    pub fn direction(&self, from: LaneId, to: LaneId) -> LateralDirection {
        use LateralDirection::*;
        match (self.mainline_rank(from), self.mainline_rank(to)) {
            (Some(a), Some(b)) => return if b < a { TowardMedian } else { TowardShoulder },
            (None, Some(_)) if self.contains_lane(from) => return TowardMedian,
            (Some(_), None) if self.contains_lane(to) => return TowardShoulder,
            _ => {}
        }
        let pos = |l: LaneId| self.interval_lanes.iter().position(|x| *x == l);
        let median_low = match (pos(self.lane_order[0]), pos(self.outermost_lane())) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        };
        let (a, b) = match (pos(from), pos(to)) {
            (Some(a), Some(b)) => (a as i64, b as i64),
            // NGSIM numbers lanes from the median outward.
            _ => (from.0 as i64, to.0 as i64),
        };
        if (b < a) == median_low {
            TowardMedian
        } else {
            TowardShoulder
        }
    }

    /// A mainline lane nearer the median than `from`.
    pub fn is_faster_lane(&self, from: LaneId, to: LaneId) -> bool {
        matches!(
            (self.mainline_rank(from), self.mainline_rank(to)),
            (Some(a), Some(b)) if b < a
        )
    }

    pub fn in_merge_zone(&self, y: f64) -> bool {
        self.merge_zone.is_none_or(|(a, b)| y >= a && y <= b)
    }

    /// US-101 (Hollywood Freeway) study area: five mainline lanes, auxiliary
    /// lane 6, on-ramp 7 and off-ramp 8. Ramp and auxiliary lanes share the
    /// lateral band beyond lane 5, which maps to lane 6 geometrically.
    /// Lane edges assume 12 ft lanes from the left road edge.
    pub fn us101() -> Self {
        let mut roles = BTreeMap::new();
        for l in 1..=4 {
            roles.insert(LaneId(l), LaneRole::Mainline);
        }
        roles.insert(LaneId(5), LaneRole::OutermostMainline);
        roles.insert(LaneId(6), LaneRole::Auxiliary);
        roles.insert(LaneId(7), LaneRole::Onramp);
        roles.insert(LaneId(8), LaneRole::Offramp);
        SiteProfile::new(
            SiteId::Us101,
            RawUnit::Feet,
            roles,
            (1..=5).map(LaneId).collect(),
            (0..=6).map(|i| i as f64 * 12.0 * FEET_TO_METERS).collect(),
            (1..=6).map(LaneId).collect(),
            Some((0.0, 2100.0 * FEET_TO_METERS)),
        )
        .expect("preset is valid")
    }

    /// I-80 (Emeryville) study area: six mainline lanes (lane 1 is the HOV
    /// lane) and on-ramp lane 7.
    pub fn i80() -> Self {
        let mut roles = BTreeMap::new();
        for l in 1..=5 {
            roles.insert(LaneId(l), LaneRole::Mainline);
        }
        roles.insert(LaneId(6), LaneRole::OutermostMainline);
        roles.insert(LaneId(7), LaneRole::Onramp);
        SiteProfile::new(
            SiteId::I80,
            RawUnit::Feet,
            roles,
            (1..=6).map(LaneId).collect(),
            (0..=7).map(|i| i as f64 * 12.0 * FEET_TO_METERS).collect(),
            (1..=7).map(LaneId).collect(),
            Some((0.0, 1650.0 * FEET_TO_METERS)),
        )
        .expect("preset is valid")
    }

    /// Three 3.7 m mainline lanes (1 innermost) plus on-ramp lane 4 on the
    /// shoulder side; metric units. Used by the synthetic generators.
    pub fn synthetic() -> Self {
        let mut roles = BTreeMap::new();
        roles.insert(LaneId(1), LaneRole::Mainline);
        roles.insert(LaneId(2), LaneRole::Mainline);
        roles.insert(LaneId(3), LaneRole::OutermostMainline);
        roles.insert(LaneId(4), LaneRole::Onramp);
        SiteProfile::new(
            SiteId::Custom("SYNTH".into()),
            RawUnit::Meters,
            roles,
            vec![LaneId(1), LaneId(2), LaneId(3)],
            vec![0.0, 3.7, 7.4, 11.1, 14.8],
            (1..=4).map(LaneId).collect(),
            None,
        )
        .expect("preset is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.parse::<SiteId>().ok()? {
            SiteId::Us101 => Some(Self::us101()),
            SiteId::I80 => Some(Self::i80()),
            SiteId::Custom(n) if n.eq_ignore_ascii_case("synth") => Some(Self::synthetic()),
            SiteId::Custom(_) => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SiteProfileFile = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        let mut roles = BTreeMap::new();
        for (k, v) in file.lane_roles {
            let lane: i32 = k
                .trim()
                .parse()
                .map_err(|_| Error::Toml(format!("lane_roles key {k:?} is not a lane number")))?;
            roles.insert(LaneId(lane), v);
        }
        let interval_lanes = match file.interval_lanes {
            Some(l) => l.into_iter().map(LaneId).collect(),
            None => (1..file.lane_boundaries_m.len() as i32).map(LaneId).collect(),
        };
        SiteProfile::new(
            file.site_id.parse().unwrap(),
            file.raw_unit,
            roles,
            file.lane_order.into_iter().map(LaneId).collect(),
            file.lane_boundaries_m,
            interval_lanes,
            file.merge_zone_m.map(|[a, b]| (a, b)),
        )
    }

    pub fn to_toml_string(&self) -> String {
        let file = SiteProfileFile {
            site_id: self.site_id.to_string(),
            raw_unit: self.raw_unit,
            lane_order: self.lane_order.iter().map(|l| l.0).collect(),
            lane_boundaries_m: self.lane_boundaries.clone(),
            interval_lanes: Some(self.interval_lanes.iter().map(|l| l.0).collect()),
            merge_zone_m: self.merge_zone.map(|(a, b)| [a, b]),
            lane_roles: self
                .lane_roles
                .iter()
                .map(|(k, v)| (k.0.to_string(), *v))
                .collect(),
        };
        toml::to_string(&file).expect("site profile serializes")
    }

    /// Loads a profile file, or a preset when `name_or_path` names one (`US101`, `I80`, `synth`).
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(site) = Self::preset(name_or_path) {
            if !Path::new(name_or_path).exists() {
                return Ok(site);
            }
        }
        let text = std::fs::read_to_string(name_or_path)?;
        Self::from_toml_str(&text)
    }
}
