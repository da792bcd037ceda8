use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::events::{recorded_longitudinal, Path};
use crate::ingest::Frame;
use crate::model::{most_likely_mode, Dataset, PredictionSet, VehicleId};

/// Where outcome trajectories come from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceTag {
    Naturalistic,
    Model(String),
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTag::Naturalistic => f.write_str("naturalistic"),
            SourceTag::Model(name) => write!(f, "model:{name}"),
        }
    }
}

impl std::str::FromStr for SourceTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naturalistic" => Ok(SourceTag::Naturalistic),
            _ => s
                .strip_prefix("model:")
                .map(|n| SourceTag::Model(n.to_string()))
                .ok_or_else(|| format!("bad source tag {s:?}")),
        }
    }
}

impl Serialize for SourceTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Supplies outcome trajectories for a vehicle from an anchor time.
///
/// Conditions are always measured on recorded history; only these
/// trajectories differ between sources.
pub trait TrajectorySource: Sync {
    fn tag(&self) -> SourceTag;

    /// Trajectory over the prediction horizon, on the 0.4 s grid from the anchor.
    fn path(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Path>;

    /// Longitudinal trajectory used to decide pass order.
    fn longitudinal(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Vec<(f64, f64)>>;
}

/// Recorded trajectories.
#[derive(Debug, Clone, Copy)]
pub struct Naturalistic<'a> {
    pub dataset: &'a Dataset,
    /// In the global frame, path positions are global and lanes stay recorded.
    pub frame: Frame,
}

impl<'a> Naturalistic<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        Naturalistic {
            dataset,
            frame: Frame::Local,
        }
    }

    pub fn in_frame(dataset: &'a Dataset, frame: Frame) -> Self {
        Naturalistic { dataset, frame }
    }
}

impl TrajectorySource for Naturalistic<'_> {
    fn tag(&self) -> SourceTag {
        SourceTag::Naturalistic
    }

    fn path(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Path> {
        let track = self.dataset.track(vehicle)?;
        let mut path = Path::from_track(track, anchor_t, &self.dataset.site)?;
        if self.frame == Frame::Global {
            for s in &mut path.samples {
                s.p = track.global_at(s.t)?;
            }
        }
        Some(path)
    }

    fn longitudinal(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Vec<(f64, f64)>> {
        let track = self.dataset.track(vehicle)?;
        track.index_at(anchor_t)?;
        Some(recorded_longitudinal(track, anchor_t))
    }
}

/// Most-likely-mode trajectories from one prediction file.
#[derive(Debug, Clone)]
pub struct ModelSource<'a> {
    pub name: String,
    pub dataset: &'a Dataset,
    pub predictions: &'a PredictionSet,
    pub frame: Frame,
}

impl<'a> ModelSource<'a> {
    pub fn new(name: impl Into<String>, dataset: &'a Dataset, predictions: &'a PredictionSet) -> Self {
        ModelSource {
            name: name.into(),
            dataset,
            predictions,
            frame: Frame::Local,
        }
    }
}

impl TrajectorySource for ModelSource<'_> {
    fn tag(&self) -> SourceTag {
        SourceTag::Model(self.name.clone())
    }

    fn path(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Path> {
        let inst = self.predictions.get(vehicle, anchor_t)?;
        let mode = most_likely_mode(inst).ok()?;
        Some(Path::from_points(
            vehicle,
            inst.anchor_t,
            inst.anchor,
            &mode.points,
            &self.dataset.site,
        ))
    }

    fn longitudinal(&self, vehicle: VehicleId, anchor_t: f64) -> Option<Vec<(f64, f64)>> {
        self.path(vehicle, anchor_t).map(|p| p.longitudinal())
    }
}
