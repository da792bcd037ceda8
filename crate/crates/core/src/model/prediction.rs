use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Point, TimeKey, VehicleId};
use crate::error::{Error, Result};

/// Output rate of prediction models.
pub const PREDICTION_HZ: f64 = 2.5;
/// Spacing of predicted points (s).
pub const STEP_DT: f64 = 0.4;
/// Future points per predicted trajectory (anchor-relative 0.4 .. 4.8 s).
pub const HORIZON_STEPS: usize = 12;
/// History samples handed to a model: 3 s at 2.5 Hz, anchor included.
pub const HISTORY_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMode {
    pub probability: f64,
    /// Future positions at anchor + 0.4 s · k, k = 1..=12.
    pub points: Vec<Point>,
}

/// A model's output for one vehicle at one anchor time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInstance {
    pub vehicle_id: VehicleId,
    /// Time of the last history sample.
    pub anchor_t: f64,
    /// Naturalistic position at the anchor, kept so a predicted path has a starting lane.
    pub anchor: Point,
    pub modes: Vec<PredictionMode>,
}

impl PredictionInstance {
    pub fn key(&self) -> (VehicleId, TimeKey) {
        (self.vehicle_id, TimeKey::from_secs(self.anchor_t))
    }

    /// Time of future step `k` (1-based).
    pub fn step_time(&self, k: usize) -> f64 {
        self.anchor_t + STEP_DT * k as f64
    }

    /// Rescales mode probabilities to sum to one. All-zero probabilities
    /// become uniform.
    pub fn normalize(&mut self) {
        let total: f64 = self.modes.iter().map(|m| m.probability).sum();
        let n = self.modes.len() as f64;
        for m in &mut self.modes {
            m.probability = if total > 0.0 { m.probability / total } else { 1.0 / n };
        }
    }
}

/// Mode with maximal probability; ties go to the lowest index.
pub fn most_likely_mode(instance: &PredictionInstance) -> Result<&PredictionMode> {
    let mut best: Option<&PredictionMode> = None;
    for m in &instance.modes {
        if best.is_none_or(|b| m.probability > b.probability) {
            best = Some(m);
        }
    }
    best.ok_or(Error::NoModes)
}

/// Model outputs keyed by `(vehicle, anchor)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub instances: BTreeMap<(VehicleId, TimeKey), PredictionInstance>,
}

impl PredictionSet {
    pub fn insert(&mut self, instance: PredictionInstance) {
        self.instances.insert(instance.key(), instance);
    }

    pub fn get(&self, vehicle: VehicleId, anchor_t: f64) -> Option<&PredictionInstance> {
        self.instances.get(&(vehicle, TimeKey::from_secs(anchor_t)))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredictionInstance> {
        self.instances.values()
    }
}

impl FromIterator<PredictionInstance> for PredictionSet {
    fn from_iter<I: IntoIterator<Item = PredictionInstance>>(iter: I) -> Self {
        let mut set = PredictionSet::default();
        for i in iter {
            set.insert(i);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn instance(probs: &[f64]) -> PredictionInstance {
        PredictionInstance {
            vehicle_id: VehicleId(1),
            anchor_t: 0.0,
            anchor: Point::new(0.0, 0.0),
            modes: probs
                .iter()
                .map(|&p| PredictionMode {
                    probability: p,
                    points: vec![],
                })
                .collect(),
        }
    }

    fn argmax(i: &PredictionInstance) -> usize {
        let best = most_likely_mode(i).unwrap();
        i.modes.iter().position(|m| std::ptr::eq(m, best)).unwrap()
    }

    #[test]
    fn picks_highest_probability() {
        assert_eq!(argmax(&instance(&[0.2, 0.7, 0.1])), 1);
        assert_eq!(argmax(&instance(&[0.5, 0.5])), 0);
        assert_eq!(argmax(&instance(&[1.0])), 0);
    }

    #[test]
    fn no_modes_is_an_error() {
        assert!(matches!(most_likely_mode(&instance(&[])), Err(Error::NoModes)));
    }

    #[test]
    fn normalization() {
        let mut i = instance(&[2.0, 2.0]);
        i.normalize();
        assert_eq!(i.modes[0].probability, 0.5);
        assert_eq!(i.modes[1].probability, 0.5);
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_rescaling(
            probs in prop::collection::vec(0.0f64..1.0, 1..8),
            k in 0.01f64..100.0,
        ) {
            let a = instance(&probs);
            let scaled: Vec<f64> = probs.iter().map(|p| p * k).collect();
            let b = instance(&scaled);
            // Rescaling can merge near-ties through rounding; compare only clear winners.
            let mut sorted = probs.clone();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            prop_assume!(sorted.len() == 1 || sorted[0] - sorted[1] > 1e-9);
            prop_assert_eq!(argmax(&a), argmax(&b));
        }
    }
}
