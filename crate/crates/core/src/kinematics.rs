//! First-order kinematics: speed, distance to a reference point, merging lead
//! time and time to collision.
//!
//! Speeds are always re-estimated from positions with the same finite
//! difference, whether the positions are recorded or predicted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VehicleTrack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicSnapshot {
    pub t: f64,
    /// Longitudinal position (m).
    pub y: f64,
    /// Longitudinal speed (m/s).
    pub v: f64,
    /// Distance to the reference point, `y_ref - y`; non-negative while upstream.
    pub d: f64,
}

impl KinematicSnapshot {
    pub fn new(t: f64, y: f64, v: f64, reference_y: f64) -> Self {
        KinematicSnapshot {
            t,
            y,
            v,
            d: reference_y - y,
        }
    }
}

/// Longitudinal speed at sample time `t`: central difference in the interior,
/// one-sided at either end of the track.
pub fn estimate_speed(track: &VehicleTrack, t: f64) -> Result<f64> {
    if track.states.len() < 2 {
        return Err(Error::InsufficientSamples);
    }
    let i = track.index_at(t).ok_or(Error::NotASampleTime(t))?;
    Ok(speed_at_index(track, i))
}

fn speed_at_index(track: &VehicleTrack, i: usize) -> f64 {
    let s = &track.states;
    let (a, b) = if i == 0 {
        (0, 1)
    } else if i + 1 == s.len() {
        (i - 1, i)
    } else {
        (i - 1, i + 1)
    };
    (s[b].y - s[a].y) / (s[b].t - s[a].t)
}

/// Speed at any time within the track: the sample estimate at sample times,
/// linearly interpolated between neighbouring sample estimates otherwise.
pub fn speed_at(track: &VehicleTrack, t: f64) -> Result<f64> {
    if track.states.len() < 2 {
        return Err(Error::InsufficientSamples);
    }
    if !track.covers(t) {
        return Err(Error::NotASampleTime(t));
    }
    if let Some(i) = track.index_at(t) {
        return Ok(speed_at_index(track, i));
    }
    let i = track.index_at_or_before(t).ok_or(Error::NotASampleTime(t))?;
    let (a, b) = (&track.states[i], &track.states[i + 1]);
    let w = (t - a.t) / (b.t - a.t);
    let (va, vb) = (speed_at_index(track, i), speed_at_index(track, i + 1));
    Ok(va + w * (vb - va))
}

/// Position, speed and distance to `reference_y` at time `t`.
pub fn snapshot(track: &VehicleTrack, t: f64, reference_y: f64) -> Result<KinematicSnapshot> {
    let p = track.position_at(t).ok_or(Error::NotASampleTime(t))?;
    let v = speed_at(track, t)?;
    Ok(KinematicSnapshot::new(t, p.y, v, reference_y))
}

/// Why a pair was left out of lead-time analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadTimeExclusion {
    StoppedVehicle,
    PastMergePoint,
}

/// Merging lead time: highway time-to-arrival minus merger time-to-arrival.
/// Positive means the merging vehicle kinematically leads.
pub fn lead_time(
    merger: &KinematicSnapshot,
    highway: &KinematicSnapshot,
    stopped_speed: f64,
) -> Result<f64, LeadTimeExclusion> {
    if merger.v <= stopped_speed || highway.v <= stopped_speed {
        return Err(LeadTimeExclusion::StoppedVehicle);
    }
    if merger.d < 0.0 || highway.d < 0.0 {
        return Err(LeadTimeExclusion::PastMergePoint);
    }
    Ok(highway.d / highway.v - merger.d / merger.v)
}

/// Time to collision with the vehicle ahead, `gap / closing speed`.
///
/// Returns `+inf` when the closing speed is below `speed_eps`; a negative
/// value means the gap is opening.
pub fn time_to_collision(
    ego: &KinematicSnapshot,
    lead: &KinematicSnapshot,
    speed_eps: f64,
) -> Result<f64> {
    let gap = lead.y - ego.y;
    if gap <= 0.0 {
        return Err(Error::NotLeadVehicle);
    }
    let closing = ego.v - lead.v;
    if closing.abs() < speed_eps {
        return Ok(f64::INFINITY);
    }
    Ok(gap / closing)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::{LaneId, VehicleClass, VehicleId, VehicleState};

    fn track(ys: &[f64], dt: f64) -> VehicleTrack {
        let mut t = VehicleTrack::new(VehicleId(1), VehicleClass::Auto, 4.5, 1.8);
        t.states = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| VehicleState::new(i as f64 * dt, 0.0, y, LaneId(1)))
            .collect();
        t
    }

    fn snap(d: f64, v: f64) -> KinematicSnapshot {
        KinematicSnapshot::new(0.0, -d, v, 0.0)
    }

    #[test]
    fn central_and_one_sided_differences() {
        let t = track(&[0.0, 8.0, 16.0], 0.4);
        assert!((estimate_speed(&t, 0.4).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(estimate_speed(&track(&[5.0, 5.0, 5.0], 0.4), 0.4).unwrap(), 0.0);
        assert!((estimate_speed(&track(&[0.0, 8.0], 0.4), 0.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(matches!(
            estimate_speed(&track(&[1.0], 0.4), 0.0),
            Err(Error::InsufficientSamples)
        ));
        assert!(matches!(estimate_speed(&t, 0.2), Err(Error::NotASampleTime(_))));
    }

    #[test]
    fn interpolated_speed_between_samples() {
        let t = track(&[0.0, 4.0, 12.0, 24.0], 0.4);
        // Sample estimates at 0.4 and 0.8 s: 15 and 25 m/s.
        assert!((speed_at(&t, 0.6).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn lead_time_examples() {
        assert_eq!(lead_time(&snap(60.0, 20.0), &snap(100.0, 20.0), 0.1), Ok(2.0));
        assert_eq!(lead_time(&snap(60.0, 20.0), &snap(60.0, 20.0), 0.1), Ok(0.0));
        assert_eq!(lead_time(&snap(60.0, 20.0), &snap(40.0, 20.0), 0.1), Ok(-1.0));
        assert_eq!(
            lead_time(&snap(60.0, 0.05), &snap(40.0, 20.0), 0.1),
            Err(LeadTimeExclusion::StoppedVehicle)
        );
        assert_eq!(
            lead_time(&snap(-1.0, 10.0), &snap(40.0, 20.0), 0.1),
            Err(LeadTimeExclusion::PastMergePoint)
        );
    }

    #[test]
    fn ttc_examples() {
        let ego = |v| KinematicSnapshot::new(0.0, 0.0, v, 0.0);
        let lead = |v| KinematicSnapshot::new(0.0, 30.0, v, 0.0);
        assert_eq!(time_to_collision(&ego(25.0), &lead(20.0), 0.01).unwrap(), 6.0);
        assert_eq!(time_to_collision(&ego(20.0), &lead(20.0), 0.01).unwrap(), f64::INFINITY);
        assert_eq!(time_to_collision(&ego(20.0), &lead(25.0), 0.01).unwrap(), -6.0);
        assert!(matches!(
            time_to_collision(&lead(20.0), &ego(20.0), 0.01),
            Err(Error::NotLeadVehicle)
        ));
    }

    proptest! {
        #[test]
        fn lead_time_antisymmetric(dm in 0.0f64..200.0, vm in 0.2f64..40.0, dh in 0.0f64..200.0, vh in 0.2f64..40.0) {
            let a = lead_time(&snap(dm, vm), &snap(dh, vh), 0.1).unwrap();
            let b = lead_time(&snap(dh, vh), &snap(dm, vm), 0.1).unwrap();
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn lead_time_scale_invariant(dm in 0.0f64..200.0, vm in 0.2f64..40.0, dh in 0.0f64..200.0, vh in 0.2f64..40.0, k in 0.1f64..10.0) {
            let a = lead_time(&snap(dm, vm), &snap(dh, vh), 0.0).unwrap();
            let b = lead_time(&snap(k * dm, k * vm), &snap(k * dh, k * vh), 0.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn ttc_sign_follows_closing_speed(gap in 0.1f64..100.0, ve in 0.0f64..40.0, vf in 0.0f64..40.0) {
            prop_assume!((ve - vf).abs() >= 0.01);
            let ego = KinematicSnapshot::new(0.0, 0.0, ve, 0.0);
            let lead = KinematicSnapshot::new(0.0, gap, vf, 0.0);
            let ttc = time_to_collision(&ego, &lead, 0.01).unwrap();
            prop_assert_eq!(ttc > 0.0, ve > vf);
        }

        #[test]
        fn linear_track_speed_exact(v in -40.0f64..40.0, y0 in -500.0f64..500.0, n in 3usize..40) {
            let ys: Vec<f64> = (0..n).map(|i| y0 + v * 0.4 * i as f64).collect();
            let t = track(&ys, 0.4);
            for i in 1..n - 1 {
                let est = estimate_speed(&t, t.states[i].t).unwrap();
                prop_assert!((est - v).abs() < 1e-9);
            }
        }
    }
}
