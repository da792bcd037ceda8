use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Frame;
use crate::model::{most_likely_mode, Dataset, Point, PredictionInstance, PredictionSet, STEP_DT, TIME_EPS};

/// Horizons reported by default (s).
pub const DEFAULT_HORIZONS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseResult {
    /// `(horizon s, rmse m)`.
    pub values: Vec<(f64, f64)>,
    pub instances: usize,
    /// Instances without ground truth up to the longest horizon.
    pub excluded: usize,
}

impl RmseResult {
    pub fn at(&self, horizon: f64) -> Option<f64> {
        self.values.iter().find(|(h, _)| (h - horizon).abs() < 1e-9).map(|(_, v)| *v)
    }
}

/// Position of the most likely mode at `anchor + h`. Linear between grid
/// points (the anchor counts as step 0); beyond the last step the final
/// segment is extended.
pub fn predicted_at(instance: &PredictionInstance, h: f64) -> Result<Point> {
    let mode = most_likely_mode(instance)?;
    let pts: Vec<Point> = std::iter::once(instance.anchor).chain(mode.points.iter().copied()).collect();
    let last = pts.len() - 1;
    if last == 0 {
        return Ok(pts[0]);
    }
    let s = h / STEP_DT;
    let i = (s.floor() as usize).min(last - 1);
    let w = s - i as f64;
    let (a, b) = (pts[i], pts[i + 1]);
    Ok(Point::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)))
}

/// Root-mean-square displacement of the most likely mode from ground truth
/// at each horizon. Instances whose vehicle is not recorded through the
/// longest horizon are left out of every horizon.
pub fn rmse_by_horizon(
    predictions: &PredictionSet,
    dataset: &Dataset,
    horizons: &[f64],
    frame: Frame,
) -> Result<RmseResult> {
    let h_max = horizons.iter().copied().fold(0.0, f64::max);
    let mut sums = vec![0.0; horizons.len()];
    let (mut instances, mut excluded) = (0, 0);
    for inst in predictions.iter() {
        let Some(track) = dataset.track(inst.vehicle_id) else {
            excluded += 1;
            continue;
        };
        if track.last_t().is_none_or(|l| l + TIME_EPS < inst.anchor_t + h_max) {
            excluded += 1;
            continue;
        }
        let truth = |t: f64| match frame {
            Frame::Local => track.position_at(t),
            Frame::Global => track.global_at(t),
        };
        let mut sq = Vec::with_capacity(horizons.len());
        for &h in horizons {
            let Some(gt) = truth(inst.anchor_t + h) else { break };
            let p = predicted_at(inst, h)?;
            sq.push((p.x - gt.x).powi(2) + (p.y - gt.y).powi(2));
        }
        if sq.len() < horizons.len() {
            excluded += 1;
            continue;
        }
        for (s, v) in sums.iter_mut().zip(sq) {
            *s += v;
        }
        instances += 1;
    }
    if instances == 0 {
        return Err(Error::EmptyInstanceSet);
    }
    Ok(RmseResult {
        values: horizons
            .iter()
            .zip(sums)
            .map(|(&h, s)| (h, (s / instances as f64).sqrt()))
            .collect(),
        instances,
        excluded,
    })
}
