//! Seeded synthetic scenarios with known behavioral ground truth, and a
//! constant-velocity reference predictor.
//!
//! Every event draws from its own ChaCha stream keyed by `(seed, domain,
//! index)`, so generation is parallel and still reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Dataset, LaneId, Point, PredictionInstance, PredictionMode, PredictionSet, SiteProfile, VehicleClass,
    VehicleId, VehicleState, VehicleTrack, HORIZON_STEPS, STEP_DT,
};

const LENGTH: f64 = 4.5;
const WIDTH: f64 = 1.8;
/// Samples per merge event window (40 s).
const EVENT_WINDOW: i64 = 100;
/// Merge completion sample within an event window (10 s).
const MERGE_INDEX: i64 = 25;
/// Samples recorded per merge-event vehicle (18 s).
const EVENT_SAMPLES: i64 = 46;
/// The highway vehicle keeps its initial speed up to `t_m - 4.4 s`.
const SPEED_CHANGE_BEFORE_MERGE: i64 = 11;
/// The courtesy lane change starts at `t_m - 2.4 s`.
const COURTESY_BEFORE_MERGE: i64 = 6;
/// Spacing of highway pairs along the road (m).
const PAIR_SPACING: f64 = 1000.0;
const HIGHWAY_ID_BASE: u64 = 1_000_000;

const MERGE_STREAM: u64 = 1;
const HIGHWAY_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_events: usize,
    /// Logistic scale of P(merger first | lead time) (s). Zero gives a step.
    pub pass_first_logistic_scale: f64,
    pub courtesy_p_conflict: f64,
    pub courtesy_p_noconflict: f64,
    /// Lead times are drawn uniformly from `[-range, range]` (s).
    pub lead_time_range: f64,
    /// Look-back at which the drawn lead time holds exactly (s).
    pub condition_lookback: f64,
    pub conflict_threshold: f64,
    pub n_highway: usize,
    /// Vehicles move toward the median iff `0 < T_ttc < lc_ttc_threshold`.
    pub lc_ttc_threshold: f64,
    /// Uniform speed range for all vehicles (m/s).
    pub speed_range: [f64; 2],
    pub lane_width: f64,
    pub noise_sigma_lateral: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_events: 500,
            pass_first_logistic_scale: 0.5,
            courtesy_p_conflict: 0.6,
            courtesy_p_noconflict: 0.05,
            lead_time_range: 4.0,
            condition_lookback: 5.0,
            conflict_threshold: 1.0,
            n_highway: 500,
            lc_ttc_threshold: 3.0,
            speed_range: [9.0, 11.0],
            lane_width: 3.7,
            noise_sigma_lateral: 0.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("synth: {m}")));
        for (name, p) in [
            ("courtesy_p_conflict", self.courtesy_p_conflict),
            ("courtesy_p_noconflict", self.courtesy_p_noconflict),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        let [lo, hi] = self.speed_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("speed_range must be positive and ordered".into());
        }
        if !(self.pass_first_logistic_scale >= 0.0) {
            return bad("pass_first_logistic_scale must be non-negative".into());
        }
        if (self.condition_lookback - 5.0).abs() > 1e-9 {
            return bad("condition_lookback must be 5 s".into());
        }
        if !(self.lead_time_range > 0.0 && self.lead_time_range <= 4.0) {
            return bad("lead_time_range must be in (0, 4] s".into());
        }
        if hi * self.lead_time_range >= 50.0 {
            return bad("speed_range and lead_time_range put the pair more than 50 m apart".into());
        }
        if !(self.lc_ttc_threshold >= 0.0) || !(self.noise_sigma_lateral >= 0.0) || !(self.conflict_threshold >= 0.0) {
            return bad("thresholds and noise must be non-negative".into());
        }
        if !(self.lane_width > 0.0) {
            return bad("lane_width must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: SynthParams = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("params serialize")
    }

    /// Three mainline lanes (1 innermost) and an on-ramp lane 4 at the
    /// shoulder side.
    pub fn site(&self) -> SiteProfile {
        let mut site = SiteProfile::synthetic();
        site.lane_boundaries = (0..5).map(|i| i as f64 * self.lane_width).collect();
        site
    }
}

/// Ground truth for one merge event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeLabel {
    pub event_id: usize,
    pub merger_id: VehicleId,
    pub highway_id: VehicleId,
    pub t_m: f64,
    pub true_lead_time: f64,
    pub true_merger_first: bool,
    /// Crossing time of the highway vehicle relative to `t_m` (s).
    pub highway_delay: f64,
    pub conflict: bool,
    pub courtesy_lc: bool,
}

/// Ground truth for one highway pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighwayLabel {
    pub pair_id: usize,
    pub ego_id: VehicleId,
    pub lead_id: VehicleId,
    pub anchor_t: f64,
    pub true_ttc: f64,
    pub lane_change: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthLabels {
    pub merges: Vec<MergeLabel>,
    pub highway: Vec<HighwayLabel>,
}

fn rng_for(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | index);
    rng
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn time_of(idx: i64) -> f64 {
    idx as f64 * STEP_DT
}

fn lane_center(site: &SiteProfile, lane: i32) -> f64 {
    site.lane_center(LaneId(lane)).expect("synthetic lane")
}

struct Noise {
    normal: Option<Normal<f64>>,
}

impl Noise {
    fn new(sigma: f64) -> Self {
        Noise {
            normal: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma")),
        }
    }

    fn apply(&self, track: &mut VehicleTrack, rng: &mut ChaCha8Rng) {
        if let Some(n) = &self.normal {
            for s in &mut track.states {
                s.x += n.sample(rng);
            }
        }
    }
}

fn merge_event(params: &SynthParams, site: &SiteProfile, k: usize) -> (VehicleTrack, VehicleTrack, MergeLabel) {
    let mut rng = rng_for(params.seed, MERGE_STREAM, k as u64);
    let [lo, hi] = params.speed_range;
    let v = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let r = params.lead_time_range;
    let lead = rng.random_range(-r..r);
    let p_first = if params.pass_first_logistic_scale > 0.0 {
        sigmoid(lead / params.pass_first_logistic_scale)
    } else if lead > 0.0 {
        1.0
    } else {
        0.0
    };
    let merger_first = rng.random::<f64>() < p_first;
    let conflict = lead.abs() <= params.conflict_threshold;
    let p_lc = if conflict {
        params.courtesy_p_conflict
    } else {
        params.courtesy_p_noconflict
    };
    let courtesy_lc = rng.random::<f64>() < p_lc;
    // Crossing delay of the highway vehicle after t_m: the lead time itself
    // when the outcome agrees with it, half a second the other way otherwise.
    let delay = match (merger_first, lead > 0.0) {
        (true, true) | (false, false) => lead,
        (true, false) => 0.5,
        (false, true) => -0.5,
    };

    let base = EVENT_WINDOW * k as i64;
    let t_m = time_of(base + MERGE_INDEX);
    let merger_id = VehicleId(2 * k as u64 + 1);
    let highway_id = VehicleId(2 * k as u64 + 2);

    let mut merger = VehicleTrack::new(merger_id, VehicleClass::Auto, LENGTH, WIDTH);
    merger.states = (0..EVENT_SAMPLES)
        .map(|i| {
            let lane = if i < MERGE_INDEX { 4 } else { 3 };
            VehicleState::new(time_of(base + i), lane_center(site, lane), v * time_of(i), LaneId(lane))
        })
        .collect();
    let merge_point = merger.states[MERGE_INDEX as usize].y;

    // At the conditioning look-back both vehicles drive at v and the highway
    // vehicle is `v * (lookback + lead)` short of the merge point.
    let y0 = merge_point - v * (time_of(MERGE_INDEX) + lead);
    let change = MERGE_INDEX - SPEED_CHANGE_BEFORE_MERGE;
    let y_change = y0 + v * time_of(change);
    let v_after = (merge_point - y_change) / (time_of(SPEED_CHANGE_BEFORE_MERGE) + delay);
    let lc_index = MERGE_INDEX - COURTESY_BEFORE_MERGE;
    let mut highway = VehicleTrack::new(highway_id, VehicleClass::Auto, LENGTH, WIDTH);
    highway.states = (0..EVENT_SAMPLES)
        .map(|i| {
            let y = if i <= change {
                y0 + v * time_of(i)
            } else {
                y_change + v_after * (time_of(i) - time_of(change))
            };
            let lane = if courtesy_lc && i >= lc_index { 2 } else { 3 };
            VehicleState::new(time_of(base + i), lane_center(site, lane), y, LaneId(lane))
        })
        .collect();

    let noise = Noise::new(params.noise_sigma_lateral);
    let mut nrng = rng_for(params.seed, NOISE_STREAM, k as u64);
    noise.apply(&mut merger, &mut nrng);
    noise.apply(&mut highway, &mut nrng);

    let label = MergeLabel {
        event_id: k,
        merger_id,
        highway_id,
        t_m,
        true_lead_time: lead,
        true_merger_first: merger_first,
        highway_delay: delay,
        conflict,
        courtesy_lc,
    };
    (merger, highway, label)
}

/// Sample a time to collision uniformly inside a randomly chosen bin of
/// `edges`, at least `pad` from either edge. Infinite outer bins are
/// truncated to 10 s beyond their finite edge.
fn sample_ttc(rng: &mut ChaCha8Rng, edges: &[f64], pad: f64) -> f64 {
    let i = rng.random_range(0..edges.len() - 1);
    let lo = if edges[i].is_finite() { edges[i] } else { edges[i + 1] - 10.0 };
    let hi = if edges[i + 1].is_finite() { edges[i + 1] } else { edges[i] + 10.0 };
    rng.random_range(lo + pad..hi - pad)
}

/// Bin edges the highway generator samples from; the analysis defaults.
pub const TTC_SAMPLING_EDGES: [f64; 11] = [
    f64::NEG_INFINITY,
    -10.0,
    -5.0,
    -2.0,
    0.0,
    1.0,
    2.0,
    3.0,
    5.0,
    10.0,
    f64::INFINITY,
];

fn highway_pair(params: &SynthParams, site: &SiteProfile, j: usize, base: i64) -> (VehicleTrack, VehicleTrack, HighwayLabel) {
    let mut rng = rng_for(params.seed, HIGHWAY_STREAM, j as u64);
    let [lo, hi] = params.speed_range;
    let v_e = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let ttc = sample_ttc(&mut rng, &TTC_SAMPLING_EDGES, 0.05);
    let gap = rng.random_range(10.0..40.0);
    let v_f = v_e - gap / ttc;
    let lane_change = ttc > 0.0 && ttc < params.lc_ttc_threshold;

    let anchor = 7;
    let y0 = PAIR_SPACING * j as f64;
    let ego_id = VehicleId(HIGHWAY_ID_BASE + 2 * j as u64 + 1);
    let lead_id = VehicleId(HIGHWAY_ID_BASE + 2 * j as u64 + 2);
    let mut ego = VehicleTrack::new(ego_id, VehicleClass::Auto, LENGTH, WIDTH);
    ego.states = (0..anchor + HORIZON_STEPS as i64 + 2)
        .map(|i| {
            let lane = if lane_change && i > anchor { 1 } else { 2 };
            VehicleState::new(time_of(base + i), lane_center(site, lane), y0 + v_e * time_of(i), LaneId(lane))
        })
        .collect();
    let y_anchor = y0 + v_e * time_of(anchor) + gap;
    let mut lead = VehicleTrack::new(lead_id, VehicleClass::Auto, LENGTH, WIDTH);
    lead.states = (0..=anchor + 1)
        .map(|i| {
            let y = y_anchor + v_f * (time_of(i) - time_of(anchor));
            VehicleState::new(time_of(base + i), lane_center(site, 2), y, LaneId(2))
        })
        .collect();

    let noise = Noise::new(params.noise_sigma_lateral);
    let mut nrng = rng_for(params.seed, NOISE_STREAM, (1 << 40) | j as u64);
    noise.apply(&mut ego, &mut nrng);
    noise.apply(&mut lead, &mut nrng);

    let label = HighwayLabel {
        pair_id: j,
        ego_id,
        lead_id,
        anchor_t: time_of(base + anchor),
        true_ttc: ttc,
        lane_change,
    };
    (ego, lead, label)
}

/// Merge events only: one merger and one highway vehicle per 40 s window.
pub fn generate_merge_dataset(params: &SynthParams) -> Result<(Dataset, Vec<MergeLabel>)> {
    params.validate()?;
    let site = params.site();
    let parts: Vec<_> = (0..params.n_events)
        .into_par_iter()
        .map(|k| merge_event(params, &site, k))
        .collect();
    let mut d = Dataset::new(site, 1.0 / STEP_DT);
    let mut labels = Vec::with_capacity(parts.len());
    for (m, h, l) in parts {
        d.insert(m);
        d.insert(h);
        labels.push(l);
    }
    Ok((d, labels))
}

/// Car-following pairs only, spaced along the road in a single time window
/// starting at `base` samples.
fn highway_pairs(params: &SynthParams, site: &SiteProfile, base: i64) -> Vec<(VehicleTrack, VehicleTrack, HighwayLabel)> {
    (0..params.n_highway)
        .into_par_iter()
        .map(|j| highway_pair(params, site, j, base))
        .collect()
}

pub fn generate_highway_dataset(params: &SynthParams) -> Result<(Dataset, Vec<HighwayLabel>)> {
    params.validate()?;
    let site = params.site();
    let mut d = Dataset::new(site.clone(), 1.0 / STEP_DT);
    let mut labels = Vec::new();
    for (e, l, lab) in highway_pairs(params, &site, 0) {
        d.insert(e);
        d.insert(l);
        labels.push(lab);
    }
    Ok((d, labels))
}

/// Merge events followed, in a later time window, by highway pairs.
pub fn generate_dataset(params: &SynthParams) -> Result<(Dataset, SynthLabels)> {
    let (mut d, merges) = generate_merge_dataset(params)?;
    let base = EVENT_WINDOW * (params.n_events as i64 + 1);
    let site = d.site.clone();
    let mut highway = Vec::new();
    for (e, l, lab) in highway_pairs(params, &site, base) {
        d.insert(e);
        d.insert(l);
        highway.push(lab);
    }
    Ok((d, SynthLabels { merges, highway }))
}

/// Writes labels as CSV: one `kind`-tagged row per merge event or highway pair.
pub fn write_labels<W: std::io::Write>(labels: &SynthLabels, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "kind",
        "event_id",
        "ego_id",
        "other_id",
        "t",
        "true_condition",
        "true_outcome",
        "conflict",
        "courtesy_lc",
        "highway_delay",
    ])?;
    for m in &labels.merges {
        w.write_record([
            "merge".to_string(),
            m.event_id.to_string(),
            m.merger_id.to_string(),
            m.highway_id.to_string(),
            m.t_m.to_string(),
            m.true_lead_time.to_string(),
            m.true_merger_first.to_string(),
            m.conflict.to_string(),
            m.courtesy_lc.to_string(),
            m.highway_delay.to_string(),
        ])?;
    }
    for h in &labels.highway {
        w.write_record([
            "highway".to_string(),
            h.pair_id.to_string(),
            h.ego_id.to_string(),
            h.lead_id.to_string(),
            h.anchor_t.to_string(),
            h.true_ttc.to_string(),
            h.lane_change.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A vehicle holding `lane` for `n` samples, lateral position jittered by
/// Gaussian noise. Lane labels are left unknown so lanes come from `x`.
pub fn lane_keeping_track(
    id: VehicleId,
    site: &SiteProfile,
    lane: LaneId,
    n: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> VehicleTrack {
    let x0 = site.lane_center(lane).expect("lane in profile");
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma"));
    let mut t = VehicleTrack::new(id, VehicleClass::Auto, LENGTH, WIDTH);
    t.states = (0..n)
        .map(|i| {
            let dx = noise.map(|d| d.sample(rng)).unwrap_or(0.0);
            VehicleState::new(time_of(i as i64), x0 + dx, 10.0 * time_of(i as i64), LaneId::UNKNOWN)
        })
        .collect();
    t
}

/// Moves every sample from `from_index` on by the distance between the
/// centers of the current lane and `to`.
pub fn inject_lane_change(track: &mut VehicleTrack, site: &SiteProfile, from_index: usize, to: LaneId) {
    let Some(first) = track.states.first() else { return };
    let from_x = site.lane_center(site.lane_for_x(first.x)).unwrap_or(first.x);
    let shift = site.lane_center(to).expect("lane in profile") - from_x;
    for s in &mut track.states[from_index..] {
        s.x += shift;
    }
}

/// Extrapolates the last history position at the speed of the final
/// segment; one mode with probability 1.
pub fn constant_velocity_predict(vehicle_id: VehicleId, history: &[(f64, Point)]) -> Result<PredictionInstance> {
    let [.., (t0, p0), (t1, p1)] = history else {
        return Err(Error::InsufficientSamples);
    };
    let dt = t1 - t0;
    let (vx, vy) = ((p1.x - p0.x) / dt, (p1.y - p0.y) / dt);
    Ok(PredictionInstance {
        vehicle_id,
        anchor_t: *t1,
        anchor: *p1,
        modes: vec![PredictionMode {
            probability: 1.0,
            points: (1..=HORIZON_STEPS)
                .map(|k| {
                    let h = STEP_DT * k as f64;
                    Point::new(p1.x + vx * h, p1.y + vy * h)
                })
                .collect(),
        }],
    })
}

/// "Predictions" copied from the recorded tracks, for anchors the track
/// covers through the whole horizon.
pub fn ground_truth_predictions(dataset: &Dataset, anchors: &[(VehicleId, f64)]) -> PredictionSet {
    anchors
        .iter()
        .filter_map(|&(id, t)| {
            let track = dataset.track(id)?;
            let anchor = track.position_at(t)?;
            let points = (1..=HORIZON_STEPS)
                .map(|k| track.position_at(t + STEP_DT * k as f64))
                .collect::<Option<Vec<Point>>>()?;
            Some(PredictionInstance {
                vehicle_id: id,
                anchor_t: t,
                anchor,
                modes: vec![PredictionMode {
                    probability: 1.0,
                    points,
                }],
            })
        })
        .collect()
}

/// Same predictions with every predicted point shifted by `(dx, dy)`.
pub fn offset_predictions(set: &PredictionSet, dx: f64, dy: f64) -> PredictionSet {
    set.iter()
        .map(|inst| {
            let mut inst = inst.clone();
            for m in &mut inst.modes {
                for p in &mut m.points {
                    p.x += dx;
                    p.y += dy;
                }
            }
            inst
        })
        .collect()
}
