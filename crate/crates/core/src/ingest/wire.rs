//! Line-oriented CSV exchange with external prediction models.
//!
//! Both file kinds start with a magic line, then `#key=value` metadata lines,
//! then a CSV table with a header row.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::SceneIndex;
use crate::model::{
    Dataset, Point, PredictionInstance, PredictionMode, PredictionSet, TimeKey, VehicleId,
    HISTORY_SAMPLES, HORIZON_STEPS, STEP_DT, TIME_EPS,
};

pub const REQUEST_MAGIC: &str = "bb-req v1";
pub const PREDICTION_MAGIC: &str = "bb-pred v1";

const REQUEST_COLUMNS: [&str; 8] = ["request_id", "ego_id", "anchor_t", "role", "neighbor_id", "t", "x", "y"];
const PREDICTION_COLUMNS: [&str; 8] = [
    "request_id",
    "ego_id",
    "anchor_t",
    "mode_index",
    "mode_prob",
    "step",
    "x",
    "y",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Local,
    Global,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Local => "local",
            Frame::Global => "global",
        })
    }
}

impl std::str::FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "local" => Ok(Frame::Local),
            "global" => Ok(Frame::Global),
            other => Err(Error::Malformed(format!("unknown frame {other:?}"))),
        }
    }
}

/// Splits a wire file into its metadata and CSV body.
fn split_preamble<'a>(text: &'a str, magic: &str, path: &Path) -> Result<(BTreeMap<String, String>, &'a str)> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rest = text;
    let next_line = |rest: &mut &'a str| -> Option<&'a str> {
        if rest.is_empty() {
            return None;
        }
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        *rest = tail;
        Some(line.trim_end_matches('\r'))
    };
    match next_line(&mut rest) {
        Some(l) if l.trim() == magic => {}
        other => return Err(bad(format!("expected header {magic:?}, found {:?}", other.unwrap_or("")))),
    }
    let mut meta = BTreeMap::new();
    while rest.starts_with('#') {
        let line = next_line(&mut rest).unwrap_or("");
        let (k, v) = line[1..]
            .split_once('=')
            .ok_or_else(|| bad(format!("bad metadata line {line:?}")))?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((meta, rest))
}

fn check_columns(found: &csv::StringRecord, want: &[&str], path: &Path) -> Result<()> {
    let found: Vec<&str> = found.iter().collect();
    if found != want {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected columns {want:?}, found {found:?}"),
        });
    }
    Ok(())
}

/// Outcome of writing a request file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RequestSummary {
    pub written: usize,
    /// Anchors dropped for lack of 3 s of history.
    pub skipped: usize,
}

/// Request-file metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestMeta {
    pub config_digest: Option<String>,
    pub scenario: Option<String>,
}

/// Writes one request per distinct `(vehicle, anchor)`, numbered from 0 in
/// input order. Each carries the ego's last 8 samples and the history of
/// every vehicle within `radius` of it at the anchor.
pub fn write_prediction_requests<W: Write>(
    dataset: &Dataset,
    anchors: &[(VehicleId, f64)],
    radius: f64,
    meta: &RequestMeta,
    out: W,
) -> Result<RequestSummary> {
    let index = SceneIndex::new(dataset);
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{REQUEST_MAGIC}")?;
    if let Some(d) = &meta.config_digest {
        writeln!(out, "#config_digest={d}")?;
    }
    if let Some(s) = &meta.scenario {
        writeln!(out, "#scenario={s}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REQUEST_COLUMNS)?;

    let mut summary = RequestSummary::default();
    let mut seen = std::collections::BTreeSet::new();
    for &(ego_id, anchor_t) in anchors {
        if !seen.insert((ego_id, TimeKey::from_secs(anchor_t))) {
            continue;
        }
        let Some(ego) = dataset.track(ego_id) else {
            return Err(Error::UnknownVehicle(ego_id));
        };
        let Some(i) = ego.index_at(anchor_t).filter(|i| *i + 1 >= HISTORY_SAMPLES) else {
            summary.skipped += 1;
            log::debug!("vehicle {ego_id} at t = {anchor_t}: insufficient history, request skipped");
            continue;
        };
        let anchor_t = ego.states[i].t;
        let request_id = summary.written.to_string();
        let ego_s = ego_id.to_string();
        let anchor_s = anchor_t.to_string();
        for s in &ego.states[i + 1 - HISTORY_SAMPLES..=i] {
            w.write_record([
                request_id.as_str(),
                &ego_s,
                &anchor_s,
                "ego",
                "",
                &s.t.to_string(),
                &s.x.to_string(),
                &s.y.to_string(),
            ])?;
        }
        let window_start = anchor_t - (HISTORY_SAMPLES - 1) as f64 * STEP_DT - TIME_EPS;
        for (nid, _) in index.neighbors_within(dataset, anchor_t, ego.states[i].position(), radius, ego_id) {
            let n = dataset.track(nid).expect("indexed vehicle exists");
            let nid_s = nid.to_string();
            for s in n.states.iter().filter(|s| s.t >= window_start && s.t <= anchor_t + TIME_EPS) {
                w.write_record([
                    request_id.as_str(),
                    &ego_s,
                    &anchor_s,
                    "neighbor",
                    &nid_s,
                    &s.t.to_string(),
                    &s.x.to_string(),
                    &s.y.to_string(),
                ])?;
            }
        }
        summary.written += 1;
    }
    w.flush()?;
    if summary.skipped > 0 {
        log::warn!("{} request anchors skipped for insufficient history", summary.skipped);
    }
    Ok(summary)
}

/// One parsed request.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub request_id: u64,
    pub ego_id: VehicleId,
    pub anchor_t: f64,
    /// `(t, position)` in time order.
    pub ego: Vec<(f64, Point)>,
    pub neighbors: BTreeMap<VehicleId, Vec<(f64, Point)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestFile {
    pub meta: RequestMeta,
    pub requests: Vec<Request>,
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("")
}

fn parse_num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, names: &[&str], path: &Path) -> Result<T> {
    let raw = field(rec, i);
    raw.trim().parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: format!(
            "line {}: bad {} value {raw:?}",
            rec.position().map(|p| p.line()).unwrap_or(0),
            names[i]
        ),
    })
}

pub fn read_requests(path: &Path) -> Result<RequestFile> {
    let text = std::fs::read_to_string(path)?;
    parse_requests(&text, path)
}

pub fn parse_requests(text: &str, path: &Path) -> Result<RequestFile> {
    let (meta, body) = split_preamble(text, REQUEST_MAGIC, path)?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    check_columns(rdr.headers()?, &REQUEST_COLUMNS, path)?;
    let mut requests: Vec<Request> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: u64 = parse_num(&rec, 0, &REQUEST_COLUMNS, path)?;
        let ego_id = VehicleId(parse_num(&rec, 1, &REQUEST_COLUMNS, path)?);
        let anchor_t: f64 = parse_num(&rec, 2, &REQUEST_COLUMNS, path)?;
        let t: f64 = parse_num(&rec, 5, &REQUEST_COLUMNS, path)?;
        let p = Point::new(
            parse_num(&rec, 6, &REQUEST_COLUMNS, path)?,
            parse_num(&rec, 7, &REQUEST_COLUMNS, path)?,
        );
        if requests.last().is_none_or(|r| r.request_id != id) {
            requests.push(Request {
                request_id: id,
                ego_id,
                anchor_t,
                ego: Vec::new(),
                neighbors: BTreeMap::new(),
            });
        }
        let req = requests.last_mut().expect("just pushed");
        match field(&rec, 3) {
            "ego" => req.ego.push((t, p)),
            "neighbor" => {
                let nid = VehicleId(parse_num(&rec, 4, &REQUEST_COLUMNS, path)?);
                req.neighbors.entry(nid).or_default().push((t, p));
            }
            other => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("unknown role {other:?}"),
                })
            }
        }
    }
    Ok(RequestFile {
        meta: RequestMeta {
            config_digest: meta.get("config_digest").cloned(),
            scenario: meta.get("scenario").cloned(),
        },
        requests,
    })
}

/// Prediction-file metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMeta {
    /// Model name, reported as `model:<source>`.
    pub source: String,
    pub frame: Frame,
    pub config_digest: Option<String>,
}

/// Writes predictions; `entries` pairs each instance with its request id.
pub fn write_predictions<W: Write>(
    meta: &PredictionMeta,
    entries: &[(u64, &PredictionInstance)],
    out: W,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{PREDICTION_MAGIC}")?;
    writeln!(out, "#source={}", meta.source)?;
    writeln!(out, "#frame={}", meta.frame)?;
    if let Some(d) = &meta.config_digest {
        writeln!(out, "#config_digest={d}")?;
    }
    writeln!(out, "#dt={STEP_DT}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTION_COLUMNS)?;
    for (rid, inst) in entries {
        for (m, mode) in inst.modes.iter().enumerate() {
            for (k, p) in mode.points.iter().enumerate() {
                w.write_record([
                    rid.to_string(),
                    inst.vehicle_id.to_string(),
                    inst.anchor_t.to_string(),
                    m.to_string(),
                    mode.probability.to_string(),
                    (k + 1).to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// A parsed prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub meta: PredictionMeta,
    pub set: PredictionSet,
    /// Request id of every instance.
    pub request_ids: BTreeMap<(VehicleId, TimeKey), u64>,
    /// Instances whose probabilities did not already sum to one.
    pub renormalized: usize,
}

pub fn parse_predictions(path: &Path, dataset: &Dataset) -> Result<PredictionFile> {
    let text = std::fs::read_to_string(path)?;
    parse_predictions_str(&text, path, dataset)
}

pub fn parse_predictions_str(text: &str, path: &Path, dataset: &Dataset) -> Result<PredictionFile> {
    let (meta, body) = split_preamble(text, PREDICTION_MAGIC, path)?;
    let frame: Frame = meta.get("frame").map(|f| f.parse()).transpose()?.unwrap_or(Frame::Local);
    let source = meta
        .get("source")
        .cloned()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "model".into());
    if let Some(dt) = meta.get("dt") {
        let dt: f64 = dt.parse().map_err(|_| Error::Malformed(format!("bad dt {dt:?}")))?;
        if (dt - STEP_DT).abs() > 1e-9 {
            return Err(Error::Malformed(format!("prediction step {dt} s, expected {STEP_DT} s")));
        }
    }

    // request id -> (ego, anchor, mode -> (prob, step -> point))
    type Modes = BTreeMap<usize, (f64, BTreeMap<usize, Point>)>;
    let mut raw: BTreeMap<u64, (VehicleId, f64, Modes)> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    check_columns(rdr.headers()?, &PREDICTION_COLUMNS, path)?;
    for rec in rdr.records() {
        let rec = rec?;
        let rid: u64 = parse_num(&rec, 0, &PREDICTION_COLUMNS, path)?;
        let ego = VehicleId(parse_num(&rec, 1, &PREDICTION_COLUMNS, path)?);
        let anchor_t: f64 = parse_num(&rec, 2, &PREDICTION_COLUMNS, path)?;
        let mode: usize = parse_num(&rec, 3, &PREDICTION_COLUMNS, path)?;
        let prob: f64 = parse_num(&rec, 4, &PREDICTION_COLUMNS, path)?;
        let step: usize = parse_num(&rec, 5, &PREDICTION_COLUMNS, path)?;
        let p = Point::new(
            parse_num(&rec, 6, &PREDICTION_COLUMNS, path)?,
            parse_num(&rec, 7, &PREDICTION_COLUMNS, path)?,
        );
        if !(prob >= 0.0) {
            return Err(Error::NegativeProbability { request_id: rid, prob });
        }
        if dataset.track(ego).is_none() {
            return Err(Error::UnknownVehicle(ego));
        }
        let entry = raw.entry(rid).or_insert_with(|| (ego, anchor_t, BTreeMap::new()));
        if entry.0 != ego || TimeKey::from_secs(entry.1) != TimeKey::from_secs(anchor_t) {
            return Err(Error::Malformed(format!(
                "request {rid} names more than one (ego, anchor) pair"
            )));
        }
        let m = entry.2.entry(mode).or_insert((prob, BTreeMap::new()));
        if m.1.insert(step, p).is_some() {
            return Err(Error::Malformed(format!("request {rid} mode {mode}: step {step} repeated")));
        }
    }

    let mut set = PredictionSet::default();
    let mut request_ids = BTreeMap::new();
    let mut renormalized = 0;
    for (rid, (ego, anchor_t, modes)) in raw {
        let track = dataset.track(ego).expect("checked above");
        let anchor = match frame {
            Frame::Local => track.position_at(anchor_t),
            Frame::Global => track.global_at(anchor_t),
        }
        .ok_or_else(|| Error::Malformed(format!("request {rid}: vehicle {ego} has no {frame} position at t = {anchor_t}")))?;
        let mut inst = PredictionInstance {
            vehicle_id: ego,
            anchor_t,
            anchor,
            modes: Vec::with_capacity(modes.len()),
        };
        for (m, (prob, steps)) in modes {
            let complete = steps.len() == HORIZON_STEPS && steps.keys().copied().eq(1..=HORIZON_STEPS);
            if !complete {
                return Err(Error::HorizonMismatch {
                    request_id: rid,
                    mode: m,
                    got: steps.len(),
                    expected: HORIZON_STEPS,
                });
            }
            inst.modes.push(PredictionMode {
                probability: prob,
                points: steps.into_values().collect(),
            });
        }
        let total: f64 = inst.modes.iter().map(|m| m.probability).sum();
        if (total - 1.0).abs() > 1e-6 {
            renormalized += 1;
        }
        inst.normalize();
        if request_ids.insert(inst.key(), rid).is_some() {
            return Err(Error::Malformed(format!("request {rid} duplicates another request's (ego, anchor)")));
        }
        set.insert(inst);
    }
    if renormalized > 0 {
        log::warn!("{}: {renormalized} instances renormalized", path.display());
    }
    Ok(PredictionFile {
        meta: PredictionMeta {
            source,
            frame,
            config_digest: meta.get("config_digest").cloned(),
        },
        set,
        request_ids,
        renormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LaneId, SiteProfile, VehicleClass, VehicleState, VehicleTrack};

    fn dataset() -> Dataset {
        let mut d = Dataset::new(SiteProfile::synthetic(), 2.5);
        for (id, y0, n) in [(1u64, 0.0, 20usize), (2, 10.0, 20), (3, 500.0, 20), (4, 0.0, 10)] {
            let mut t = VehicleTrack::new(VehicleId(id), VehicleClass::Auto, 4.5, 1.8);
            t.states = (0..n)
                .map(|i| VehicleState::new(i as f64 * 0.4, 1.85, y0 + 4.0 * i as f64, LaneId(1)))
                .collect();
            d.insert(t);
        }
        d
    }

    fn instance(ego: u64, anchor_t: f64, probs: &[f64], steps: usize) -> PredictionInstance {
        PredictionInstance {
            vehicle_id: VehicleId(ego),
            anchor_t,
            anchor: Point::new(0.0, 0.0),
            modes: probs
                .iter()
                .map(|&p| PredictionMode {
                    probability: p,
                    points: (1..=steps).map(|k| Point::new(1.0, k as f64)).collect(),
                })
                .collect(),
        }
    }

    fn meta() -> PredictionMeta {
        PredictionMeta {
            source: "cv".into(),
            frame: Frame::Local,
            config_digest: Some("abc".into()),
        }
    }

    fn round_trip(entries: &[(u64, &PredictionInstance)]) -> Result<PredictionFile> {
        let mut buf = Vec::new();
        write_predictions(&meta(), entries, &mut buf).unwrap();
        parse_predictions_str(std::str::from_utf8(&buf).unwrap(), Path::new("p.csv"), &dataset())
    }

    #[test]
    fn requests_history_and_skips() {
        let d = dataset();
        let mut buf = Vec::new();
        let anchors = [(VehicleId(1), 2.8), (VehicleId(1), 2.0), (VehicleId(1), 2.8), (VehicleId(4), 1.6)];
        let s = write_prediction_requests(&d, &anchors, 50.0, &RequestMeta::default(), &mut buf).unwrap();
        assert_eq!(s, RequestSummary { written: 1, skipped: 2 });
        let f = parse_requests(std::str::from_utf8(&buf).unwrap(), Path::new("r.csv")).unwrap();
        assert_eq!(f.requests.len(), 1);
        let r = &f.requests[0];
        assert_eq!(r.ego.len(), 8);
        assert!((r.ego[7].0 - 2.8).abs() < 1e-12);
        assert_eq!(r.neighbors.keys().copied().collect::<Vec<_>>(), vec![VehicleId(2), VehicleId(4)]);
        assert_eq!(r.neighbors[&VehicleId(4)].len(), 8);
    }

    #[test]
    fn empty_request_file_has_header() {
        let mut buf = Vec::new();
        let meta = RequestMeta {
            config_digest: Some("d".into()),
            scenario: Some("merge".into()),
        };
        write_prediction_requests(&dataset(), &[], 50.0, &meta, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bb-req v1\n#config_digest=d\n#scenario=merge\nrequest_id,"));
        let f = parse_requests(&text, Path::new("r.csv")).unwrap();
        assert!(f.requests.is_empty());
        assert_eq!(f.meta.config_digest.as_deref(), Some("d"));
    }

    #[test]
    fn single_mode_parses() {
        let i = instance(1, 2.8, &[1.0], 12);
        let f = round_trip(&[(0, &i)]).unwrap();
        let got = f.set.get(VehicleId(1), 2.8).unwrap();
        assert_eq!(got.modes.len(), 1);
        assert_eq!(got.modes[0].probability, 1.0);
        assert_eq!(got.modes[0].points, i.modes[0].points);
        assert_eq!(got.anchor, Point::new(1.85, 28.0));
        assert_eq!(f.renormalized, 0);
        assert_eq!(f.meta.source, "cv");
    }

    #[test]
    fn probabilities_normalized() {
        let i = instance(1, 2.8, &[2.0, 2.0], 12);
        let f = round_trip(&[(0, &i)]).unwrap();
        let got = f.set.get(VehicleId(1), 2.8).unwrap();
        assert_eq!(got.modes[0].probability, 0.5);
        assert_eq!(got.modes[1].probability, 0.5);
        assert_eq!(f.renormalized, 1);
    }

    #[test]
    fn wrong_horizon_rejected() {
        let i = instance(1, 2.8, &[1.0], 10);
        let err = round_trip(&[(0, &i)]).unwrap_err();
        assert!(err.to_string().starts_with("horizon mismatch"));
    }

    #[test]
    fn negative_probability_and_unknown_vehicle() {
        let i = instance(1, 2.8, &[-0.5], 12);
        assert!(matches!(round_trip(&[(0, &i)]), Err(Error::NegativeProbability { .. })));
        let i = instance(42, 2.8, &[1.0], 12);
        assert!(matches!(round_trip(&[(0, &i)]), Err(Error::UnknownVehicle(VehicleId(42)))));
    }

    #[test]
    fn wrong_magic_rejected() {
        let err = parse_predictions_str("bb-req v1\n", Path::new("x"), &dataset()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
