//! End-to-end evaluation: event extraction, request sets, per-source
//! metrics, cross-source R², and the report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::events::{extract_merge_events, LookbackStatus, MergeEvent, SceneIndex};
use crate::ingest::{Frame, PredictionFile};
use crate::metrics::{
    count_faster_lane_changes, courtesy_lc_table, extract_highway_anchors, highway_lc_curve, merge_participants,
    pass_first_curve, rmse_by_horizon, CourtesyResult, HighwayAnchor, HighwayLcResult, ModelSource, Naturalistic,
    PassFirstResult, RmseResult, SourceTag, TrajectorySource, DEFAULT_HORIZONS,
};
use crate::model::{AnalysisConfig, Dataset, TimeKey, VehicleId};
use crate::safety::{count_unsafe, SafetyStats};
use crate::stats::{r_squared, BinnedCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Merge,
    Highway,
    All,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merge" => Ok(Scenario::Merge),
            "highway" => Ok(Scenario::Highway),
            "all" => Ok(Scenario::All),
            _ => Err(Error::InvalidParameter(format!("unknown scenario {s:?}"))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Merge => "merge",
            Scenario::Highway => "highway",
            Scenario::All => "all",
        })
    }
}

/// Everything extracted from recorded data before any source is consulted.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub index: SceneIndex,
    pub events: Vec<MergeEvent>,
    pub participants: BTreeSet<VehicleId>,
    pub anchors: Vec<HighwayAnchor>,
}

pub fn extract(dataset: &Dataset, config: &AnalysisConfig) -> Extraction {
    let index = SceneIndex::new(dataset);
    let events = extract_merge_events(dataset, &index, config);
    let participants = merge_participants(&events);
    let anchors = extract_highway_anchors(dataset, &index, &participants, config);
    Extraction {
        index,
        events,
        participants,
        anchors,
    }
}

impl Extraction {
    /// Prediction requests for a scenario: both vehicles of every resolved
    /// (event, look-back) pair and every highway anchor. Sorted by vehicle
    /// and time, without duplicates.
    pub fn request_anchors(&self, scenario: Scenario) -> Vec<(VehicleId, f64)> {
        let mut keys: BTreeMap<(VehicleId, TimeKey), f64> = BTreeMap::new();
        let mut add = |id: VehicleId, t: f64| {
            keys.entry((id, TimeKey::from_secs(t))).or_insert(t);
        };
        if scenario != Scenario::Highway {
            for ev in &self.events {
                for r in ev.lookbacks.iter().filter(|r| r.status == LookbackStatus::Ok) {
                    if let (Some(hw), Some(mt), Some(ht)) = (r.highway_id, r.merger_anchor_t, r.highway_anchor_t) {
                        add(ev.merger_id, mt);
                        add(hw, ht);
                    }
                }
            }
        }
        if scenario != Scenario::Merge {
            for a in &self.anchors {
                add(a.vehicle_id, a.anchor_t);
            }
        }
        keys.into_iter().map(|((id, _), t)| (id, t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassFirstEntry {
    pub tau: f64,
    pub result: Option<PassFirstResult>,
    pub error: Option<String>,
}

/// All metrics for one trajectory source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: SourceTag,
    /// Frames the source supplied trajectories in.
    pub frames: Vec<Frame>,
    pub pass_first: Vec<PassFirstEntry>,
    pub courtesy: Vec<CourtesyResult>,
    pub highway_lc: Vec<HighwayLcResult>,
    /// Keyed by frame; empty for recorded data.
    pub rmse: BTreeMap<Frame, RmseResult>,
    pub safety: Vec<SafetyStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Entry {
    pub metric: String,
    pub tau: f64,
    pub source: SourceTag,
    pub r2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookbackCounts {
    pub tau: f64,
    pub statuses: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub merge_events: usize,
    pub lookbacks: Vec<LookbackCounts>,
    pub highway_anchors: usize,
    /// Recorded changes into a faster lane outside merge events.
    pub faster_lane_changes: usize,
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub site: String,
    pub config: AnalysisConfig,
    pub config_digest: String,
    pub manifest_digest: String,
    pub extraction: ExtractionSummary,
    pub sources: Vec<SourceReport>,
    pub r2: Vec<R2Entry>,
}

/// Predictions for one model, by frame.
#[derive(Debug, Clone, Default)]
pub struct ModelInputs {
    pub local: Option<PredictionFile>,
    pub global: Option<PredictionFile>,
}

/// Groups parsed prediction files by model name after checking each
/// against the config digest and the canonical request set.
pub fn group_predictions(
    files: Vec<PredictionFile>,
    expected: &BTreeSet<(VehicleId, TimeKey)>,
    config_digest: &str,
) -> Result<BTreeMap<String, ModelInputs>> {
    let mut out: BTreeMap<String, ModelInputs> = BTreeMap::new();
    for f in files {
        match &f.meta.config_digest {
            Some(d) if d != config_digest => {
                return Err(Error::ConfigDigestMismatch {
                    expected: config_digest.to_string(),
                    found: d.clone(),
                })
            }
            Some(_) => {}
            None => log::warn!("predictions from {} carry no config digest", f.meta.source),
        }
        let mut unknown: Vec<u64> = f
            .request_ids
            .iter()
            .filter(|(k, _)| !expected.contains(k))
            .map(|(_, rid)| *rid)
            .collect();
        if !unknown.is_empty() {
            unknown.sort_unstable();
            return Err(Error::UnknownRequests(unknown));
        }
        let entry = out.entry(f.meta.source.clone()).or_default();
        let slot = match f.meta.frame {
            Frame::Local => &mut entry.local,
            Frame::Global => &mut entry.global,
        };
        if slot.is_some() {
            return Err(Error::Malformed(format!(
                "two {} prediction files for model {}",
                f.meta.frame, f.meta.source
            )));
        }
        *slot = Some(f);
    }
    Ok(out)
}

fn behavior(
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    ex: &Extraction,
    config: &AnalysisConfig,
) -> (Vec<PassFirstEntry>, Vec<CourtesyResult>, Vec<HighwayLcResult>) {
    let pass_first = config
        .lookbacks
        .iter()
        .map(|&tau| match pass_first_curve(&ex.events, tau, source, dataset, config) {
            Ok(r) => PassFirstEntry {
                tau,
                result: Some(r),
                error: None,
            },
            Err(e) => PassFirstEntry {
                tau,
                result: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let courtesy = config
        .lookbacks
        .iter()
        .map(|&tau| courtesy_lc_table(&ex.events, tau, source, dataset, config))
        .collect();
    let highway = config
        .lookbacks
        .iter()
        .map(|&tau| highway_lc_curve(&ex.anchors, tau, source, dataset, config))
        .collect();
    (pass_first, courtesy, highway)
}

fn has_global(dataset: &Dataset) -> bool {
    !dataset.tracks.is_empty() && dataset.tracks.values().all(|t| t.states.iter().all(|s| s.global().is_some()))
}

fn naturalistic_report(
    dataset: &Dataset,
    ex: &Extraction,
    instances: &[(VehicleId, f64)],
    config: &AnalysisConfig,
) -> SourceReport {
    let nat = Naturalistic::new(dataset);
    let (pass_first, courtesy, highway_lc) = behavior(&nat, dataset, ex, config);
    let mut safety = vec![count_unsafe(instances, &nat, &nat, dataset, &ex.index, config, Frame::Local)];
    let mut frames = vec![Frame::Local];
    if has_global(dataset) {
        let glob = Naturalistic::in_frame(dataset, Frame::Global);
        safety.push(count_unsafe(instances, &glob, &nat, dataset, &ex.index, config, Frame::Global));
        frames.push(Frame::Global);
    }
    SourceReport {
        source: SourceTag::Naturalistic,
        frames,
        pass_first,
        courtesy,
        highway_lc,
        rmse: BTreeMap::new(),
        safety,
    }
}

fn model_report(
    name: &str,
    inputs: &ModelInputs,
    dataset: &Dataset,
    ex: &Extraction,
    config: &AnalysisConfig,
) -> Result<SourceReport> {
    let nat = Naturalistic::new(dataset);
    let local = inputs.local.as_ref().map(|f| ModelSource::new(name, dataset, &f.set));
    let global = inputs.global.as_ref().map(|f| {
        let mut s = ModelSource::new(name, dataset, &f.set);
        s.frame = Frame::Global;
        s
    });
    let (pass_first, courtesy, highway_lc) = match &local {
        Some(src) => behavior(src, dataset, ex, config),
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    let mut rmse = BTreeMap::new();
    let mut safety = Vec::new();
    let mut frames = Vec::new();
    if let (Some(src), Some(f)) = (&local, &inputs.local) {
        rmse.insert(Frame::Local, rmse_by_horizon(&f.set, dataset, &DEFAULT_HORIZONS, Frame::Local)?);
        let inst = instance_keys(f);
        safety.push(count_unsafe(&inst, src, src, dataset, &ex.index, config, Frame::Local));
        frames.push(Frame::Local);
    }
    if let (Some(src), Some(f)) = (&global, &inputs.global) {
        rmse.insert(Frame::Global, rmse_by_horizon(&f.set, dataset, &DEFAULT_HORIZONS, Frame::Global)?);
        let inst = instance_keys(f);
        let lane_source: &dyn TrajectorySource = match &local {
            Some(l) => l,
            None => &nat,
        };
        safety.push(count_unsafe(&inst, src, lane_source, dataset, &ex.index, config, Frame::Global));
        frames.push(Frame::Global);
    }
    Ok(SourceReport {
        source: SourceTag::Model(name.to_string()),
        frames,
        pass_first,
        courtesy,
        highway_lc,
        rmse,
        safety,
    })
}

fn instance_keys(f: &PredictionFile) -> Vec<(VehicleId, f64)> {
    f.set.iter().map(|i| (i.vehicle_id, i.anchor_t)).collect()
}

fn r2_entry(metric: &str, tau: f64, source: &SourceTag, a: Option<&BinnedCurve>, b: Option<&BinnedCurve>) -> R2Entry {
    let (r2, error) = match (a, b) {
        (Some(a), Some(b)) => match r_squared(a, b) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, Some("curve unavailable".to_string())),
    };
    R2Entry {
        metric: metric.to_string(),
        tau,
        source: source.clone(),
        r2,
        error,
    }
}

/// R² of every model curve against the naturalistic curve for the same
/// metric and look-back.
pub fn compare_sources(report: &BehaviorReport) -> Vec<R2Entry> {
    let Some(nat) = report.sources.iter().find(|s| s.source == SourceTag::Naturalistic) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for m in report.sources.iter().filter(|s| s.source != SourceTag::Naturalistic) {
        for (n, p) in nat.pass_first.iter().zip(&m.pass_first) {
            let curve = |e: &PassFirstEntry| e.result.as_ref().map(|r| r.curve.clone());
            out.push(r2_entry("pass_first", n.tau, &m.source, curve(n).as_ref(), curve(p).as_ref()));
        }
        for (n, h) in nat.highway_lc.iter().zip(&m.highway_lc) {
            out.push(r2_entry("highway_lc", n.tau, &m.source, Some(&n.curve), Some(&h.curve)));
        }
    }
    out
}

fn summarize(ex: &Extraction, dataset: &Dataset, config: &AnalysisConfig, requests: usize) -> ExtractionSummary {
    let lookbacks = config
        .lookbacks
        .iter()
        .map(|&tau| {
            let mut statuses = BTreeMap::new();
            for r in ex.events.iter().filter_map(|e| e.lookback(tau)) {
                let key = serde_json::to_value(r.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *statuses.entry(key).or_insert(0) += 1;
            }
            LookbackCounts { tau, statuses }
        })
        .collect();
    ExtractionSummary {
        merge_events: ex.events.len(),
        lookbacks,
        highway_anchors: ex.anchors.len(),
        faster_lane_changes: count_faster_lane_changes(dataset, &ex.participants, config),
        requests,
    }
}

/// Runs every metric for recorded data and each model, then compares curves.
pub fn evaluate(
    dataset: &Dataset,
    config: &AnalysisConfig,
    files: Vec<PredictionFile>,
    manifest_digest: &str,
) -> Result<BehaviorReport> {
    config.validate()?;
    let ex = extract(dataset, config);
    let requests = ex.request_anchors(Scenario::All);
    let expected: BTreeSet<(VehicleId, TimeKey)> =
        requests.iter().map(|&(id, t)| (id, TimeKey::from_secs(t))).collect();
    let digest = config.digest();
    let models = group_predictions(files, &expected, &digest)?;

    let nat = naturalistic_report(dataset, &ex, &requests, config);
    let model_reports: Vec<SourceReport> = models
        .par_iter()
        .map(|(name, inputs)| model_report(name, inputs, dataset, &ex, config))
        .collect::<Result<_>>()?;
    let mut report = BehaviorReport {
        site: dataset.site.site_id.to_string(),
        config: config.clone(),
        config_digest: digest,
        manifest_digest: manifest_digest.to_string(),
        extraction: summarize(&ex, dataset, config, requests.len()),
        sources: std::iter::once(nat).chain(model_reports).collect(),
        r2: Vec::new(),
    };
    report.r2 = compare_sources(&report);
    Ok(report)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// Provenance of one evaluation run. `digest` covers every field except
/// itself and `created_unix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: AnalysisConfig,
    pub config_digest: String,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub created_unix: u64,
    pub digest: String,
}

impl RunManifest {
    pub fn new(command: &str, config: &AnalysisConfig, inputs: Vec<InputDigest>, seed: Option<u64>) -> Self {
        let mut m = RunManifest {
            tool: "bb".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            config_digest: config.digest(),
            inputs,
            seed,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            digest: String::new(),
        };
        m.digest = m.compute_digest();
        m
    }

    pub fn compute_digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("created_unix");
            o.remove("digest");
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

/// Digest of each file under `dir` (recursively, sorted by relative path).
pub fn digest_dir(dir: &Path) -> Result<Vec<InputDigest>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                out.push(InputDigest {
                    name,
                    sha256: sha256_hex(&std::fs::read(&p)?),
                });
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn curve_rows(out: &mut String, site: &str, source: &SourceTag, tau: f64, curve: &BinnedCurve) {
    for b in &curve.bins {
        let value = if b.masked { None } else { b.value };
        let _ = writeln!(
            out,
            "{site},{source},{tau},{},{},{},{},{},{}",
            b.lo,
            b.hi,
            b.center,
            fmt_opt(value),
            b.count,
            b.masked
        );
    }
}

/// The per-figure CSV files as `(file name, contents)`.
pub fn report_csvs(report: &BehaviorReport) -> Vec<(&'static str, String)> {
    let site = &report.site;
    let head = format!("# manifest={}\n", report.manifest_digest);
    let curve_head = "site,source,tau,bin_lo,bin_hi,bin_center,value,count,masked\n";

    let mut fig6 = head.clone() + curve_head;
    let mut fig7 = head.clone() + "site,source,tau,conflict,lane_change,no_lane_change,rate,p_value,shoulder_exits\n";
    let mut fig8 = head.clone() + curve_head;
    let mut table1 = head.clone() + "site,source,frame,horizon,rmse,instances,excluded\n";
    let mut safety = head + "site,source,frame,lane_change_status,interactions,unsafe,pct,zero_denominator\n";
    for s in &report.sources {
        for e in &s.pass_first {
            if let Some(r) = &e.result {
                curve_rows(&mut fig6, site, &s.source, e.tau, &r.curve);
            }
        }
        for c in &s.courtesy {
            let t = &c.table;
            for (conflict, lc, no) in [(true, t.a, t.b), (false, t.c, t.d)] {
                let rate = if conflict { t.conflict_rate() } else { t.no_conflict_rate() };
                let _ = writeln!(
                    fig7,
                    "{site},{},{},{conflict},{lc},{no},{},{},{}",
                    s.source,
                    c.tau,
                    fmt_opt(rate),
                    c.p_value,
                    c.shoulder_exits
                );
            }
        }
        for h in &s.highway_lc {
            curve_rows(&mut fig8, site, &s.source, h.tau, &h.curve);
        }
        for (frame, r) in &s.rmse {
            for (h, v) in &r.values {
                let _ = writeln!(table1, "{site},{},{frame},{h},{v},{},{}", s.source, r.instances, r.excluded);
            }
        }
        for st in &s.safety {
            for (status, c) in [("changed", st.changed), ("not_changed", st.not_changed)] {
                let _ = writeln!(
                    safety,
                    "{site},{},{},{status},{},{},{},{}",
                    st.source, st.frame, c.interactions, c.unsafe_count, c.pct, c.zero_denominator
                );
            }
        }
    }
    vec![
        ("fig6_passfirst.csv", fig6),
        ("fig7_courtesy.csv", fig7),
        ("fig8_highwaylc.csv", fig8),
        ("table1_rmse.csv", table1),
        ("safety.csv", safety),
    ]
}

pub fn report_json(report: &BehaviorReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes `report.json`, the figure CSVs and `manifest.json` into `dir`.
/// Returns the digest of `report.json`.
pub fn write_report(report: &BehaviorReport, manifest: &RunManifest, dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let json = report_json(report)?;
    std::fs::write(dir.join("report.json"), &json)?;
    for (name, body) in report_csvs(report) {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(sha256_hex(json.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_predictions_str, write_predictions, PredictionMeta};
    use crate::synth::{generate_dataset, ground_truth_predictions, offset_predictions, SynthParams};

    fn small() -> (Dataset, AnalysisConfig) {
        let p = SynthParams {
            n_events: 40,
            n_highway: 40,
            seed: 5,
            ..SynthParams::default()
        };
        (generate_dataset(&p).unwrap().0, AnalysisConfig::default())
    }

    fn file_for(d: &Dataset, cfg: &AnalysisConfig, name: &str, dx: f64, digest: Option<String>) -> PredictionFile {
        let ex = extract(d, cfg);
        let anchors = ex.request_anchors(Scenario::All);
        let set = offset_predictions(&ground_truth_predictions(d, &anchors), dx, 0.0);
        let entries: Vec<(u64, &_)> = set.iter().enumerate().map(|(i, p)| (i as u64, p)).collect();
        let mut buf = Vec::new();
        let meta = PredictionMeta {
            source: name.into(),
            frame: Frame::Local,
            config_digest: digest,
        };
        write_predictions(&meta, &entries, &mut buf).unwrap();
        parse_predictions_str(std::str::from_utf8(&buf).unwrap(), Path::new("p.csv"), d).unwrap()
    }

    #[test]
    fn requests_union_and_order() {
        let (d, cfg) = small();
        let ex = extract(&d, &cfg);
        let m = ex.request_anchors(Scenario::Merge);
        let h = ex.request_anchors(Scenario::Highway);
        let all = ex.request_anchors(Scenario::All);
        assert!(!m.is_empty() && !h.is_empty());
        assert_eq!(all.len(), m.len() + h.len());
        assert!(all.windows(2).all(|w| (w[0].0, TimeKey::from_secs(w[0].1)) < (w[1].0, TimeKey::from_secs(w[1].1))));
    }

    #[test]
    fn ground_truth_model_matches_naturalistic() {
        let (d, cfg) = small();
        let f = file_for(&d, &cfg, "copy", 0.0, Some(cfg.digest()));
        let r = evaluate(&d, &cfg, vec![f], "m").unwrap();
        let (nat, m) = (&r.sources[0], &r.sources[1]);
        assert_eq!(nat.pass_first, m.pass_first);
        assert_eq!(nat.courtesy, m.courtesy);
        assert_eq!(nat.highway_lc, m.highway_lc);
        assert_eq!(nat.safety[0].changed, m.safety[0].changed);
        assert_eq!(nat.safety[0].not_changed, m.safety[0].not_changed);
        // 5 s lies past the 4.8 s copy and is extrapolated.
        assert!(m.rmse[&Frame::Local].values[..4].iter().all(|(_, v)| *v <= 1e-9));
    }

    #[test]
    fn digest_mismatch_and_unknown_requests() {
        let (d, cfg) = small();
        let f = file_for(&d, &cfg, "copy", 0.0, Some("00".into()));
        let err = evaluate(&d, &cfg, vec![f], "m").unwrap_err();
        assert!(err.to_string().contains("config digest mismatch"));

        let mut f = file_for(&d, &cfg, "copy", 0.0, None);
        let inst = f.set.iter().next().unwrap().clone();
        let mut moved = inst.clone();
        moved.anchor_t += 0.2;
        f.set.insert(moved.clone());
        f.request_ids.insert(moved.key(), 999_999);
        match evaluate(&d, &cfg, vec![f], "m") {
            Err(Error::UnknownRequests(ids)) => assert_eq!(ids, vec![999_999]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_models_and_csvs() {
        let (d, cfg) = small();
        let a = file_for(&d, &cfg, "a", 0.0, None);
        let b = file_for(&d, &cfg, "b", 1.0, None);
        let r = evaluate(&d, &cfg, vec![b, a], "abc").unwrap();
        let tags: Vec<String> = r.sources.iter().map(|s| s.source.to_string()).collect();
        assert_eq!(tags, ["naturalistic", "model:a", "model:b"]);
        assert!((r.sources[2].rmse[&Frame::Local].values[0].1 - 1.0).abs() < 1e-9);
        for (name, body) in report_csvs(&r) {
            assert!(body.starts_with("# manifest=abc\n"), "{name}");
            assert!(body.lines().count() > 2, "{name}");
        }
        assert_eq!(report_json(&r).unwrap(), report_json(&r.clone()).unwrap());
    }

    #[test]
    fn manifest_digest_ignores_time() {
        let cfg = AnalysisConfig::default();
        let mut a = RunManifest::new("evaluate", &cfg, vec![], None);
        let d0 = a.digest.clone();
        a.created_unix += 100;
        assert_eq!(a.compute_digest(), d0);
        a.seed = Some(1);
        assert_ne!(a.compute_digest(), d0);
    }
}
