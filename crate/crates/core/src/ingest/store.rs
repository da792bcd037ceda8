//! Canonical on-disk dataset: a directory holding `site.toml`,
//! `dataset.toml` and `tracks.csv`. Floats are written in shortest
//! round-trip form, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, LaneId, SiteProfile, VehicleClass, VehicleId, VehicleState, VehicleTrack};

pub const SITE_FILE: &str = "site.toml";
pub const DATASET_FILE: &str = "dataset.toml";
pub const TRACKS_FILE: &str = "tracks.csv";

const COLUMNS: [&str; 11] = ["vehicle_id", "class", "length", "width", "t", "x", "y", "gx", "gy", "lane", "v"];

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    sample_hz: f64,
    time_origin_ms: i64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_tracks_csv<W: std::io::Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for track in dataset.tracks.values() {
        let id = track.id.to_string();
        let class = track.class.code().to_string();
        let length = track.length.to_string();
        let width = track.width.to_string();
        for s in &track.states {
            w.write_record([
                id.clone(),
                class.clone(),
                length.clone(),
                width.clone(),
                s.t.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                opt(s.gx),
                opt(s.gy),
                s.lane.0.to_string(),
                opt(s.v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(SITE_FILE), dataset.site.to_toml_string())?;
    let meta = DatasetFile {
        sample_hz: dataset.sample_hz,
        time_origin_ms: dataset.time_origin_ms,
    };
    std::fs::write(
        dir.join(DATASET_FILE),
        toml::to_string(&meta).expect("dataset metadata serializes"),
    )?;
    let file = std::fs::File::create(dir.join(TRACKS_FILE))?;
    write_tracks_csv(dataset, std::io::BufWriter::new(file))
}

pub fn read_dataset_dir(dir: &Path) -> Result<Dataset> {
    let site = SiteProfile::from_toml_str(&std::fs::read_to_string(dir.join(SITE_FILE))?)?;
    let meta: DatasetFile = toml::from_str(&std::fs::read_to_string(dir.join(DATASET_FILE))?)
        .map_err(|e| Error::Toml(e.to_string()))?;
    let path = dir.join(TRACKS_FILE);
    let mut rdr = csv::Reader::from_path(&path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::Format {
            path,
            message: format!("expected columns {COLUMNS:?}"),
        });
    }
    let mut tracks: BTreeMap<VehicleId, VehicleTrack> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: COLUMNS[i].into(),
                value: rec[i].to_string(),
            })
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let id = VehicleId(num(0)? as u64);
        let class = VehicleClass::from_code(num(1)? as i64).ok_or_else(|| Error::NonNumeric {
            row,
            column: "class".into(),
            value: rec[1].to_string(),
        })?;
        let (length, width) = (num(2)?, num(3)?);
        let track = tracks
            .entry(id)
            .or_insert_with(|| VehicleTrack::new(id, class, length, width));
        let mut s = VehicleState::new(num(4)?, num(5)?, num(6)?, LaneId(num(9)? as i32));
        s.gx = opt_num(7)?;
        s.gy = opt_num(8)?;
        s.v = opt_num(10)?;
        track.states.push(s);
    }
    let mut dataset = Dataset::new(site, meta.sample_hz);
    dataset.time_origin_ms = meta.time_origin_ms;
    for t in tracks.into_values() {
        dataset.insert(t);
    }
    Ok(dataset)
}
