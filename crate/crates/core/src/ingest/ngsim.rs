use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    Dataset, LaneId, SiteProfile, VehicleClass, VehicleId, VehicleState, VehicleTrack,
};

const REQUIRED: [&str; 12] = [
    "Vehicle_ID",
    "Frame_ID",
    "Global_Time",
    "Local_X",
    "Local_Y",
    "Global_X",
    "Global_Y",
    "v_Length",
    "v_Width",
    "v_Class",
    "v_Vel",
    "Lane_ID",
];

/// A recording gap longer than this starts a new track for the same raw id.
const SEGMENT_GAP_S: f64 = 1.0;
/// Offset added to a raw vehicle id for each further segment.
pub const SEGMENT_ID_STRIDE: u64 = 1_000_000;

struct Row {
    vehicle: u64,
    time_ms: i64,
    x: f64,
    y: f64,
    gx: f64,
    gy: f64,
    length: f64,
    width: f64,
    class: VehicleClass,
    v: f64,
    lane: i32,
}

/// Parses an NGSIM trajectory file at its native rate.
pub fn parse_ngsim_csv(path: &Path, site: &SiteProfile) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_ngsim_reader(file, site)
}

/// Parses NGSIM rows from any reader. Header matching is case-insensitive and
/// extra columns are ignored.
pub fn parse_ngsim_reader<R: Read>(reader: R, site: &SiteProfile) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let mut cols = [0usize; REQUIRED.len()];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = header
            .iter()
            .position(|h| *h == name.to_ascii_lowercase())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let unit = site.raw_unit.to_meters();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let num = |k: usize| -> Result<f64> {
            let raw = rec.get(cols[k]).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: row_no,
                    column: REQUIRED[k].to_string(),
                    value: raw.to_string(),
                })
        };
        let int = |k: usize| -> Result<i64> {
            let v = num(k)?;
            if v.fract() != 0.0 {
                return Err(Error::NonNumeric {
                    row: row_no,
                    column: REQUIRED[k].to_string(),
                    value: rec.get(cols[k]).unwrap_or("").to_string(),
                });
            }
            Ok(v as i64)
        };
        let vehicle = int(0)?;
        let class_code = int(9)?;
        rows.push(Row {
            vehicle: vehicle as u64,
            time_ms: int(2)?,
            x: num(3)? * unit,
            y: num(4)? * unit,
            gx: num(5)? * unit,
            gy: num(6)? * unit,
            length: num(7)? * unit,
            width: num(8)? * unit,
            class: VehicleClass::from_code(class_code).ok_or_else(|| Error::NonNumeric {
                row: row_no,
                column: "v_Class".into(),
                value: class_code.to_string(),
            })?,
            v: num(10)? * unit,
            lane: int(11)? as i32,
        });
    }
    build_dataset(rows, site)
}

fn build_dataset(rows: Vec<Row>, site: &SiteProfile) -> Result<Dataset> {
    let origin = rows.iter().map(|r| r.time_ms).min().unwrap_or(0);
    let mut by_vehicle: BTreeMap<u64, Vec<Row>> = BTreeMap::new();
    for r in rows {
        by_vehicle.entry(r.vehicle).or_default().push(r);
    }

    let mut dt_hist: HashMap<i64, usize> = HashMap::new();
    let mut unknown_lanes = 0usize;
    let mut tracks = Vec::new();
    for (raw_id, mut rows) in by_vehicle {
        rows.sort_by_key(|r| r.time_ms);
        if let Some(w) = rows.windows(2).find(|w| w[0].time_ms == w[1].time_ms) {
            return Err(Error::DuplicateSample {
                vehicle: VehicleId(raw_id),
                t: (w[0].time_ms - origin) as f64 / 1000.0,
            });
        }
        for w in rows.windows(2) {
            *dt_hist.entry(w[1].time_ms - w[0].time_ms).or_default() += 1;
        }
        let mut segment = 0u64;
        let mut current: Option<VehicleTrack> = None;
        let mut last_ms = None;
        for r in rows {
            let t = (r.time_ms - origin) as f64 / 1000.0;
            let gap = last_ms.map(|l: i64| (r.time_ms - l) as f64 / 1000.0);
            if gap.is_some_and(|g| g > SEGMENT_GAP_S) {
                tracks.extend(current.take());
                segment += 1;
            }
            last_ms = Some(r.time_ms);
            let track = current.get_or_insert_with(|| {
                VehicleTrack::new(
                    VehicleId(raw_id + segment * SEGMENT_ID_STRIDE),
                    r.class,
                    r.length,
                    r.width,
                )
            });
            let lane = if site.contains_lane(LaneId(r.lane)) {
                LaneId(r.lane)
            } else {
                unknown_lanes += 1;
                LaneId::UNKNOWN
            };
            let mut s = VehicleState::new(t, r.x, r.y, lane);
            s.gx = Some(r.gx);
            s.gy = Some(r.gy);
            s.v = Some(r.v);
            track.states.push(s);
        }
        tracks.extend(current);
    }
    if unknown_lanes > 0 {
        log::warn!("{unknown_lanes} rows carry lane ids absent from the site profile; marked unknown");
    }

    // Most common spacing gives the native rate; NGSIM is 100 ms.
    let dt_ms = dt_hist
        .into_iter()
        .max_by_key(|&(dt, n)| (n, std::cmp::Reverse(dt)))
        .map(|(dt, _)| dt)
        .unwrap_or(100);
    let mut dataset = Dataset::new(site.clone(), 1000.0 / dt_ms as f64);
    dataset.time_origin_ms = origin;
    for t in tracks {
        dataset.insert(t);
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Vehicle_ID,Frame_ID,Total_Frames,Global_Time,Local_X,Local_Y,Global_X,Global_Y,v_Length,v_Width,v_Class,v_Vel,v_Acc,Lane_ID,Preceding,Following,Space_Headway,Time_Headway";

    fn row(id: u64, frame: u64, ms: i64, y: f64, lane: i32) -> String {
        format!("{id},{frame},100,{ms},6.0,{y},100.0,200.0,15.0,6.0,2,30.0,0.0,{lane},0,0,0.0,0.0")
    }

    fn parse(text: &str) -> Result<Dataset> {
        parse_ngsim_reader(text.as_bytes(), &SiteProfile::us101())
    }

    #[test]
    fn converts_feet_to_meters() {
        let text = [
            HEADER.to_string(),
            row(7, 1, 1_113_433_136_100, 10.0, 2),
            row(7, 2, 1_113_433_136_200, 11.0, 2),
            row(7, 3, 1_113_433_136_300, 12.0, 2),
        ]
        .join("\n");
        let d = parse(&text).unwrap();
        let tr = d.track(VehicleId(7)).unwrap();
        let ys: Vec<f64> = tr.states.iter().map(|s| s.y).collect();
        assert_eq!(ys, vec![10.0 * 0.3048, 11.0 * 0.3048, 12.0 * 0.3048]);
        assert!((ys[0] - 3.048).abs() < 1e-12 && (ys[2] - 3.6576).abs() < 1e-12);
        let ts: Vec<f64> = tr.states.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.1, 0.2]);
        assert_eq!(d.sample_hz, 10.0);
        assert!((tr.length - 15.0 * 0.3048).abs() < 1e-12);
        assert_eq!(tr.states[0].v, Some(30.0 * 0.3048));
    }

    #[test]
    fn missing_column_is_named() {
        let text = "Vehicle_ID,Frame_ID,Global_Time,Local_X,Local_Y,Global_X,Global_Y,v_Length,v_Width,v_Class,v_Vel\n";
        let err = parse(text).unwrap_err();
        assert_eq!(err.to_string(), "missing column Lane_ID");
    }

    #[test]
    fn header_match_ignores_case() {
        let text = [HEADER.to_lowercase(), row(1, 1, 0, 1.0, 1)].join("\n");
        assert_eq!(parse(&text).unwrap().tracks.len(), 1);
    }

    #[test]
    fn non_numeric_reports_row() {
        let bad = row(1, 2, 100, 1.0, 1).replace("6.0,1", "abc,1");
        let text = [HEADER.to_string(), row(1, 1, 0, 1.0, 1), bad].join("\n");
        match parse(&text).unwrap_err() {
            Error::NonNumeric { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "Local_X");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_sample_rejected() {
        let text = [HEADER.to_string(), row(1, 1, 0, 1.0, 1), row(1, 1, 0, 1.0, 1)].join("\n");
        assert!(matches!(parse(&text), Err(Error::DuplicateSample { .. })));
    }

    #[test]
    fn unknown_lane_and_segments() {
        let text = [
            HEADER.to_string(),
            row(3, 1, 0, 1.0, 99),
            row(3, 2, 100, 2.0, 1),
            row(3, 900, 90_000, 3.0, 1),
        ]
        .join("\n");
        let d = parse(&text).unwrap();
        assert_eq!(d.track(VehicleId(3)).unwrap().states[0].lane, LaneId::UNKNOWN);
        assert_eq!(d.track(VehicleId(3 + SEGMENT_ID_STRIDE)).unwrap().states.len(), 1);
    }
}
