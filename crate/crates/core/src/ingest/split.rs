use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, VehicleTrack, TIME_EPS};

/// Keeps every `source_hz / target_hz`-th sample of each track, starting at
/// the track's first sample.
pub fn resample(dataset: &Dataset, target_hz: f64) -> Result<Dataset> {
    let ratio = dataset.sample_hz / target_hz;
    let factor = ratio.round();
    if !(target_hz > 0.0) || factor < 1.0 || (ratio - factor).abs() > 1e-9 {
        return Err(Error::NonIntegerDecimation {
            source_hz: dataset.sample_hz,
            target_hz,
        });
    }
    let step = factor as usize;
    let mut out = Dataset::new(dataset.site.clone(), target_hz);
    out.time_origin_ms = dataset.time_origin_ms;
    for track in dataset.tracks.values() {
        let mut t = track.clone();
        t.states = track.states.iter().step_by(step).copied().collect();
        out.insert(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const ORDERS: [[Split; 3]; 6] = [
    [Split::Train, Split::Validation, Split::Test],
    [Split::Train, Split::Test, Split::Validation],
    [Split::Validation, Split::Train, Split::Test],
    [Split::Validation, Split::Test, Split::Train],
    [Split::Test, Split::Train, Split::Validation],
    [Split::Test, Split::Validation, Split::Train],
];

/// Partition of a recording into three contiguous time segments.
///
/// `order[i]` is the split owning segment `i`; segment `i` covers
/// `[cuts[i-1], cuts[i])` with open outer ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub order: [Split; 3],
    pub cuts: [f64; 2],
}

impl SplitAssignment {
    pub fn split_at(&self, t: f64) -> Split {
        if t < self.cuts[0] - TIME_EPS {
            self.order[0]
        } else if t < self.cuts[1] - TIME_EPS {
            self.order[1]
        } else {
            self.order[2]
        }
    }

    /// The part of `track` inside `split`, or `None` when it has no samples there.
    pub fn truncate(&self, track: &VehicleTrack, split: Split) -> Option<VehicleTrack> {
        let mut t = track.clone();
        t.states.retain(|s| self.split_at(s.t) == split);
        (!t.states.is_empty()).then_some(t)
    }

    pub fn subset(&self, dataset: &Dataset, split: Split) -> Dataset {
        let mut out = Dataset::new(dataset.site.clone(), dataset.sample_hz);
        out.time_origin_ms = dataset.time_origin_ms;
        for track in dataset.tracks.values() {
            if let Some(t) = self.truncate(track, split) {
                out.insert(t);
            }
        }
        out
    }

    /// Samples per split, indexed train, validation, test.
    pub fn sample_counts(&self, dataset: &Dataset) -> [usize; 3] {
        let mut n = [0; 3];
        for s in dataset.tracks.values().flat_map(|t| &t.states) {
            n[self.split_at(s.t).index()] += 1;
        }
        n
    }
}

/// Cuts the recording into contiguous segments holding `ratios` of all
/// samples. The seed picks which split takes which segment.
pub fn split_dataset(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::BadRatios(sum));
    }
    let order = ORDERS[(seed % ORDERS.len() as u64) as usize];
    let mut times: Vec<f64> = dataset
        .tracks
        .values()
        .flat_map(|t| t.states.iter().map(|s| s.t))
        .collect();
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let quantile = |frac: f64| -> f64 {
        let k = (frac * n as f64).round() as usize;
        if n == 0 {
            0.0
        } else if k >= n {
            times[n - 1] + 1.0
        } else {
            times[k]
        }
    };
    let first = ratios[order[0].index()];
    let second = first + ratios[order[1].index()];
    Ok(SplitAssignment {
        seed,
        ratios,
        order,
        cuts: [quantile(first), quantile(second)],
    })
}
