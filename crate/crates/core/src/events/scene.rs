use std::collections::BTreeMap;

use crate::model::{Dataset, Point, VehicleId, VehicleTrack};

/// Which vehicles are present when. Tracks are bucketed by whole second.
#[derive(Debug, Clone)]
pub struct SceneIndex {
    buckets: BTreeMap<i64, Vec<VehicleId>>,
}

impl SceneIndex {
    pub fn new(dataset: &Dataset) -> Self {
        let mut buckets: BTreeMap<i64, Vec<VehicleId>> = BTreeMap::new();
        for track in dataset.tracks.values() {
            let (Some(a), Some(b)) = (track.first_t(), track.last_t()) else {
                continue;
            };
            for s in a.floor() as i64..=b.floor() as i64 {
                buckets.entry(s).or_default().push(track.id);
            }
        }
        SceneIndex { buckets }
    }

    /// Tracks covering `t`, in vehicle-id order.
    pub fn active_at<'a>(
        &'a self,
        dataset: &'a Dataset,
        t: f64,
    ) -> impl Iterator<Item = &'a VehicleTrack> + 'a {
        let lo = (t - 1e-6).floor() as i64;
        let hi = (t + 1e-6).floor() as i64;
        let mut ids: Vec<VehicleId> = self
            .buckets
            .range(lo..=hi)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .filter_map(move |id| dataset.track(id))
            .filter(move |tr| tr.covers(t))
    }

    /// Vehicles within `radius` (road frame) of `center` at time `t`, sorted by
    /// longitudinal position then id, excluding `exclude`.
    pub fn neighbors_within(
        &self,
        dataset: &Dataset,
        t: f64,
        center: Point,
        radius: f64,
        exclude: VehicleId,
    ) -> Vec<(VehicleId, Point)> {
        let mut out: Vec<(VehicleId, Point)> = self
            .active_at(dataset, t)
            .filter(|tr| tr.id != exclude)
            .filter_map(|tr| Some((tr.id, tr.position_at(t)?)))
            .filter(|(_, p)| p.distance(center) <= radius)
            .collect();
        out.sort_by(|a, b| a.1.y.total_cmp(&b.1.y).then(a.0.cmp(&b.0)));
        out
    }
}
