use serde::{Deserialize, Serialize};

use super::source::TrajectorySource;
use crate::error::{Error, Result};
use crate::events::{courtesy_outcome, determine_pass_order, LookbackRecord, LookbackStatus, MergeEvent, PassOrder};
use crate::model::{AnalysisConfig, Dataset, STEP_DT};
use crate::stats::{bin_probability, fisher_exact_two_sided, BinnedCurve, Table2x2};

/// Outcomes of one (event, look-back) pair under one source. `None` where
/// the source has no trajectory for a vehicle involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeOutcome {
    pub pass_order: Option<PassOrder>,
    /// (toward median, toward shoulder) exits of the outermost lane.
    pub exits: Option<(bool, bool)>,
}

pub fn merge_outcome(
    event: &MergeEvent,
    record: &LookbackRecord,
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    config: &AnalysisConfig,
) -> MergeOutcome {
    let none = MergeOutcome {
        pass_order: None,
        exits: None,
    };
    if record.status != LookbackStatus::Ok {
        return none;
    }
    let (Some(hw), Some(m_anchor), Some(h_anchor)) =
        (record.highway_id, record.merger_anchor_t, record.highway_anchor_t)
    else {
        return none;
    };
    let pass_order = match (
        source.longitudinal(event.merger_id, m_anchor),
        source.longitudinal(hw, h_anchor),
    ) {
        (Some(m), Some(h)) => Some(determine_pass_order(
            event.merge_point_y,
            &m,
            &h,
            config.extrapolation_cap,
        )),
        _ => None,
    };
    let exits = source
        .path(hw, h_anchor)
        .map(|p| courtesy_outcome(&p, event.t_m, dataset, config.dwell_samples(STEP_DT)));
    MergeOutcome { pass_order, exits }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassFirstResult {
    pub tau: f64,
    /// P(merger passes first) per lead-time bin.
    pub curve: BinnedCurve,
    /// Neither vehicle's crossing could be placed.
    pub undetermined: u64,
    /// The source lacks a trajectory for a vehicle of the pair.
    pub missing: u64,
}

/// Pass-first probability against lead time at look-back `tau`.
pub fn pass_first_curve(
    events: &[MergeEvent],
    tau: f64,
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    config: &AnalysisConfig,
) -> Result<PassFirstResult> {
    let mut samples = Vec::new();
    let (mut undetermined, mut missing) = (0, 0);
    for ev in events {
        let Some(rec) = ev.lookback(tau) else { continue };
        let Some(lt) = rec.lead_time.filter(|_| rec.status == LookbackStatus::Ok) else {
            continue;
        };
        match merge_outcome(ev, rec, source, dataset, config).pass_order {
            Some(PassOrder::MergerFirst) => samples.push((lt, true)),
            Some(PassOrder::HighwayFirst) => samples.push((lt, false)),
            Some(PassOrder::Undetermined) => undetermined += 1,
            None => missing += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::NoResolvableEvents);
    }
    Ok(PassFirstResult {
        tau,
        curve: bin_probability(&samples, &config.lead_bin_edges(), config.min_count),
        undetermined,
        missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourtesyResult {
    pub tau: f64,
    pub table: Table2x2,
    pub p_value: f64,
    /// Highway vehicles that left the outermost lane toward the shoulder.
    pub shoulder_exits: u64,
    pub missing: u64,
}

/// Conflict × lane-change table at look-back `tau`, with its Fisher p-value.
pub fn courtesy_lc_table(
    events: &[MergeEvent],
    tau: f64,
    source: &dyn TrajectorySource,
    dataset: &Dataset,
    config: &AnalysisConfig,
) -> CourtesyResult {
    let mut table = Table2x2::default();
    let (mut shoulder_exits, mut missing) = (0, 0);
    for ev in events {
        let Some(rec) = ev.lookback(tau) else { continue };
        let Some(conflict) = rec.conflict.filter(|_| rec.status == LookbackStatus::Ok) else {
            continue;
        };
        let Some((median, shoulder)) = merge_outcome(ev, rec, source, dataset, config).exits else {
            missing += 1;
            continue;
        };
        shoulder_exits += shoulder as u64;
        match (conflict, median) {
            (true, true) => table.a += 1,
            (true, false) => table.b += 1,
            (false, true) => table.c += 1,
            (false, false) => table.d += 1,
        }
    }
    CourtesyResult {
        tau,
        table,
        p_value: fisher_exact_two_sided(&table),
        shoulder_exits,
        missing,
    }
}
