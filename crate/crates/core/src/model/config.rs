use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::serde_ext;

/// Knobs shared by every analysis. Reports echo the full config, and request
/// and prediction files carry its digest so mismatched runs are caught.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Look-back offsets before merge completion (s).
    pub lookbacks: Vec<f64>,
    /// |lead time| at or below this is a space-sharing conflict (s).
    pub conflict_threshold: f64,
    /// Safety box inflation on every side (m).
    pub safety_margin: f64,
    pub lead_bin_width: f64,
    /// Lead-time bins span `[-lead_bin_range, +lead_bin_range]`.
    pub lead_bin_range: f64,
    #[serde(with = "serde_ext::f64_vec")]
    pub ttc_bin_edges: Vec<f64>,
    /// Minimum time a new lane must persist to count as a lane change (s).
    pub lc_dwell: f64,
    pub neighbor_radius: f64,
    /// Bins with fewer events are masked.
    pub min_count: usize,
    /// Spacing of highway lane-change anchors (s).
    pub highway_anchor_cadence: f64,
    /// Constant-speed extrapolation limit beyond a trajectory's end (s).
    pub extrapolation_cap: f64,
    /// Nominal prediction horizon (s).
    pub prediction_horizon: f64,
    /// Speeds at or below this exclude an event from lead-time analysis (m/s).
    pub stopped_speed: f64,
    /// Closing speeds below this give an infinite time to collision (m/s).
    pub ttc_speed_eps: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lookbacks: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            conflict_threshold: 1.0,
            safety_margin: 0.3,
            lead_bin_width: 1.0,
            lead_bin_range: 6.0,
            ttc_bin_edges: vec![
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
            ],
            lc_dwell: 0.8,
            neighbor_radius: 50.0,
            min_count: 5,
            highway_anchor_cadence: 1.0,
            extrapolation_cap: 30.0,
            prediction_horizon: 5.0,
            stopped_speed: 0.1,
            ttc_speed_eps: 0.01,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("config: {m}")));
        if self.lookbacks.is_empty() || self.lookbacks.iter().any(|t| !(*t > 0.0)) {
            return bad("lookbacks must be positive");
        }
        if self.lookbacks.iter().any(|t| *t > self.prediction_horizon + 1e-9) {
            return bad("lookbacks must not exceed the prediction horizon");
        }
        let positive = [
            self.conflict_threshold,
            self.safety_margin,
            self.lead_bin_width,
            self.lead_bin_range,
            self.lc_dwell,
            self.neighbor_radius,
            self.highway_anchor_cadence,
            self.extrapolation_cap,
            self.prediction_horizon,
            self.stopped_speed,
            self.ttc_speed_eps,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("all thresholds must be positive and finite");
        }
        if self.ttc_bin_edges.len() < 2 || self.ttc_bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("ttc_bin_edges must be strictly increasing");
        }
        Ok(())
    }

    /// Lead-time bin edges, `-range, -range + width, ..., +range`.
    pub fn lead_bin_edges(&self) -> Vec<f64> {
        let n = (2.0 * self.lead_bin_range / self.lead_bin_width).round() as i64;
        (0..=n)
            .map(|i| -self.lead_bin_range + i as f64 * self.lead_bin_width)
            .collect()
    }

    /// Dwell expressed in samples at spacing `dt`; at least one sample.
    pub fn dwell_samples(&self, dt: f64) -> usize {
        ((self.lc_dwell / dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = AnalysisConfig::default();
        cfg.validate().unwrap();
        let back = AnalysisConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = AnalysisConfig::from_toml_str("conflict_threshold = 1.5\n").unwrap();
        assert_eq!(cfg.conflict_threshold, 1.5);
        assert_eq!(cfg.lookbacks.len(), 5);
        assert_ne!(cfg.digest(), AnalysisConfig::default().digest());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AnalysisConfig::from_toml_str("safety_margin = -1.0\n").is_err());
        assert!(AnalysisConfig::from_toml_str("lookbacks = [6.0]\n").is_err());
        assert!(AnalysisConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn derived_layouts() {
        let cfg = AnalysisConfig::default();
        let edges = cfg.lead_bin_edges();
        assert_eq!(edges.len(), 13);
        assert_eq!(edges[0], -6.0);
        assert_eq!(edges[12], 6.0);
        assert_eq!(cfg.dwell_samples(0.4), 2);
        assert_eq!(cfg.dwell_samples(0.1), 8);
    }
}
