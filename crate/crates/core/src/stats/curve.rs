use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_ext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    #[serde(with = "serde_ext::f64_ext")]
    pub lo: f64,
    #[serde(with = "serde_ext::f64_ext")]
    pub hi: f64,
    /// Midpoint; the finite edge for a half-open outer bin.
    pub center: f64,
    pub count: u64,
    pub successes: u64,
    /// `successes / count`, absent for an empty bin.
    pub value: Option<f64>,
    pub masked: bool,
}

/// Proportion of positive outcomes per condition bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub bins: Vec<CurveBin>,
    /// Samples outside every bin (or with a NaN condition).
    pub dropped: u64,
    pub min_count: usize,
}

impl BinnedCurve {
    pub fn centers(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.center).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.count).collect()
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Value of the bin containing `x`, when that bin is unmasked.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let i = locate(&self.edges(), x)?;
        let b = &self.bins[i];
        if b.masked {
            None
        } else {
            b.value
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.bins.iter().map(|b| b.lo).collect();
        if let Some(last) = self.bins.last() {
            e.push(last.hi);
        }
        e
    }
}

/// Bin index for `x` under left-closed `[lo, hi)` bins. An infinite outer
/// edge admits the matching infinity.
fn locate(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len().checked_sub(1)?;
    if x.is_nan() || n == 0 {
        return None;
    }
    if x == f64::INFINITY && edges[n] == f64::INFINITY {
        return Some(n - 1);
    }
    if x < edges[0] || x >= edges[n] {
        return None;
    }
    Some(edges.partition_point(|e| *e <= x) - 1)
}

/// Bins `(condition, outcome)` samples and computes the success proportion per bin.
///
/// Bins with fewer than `min_count` samples are masked; samples outside the
/// edges are dropped and counted.
pub fn bin_probability(samples: &[(f64, bool)], edges: &[f64], min_count: usize) -> BinnedCurve {
    assert!(
        edges.len() >= 2 && edges.windows(2).all(|w| w[1] > w[0]),
        "bin edges must be strictly increasing"
    );
    let n = edges.len() - 1;
    let mut counts = vec![0u64; n];
    let mut succ = vec![0u64; n];
    let mut dropped = 0;
    for &(x, outcome) in samples {
        match locate(edges, x) {
            Some(i) => {
                counts[i] += 1;
                succ[i] += outcome as u64;
            }
            None => dropped += 1,
        }
    }
    let bins = (0..n)
        .map(|i| {
            let (lo, hi) = (edges[i], edges[i + 1]);
            let center = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi,
                (true, false) => lo,
                (false, false) => 0.0,
            };
            CurveBin {
                lo,
                hi,
                center,
                count: counts[i],
                successes: succ[i],
                value: (counts[i] > 0).then(|| succ[i] as f64 / counts[i] as f64),
                masked: (counts[i] as usize) < min_count || counts[i] == 0,
            }
        })
        .collect();
    BinnedCurve {
        bins,
        dropped,
        min_count,
    }
}

/// Coefficient of determination of `candidate` against `reference`:
/// `1 - SS_res / SS_tot`. Can be negative.
pub fn r_squared_values(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    if reference.len() != candidate.len() {
        return Err(Error::BinMismatch);
    }
    if reference.len() < 2 {
        return Err(Error::TooFewBins(reference.len()));
    }
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let ss_tot: f64 = reference.iter().map(|r| (r - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateReference);
    }
    let ss_res: f64 = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| (r - c).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// R² over the bins unmasked in both curves.
pub fn r_squared(reference: &BinnedCurve, candidate: &BinnedCurve) -> Result<f64> {
    if reference.bins.len() != candidate.bins.len()
        || reference
            .bins
            .iter()
            .zip(&candidate.bins)
            .any(|(a, b)| a.lo != b.lo || a.hi != b.hi)
    {
        return Err(Error::BinMismatch);
    }
    let (r, c): (Vec<f64>, Vec<f64>) = reference
        .bins
        .iter()
        .zip(&candidate.bins)
        .filter(|(a, b)| !a.masked && !b.masked)
        .filter_map(|(a, b)| Some((a.value?, b.value?)))
        .unzip();
    if r.len() < 2 {
        return Err(Error::TooFewBins(r.len()));
    }
    r_squared_values(&r, &c)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared_values(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared_values(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        // SS_res = 1, SS_tot = 2.
        assert_eq!(r_squared_values(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(matches!(
            r_squared_values(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateReference)
        ));
        assert!(matches!(r_squared_values(&[1.0], &[1.0]), Err(Error::TooFewBins(1))));
    }

    #[test]
    fn binning_rules() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        let samples: Vec<(f64, bool)> = (0..6).map(|_| (0.5, true)).collect();
        let c = bin_probability(&samples, &edges, 5);
        assert_eq!(c.bins[0].value, Some(1.0));
        assert_eq!(c.bins[0].count, 6);
        assert!(!c.bins[0].masked);
        assert!(c.bins[1].masked);
        assert_eq!(c.bins[1].value, None);

        let c = bin_probability(&[(1.0, true), (3.0, false), (-0.1, true)], &edges, 1);
        assert_eq!(c.bins[1].count, 1, "interior edge goes to the right bin");
        assert_eq!(c.dropped, 2);
    }

    #[test]
    fn infinite_edges_accept_infinities() {
        let edges = [f64::NEG_INFINITY, 0.0, f64::INFINITY];
        let c = bin_probability(&[(f64::INFINITY, true), (f64::NEG_INFINITY, false)], &edges, 1);
        assert_eq!(c.counts(), vec![1, 1]);
        assert_eq!(c.centers(), vec![0.0, 0.0]);
        assert_eq!(c.dropped, 0);
    }

    #[test]
    fn masked_bins_are_skipped() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        let mk = |vals: [(u64, u64); 3]| {
            let mut s = vec![];
            for (i, (n, k)) in vals.iter().enumerate() {
                for j in 0..*n {
                    s.push((i as f64 + 0.5, j < *k));
                }
            }
            bin_probability(&s, &edges, 5)
        };
        let a = mk([(10, 0), (10, 5), (2, 2)]);
        let b = mk([(10, 0), (10, 5), (10, 0)]);
        assert_eq!(r_squared(&a, &b).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn values_in_unit_interval_and_counts_conserved(
            samples in prop::collection::vec((-8.0f64..8.0, any::<bool>()), 0..300),
        ) {
            let edges: Vec<f64> = (-6..=6).map(|i| i as f64).collect();
            let c = bin_probability(&samples, &edges, 5);
            prop_assert_eq!(c.total() + c.dropped, samples.len() as u64);
            for b in &c.bins {
                if let Some(v) = b.value {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn r_squared_identity_and_permutation(
            vals in prop::collection::vec(0.0f64..1.0, 2..20),
            other in prop::collection::vec(0.0f64..1.0, 20),
            seed in any::<u64>(),
        ) {
            let cand: Vec<f64> = other[..vals.len()].to_vec();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assume!(vals.iter().any(|v| (v - mean).abs() > 1e-6));
            prop_assert_eq!(r_squared_values(&vals, &vals).unwrap(), 1.0);

            let mut order: Vec<usize> = (0..vals.len()).collect();
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let pr: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
            let pc: Vec<f64> = order.iter().map(|&i| cand[i]).collect();
            let a = r_squared_values(&vals, &cand).unwrap();
            let b = r_squared_values(&pr, &pc).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
