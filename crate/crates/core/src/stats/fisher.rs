use serde::{Deserialize, Serialize};

/// 2×2 contingency table.
///
/// Rows are conflict / no conflict, columns lane change / no lane change:
///
/// ```text
///               LC   no LC
/// conflict       a     b
/// no conflict    c     d
/// ```
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Table2x2 { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Lane-change proportion in the conflict row, if the row is non-empty.
    pub fn conflict_rate(&self) -> Option<f64> {
        let n = self.a + self.b;
        (n > 0).then(|| self.a as f64 / n as f64)
    }

    pub fn no_conflict_rate(&self) -> Option<f64> {
        let n = self.c + self.d;
        (n > 0).then(|| self.c as f64 / n as f64)
    }
}

/// Relative slack when comparing point probabilities against the observed one.
const REL_SLACK: f64 = 1e-7;

/// Two-sided Fisher exact test, "sum of small p-values" convention.
///
/// With the margins fixed, the count in the top-left cell follows a
/// hypergeometric law. The p-value sums the point probabilities of every
/// table no more likely than the observed one. Log point probabilities are
/// accumulated from the mode outward with the ratio recurrence
///
/// ```text
/// P(k+1) / P(k) = (r1 - k)(c1 - k) / ((k + 1)(r2 - c1 + k + 1))
/// ```
///
/// and normalised by their sum, so no factorial of the table total is ever
/// formed. An all-zero table gives `p = 1`.
pub fn fisher_exact_two_sided(t: &Table2x2) -> f64 {
    let n = t.total();
    if n == 0 {
        return 1.0;
    }
    let r1 = t.a + t.b;
    let r2 = t.c + t.d;
    let c1 = t.a + t.c;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    if lo == hi {
        return 1.0;
    }

    // Mode of the hypergeometric distribution.
    let mode = (((r1 + 1) as f64 * (c1 + 1) as f64) / (n + 2) as f64).floor() as u64;
    let mode = mode.clamp(lo, hi);

    let len = (hi - lo + 1) as usize;
    let mut logp = vec![0.0f64; len];
    let idx = |k: u64| (k - lo) as usize;
    let (r1f, r2f, c1f) = (r1 as f64, r2 as f64, c1 as f64);
    // Upward from the mode.
    for k in mode..hi {
        let kf = k as f64;
        let ratio = ((r1f - kf) * (c1f - kf)) / ((kf + 1.0) * (r2f - c1f + kf + 1.0));
        logp[idx(k + 1)] = logp[idx(k)] + ratio.ln();
    }
    // Downward: P(k-1)/P(k) is the reciprocal of the ratio at k-1.
    for k in (lo + 1..=mode).rev() {
        let kf = (k - 1) as f64;
        let ratio = ((r1f - kf) * (c1f - kf)) / ((kf + 1.0) * (r2f - c1f + kf + 1.0));
        logp[idx(k - 1)] = logp[idx(k)] - ratio.ln();
    }

    let total: f64 = logp.iter().map(|l| l.exp()).sum();
    let observed = logp[idx(t.a)];
    let threshold = observed + REL_SLACK.ln_1p();
    let tail: f64 = logp
        .iter()
        .filter(|l| **l <= threshold)
        .map(|l| l.exp())
        .sum();
    (tail / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn symmetric_modal_table() {
        assert_relative_eq!(fisher_exact_two_sided(&Table2x2::new(5, 5, 5, 5)), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn small_tables_against_enumerated_values() {
        // Margins (4,4,4,4): point probabilities 1,16,36,16,1 over 70.
        assert_relative_eq!(
            fisher_exact_two_sided(&Table2x2::new(3, 1, 1, 3)),
            34.0 / 70.0,
            max_relative = 1e-12
        );
        // C(20,10) = 184756; only the two extreme tables are as unlikely.
        assert_relative_eq!(
            fisher_exact_two_sided(&Table2x2::new(10, 0, 0, 10)),
            2.0 / 184756.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn degenerate_tables() {
        assert_eq!(fisher_exact_two_sided(&Table2x2::default()), 1.0);
        assert_eq!(fisher_exact_two_sided(&Table2x2::new(0, 0, 3, 7)), 1.0);
        assert_eq!(fisher_exact_two_sided(&Table2x2::new(0, 4, 0, 6)), 1.0);
    }

    #[test]
    fn row_and_column_swap_invariance() {
        for t in [Table2x2::new(3, 9, 14, 2), Table2x2::new(0, 5, 7, 1), Table2x2::new(12, 40, 3, 77)] {
            let swapped = Table2x2::new(t.d, t.c, t.b, t.a);
            assert_relative_eq!(
                fisher_exact_two_sided(&t),
                fisher_exact_two_sided(&swapped),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn large_table_is_finite() {
        let p = fisher_exact_two_sided(&Table2x2::new(250_000, 250_000, 249_000, 251_000));
        assert!(p > 0.0 && p < 1.0, "{p}");
    }
}
