//! Score statistics for pairwise binary comparisons.
//!
//! For arms `i` and `j` with `n` responses and `s` successes each, the
//! efficient score for the log-odds ratio and its Fisher information are
//!
//! ```text
//! Z = (n_j s_i - n_i s_j) / (n_i + n_j)
//! V = n_i n_j (s_i + s_j)(n_i + n_j - s_i - s_j) / (n_i + n_j)^3
//! ```
//!
//! Positive `Z` favours arm `i`. Stratified analyses sum `Z` and `V` over
//! strata. All inputs are exact integer counts; nothing is updated
//! incrementally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative responses and successes for one arm within one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCount {
    pub treatment: u8,
    pub stratum: u8,
    pub n: u32,
    pub s: u32,
}

impl ArmCount {
    pub fn new(treatment: u8, stratum: u8, n: u32, s: u32) -> Result<Self> {
        if s > n {
            return Err(Error::Record(format!(
                "treatment {treatment}, stratum {stratum}: {s} successes exceed {n} responses"
            )));
        }
        Ok(Self {
            treatment,
            stratum,
            n,
            s,
        })
    }
}

/// Efficient score and Fisher information for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScorePair {
    pub z: f64,
    pub v: f64,
}

impl ScorePair {
    pub fn new(z: f64, v: f64) -> Self {
        Self { z, v }
    }

    /// Naive estimate `Z / V`, `None` when there is no information.
    pub fn theta_hat(&self) -> Option<f64> {
        (self.v > 0.0).then(|| self.z / self.v)
    }
}

impl std::ops::Add for ScorePair {
    type Output = ScorePair;

    fn add(self, rhs: ScorePair) -> ScorePair {
        ScorePair {
            z: self.z + rhs.z,
            v: self.v + rhs.v,
        }
    }
}

impl std::ops::AddAssign for ScorePair {
    fn add_assign(&mut self, rhs: ScorePair) {
        self.z += rhs.z;
        self.v += rhs.v;
    }
}

/// Log-odds ratio on the natural-log scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogOddsRatio(pub f64);

impl LogOddsRatio {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn odds_ratio(self) -> f64 {
        self.0.exp()
    }
}

/// Score and information for arm `a` against arm `b`.
pub fn zv_statistic(a: ArmCount, b: ArmCount) -> Result<ScorePair> {
    let total = u64::from(a.n) + u64::from(b.n);
    if total == 0 {
        return Err(Error::EmptyComparison);
    }
    Ok(zv_unchecked(a.n, a.s, b.n, b.s))
}

/// Same as [`zv_statistic`] but returns a zero pair for an empty comparison.
#[inline]
pub(crate) fn zv_unchecked(ni: u32, si: u32, nj: u32, sj: u32) -> ScorePair {
    let (ni, si, nj, sj) = (f64::from(ni), f64::from(si), f64::from(nj), f64::from(sj));
    let t = ni + nj;
    if t == 0.0 {
        return ScorePair::default();
    }
    let succ = si + sj;
    let z = (nj * si - ni * sj) / t;
    let v = ni * nj * succ * (t - succ) / (t * t * t);
    ScorePair { z, v }
}

/// Small-sample corrected information, used only for first-interim
/// estimates in stratified analyses:
/// `V' = n_i n_j (s_i + s_j)(n_i + n_j - s_i - s_j) / ((n_i + n_j)^2 (n_i + n_j - 1))`.
pub fn v_prime(a: ArmCount, b: ArmCount) -> Result<f64> {
    let total = u64::from(a.n) + u64::from(b.n);
    if total < 2 {
        return Err(Error::DegenerateStratum);
    }
    Ok(v_prime_unchecked(a.n, a.s, b.n, b.s))
}

#[inline]
pub(crate) fn v_prime_unchecked(ni: u32, si: u32, nj: u32, sj: u32) -> f64 {
    let (ni, si, nj, sj) = (f64::from(ni), f64::from(si), f64::from(nj), f64::from(sj));
    let t = ni + nj;
    if t < 2.0 {
        return 0.0;
    }
    let succ = si + sj;
    ni * nj * succ * (t - succ) / (t * t * (t - 1.0))
}

/// Componentwise sum over strata.
pub fn stratified_sum(pairs: &[ScorePair]) -> Result<ScorePair> {
    if pairs.is_empty() {
        return Err(Error::EmptyStrata);
    }
    Ok(pairs
        .iter()
        .copied()
        .fold(ScorePair::default(), |acc, p| acc + p))
}

/// `log{p_i (1 - p_j)} - log{p_j (1 - p_i)}`.
pub fn log_odds_ratio(p_i: f64, p_j: f64) -> Result<LogOddsRatio> {
    let inside = |p: f64| p > 0.0 && p < 1.0;
    if !inside(p_i) || !inside(p_j) {
        return Err(Error::InfiniteLogOdds(p_i, p_j));
    }
    Ok(LogOddsRatio(
        (p_i * (1.0 - p_j)).ln() - (p_j * (1.0 - p_i)).ln(),
    ))
}

/// Success probability whose log-odds ratio against `p_ref` is `theta`.
pub fn probability_with_log_odds(p_ref: f64, theta: f64) -> f64 {
    let odds = p_ref / (1.0 - p_ref) * theta.exp();
    odds / (1.0 + odds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arm(n: u32, s: u32) -> ArmCount {
        ArmCount::new(0, 0, n, s).unwrap()
    }

    #[test]
    fn two_arm_terminal_case_one() {
        let zp = zv_statistic(arm(72, 35), arm(72, 59)).unwrap();
        assert!((zp.z + 12.0).abs() < 1e-12);
        assert!((zp.v - 8.160).abs() < 5e-4, "v = {}", zp.v);
    }

    #[test]
    fn centre_one_first_comparison() {
        let zp = zv_statistic(arm(41, 35), arm(39, 25)).unwrap();
        assert!((zp.z - 4.25).abs() < 1e-12);
        assert!((zp.v - 3.75).abs() < 5e-3, "v = {}", zp.v);
    }

    #[test]
    fn equal_arms_score_zero() {
        let zp = zv_statistic(arm(30, 12), arm(30, 12)).unwrap();
        assert_eq!(zp.z, 0.0);
    }

    #[test]
    fn empty_comparison_is_an_error() {
        assert_eq!(
            zv_statistic(arm(0, 0), arm(0, 0)),
            Err(Error::EmptyComparison)
        );
    }

    #[test]
    fn successes_above_responses_rejected() {
        assert!(ArmCount::new(1, 1, 3, 4).is_err());
    }

    #[test]
    fn v_prime_all_successes_is_zero() {
        assert_eq!(v_prime(arm(10, 10), arm(7, 7)).unwrap(), 0.0);
    }

    #[test]
    fn v_prime_interim_one_centre_one() {
        let vp = v_prime(arm(11, 10), arm(9, 8)).unwrap();
        assert!((vp - 3564.0 / 7600.0).abs() < 1e-12);
    }

    #[test]
    fn v_prime_degenerate() {
        assert_eq!(v_prime(arm(1, 0), arm(0, 0)), Err(Error::DegenerateStratum));
    }

    #[test]
    fn stratified_totals() {
        let strata = [
            ScorePair::new(4.25, 3.75),
            ScorePair::new(5.10, 3.76),
            ScorePair::new(-0.50, 4.25),
            ScorePair::new(5.53, 4.53),
        ];
        let total = stratified_sum(&strata).unwrap();
        assert!((total.z - 14.38).abs() < 1e-9);
        assert!((total.v - 16.29).abs() < 1e-9);
        assert_eq!(stratified_sum(&strata[..1]).unwrap(), strata[0]);
        assert_eq!(stratified_sum(&[]), Err(Error::EmptyStrata));
    }

    #[test]
    fn log_odds_examples() {
        assert!((log_odds_ratio(0.6, 0.5).unwrap().0 - 1.5f64.ln()).abs() < 1e-12);
        assert!((log_odds_ratio(0.692, 0.6).unwrap().0 - 0.405).abs() < 1e-3);
        assert_eq!(log_odds_ratio(0.3, 0.3).unwrap().0, 0.0);
        assert!(log_odds_ratio(1.0, 0.5).is_err());
        assert!(log_odds_ratio(0.5, 0.0).is_err());
    }

    #[test]
    fn probability_inverse_of_log_odds() {
        let p = probability_with_log_odds(0.6, 1.5f64.ln());
        assert!((log_odds_ratio(p, 0.6).unwrap().0 - 1.5f64.ln()).abs() < 1e-12);
    }

    fn counts() -> impl Strategy<Value = (u32, u32, u32, u32)> {
        (1u32..200, 1u32..200).prop_flat_map(|(ni, nj)| (Just(ni), 0..=ni, Just(nj), 0..=nj))
    }

    proptest! {
        #[test]
        fn score_is_antisymmetric((ni, si, nj, sj) in counts()) {
            let ab = zv_statistic(arm(ni, si), arm(nj, sj)).unwrap();
            let ba = zv_statistic(arm(nj, sj), arm(ni, si)).unwrap();
            prop_assert_eq!(ab.z, -ba.z);
            prop_assert_eq!(ab.v, ba.v);
            prop_assert!(ab.v >= 0.0);
            prop_assert!(ab.z.abs() <= f64::from(ni + nj) / 2.0);
        }

        #[test]
        fn v_prime_rescales_v((ni, si, nj, sj) in counts()) {
            let t = f64::from(ni + nj);
            prop_assume!(t >= 2.0);
            let v = zv_statistic(arm(ni, si), arm(nj, sj)).unwrap().v;
            let vp = v_prime(arm(ni, si), arm(nj, sj)).unwrap();
            let expected = v * t / (t - 1.0);
            prop_assert!((vp - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn stratified_sum_is_order_free(zs in proptest::collection::vec((-50.0f64..50.0, 0.0f64..30.0), 1..8)) {
            let pairs: Vec<ScorePair> = zs.iter().map(|&(z, v)| ScorePair::new(z, v)).collect();
            let mut rev = pairs.clone();
            rev.reverse();
            let a = stratified_sum(&pairs).unwrap();
            let b = stratified_sum(&rev).unwrap();
            prop_assert!((a.z - b.z).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9);
            let (left, right) = pairs.split_at(pairs.len() / 2);
            if !left.is_empty() {
                let nested = stratified_sum(left).unwrap() + stratified_sum(right).unwrap_or_default();
                prop_assert!((nested.z - a.z).abs() < 1e-9 && (nested.v - a.v).abs() < 1e-9);
            }
        }

        #[test]
        fn log_odds_antisymmetric(p in 0.01f64..0.99, q in 0.01f64..0.99) {
            let a = log_odds_ratio(p, q).unwrap().0;
            let b = log_odds_ratio(q, p).unwrap().0;
            prop_assert!((a + b).abs() < 1e-12);
        }
    }
}
