//! Stopping and elimination boundaries, and the multi-arm trial state machine.
//!
//! Two boundary families are supported. The two-arm triangular test stops
//! when `Z >= a + c_out V` (upper) or `Z <= -a + c_in V` (lower). The
//! pairwise double-triangular rule declares arm `i` better than `j` when
//! `Z >= a + c_out V`, worse when `Z <= -a - c_out V`, and no different when
//! `Z` lies in the open interval `(a - c_in V, -a + c_in V)` (only possible
//! once that interval is non-empty). Boundary ties count as crossings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{zv_unchecked, ScorePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    TwoArmTriangular,
    PairwiseDoubleTriangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub intercept: f64,
    pub slope_out: f64,
    pub slope_in: f64,
}

impl BoundarySpec {
    pub fn two_arm_default() -> Self {
        Self {
            kind: BoundaryKind::TwoArmTriangular,
            intercept: 10.93898,
            slope_out: 0.123134,
            slope_in: 0.369402,
        }
    }

    pub fn four_arm_default() -> Self {
        Self {
            kind: BoundaryKind::PairwiseDoubleTriangular,
            intercept: 10.90266,
            slope_out: 0.12380,
            slope_in: 0.37140,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intercept > 0.0) || !self.intercept.is_finite() {
            return Err(Error::Design(format!(
                "intercept must be positive, got {}",
                self.intercept
            )));
        }
        if !self.slope_out.is_finite() || !self.slope_in.is_finite() {
            return Err(Error::Design("slopes must be finite".into()));
        }
        if self.slope_out > self.slope_in {
            return Err(Error::Design(format!(
                "outer slope {} exceeds inner slope {}",
                self.slope_out, self.slope_in
            )));
        }
        Ok(())
    }

    /// Upper (superiority) boundary at information `v`.
    pub fn upper(&self, v: f64) -> f64 {
        self.intercept + self.slope_out * v
    }

    /// Lower boundary at information `v`: the futility edge for the
    /// triangular test, the inferiority edge for the double triangle.
    pub fn lower(&self, v: f64) -> f64 {
        match self.kind {
            BoundaryKind::TwoArmTriangular => -self.intercept + self.slope_in * v,
            BoundaryKind::PairwiseDoubleTriangular => -self.intercept - self.slope_out * v,
        }
    }

    /// Open no-difference interval of the double triangle at `v`, if non-empty.
    pub fn no_difference_interval(&self, v: f64) -> Option<(f64, f64)> {
        let lo = self.intercept - self.slope_in * v;
        let hi = -self.intercept + self.slope_in * v;
        (lo < hi).then_some((lo, hi))
    }

    /// Information at which the two triangular boundaries meet.
    pub fn apex_information(&self) -> Option<f64> {
        match self.kind {
            BoundaryKind::TwoArmTriangular => {
                let d = self.slope_in - self.slope_out;
                (d > 0.0).then(|| 2.0 * self.intercept / d)
            }
            BoundaryKind::PairwiseDoubleTriangular => {
                (self.slope_in > 0.0).then(|| self.intercept / self.slope_in)
            }
        }
    }

    /// Mean of the two boundary slopes of the triangular test.
    pub fn mean_slope(&self) -> f64 {
        0.5 * (self.slope_out + self.slope_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairVerdict {
    Better,
    Worse,
    NoDifference,
    UpperCross,
    LowerCross,
    Continue,
}

impl PairVerdict {
    /// Verdict from the other arm's point of view.
    pub fn mirrored(self) -> Self {
        match self {
            PairVerdict::Better => PairVerdict::Worse,
            PairVerdict::Worse => PairVerdict::Better,
            other => other,
        }
    }

    pub fn is_decisive(self) -> bool {
        matches!(self, PairVerdict::Better | PairVerdict::Worse)
    }
}

/// Double-triangular verdict for arm `i` against arm `j` given their score.
pub fn pairwise_decision(zp: ScorePair, spec: &BoundarySpec) -> PairVerdict {
    let (z, v) = (zp.z, zp.v);
    if z >= spec.intercept + spec.slope_out * v {
        PairVerdict::Better
    } else if z <= -spec.intercept - spec.slope_out * v {
        PairVerdict::Worse
    } else if matches!(spec.no_difference_interval(v), Some((lo, hi)) if z > lo && z < hi) {
        PairVerdict::NoDifference
    } else {
        PairVerdict::Continue
    }
}

/// Triangular-test verdict. Beyond the apex both conditions can hold; the
/// upper boundary is checked first.
pub fn two_arm_decision(zp: ScorePair, spec: &BoundarySpec) -> PairVerdict {
    if zp.z >= spec.upper(zp.v) {
        PairVerdict::UpperCross
    } else if zp.z <= -spec.intercept + spec.slope_in * zp.v {
        PairVerdict::LowerCross
    } else {
        PairVerdict::Continue
    }
}

/// First interim (1-based) at which a no-difference verdict is possible when
/// information grows by `v_increment` per interim, or `None` if never.
pub fn no_difference_feasible_from(spec: &BoundarySpec, v_increment: f64) -> Option<usize> {
    if !(spec.slope_in > 0.0) || !(v_increment > 0.0) {
        return None;
    }
    let threshold = spec.intercept / spec.slope_in;
    let mut k = (threshold / v_increment).floor().max(1.0) as usize;
    while spec
        .no_difference_interval(k as f64 * v_increment)
        .is_none()
    {
        k += 1;
    }
    while k > 1
        && spec
            .no_difference_interval((k - 1) as f64 * v_increment)
            .is_some()
    {
        k -= 1;
    }
    Some(k)
}

/// Full design: boundaries plus cadence and caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPlan {
    pub boundary: BoundarySpec,
    /// New responses per active arm between interims.
    pub per_arm_increment: u32,
    /// Anticipated information gained per interim.
    pub v_increment_nominal: f64,
    /// Cap on total responses; `None` disables it.
    pub max_total_patients: Option<u64>,
    pub planned_interims: usize,
    pub max_interims: usize,
    pub n_strata: usize,
}

impl DesignPlan {
    pub fn two_arm_default() -> Self {
        Self {
            boundary: BoundarySpec::two_arm_default(),
            per_arm_increment: 36,
            v_increment_nominal: 4.4419,
            max_total_patients: None,
            planned_interims: 20,
            max_interims: 25,
            n_strata: 1,
        }
    }

    pub fn four_arm_default() -> Self {
        Self {
            boundary: BoundarySpec::four_arm_default(),
            per_arm_increment: 36,
            v_increment_nominal: 4.40337,
            max_total_patients: Some(2772),
            planned_interims: 20,
            max_interims: 100,
            n_strata: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.boundary.validate()?;
        if self.per_arm_increment == 0 {
            return Err(Error::Design("per-arm increment must be positive".into()));
        }
        if self.planned_interims == 0 || self.planned_interims > self.max_interims {
            return Err(Error::Design(format!(
                "planned interims {} must be in 1..={}",
                self.planned_interims, self.max_interims
            )));
        }
        if !(self.v_increment_nominal > 0.0) {
            return Err(Error::Design(
                "nominal information increment must be positive".into(),
            ));
        }
        if self.n_strata == 0 {
            return Err(Error::Design("at least one stratum is required".into()));
        }
        Ok(())
    }

    /// Nominal information at the final planned interim.
    pub fn v_max_nominal(&self) -> f64 {
        self.planned_interims as f64 * self.v_increment_nominal
    }
}

/// Terminal state of a multi-arm trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arms", rename_all = "snake_case")]
pub enum TrialOutcome {
    SoleWinner(u8),
    JointWinners(Vec<u8>),
    /// Stopped at the patient cap (or interim limit) with comparisons unresolved.
    Inconclusive(Vec<u8>),
}

impl TrialOutcome {
    pub fn label(&self) -> String {
        let arms = |a: &[u8]| {
            a.iter()
                .map(|t| format!("T{t}"))
                .collect::<Vec<_>>()
                .join("+")
        };
        match self {
            TrialOutcome::SoleWinner(t) => format!("sole winner T{t}"),
            TrialOutcome::JointWinners(a) => format!("joint winners {}", arms(a)),
            TrialOutcome::Inconclusive(a) => format!("inconclusive, remaining {}", arms(a)),
        }
    }
}

/// Everything decided at one interim.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimDecisions {
    pub interim: usize,
    /// Verdict for every active pair `(i, j)` with `i < j`, from `i`'s side.
    pub verdicts: BTreeMap<(u8, u8), PairVerdict>,
    /// Scores for every active pair, from `i`'s side.
    pub scores: BTreeMap<(u8, u8), ScorePair>,
    /// Eliminated arm mapped to the arms it was found worse than.
    pub eliminated: BTreeMap<u8, Vec<u8>>,
    pub stop: Option<TrialOutcome>,
}

/// Cumulative counts of one arm across strata.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ArmState {
    n: Vec<u32>,
    s: Vec<u32>,
}

/// Sequential state of a multi-arm trial under the double-triangular rules.
#[derive(Debug, Clone)]
pub struct MultiArmState {
    plan: DesignPlan,
    arms: BTreeMap<u8, ArmState>,
    active: Vec<u8>,
    interim: usize,
    resolved: BTreeMap<(u8, u8), PairVerdict>,
    stopped: Option<TrialOutcome>,
    history: Vec<InterimDecisions>,
}

impl MultiArmState {
    pub fn new(plan: DesignPlan, treatments: &[u8]) -> Result<Self> {
        plan.validate()?;
        if treatments.is_empty() {
            return Err(Error::Design("no treatments".into()));
        }
        let mut active = treatments.to_vec();
        active.sort_unstable();
        active.dedup();
        if active.len() != treatments.len() {
            return Err(Error::Design("duplicate treatment labels".into()));
        }
        let strata = plan.n_strata;
        let arms = active
            .iter()
            .map(|&t| {
                (
                    t,
                    ArmState {
                        n: vec![0; strata],
                        s: vec![0; strata],
                    },
                )
            })
            .collect();
        Ok(Self {
            plan,
            arms,
            active,
            interim: 0,
            resolved: BTreeMap::new(),
            stopped: None,
            history: Vec::new(),
        })
    }

    pub fn plan(&self) -> &DesignPlan {
        &self.plan
    }

    pub fn active(&self) -> &[u8] {
        &self.active
    }

    pub fn interim(&self) -> usize {
        self.interim
    }

    pub fn outcome(&self) -> Option<&TrialOutcome> {
        self.stopped.as_ref()
    }

    pub fn history(&self) -> &[InterimDecisions] {
        &self.history
    }

    pub fn resolved(&self) -> &BTreeMap<(u8, u8), PairVerdict> {
        &self.resolved
    }

    /// Total responses so far across all arms and strata.
    pub fn total_patients(&self) -> u64 {
        self.arms
            .values()
            .flat_map(|a| a.n.iter())
            .map(|&n| u64::from(n))
            .sum()
    }

    /// Cumulative `(n, s)` for arm `t` in stratum `c`.
    pub fn counts(&self, t: u8, c: usize) -> Option<(u32, u32)> {
        self.arms.get(&t).map(|a| (a.n[c], a.s[c]))
    }

    /// True when one more interim would push the total past the cap.
    pub fn next_interim_exceeds_cap(&self) -> bool {
        match self.plan.max_total_patients {
            Some(cap) => {
                let next = self.total_patients()
                    + self.active.len() as u64 * u64::from(self.plan.per_arm_increment);
                next > cap
            }
            None => false,
        }
    }

    /// Apply one interim analysis given updated cumulative counts
    /// `cumulative[t] = [(n, s); n_strata]` for every active arm `t`.
    /// Returns the outcome when the trial stops.
    pub fn step(
        &mut self,
        cumulative: &BTreeMap<u8, Vec<(u32, u32)>>,
    ) -> Result<Option<TrialOutcome>> {
        if self.stopped.is_some() {
            return Err(Error::Design("trial has already stopped".into()));
        }
        for &t in &self.active {
            let fresh = cumulative
                .get(&t)
                .ok_or_else(|| Error::Record(format!("missing counts for active treatment {t}")))?;
            if fresh.len() != self.plan.n_strata {
                return Err(Error::Record(format!(
                    "treatment {t}: expected {} strata, got {}",
                    self.plan.n_strata,
                    fresh.len()
                )));
            }
            let prev = &self.arms[&t];
            for (c, &(n, s)) in fresh.iter().enumerate() {
                if s > n {
                    return Err(Error::Record(format!(
                        "treatment {t}, stratum {}, interim {}: {s} successes exceed {n} responses",
                        c + 1,
                        self.interim + 1
                    )));
                }
                if n < prev.n[c] || s < prev.s[c] || n - s < prev.n[c] - prev.s[c] {
                    return Err(Error::Record(format!(
                        "treatment {t}, stratum {}, interim {}: cumulative counts decrease",
                        c + 1,
                        self.interim + 1
                    )));
                }
            }
        }
        for (t, fresh) in cumulative {
            if !self.active.contains(t) && self.arms.contains_key(t) {
                let prev = &self.arms[t];
                let same = fresh
                    .iter()
                    .enumerate()
                    .all(|(c, &(n, s))| n == prev.n[c] && s == prev.s[c]);
                if !same {
                    return Err(Error::Record(format!(
                        "treatment {t} was eliminated but accrued further responses"
                    )));
                }
            }
        }
        for &t in &self.active {
            let arm = self.arms.get_mut(&t).expect("active arm present");
            for (c, &(n, s)) in cumulative[&t].iter().enumerate() {
                arm.n[c] = n;
                arm.s[c] = s;
            }
        }
        self.interim += 1;
        let decisions = self.decide();
        let stop = decisions.stop.clone();
        for (&(i, j), &v) in &decisions.verdicts {
            if v.is_decisive() {
                self.resolved.insert((i, j), v);
            }
        }
        self.active
            .retain(|t| !decisions.eliminated.contains_key(t));
        self.history.push(decisions);
        if stop.is_none() && self.next_interim_exceeds_cap() {
            let outcome = TrialOutcome::Inconclusive(self.active.clone());
            self.history.last_mut().expect("just pushed").stop = Some(outcome.clone());
            self.stopped = Some(outcome.clone());
            return Ok(Some(outcome));
        }
        if stop.is_none() && self.interim >= self.plan.max_interims {
            let outcome = TrialOutcome::Inconclusive(self.active.clone());
            self.history.last_mut().expect("just pushed").stop = Some(outcome.clone());
            self.stopped = Some(outcome.clone());
            return Ok(Some(outcome));
        }
        self.stopped = stop.clone();
        Ok(stop)
    }

    /// Verdicts and eliminations from the current snapshot, without mutation.
    fn decide(&self) -> InterimDecisions {
        let strata = self.plan.n_strata;
        let score = |i: u8, j: u8| {
            let (a, b) = (&self.arms[&i], &self.arms[&j]);
            (0..strata).fold(ScorePair::default(), |acc, c| {
                acc + zv_unchecked(a.n[c], a.s[c], b.n[c], b.s[c])
            })
        };
        let mut verdicts = BTreeMap::new();
        let mut scores = BTreeMap::new();
        let mut eliminated: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
        for (x, &i) in self.active.iter().enumerate() {
            for &j in &self.active[x + 1..] {
                let zp = score(i, j);
                let v = pairwise_decision(zp, &self.plan.boundary);
                match v {
                    PairVerdict::Better => eliminated.entry(j).or_default().push(i),
                    PairVerdict::Worse => eliminated.entry(i).or_default().push(j),
                    _ => {}
                }
                verdicts.insert((i, j), v);
                scores.insert((i, j), zp);
            }
        }
        let remaining: Vec<u8> = self
            .active
            .iter()
            .copied()
            .filter(|t| !eliminated.contains_key(t))
            .collect();
        let stop = match remaining.len() {
            0 => Some(TrialOutcome::Inconclusive(remaining)),
            1 => Some(TrialOutcome::SoleWinner(remaining[0])),
            _ => {
                let all_nd = remaining.iter().enumerate().all(|(x, &i)| {
                    remaining[x + 1..]
                        .iter()
                        .all(|&j| verdicts[&(i, j)] == PairVerdict::NoDifference)
                });
                all_nd.then(|| TrialOutcome::JointWinners(remaining.clone()))
            }
        };
        InterimDecisions {
            interim: self.interim,
            verdicts,
            scores,
            eliminated,
            stop,
        }
    }
}
