//! Rao-Blackwell estimation by reverse simulation.
//!
//! Earlier cumulative success counts are reconstructed backwards from the
//! final data: given `S` successes among `n_{k+1}` responses, the count among
//! the first `n_k` responses is hypergeometric. Histories under which the
//! trial would have stopped, or reached a different decision, before the
//! observed final interim are discarded. The mean of the first-interim
//! estimate over the remaining histories estimates its conditional
//! expectation given the final sufficient statistics.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::Welford;
use crate::design::{pairwise_decision, two_arm_decision, PairVerdict, TrialOutcome};
use crate::error::{Error, Result};
use crate::estimate::EstimateReport;
use crate::hypergeom::Hypergeometric;
use crate::record::{Replay, TrialRecord};
use crate::stats::{v_prime_unchecked, zv_unchecked};

/// Which data enter a comparison in a multi-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataOption {
    /// All data on each arm: one reverse simulation from the end of the trial.
    Option1,
    /// Only data from interims at which both arms were active: one reverse
    /// simulation per distinct elimination interim.
    #[default]
    Option2,
}

/// Information used in the first-interim estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoVariant {
    V,
    VPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rb2Settings {
    pub replicates: u64,
    pub seed: u64,
    pub option: DataOption,
    /// Complete histories below which the report carries a warning.
    pub min_complete: u64,
    /// `None` picks `V'` for stratified records and `V` otherwise.
    pub info_variant: Option<InfoVariant>,
    pub chunk_size: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for Rb2Settings {
    fn default() -> Self {
        Self {
            replicates: 1_000_000,
            seed: 20_240_601,
            option: DataOption::Option2,
            min_complete: 1000,
            info_variant: None,
            chunk_size: 1 << 16,
            threads: None,
        }
    }
}

impl Rb2Settings {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.min_complete == 0 || self.chunk_size == 0 {
            return Err(Error::Record(
                "replicates, completion threshold and chunk size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Requirement on a pair's verdict at an interim before the anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Requirement {
    /// The real trial reached this decisive verdict; the history must too.
    Reproduce(PairVerdict),
    /// Neither arm may be found better than the other.
    Undecided,
}

#[derive(Debug, Clone)]
struct PairCheck {
    a: usize,
    b: usize,
    need: Requirement,
}

#[derive(Debug, Clone)]
struct InterimCheck {
    pairs: Vec<PairCheck>,
    /// Arms left after the real eliminations at this interim; a history in
    /// which they are all mutually no different would have stopped.
    remaining: Vec<usize>,
}

/// One reverse simulation anchored at interim `anchor`.
#[derive(Debug, Clone)]
struct Batch {
    anchor: usize,
    /// Treatment label per arm slot.
    labels: Vec<u8>,
    /// Interim at which each arm's data are fixed to the record.
    arm_anchor: Vec<usize>,
    strata: usize,
    /// `n[(a * strata + c) * anchor + k - 1]`.
    n: Vec<u32>,
    /// Recorded successes at each arm's anchor, `[a * strata + c]`.
    s_anchor: Vec<u32>,
    /// Checks for interims `1..anchor`, index `k - 1`.
    checks: Vec<InterimCheck>,
    two_arm: bool,
    two_arm_spec: crate::design::BoundarySpec,
    /// Pairs estimated from this batch, as arm slots.
    estimate_pairs: Vec<(usize, usize)>,
    use_v_prime: bool,
}

impl Batch {
    #[inline]
    fn idx(&self, a: usize, c: usize, k: usize) -> usize {
        (a * self.strata + c) * self.anchor + k - 1
    }

    #[inline]
    fn score(&self, s: &[u32], a: usize, b: usize, k: usize) -> crate::stats::ScorePair {
        let mut zp = crate::stats::ScorePair::default();
        for c in 0..self.strata {
            let (ia, ib) = (self.idx(a, c, k), self.idx(b, c, k));
            zp += zv_unchecked(self.n[ia], s[ia], self.n[ib], s[ib]);
        }
        zp
    }

    /// Fill `s` with one backward history; returns false as soon as the
    /// history is found inconsistent with the trial.
    fn simulate(&self, s: &mut [u32], rng: &mut ChaCha8Rng) -> bool {
        let arms = self.labels.len();
        for a in 0..arms {
            for c in 0..self.strata {
                let i = self.idx(a, c, self.arm_anchor[a]);
                s[i] = self.s_anchor[a * self.strata + c];
            }
        }
        for k in (1..self.anchor).rev() {
            for a in 0..arms {
                if self.arm_anchor[a] <= k {
                    continue;
                }
                for c in 0..self.strata {
                    let (lo, hi) = (self.idx(a, c, k), self.idx(a, c, k + 1));
                    let (pop, marked, draw) = (self.n[hi], s[hi], self.n[lo]);
                    s[lo] = if draw == pop {
                        marked
                    } else {
                        Hypergeometric::new(u64::from(pop), u64::from(marked), u64::from(draw))
                            .expect("validated counts")
                            .sample(rng) as u32
                    };
                }
            }
            if !self.consistent_at(s, k) {
                return false;
            }
        }
        true
    }

    fn consistent_at(&self, s: &[u32], k: usize) -> bool {
        if self.two_arm {
            return two_arm_decision(self.score(s, 0, 1, k), &self.two_arm_spec)
                == PairVerdict::Continue;
        }
        let check = &self.checks[k - 1];
        let mut verdicts = Vec::with_capacity(check.pairs.len());
        for p in &check.pairs {
            let v = pairwise_decision(self.score(s, p.a, p.b, k), &self.two_arm_spec);
            let ok = match p.need {
                Requirement::Reproduce(real) => v == real,
                Requirement::Undecided => !v.is_decisive(),
            };
            if !ok {
                return false;
            }
            verdicts.push(((p.a, p.b), v));
        }
        if check.remaining.len() >= 2 {
            let all_nd = check.remaining.iter().enumerate().all(|(x, &i)| {
                check.remaining[x + 1..].iter().all(|&j| {
                    verdicts
                        .iter()
                        .find(|((a, b), _)| (*a == i && *b == j) || (*a == j && *b == i))
                        .is_some_and(|(_, v)| *v == PairVerdict::NoDifference)
                })
            });
            if all_nd {
                return false;
            }
        }
        true
    }

    /// First-interim estimate for a pair: `(theta_hat, information)`.
    fn first_estimate(&self, s: &[u32], a: usize, b: usize) -> (f64, f64) {
        let (mut z, mut info) = (0.0, 0.0);
        for c in 0..self.strata {
            let (ia, ib) = (self.idx(a, c, 1), self.idx(b, c, 1));
            let zp = zv_unchecked(self.n[ia], s[ia], self.n[ib], s[ib]);
            z += zp.z;
            info += if self.use_v_prime {
                v_prime_unchecked(self.n[ia], s[ia], self.n[ib], s[ib])
            } else {
                zp.v
            };
        }
        (if info > 0.0 { z / info } else { f64::NAN }, info)
    }

    fn first_proportion(&self, s: &[u32], a: usize) -> f64 {
        let (mut n, mut x) = (0u64, 0u64);
        for c in 0..self.strata {
            let i = self.idx(a, c, 1);
            n += u64::from(self.n[i]);
            x += u64::from(s[i]);
        }
        x as f64 / n as f64
    }
}

/// Tallies from a set of reverse simulations in one batch.
#[derive(Debug, Clone, PartialEq)]
struct BatchTally {
    complete: u64,
    theta: Vec<Welford>,
    info: Vec<Welford>,
    undefined: Vec<u64>,
    proportion: Vec<Welford>,
}

impl BatchTally {
    fn new(pairs: usize, arms: usize) -> Self {
        Self {
            complete: 0,
            theta: vec![Welford::default(); pairs],
            info: vec![Welford::default(); pairs],
            undefined: vec![0; pairs],
            proportion: vec![Welford::default(); arms],
        }
    }

    fn merge(&mut self, o: &BatchTally) {
        self.complete += o.complete;
        for (a, b) in self.theta.iter_mut().zip(&o.theta) {
            a.merge(b);
        }
        for (a, b) in self.info.iter_mut().zip(&o.info) {
            a.merge(b);
        }
        for (a, b) in self.undefined.iter_mut().zip(&o.undefined) {
            *a += b;
        }
        for (a, b) in self.proportion.iter_mut().zip(&o.proportion) {
            a.merge(b);
        }
    }
}

fn run_chunk(batch: &Batch, seed: u64, stream: u64, count: u64) -> BatchTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let arms = batch.labels.len();
    let mut s = vec![0u32; arms * batch.strata * batch.anchor];
    let mut tally = BatchTally::new(batch.estimate_pairs.len(), arms);
    for _ in 0..count {
        if !batch.simulate(&mut s, &mut rng) {
            continue;
        }
        tally.complete += 1;
        for (p, &(a, b)) in batch.estimate_pairs.iter().enumerate() {
            let (theta, info) = batch.first_estimate(&s, a, b);
            if theta.is_finite() {
                tally.theta[p].push(theta);
                tally.info[p].push(info);
            } else {
                tally.undefined[p] += 1;
            }
        }
        for a in 0..arms {
            tally.proportion[a].push(batch.first_proportion(&s, a));
        }
    }
    tally
}

/// Success-probability estimate for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmProbability {
    pub treatment: u8,
    pub p_hat: f64,
    pub anchor_interim: usize,
}

/// Summary of one anchored reverse simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub anchor_interim: usize,
    pub replicates: u64,
    pub complete: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rb2Result {
    pub pairs: Vec<EstimateReport>,
    pub arms: Vec<ArmProbability>,
    pub batches: Vec<BatchSummary>,
}

impl Rb2Result {
    pub fn pair(&self, first: u8, second: u8) -> Option<&EstimateReport> {
        self.pairs
            .iter()
            .find(|r| r.first == first && r.second == second)
    }
}

fn build_batch(
    record: &TrialRecord,
    replay: &Replay,
    anchor: usize,
    estimate_pairs: Vec<(u8, u8)>,
    use_v_prime: bool,
) -> Batch {
    let labels = record.treatment_ids();
    let strata = record.n_strata();
    let arm_anchor: Vec<usize> = record
        .treatments
        .iter()
        .map(|a| a.last_interim.min(anchor))
        .collect();
    let mut n = vec![0u32; labels.len() * strata * anchor];
    let mut s_anchor = vec![0u32; labels.len() * strata];
    for (a, arm) in record.treatments.iter().enumerate() {
        for c in 0..strata {
            for k in 1..=arm_anchor[a] {
                n[(a * strata + c) * anchor + k - 1] = arm.strata[c].n[k - 1];
            }
            s_anchor[a * strata + c] = arm.strata[c].s[arm_anchor[a] - 1];
        }
    }
    let slot = |t: u8| labels.iter().position(|&x| x == t).expect("label");
    let mut checks = Vec::new();
    if !record.is_two_arm() {
        for k in 1..anchor {
            let real = &replay.interims[k - 1];
            let active: Vec<usize> = (0..labels.len())
                .filter(|&a| record.treatments[a].last_interim >= k)
                .collect();
            let mut pairs = Vec::new();
            for (x, &a) in active.iter().enumerate() {
                for &b in &active[x + 1..] {
                    let key = (labels[a].min(labels[b]), labels[a].max(labels[b]));
                    let v = real
                        .verdicts
                        .get(&key)
                        .copied()
                        .unwrap_or(PairVerdict::Continue);
                    let (pa, pb) = (slot(key.0), slot(key.1));
                    let need = if v.is_decisive() {
                        Requirement::Reproduce(v)
                    } else {
                        Requirement::Undecided
                    };
                    pairs.push(PairCheck { a: pa, b: pb, need });
                }
            }
            let remaining = active
                .iter()
                .copied()
                .filter(|&a| !real.eliminated.contains_key(&labels[a]))
                .collect();
            checks.push(InterimCheck { pairs, remaining });
        }
    }
    Batch {
        anchor,
        labels: labels.clone(),
        arm_anchor,
        strata,
        n,
        s_anchor,
        checks,
        two_arm: record.is_two_arm(),
        two_arm_spec: record.design.boundary,
        estimate_pairs: estimate_pairs
            .iter()
            .map(|&(i, j)| (slot(i), slot(j)))
            .collect(),
        use_v_prime,
    }
}

fn run_batch(batch: &Batch, settings: &Rb2Settings) -> BatchTally {
    let chunks = settings.replicates.div_ceil(settings.chunk_size);
    let per_chunk = |c: u64| {
        let count = settings
            .chunk_size
            .min(settings.replicates - c * settings.chunk_size);
        let stream = ((batch.anchor as u64) << 40) | c;
        run_chunk(batch, settings.seed, stream, count)
    };
    let tallies: Vec<BatchTally> = (0..chunks).into_par_iter().map(per_chunk).collect();
    let mut total = BatchTally::new(batch.estimate_pairs.len(), batch.labels.len());
    for t in &tallies {
        total.merge(t);
    }
    total
}

/// Method RB2 for a two-arm or multi-arm record.
pub fn rb2_analysis(record: &TrialRecord, settings: &Rb2Settings) -> Result<Rb2Result> {
    settings.validate()?;
    record.validate()?;
    match settings.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Record(format!("cannot start worker pool: {e}")))?
            .install(|| rb2_inner(record, settings)),
        None => rb2_inner(record, settings),
    }
}

fn rb2_inner(record: &TrialRecord, settings: &Rb2Settings) -> Result<Rb2Result> {
    let replay = record.replay()?;
    let labels = record.treatment_ids();
    let terminal = record.terminal_interim();
    let use_v_prime = match settings.info_variant {
        Some(v) => v == InfoVariant::VPrime,
        None => record.is_stratified(),
    };
    let mut warnings = Vec::new();
    if let Some(m) = &replay.mismatch {
        warnings.push(format!("record does not follow the design: {m}"));
    }
    if matches!(replay.outcome, Some(TrialOutcome::Inconclusive(_))) {
        warnings.push(
            "trial ended without a verdict; only stopping at earlier interims is filtered".into(),
        );
    }

    // Anchor interim -> pairs estimated there.
    let mut plan: BTreeMap<usize, Vec<(u8, u8)>> = BTreeMap::new();
    for (x, &i) in labels.iter().enumerate() {
        for &j in &labels[x + 1..] {
            let (i, j) = (i.min(j), i.max(j));
            let anchor = match settings.option {
                DataOption::Option1 => terminal,
                DataOption::Option2 => {
                    let li = record.arm(i).expect("arm").last_interim;
                    let lj = record.arm(j).expect("arm").last_interim;
                    li.min(lj)
                }
            };
            plan.entry(anchor).or_default().push((i, j));
        }
    }
    // Arms need a batch for their success-probability estimate too.
    for arm in &record.treatments {
        let a = match settings.option {
            DataOption::Option1 => terminal,
            DataOption::Option2 => arm.last_interim,
        };
        plan.entry(a).or_default();
    }

    let mut pairs = Vec::new();
    let mut arms: BTreeMap<u8, ArmProbability> = BTreeMap::new();
    let mut batches = Vec::new();
    for (&anchor, est_pairs) in &plan {
        let batch = build_batch(record, &replay, anchor, est_pairs.clone(), use_v_prime);
        let tally = run_batch(&batch, settings);
        batches.push(BatchSummary {
            anchor_interim: anchor,
            replicates: settings.replicates,
            complete: tally.complete,
        });
        if tally.complete == 0 {
            return Err(Error::NoConsistentHistories {
                replicates: settings.replicates,
            });
        }
        let proportion = tally.complete as f64 / settings.replicates as f64;
        for (a, arm) in record.treatments.iter().enumerate() {
            let own = match settings.option {
                DataOption::Option1 => terminal,
                DataOption::Option2 => arm.last_interim,
            };
            if own == anchor {
                arms.insert(
                    arm.treatment,
                    ArmProbability {
                        treatment: arm.treatment,
                        p_hat: tally.proportion[a].mean,
                        anchor_interim: anchor,
                    },
                );
            }
        }
        for (p, &(i, j)) in est_pairs.iter().enumerate() {
            let th = &tally.theta[p];
            if th.count == 0 {
                return Err(Error::ZeroInformation(format!(
                    "treatments {i} and {j}: no complete history has first-interim information"
                )));
            }
            let v1 = tally.info[p].mean;
            let var = th.variance();
            let se2 = 1.0 / v1 - var;
            if se2 < 0.0 {
                return Err(Error::NegativeVariance(se2));
            }
            let mut r = EstimateReport::wald("rb2", i, j, th.mean, se2.sqrt())
                .with_diagnostic("proportion_complete", proportion)
                .with_diagnostic("complete", tally.complete as f64)
                .with_diagnostic("replicates", settings.replicates as f64)
                .with_diagnostic("anchor_interim", anchor as f64)
                .with_diagnostic("conditional_variance", var)
                .with_diagnostic("v1", v1)
                .with_diagnostic("monte_carlo_se", th.standard_error());
            if tally.undefined[p] > 0 {
                r.diagnostics
                    .insert("undefined".into(), tally.undefined[p] as f64);
            }
            r.warnings = warnings.clone();
            if tally.complete < settings.min_complete {
                r.warnings.push(format!(
                    "only {} complete histories (threshold {}); estimate is unreliable",
                    tally.complete, settings.min_complete
                ));
            }
            pairs.push(r);
        }
    }
    pairs.sort_by_key(|r| (r.first, r.second));
    Ok(Rb2Result {
        pairs,
        arms: arms.into_values().collect(),
        batches,
    })
}

/// One backward history drawn from the end of the trial, without filtering:
/// `paths[arm][stratum]` holds cumulative successes at interims
/// `1..=last_interim` of that arm.
pub fn reverse_path(record: &TrialRecord, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Vec<u32>>>> {
    record.validate()?;
    let replay = record.replay()?;
    let anchor = record.terminal_interim();
    let mut batch = build_batch(record, &replay, anchor, Vec::new(), false);
    batch.two_arm = false;
    batch.checks = vec![
        InterimCheck {
            pairs: Vec::new(),
            remaining: Vec::new(),
        };
        anchor.saturating_sub(1)
    ];
    let mut s = vec![0u32; batch.labels.len() * batch.strata * anchor];
    batch.simulate(&mut s, rng);
    Ok(record
        .treatments
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            (0..batch.strata)
                .map(|c| {
                    (1..=arm.last_interim)
                        .map(|k| s[batch.idx(a, c, k)])
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Whether a two-arm history (successes per arm at interims `1..=K*`)
/// continues at every interim before the last.
pub fn is_complete_two_arm(record: &TrialRecord, s1: &[u32], s2: &[u32]) -> bool {
    let spec = &record.design.boundary;
    let (a, b) = (&record.treatments[0], &record.treatments[1]);
    (1..a.last_interim).all(|k| {
        let zp = zv_unchecked(
            a.strata[0].n[k - 1],
            s1[k - 1],
            b.strata[0].n[k - 1],
            s2[k - 1],
        );
        two_arm_decision(zp, spec) == PairVerdict::Continue
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignPlan;
    use crate::record::ArmRecord;

    fn stopped_at_one() -> TrialRecord {
        TrialRecord {
            design: DesignPlan::two_arm_default(),
            treatments: vec![
                ArmRecord::unstratified(1, vec![36], vec![35]),
                ArmRecord::unstratified(2, vec![36], vec![5]),
            ],
        }
    }

    #[test]
    fn single_interim_record_gives_naive_estimate() {
        let rec = stopped_at_one();
        let zp = rec.score_between(1, 1, 2, 1).unwrap();
        let settings = Rb2Settings {
            replicates: 1000,
            ..Default::default()
        };
        let r = rb2_analysis(&rec, &settings).unwrap();
        let p = r.pair(1, 2).unwrap();
        assert_eq!(p.theta_hat, zp.z / zp.v);
        assert_eq!(p.diagnostics["conditional_variance"], 0.0);
        assert!((p.se.unwrap() - 1.0 / zp.v.sqrt()).abs() < 1e-12);
        assert_eq!(p.diagnostics["proportion_complete"], 1.0);
    }

    #[test]
    fn path_is_anchored_and_monotone() {
        let rec = TrialRecord {
            design: DesignPlan::two_arm_default(),
            treatments: vec![
                ArmRecord::unstratified(1, vec![36, 72, 108], vec![20, 41, 60]),
                ArmRecord::unstratified(2, vec![36, 72, 108], vec![22, 45, 70]),
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = reverse_path(&rec, &mut rng).unwrap();
            assert_eq!(p[0][0][2], 60);
            assert_eq!(p[1][0][2], 70);
            for arm in &p {
                let s = &arm[0];
                assert!(s[0] <= s[1] && s[1] <= s[2]);
                assert!(36 - s[0] <= 72 - s[1] && 72 - s[1] <= 108 - s[2]);
            }
        }
    }

    #[test]
    fn few_complete_histories_are_flagged() {
        let rec = TrialRecord {
            design: DesignPlan::two_arm_default(),
            treatments: vec![
                ArmRecord::unstratified(1, vec![36, 72], vec![20, 41]),
                ArmRecord::unstratified(2, vec![36, 72], vec![22, 45]),
            ],
        };
        let settings = Rb2Settings {
            replicates: 100,
            min_complete: 1000,
            ..Default::default()
        };
        let r = rb2_analysis(&rec, &settings).unwrap();
        assert!(r.pairs[0].warnings.iter().any(|w| w.contains("unreliable")));
    }
}
