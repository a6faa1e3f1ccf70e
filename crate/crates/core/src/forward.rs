//! Forward Monte Carlo of two-arm and multi-arm trials.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::Welford;
use crate::design::{
    two_arm_decision, BoundaryKind, DesignPlan, MultiArmState, PairVerdict, TrialOutcome,
};
use crate::error::{Error, Result};
use crate::methods::{AnalysisOptions, Estimator};
use crate::record::{ArmRecord, StratumSeries, TrialRecord};
use crate::stats::{log_odds_ratio, zv_unchecked, ScorePair};

/// Success probabilities and design for a batch of simulated trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub design: DesignPlan,
    /// `probabilities[arm][centre]`; arms are labelled `1..`.
    pub probabilities: Vec<Vec<f64>>,
    pub replicates: u64,
    pub seed: u64,
    /// Joint-winner set counted as the no-difference conclusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nod_targets: Option<Vec<u8>>,
}

impl Scenario {
    /// Single-centre four-arm scenario under the default design.
    pub fn four_arm(p: &[f64], replicates: u64, seed: u64) -> Self {
        Self {
            design: DesignPlan::four_arm_default(),
            probabilities: p.iter().map(|&x| vec![x]).collect(),
            replicates,
            seed,
            nod_targets: None,
        }
    }

    /// Four-centre scenario; `by_centre[c][arm]`.
    pub fn mixed(by_centre: &[Vec<f64>], replicates: u64, seed: u64) -> Self {
        let arms = by_centre.first().map_or(0, |c| c.len());
        let mut design = DesignPlan::four_arm_default();
        design.n_strata = by_centre.len();
        Self {
            design,
            probabilities: (0..arms)
                .map(|a| by_centre.iter().map(|c| c[a]).collect())
                .collect(),
            replicates,
            seed,
            nod_targets: None,
        }
    }

    /// Two-arm scenario: experimental arm with log-odds ratio `theta`
    /// against a control with success probability `p_control`.
    pub fn two_arm(theta: f64, p_control: f64, replicates: u64, seed: u64) -> Self {
        let p = crate::stats::probability_with_log_odds(p_control, theta);
        Self {
            design: DesignPlan::two_arm_default(),
            probabilities: vec![vec![p], vec![p_control]],
            replicates,
            seed,
            nod_targets: None,
        }
    }

    pub fn arms(&self) -> usize {
        self.probabilities.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.probabilities.is_empty() {
            return Err(Error::Scenario("no treatments".into()));
        }
        for (a, row) in self.probabilities.iter().enumerate() {
            if row.len() != self.design.n_strata {
                return Err(Error::Scenario(format!(
                    "treatment {}: {} centre probabilities for {} strata",
                    a + 1,
                    row.len(),
                    self.design.n_strata
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Scenario(format!(
                    "treatment {}: probability {p} outside [0, 1]",
                    a + 1
                )));
            }
        }
        if self.design.boundary.kind == BoundaryKind::TwoArmTriangular && self.arms() != 2 {
            return Err(Error::Scenario(format!(
                "two-arm design with {} treatments",
                self.arms()
            )));
        }
        if let Some(t) = &self.nod_targets {
            if t.iter().any(|&x| x == 0 || usize::from(x) > self.arms()) {
                return Err(Error::Scenario(
                    "no-difference target outside the arms".into(),
                ));
            }
        }
        Ok(())
    }

    /// Success probability of each arm averaged over centres.
    pub fn mean_probabilities(&self) -> Vec<f64> {
        self.probabilities
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Joint-winner set counted by the no-difference rate: arms tied for the
    /// highest mean probability, or arms 1 and 2 when one arm is best alone.
    pub fn nod_target_set(&self) -> Vec<u8> {
        if let Some(t) = &self.nod_targets {
            return t.clone();
        }
        let mean = self.mean_probabilities();
        let best = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<u8> = (0..mean.len())
            .filter(|&a| (mean[a] - best).abs() < 1e-12)
            .map(|a| a as u8 + 1)
            .collect();
        if top.len() >= 2 {
            top
        } else {
            vec![1, 2]
        }
    }

    /// True log-odds ratio of arm `i` over arm `j` from mean probabilities.
    pub fn true_log_odds(&self, i: u8, j: u8) -> f64 {
        let m = self.mean_probabilities();
        log_odds_ratio(m[usize::from(i) - 1], m[usize::from(j) - 1])
            .map(|t| t.0)
            .unwrap_or(f64::NAN)
    }
}

/// Independent seed for item `index` of a run with master seed `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn binomial(n: u32, p: f64, rng: &mut ChaCha8Rng) -> u32 {
    Binomial::new(u64::from(n), p)
        .expect("probability validated")
        .sample(rng) as u32
}

/// Split `n` patients over `c` equiprobable centres.
fn multinomial_split(n: u32, c: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut left = n;
    let mut out = Vec::with_capacity(c);
    for i in 0..c {
        let x = if i + 1 == c {
            left
        } else {
            binomial(left, 1.0 / (c - i) as f64, rng)
        };
        out.push(x);
        left -= x;
    }
    out
}

/// One simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrial {
    pub record: TrialRecord,
    pub outcome: TrialOutcome,
    /// Interim at which each eliminated arm left.
    pub eliminated: BTreeMap<u8, usize>,
    pub total_patients: u64,
}

struct Accrual {
    n: Vec<Vec<Vec<u32>>>,
    s: Vec<Vec<Vec<u32>>>,
}

impl Accrual {
    fn new(arms: usize, strata: usize) -> Self {
        Self {
            n: vec![vec![Vec::new(); strata]; arms],
            s: vec![vec![Vec::new(); strata]; arms],
        }
    }

    fn add(&mut self, scenario: &Scenario, arm: usize, rng: &mut ChaCha8Rng) {
        let strata = scenario.design.n_strata;
        let inc = scenario.design.per_arm_increment;
        let split = if strata == 1 {
            vec![inc]
        } else {
            multinomial_split(inc, strata, rng)
        };
        for (c, &m) in split.iter().enumerate() {
            let succ = binomial(m, scenario.probabilities[arm][c], rng);
            let (pn, ps) = (
                self.n[arm][c].last().copied().unwrap_or(0),
                self.s[arm][c].last().copied().unwrap_or(0),
            );
            self.n[arm][c].push(pn + m);
            self.s[arm][c].push(ps + succ);
        }
    }

    fn current(&self, arm: usize) -> Vec<(u32, u32)> {
        self.n[arm]
            .iter()
            .zip(&self.s[arm])
            .map(|(n, s)| (*n.last().unwrap(), *s.last().unwrap()))
            .collect()
    }

    fn into_record(self, design: &DesignPlan) -> TrialRecord {
        let treatments = self
            .n
            .into_iter()
            .zip(self.s)
            .enumerate()
            .map(|(a, (n, s))| ArmRecord {
                treatment: a as u8 + 1,
                last_interim: n[0].len(),
                strata: n
                    .into_iter()
                    .zip(s)
                    .enumerate()
                    .map(|(c, (n, s))| StratumSeries {
                        centre: c as u8 + 1,
                        n,
                        s,
                    })
                    .collect(),
                total_n: None,
                total_s: None,
            })
            .collect();
        TrialRecord {
            design: design.clone(),
            treatments,
        }
    }
}

/// Simulate replicate `replicate` of the scenario.
pub fn simulate_trial(scenario: &Scenario, replicate: u64) -> Result<SimulatedTrial> {
    scenario.validate()?;
    let mut rng = replicate_rng(scenario.seed, replicate);
    match scenario.design.boundary.kind {
        BoundaryKind::TwoArmTriangular => Ok(simulate_two_arm(scenario, &mut rng)),
        BoundaryKind::PairwiseDoubleTriangular => simulate_multi_arm(scenario, &mut rng),
    }
}

fn simulate_two_arm(scenario: &Scenario, rng: &mut ChaCha8Rng) -> SimulatedTrial {
    let plan = &scenario.design;
    let mut acc = Accrual::new(2, plan.n_strata);
    let mut k = 0;
    let outcome = loop {
        k += 1;
        acc.add(scenario, 0, rng);
        acc.add(scenario, 1, rng);
        let (a, b) = (acc.current(0), acc.current(1));
        let zp = a
            .iter()
            .zip(&b)
            .fold(ScorePair::default(), |z, (&(ni, si), &(nj, sj))| {
                z + zv_unchecked(ni, si, nj, sj)
            });
        match two_arm_decision(zp, &plan.boundary) {
            PairVerdict::UpperCross => break TrialOutcome::SoleWinner(1),
            PairVerdict::LowerCross => break TrialOutcome::SoleWinner(2),
            _ => {}
        }
        let out_of_time =
            k >= plan.max_interims || (k >= plan.planned_interims && zp.v >= plan.v_max_nominal());
        if out_of_time {
            break TrialOutcome::Inconclusive(vec![1, 2]);
        }
    };
    let total = 2 * u64::from(plan.per_arm_increment) * k as u64;
    SimulatedTrial {
        record: acc.into_record(plan),
        outcome,
        eliminated: BTreeMap::new(),
        total_patients: total,
    }
}

fn simulate_multi_arm(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<SimulatedTrial> {
    let arms = scenario.arms();
    let ids: Vec<u8> = (1..=arms as u8).collect();
    let mut state = MultiArmState::new(scenario.design.clone(), &ids)?;
    let mut acc = Accrual::new(arms, scenario.design.n_strata);
    let mut eliminated = BTreeMap::new();
    let outcome = loop {
        let active = state.active().to_vec();
        let mut fresh = BTreeMap::new();
        for &t in &active {
            let a = usize::from(t) - 1;
            acc.add(scenario, a, rng);
            fresh.insert(t, acc.current(a));
        }
        let stop = state.step(&fresh)?;
        let k = state.interim();
        for &t in state
            .history()
            .last()
            .expect("step recorded")
            .eliminated
            .keys()
        {
            eliminated.insert(t, k);
        }
        if let Some(o) = stop {
            break o;
        }
    };
    Ok(SimulatedTrial {
        total_patients: state.total_patients(),
        record: acc.into_record(&scenario.design),
        outcome,
        eliminated,
    })
}

/// Empirical operating characteristics over the scenario's replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub replicates: u64,
    /// Proportion of runs each arm is the sole winner.
    pub win: Vec<f64>,
    /// Proportion of runs each arm is eliminated.
    pub elim: Vec<f64>,
    pub nod: f64,
    pub still: f64,
    pub expected_n: f64,
    pub nod_targets: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
struct OcTally {
    win: Vec<u64>,
    elim: Vec<u64>,
    nod: u64,
    still: u64,
    patients: u64,
}

pub fn operating_characteristics(scenario: &Scenario) -> Result<OperatingCharacteristics> {
    scenario.validate()?;
    let arms = scenario.arms();
    let targets = scenario.nod_target_set();
    let reps = scenario.replicates;
    const CHUNK: u64 = 1024;
    let chunks = reps.div_ceil(CHUNK);
    let tallies: Vec<Result<OcTally>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = OcTally {
                win: vec![0; arms],
                elim: vec![0; arms],
                ..Default::default()
            };
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let sim = simulate_trial(scenario, r)?;
                match &sim.outcome {
                    TrialOutcome::SoleWinner(w) => t.win[usize::from(*w) - 1] += 1,
                    TrialOutcome::JointWinners(set) => {
                        if *set == targets {
                            t.nod += 1;
                        }
                    }
                    TrialOutcome::Inconclusive(_) => t.still += 1,
                }
                for &e in sim.eliminated.keys() {
                    t.elim[usize::from(e) - 1] += 1;
                }
                t.patients += sim.total_patients;
            }
            Ok(t)
        })
        .collect();
    let mut total = OcTally {
        win: vec![0; arms],
        elim: vec![0; arms],
        ..Default::default()
    };
    for t in tallies {
        let t = t?;
        for a in 0..arms {
            total.win[a] += t.win[a];
            total.elim[a] += t.elim[a];
        }
        total.nod += t.nod;
        total.still += t.still;
        total.patients += t.patients;
    }
    let frac = |x: u64| {
        if reps == 0 {
            0.0
        } else {
            x as f64 / reps as f64
        }
    };
    Ok(OperatingCharacteristics {
        replicates: reps,
        win: total.win.iter().map(|&x| frac(x)).collect(),
        elim: total.elim.iter().map(|&x| frac(x)).collect(),
        nod: frac(total.nod),
        still: frac(total.still),
        expected_n: frac(total.patients),
        nod_targets: targets,
    })
}

/// Per-method, per-comparison summary of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: String,
    pub first: u8,
    pub second: u8,
    pub true_theta: f64,
    pub used: u64,
    pub excluded: u64,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    /// Mean reported standard error, absent for interval-only methods.
    pub mean_se: Option<f64>,
    pub mean_ci_low: f64,
    pub mean_ci_high: f64,
    pub coverage: f64,
}

impl StudyRow {
    pub fn bias(&self) -> f64 {
        self.mean_estimate - self.true_theta
    }

    /// Monte Carlo standard error of the mean estimate.
    pub fn bias_se(&self) -> f64 {
        self.sd_estimate / (self.used as f64).sqrt()
    }
}

#[derive(Debug, Clone, Default)]
struct RowTally {
    used: u64,
    excluded: u64,
    estimate: Welford,
    se: Welford,
    low: Welford,
    high: Welford,
    covered: u64,
}

/// Simulate the scenario and analyse every replicate with each method.
/// Analyses that fail, or whose reverse simulation keeps fewer complete
/// histories than the threshold, are counted as exclusions.
pub fn estimator_study(
    scenario: &Scenario,
    methods: &[&dyn Estimator],
    options: &AnalysisOptions,
) -> Result<Vec<StudyRow>> {
    scenario.validate()?;
    let arms = scenario.arms() as u8;
    let pairs: Vec<(u8, u8)> = (1..=arms)
        .flat_map(|i| (i + 1..=arms).map(move |j| (i, j)))
        .collect();
    let per_replicate: Vec<Result<Vec<Vec<Option<crate::estimate::EstimateReport>>>>> = (0
        ..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            let sim = simulate_trial(scenario, r)?;
            let mut opts = *options;
            opts.rb2.seed = derive_seed(options.rb2.seed, r);
            Ok(methods
                .iter()
                .map(|m| {
                    let reports = m.analyze(&sim.record, &opts).unwrap_or_default();
                    pairs
                        .iter()
                        .map(|&(i, j)| {
                            reports
                                .iter()
                                .find(|x| x.first == i && x.second == j)
                                .filter(|x| !x.warnings.iter().any(|w| w.contains("unreliable")))
                                .cloned()
                        })
                        .collect()
                })
                .collect())
        })
        .collect();
    let mut tallies = vec![vec![RowTally::default(); pairs.len()]; methods.len()];
    for rep in per_replicate {
        let rep = rep?;
        for (m, by_pair) in rep.iter().enumerate() {
            for (p, rpt) in by_pair.iter().enumerate() {
                let t = &mut tallies[m][p];
                match rpt {
                    None => t.excluded += 1,
                    Some(x) => {
                        t.used += 1;
                        t.estimate.push(x.theta_hat);
                        if let Some(se) = x.se {
                            t.se.push(se);
                        }
                        t.low.push(x.ci_low);
                        t.high.push(x.ci_high);
                        let (i, j) = pairs[p];
                        if x.covers(scenario.true_log_odds(i, j)) {
                            t.covered += 1;
                        }
                    }
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let t = &tallies[m][p];
            let nan_if_empty = |w: &Welford| if w.count == 0 { f64::NAN } else { w.mean };
            rows.push(StudyRow {
                method: method.name().to_string(),
                first: i,
                second: j,
                true_theta: scenario.true_log_odds(i, j),
                used: t.used,
                excluded: t.excluded,
                mean_estimate: nan_if_empty(&t.estimate),
                sd_estimate: t.estimate.variance().sqrt(),
                mean_se: (t.se.count > 0).then_some(t.se.mean),
                mean_ci_low: nan_if_empty(&t.low),
                mean_ci_high: nan_if_empty(&t.high),
                coverage: if t.used == 0 {
                    f64::NAN
                } else {
                    t.covered as f64 / t.used as f64
                },
            });
        }
    }
    Ok(rows)
}
