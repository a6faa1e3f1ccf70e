//! Cumulative trial data by treatment, stratum and interim, and its JSON form.
//!
//! A record stores for each treatment the cumulative number of responses and
//! successes in every stratum at each interim the treatment attended. An arm
//! eliminated at interim `k` has series of length `k`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{
    two_arm_decision, BoundaryKind, DesignPlan, InterimDecisions, MultiArmState, PairVerdict,
    TrialOutcome,
};
use crate::error::{Error, Result};
use crate::stats::{zv_unchecked, ScorePair};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSeries {
    pub centre: u8,
    /// Cumulative responses at interims `1..=last_interim`.
    pub n: Vec<u32>,
    /// Cumulative successes at interims `1..=last_interim`.
    pub s: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmRecord {
    pub treatment: u8,
    pub last_interim: usize,
    pub strata: Vec<StratumSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_s: Option<u32>,
}

impl ArmRecord {
    /// Single-stratum arm from cumulative series.
    pub fn unstratified(treatment: u8, n: Vec<u32>, s: Vec<u32>) -> Self {
        Self {
            treatment,
            last_interim: n.len(),
            strata: vec![StratumSeries { centre: 1, n, s }],
            total_n: None,
            total_s: None,
        }
    }

    /// `(n, s)` in stratum index `c` at interim `k` (1-based).
    pub fn at(&self, c: usize, k: usize) -> (u32, u32) {
        let st = &self.strata[c];
        (st.n[k - 1], st.s[k - 1])
    }

    /// Totals over strata at interim `k`.
    pub fn totals_at(&self, k: usize) -> (u32, u32) {
        self.strata
            .iter()
            .fold((0, 0), |(n, s), st| (n + st.n[k - 1], s + st.s[k - 1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub design: DesignPlan,
    pub treatments: Vec<ArmRecord>,
}

/// Replay of a record through its design's decision rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub interims: Vec<InterimDecisions>,
    pub outcome: Option<TrialOutcome>,
    /// Set when the replayed trial does not end as the record does.
    pub mismatch: Option<String>,
}

impl TrialRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: TrialRecord = serde_json::from_str(text)
            .map_err(|e| Error::Record(format!("malformed JSON: {e}")))?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Record(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn is_two_arm(&self) -> bool {
        self.design.boundary.kind == BoundaryKind::TwoArmTriangular
    }

    pub fn n_strata(&self) -> usize {
        self.treatments.first().map_or(0, |a| a.strata.len())
    }

    pub fn is_stratified(&self) -> bool {
        self.n_strata() > 1
    }

    /// Final interim of the trial.
    pub fn terminal_interim(&self) -> usize {
        self.treatments
            .iter()
            .map(|a| a.last_interim)
            .max()
            .unwrap_or(0)
    }

    pub fn arm(&self, treatment: u8) -> Option<&ArmRecord> {
        self.treatments.iter().find(|a| a.treatment == treatment)
    }

    pub fn arm_index(&self, treatment: u8) -> Option<usize> {
        self.treatments
            .iter()
            .position(|a| a.treatment == treatment)
    }

    pub fn treatment_ids(&self) -> Vec<u8> {
        self.treatments.iter().map(|a| a.treatment).collect()
    }

    /// Stratified score of arm `i` against arm `j`, each at its own interim.
    pub fn score_between(&self, i: u8, ki: usize, j: u8, kj: usize) -> Result<ScorePair> {
        let (a, b) = (
            self.arm(i)
                .ok_or_else(|| Error::Record(format!("no treatment {i}")))?,
            self.arm(j)
                .ok_or_else(|| Error::Record(format!("no treatment {j}")))?,
        );
        if ki == 0 || ki > a.last_interim || kj == 0 || kj > b.last_interim {
            return Err(Error::Record(format!(
                "interims {ki}/{kj} outside the data of treatments {i}/{j}"
            )));
        }
        Ok((0..self.n_strata()).fold(ScorePair::default(), |acc, c| {
            let (ni, si) = a.at(c, ki);
            let (nj, sj) = b.at(c, kj);
            acc + zv_unchecked(ni, si, nj, sj)
        }))
    }

    /// Per-stratum scores of `i` against `j` at interim `k`.
    pub fn strata_scores(&self, i: u8, j: u8, k: usize) -> Result<Vec<ScorePair>> {
        let (a, b) = (
            self.arm(i)
                .ok_or_else(|| Error::Record(format!("no treatment {i}")))?,
            self.arm(j)
                .ok_or_else(|| Error::Record(format!("no treatment {j}")))?,
        );
        if k == 0 || k > a.last_interim.min(b.last_interim) {
            return Err(Error::Record(format!(
                "interim {k} outside the joint data of treatments {i} and {j}"
            )));
        }
        Ok((0..self.n_strata())
            .map(|c| {
                let (ni, si) = a.at(c, k);
                let (nj, sj) = b.at(c, k);
                zv_unchecked(ni, si, nj, sj)
            })
            .collect())
    }

    /// Check every structural invariant, naming the first violation.
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.treatments.is_empty() {
            return Err(Error::Record("no treatments".into()));
        }
        let strata = self.treatments[0].strata.len();
        if strata == 0 {
            return Err(Error::Record(format!(
                "treatment {}: no strata",
                self.treatments[0].treatment
            )));
        }
        if strata != self.design.n_strata {
            return Err(Error::Record(format!(
                "design declares {} strata but treatment {} has {}",
                self.design.n_strata, self.treatments[0].treatment, strata
            )));
        }
        let mut seen = Vec::new();
        for arm in &self.treatments {
            let t = arm.treatment;
            if seen.contains(&t) {
                return Err(Error::Record(format!("treatment {t} appears twice")));
            }
            seen.push(t);
            if arm.last_interim == 0 {
                return Err(Error::Record(format!(
                    "treatment {t}: last interim must be at least 1"
                )));
            }
            if arm.strata.len() != strata {
                return Err(Error::Record(format!(
                    "treatment {t}: {} strata, expected {strata}",
                    arm.strata.len()
                )));
            }
            for st in &arm.strata {
                let c = st.centre;
                if st.n.len() != arm.last_interim || st.s.len() != arm.last_interim {
                    return Err(Error::Record(format!(
                        "treatment {t}, stratum {c}: series lengths {}/{} differ from last interim {}",
                        st.n.len(),
                        st.s.len(),
                        arm.last_interim
                    )));
                }
                for k in 0..arm.last_interim {
                    let (n, s) = (st.n[k], st.s[k]);
                    if s > n {
                        return Err(Error::Record(format!(
                            "treatment {t}, stratum {c}, interim {}: {s} successes exceed {n} responses",
                            k + 1
                        )));
                    }
                    if k > 0 {
                        let (pn, ps) = (st.n[k - 1], st.s[k - 1]);
                        if n < pn {
                            return Err(Error::Record(format!(
                                "treatment {t}, stratum {c}, interim {}: responses fall from {pn} to {n}",
                                k + 1
                            )));
                        }
                        if s < ps {
                            return Err(Error::Record(format!(
                                "treatment {t}, stratum {c}, interim {}: successes fall from {ps} to {s}",
                                k + 1
                            )));
                        }
                        if n - s < pn - ps {
                            return Err(Error::Record(format!(
                                "treatment {t}, stratum {c}, interim {}: failures fall from {} to {}",
                                k + 1,
                                pn - ps,
                                n - s
                            )));
                        }
                    }
                }
            }
            let (tn, ts) = arm.totals_at(arm.last_interim);
            if let Some(d) = arm.total_n {
                if d != tn {
                    return Err(Error::Record(format!(
                        "treatment {t}: declared total of {d} responses, strata sum to {tn}"
                    )));
                }
            }
            if let Some(d) = arm.total_s {
                if d != ts {
                    return Err(Error::Record(format!(
                        "treatment {t}: declared total of {d} successes, strata sum to {ts}"
                    )));
                }
            }
        }
        if self.is_two_arm() {
            if self.treatments.len() != 2 {
                return Err(Error::Record(format!(
                    "two-arm design with {} treatments",
                    self.treatments.len()
                )));
            }
            if self.treatments[0].last_interim != self.treatments[1].last_interim {
                return Err(Error::Record(
                    "two-arm record: treatments end at different interims".into(),
                ));
            }
        }
        Ok(())
    }

    /// Replay the recorded data through the design's decision rules.
    pub fn replay(&self) -> Result<Replay> {
        if self.is_two_arm() {
            return Ok(self.replay_two_arm());
        }
        let ids = self.treatment_ids();
        let mut state = MultiArmState::new(self.design.clone(), &ids)?;
        let terminal = self.terminal_interim();
        let mut mismatch = None;
        for k in 1..=terminal {
            let mut fresh = BTreeMap::new();
            for &t in state.active() {
                let arm = self.arm(t).expect("active arm in record");
                if arm.last_interim < k {
                    mismatch = Some(format!(
                        "treatment {t} has no data at interim {k} but the design keeps it"
                    ));
                    break;
                }
                fresh.insert(
                    t,
                    (0..self.n_strata())
                        .map(|c| arm.at(c, k))
                        .collect::<Vec<_>>(),
                );
            }
            if mismatch.is_some() {
                break;
            }
            let out = state.step(&fresh)?;
            let decided = state.history().last().expect("step recorded");
            for &t in decided.eliminated.keys() {
                let last = self.arm(t).expect("arm").last_interim;
                if last != k {
                    mismatch = Some(format!(
                        "design eliminates treatment {t} at interim {k} but the record ends it at {last}"
                    ));
                }
            }
            if out.is_some() {
                if k != terminal {
                    mismatch = Some(format!(
                        "design stops at interim {k} but the record continues to {terminal}"
                    ));
                }
                break;
            }
        }
        if mismatch.is_none() && state.outcome().is_none() {
            mismatch = Some(format!(
                "design does not stop by the final recorded interim {terminal}"
            ));
        }
        Ok(Replay {
            interims: state.history().to_vec(),
            outcome: state.outcome().cloned(),
            mismatch,
        })
    }

    fn replay_two_arm(&self) -> Replay {
        let (a, b) = (&self.treatments[0], &self.treatments[1]);
        let terminal = a.last_interim;
        let spec = &self.design.boundary;
        let mut interims = Vec::new();
        let mut outcome = None;
        let mut mismatch = None;
        for k in 1..=terminal {
            let zp = self
                .score_between(a.treatment, k, b.treatment, k)
                .expect("validated record");
            let v = two_arm_decision(zp, spec);
            let stop = match v {
                PairVerdict::UpperCross => Some(TrialOutcome::SoleWinner(a.treatment)),
                PairVerdict::LowerCross => Some(TrialOutcome::SoleWinner(b.treatment)),
                _ if k >= self.design.max_interims => {
                    Some(TrialOutcome::Inconclusive(vec![a.treatment, b.treatment]))
                }
                _ => None,
            };
            interims.push(InterimDecisions {
                interim: k,
                verdicts: BTreeMap::from([((a.treatment, b.treatment), v)]),
                scores: BTreeMap::from([((a.treatment, b.treatment), zp)]),
                eliminated: BTreeMap::new(),
                stop: stop.clone(),
            });
            if stop.is_some() {
                outcome = stop;
                if k != terminal {
                    mismatch = Some(format!(
                        "design stops at interim {k} but the record continues to {terminal}"
                    ));
                }
                break;
            }
        }
        if outcome.is_none() {
            mismatch = Some(format!(
                "design does not stop by the final recorded interim {terminal}"
            ));
        }
        Replay {
            interims,
            outcome,
            mismatch,
        }
    }

    /// Rows mirroring the printed layout: treatment, last interim, centre,
    /// final n, final S, then the cumulative series.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("treatment,last_interim,centre,n,s,n_series,s_series\n");
        for arm in &self.treatments {
            for st in &arm.strata {
                let join = |v: &[u32]| {
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    arm.treatment,
                    arm.last_interim,
                    st.centre,
                    st.n.last().copied().unwrap_or(0),
                    st.s.last().copied().unwrap_or(0),
                    join(&st.n),
                    join(&st.s)
                ));
            }
        }
        out
    }
}
