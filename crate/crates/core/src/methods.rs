//! Estimators behind one trait, looked up by name at runtime.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    naive_from_score, orderings_analysis, rb1_analysis, AnalyticSettings, ScheduleMode,
    TwoArmOutcome,
};
use crate::error::{Error, Result};
use crate::estimate::EstimateReport;
use crate::record::TrialRecord;
use crate::reverse::{rb2_analysis, DataOption, Rb2Settings};

/// Settings shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub schedule: ScheduleMode,
    pub analytic: AnalyticSettings,
    pub rb2: Rb2Settings,
}

pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Whether the method applies to records with more than two arms.
    fn multi_arm(&self) -> bool;
    fn analyze(
        &self,
        record: &TrialRecord,
        options: &AnalysisOptions,
    ) -> Result<Vec<EstimateReport>>;
}

fn two_arm_only(method: &str, record: &TrialRecord) -> Result<()> {
    if record.is_two_arm() {
        Ok(())
    } else {
        Err(Error::Unsupported {
            method: method.into(),
            what: "multi-arm records".into(),
        })
    }
}

fn relabel(mut r: EstimateReport, record: &TrialRecord) -> EstimateReport {
    r.first = record.treatments[0].treatment;
    r.second = record.treatments[1].treatment;
    r
}

pub struct Naive;

impl Estimator for Naive {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn description(&self) -> &'static str {
        "final Z/V ignoring the sequential design"
    }

    fn multi_arm(&self) -> bool {
        true
    }

    fn analyze(
        &self,
        record: &TrialRecord,
        options: &AnalysisOptions,
    ) -> Result<Vec<EstimateReport>> {
        let ids = record.treatment_ids();
        let mut out = Vec::new();
        for (x, &i) in ids.iter().enumerate() {
            for &j in &ids[x + 1..] {
                let (li, lj) = (
                    record.arm(i).expect("arm").last_interim,
                    record.arm(j).expect("arm").last_interim,
                );
                let (ki, kj) = match options.rb2.option {
                    DataOption::Option2 => (li.min(lj), li.min(lj)),
                    DataOption::Option1 => (li, lj),
                };
                let zp = record.score_between(i, ki, j, kj)?;
                let mut r = naive_from_score(zp.z, zp.v, i, j)?;
                r.diagnostics.insert("interim".into(), ki.min(kj) as f64);
                out.push(r);
            }
        }
        Ok(out)
    }
}

pub struct Orderings;

impl Estimator for Orderings {
    fn name(&self) -> &'static str {
        "orderings"
    }

    fn description(&self) -> &'static str {
        "median-unbiased estimate and interval from the stage-wise ordering"
    }

    fn multi_arm(&self) -> bool {
        false
    }

    fn analyze(
        &self,
        record: &TrialRecord,
        options: &AnalysisOptions,
    ) -> Result<Vec<EstimateReport>> {
        two_arm_only(self.name(), record)?;
        let outcome = TwoArmOutcome::from_record(record, options.schedule)?;
        Ok(vec![relabel(
            orderings_analysis(&outcome, &options.analytic)?,
            record,
        )])
    }
}

pub struct Rb1;

impl Estimator for Rb1 {
    fn name(&self) -> &'static str {
        "rb1"
    }

    fn description(&self) -> &'static str {
        "Rao-Blackwell estimate from the exit distribution"
    }

    fn multi_arm(&self) -> bool {
        false
    }

    fn analyze(
        &self,
        record: &TrialRecord,
        options: &AnalysisOptions,
    ) -> Result<Vec<EstimateReport>> {
        two_arm_only(self.name(), record)?;
        let outcome = TwoArmOutcome::from_record(record, options.schedule)?;
        Ok(vec![relabel(
            rb1_analysis(&outcome, &options.analytic)?,
            record,
        )])
    }
}

pub struct Rb2;

impl Estimator for Rb2 {
    fn name(&self) -> &'static str {
        "rb2"
    }

    fn description(&self) -> &'static str {
        "Rao-Blackwell estimate by reverse simulation"
    }

    fn multi_arm(&self) -> bool {
        true
    }

    fn analyze(
        &self,
        record: &TrialRecord,
        options: &AnalysisOptions,
    ) -> Result<Vec<EstimateReport>> {
        Ok(rb2_analysis(record, &options.rb2)?.pairs)
    }
}

/// Estimators keyed by name.
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Estimator>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, estimator: Box<dyn Estimator>) {
        self.entries.insert(estimator.name(), estimator);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Estimator> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    /// Look up several names, failing on the first unknown one.
    pub fn select(&self, names: &[String]) -> Result<Vec<&dyn Estimator>> {
        names.iter().map(|n| self.get(n)).collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Naive));
        r.register(Box::new(Orderings));
        r.register(Box::new(Rb1));
        r.register(Box::new(Rb2));
        r
    }
}
