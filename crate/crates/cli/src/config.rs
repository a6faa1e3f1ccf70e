//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqrb::analytic::{AnalyticSettings, ScheduleMode};
use seqrb::design::{BoundarySpec, DesignPlan};
use seqrb::forward::{derive_seed, Scenario};
use seqrb::methods::AnalysisOptions;
use seqrb::reverse::Rb2Settings;
use seqrb::stats::probability_with_log_odds;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    TwoArm,
    #[default]
    FourArm,
}

/// Design constants. Fields left out take the preset's values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub preset: Preset,
    pub intercept: Option<f64>,
    pub slope_out: Option<f64>,
    pub slope_in: Option<f64>,
    pub per_arm_increment: Option<u32>,
    pub v_increment: Option<f64>,
    /// Zero removes the cap.
    pub max_total_patients: Option<u64>,
    pub planned_interims: Option<usize>,
    pub max_interims: Option<usize>,
    /// Log-odds ratio at which power is reported.
    pub alternative: Option<f64>,
}

impl DesignConfig {
    pub fn plan(&self) -> DesignPlan {
        let mut p = match self.preset {
            Preset::TwoArm => DesignPlan::two_arm_default(),
            Preset::FourArm => DesignPlan::four_arm_default(),
        };
        let b: &mut BoundarySpec = &mut p.boundary;
        if let Some(x) = self.intercept {
            b.intercept = x;
        }
        if let Some(x) = self.slope_out {
            b.slope_out = x;
        }
        if let Some(x) = self.slope_in {
            b.slope_in = x;
        }
        if let Some(x) = self.per_arm_increment {
            p.per_arm_increment = x;
        }
        if let Some(x) = self.v_increment {
            p.v_increment_nominal = x;
        }
        if let Some(x) = self.max_total_patients {
            p.max_total_patients = (x > 0).then_some(x);
        }
        if let Some(x) = self.planned_interims {
            p.planned_interims = x;
        }
        if let Some(x) = self.max_interims {
            p.max_interims = x;
        }
        p
    }

    pub fn alternative(&self) -> f64 {
        self.alternative.unwrap_or(1.5f64.ln())
    }
}

/// Success probabilities for each arm, optionally split by centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probabilities {
    PerArm(Vec<f64>),
    PerArmCentre(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub label: String,
    pub probabilities: Option<Probabilities>,
    /// Two-arm alternative to `probabilities`: log-odds ratio of arm 1
    /// over a control arm with success probability `p_control`.
    pub theta: Option<f64>,
    pub p_control: Option<f64>,
    pub nod_targets: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateConfig {
    pub replicates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub record: Option<PathBuf>,
    pub methods: Vec<String>,
    pub schedule: ScheduleMode,
    pub analytic: AnalyticSettings,
    pub rb2: Rb2Settings,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            record: None,
            methods: ["naive", "orderings", "rb1", "rb2"]
                .map(String::from)
                .to_vec(),
            schedule: ScheduleMode::default(),
            analytic: AnalyticSettings::default(),
            rb2: Rb2Settings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    /// Analysis report files (JSON written by `analyze`).
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; scenario and reverse-simulation seeds derive from it.
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub design: DesignConfig,
    pub scenarios: Vec<ScenarioConfig>,
    pub simulate: ReplicateConfig,
    pub oc: ReplicateConfig,
    pub study: ReplicateConfig,
    pub analysis: AnalysisConfig,
    pub plot: PlotConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            out: PathBuf::from("seqrb-out"),
            threads: None,
            design: DesignConfig::default(),
            scenarios: Vec::new(),
            simulate: ReplicateConfig { replicates: 10 },
            oc: ReplicateConfig { replicates: 10_000 },
            study: ReplicateConfig { replicates: 200 },
            analysis: AnalysisConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))
    }

    /// Read and check a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(r) = &mut cfg.analysis.record {
            *r = base.join(&*r);
        }
        for r in &mut cfg.plot.reports {
            *r = base.join(&*r);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let missing = self
            .analysis
            .record
            .iter()
            .chain(&self.plot.reports)
            .find(|p| !p.exists());
        if let Some(p) = missing {
            return Err(CliError::Validation(format!(
                "config refers to missing file {}",
                p.display()
            )));
        }
        self.design.plan().validate()?;
        for (i, s) in self.scenarios.iter().enumerate() {
            self.scenario(i, s, 0)?;
        }
        Ok(())
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        let mut rb2 = self.analysis.rb2;
        rb2.seed = self.seed;
        AnalysisOptions {
            schedule: self.analysis.schedule,
            analytic: self.analysis.analytic,
            rb2,
        }
    }

    /// Configured scenarios, or the preset's reference scenarios.
    pub fn scenario_list(&self) -> Vec<ScenarioConfig> {
        if !self.scenarios.is_empty() {
            return self.scenarios.clone();
        }
        match self.design.preset {
            Preset::FourArm => vec![ScenarioConfig {
                label: "p = (0.5, 0.4, 0.4, 0.4)".into(),
                probabilities: Some(Probabilities::PerArm(vec![0.5, 0.4, 0.4, 0.4])),
                ..Default::default()
            }],
            Preset::TwoArm => [0.0, 0.2462, 1.5f64.ln()]
                .iter()
                .map(|&t| ScenarioConfig {
                    label: format!("theta = {t:.4}"),
                    theta: Some(t),
                    p_control: Some(0.6),
                    ..Default::default()
                })
                .collect(),
        }
    }

    /// Build scenario `index` with `replicates` replicates.
    pub fn scenario(
        &self,
        index: usize,
        s: &ScenarioConfig,
        replicates: u64,
    ) -> Result<Scenario, CliError> {
        let label = scenario_label(index, s);
        let by_arm: Vec<Vec<f64>> = match (&s.probabilities, s.theta) {
            (Some(Probabilities::PerArm(p)), None) => p.iter().map(|&x| vec![x]).collect(),
            (Some(Probabilities::PerArmCentre(p)), None) => p.clone(),
            (None, Some(theta)) => {
                let pc = s.p_control.unwrap_or(0.6);
                if !(pc > 0.0 && pc < 1.0) {
                    return Err(CliError::Validation(format!(
                        "{label}: p_control must lie in (0, 1)"
                    )));
                }
                vec![vec![probability_with_log_odds(pc, theta)], vec![pc]]
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "{label}: give either probabilities or theta"
                )))
            }
        };
        let mut design = self.design.plan();
        design.n_strata = by_arm.first().map_or(1, |r| r.len()).max(1);
        let sc = Scenario {
            design,
            probabilities: by_arm,
            replicates,
            seed: derive_seed(self.seed, index as u64),
            nod_targets: s.nod_targets.clone(),
        };
        sc.validate()
            .map_err(|e| CliError::Validation(format!("{label}: {e}")))?;
        Ok(sc)
    }
}

pub fn scenario_label(index: usize, s: &ScenarioConfig) -> String {
    if s.label.is_empty() {
        format!("scenario {}", index + 1)
    } else {
        s.label.clone()
    }
}
