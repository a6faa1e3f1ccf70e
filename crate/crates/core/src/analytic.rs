//! Post-trial inference for the two-arm triangular test: the naive
//! estimate, the stage-wise ordering analysis and the analytic
//! Rao-Blackwell estimate computed from the exit distribution.

use serde::{Deserialize, Serialize};

use crate::density::{norm_cdf, subdensity_with_grid, AnalysisSchedule, WindowKernel};
use crate::design::{two_arm_decision, BoundarySpec, PairVerdict};
use crate::error::{Error, Result};
use crate::estimate::{EstimateReport, Z_975};
use crate::record::TrialRecord;

/// Which boundary, if any, ended the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    Upper,
    Lower,
}

/// How the information levels of earlier analyses are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `V_i = i V* / K*`: equal spacing ending at the observed information.
    #[default]
    Proportional,
    /// `V_i = i` times the design's nominal increment.
    Nominal,
    /// Information actually observed at each interim.
    Observed,
}

/// Terminal state of a two-arm trial and the schedule it traversed.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoArmOutcome {
    pub k_star: usize,
    pub z_star: f64,
    pub v_star: f64,
    pub crossing: Option<Crossing>,
    pub schedule: AnalysisSchedule,
}

fn triangular_schedule(spec: &BoundarySpec, info: Vec<f64>) -> Result<AnalysisSchedule> {
    AnalysisSchedule::from_boundaries(info, |v| spec.lower(v), |v| spec.upper(v))
}

impl TwoArmOutcome {
    /// Outcome with informations `info` for analyses `1..=K*`; the last
    /// entry is the information at which `z_star` is assessed.
    pub fn new(spec: &BoundarySpec, z_star: f64, info: Vec<f64>) -> Result<Self> {
        let k_star = info.len();
        let schedule = triangular_schedule(spec, info)?;
        let v_star = schedule.info()[k_star - 1];
        let crossing = match two_arm_decision(crate::stats::ScorePair::new(z_star, v_star), spec) {
            PairVerdict::UpperCross => Some(Crossing::Upper),
            PairVerdict::LowerCross => Some(Crossing::Lower),
            _ => None,
        };
        Ok(Self {
            k_star,
            z_star,
            v_star,
            crossing,
            schedule,
        })
    }

    /// Outcome at analysis `k_star` with information `v_star` under the
    /// given reconstruction of earlier informations.
    pub fn with_mode(
        spec: &BoundarySpec,
        k_star: usize,
        z_star: f64,
        v_star: f64,
        nominal_increment: f64,
        mode: ScheduleMode,
    ) -> Result<Self> {
        if k_star == 0 {
            return Err(Error::Schedule(
                "terminal analysis must be at least 1".into(),
            ));
        }
        if !(v_star > 0.0) {
            return Err(Error::ZeroInformation(
                "terminal information is zero".into(),
            ));
        }
        let info = match mode {
            ScheduleMode::Proportional => (1..=k_star)
                .map(|i| i as f64 * v_star / k_star as f64)
                .collect(),
            ScheduleMode::Nominal => (1..=k_star).map(|i| i as f64 * nominal_increment).collect(),
            ScheduleMode::Observed => {
                return Err(Error::Schedule(
                    "observed informations need the full record".into(),
                ))
            }
        };
        let mut out = Self::new(spec, z_star, info)?;
        out.v_star = v_star;
        Ok(out)
    }

    /// Terminal outcome of a two-arm record, first treatment against second.
    pub fn from_record(record: &TrialRecord, mode: ScheduleMode) -> Result<Self> {
        if !record.is_two_arm() {
            return Err(Error::Unsupported {
                method: "two-arm analysis".into(),
                what: "multi-arm records".into(),
            });
        }
        let (a, b) = (
            record.treatments[0].treatment,
            record.treatments[1].treatment,
        );
        let k_star = record.terminal_interim();
        let zp = record.score_between(a, k_star, b, k_star)?;
        let spec = &record.design.boundary;
        match mode {
            ScheduleMode::Observed => {
                let info = (1..=k_star)
                    .map(|k| record.score_between(a, k, b, k).map(|s| s.v))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(spec, zp.z, info)
            }
            _ => Self::with_mode(
                spec,
                k_star,
                zp.z,
                zp.v,
                record.design.v_increment_nominal,
                mode,
            ),
        }
    }

    pub fn first_information(&self) -> f64 {
        self.schedule.info()[0]
    }
}

/// `theta_hat = Z*/V*` with a Wald interval and one-sided p-value.
pub fn naive_analysis(outcome: &TwoArmOutcome) -> Result<EstimateReport> {
    naive_from_score(outcome.z_star, outcome.v_star, 1, 2)
}

pub(crate) fn naive_from_score(z: f64, v: f64, first: u8, second: u8) -> Result<EstimateReport> {
    if !(v > 0.0) {
        return Err(Error::ZeroInformation(format!(
            "treatments {first} and {second}: no information"
        )));
    }
    let mut r = EstimateReport::wald("naive", first, second, z / v, 1.0 / v.sqrt());
    r.p_value = Some(norm_cdf(-z / v.sqrt()));
    r.diagnostics.insert("z".into(), z);
    r.diagnostics.insert("v".into(), v);
    Ok(r)
}

/// Numerical settings for the exit-distribution based methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSettings {
    /// Simpson points per continuation interval (odd).
    pub density_grid: usize,
    /// Half-width of the window around the terminal score.
    pub rb1_dz: f64,
    /// Points of the uniform grid over the first continuation interval.
    pub rb1_grid: usize,
    /// Bisection tolerance in `theta`.
    pub root_tolerance: f64,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        Self {
            density_grid: 129,
            rb1_dz: 0.01,
            rb1_grid: 100,
            root_tolerance: 1e-5,
        }
    }
}

const SEARCH_LO: f64 = -5.0;
const SEARCH_HI: f64 = 5.0;

/// Probability, at drift `theta`, of an outcome at least as extreme in
/// favour of the first treatment under the stage-wise ordering.
pub fn stagewise_tail(outcome: &TwoArmOutcome, theta: f64, grid: usize) -> Result<f64> {
    let dist = subdensity_with_grid(&outcome.schedule, theta, grid)?;
    let k = outcome.k_star;
    let earlier: f64 = (1..k).map(|i| dist.upper_exit(i)).sum();
    Ok((earlier + dist.stopping_upper_tail(k, outcome.z_star)).clamp(0.0, 1.0))
}

fn solve_tail(outcome: &TwoArmOutcome, target: f64, settings: &AnalyticSettings) -> Result<f64> {
    let f = |t: f64| stagewise_tail(outcome, t, settings.density_grid).map(|p| p - target);
    let (mut lo, mut hi) = (SEARCH_LO, SEARCH_HI);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::SearchRangeExhausted {
            target,
            lo: SEARCH_LO,
            hi: SEARCH_HI,
        });
    }
    while hi - lo > settings.root_tolerance {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Median-unbiased estimate, 95% interval and p-value from the stage-wise
/// ordering.
pub fn orderings_analysis(
    outcome: &TwoArmOutcome,
    settings: &AnalyticSettings,
) -> Result<EstimateReport> {
    let p = stagewise_tail(outcome, 0.0, settings.density_grid)?;
    let theta_m = solve_tail(outcome, 0.5, settings)?;
    let theta_l = solve_tail(outcome, 0.025, settings)?;
    let theta_u = solve_tail(outcome, 0.975, settings)?;
    let mut r = EstimateReport {
        method: "orderings".into(),
        first: 1,
        second: 2,
        theta_hat: theta_m,
        se: None,
        ci_low: theta_l,
        ci_high: theta_u,
        p_value: Some(p),
        diagnostics: Default::default(),
        warnings: Vec::new(),
    };
    r.diagnostics.insert("k_star".into(), outcome.k_star as f64);
    Ok(r)
}

/// Conditional mean and variance of the first-analysis score given the
/// terminal analysis and score.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub mean: f64,
    pub variance: f64,
    /// `t` grid over the first continuation interval and the survival
    /// function `S(t)` of `Z_1 - l_1` on it.
    pub t_grid: Vec<f64>,
    pub survival: Vec<f64>,
}

/// Sub-intervals of each `t`-grid cell used for the inner integral.
const RB1_SUBDIVISIONS: usize = 10;

pub fn rb1_conditional_moments(
    outcome: &TwoArmOutcome,
    dz: f64,
    grid_points: usize,
    density_grid: usize,
) -> Result<ConditionalMoments> {
    if !(dz > 0.0) || grid_points < 2 {
        return Err(Error::Schedule(format!(
            "window half-width {dz} and grid size {grid_points} must be positive and at least 2"
        )));
    }
    let sched = &outcome.schedule;
    let (l1, u1) = (sched.lower()[0], sched.upper()[0]);
    let width = u1 - l1;
    let kernel = WindowKernel::new(sched, 0.0, outcome.z_star, dz, density_grid)?;

    let cells = grid_points - 1;
    let step = width / cells as f64;
    let h = step / RB1_SUBDIVISIONS as f64;
    let cell_mass: Vec<f64> = (0..cells)
        .map(|c| {
            let start = l1 + c as f64 * step;
            (0..=RB1_SUBDIVISIONS)
                .map(|i| {
                    let w = if i == 0 || i == RB1_SUBDIVISIONS {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * kernel.joint_density(start + i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        })
        .collect();
    let mut numerator = vec![0.0; grid_points];
    for c in (0..cells).rev() {
        numerator[c] = numerator[c + 1] + cell_mass[c];
    }
    let denom = numerator[0];
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::InconsistentOutcome);
    }
    let t_grid: Vec<f64> = (0..grid_points).map(|i| i as f64 * step).collect();
    let survival: Vec<f64> = numerator
        .iter()
        .map(|&x| (x / denom).clamp(0.0, 1.0))
        .collect();
    let trapz = |f: &dyn Fn(usize) -> f64| {
        (0..cells)
            .map(|i| 0.5 * (f(i) + f(i + 1)) * step)
            .sum::<f64>()
    };
    let e1 = trapz(&|i| survival[i]);
    let e2 = 2.0 * trapz(&|i| t_grid[i] * survival[i]);
    Ok(ConditionalMoments {
        mean: l1 + e1,
        variance: e2 - e1 * e1,
        t_grid,
        survival,
    })
}

/// Analytic Rao-Blackwell estimate `E(Z_1 / V_1 | K*, Z*)`.
pub fn rb1_analysis(
    outcome: &TwoArmOutcome,
    settings: &AnalyticSettings,
) -> Result<EstimateReport> {
    let v1 = outcome.first_information();
    let (theta, var) = if outcome.k_star == 1 {
        (outcome.z_star / v1, 0.0)
    } else {
        let m = rb1_conditional_moments(
            outcome,
            settings.rb1_dz,
            settings.rb1_grid,
            settings.density_grid,
        )?;
        (m.mean / v1, m.variance / (v1 * v1))
    };
    let se2 = 1.0 / v1 - var;
    if se2 < 0.0 {
        return Err(Error::NegativeVariance(se2));
    }
    let mut r = EstimateReport::wald("rb1", 1, 2, theta, se2.sqrt());
    r.diagnostics.insert("conditional_variance".into(), var);
    r.diagnostics.insert("v1".into(), v1);
    Ok(r)
}

/// Half-width of the 95% interval for a given standard error.
pub fn wald_half_width(se: f64) -> f64 {
    Z_975 * se
}
