//! Joint distribution of stopping analysis and terminal score for a
//! group-sequential test on the score scale.
//!
//! The score process is Brownian with drift: `Z_1 ~ N(theta V_1, V_1)` and
//! independent increments `N(theta dV_k, dV_k)`. The density of `Z_k` on the
//! continuation region `(l_k, u_k)` is propagated by convolving the previous
//! continuation density with the Gaussian increment, integrated by Simpson's
//! rule on a uniform grid over each interval. Exit probabilities and the
//! exit sub-densities are then integrals of the previous continuation density
//! against the Gaussian kernel or its CDF, so no grid is needed over the
//! unbounded stopping regions. Every outcome at the last analysis counts as
//! an exit.

use crate::error::{Error, Result};

/// Default number of grid points per continuation interval (odd, for Simpson).
pub const DEFAULT_GRID_POINTS: usize = 513;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub(crate) fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `P(a < X < b)` for standard normal `X`, computed on the side that
/// avoids cancellation.
#[inline]
pub(crate) fn norm_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// Continuation limits and cumulative informations for a sequence of
/// analyses. Analysis `k` continues while `lower[k] < Z_k < upper[k]`; the
/// last analysis always stops.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSchedule {
    info: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AnalysisSchedule {
    pub fn new(info: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = info.len();
        if n == 0 {
            return Err(Error::Schedule("no analyses".into()));
        }
        if lower.len() != n || upper.len() != n {
            return Err(Error::Schedule(format!(
                "{} informations but {} lower and {} upper limits",
                n,
                lower.len(),
                upper.len()
            )));
        }
        if !(info[0] > 0.0) {
            return Err(Error::Schedule("first information must be positive".into()));
        }
        for k in 1..n {
            if !(info[k] > info[k - 1]) {
                return Err(Error::Schedule(format!(
                    "information must increase strictly: V_{} = {} after V_{} = {}",
                    k + 1,
                    info[k],
                    k,
                    info[k - 1]
                )));
            }
        }
        for k in 0..n.saturating_sub(1) {
            if !(lower[k] <= upper[k]) {
                return Err(Error::Schedule(format!(
                    "continuation interval at analysis {} is inverted ({}, {})",
                    k + 1,
                    lower[k],
                    upper[k]
                )));
            }
        }
        Ok(Self { info, lower, upper })
    }

    /// Schedule from a boundary pair evaluated at each information level.
    pub fn from_boundaries(
        info: Vec<f64>,
        lower: impl Fn(f64) -> f64,
        upper: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let lo = info.iter().map(|&v| lower(v)).collect::<Vec<_>>();
        let hi = info.iter().map(|&v| upper(v)).collect::<Vec<_>>();
        // Past the apex the boundaries cross and every outcome stops.
        let hi = hi
            .iter()
            .zip(&lo)
            .map(|(&h, &l)| h.max(l))
            .collect::<Vec<_>>();
        Self::new(info, lo, hi)
    }

    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    pub fn info(&self) -> &[f64] {
        &self.info
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Truncate to the first `n` analyses (the last of which then always stops).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Schedule(format!(
                "cannot truncate {} analyses to {n}",
                self.len()
            )));
        }
        Ok(Self {
            info: self.info[..n].to_vec(),
            lower: self.lower[..n].to_vec(),
            upper: self.upper[..n].to_vec(),
        })
    }

    /// Same schedule with the first continuation interval narrowed to
    /// `(l_1 + t, u_1)`.
    pub fn modified_first_boundary(&self, t: f64) -> Result<Self> {
        let width = self.upper[0] - self.lower[0];
        if !(t >= 0.0 && t <= width) {
            return Err(Error::OffsetOutOfRange { offset: t, width });
        }
        let mut out = self.clone();
        out.lower[0] = (self.lower[0] + t).min(self.upper[0]);
        Ok(out)
    }
}

/// Uniform grid with Simpson weights over a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Grid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    /// `points` must be odd; a zero-width interval yields an empty grid.
    pub(crate) fn simpson(lo: f64, hi: f64, points: usize) -> Self {
        debug_assert!(points >= 3 && points % 2 == 1);
        if !(hi > lo) {
            return Self {
                points: Vec::new(),
                weights: Vec::new(),
            };
        }
        let h = (hi - lo) / (points - 1) as f64;
        let pts = (0..points).map(|i| lo + i as f64 * h).collect();
        let w = (0..points)
            .map(|i| {
                let c = if i == 0 || i == points - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Self {
            points: pts,
            weights: w,
        }
    }
}

/// Weighted continuation density at one analysis: `mass[i] = w_i f(z_i)`.
#[derive(Debug, Clone, PartialEq)]
struct Continuation {
    points: Vec<f64>,
    density: Vec<f64>,
    mass: Vec<f64>,
}

/// Exit probabilities and sub-densities of a schedule at a given drift.
#[derive(Debug, Clone)]
pub struct ExitDistribution {
    schedule: AnalysisSchedule,
    theta: f64,
    /// Continuation densities for analyses `1..n-1` (index `k-1`).
    cont: Vec<Continuation>,
    lower_mass: Vec<f64>,
    upper_mass: Vec<f64>,
    /// Mass stopping at the last analysis strictly between its limits.
    middle_mass: f64,
}

/// Increment between analysis `k-1` and `k` (1-based `k >= 2`) or the
/// first-analysis distribution, as mean and standard deviation.
fn increment(schedule: &AnalysisSchedule, k: usize, theta: f64) -> (f64, f64) {
    let dv = if k == 1 {
        schedule.info[0]
    } else {
        schedule.info[k - 1] - schedule.info[k - 2]
    };
    (theta * dv, dv.sqrt())
}

/// Compute the exit distribution of `schedule` under drift `theta`.
pub fn subdensity(schedule: &AnalysisSchedule, theta: f64) -> Result<ExitDistribution> {
    subdensity_with_grid(schedule, theta, DEFAULT_GRID_POINTS)
}

pub fn subdensity_with_grid(
    schedule: &AnalysisSchedule,
    theta: f64,
    grid_points: usize,
) -> Result<ExitDistribution> {
    if grid_points < 3 || grid_points.is_multiple_of(2) {
        return Err(Error::Schedule(format!(
            "grid size must be odd and at least 3, got {grid_points}"
        )));
    }
    let n = schedule.len();
    let mut cont: Vec<Continuation> = Vec::with_capacity(n.saturating_sub(1));
    let mut lower_mass = vec![0.0; n];
    let mut upper_mass = vec![0.0; n];
    let mut middle_mass = 0.0;

    for k in 1..=n {
        let (mu, sd) = increment(schedule, k, theta);
        let (lo, hi) = (schedule.lower[k - 1], schedule.upper[k - 1]);
        let last = k == n;
        // P(Z_k <= lo), P(Z_k >= hi), P(lo < Z_k < hi), each jointly with reaching k.
        let (pl, pu, pm) = if k == 1 {
            let a = (lo - mu) / sd;
            let b = (hi - mu) / sd;
            (norm_cdf(a), norm_cdf(-b), norm_interval(a, b))
        } else {
            let prev = &cont[k - 2];
            let mut acc = (0.0, 0.0, 0.0);
            for (&y, &m) in prev.points.iter().zip(&prev.mass) {
                let a = (lo - y - mu) / sd;
                let b = (hi - y - mu) / sd;
                acc.0 += m * norm_cdf(a);
                acc.1 += m * norm_cdf(-b);
                acc.2 += m * norm_interval(a, b);
            }
            acc
        };
        lower_mass[k - 1] = pl;
        upper_mass[k - 1] = pu;
        if last {
            middle_mass = pm;
            break;
        }
        let grid = Grid::simpson(lo, hi, grid_points);
        let density: Vec<f64> = if k == 1 {
            grid.points
                .iter()
                .map(|&z| norm_pdf((z - mu) / sd) / sd)
                .collect()
        } else {
            let prev = &cont[k - 2];
            grid.points
                .iter()
                .map(|&z| {
                    prev.points
                        .iter()
                        .zip(&prev.mass)
                        .map(|(&y, &m)| m * norm_pdf((z - y - mu) / sd))
                        .sum::<f64>()
                        / sd
                })
                .collect()
        };
        let mass = density
            .iter()
            .zip(&grid.weights)
            .map(|(&f, &w)| f * w)
            .collect();
        cont.push(Continuation {
            points: grid.points,
            density,
            mass,
        });
    }

    Ok(ExitDistribution {
        schedule: schedule.clone(),
        theta,
        cont,
        lower_mass,
        upper_mass,
        middle_mass,
    })
}

impl ExitDistribution {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn schedule(&self) -> &AnalysisSchedule {
        &self.schedule
    }

    pub fn analyses(&self) -> usize {
        self.schedule.len()
    }

    /// `P(K = k, Z_k <= l_k)`.
    pub fn lower_exit(&self, k: usize) -> f64 {
        self.lower_mass[k - 1]
    }

    /// `P(K = k, Z_k >= u_k)`.
    pub fn upper_exit(&self, k: usize) -> f64 {
        self.upper_mass[k - 1]
    }

    /// `P(K = k)`.
    pub fn exit_mass(&self, k: usize) -> f64 {
        let mut m = self.lower_mass[k - 1] + self.upper_mass[k - 1];
        if k == self.analyses() {
            m += self.middle_mass;
        }
        m
    }

    pub fn total_mass(&self) -> f64 {
        (1..=self.analyses()).map(|k| self.exit_mass(k)).sum()
    }

    pub fn total_upper(&self) -> f64 {
        self.upper_mass.iter().sum()
    }

    pub fn total_lower(&self) -> f64 {
        self.lower_mass.iter().sum()
    }

    /// Mean information at termination.
    pub fn expected_information(&self) -> f64 {
        (1..=self.analyses())
            .map(|k| self.exit_mass(k) * self.schedule.info[k - 1])
            .sum()
    }

    fn in_continuation(&self, k: usize, z: f64) -> bool {
        k < self.analyses() && z > self.schedule.lower[k - 1] && z < self.schedule.upper[k - 1]
    }

    /// Unconditional density of `Z_k` (reaching `k`) at `z`.
    fn raw_density(&self, k: usize, z: f64) -> f64 {
        let (mu, sd) = increment(&self.schedule, k, self.theta);
        if k == 1 {
            return norm_pdf((z - mu) / sd) / sd;
        }
        let prev = &self.cont[k - 2];
        prev.points
            .iter()
            .zip(&prev.mass)
            .map(|(&y, &m)| m * norm_pdf((z - y - mu) / sd))
            .sum::<f64>()
            / sd
    }

    /// `P(reach k, Z_k <= z)` ignoring the stopping rule at `k`.
    fn raw_cdf(&self, k: usize, z: f64) -> f64 {
        let (mu, sd) = increment(&self.schedule, k, self.theta);
        if k == 1 {
            return norm_cdf((z - mu) / sd);
        }
        let prev = &self.cont[k - 2];
        prev.points
            .iter()
            .zip(&prev.mass)
            .map(|(&y, &m)| m * norm_cdf((z - y - mu) / sd))
            .sum()
    }

    /// `P(reach k, Z_k >= z)` ignoring the stopping rule at `k`.
    fn raw_upper(&self, k: usize, z: f64) -> f64 {
        let (mu, sd) = increment(&self.schedule, k, self.theta);
        if k == 1 {
            return norm_cdf(-(z - mu) / sd);
        }
        let prev = &self.cont[k - 2];
        prev.points
            .iter()
            .zip(&prev.mass)
            .map(|(&y, &m)| m * norm_cdf(-(z - y - mu) / sd))
            .sum()
    }

    /// `P(reach k, a < Z_k < b)` ignoring the stopping rule at `k`.
    fn raw_window(&self, k: usize, a: f64, b: f64) -> f64 {
        let (mu, sd) = increment(&self.schedule, k, self.theta);
        if k == 1 {
            return norm_interval((a - mu) / sd, (b - mu) / sd);
        }
        let prev = &self.cont[k - 2];
        prev.points
            .iter()
            .zip(&prev.mass)
            .map(|(&y, &m)| m * norm_interval((a - y - mu) / sd, (b - y - mu) / sd))
            .sum()
    }

    /// Exit sub-density `f(z, k)`: zero inside the continuation region.
    pub fn subdensity_at(&self, k: usize, z: f64) -> f64 {
        if self.in_continuation(k, z) {
            0.0
        } else {
            self.raw_density(k, z)
        }
    }

    /// `F(z, k) = P(K = k, Z_K <= z)`.
    pub fn stopping_cdf(&self, k: usize, z: f64) -> f64 {
        if k == self.analyses() {
            return self.raw_cdf(k, z);
        }
        let (lo, hi) = (self.schedule.lower[k - 1], self.schedule.upper[k - 1]);
        if z <= lo {
            self.raw_cdf(k, z)
        } else if z < hi {
            self.lower_mass[k - 1]
        } else {
            self.lower_mass[k - 1] + self.raw_window(k, hi, z)
        }
    }

    /// `P(K = k, Z_K >= z)`.
    pub fn stopping_upper_tail(&self, k: usize, z: f64) -> f64 {
        if k == self.analyses() {
            return self.raw_upper(k, z);
        }
        let (lo, hi) = (self.schedule.lower[k - 1], self.schedule.upper[k - 1]);
        if z >= hi {
            self.raw_upper(k, z)
        } else if z > lo {
            self.upper_mass[k - 1]
        } else {
            self.upper_mass[k - 1] + self.raw_window(k, z, lo)
        }
    }

    /// `F(z + dz, k) - F(z - dz, k)`, computed without differencing.
    pub fn stopping_window(&self, k: usize, z: f64, dz: f64) -> f64 {
        let (a, b) = (z - dz, z + dz);
        if k == self.analyses() {
            return self.raw_window(k, a, b);
        }
        let (lo, hi) = (self.schedule.lower[k - 1], self.schedule.upper[k - 1]);
        let below = if a < lo {
            self.raw_window(k, a, b.min(lo))
        } else {
            0.0
        };
        let above = if b > hi {
            self.raw_window(k, a.max(hi), b)
        } else {
            0.0
        };
        below + above
    }

    /// Continuation density grid at analysis `k < n`: `(points, density)`.
    pub fn continuation_density(&self, k: usize) -> Option<(&[f64], &[f64])> {
        self.cont
            .get(k.checked_sub(1)?)
            .map(|c| (c.points.as_slice(), c.density.as_slice()))
    }
}

/// `F(z, k; theta)` for a schedule, computing the recursion on the way.
pub fn stopping_cdf(schedule: &AnalysisSchedule, theta: f64, k: usize, z: f64) -> Result<f64> {
    if k == 0 || k > schedule.len() {
        return Err(Error::Schedule(format!(
            "analysis {k} outside 1..={}",
            schedule.len()
        )));
    }
    Ok(subdensity(&schedule.truncated(k)?, theta)?.stopping_cdf(k, z))
}

/// Probability, as a function of `Z_1`, of continuing through analyses
/// `2..n-1` and stopping at analysis `n` with `Z_n` in `(z_n - dz, z_n + dz)`.
///
/// This is the backward counterpart of the forward recursion and gives
/// `F^(t)(z_n + dz) - F^(t)(z_n - dz) = integral over (l_1 + t, u_1) of
/// phi_1(z_1) h(z_1) dz_1` for every `t` from one pass.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    schedule: AnalysisSchedule,
    theta: f64,
    /// Weighted values `w_i h_2(x_i)` on the analysis-2 continuation grid
    /// (empty when `n <= 2`).
    second: Option<(Vec<f64>, Vec<f64>)>,
    z_n: f64,
    dz: f64,
}

impl WindowKernel {
    pub fn new(
        schedule: &AnalysisSchedule,
        theta: f64,
        z_n: f64,
        dz: f64,
        grid_points: usize,
    ) -> Result<Self> {
        let n = schedule.len();
        if n < 2 {
            return Err(Error::Schedule(
                "window kernel needs at least two analyses".into(),
            ));
        }
        let window_from = |k: usize, y: f64| {
            // P(Z_n in window | Z_{n-1} = y) with k = n.
            let (mu, sd) = increment(schedule, k, theta);
            norm_interval((z_n - dz - y - mu) / sd, (z_n + dz - y - mu) / sd)
        };
        // h_k on the continuation grid of analysis k, for k = n-1 down to 2.
        let mut current: Option<(Vec<f64>, Vec<f64>)> = None;
        for k in (2..n).rev() {
            let grid = Grid::simpson(schedule.lower[k - 1], schedule.upper[k - 1], grid_points);
            let values: Vec<f64> = match &current {
                None => grid.points.iter().map(|&y| window_from(n, y)).collect(),
                Some((pts, wh)) => {
                    let (mu, sd) = increment(schedule, k + 1, theta);
                    grid.points
                        .iter()
                        .map(|&y| {
                            pts.iter()
                                .zip(wh)
                                .map(|(&x, &m)| m * norm_pdf((x - y - mu) / sd))
                                .sum::<f64>()
                                / sd
                        })
                        .collect()
                }
            };
            let weighted = values
                .iter()
                .zip(&grid.weights)
                .map(|(&h, &w)| h * w)
                .collect();
            current = Some((grid.points, weighted));
        }
        Ok(Self {
            schedule: schedule.clone(),
            theta,
            second: current,
            z_n,
            dz,
        })
    }

    /// `h(z_1)`.
    pub fn continuation_probability(&self, z1: f64) -> f64 {
        let n = self.schedule.len();
        match &self.second {
            None => {
                let (mu, sd) = increment(&self.schedule, n, self.theta);
                norm_interval(
                    (self.z_n - self.dz - z1 - mu) / sd,
                    (self.z_n + self.dz - z1 - mu) / sd,
                )
            }
            Some((pts, wh)) => {
                let (mu, sd) = increment(&self.schedule, 2, self.theta);
                pts.iter()
                    .zip(wh)
                    .map(|(&x, &m)| m * norm_pdf((x - z1 - mu) / sd))
                    .sum::<f64>()
                    / sd
            }
        }
    }

    /// Density of `Z_1` at `z1` times `h(z1)`.
    pub fn joint_density(&self, z1: f64) -> f64 {
        let (mu, sd) = increment(&self.schedule, 1, self.theta);
        norm_pdf((z1 - mu) / sd) / sd * self.continuation_probability(z1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::BoundarySpec;

    fn two_arm(n: usize) -> AnalysisSchedule {
        let spec = BoundarySpec::two_arm_default();
        let info = (1..=n).map(|k| k as f64 * 4.4419).collect();
        AnalysisSchedule::from_boundaries(info, |v| spec.lower(v), |v| spec.upper(v)).unwrap()
    }

    #[test]
    fn single_analysis_is_normal() {
        let s = AnalysisSchedule::new(vec![4.0], vec![-1.0], vec![1.0]).unwrap();
        let d = subdensity(&s, 0.0).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-14);
        assert!((d.stopping_cdf(1, 0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn normalization_across_drifts() {
        let s = two_arm(20);
        for &theta in &[-1.0, -0.4, 0.0, 0.2462, 0.405, 1.0] {
            let d = subdensity(&s, theta).unwrap();
            assert!(
                (d.total_mass() - 1.0).abs() < 1e-6,
                "theta {theta}: {}",
                d.total_mass()
            );
        }
    }

    #[test]
    fn upper_exit_increases_with_drift() {
        let s = two_arm(20);
        let mut last = -1.0;
        for i in -10..=10 {
            let up = subdensity(&s, i as f64 * 0.1).unwrap().total_upper();
            assert!(up > last);
            last = up;
        }
    }

    #[test]
    fn modified_boundary_limits() {
        let s = two_arm(5);
        assert!((s.lower()[0] + 9.2981).abs() < 1e-4);
        assert!((s.upper()[0] - 11.4860).abs() < 1e-4);
        assert_eq!(s.modified_first_boundary(0.0).unwrap(), s);
        let width = s.upper()[0] - s.lower()[0];
        let closed = s.modified_first_boundary(width).unwrap();
        let d = subdensity(&closed, 0.3).unwrap();
        assert!((d.exit_mass(1) - 1.0).abs() < 1e-12);
        assert!(s.modified_first_boundary(width + 0.1).is_err());
        assert!(s.modified_first_boundary(-0.1).is_err());
    }

    #[test]
    fn rejects_non_increasing_information() {
        assert!(AnalysisSchedule::new(vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn earlier_analyses_ignore_later_limits() {
        let a = two_arm(8);
        let mut lower = a.lower().to_vec();
        let mut upper = a.upper().to_vec();
        lower[6] -= 3.0;
        upper[6] += 2.0;
        let b = AnalysisSchedule::new(a.info().to_vec(), lower, upper).unwrap();
        let da = subdensity(&a, 0.2).unwrap();
        let db = subdensity(&b, 0.2).unwrap();
        for k in 1..=6 {
            assert_eq!(da.lower_exit(k), db.lower_exit(k));
            assert_eq!(da.upper_exit(k), db.upper_exit(k));
        }
    }

    #[test]
    fn window_is_difference_of_cdfs() {
        let s = two_arm(6);
        let d = subdensity(&s, 0.1).unwrap();
        for &(k, z) in &[(3usize, 13.0), (3, -8.0), (6, 2.0), (2, -6.5)] {
            let w = d.stopping_window(k, z, 0.01);
            let diff = d.stopping_cdf(k, z + 0.01) - d.stopping_cdf(k, z - 0.01);
            assert!((w - diff).abs() < 1e-12, "k={k} z={z}");
        }
        assert!((d.stopping_cdf(3, 1e3) - d.exit_mass(3)).abs() < 1e-14);
    }

    #[test]
    fn likelihood_ratio_identity() {
        let s = two_arm(7);
        let theta = 0.3;
        let d0 = subdensity(&s, 0.0).unwrap();
        let dt = subdensity(&s, theta).unwrap();
        for k in 1..=7 {
            let v = s.info()[k - 1];
            for z in [-12.0, -9.5, 0.5, 12.0, 14.0, 17.5] {
                let f0 = d0.subdensity_at(k, z);
                if f0 < 1e-30 {
                    continue;
                }
                let ft = dt.subdensity_at(k, z);
                let lr = (theta * z - theta * theta * v / 2.0).exp();
                assert!(((ft - lr * f0) / ft).abs() < 1e-4, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn backward_kernel_matches_forward_modified_schedule() {
        let s = two_arm(6);
        let (z_n, dz) = (9.0, 0.01);
        let kernel = WindowKernel::new(&s, 0.0, z_n, dz, DEFAULT_GRID_POINTS).unwrap();
        let width = s.upper()[0] - s.lower()[0];
        for &t in &[0.0, 0.25 * width, 0.6 * width] {
            let forward = subdensity(&s.modified_first_boundary(t).unwrap(), 0.0)
                .unwrap()
                .stopping_window(6, z_n, dz);
            let g = Grid::simpson(s.lower()[0] + t, s.upper()[0], 1025);
            let backward: f64 = g
                .points
                .iter()
                .zip(&g.weights)
                .map(|(&z, &w)| w * kernel.joint_density(z))
                .sum();
            assert!(((forward - backward) / forward).abs() < 1e-6, "t={t}");
        }
    }
}
