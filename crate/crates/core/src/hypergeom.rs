//! Exact hypergeometric sampling by inversion.
//!
//! The sampler inverts the CDF starting at the mode and extends the
//! accumulated mass one support point at a time, always taking whichever
//! neighbour (above or below) carries more probability. The walk length is
//! of the order of the standard deviation, and no approximation is made.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};

const LN_FACT_TABLE: usize = 8192;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..LN_FACT_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    })
}

#[inline]
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        ln_fact_table()[n as usize]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// Hypergeometric distribution: successes in `sample` draws without
/// replacement from `population` items of which `marked` are successes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypergeometric {
    population: u64,
    marked: u64,
    sample: u64,
}

impl Hypergeometric {
    pub fn new(population: u64, marked: u64, sample: u64) -> Result<Self> {
        if marked > population || sample > population {
            return Err(Error::HypergeometricBounds {
                population,
                marked,
                sample,
            });
        }
        Ok(Self {
            population,
            marked,
            sample,
        })
    }

    /// Inclusive support `[max(0, n - (N - K)), min(n, K)]`.
    pub fn support(&self) -> (u64, u64) {
        let lo = self.sample.saturating_sub(self.population - self.marked);
        let hi = self.sample.min(self.marked);
        (lo, hi)
    }

    pub fn mode(&self) -> u64 {
        let (lo, hi) = self.support();
        let m = ((self.sample + 1) as f64 * (self.marked + 1) as f64 / (self.population + 2) as f64)
            .floor() as u64;
        m.clamp(lo, hi)
    }

    pub fn mean(&self) -> f64 {
        if self.population == 0 {
            return 0.0;
        }
        self.sample as f64 * self.marked as f64 / self.population as f64
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let (lo, hi) = self.support();
        if k < lo || k > hi {
            return f64::NEG_INFINITY;
        }
        let (n_pop, k_m, n_s) = (self.population, self.marked, self.sample);
        ln_choose(k_m, k) + ln_choose(n_pop - k_m, n_s - k) - ln_choose(n_pop, n_s)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// `pmf(k + 1) / pmf(k)` for `k` strictly below the upper support bound.
    #[inline]
    fn ratio_up(&self, k: u64) -> f64 {
        let (n_pop, k_m, n_s) = (
            self.population as f64,
            self.marked as f64,
            self.sample as f64,
        );
        let k = k as f64;
        (k_m - k) * (n_s - k) / ((k + 1.0) * (n_pop - k_m - n_s + k + 1.0))
    }

    /// `pmf(k - 1) / pmf(k)` for `k` strictly above the lower support bound.
    #[inline]
    fn ratio_down(&self, k: u64) -> f64 {
        let (n_pop, k_m, n_s) = (
            self.population as f64,
            self.marked as f64,
            self.sample as f64,
        );
        let k = k as f64;
        k * (n_pop - k_m - n_s + k) / ((k_m - k + 1.0) * (n_s - k + 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let (lo, hi) = self.support();
        if lo == hi {
            return lo;
        }
        let u: f64 = rng.random();
        let mode = self.mode();
        let p_mode = self.pmf(mode);
        let mut acc = p_mode;
        if u < acc {
            return mode;
        }
        let (mut up, mut p_up) = (mode, p_mode);
        let (mut down, mut p_down) = (mode, p_mode);
        let mut next_up = if up < hi {
            p_up * self.ratio_up(up)
        } else {
            -1.0
        };
        let mut next_down = if down > lo {
            p_down * self.ratio_down(down)
        } else {
            -1.0
        };
        loop {
            if next_up < 0.0 && next_down < 0.0 {
                // Rounding left u above the accumulated mass.
                return if p_up >= p_down { up } else { down };
            }
            if next_up >= next_down {
                up += 1;
                p_up = next_up;
                acc += p_up;
                if u < acc {
                    return up;
                }
                next_up = if up < hi {
                    p_up * self.ratio_up(up)
                } else {
                    -1.0
                };
            } else {
                down -= 1;
                p_down = next_down;
                acc += p_down;
                if u < acc {
                    return down;
                }
                next_down = if down > lo {
                    p_down * self.ratio_down(down)
                } else {
                    -1.0
                };
            }
        }
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Draw from `Hypergeometric(population, marked, sample)`.
pub fn hypergeometric_draw<R: Rng + ?Sized>(
    population: u64,
    marked: u64,
    sample: u64,
    rng: &mut R,
) -> Result<u64> {
    Ok(Hypergeometric::new(population, marked, sample)?.sample(rng))
}
