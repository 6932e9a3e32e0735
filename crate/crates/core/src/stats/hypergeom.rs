use super::{BaselineEstimate, BaselineModel};
use crate::error::{Error, Result};

/// Hypergeometric distribution: `draws` items taken without replacement
/// from `population`, of which `successes` are marked.
///
/// The pmf uses the saddle-point expansion (Loader's `stirlerr`/`bd0`
/// decomposition), which keeps full relative precision for populations far
/// beyond what factorials or plain log-gamma differences allow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypergeometric {
    population: u64,
    successes: u64,
    draws: u64,
}

impl Hypergeometric {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population || draws > population {
            return Err(Error::Domain(format!(
                "hypergeometric needs successes, draws ≤ population (got {successes}, {draws}, {population})"
            )));
        }
        Ok(Self {
            population,
            successes,
            draws,
        })
    }

    /// Overlap of two masks of equal size `tau` over `population` weights.
    pub fn overlap(population: u64, tau: u64) -> Result<Self> {
        Self::new(population, tau, tau)
    }

    pub fn min_support(&self) -> u64 {
        (self.draws + self.successes).saturating_sub(self.population)
    }

    pub fn max_support(&self) -> u64 {
        self.draws.min(self.successes)
    }

    pub fn pmf(&self, x: u64) -> f64 {
        if x < self.min_support() || x > self.max_support() {
            return 0.0;
        }
        let n = self.population as f64;
        let draws = self.draws as f64;
        if self.draws == 0 || self.draws == self.population {
            return 1.0;
        }
        if let Some(exact) = self.exact_pmf(x) {
            return exact;
        }
        let p = draws / n;
        let q = (n - draws) / n;
        let r = self.successes as f64;
        let b = (self.population - self.successes) as f64;
        let x = x as f64;
        let p1 = binom_raw(x, r, p, q);
        let p2 = binom_raw(draws - x, b, p, q);
        let p3 = binom_raw(draws, n, p, q);
        p1 * p2 / p3
    }

    /// Ratio of integer binomials, when both reduced terms are exactly
    /// representable; the single division is then correctly rounded.
    fn exact_pmf(&self, x: u64) -> Option<f64> {
        let num = binom_u128(self.successes, x)?.checked_mul(binom_u128(self.population - self.successes, self.draws - x)?)?;
        let den = binom_u128(self.population, self.draws)?;
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        const EXACT: u128 = 1 << 53;
        (num <= EXACT && den <= EXACT).then(|| num as f64 / den as f64)
    }

    /// `P(X ≤ x)`, summed from the nearer tail.
    pub fn cdf(&self, x: u64) -> f64 {
        if x < self.min_support() {
            return 0.0;
        }
        if x >= self.max_support() {
            return 1.0;
        }
        if (x as f64) < self.mean() {
            (self.min_support()..=x).map(|k| self.pmf(k)).sum()
        } else {
            1.0 - self.sf(x)
        }
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: u64) -> f64 {
        if x >= self.max_support() {
            return 0.0;
        }
        if x < self.min_support() {
            return 1.0;
        }
        if (x as f64) >= self.mean() {
            (x + 1..=self.max_support()).map(|k| self.pmf(k)).sum()
        } else {
            1.0 - self.cdf(x)
        }
    }

    pub fn mean(&self) -> f64 {
        self.draws as f64 * self.successes as f64 / self.population as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.population as f64;
        if self.population < 2 {
            return 0.0;
        }
        let k = self.successes as f64;
        let d = self.draws as f64;
        d * (k / n) * ((n - k) / n) * ((n - d) / (n - 1.0))
    }

    /// Central interval `[lo, hi]` with each excluded tail holding at most
    /// `(1 − level)/2`: `lo` is the largest value with `P(X < lo)` within
    /// the tail budget, `hi` the smallest with `P(X > hi)` within it.
    pub fn central_interval(&self, level: f64) -> (u64, u64) {
        let tail = (1.0 - level) / 2.0;
        let (lo_s, hi_s) = (self.min_support(), self.max_support());
        let mut lo = lo_s;
        let mut below = 0.0;
        while lo < hi_s {
            let next = below + self.pmf(lo);
            if next > tail {
                break;
            }
            below = next;
            lo += 1;
        }
        let mut hi = hi_s;
        let mut above = 0.0;
        while hi > lo {
            let next = above + self.pmf(hi);
            if next > tail {
                break;
            }
            above = next;
            hi -= 1;
        }
        (lo, hi)
    }
}

/// Deviance term `x·ln(x/np) + np − x`, accurate when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln n! − [(n + ½)·ln n − n + ½·ln 2π]` for integer-valued `n ≥ 0`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        if n == 0.0 {
            return HALF_LN_2PI;
        }
        let ln_fact: f64 = (2..=n as u64).map(|k| (k as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - HALF_LN_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

fn binom_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(c)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Binomial pmf `C(n, x)·pˣ·qⁿ⁻ˣ` in saddle-point form.
fn binom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
        return lc.exp();
    }
    if x < 0.0 || x > n {
        return 0.0;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = std::f64::consts::TAU.ln() + x.ln() + (-x / n).ln_1p();
    (lc - 0.5 * lf).exp()
}

fn check_overlap_domain(population: u64, tau: u64) -> Result<()> {
    if tau > population {
        return Err(Error::Domain(format!("ticket size {tau} exceeds population {population}")));
    }
    Ok(())
}

/// Probability that two uniformly random `tau`-subsets of `population`
/// weights share exactly `x` weights.
pub fn hypergeom_pmf(population: u64, tau: u64, x: u64) -> Result<f64> {
    check_overlap_domain(population, tau)?;
    if x > tau {
        return Err(Error::Domain(format!("overlap {x} exceeds ticket size {tau}")));
    }
    Ok(Hypergeometric::overlap(population, tau)?.pmf(x))
}

/// Mean `τ²/N` and standard deviation of the random-overlap count.
pub fn hypergeom_moments(population: u64, tau: u64) -> Result<BaselineEstimate> {
    check_overlap_domain(population, tau)?;
    if tau == 0 {
        return Err(Error::Domain("ticket size must be positive".into()));
    }
    if population < 2 {
        return Err(Error::Domain("population must be at least 2 for a spread".into()));
    }
    let h = Hypergeometric::overlap(population, tau)?;
    Ok(BaselineEstimate {
        mean: h.mean(),
        sigma: h.variance().sqrt(),
        model: BaselineModel::Hypergeometric,
    })
}

/// Two-sided interval of the random-overlap count at `level` (e.g. 0.95).
/// Observations outside it are significant.
pub fn significance_interval(population: u64, tau: u64, level: f64) -> Result<(u64, u64)> {
    check_overlap_domain(population, tau)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} outside (0, 1)")));
    }
    Ok(Hypergeometric::overlap(population, tau)?.central_interval(level))
}
