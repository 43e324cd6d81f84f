//! Probe-cost model for hash lookup.
//!
//! Probing the radius-`r` shell of a `Q`-bit code touches `C(Q, r)`
//! buckets, so searching out to radius `R` costs `P(R) = Σ_{r≤R} C(Q, r)`
//! unit probes whether or not the buckets are occupied.
//!
//! Counts are exact in `u128` whenever they fit. Past that point only the
//! natural log of the count is kept, which is all the precision penalty
//! `1 / P(R)` needs.

use crate::error::{Error, Result};

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `c · num / den`, given that `den` divides `c · num`.
fn mul_div_exact(c: u128, num: u128, den: u128) -> Option<u128> {
    let g = gcd(c, den);
    let (c, den) = (c / g, den / g);
    debug_assert_eq!(num % den, 0);
    c.checked_mul(num / den)
}

/// Exact `C(n, k)`, or `None` if it does not fit in `u128`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = mul_div_exact(c, (n - i) as u128, (i + 1) as u128)?;
    }
    Some(c)
}

/// Exact `Σ_{r=0}^{radius} C(code_len, r)`, or `None` on overflow.
pub fn cumulative_probes(code_len: usize, radius: usize) -> Option<u128> {
    (0..=radius.min(code_len)).try_fold(0u128, |acc, r| acc.checked_add(binomial(code_len, r)?))
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Shell sizes and cumulative probe counts for every radius `0..=Q`.
#[derive(Clone, Debug)]
pub struct ProbeSchedule {
    code_len: usize,
    shell: Vec<Option<u128>>,
    cumulative: Vec<Option<u128>>,
    ln_cumulative: Vec<f64>,
}

impl ProbeSchedule {
    pub fn new(code_len: usize) -> Self {
        let mut shell = Vec::with_capacity(code_len + 1);
        let mut cumulative = Vec::with_capacity(code_len + 1);
        let mut ln_cumulative = Vec::with_capacity(code_len + 1);

        let mut c = Some(1u128);
        let mut ln_c = 0.0f64;
        let mut acc = Some(0u128);
        let mut ln_acc = f64::NEG_INFINITY;
        for r in 0..=code_len {
            if r > 0 {
                let (num, den) = ((code_len - r + 1) as u128, r as u128);
                c = c.and_then(|c| mul_div_exact(c, num, den));
                ln_c += (num as f64).ln() - (den as f64).ln();
            }
            acc = acc.zip(c).and_then(|(a, c)| a.checked_add(c));
            ln_acc = ln_add_exp(ln_acc, ln_c);
            shell.push(c);
            cumulative.push(acc);
            ln_cumulative.push(match acc {
                Some(p) => (p as f64).ln(),
                None => ln_acc,
            });
        }
        Self {
            code_len,
            shell,
            cumulative,
            ln_cumulative,
        }
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    fn check(&self, radius: usize) -> Result<()> {
        if radius > self.code_len {
            return Err(Error::RadiusOutOfRange {
                radius,
                code_len: self.code_len,
            });
        }
        Ok(())
    }

    /// `C(Q, r)` if representable.
    pub fn shell_size(&self, radius: usize) -> Result<Option<u128>> {
        self.check(radius)?;
        Ok(self.shell[radius])
    }

    /// `P(r)` if representable.
    pub fn cumulative(&self, radius: usize) -> Result<Option<u128>> {
        self.check(radius)?;
        Ok(self.cumulative[radius])
    }

    /// `P(r)`, saturating at `u128::MAX`.
    pub fn cumulative_saturating(&self, radius: usize) -> Result<u128> {
        Ok(self.cumulative(radius)?.unwrap_or(u128::MAX))
    }

    pub fn ln_cumulative(&self, radius: usize) -> Result<f64> {
        self.check(radius)?;
        Ok(self.ln_cumulative[radius])
    }

    /// `1 / P(r)`: the factor that turns precision into time-penalized
    /// precision.
    pub fn penalty(&self, radius: usize) -> Result<f64> {
        self.check(radius)?;
        Ok(match self.cumulative[radius] {
            Some(p) => 1.0 / p as f64,
            None => (-self.ln_cumulative[radius]).exp(),
        })
    }
}
