//! Scalar interval arithmetic for the natural interval extension.
//!
//! Every operation widens its result outward by a relative slack of 1e-14,
//! which dominates f64 rounding, so enclosures computed here are sound
//! without directed rounding. Division by an interval containing zero and
//! square roots of intervals reaching below zero are hard errors: they
//! signal that an enclosure must shrink before evaluation can proceed.

use crate::error::{Error, Result};

/// Relative outward widening applied after every operation.
const SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn widen(self) -> Self {
        Interval {
            lo: self.lo - self.lo.abs() * SLACK,
            hi: self.hi + self.hi.abs() * SLACK,
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi).widen()
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo).widen()
    }

    pub fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi).widen()
    }

    pub fn div(self, o: Interval) -> Result<Interval> {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return Err(Error::Domain(format!(
                "division by interval [{}, {}] containing zero",
                o.lo, o.hi
            )));
        }
        let c = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Interval::new(lo, hi).widen())
    }

    pub fn sqrt(self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!(
                "square root of interval [{}, {}] reaching below zero",
                self.lo, self.hi
            )));
        }
        Ok(Interval::new(self.lo.sqrt(), self.hi.sqrt()).widen())
    }

    pub fn powi(self, k: i32) -> Result<Interval> {
        if k == 0 {
            return Ok(Interval::point(1.0));
        }
        if k < 0 {
            return Interval::point(1.0).div(self.powi(-k)?);
        }
        let lo_p = powi(self.lo, k);
        let hi_p = powi(self.hi, k);
        let out = if k % 2 == 1 || self.lo >= 0.0 {
            Interval::new(lo_p, hi_p)
        } else if self.hi <= 0.0 {
            Interval::new(hi_p, lo_p)
        } else {
            // even power of an interval through zero
            Interval::new(0.0, lo_p.max(hi_p))
        };
        Ok(out.widen())
    }

    pub fn hull(self, o: Interval) -> Interval {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }
}

fn powi(v: f64, k: i32) -> f64 {
    v.powi(k)
}
