use std::fmt;

use serde::{Deserialize, Serialize};

/// A subinterval of the real line with independently open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const UNIT: Interval = Interval::closed(0.0, 1.0);

    pub const fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// `(lo, hi]`
    pub const fn left_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: true }
    }

    /// `[lo, hi)`
    pub const fn right_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn empty() -> Self {
        Self::open(0.0, 0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Membership in the closure, widened by `tol`.
    pub fn contains_approx(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        let out = Interval { lo, hi, lo_closed, hi_closed };
        if out.is_empty() {
            Interval::empty()
        } else {
            out
        }
    }

    /// Length of the overlap with `other`.
    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    /// Inclusion modulo null sets: endpoints may differ by at most `tol`.
    pub fn is_subset_mod0(&self, other: &Interval, tol: f64) -> bool {
        self.is_empty() || (self.lo >= other.lo - tol && self.hi <= other.hi + tol)
    }

    /// Point at relative position `t ∈ [0, 1]`.
    pub fn lerp(&self, t: f64) -> f64 {
        self.lo + (self.hi - self.lo) * t
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("∅");
        }
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

impl std::str::FromStr for Interval {
    type Err = String;

    /// Parses `[a,b]`, `(a,b]`, `[a,b)` or `(a,b)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("malformed interval `{s}`");
        let mut chars = s.chars();
        let open = chars.next().ok_or_else(bad)?;
        let close = s.chars().last().ok_or_else(bad)?;
        let lo_closed = match open {
            '[' => true,
            '(' => false,
            _ => return Err(bad()),
        };
        let hi_closed = match close {
            ']' => true,
            ')' => false,
            _ => return Err(bad()),
        };
        let inner = &s[1..s.len() - 1];
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(lo <= hi) {
            return Err(bad());
        }
        Ok(Interval { lo, hi, lo_closed, hi_closed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_membership() {
        let i = Interval::left_open(0.5, 1.0);
        assert!(!i.contains(0.5));
        assert!(i.contains(1.0));
        assert!(i.contains(0.75));
    }

    #[test]
    fn intersection_keeps_tighter_flags() {
        let a = Interval::closed(0.0, 0.5);
        let b = Interval::left_open(0.25, 1.0);
        let c = a.intersect(&b);
        assert_eq!(c, Interval::left_open(0.25, 0.5));
        assert!(Interval::closed(0.0, 0.5).intersect(&Interval::left_open(0.5, 1.0)).is_empty());
    }

    #[test]
    fn parse_round_trip() {
        let i: Interval = "(0.5, 1]".parse().unwrap();
        assert_eq!(i, Interval::left_open(0.5, 1.0));
        assert!("0.5,1".parse::<Interval>().is_err());
        assert!("[1,0]".parse::<Interval>().is_err());
    }
}
