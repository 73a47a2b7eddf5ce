//! Exponent bookkeeping for transport Strichartz norms.
//!
//! Exponents live in `[1, ∞]` and are handled exactly through their
//! reciprocals, which are rationals in `[0, 1]` (with `∞ ↦ 0`).

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::error::{LabError, Result};

/// An exponent in `[1, ∞]`, stored as its reciprocal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    recip: Rational64,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent { recip: Rational64::new_raw(0, 1) };

    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(LabError::Params("exponent must be a finite nonzero ratio".into()));
        }
        Self::from_recip(Rational64::new(den, num))
    }

    pub fn from_recip(recip: Rational64) -> Result<Self> {
        if recip < Rational64::from_integer(0) || recip > Rational64::from_integer(1) {
            return Err(LabError::Params(format!("exponent 1/{recip} outside [1, ∞]")));
        }
        Ok(Self { recip })
    }

    pub fn recip(&self) -> Rational64 {
        self.recip
    }

    pub fn is_infinite(&self) -> bool {
        self.recip == Rational64::from_integer(0)
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            (*self.recip.denom() as f64) / (*self.recip.numer() as f64)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            let v = self.recip.recip();
            if *v.denom() == 1 { write!(f, "{}", v.numer()) } else { write!(f, "{}/{}", v.numer(), v.denom()) }
        }
    }
}

impl FromStr for Exponent {
    type Err = LabError;

    /// Accepts `inf`, integers and `n/m` fractions.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(Self::INFINITY);
        }
        let bad = || LabError::Params(format!("cannot parse exponent '{s}'"));
        match s.split_once('/') {
            Some((n, d)) => Self::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => Self::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

/// `HM(p, r)` with `HM^{-1} = (1/p + 1/r)/2`.
pub fn harmonic_mean(p: Exponent, r: Exponent) -> Exponent {
    Exponent { recip: (p.recip + r.recip) / 2 }
}

/// The lower and upper exponents `(p_*(a), r_*(a))`.
pub fn critical_pair(a: Exponent, d: u32) -> (Exponent, Exponent) {
    let d = Rational64::from_integer(d as i64);
    let one = Rational64::from_integer(1);
    let ia = a.recip;
    // a ≥ (d+1)/d  ⇔  1/a ≤ d/(d+1)
    if ia <= d / (d + one) {
        let p = Exponent { recip: ia * (d + one) / d };
        let r = if d == one { Exponent::INFINITY } else { Exponent { recip: ia * (d - one) / d } };
        (p, r)
    } else {
        (Exponent { recip: one }, Exponent { recip: ia * 2 - one })
    }
}

/// The quadruplet `(q, r, p, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormSpec {
    pub q: Exponent,
    pub r: Exponent,
    pub p: Exponent,
    pub a: Exponent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Admissibility {
    pub admissible: bool,
    pub endpoint: bool,
    pub reason: String,
}

/// Classifies a quadruplet for dimension `d`.
pub fn check_kt_admissible(spec: &NormSpec, d: u32) -> Admissibility {
    let NormSpec { q, r, p, a } = *spec;
    let dd = Rational64::from_integer(d as i64);
    let reject = |reason: &str| Admissibility { admissible: false, endpoint: false, reason: reason.into() };
    if a != harmonic_mean(p, r) {
        return reject("a is not the harmonic mean of p and r");
    }
    if q.recip != dd / 2 * (p.recip - r.recip) {
        return reject("scaling relation 1/q = (d/2)(1/p - 1/r) fails");
    }
    let (ps, rs) = critical_pair(a, d);
    // p* ≤ p ≤ a ≤ r ≤ r*, reversed on reciprocals
    if !(ps.recip >= p.recip && p.recip >= a.recip && a.recip >= r.recip && r.recip >= rs.recip) {
        return reject("ordering p*(a) <= p <= a <= r <= r*(a) fails");
    }
    // the exclusion targets finite a; a = ∞ forces q = r = p = ∞, which is admissible
    if d == 1 && !a.is_infinite() && q == a && r.is_infinite() && p.recip == a.recip * 2 {
        return reject("excluded case (q, r, p, d) = (a, inf, a/2, 1)");
    }
    let lower = a.recip <= dd / (dd + 1) && !a.is_infinite();
    let endpoint = lower && q == a && r == rs && p == ps;
    Admissibility {
        admissible: true,
        endpoint,
        reason: if endpoint { "admissible endpoint".into() } else { "admissible".into() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Exponent {
        s.parse().unwrap()
    }

    #[test]
    fn harmonic_mean_examples() {
        assert_eq!(harmonic_mean(e("10/7"), e("30/11")), e("15/8"));
        assert_eq!(harmonic_mean(e("3"), e("3")), e("3"));
        assert_eq!(harmonic_mean(Exponent::INFINITY, Exponent::INFINITY), Exponent::INFINITY);
    }

    #[test]
    fn boltzmann_pair_is_admissible() {
        let spec = NormSpec { q: e("2"), r: e("30/11"), p: e("10/7"), a: e("15/8") };
        let v = check_kt_admissible(&spec, 3);
        assert!(v.admissible && !v.endpoint, "{v:?}");
    }

    #[test]
    fn all_infinite_is_admissible() {
        let i = Exponent::INFINITY;
        for d in 1..=4 {
            assert!(check_kt_admissible(&NormSpec { q: i, r: i, p: i, a: i }, d).admissible);
        }
    }

    #[test]
    fn exclusion_clause_in_one_dimension() {
        for a in ["2", "3", "4", "6"] {
            let a = e(a);
            let half = Exponent::from_recip(a.recip() * 2).unwrap();
            let spec = NormSpec { q: a, r: Exponent::INFINITY, p: half, a };
            let v = check_kt_admissible(&spec, 1);
            assert!(!v.admissible, "{spec:?}");
        }
    }

    #[test]
    fn endpoint_detected() {
        // d = 3, a = 2: p* = 3/2, r* = 3, q = a
        let spec = NormSpec { q: e("2"), r: e("3"), p: e("3/2"), a: e("2") };
        let v = check_kt_admissible(&spec, 3);
        assert!(v.admissible && v.endpoint, "{v:?}");
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(e("30/11").to_string(), "30/11");
        assert_eq!(e("inf").to_string(), "inf");
        assert_eq!(e("2").to_f64(), 2.0);
        assert!("1/2".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
    }
}
