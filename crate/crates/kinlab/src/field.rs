//! Compactly supported functions on phase space `ℝ^d_x × ℝ^d_ξ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};

/// Axis-aligned support box in phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub xi_lo: Vec<f64>,
    pub xi_hi: Vec<f64>,
}

impl SupportBox {
    /// `[−X, X]^d × [−Ξ, Ξ]^d`.
    pub fn symmetric(d: usize, x_half: f64, xi_half: f64) -> Self {
        Self {
            x_lo: vec![-x_half; d],
            x_hi: vec![x_half; d],
            xi_lo: vec![-xi_half; d],
            xi_hi: vec![xi_half; d],
        }
    }

    /// Box of half-widths `rx`, `rxi` around the given centers.
    pub fn centered(x_center: &[f64], rx: f64, xi_center: &[f64], rxi: f64) -> Self {
        Self {
            x_lo: x_center.iter().map(|c| c - rx).collect(),
            x_hi: x_center.iter().map(|c| c + rx).collect(),
            xi_lo: xi_center.iter().map(|c| c - rxi).collect(),
            xi_hi: xi_center.iter().map(|c| c + rxi).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }

    pub fn contains(&self, x: &[f64], xi: &[f64]) -> bool {
        (0..self.dim()).all(|k| {
            x[k] >= self.x_lo[k] && x[k] <= self.x_hi[k] && xi[k] >= self.xi_lo[k] && xi[k] <= self.xi_hi[k]
        })
    }

    /// Phase-space bounds as `(lo, hi)` over all `2d` coordinates.
    pub fn phase_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.x_lo.iter().chain(&self.xi_lo).copied().collect();
        let hi = self.x_hi.iter().chain(&self.xi_hi).copied().collect();
        (lo, hi)
    }

    /// Largest `|ξ|` on the box.
    pub fn xi_radius(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.xi_lo[k].abs().max(self.xi_hi[k].abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| (self.x_hi[k] - self.x_lo[k]) * (self.xi_hi[k] - self.xi_lo[k])).product()
    }
}

type ClosedFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Closed(ClosedFn),
    /// Node values on a uniform grid spanning the support box, row-major over `(x, ξ)`.
    Lattice { n: usize, values: Arc<Vec<f64>> },
}

/// A phase-space field with compact support.
#[derive(Clone)]
pub struct PhaseField {
    support: SupportBox,
    repr: Repr,
    nonneg: bool,
}

impl fmt::Debug for PhaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Closed(_) => "closed".to_string(),
            Repr::Lattice { n, .. } => format!("lattice n={n}"),
        };
        write!(f, "PhaseField({kind}, {:?})", self.support)
    }
}

impl PhaseField {
    pub fn closed(support: SupportBox, nonneg: bool, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { support, repr: Repr::Closed(Arc::new(f)), nonneg }
    }

    /// Lattice field with `n` nodes per axis on the support box (endpoints included).
    pub fn lattice(support: SupportBox, n: usize, values: Vec<f64>) -> Result<Self> {
        let d2 = 2 * support.dim();
        if n < 2 || values.len() != n.pow(d2 as u32) {
            return Err(LabError::Params(format!("lattice needs n ≥ 2 and n^{d2} values")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("lattice values".into()));
        }
        let nonneg = values.iter().all(|v| *v >= 0.0);
        Ok(Self { support, repr: Repr::Lattice { n, values: Arc::new(values) }, nonneg })
    }

    pub fn zero(d: usize) -> Self {
        Self::closed(SupportBox::symmetric(d, 1.0, 1.0), true, |_, _| 0.0)
    }

    /// `1` on the box.
    pub fn indicator(support: SupportBox) -> Self {
        Self::closed(support, true, |_, _| 1.0)
    }

    /// Tensor-product polynomial bump `Π (1 − s_k²)^m` with `s_k` the scaled
    /// offset from the center along each phase axis.
    pub fn poly_bump(x_center: &[f64], rx: f64, xi_center: &[f64], rxi: f64, m: i32) -> Self {
        let support = SupportBox::centered(x_center, rx, xi_center, rxi);
        let (xc, qc) = (x_center.to_vec(), xi_center.to_vec());
        Self::closed(support, true, move |x, xi| {
            let mut v = 1.0;
            for k in 0..xc.len() {
                let s = (x[k] - xc[k]) / rx;
                let q = (xi[k] - qc[k]) / rxi;
                v *= (1.0 - s * s).max(0.0).powi(m) * (1.0 - q * q).max(0.0).powi(m);
            }
            v
        })
    }

    /// Radial C^∞ bump `φ(|x − x_c|/r_x)·φ(|ξ − ξ_c|/r_ξ)` with `φ(0) = 1`.
    pub fn smooth_bump(x_center: &[f64], rx: f64, xi_center: &[f64], rxi: f64) -> Self {
        let support = SupportBox::centered(x_center, rx, xi_center, rxi);
        let (xc, qc) = (x_center.to_vec(), xi_center.to_vec());
        Self::closed(support, true, move |x, xi| {
            let sx: f64 = x.iter().zip(&xc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / rx;
            let sq: f64 = xi.iter().zip(&qc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / rxi;
            bump_profile(sx) * bump_profile(sq)
        })
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    /// Value at `(x, ξ)`; zero outside the support box.
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        if !self.support.contains(x, xi) {
            return 0.0;
        }
        match &self.repr {
            Repr::Closed(f) => f(x, xi),
            Repr::Lattice { n, values } => self.interpolate(*n, values, x, xi),
        }
    }

    /// Value at a flat phase point `z = (x, ξ)`.
    pub fn eval_z(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        self.eval(&z[..d], &z[d..])
    }

    /// Samples the field on an `n`-per-axis lattice over its support.
    pub fn to_lattice(&self, n: usize) -> Result<Self> {
        let (lo, hi) = self.support.phase_bounds();
        let d2 = lo.len();
        let total = n.pow(d2 as u32);
        let mut values = Vec::with_capacity(total);
        let mut z = vec![0.0; d2];
        for idx in 0..total {
            let mut rem = idx;
            for k in (0..d2).rev() {
                let i = rem % n;
                rem /= n;
                z[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64;
            }
            values.push(self.eval_z(&z));
        }
        Self::lattice(self.support.clone(), n, values)
    }

    fn interpolate(&self, n: usize, values: &[f64], x: &[f64], xi: &[f64]) -> f64 {
        let (lo, hi) = self.support.phase_bounds();
        let d2 = lo.len();
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        for k in 0..d2 {
            let c = if k < x.len() { x[k] } else { xi[k - x.len()] };
            let s = ((c - lo[k]) / (hi[k] - lo[k]) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d2) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for k in 0..d2 {
                let bit = (corner >> (d2 - 1 - k)) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * n + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * values[flat];
            }
        }
        acc
    }
}

/// `exp(1 − 1/(1 − s²))` on `|s| < 1`, zero elsewhere.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - s * s)).exp() }
}

/// C^∞ step: 1 for `r ≤ a`, 0 for `r ≥ b`, monotone in between.
pub fn smooth_step(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        return 1.0;
    }
    if r >= b {
        return 0.0;
    }
    let th = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let (u, v) = (th((b - r) / (b - a)), th((r - a) / (b - a)));
    u / (u + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_reproduces_multilinear_functions() {
        let sb = SupportBox::symmetric(1, 2.0, 1.0);
        let f = PhaseField::closed(sb, false, |x, xi| 1.0 + 0.5 * x[0] - 2.0 * xi[0] + x[0] * xi[0]);
        let g = f.to_lattice(5).unwrap();
        for (x, q) in [(0.3, -0.7), (-1.9, 0.99), (1.234, 0.01)] {
            assert!((f.eval(&[x], &[q]) - g.eval(&[x], &[q])).abs() < 1e-14);
        }
        assert_eq!(g.eval(&[2.5], &[0.0]), 0.0);
    }

    #[test]
    fn smooth_step_profile() {
        assert_eq!(smooth_step(0.5, 0.9, 1.0), 1.0);
        assert_eq!(smooth_step(1.0, 0.9, 1.0), 0.0);
        let m = smooth_step(0.95, 0.9, 1.0);
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bumps_are_nonnegative_and_supported() {
        let f = PhaseField::poly_bump(&[0.0, 0.0], 0.3, &[1.0, 0.0], 0.5, 2);
        assert!(f.is_nonneg());
        assert_eq!(f.eval(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert_eq!(f.eval(&[0.31, 0.0], &[1.0, 0.0]), 0.0);
        let g = PhaseField::smooth_bump(&[0.0], 1.0, &[0.0], 1.0);
        assert_eq!(g.eval(&[0.0], &[0.0]), 1.0);
        assert!(g.eval(&[0.999], &[0.0]) >= 0.0);
    }
}
