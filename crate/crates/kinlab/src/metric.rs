//! Metric fields on ℝ^d.
//!
//! Every metric shipped here has an inverse of the form
//! `g^{ij}(x) = A(u) δ_ij + B(u) x_i x_j` with `u = |x|²`. The profile supplies
//! second-order jets of `A` and `B` in `u`, from which the metric, its inverse,
//! derivatives and the kinetic symbol jets follow in closed form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LabError, Result};
use crate::jet::Jet;

/// Largest supported dimension (phase space has twice as many coordinates).
pub const MAXD: usize = 4;

/// Full metric data at a point.
#[derive(Clone, Debug)]
pub struct MetricValue {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `d_g_inv[k][(i, j)] = ∂_k g^{ij}`
    pub d_g_inv: Vec<DMatrix<f64>>,
    pub sqrt_det: f64,
}

/// Radial profile: jets of `A(u)` and `B(u)`.
pub trait RadialProfile: Send + Sync {
    fn coeffs(&self, u: f64) -> (Jet, Jet);

    /// The metric is exactly Euclidean for `|x| >= R`.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    /// Radius of a ball on which the metric is exactly a pulled-back round sphere.
    fn sphere_zone(&self) -> Option<f64> {
        None
    }

    /// Smallest length over which the metric varies appreciably.
    fn length_scale(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;
}

/// A metric field on ℝ^d.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    profile: Arc<dyn RadialProfile>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricField(d={}, {})", self.dim, self.profile.describe())
    }
}

/// Kinetic symbol with first derivatives, and optionally the phase-space Hessian.
#[derive(Clone, Copy, Debug)]
pub struct SymbolJet {
    pub p: f64,
    pub dx: [f64; MAXD],
    pub dxi: [f64; MAXD],
}

impl MetricField {
    pub fn new(dim: usize, profile: Arc<dyn RadialProfile>) -> Result<Self> {
        if dim == 0 || dim > MAXD {
            return Err(LabError::Params(format!("dimension {dim} outside 1..={MAXD}")));
        }
        Ok(Self { dim, profile })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, Arc::new(Euclidean))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.profile.support_radius()
    }

    pub fn sphere_zone(&self) -> Option<f64> {
        self.profile.sphere_zone()
    }

    pub fn describe(&self) -> String {
        self.profile.describe()
    }

    pub fn length_scale(&self) -> Option<f64> {
        self.profile.length_scale()
    }

    pub fn is_euclidean(&self) -> bool {
        self.profile.support_radius() == Some(0.0)
    }

    #[inline]
    fn ab(&self, x: &[f64]) -> (f64, Jet, Jet) {
        let u: f64 = x.iter().map(|v| v * v).sum();
        let (a, b) = self.profile.coeffs(u);
        (u, a, b)
    }

    /// Evaluates `g`, `g^{-1}`, `∂g^{-1}` and `√det g` at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<MetricValue> {
        let d = self.dim;
        let (u, a, b) = self.ab(x);
        let (av, bv) = (a.v, b.v);
        let lam_perp = av;
        let lam_rad = av + bv * u;
        if !(lam_perp > 0.0 && lam_rad > 0.0) || !lam_perp.is_finite() || !lam_rad.is_finite() {
            return Err(LabError::DegenerateMetric {
                x: x.to_vec(),
                min_eig: lam_perp.min(lam_rad),
            });
        }
        let mut g_inv = DMatrix::zeros(d, d);
        let mut g = DMatrix::zeros(d, d);
        let c = bv / (av * lam_rad);
        for i in 0..d {
            for j in 0..d {
                let xx = x[i] * x[j];
                let del = if i == j { 1.0 } else { 0.0 };
                g_inv[(i, j)] = av * del + bv * xx;
                g[(i, j)] = del / av - c * xx;
            }
        }
        let mut d_g_inv = Vec::with_capacity(d);
        for k in 0..d {
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let del_ij = if i == j { 1.0 } else { 0.0 };
                    let del_ik = if i == k { 1.0 } else { 0.0 };
                    let del_jk = if j == k { 1.0 } else { 0.0 };
                    m[(i, j)] = 2.0 * a.d * x[k] * del_ij
                        + 2.0 * b.d * x[k] * x[i] * x[j]
                        + bv * (del_ik * x[j] + x[i] * del_jk);
                }
            }
            d_g_inv.push(m);
        }
        let det_inv = lam_perp.powi(d as i32 - 1) * lam_rad;
        Ok(MetricValue { g, g_inv, d_g_inv, sqrt_det: 1.0 / det_inv.sqrt() })
    }

    /// `p(x, ξ) = g^{ij}(x) ξ_i ξ_j`.
    #[inline]
    pub fn symbol(&self, x: &[f64], xi: &[f64]) -> f64 {
        let (_, a, b) = self.ab(x);
        let s: f64 = x.iter().zip(xi).map(|(p, q)| p * q).sum();
        let w: f64 = xi.iter().map(|v| v * v).sum();
        a.v * w + b.v * s * s
    }

    /// Symbol and its first derivatives.
    #[inline]
    pub fn symbol_jet(&self, x: &[f64], xi: &[f64]) -> SymbolJet {
        let d = self.dim;
        let (_, a, b) = self.ab(x);
        let s: f64 = x[..d].iter().zip(&xi[..d]).map(|(p, q)| p * q).sum();
        let w: f64 = xi[..d].iter().map(|v| v * v).sum();
        let mut out = SymbolJet { p: a.v * w + b.v * s * s, dx: [0.0; MAXD], dxi: [0.0; MAXD] };
        let rad = a.d * w + b.d * s * s;
        for k in 0..d {
            out.dx[k] = 2.0 * x[k] * rad + 2.0 * b.v * s * xi[k];
            out.dxi[k] = 2.0 * a.v * xi[k] + 2.0 * b.v * s * x[k];
        }
        out
    }

    /// Hessian of `p` in phase-space coordinates `(x, ξ)`, row-major `2d × 2d`.
    pub fn symbol_hessian(&self, x: &[f64], xi: &[f64], out: &mut [[f64; 2 * MAXD]; 2 * MAXD]) {
        self.symbol_second_order(x, xi, out);
    }

    /// Symbol jet and phase-space Hessian from a single profile evaluation.
    pub fn symbol_second_order(&self, x: &[f64], xi: &[f64], out: &mut [[f64; 2 * MAXD]; 2 * MAXD]) -> SymbolJet {
        let d = self.dim;
        let (_, a, b) = self.ab(x);
        let s: f64 = x[..d].iter().zip(&xi[..d]).map(|(p, q)| p * q).sum();
        let w: f64 = xi[..d].iter().map(|v| v * v).sum();
        let rad1 = a.d * w + b.d * s * s;
        let rad2 = a.dd * w + b.dd * s * s;
        let mut jet = SymbolJet { p: a.v * w + b.v * s * s, dx: [0.0; MAXD], dxi: [0.0; MAXD] };
        for k in 0..d {
            jet.dx[k] = 2.0 * x[k] * rad1 + 2.0 * b.v * s * xi[k];
            jet.dxi[k] = 2.0 * a.v * xi[k] + 2.0 * b.v * s * x[k];
            for l in 0..d {
                let del = if k == l { 1.0 } else { 0.0 };
                out[k][l] = 2.0 * del * rad1
                    + 4.0 * x[k] * x[l] * rad2
                    + 4.0 * b.d * s * (x[k] * xi[l] + x[l] * xi[k])
                    + 2.0 * b.v * xi[k] * xi[l];
                let xk_xil = 2.0 * x[k] * (2.0 * a.d * xi[l] + 2.0 * b.d * s * x[l])
                    + 2.0 * b.v * (x[l] * xi[k] + s * del);
                out[k][d + l] = xk_xil;
                out[d + l][k] = xk_xil;
                out[d + k][d + l] = 2.0 * a.v * del + 2.0 * b.v * x[k] * x[l];
            }
        }
        jet
    }

    /// Global bounds on the eigenvalues of `g^{-1}`, from a radial scan.
    pub fn inverse_eigen_bounds(&self) -> (f64, f64) {
        let r_max = self.support_radius().map_or(10.0, |r| r.max(1e-9));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..=4000 {
            let r = r_max * k as f64 / 4000.0;
            let u = r * r;
            let (a, b) = self.profile.coeffs(u);
            let (l1, l2) = (a.v, a.v + b.v * u);
            lo = lo.min(l1.min(l2));
            hi = hi.max(l1.max(l2));
        }
        if self.support_radius().is_some() {
            lo = lo.min(1.0);
            hi = hi.max(1.0);
        }
        (lo, hi)
    }
}

/// The flat metric.
#[derive(Clone, Copy, Debug)]
pub struct Euclidean;

impl RadialProfile for Euclidean {
    fn coeffs(&self, _u: f64) -> (Jet, Jet) {
        (Jet::constant(1.0), Jet::constant(0.0))
    }
    fn support_radius(&self) -> Option<f64> {
        Some(0.0)
    }
    fn describe(&self) -> String {
        "euclidean".into()
    }
}

/// Conformal metric `g_ij = c(u) δ_ij` given by a jet-valued closure in `u = |x|²`.
pub struct Conformal<F> {
    factor: F,
    support: Option<f64>,
    label: String,
}

impl<F: Fn(Jet) -> Jet + Send + Sync> Conformal<F> {
    pub fn new(factor: F, support: Option<f64>, label: impl Into<String>) -> Self {
        Self { factor, support, label: label.into() }
    }
}

impl<F: Fn(Jet) -> Jet + Send + Sync> RadialProfile for Conformal<F> {
    fn coeffs(&self, u: f64) -> (Jet, Jet) {
        ((self.factor)(Jet::var(u)).recip(), Jet::constant(0.0))
    }
    fn support_radius(&self) -> Option<f64> {
        self.support
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// The one-dimensional test metric `g(x) = 1 + 0.5·exp(−x²)`.
pub fn bump_metric_1d(amplitude: f64) -> Result<MetricField> {
    MetricField::new(
        1,
        Arc::new(Conformal::new(
            move |u: Jet| 1.0 + (-u).exp() * amplitude,
            None,
            format!("conformal_1d(1+{amplitude}exp(-x^2))"),
        )),
    )
}

/// Natural cubic spline through uniformly spaced samples.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 3 || h <= 0.0 {
            return Err(LabError::Params("spline needs ≥ 3 samples and positive spacing".into()));
        }
        // tridiagonal system for second derivatives, natural end conditions
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 1..n - 1 {
            r[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        }
        for i in 1..n - 1 {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            r[i] = (r[i] - r[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = r[i] - c[i] * m[i + 1];
        }
        Ok(Self { x0, h, y, m })
    }

    /// Value, first and second derivative; constant extrapolation outside the table.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        if s <= 0.0 {
            return (self.y[0], 0.0, 0.0);
        }
        if s >= (n - 1) as f64 {
            return (self.y[n - 1], 0.0, 0.0);
        }
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let h = self.h;
        let (a, b) = (1.0 - t, t);
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * mi + (3.0 * b * b - 1.0) * mj) * h / 6.0;
        let d2 = a * mi + b * mj;
        (v, d1, d2)
    }
}

/// Tabulated conformal factor `c(u)` on a uniform grid in `u = |x|²`.
pub struct RadialTable {
    spline: CubicSpline,
    support: f64,
}

impl RadialTable {
    /// `values[k]` is the conformal factor at `|x| = r_k` with `r_k² = k·u_max/(n−1)`;
    /// the last value must be 1 (Euclidean outside the table).
    pub fn new(u_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(LabError::Params("conformal table must be positive".into()));
        }
        if (values.last().copied().unwrap_or(0.0) - 1.0).abs() > 1e-12 {
            return Err(LabError::Params("conformal table must end at 1".into()));
        }
        let n = values.len();
        let spline = CubicSpline::new(0.0, u_max / (n.max(2) - 1) as f64, values)?;
        Ok(Self { spline, support: u_max.sqrt() })
    }
}

impl RadialProfile for RadialTable {
    fn coeffs(&self, u: f64) -> (Jet, Jet) {
        let (v, d1, d2) = self.spline.eval(u);
        let c = Jet::var(u).chain(v, d1, d2);
        (c.recip(), Jet::constant(0.0))
    }
    fn support_radius(&self) -> Option<f64> {
        Some(self.support)
    }
    fn describe(&self) -> String {
        "custom_table".into()
    }
}

/// Parameters of the glued sphere metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GluedMetricParams {
    pub r0: f64,
    pub eps: f64,
    pub dim: usize,
}

impl Default for GluedMetricParams {
    fn default() -> Self {
        Self { r0: 0.1, eps: 0.05, dim: 2 }
    }
}

impl GluedMetricParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r0 > 0.0
            && self.r0 < 1.0
            && self.eps > 0.0
            && self.eps < 1.0
            && self.r0 + 2.0 * self.eps < 1.0;
        if !ok {
            return Err(LabError::Params(format!(
                "need 0 < r0, eps < 1 and r0 + 2 eps < 1 (r0 = {}, eps = {})",
                self.r0, self.eps
            )));
        }
        if self.dim < 2 || self.dim > MAXD {
            return Err(LabError::Params(format!("glued metric needs 2 ≤ d ≤ {MAXD}")));
        }
        Ok(())
    }

    pub fn inner(&self) -> f64 {
        self.r0 + self.eps
    }

    pub fn outer(&self) -> f64 {
        self.r0 + 2.0 * self.eps
    }
}

#[inline]
fn theta(s: Jet) -> Jet {
    // below 1/600 the value and its derivatives are under 1e-250
    if s.v <= 1.0 / 600.0 { Jet::constant(0.0) } else { (-s.recip()).exp() }
}

fn chi_jet(r: Jet, p: &GluedMetricParams) -> Jet {
    if r.v <= p.inner() {
        return Jet::constant(1.0);
    }
    if r.v >= p.outer() {
        return Jet::constant(0.0);
    }
    let psi1 = theta((p.outer() - r) * (1.0 / p.eps));
    let psi2 = theta((r - p.inner()) * (1.0 / p.eps));
    psi1 / (psi1 + psi2)
}

/// The smooth cutoff `χ(r)`: 1 on `[0, r0+eps]`, 0 on `[r0+2eps, ∞)`.
pub fn cutoff_chi(r: f64, params: &GluedMetricParams) -> Result<f64> {
    params.validate()?;
    if r < 0.0 {
        return Err(LabError::Params("negative radius".into()));
    }
    Ok(chi_jet(Jet::var(r), params).v)
}

/// Radial profile of the glued sphere metric.
#[derive(Clone, Debug)]
pub struct GluedSphere {
    params: GluedMetricParams,
}

impl GluedSphere {
    /// Forward metric coefficients `g = α I + β x xᵀ`, as jets in `u`.
    fn forward(&self, u: f64) -> (Jet, Jet) {
        let p = &self.params;
        let uj = Jet::var(u);
        let chi = if u.sqrt() <= p.inner() {
            Jet::constant(1.0)
        } else if u.sqrt() >= p.outer() {
            Jet::constant(0.0)
        } else {
            chi_jet(uj.sqrt(), p)
        };
        if chi.v == 0.0 && chi.d == 0.0 && chi.dd == 0.0 {
            return (Jet::constant(1.0), Jet::constant(0.0));
        }
        let s = 1.0 - uj;
        let alpha = 1.0 - chi + chi * s * 4.0;
        let beta = chi * (2.0 - uj) * 4.0 / s;
        (alpha, beta)
    }
}

impl RadialProfile for GluedSphere {
    fn coeffs(&self, u: f64) -> (Jet, Jet) {
        let (alpha, beta) = self.forward(u);
        if beta.v == 0.0 && beta.d == 0.0 && beta.dd == 0.0 {
            return (alpha.recip(), Jet::constant(0.0));
        }
        let uj = Jet::var(u);
        let a = alpha.recip();
        let b = -(beta / (alpha * (alpha + beta * uj)));
        (a, b)
    }
    fn support_radius(&self) -> Option<f64> {
        Some(self.params.outer())
    }
    fn sphere_zone(&self) -> Option<f64> {
        Some(self.params.inner())
    }
    fn length_scale(&self) -> Option<f64> {
        Some(self.params.eps)
    }
    fn describe(&self) -> String {
        format!("glued_sphere(r0={}, eps={})", self.params.r0, self.params.eps)
    }
}

/// Builds the glued sphere metric, verifying positive definiteness on a radial sample grid.
pub fn glued_sphere_metric(params: GluedMetricParams) -> Result<MetricField> {
    params.validate()?;
    let prof = GluedSphere { params };
    let mut worst = (f64::INFINITY, 0.0);
    for k in 0..=2000 {
        let r = params.outer() * k as f64 / 2000.0;
        let (alpha, beta) = prof.forward(r * r);
        let ev = alpha.v.min(alpha.v + beta.v * r * r);
        if ev < worst.0 {
            worst = (ev, r);
        }
    }
    if !(worst.0 > 0.0) {
        let mut at = vec![0.0; params.dim];
        at[0] = worst.1;
        return Err(LabError::GluingInvalid { min_eig: worst.0, at });
    }
    MetricField::new(params.dim, Arc::new(prof))
}

/// `F`: stereographic projection from the north pole, 𝕊^d∖{N} → ℝ^d.
pub fn stereographic_to_plane(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(LabError::Params("sphere point needs at least two coordinates".into()));
    }
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(LabError::Params(format!("point not on the unit sphere (|X| = {norm})")));
    }
    let den = 1.0 - x[n - 1];
    if den == 0.0 {
        return Err(LabError::PoleSingularity);
    }
    Ok(x[..n - 1].iter().map(|v| v / den).collect())
}

/// `F^{-1}`: inverse stereographic projection ℝ^d → 𝕊^d∖{N}.
pub fn plane_to_sphere(y: &[f64]) -> Vec<f64> {
    let q: f64 = y.iter().map(|v| v * v).sum();
    let mut out: Vec<f64> = y.iter().map(|v| 2.0 * v / (1.0 + q)).collect();
    out.push((q - 1.0) / (q + 1.0));
    out
}

/// `G(x) = x / ⟨x⟩`, ℝ^d → 𝔹^d.
pub fn plane_to_ball(x: &[f64]) -> Vec<f64> {
    let q: f64 = x.iter().map(|v| v * v).sum();
    let s = (1.0 + q).sqrt();
    x.iter().map(|v| v / s).collect()
}

/// `G^{-1}(y) = y / √(1 − |y|²)`, 𝔹^d → ℝ^d.
pub fn ball_to_plane(y: &[f64]) -> Result<Vec<f64>> {
    let q: f64 = y.iter().map(|v| v * v).sum();
    if q >= 1.0 {
        return Err(LabError::Params("point outside the open unit ball".into()));
    }
    let s = (1.0 - q).sqrt();
    Ok(y.iter().map(|v| v / s).collect())
}

/// The chart `x ↦ F^{-1}(G^{-1}(x))` from the unit ball onto the punctured sphere.
pub fn ball_to_sphere(x: &[f64]) -> Result<Vec<f64>> {
    Ok(plane_to_sphere(&ball_to_plane(x)?))
}

/// Inverse chart: sphere point to ball point, `G(F(X))`.
pub fn sphere_to_ball(x: &[f64]) -> Result<Vec<f64>> {
    Ok(plane_to_ball(&stereographic_to_plane(x)?))
}

/// Pullback of the round metric through the composed chart, by a 4th-order
/// central-difference Jacobian (step `h`).
pub fn pullback_numeric(x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = x.len();
    let mut jac = DMatrix::zeros(d + 1, d);
    for k in 0..d {
        let mut col = vec![0.0; d + 1];
        for (c, s) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            let mut y = x.to_vec();
            y[k] += c * h;
            let p = ball_to_sphere(&y)?;
            for i in 0..=d {
                col[i] += s * p[i];
            }
        }
        for i in 0..=d {
            jac[(i, k)] = col[i] / (12.0 * h);
        }
    }
    Ok(jac.transpose() * jac)
}

/// Pullback of the round metric in closed form: `4s I + 4(2 − |x|²)/s · x xᵀ`, `s = 1 − |x|²`.
pub fn pullback_analytic(x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let u: f64 = x.iter().map(|v| v * v).sum();
    let s = 1.0 - u;
    DMatrix::from_fn(d, d, |i, j| {
        (if i == j { 4.0 * s } else { 0.0 }) + 4.0 * (2.0 - u) / s * x[i] * x[j]
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn glued() -> MetricField {
        glued_sphere_metric(GluedMetricParams::default()).unwrap()
    }

    #[test]
    fn euclidean_is_identity() {
        let m = MetricField::euclidean(3).unwrap();
        let v = m.eval(&[0.3, -2.0, 5.0]).unwrap();
        assert_eq!(v.g, DMatrix::identity(3, 3));
        assert_eq!(v.sqrt_det, 1.0);
    }

    #[test]
    fn glued_outside_support_is_exactly_identity() {
        let m = glued();
        for x in [[0.5, 0.0], [0.2, 0.0], [0.15, 0.15], [3.0, -4.0]] {
            let v = m.eval(&x).unwrap();
            assert_eq!(v.g, DMatrix::identity(2, 2));
            assert_eq!(v.g_inv, DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn glued_at_origin_matches_numeric_pullback() {
        let m = glued();
        let v = m.eval(&[0.0, 0.0]).unwrap();
        let oracle = pullback_numeric(&[0.0, 0.0], 1e-4).unwrap();
        assert!((v.g - oracle).abs().max() < 1e-8);
    }

    #[test]
    fn pure_sphere_zone_matches_numeric_pullback() {
        let m = glued_sphere_metric(GluedMetricParams { r0: 0.75, eps: 0.1, dim: 3 }).unwrap();
        for x in [[0.1, 0.2, -0.3], [0.5, 0.4, 0.1], [0.0, 0.0, 0.84]] {
            let v = m.eval(&x).unwrap();
            let oracle = pullback_numeric(&x, 1e-4).unwrap();
            let scale = oracle.abs().max();
            assert!((v.g.clone() - oracle).abs().max() < 1e-8 * scale, "x = {x:?}");
            assert!((v.g - pullback_analytic(&x)).abs().max() < 1e-12 * scale);
        }
    }

    #[test]
    fn inverse_times_metric_is_identity() {
        let m = glued();
        for x in [[0.01, 0.02], [0.12, 0.05], [0.16, -0.07], [0.0, 0.19]] {
            let v = m.eval(&x).unwrap();
            let id = &v.g_inv * &v.g;
            assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
            assert!((v.g.clone() - v.g.transpose()).abs().max() <= 1e-14);
            assert!(v.g.clone().cholesky().is_some());
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let m = glued();
        let h = 1e-4;
        for x in [[0.05, 0.03], [0.13, 0.02], [0.1, -0.11], [0.16, 0.05]] {
            let v = m.eval(&x).unwrap();
            for k in 0..2 {
                let at = |c: f64| {
                    let mut y = x;
                    y[k] += c * h;
                    m.eval(&y).unwrap().g_inv
                };
                let fd = (at(-2.0) - at(-1.0) * 8.0 + at(1.0) * 8.0 - at(2.0)) / (12.0 * h);
                let err = (&fd - &v.d_g_inv[k]).abs().max();
                let scale = v.d_g_inv[k].abs().max().max(1e-3);
                assert!(err <= 1e-6 * scale.max(1.0), "x={x:?} k={k} err={err}");
            }
        }
    }

    #[test]
    fn cutoff_profile() {
        let p = GluedMetricParams::default();
        assert_eq!(cutoff_chi(p.r0, &p).unwrap(), 1.0);
        assert_eq!(cutoff_chi(1.0, &p).unwrap(), 0.0);
        let mid = cutoff_chi(p.r0 + 1.5 * p.eps, &p).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        let a = cutoff_chi(p.r0 + 1.4 * p.eps, &p).unwrap();
        let b = cutoff_chi(p.r0 + 1.6 * p.eps, &p).unwrap();
        assert!(a > mid && mid > b);
        assert!(cutoff_chi(0.1, &GluedMetricParams { r0: 0.6, eps: 0.3, dim: 2 }).is_err());
    }

    #[test]
    fn chart_examples() {
        assert_eq!(stereographic_to_plane(&[0.0, 0.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(stereographic_to_plane(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let y = stereographic_to_plane(&[0.0, 0.6, 0.8]).unwrap();
        assert!((y[0]).abs() < 1e-15 && (y[1] - 3.0).abs() < 1e-12);
        assert!(matches!(stereographic_to_plane(&[0.0, 0.0, 1.0]), Err(LabError::PoleSingularity)));
        let b = plane_to_ball(&[3.0, 4.0]);
        assert!((b[0] - 0.58835).abs() < 1e-5 && (b[1] - 0.78446).abs() < 1e-5);
        assert_eq!(plane_to_ball(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn glued_eigenvalue_scan_positive() {
        let m = glued();
        let mut lo = f64::INFINITY;
        for i in -40..=40 {
            for j in -40..=40 {
                let x = [i as f64 / 40.0, j as f64 / 40.0];
                if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                    lo = lo.min(min_eigenvalue(&m.eval(&x).unwrap().g));
                }
            }
        }
        assert!(lo > 0.0);
    }

    #[test]
    fn symbol_hessian_matches_finite_differences() {
        let m = glued();
        let (x, xi) = ([0.12, 0.07], [0.8, -1.3]);
        let mut hess = [[0.0; 2 * MAXD]; 2 * MAXD];
        m.symbol_hessian(&x, &xi, &mut hess);
        let h = 1e-5;
        let grad = |z: [f64; 4]| {
            let j = m.symbol_jet(&z[..2], &z[2..]);
            [j.dx[0], j.dx[1], j.dxi[0], j.dxi[1]]
        };
        let z0 = [x[0], x[1], xi[0], xi[1]];
        for c in 0..4 {
            let mut zp = z0;
            let mut zm = z0;
            zp[c] += h;
            zm[c] -= h;
            let (gp, gm) = (grad(zp), grad(zm));
            for r in 0..4 {
                let fd = (gp[r] - gm[r]) / (2.0 * h);
                assert!((fd - hess[r][c]).abs() < 1e-5 * (1.0 + fd.abs()), "r={r} c={c}");
            }
        }
    }

    #[test]
    fn spline_reproduces_quadratics_inside() {
        let s = CubicSpline::new(0.0, 0.1, (0..21).map(|k| 1.0 + 0.01 * k as f64).collect()).unwrap();
        let (v, d1, d2) = s.eval(0.73);
        assert!((v - 1.073).abs() < 1e-12 && (d1 - 0.1).abs() < 1e-10 && d2.abs() < 1e-9);
    }
}
