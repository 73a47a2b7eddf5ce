//! Cutoff collision operator: post-collisional velocities, the kernel
//! `B(u, ω) = (|u|² + η²)^{γ/2} b(ω·û)` and the gain and loss integrals.
//!
//! Angular nodes are laid out relative to the direction of the relative
//! velocity `û`, so the cutoff factor `b(c) = max(c, 0)` only ever sees the
//! hemisphere where it is smooth.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::quad::{Rule1d, TensorRule};

/// Largest velocity dimension handled by the collision code.
pub const MAX_VDIM: usize = 3;

type V = [f64; MAX_VDIM];

fn load(v: &[f64]) -> V {
    let mut out = [0.0; MAX_VDIM];
    out[..v.len()].copy_from_slice(v);
    out
}

fn dot(a: &V, b: &V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `(ζ′, ζ′*)` with `ζ′ = ζ − [ω·(ζ−ζ*)]ω` and `ζ′* = ζ* + [ω·(ζ−ζ*)]ω`.
pub fn collide_velocities(zeta: &[f64], zeta_s: &[f64], omega: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = zeta.len();
    if zeta_s.len() != d || omega.len() != d {
        return Err(LabError::Params("velocity dimensions differ".into()));
    }
    let norm2 = omega.iter().fold(0.0, |acc: f64, w| w.mul_add(*w, acc));
    if (norm2.sqrt() - 1.0).abs() > 1e-12 {
        return Err(LabError::NonUnit(norm2.sqrt()));
    }
    // dividing by the computed |ω|² keeps the exchange exact for a rounded ω
    // fused products keep the rounding of the exchange near one ulp per component
    let proj = (0..d).fold(0.0, |acc: f64, k| omega[k].mul_add(zeta[k] - zeta_s[k], acc)) / norm2;
    let post = (0..d).map(|k| (-proj).mul_add(omega[k], zeta[k])).collect();
    let post_s = (0..d).map(|k| proj.mul_add(omega[k], zeta_s[k])).collect();
    Ok((post, post_s))
}

/// Angular cutoff factor as a function of `cos θ = ω·û`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngularFactor {
    /// `b(c) = max(c, 0)`.
    Linear,
    /// `b ≡ 0`: collisions switched off.
    Zero,
}

impl AngularFactor {
    pub fn eval(self, c: f64) -> f64 {
        match self {
            AngularFactor::Linear => c.max(0.0),
            AngularFactor::Zero => 0.0,
        }
    }
}

/// A node of the angular rule in the frame attached to `û`: `ω = c û + s e(φ)`.
#[derive(Clone, Copy, Debug)]
struct AngularNode {
    c: f64,
    s: f64,
    cos_phi: f64,
    sin_phi: f64,
    /// Quadrature weight already multiplied by `b(c)`.
    wb: f64,
}

#[derive(Clone, Debug)]
pub struct CollisionKernel {
    dim: usize,
    gamma: f64,
    eta: f64,
    b: AngularFactor,
    nodes: Vec<AngularNode>,
    b_integral: f64,
}

impl CollisionKernel {
    /// Kernel in dimension `dim` with `n_polar × n_azimuth` angular nodes on
    /// the hemisphere `ω·û ≥ 0` (`n_azimuth` is ignored for `dim < 3`).
    pub fn new(dim: usize, gamma: f64, eta: f64, b: AngularFactor, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if !(1..=MAX_VDIM).contains(&dim) {
            return Err(LabError::Params(format!("collision dimension {dim} unsupported")));
        }
        if !(gamma <= 0.0 && gamma > -(dim as f64)) {
            return Err(LabError::Params(format!("gamma {gamma} outside (-{dim}, 0]")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(LabError::Params(format!("regularization {eta} must be >= 0")));
        }
        let mut nodes = Vec::new();
        match dim {
            1 => nodes.push(AngularNode { c: 1.0, s: 0.0, cos_phi: 1.0, sin_phi: 0.0, wb: b.eval(1.0) }),
            2 => {
                let rule = Rule1d::gauss(n_polar.max(1), -PI / 2.0, PI / 2.0);
                for (&th, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let c = th.cos();
                    nodes.push(AngularNode { c, s: th.sin(), cos_phi: 1.0, sin_phi: 0.0, wb: w * b.eval(c) });
                }
            }
            _ => {
                let rule = Rule1d::gauss(n_polar.max(1), 0.0, 1.0);
                let na = n_azimuth.max(1);
                let dphi = 2.0 * PI / na as f64;
                for (&c, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for j in 0..na {
                        let phi = (j as f64 + 0.5) * dphi;
                        nodes.push(AngularNode { c, s, cos_phi: phi.cos(), sin_phi: phi.sin(), wb: w * dphi * b.eval(c) });
                    }
                }
            }
        }
        let b_integral = nodes.iter().map(|n| n.wb).sum();
        Ok(Self { dim, gamma, eta, b, nodes, b_integral })
    }

    /// The default model: `b(c) = max(c, 0)` with an 8 × 16 angular rule.
    pub fn hard_cutoff(dim: usize, gamma: f64, eta: f64) -> Result<Self> {
        Self::new(dim, gamma, eta, AngularFactor::Linear, 8, 16)
    }

    /// Same kernel with collisions switched off.
    pub fn without_collisions(&self) -> Self {
        let mut k = self.clone();
        k.b = AngularFactor::Zero;
        for n in &mut k.nodes {
            n.wb = 0.0;
        }
        k.b_integral = 0.0;
        k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn angular(&self) -> AngularFactor {
        self.b
    }

    pub fn angular_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `∫ b dω` as integrated by the angular rule.
    pub fn b_integral(&self) -> f64 {
        self.b_integral
    }

    pub fn is_trivial(&self) -> bool {
        self.b_integral == 0.0
    }

    /// Relative-speed factor `(|u|² + η²)^{γ/2}`.
    #[inline]
    pub fn speed_factor(&self, u2: f64) -> f64 {
        let r2 = u2 + self.eta * self.eta;
        if self.gamma == 0.0 {
            1.0
        } else if self.gamma == -1.0 {
            1.0 / r2.sqrt()
        } else {
            r2.powf(0.5 * self.gamma)
        }
    }

    /// Calls `f(ω, weight·b)` for every angular node, in the frame of `u`.
    fn for_each_omega(&self, u: &V, mut f: impl FnMut(&V, f64)) {
        let un = dot(u, u).sqrt();
        let uhat = if un > 0.0 { [u[0] / un, u[1] / un, u[2] / un] } else { [1.0, 0.0, 0.0] };
        match self.dim {
            1 => {
                let n = &self.nodes[0];
                f(&[uhat[0].signum().max(-1.0), 0.0, 0.0], n.wb);
            }
            2 => {
                let perp = [-uhat[1], uhat[0], 0.0];
                for n in &self.nodes {
                    let w = [n.c * uhat[0] + n.s * perp[0], n.c * uhat[1] + n.s * perp[1], 0.0];
                    f(&w, n.wb);
                }
            }
            _ => {
                let (e1, e2) = orthonormal_frame(&uhat);
                for n in &self.nodes {
                    let mut w = [0.0; 3];
                    for k in 0..3 {
                        w[k] = n.c * uhat[k] + n.s * (n.cos_phi * e1[k] + n.sin_phi * e2[k]);
                    }
                    f(&w, n.wb);
                }
            }
        }
    }
}

fn orthonormal_frame(u: &V) -> (V, V) {
    let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot(&a, u);
    let mut e1 = [a[0] - p * u[0], a[1] - p * u[1], a[2] - p * u[2]];
    let n = dot(&e1, &e1).sqrt();
    for c in &mut e1 {
        *c /= n;
    }
    let e2 = [u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]];
    (e1, e2)
}

/// A velocity density at fixed `(t, x)`.
pub trait VelocityDensity {
    fn density(&self, v: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> VelocityDensity for F {
    fn density(&self, v: &[f64]) -> f64 {
        self(v)
    }
}

/// Uniform cell-centred velocity grid on `[lo, hi]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    pub dim: usize,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 || dim == 0 || dim > MAX_VDIM {
            return Err(LabError::EmptyGrid);
        }
        if !(hi > lo) {
            return Err(LabError::Params(format!("velocity grid [{lo}, {hi}] is empty")));
        }
        Ok(Self { dim, n, lo, hi })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node(&self, mut idx: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut v = vec![0.0; self.dim];
        for k in (0..self.dim).rev() {
            v[k] = self.lo + (idx % self.n) as f64 * h + 0.5 * h;
            idx /= self.n;
        }
        v
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

/// Grid samples with multilinear interpolation between cell centres; zero
/// outside the hull of the nodes.
#[derive(Clone, Debug)]
pub struct VelocitySlice {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl VelocitySlice {
    pub fn sample(grid: VelocityGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self { grid, values }
    }
}

impl VelocityDensity for VelocitySlice {
    fn density(&self, v: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let mut base = [0usize; MAX_VDIM];
        let mut frac = [0.0; MAX_VDIM];
        for k in 0..g.dim {
            let s = (v[k] - g.lo) / h - 0.5;
            if !(s >= 0.0 && s <= (g.n - 1) as f64) {
                return 0.0;
            }
            let i = (s.floor() as usize).min(g.n.saturating_sub(2));
            base[k] = i;
            frac[k] = s - i as f64;
        }
        if g.n == 1 {
            return self.values[0];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..g.dim {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * g.n + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// How the `ζ*` integral is discretized.
#[derive(Clone, Debug)]
pub enum ZetaQuadrature {
    /// Cell-centred grid sum.
    Grid(VelocityGrid),
    /// Spherical coordinates around `ξ`: `ζ* = ξ + ρ n`, `ρ ≤ rho_max`, with
    /// geometrically graded radial panels.
    /// The `ρ^{d−1}` Jacobian absorbs the relative-speed singularity.
    /// With `focus = Some((c, spread))` the polar axis points from `ξ` towards
    /// `c` and the polar angle is split at the cone `spread / |ξ − c|`,
    /// which resolves densities concentrated around `c`.
    Polar { order: usize, panels: usize, rho_max: f64, n_polar: usize, n_azimuth: usize, focus: Option<(Vec<f64>, f64)> },
    /// Gauss–Legendre tensor rule on a fixed box.
    Box { lo: Vec<f64>, hi: Vec<f64>, order: usize, panels: usize },
}

impl ZetaQuadrature {
    /// Calls `f(ζ*, weight)` for every node; `xi` anchors the polar variant.
    pub fn for_each(&self, xi: &[f64], mut f: impl FnMut(&[f64], f64)) {
        let d = xi.len();
        match self {
            ZetaQuadrature::Grid(g) => {
                let w = g.cell_volume();
                for i in 0..g.len() {
                    f(&g.node(i), w);
                }
            }
            ZetaQuadrature::Box { lo, hi, order, panels } => {
                TensorRule::boxed(*order, *panels, lo, hi).for_each(|p, w| f(p, w));
            }
            ZetaQuadrature::Polar { order, panels, rho_max, n_polar, n_azimuth, focus } => {
                let radial = graded_rule(*order, *panels, *rho_max);
                let dirs = match focus {
                    Some((c, spread)) if d == 3 => focused_sphere_rule(xi, c, *spread, *n_polar, *n_azimuth),
                    _ => sphere_rule(d, *n_polar, *n_azimuth),
                };
                let mut p = vec![0.0; d];
                for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                    let jac = wr * r.powi(d as i32 - 1);
                    for (n, wn) in &dirs {
                        for k in 0..d {
                            p[k] = xi[k] + r * n[k];
                        }
                        f(&p, jac * wn);
                    }
                }
            }
        }
    }
}

/// Gauss–Legendre panels on `[0, rho_max]` whose widths double outwards, so
/// the near-singular factor at `ρ ≈ 0` sits in a short panel.
fn graded_rule(order: usize, panels: usize, rho_max: f64) -> Rule1d {
    let panels = panels.max(1);
    let scale = rho_max / ((1u64 << panels) - 1) as f64;
    let mut rule = Rule1d { nodes: Vec::new(), weights: Vec::new() };
    for k in 0..panels {
        let lo = scale * ((1u64 << k) - 1) as f64;
        let hi = scale * ((1u64 << (k + 1)) - 1) as f64;
        let piece = Rule1d::gauss(order, lo, hi);
        rule.nodes.extend(piece.nodes);
        rule.weights.extend(piece.weights);
    }
    rule
}

/// Directions and weights covering the full sphere `S^{d−1}`.
fn sphere_rule(d: usize, n_polar: usize, n_azimuth: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = n_azimuth.max(1);
            let dphi = 2.0 * PI / n as f64;
            (0..n)
                .map(|j| {
                    let phi = (j as f64 + 0.5) * dphi;
                    (vec![phi.cos(), phi.sin()], dphi)
                })
                .collect()
        }
        _ => {
            let rule = Rule1d::gauss(n_polar.max(1), -1.0, 1.0);
            let na = n_azimuth.max(1);
            let dphi = 2.0 * PI / na as f64;
            let mut out = Vec::with_capacity(rule.len() * na);
            for (&c, &w) in rule.nodes.iter().zip(&rule.weights) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..na {
                    let phi = (j as f64 + 0.5) * dphi;
                    out.push((vec![s * phi.cos(), s * phi.sin(), c], w * dphi));
                }
            }
            out
        }
    }
}

/// Sphere rule with the pole towards `c` and the polar angle split at the
/// cone half-angle `spread / |ξ − c|` (each piece gets `n_polar` nodes).
fn focused_sphere_rule(xi: &[f64], c: &[f64], spread: f64, n_polar: usize, n_azimuth: usize) -> Vec<(Vec<f64>, f64)> {
    let axis = [c[0] - xi[0], c[1] - xi[1], c[2] - xi[2]];
    let dist = dot(&axis, &axis).sqrt();
    if dist < 1e-12 {
        return sphere_rule(3, n_polar, n_azimuth);
    }
    let pole = [axis[0] / dist, axis[1] / dist, axis[2] / dist];
    let (e1, e2) = orthonormal_frame(&pole);
    let cone = (spread / dist).min(PI / 2.0);
    let na = n_azimuth.max(1);
    let dphi = 2.0 * PI / na as f64;
    let mut out = Vec::new();
    for (lo, hi) in [(0.0, cone), (cone, PI)] {
        let rule = Rule1d::gauss(n_polar.max(1), lo, hi);
        for (&th, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (s, c) = th.sin_cos();
            for j in 0..na {
                let (sp, cp) = ((j as f64 + 0.5) * dphi).sin_cos();
                let n = (0..3).map(|k| c * pole[k] + s * (cp * e1[k] + sp * e2[k])).collect();
                out.push((n, w * s * dphi));
            }
        }
    }
    out
}

fn check(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(LabError::NonFinite(what.into()))
    }
}

/// `Q⁺(f, g)(ξ) = ∫∫ f(ζ′) g(ζ′*) B(ξ − ζ*, ω) dω dζ*`.
pub fn gain_term(
    f: &dyn VelocityDensity,
    g: &dyn VelocityDensity,
    xi: &[f64],
    kernel: &CollisionKernel,
    zq: &ZetaQuadrature,
) -> Result<f64> {
    if kernel.is_trivial() {
        return Ok(0.0);
    }
    let d = kernel.dim;
    let x = load(xi);
    let mut acc = 0.0;
    let mut post = [0.0; MAX_VDIM];
    let mut post_s = [0.0; MAX_VDIM];
    zq.for_each(xi, |zs, wz| {
        let z = load(zs);
        let u = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
        let speed = kernel.speed_factor(dot(&u, &u)) * wz;
        let mut inner = 0.0;
        kernel.for_each_omega(&u, |w, wb| {
            if wb == 0.0 {
                return;
            }
            let proj = dot(w, &u);
            for k in 0..d {
                post[k] = x[k] - proj * w[k];
                post_s[k] = z[k] + proj * w[k];
            }
            let a = f.density(&post[..d]);
            if a != 0.0 {
                inner += wb * a * g.density(&post_s[..d]);
            }
        });
        acc += speed * inner;
    });
    check(acc, "gain term")
}

/// `L(g)(ξ) = ∫ g(ζ*) (|ξ−ζ*|² + η²)^{γ/2} (∫ b dω) dζ*`.
pub fn loss_functional(g: &dyn VelocityDensity, xi: &[f64], kernel: &CollisionKernel, zq: &ZetaQuadrature) -> Result<f64> {
    if kernel.is_trivial() {
        return Ok(0.0);
    }
    let x = load(xi);
    let mut acc = 0.0;
    zq.for_each(xi, |zs, wz| {
        let gv = g.density(zs);
        if gv != 0.0 {
            let z = load(zs);
            let u = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
            acc += wz * gv * kernel.speed_factor(dot(&u, &u));
        }
    });
    check(acc * kernel.b_integral, "loss functional")
}

/// `Q⁻(f, g)(ξ) = f(ξ) L(g)(ξ)`.
pub fn loss_term(
    f: &dyn VelocityDensity,
    g: &dyn VelocityDensity,
    xi: &[f64],
    kernel: &CollisionKernel,
    zq: &ZetaQuadrature,
) -> Result<f64> {
    let fv = f.density(xi);
    if fv == 0.0 {
        return Ok(0.0);
    }
    Ok(fv * loss_functional(g, xi, kernel, zq)?)
}

/// Moments `∫ Q(f,f) ψ dξ` for `ψ ∈ {1, ξ_1..ξ_d, |ξ|²}` summed over `grid`.
pub fn collision_moments(
    f: &dyn VelocityDensity,
    grid: &VelocityGrid,
    kernel: &CollisionKernel,
    zq: &ZetaQuadrature,
) -> Result<Vec<f64>> {
    let w = grid.cell_volume();
    moments_over(f, (0..grid.len()).map(|i| (grid.node(i), w)), grid.dim, kernel, zq)
}

fn moments_over(
    f: &dyn VelocityDensity,
    points: impl Iterator<Item = (Vec<f64>, f64)>,
    d: usize,
    kernel: &CollisionKernel,
    zq: &ZetaQuadrature,
) -> Result<Vec<f64>> {
    let mut moments = vec![0.0; d + 2];
    for (xi, w) in points {
        let q = gain_term(f, f, &xi, kernel, zq)? - loss_term(f, f, &xi, kernel, zq)?;
        moments[0] += w * q;
        for k in 0..d {
            moments[1 + k] += w * q * xi[k];
        }
        moments[d + 1] += w * q * xi.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn head_on_exchange_and_orthogonal_directions() {
        let (a, b) = collide_velocities(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a, vec![-1.0, 0.0, 0.0]);
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
        let (a, b) = collide_velocities(&[1.0, 2.0, 0.0], &[-1.0, 2.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a, vec![1.0, 2.0, 0.0]);
        assert_eq!(b, vec![-1.0, 2.0, 0.0]);
        assert!(matches!(collide_velocities(&[1.0], &[0.0], &[0.5]), Err(LabError::NonUnit(_))));
    }

    #[test]
    fn angular_integral_matches_closed_forms() {
        assert_relative_eq!(CollisionKernel::hard_cutoff(3, -1.0, 0.0).unwrap().b_integral(), PI, epsilon = 1e-13);
        assert_relative_eq!(CollisionKernel::hard_cutoff(2, -1.0, 0.0).unwrap().b_integral(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(CollisionKernel::hard_cutoff(1, -0.5, 0.0).unwrap().b_integral(), 1.0);
        assert!(CollisionKernel::hard_cutoff(3, -3.0, 0.0).is_err());
        assert!(CollisionKernel::hard_cutoff(3, 0.5, 0.0).is_err());
    }

    #[test]
    fn loss_of_unit_ball_indicator() {
        let k = CollisionKernel::hard_cutoff(3, -1.0, 0.0).unwrap();
        let zq = ZetaQuadrature::Polar { order: 8, panels: 1, rho_max: 1.0, n_polar: 4, n_azimuth: 4, focus: None };
        let ball = |v: &[f64]| if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 { 1.0 } else { 0.0 };
        let l = loss_functional(&ball, &[0.0; 3], &k, &zq).unwrap();
        assert_relative_eq!(l, k.b_integral() * 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn maxwellian_balance() {
        let k = CollisionKernel::hard_cutoff(3, -1.0, 0.25).unwrap();
        let zq = ZetaQuadrature::Polar { order: 16, panels: 2, rho_max: 7.0, n_polar: 8, n_azimuth: 16, focus: None };
        let m = |v: &[f64]| (-v.iter().map(|x| x * x).sum::<f64>()).exp();
        for xi in [[0.0, 0.0, 0.0], [0.7, -0.3, 1.1], [2.0, 0.5, 0.0]] {
            let gain = gain_term(&m, &m, &xi, &k, &zq).unwrap();
            let loss = loss_term(&m, &m, &xi, &k, &zq).unwrap();
            assert!(((gain - loss) / loss).abs() < 1e-3, "{gain} vs {loss}");
        }
    }

    #[test]
    fn trivial_kernel_and_zero_density() {
        let k = CollisionKernel::hard_cutoff(2, -1.0, 0.1).unwrap();
        let zq = ZetaQuadrature::Box { lo: vec![-2.0; 2], hi: vec![2.0; 2], order: 4, panels: 2 };
        let m = |v: &[f64]| (-v.iter().map(|x| x * x).sum::<f64>()).exp();
        let zero = |_: &[f64]| 0.0;
        assert_eq!(gain_term(&zero, &zero, &[0.3, 0.1], &k, &zq).unwrap(), 0.0);
        assert_eq!(gain_term(&m, &m, &[0.3, 0.1], &k.without_collisions(), &zq).unwrap(), 0.0);
        assert_eq!(loss_functional(&zero, &[0.3, 0.1], &k, &zq).unwrap(), 0.0);
    }

    #[test]
    fn slice_interpolation_reproduces_linear_functions() {
        let g = VelocityGrid::new(3, 6, -1.0, 1.0).unwrap();
        let s = VelocitySlice::sample(g, |v| 1.0 + v[0] - 2.0 * v[1] + 0.5 * v[2]);
        let v = [0.11, -0.37, 0.52];
        assert_relative_eq!(s.density(&v), 1.0 + 0.11 + 0.74 + 0.26, epsilon = 1e-13);
        assert_eq!(s.density(&[0.95, 0.0, 0.0]), 0.0);
    }
}
