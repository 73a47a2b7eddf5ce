//! One-dimensional semiclassical oracles: Weyl quantization on a grid,
//! operator densities, Heisenberg evolution by eigendecomposition, the
//! transport parametrix and the oscillatory Fourier bound.
//!
//! Operators are `n × n` matrices acting on grid samples, so an entry is the
//! Schwartz kernel times `Δx` and the trace is the plain diagonal sum. The
//! density is `ρ(x_j) = M_jj / Δx`.
//!
//! Symbols are sampled on the doubled lattice: midpoints `(x_j + x_k)/2`
//! (spacing `Δx/2`) times `2n` momenta `ζ_m = m ζ_N / n`, `m = −n..n−1`,
//! with `ζ_N = π h / Δx`. Then `M_jk = (2n)^{−1} Σ_m e^{iπ(j−k)m/n} a(mid, ζ_m)`,
//! which reproduces the identity exactly for `a ≡ 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{LabError, Result};
use crate::field::PhaseField;
use crate::flow::FlowMap;
use crate::quad::{adaptive_gk, Rule1d};
use crate::transport::{loglog_slope, propagate_field, velocity_average, VelocityQuadrature};

/// Symbols larger than this (relative to their maximum) on the lattice edge
/// are rejected as aliasing risks.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Beyond this point the oscillatory tail uses its asymptotic expansion.
const ASYMPTOTIC_START: f64 = 400.0;
const ASYMPTOTIC_TERMS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct GridQuantization {
    pub n: usize,
    pub x_half: f64,
    pub h: f64,
}

impl GridQuantization {
    pub fn new(n: usize, x_half: f64, h: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(LabError::Params(format!("grid size {n} must be even and at least 2")));
        }
        if !(x_half > 0.0 && h > 0.0) {
            return Err(LabError::Params("grid half-width and h must be positive".into()));
        }
        Ok(Self { n, x_half, h })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.x_half + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Largest momentum on the lattice.
    pub fn zeta_nyquist(&self) -> f64 {
        PI * self.h / self.dx()
    }

    pub fn dzeta(&self) -> f64 {
        self.zeta_nyquist() / self.n as f64
    }

    /// Midpoint `s = j + k`, `s = 0..2n−2`.
    pub fn midpoint(&self, s: usize) -> f64 {
        -self.x_half + 0.5 * s as f64 * self.dx()
    }

    /// Momentum of lattice column `c = m + n`, `c = 0..2n−1`.
    pub fn zeta(&self, c: usize) -> f64 {
        (c as f64 - self.n as f64) * self.dzeta()
    }
}

/// Symbol samples on the doubled lattice, `values[s][c]`.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub values: Vec<Vec<f64>>,
}

impl SymbolTable {
    pub fn sample(gq: &GridQuantization, a: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..2 * gq.n - 1)
            .map(|s| {
                let x = gq.midpoint(s);
                (0..2 * gq.n).map(|c| a(x, gq.zeta(c))).collect()
            })
            .collect();
        Self { values }
    }

    fn boundary_mass(&self) -> (f64, f64) {
        let scale = self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let last_row = self.values.len() - 1;
        let mut edge: f64 = 0.0;
        for (s, row) in self.values.iter().enumerate() {
            edge = edge.max(row[0].abs()).max(row[row.len() - 1].abs());
            if s == 0 || s == last_row {
                edge = edge.max(row.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
        (edge, scale)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|r| r.iter().map(|v| c * v).collect()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        Self { values }
    }
}

/// Grid operator split into real and imaginary parts.
#[derive(Clone, Debug)]
pub struct OperatorKernel {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
    pub dx: f64,
}

impl OperatorKernel {
    pub fn real(re: DMatrix<f64>, dx: f64) -> Self {
        let n = re.nrows();
        Self { re, im: DMatrix::zeros(n, n), dx }
    }

    /// Rank-one `|u⟩⟨u|`.
    pub fn rank_one(u: &[Complex64], dx: f64) -> Self {
        let n = u.len();
        let re = DMatrix::from_fn(n, n, |j, k| (u[j] * u[k].conj()).re);
        let im = DMatrix::from_fn(n, n, |j, k| (u[j] * u[k].conj()).im);
        Self { re, im, dx }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        Complex64::new(self.re.trace(), self.im.trace())
    }

    /// Largest entry of `M − M*`.
    pub fn hermitian_defect(&self) -> f64 {
        let a = (&self.re - self.re.transpose()).amax();
        let b = (&self.im + self.im.transpose()).amax();
        a.max(b)
    }

    pub fn scale(&self) -> f64 {
        self.re.amax().max(self.im.amax())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { re: &self.re - &o.re, im: &self.im - &o.im, dx: self.dx }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { re: &self.re + &o.re, im: &self.im + &o.im, dx: self.dx }
    }

    /// `(i/h)[P, A]` for a real symmetric `P`.
    pub fn commutator_term(p: &DMatrix<f64>, a: &Self, h: f64) -> Self {
        let cr = p * &a.re - &a.re * p;
        let ci = p * &a.im - &a.im * p;
        Self { re: -ci / h, im: cr / h, dx: a.dx }
    }

    /// Trace norm `Σ |λ|` of a Hermitian operator, via its real embedding.
    pub fn trace_norm(&self) -> f64 {
        let n = self.dim();
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.re);
        big.view_mut((n, n), (n, n)).copy_from(&self.re);
        big.view_mut((0, n), (n, n)).copy_from(&(-&self.im));
        big.view_mut((n, 0), (n, n)).copy_from(&self.im);
        let big = 0.5 * (&big + big.transpose());
        0.5 * big.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Weyl quantization of tabulated symbol values.
pub fn quantize_table(table: &SymbolTable, gq: &GridQuantization) -> OperatorKernel {
    let n = gq.n;
    let len = 2 * n;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(len);
    let mut re = DMatrix::zeros(n, n);
    let mut im = DMatrix::zeros(n, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (s, row) in table.values.iter().enumerate() {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        // j + k = s, j − k = r with j, k in 0..n
        let j_lo = s.saturating_sub(n - 1);
        let j_hi = s.min(n - 1);
        for j in j_lo..=j_hi {
            let k = s - j;
            let r = j as i64 - k as i64;
            let sign = if r.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let v = buf[r.rem_euclid(len as i64) as usize] * (sign / len as f64);
            re[(j, k)] = v.re;
            im[(j, k)] = v.im;
        }
    }
    OperatorKernel { re, im, dx: gq.dx() }
}

/// Weyl quantization of a compactly supported symbol; rejects symbols that
/// do not vanish on the lattice edge.
pub fn weyl_quantize(a: impl Fn(f64, f64) -> f64, gq: &GridQuantization) -> Result<OperatorKernel> {
    let table = SymbolTable::sample(gq, a);
    let (edge, scale) = table.boundary_mass();
    if edge > BOUNDARY_TOL * scale.max(1.0) {
        return Err(LabError::BoundaryMass(edge));
    }
    Ok(quantize_table(&table, gq))
}

/// Weyl quantization of an observable (`1`, `x`, `p`) that need not vanish
/// at the lattice edge.
pub fn weyl_quantize_observable(a: impl Fn(f64, f64) -> f64, gq: &GridQuantization) -> OperatorKernel {
    quantize_table(&SymbolTable::sample(gq, a), gq)
}

/// Diagonal density `ρ(x_j) = M_jj / Δx`.
pub fn density_of(k: &OperatorKernel) -> Vec<f64> {
    (0..k.dim()).map(|j| k.re[(j, j)] / k.dx).collect()
}

/// `e^{−itP/h}` through the eigendecomposition of a real symmetric `P`.
#[derive(Clone, Debug)]
pub struct Propagator {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    h: f64,
}

impl Propagator {
    pub fn new(p: &OperatorKernel, h: f64) -> Result<Self> {
        let scale = p.scale().max(f64::MIN_POSITIVE);
        let defect = p.hermitian_defect();
        if defect > 1e-10 * scale {
            return Err(LabError::NonHermitian(defect));
        }
        if p.im.amax() > 1e-12 * scale {
            return Err(LabError::Params("propagator requires a real symmetric generator (even symbol)".into()));
        }
        let sym = 0.5 * (&p.re + p.re.transpose());
        let eig = SymmetricEigen::new(sym);
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues, h })
    }

    /// Largest entry of `VᵀV − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.vectors.ncols();
        (self.vectors.transpose() * &self.vectors - DMatrix::identity(n, n)).amax()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `e^{−itP/h} K e^{itP/h}`.
    pub fn evolve(&self, k: &OperatorKernel, t: f64) -> OperatorKernel {
        if t == 0.0 {
            return k.clone();
        }
        let v = &self.vectors;
        let vt = v.transpose();
        let ar = &vt * &k.re * v;
        let ai = &vt * &k.im * v;
        let n = k.dim();
        let mut br = DMatrix::zeros(n, n);
        let mut bi = DMatrix::zeros(n, n);
        for b in 0..n {
            for a in 0..n {
                let phase = Complex64::from_polar(1.0, -t * (self.values[a] - self.values[b]) / self.h);
                let z = Complex64::new(ar[(a, b)], ai[(a, b)]) * phase;
                br[(a, b)] = z.re;
                bi[(a, b)] = z.im;
            }
        }
        OperatorKernel { re: v * br * &vt, im: v * bi * &vt, dx: k.dx }
    }
}

pub fn heisenberg_evolve(k: &OperatorKernel, p: &OperatorKernel, t: f64, h: f64) -> Result<OperatorKernel> {
    Ok(Propagator::new(p, h)?.evolve(k, t))
}

/// Weyl quantization of the kinetic symbol of `fm` (one dimension).
pub fn hamiltonian_operator(fm: &FlowMap, gq: &GridQuantization) -> Result<OperatorKernel> {
    if fm.dim() != 1 {
        return Err(LabError::Params("the quantum side is one-dimensional".into()));
    }
    let ham = fm.hamiltonian();
    Ok(weyl_quantize_observable(|x, z| ham.symbol(&[x], &[z]), gq))
}

fn phase_symbol(f: &PhaseField) -> Result<impl Fn(f64, f64) -> f64 + '_> {
    if f.dim() != 1 {
        return Err(LabError::Params("the quantum side is one-dimensional".into()));
    }
    Ok(move |x: f64, z: f64| f.eval(&[x], &[z]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapPoint {
    pub h: f64,
    pub sup_gap: f64,
    pub l1_gap: f64,
}

#[derive(Clone, Debug)]
pub struct GapLadder {
    pub points: Vec<GapPoint>,
    /// Slope of `log sup_gap` against `log h`.
    pub fitted_order: f64,
}

/// Classical density `∫ f∘e^{−tH_p}(x_j, ζ) dζ` on the grid nodes.
pub fn classical_density(f: &PhaseField, fm: &FlowMap, t: f64, nodes: &[f64], quad: &VelocityQuadrature) -> Result<Vec<f64>> {
    nodes.iter().map(|&x| velocity_average(f, fm, t, &[x], quad)).collect()
}

/// Gap between `2πh ρ` of the evolved quantization and a given classical
/// density on the same nodes.
pub fn density_gap_against(f: &PhaseField, fm: &FlowMap, t: f64, gq: &GridQuantization, classical: &[f64]) -> Result<GapPoint> {
    let k = weyl_quantize(phase_symbol(f)?, gq)?;
    let p = hamiltonian_operator(fm, gq)?;
    let evolved = heisenberg_evolve(&k, &p, t, gq.h)?;
    let rho = density_of(&evolved);
    let c = 2.0 * PI * gq.h;
    let (mut sup, mut l1) = (0.0f64, 0.0);
    for (r, cl) in rho.iter().zip(classical) {
        let g = (c * r - cl).abs();
        sup = sup.max(g);
        l1 += g * gq.dx();
    }
    Ok(GapPoint { h: gq.h, sup_gap: sup, l1_gap: l1 })
}

pub fn density_gap(f: &PhaseField, fm: &FlowMap, t: f64, gq: &GridQuantization, quad: &VelocityQuadrature) -> Result<GapPoint> {
    let classical = classical_density(f, fm, t, &gq.nodes(), quad)?;
    density_gap_against(f, fm, t, gq, &classical)
}

/// Gaps over an `h` ladder at fixed `n` and `X`, with the fitted order.
pub fn density_gap_ladder(
    f: &PhaseField,
    fm: &FlowMap,
    t: f64,
    n: usize,
    x_half: f64,
    hs: &[f64],
    quad: &VelocityQuadrature,
) -> Result<GapLadder> {
    let nodes = GridQuantization::new(n, x_half, 1.0)?.nodes();
    let classical = classical_density(f, fm, t, &nodes, quad)?;
    let points = hs
        .iter()
        .map(|&h| density_gap_against(f, fm, t, &GridQuantization::new(n, x_half, h)?, &classical))
        .collect::<Result<Vec<_>>>()?;
    let fitted_order = fitted_order(&points);
    Ok(GapLadder { points, fitted_order })
}

fn fitted_order(points: &[GapPoint]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let hs: Vec<f64> = points.iter().map(|p| p.h).collect();
    let gs: Vec<f64> = points.iter().map(|p| p.sup_gap.max(f64::MIN_POSITIVE)).collect();
    loglog_slope(&hs, &gs)
}

/// Lattice points that can reach the support of `f` within time `|t|`.
struct Reach {
    x_lo: f64,
    x_hi: f64,
    zeta_max: f64,
}

impl Reach {
    fn new(f: &PhaseField, fm: &FlowMap, t: f64) -> Self {
        let sup = f.support();
        let (lmin, lmax) = fm.inverse_bounds();
        let xi_max = sup.xi_lo[0].abs().max(sup.xi_hi[0].abs());
        let p_max = lmax * xi_max * xi_max;
        let speed = 2.0 * (lmax * p_max).sqrt();
        Self { x_lo: sup.x_lo[0] - speed * t.abs(), x_hi: sup.x_hi[0] + speed * t.abs(), zeta_max: (p_max / lmin).sqrt() }
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && z.abs() <= self.zeta_max
    }
}

fn gradient_1d(f: &PhaseField, x: f64, z: f64) -> (f64, f64) {
    let e = 1e-5;
    let d = |dx: f64, dz: f64| f.eval(&[x + dx], &[z + dz]);
    let gx = (8.0 * (d(e, 0.0) - d(-e, 0.0)) - (d(2.0 * e, 0.0) - d(-2.0 * e, 0.0))) / (12.0 * e);
    let gz = (8.0 * (d(0.0, e) - d(0.0, -e)) - (d(0.0, 2.0 * e) - d(0.0, -2.0 * e))) / (12.0 * e);
    (gx, gz)
}

/// Tables of `ψ₀(t) = f∘e^{−tH_p}` and `∂ₜψ₀ = −(∇f · X_H)∘e^{−tH_p}`.
fn leading_symbol(f: &PhaseField, fm: &FlowMap, gq: &GridQuantization, t: f64) -> Result<(SymbolTable, SymbolTable)> {
    let reach = Reach::new(f, fm, t);
    let ham = fm.hamiltonian();
    let rows = 2 * gq.n - 1;
    let mut psi = vec![vec![0.0; 2 * gq.n]; rows];
    let mut dpsi = vec![vec![0.0; 2 * gq.n]; rows];
    for s in 0..rows {
        let x = gq.midpoint(s);
        for c in 0..2 * gq.n {
            let z = gq.zeta(c);
            if !reach.contains(x, z) {
                continue;
            }
            let w = fm.evaluate(-t, &[x, z])?;
            let val = f.eval(&w[..1], &w[1..]);
            if val == 0.0 && !f.support().contains(&w[..1], &w[1..]) {
                continue;
            }
            let (gx, gz) = gradient_1d(f, w[0], w[1]);
            let (xd, zd) = ham.field(&w[..1], &w[1..]);
            psi[s][c] = val;
            dpsi[s][c] = -(gx * xd[0] + gz * zd[0]);
        }
    }
    Ok((SymbolTable { values: psi }, SymbolTable { values: dpsi }))
}

/// Grid Wigner transform: symbol values `a(x_j, ζ_c)` on the nodes.
fn wigner(k: &OperatorKernel, gq: &GridQuantization) -> Vec<Vec<f64>> {
    let n = gq.n;
    let mut out = vec![vec![0.0; 2 * n]; n];
    for (j, row) in out.iter_mut().enumerate() {
        let q_max = j.min(n - 1 - j) as i64;
        for (c, cell) in row.iter_mut().enumerate() {
            let m = c as f64 - n as f64;
            let mut acc = 0.0;
            for q in -q_max..=q_max {
                let (a, b) = ((j as i64 + q) as usize, (j as i64 - q) as usize);
                let phase = -2.0 * PI * q as f64 * m / n as f64;
                acc += k.re[(a, b)] * phase.cos() - k.im[(a, b)] * phase.sin();
            }
            *cell = 2.0 * acc;
        }
    }
    out
}

fn bilinear(table: &[Vec<f64>], gq: &GridQuantization, x: f64, z: f64) -> f64 {
    let sx = (x + gq.x_half) / gq.dx();
    let sz = z / gq.dzeta() + gq.n as f64;
    if !(sx >= 0.0 && sx <= (gq.n - 1) as f64 && sz >= 0.0 && sz <= (2 * gq.n - 1) as f64) {
        return 0.0;
    }
    let i = (sx.floor() as usize).min(gq.n - 2);
    let c = (sz.floor() as usize).min(2 * gq.n - 2);
    let (fx, fz) = (sx - i as f64, sz - c as f64);
    (1.0 - fx) * ((1.0 - fz) * table[i][c] + fz * table[i][c + 1]) + fx * ((1.0 - fz) * table[i + 1][c] + fz * table[i + 1][c + 1])
}

/// Symbol grids `ψ_j(t)` of the transport parametrix, `j = 0..=order`.
#[derive(Clone, Debug)]
pub struct ParametrixStack {
    pub t: f64,
    pub psi: Vec<SymbolTable>,
}

/// Trace norm of `R_N(t) = ∂ₜF_N^w + (i/h)[P, F_N^w]` for `N ∈ {0, 1}`,
/// together with the parametrix used. `s_nodes` Gauss points resolve the
/// time integral defining `ψ₁`.
pub fn parametrix_remainder(
    f: &PhaseField,
    fm: &FlowMap,
    gq: &GridQuantization,
    t: f64,
    order: usize,
    s_nodes: usize,
) -> Result<(f64, ParametrixStack)> {
    if order > 1 {
        return Err(LabError::Params("parametrix order must be 0 or 1".into()));
    }
    let _ = phase_symbol(f)?;
    let p = hamiltonian_operator(fm, gq)?;
    let remainder0 = |s: f64| -> Result<(OperatorKernel, SymbolTable)> {
        let (psi, dpsi) = leading_symbol(f, fm, gq, s)?;
        let a = quantize_table(&psi, gq);
        let r = quantize_table(&dpsi, gq).add(&OperatorKernel::commutator_term(&p.re, &a, gq.h));
        Ok((r, psi))
    };
    let (r0, psi0) = remainder0(t)?;
    if order == 0 {
        return Ok((r0.trace_norm(), ParametrixStack { t, psi: vec![psi0] }));
    }

    // ψ₁(t, z) = −∫₀ᵗ r₀(s, e^{−(t−s)H}z) ds with r₀(s) the Wigner symbol of R₀(s).
    let rule = Rule1d::gauss(s_nodes.max(1), 0.0, t);
    let mut tables = Vec::with_capacity(rule.len());
    for &s in &rule.nodes {
        tables.push(wigner(&remainder0(s)?.0, gq));
    }
    let reach = Reach::new(f, fm, t);
    let rows = 2 * gq.n - 1;
    let mut psi1 = vec![vec![0.0; 2 * gq.n]; rows];
    for (srow, row) in psi1.iter_mut().enumerate() {
        let x = gq.midpoint(srow);
        for (c, cell) in row.iter_mut().enumerate() {
            let z = gq.zeta(c);
            if !reach.contains(x, z) {
                continue;
            }
            let mut acc = 0.0;
            for ((&s, &w), table) in rule.nodes.iter().zip(&rule.weights).zip(&tables) {
                let y = fm.evaluate(-(t - s), &[x, z])?;
                acc += w * bilinear(table, gq, y[0], y[1]);
            }
            *cell = -acc;
        }
    }
    let psi1 = SymbolTable { values: psi1 };
    // ∂ₜψ₁ = −r₀(t) − H_p ψ₁, with H_p ψ₁ by central differences on the lattice.
    let r0_now = wigner(&r0, gq);
    let ham = fm.hamiltonian();
    let hx = 0.5 * gq.dx();
    let hz = gq.dzeta();
    let mut dpsi1 = vec![vec![0.0; 2 * gq.n]; rows];
    for s in 1..rows - 1 {
        let x = gq.midpoint(s);
        for c in 1..2 * gq.n - 1 {
            let z = gq.zeta(c);
            let v = &psi1.values;
            let dx_psi = (v[s + 1][c] - v[s - 1][c]) / (2.0 * hx);
            let dz_psi = (v[s][c + 1] - v[s][c - 1]) / (2.0 * hz);
            let (xd, zd) = ham.field(&[x], &[z]);
            dpsi1[s][c] = -bilinear(&r0_now, gq, x, z) - (xd[0] * dx_psi + zd[0] * dz_psi);
        }
    }
    let a1 = quantize_table(&psi1, gq);
    let r1 = r0
        .add(&quantize_table(&SymbolTable { values: dpsi1 }, gq))
        .add(&OperatorKernel::commutator_term(&p.re, &a1, gq.h));
    Ok((r1.trace_norm(), ParametrixStack { t, psi: vec![psi0, psi1] }))
}

/// `I(ξ) = ∫_{ε<|x|<1/ε} e^{ixξ} x^{−1+iγ} dx` with `x^{−1+iγ} = −e^{−πγ}|x|^{−1+iγ}`
/// for `x < 0`.
pub fn oscillatory_integral(gamma: f64, eps: f64, xi: f64) -> Result<Complex64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::Params(format!("cutoff {eps} outside (0, 1)")));
    }
    let minus = (-PI * gamma).exp();
    if xi == 0.0 {
        // ∫ y^{−1+iγ} dy over (ε, 1/ε), times (1 − e^{−πγ})
        let base = if gamma == 0.0 {
            Complex64::new(-2.0 * eps.ln(), 0.0)
        } else {
            let iy = Complex64::new(0.0, gamma);
            ((-eps.ln() * iy).exp() - (eps.ln() * iy).exp()) / iy
        };
        return Ok(base * (1.0 - minus));
    }
    // ξ < 0: I(ξ) = ∫ y^{−1+iγ} (e^{−iy|ξ|} − e^{−πγ} e^{iy|ξ|}) dy
    let (a, b) = (eps * xi.abs(), xi.abs() / eps);
    let scale = Complex64::new(0.0, -gamma * xi.abs().ln()).exp();
    let jp = oscillatory_piece(gamma, a, b, 1.0)?;
    let jm = oscillatory_piece(gamma, a, b, -1.0)?;
    Ok(if xi > 0.0 { scale * (jp - jm * minus) } else { scale * (jm - jp * minus) })
}

/// `J = ∫_a^b u^{−1+iγ} e^{iσu} du`: logarithmic variable up to `u = 1`,
/// direct panels up to the asymptotic start, an asymptotic antiderivative beyond.
fn oscillatory_piece(gamma: f64, a: f64, b: f64, sigma: f64) -> Result<Complex64> {
    let ig = Complex64::new(0.0, gamma);
    let split = b.min(1.0_f64.max(a));
    let mut total = Complex64::new(0.0, 0.0);
    if split > a {
        // u = e^s: integrand u^{iγ} e^{iσu}
        let (sa, sb) = (a.ln(), split.ln());
        let panels = ((sb - sa).ceil() as usize).max(1);
        let breaks: Vec<f64> = (0..=panels).map(|k| sa + (sb - sa) * k as f64 / panels as f64).collect();
        let r = adaptive_gk(|s| (ig * s).exp() * Complex64::new(0.0, sigma * s.exp()).exp(), &breaks, 1e-14, 1e-13, 200_000)?;
        total += r.value;
    }
    let lo = split.max(a);
    let alpha = ig - 1.0;
    let pow = |u: f64| (alpha * u.ln()).exp();
    let phase = |u: f64| Complex64::new(0.0, sigma * u).exp();
    let mid = b.min(lo.max(ASYMPTOTIC_START));
    if mid > lo {
        let panels = ((mid - lo) * 4.0 / (2.0 * PI)).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (0..=panels).map(|k| lo + (mid - lo) * k as f64 / panels as f64).collect();
        total += adaptive_gk(|u| pow(u) * phase(u), &breaks, 1e-15, 1e-13, 40 * panels)?.value;
    }
    if b > mid {
        // repeated integration by parts: ∫ u^α e^{iσu} = [e^{iσu} Σ c_k u^{α−k}] + O(u^{−K})
        let is = Complex64::new(0.0, sigma);
        let antiderivative = |u: f64| {
            let mut c = 1.0 / is;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..ASYMPTOTIC_TERMS {
                acc += c * ((alpha - k as f64) * u.ln()).exp();
                c = -c * (alpha - k as f64) / is;
            }
            acc * phase(u)
        };
        total += antiderivative(b) - antiderivative(mid);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatoryBound {
    pub sup: f64,
    pub bound_ratio: f64,
}

/// `sup_ξ |I(ξ)|` over `xis` and its ratio to `⟨γ⟩ e^{π|γ|}`.
pub fn oscillatory_fourier_bound(gamma: f64, eps: f64, xis: &[f64]) -> Result<OscillatoryBound> {
    let mut sup: f64 = 0.0;
    for &xi in xis {
        sup = sup.max(oscillatory_integral(gamma, eps, xi)?.norm());
    }
    let weight = (1.0 + gamma * gamma).sqrt() * (PI * gamma.abs()).exp();
    Ok(OscillatoryBound { sup, bound_ratio: sup / weight })
}

/// Symmetric logarithmic frequency grid `±10^{lo..hi}` with `per_decade` points.
pub fn log_frequency_grid(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let count = (hi - lo) as usize * per_decade;
    let mut out = Vec::with_capacity(2 * count + 2);
    for k in 0..=count {
        let v = 10f64.powf(lo as f64 + k as f64 / per_decade as f64);
        out.push(v);
        out.push(-v);
    }
    out
}

/// Propagated classical field at `t`, convenient for comparisons.
pub fn classical_symbol(f: &PhaseField, fm: &FlowMap, t: f64, x: f64, z: f64) -> Result<f64> {
    propagate_field(f, fm, t).eval(&[x], &[z])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{bump_profile, SupportBox};
    use crate::metric::MetricField;
    use approx::assert_relative_eq;

    fn bump_field() -> PhaseField {
        PhaseField::closed(SupportBox::symmetric(1, 2.0, 1.2), true, |x, z| bump_profile(x[0] / 2.0) * bump_profile(z[0] / 1.2))
    }

    #[test]
    fn identity_and_position() {
        let gq = GridQuantization::new(32, 4.0, 0.3).unwrap();
        let one = weyl_quantize_observable(|_, _| 1.0, &gq);
        assert!((one.re.clone() - DMatrix::identity(32, 32)).amax() < 1e-12);
        assert!(one.im.amax() < 1e-12);
        let x = weyl_quantize_observable(|x, _| x, &gq);
        for j in 0..32 {
            for k in 0..32 {
                let expect = if j == k { gq.x(j) } else { 0.0 };
                assert!((x.re[(j, k)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_symbol_matches_spectral_laplacian() {
        let gq = GridQuantization::new(64, 5.0, 0.5).unwrap();
        let p = weyl_quantize_observable(|_, z| z * z, &gq);
        // sinc-interpolation second derivative; the finite momentum sum differs by O(n^-2)
        let (dx, h) = (gq.dx(), gq.h);
        let d2 = DMatrix::from_fn(64, 64, |j, k| {
            if j == k {
                h * h * PI * PI / (3.0 * dx * dx)
            } else {
                let r = j as f64 - k as f64;
                let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                h * h * 2.0 * sign / (r * r * dx * dx)
            }
        });
        let mut a: Vec<f64> = p.re.symmetric_eigenvalues().iter().copied().collect();
        let mut b: Vec<f64> = d2.symmetric_eigenvalues().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for k in 0..8 {
            assert!(((a[k] - b[k]) / b[k]).abs() <= 1.0 / (64.0 * 64.0), "mode {k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn trace_rule_and_rank_one_density() {
        let gq = GridQuantization::new(256, 8.0, 0.2).unwrap();
        let f = bump_field();
        let k = weyl_quantize(|x, z| f.eval(&[x], &[z]), &gq).unwrap();
        assert!(k.hermitian_defect() < 1e-12);
        let rho = density_of(&k);
        let trace = gq.dx() * rho.iter().sum::<f64>();
        let grid = Rule1d::composite(20, 8, -2.0, 2.0);
        let zr = Rule1d::composite(20, 8, -1.2, 1.2);
        let phase = grid.integrate(|x| zr.integrate(|z| f.eval(&[x], &[z])));
        assert_relative_eq!(trace, phase / (2.0 * PI * gq.h), max_relative = 1e-6);

        let u: Vec<Complex64> = (0..16).map(|j| Complex64::new((j as f64).sin(), 0.3 * j as f64)).collect();
        let r1 = OperatorKernel::rank_one(&u, 0.5);
        let rho = density_of(&r1);
        for j in 0..16 {
            assert_relative_eq!(rho[j] * 0.5, u[j].norm_sqr(), max_relative = 1e-14);
        }
    }

    #[test]
    fn boundary_mass_is_rejected() {
        let gq = GridQuantization::new(32, 4.0, 0.3).unwrap();
        assert!(matches!(weyl_quantize(|_, _| 1.0, &gq), Err(LabError::BoundaryMass(_))));
    }

    #[test]
    fn evolution_is_unitary_and_trace_preserving() {
        let gq = GridQuantization::new(96, 8.0, 0.25).unwrap();
        let fm = FlowMap::new(crate::metric::bump_metric_1d(0.5).unwrap());
        let p = hamiltonian_operator(&fm, &gq).unwrap();
        let prop = Propagator::new(&p, gq.h).unwrap();
        assert!(prop.unitarity_defect() < 1e-10);
        let f = bump_field();
        let k = weyl_quantize(|x, z| f.eval(&[x], &[z]), &gq).unwrap();
        assert_eq!(prop.evolve(&k, 0.0).re, k.re);
        let kt = prop.evolve(&k, 1.0);
        assert!((kt.trace() - k.trace()).norm() <= 1e-10 * k.trace().norm());
        // a function of P commutes with P
        let fp = OperatorKernel::real(p.re.clone() * p.re.clone(), gq.dx());
        assert!(prop.evolve(&fp, 1.0).sub(&fp).scale() < 1e-9 * fp.scale());
    }

    #[test]
    fn free_density_gap_shrinks_with_h() {
        let fm = FlowMap::new(MetricField::euclidean(1).unwrap());
        let f = bump_field();
        let quad = VelocityQuadrature { order: 24, panels: 4 };
        let ladder = density_gap_ladder(&f, &fm, 0.5, 128, 8.0, &[0.4, 0.2], &quad).unwrap();
        assert!(ladder.points[1].sup_gap < ladder.points[0].sup_gap);
    }

    #[test]
    fn oscillatory_integral_special_values() {
        assert_eq!(oscillatory_integral(0.0, 0.01, 0.0).unwrap().norm(), 0.0);
        // γ = 0: I(ξ) = 2i (Si(ξ/ε) − Si(ξε))
        let si = |x: f64| Rule1d::composite(20, 400, 0.0, x).integrate(|t| if t == 0.0 { 1.0 } else { t.sin() / t });
        for (eps, xi) in [(0.01, 1.0), (0.1, 3.0), (0.001, 0.5)] {
            let v = oscillatory_integral(0.0, eps, xi).unwrap();
            let expect = 2.0 * (si(xi / eps) - si(xi * eps));
            assert!(v.re.abs() < 1e-10);
            assert_relative_eq!(v.im, expect, max_relative = 1e-9);
        }
    }
}
