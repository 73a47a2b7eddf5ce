//! Hamiltonian flow of the kinetic symbol `p(x, ξ) = g^{ij}(x) ξ_i ξ_j`.
//!
//! Phase points are flat slices `z = (x_1..x_d, ξ_1..ξ_d)`. Inside the support
//! of the metric perturbation the flow is integrated by Yoshida's sixth-order
//! composition of the implicit midpoint rule with a fixed step per trajectory;
//! outside it, trajectories move on straight lines and are advanced exactly.
//!
//! The step is `c·L/√(p·Λ)` with `L` the metric's length scale and `Λ` a
//! global bound on `g^{-1}`. Fixing it along a trajectory keeps the scheme
//! symplectic (energy errors stay bounded instead of drifting), and scaling
//! it with `1/√p` makes the discrete flow respect the homogeneity of `p`
//! exactly. The Jacobian is the exact tangent map of the discrete scheme.

use nalgebra::{Const, DMatrix, DimMin, SMatrix, SVector};

use crate::error::{LabError, Result};
use crate::metric::{MAXD, MetricField};

// Yoshida's sixth-order composition, solution A.
const W1: f64 = -1.177_679_984_178_87;
const W2: f64 = 0.235_573_213_359_357;
const W3: f64 = 0.784_513_610_477_560;
const W0: f64 = 1.315_186_320_683_91;
const STAGES: [f64; 7] = [W3, W2, W1, W0, W1, W2, W3];

/// The kinetic Hamiltonian of a metric field.
#[derive(Clone, Debug)]
pub struct KineticHamiltonian {
    metric: MetricField,
}

impl KineticHamiltonian {
    pub fn new(metric: MetricField) -> Self {
        Self { metric }
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// `p(x, ξ)`.
    pub fn symbol(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.metric.symbol(x, xi)
    }

    /// The Hamilton vector field `(ẋ, ξ̇) = (∂_ξ p, −∂_x p)`.
    pub fn field(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let j = self.metric.symbol_jet(x, xi);
        (j.dxi[..d].to_vec(), j.dx[..d].iter().map(|v| -v).collect())
    }

    #[inline]
    fn field_n<const N: usize>(&self, z: &SVector<f64, N>) -> SVector<f64, N> {
        let d = N / 2;
        let j = self.metric.symbol_jet(&z.as_slice()[..d], &z.as_slice()[d..]);
        let mut out = SVector::<f64, N>::zeros();
        for k in 0..d {
            out[k] = j.dxi[k];
            out[d + k] = -j.dx[k];
        }
        out
    }

    /// Field and its linearization `DX = J·Hess p`.
    #[inline]
    fn field_and_derivative<const N: usize>(&self, z: &SVector<f64, N>) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
        let d = N / 2;
        let (x, xi) = (&z.as_slice()[..d], &z.as_slice()[d..]);
        let mut h = [[0.0; 2 * MAXD]; 2 * MAXD];
        let j = self.metric.symbol_second_order(x, xi, &mut h);
        let mut a = SMatrix::<f64, N, N>::zeros();
        let mut f = SVector::<f64, N>::zeros();
        for k in 0..d {
            f[k] = j.dxi[k];
            f[d + k] = -j.dx[k];
            for c in 0..N {
                a[(k, c)] = h[d + k][c];
                a[(d + k, c)] = -h[k][c];
            }
        }
        (f, a)
    }
}

/// Jacobian of the flow map.
///
/// Long trajectories make the matrix badly conditioned, so its determinant is
/// accumulated by multiplicativity: the integrated part is split into chunks
/// of moderate norm whose determinants are multiplied, and the free-flight
/// shears on either side contribute exactly one.
#[derive(Clone, Debug)]
pub struct FlowJacobian {
    pub matrix: DMatrix<f64>,
    pub det: f64,
}

/// Tangent map kept as `shear(post) · core · done · shear(pre)`.
struct Tangent<const N: usize> {
    pre: f64,
    core: SMatrix<f64, N, N>,
    done: SMatrix<f64, N, N>,
    det_done: f64,
    post: f64,
    started: bool,
}

const CHUNK_NORM: f64 = 8.0;

impl<const N: usize> Tangent<N>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    fn new() -> Self {
        Self {
            pre: 0.0,
            core: SMatrix::identity(),
            done: SMatrix::identity(),
            det_done: 1.0,
            post: 0.0,
            started: false,
        }
    }

    fn close_chunk_if_large(&mut self) {
        if self.core.amax() > CHUNK_NORM {
            self.det_done *= self.core.determinant();
            self.done = self.core * self.done;
            self.core = SMatrix::identity();
        }
    }

    fn absorb_post(&mut self) {
        if self.post != 0.0 {
            self.core = shear(self.post) * self.core;
            self.post = 0.0;
        }
    }
}

/// Integrator controls.
#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    /// Step as a fraction of the time needed to cross one metric length scale.
    pub step_fraction: f64,
    /// Newton stops once an update falls below this (relative to `max(1, |z|∞)`);
    /// quadratic convergence leaves a residual near its square.
    pub newton_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { step_fraction: 0.02, newton_tol: 1e-10, max_steps: 50_000_000 }
    }
}

/// The flow `e^{tH_p}` as an evaluable map.
#[derive(Clone, Debug)]
pub struct FlowMap {
    ham: KineticHamiltonian,
    opts: FlowOptions,
    length: f64,
    inv_bounds: (f64, f64),
}

impl FlowMap {
    pub fn new(metric: MetricField) -> Self {
        Self::with_options(metric, FlowOptions::default())
    }

    pub fn with_options(metric: MetricField, opts: FlowOptions) -> Self {
        let length = metric.length_scale().or(metric.support_radius().filter(|r| *r > 0.0)).unwrap_or(1.0);
        let inv_bounds = metric.inverse_eigen_bounds();
        Self { ham: KineticHamiltonian::new(metric), opts, length, inv_bounds }
    }

    pub fn hamiltonian(&self) -> &KineticHamiltonian {
        &self.ham
    }

    pub fn metric(&self) -> &MetricField {
        self.ham.metric()
    }

    pub fn options(&self) -> &FlowOptions {
        &self.opts
    }

    pub fn dim(&self) -> usize {
        self.ham.dim()
    }

    /// Global lower and upper bounds on the eigenvalues of `g^{-1}`.
    pub fn inverse_bounds(&self) -> (f64, f64) {
        self.inv_bounds
    }

    /// `p(z)` for a flat phase point.
    pub fn energy(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        self.ham.symbol(&z[..d], &z[d..2 * d])
    }

    /// The same flow with the step fraction scaled by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.opts.step_fraction *= factor;
        out
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        let d = self.dim();
        if z.len() != 2 * d {
            return Err(LabError::Params(format!("phase point has {} entries, expected {}", z.len(), 2 * d)));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("phase point".into()));
        }
        Ok(())
    }

    /// `e^{tH_p}(z)`. Uses the closed-form great-circle solution when the whole
    /// orbit lies in an exact sphere zone, and numerical integration otherwise.
    pub fn evaluate(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        if let Some(out) = self.sphere_geodesic(t, z) {
            return Ok(out);
        }
        self.integrate(t, z)
    }

    /// `e^{tH_p}(z)` by numerical integration only.
    pub fn integrate(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(self.dispatch(t, z, false)?.0)
    }

    /// Flow and its `2d × 2d` Jacobian.
    pub fn evaluate_with_jacobian(&self, t: f64, z: &[f64]) -> Result<(Vec<f64>, FlowJacobian)> {
        self.check(z)?;
        let (out, jac) = self.dispatch(t, z, true)?;
        Ok((out, jac.expect("jacobian requested")))
    }

    pub fn jacobian(&self, t: f64, z: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.evaluate_with_jacobian(t, z)?.1.matrix)
    }

    /// States at the requested (monotone, same-signed) times, each obtained by
    /// continuing from the previous one.
    pub fn trajectory(&self, times: &[f64], z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = z.to_vec();
        let mut t_prev = 0.0;
        for &t in times {
            cur = self.evaluate(t - t_prev, &cur)?;
            t_prev = t;
            out.push(cur.clone());
        }
        Ok(out)
    }

    fn dispatch(&self, t: f64, z: &[f64], jac: bool) -> Result<(Vec<f64>, Option<FlowJacobian>)> {
        match self.dim() {
            1 => self.run::<2>(t, z, jac),
            2 => self.run::<4>(t, z, jac),
            3 => self.run::<6>(t, z, jac),
            _ => self.run::<8>(t, z, jac),
        }
    }

    fn run<const N: usize>(&self, t: f64, z: &[f64], want: bool) -> Result<(Vec<f64>, Option<FlowJacobian>)>
    where
        Const<N>: DimMin<Const<N>, Output = Const<N>>,
    {
        let mut v = SVector::<f64, N>::from_column_slice(z);
        let mut tan = Tangent::<N>::new();
        self.propagate(t, &mut v, want.then_some(&mut tan))?;
        let jac = want.then(|| {
            let full = shear(tan.post) * tan.core * tan.done * shear(tan.pre);
            FlowJacobian {
                matrix: DMatrix::from_fn(N, N, |i, j| full[(i, j)]),
                det: tan.det_done * tan.core.determinant(),
            }
        });
        Ok((v.as_slice().to_vec(), jac))
    }

    /// Fixed step for a trajectory of energy `p`.
    pub fn step_for_energy(&self, p: f64) -> f64 {
        self.opts.step_fraction * self.length / (2.0 * (p * self.inv_bounds.1).sqrt())
    }

    fn propagate<const N: usize>(
        &self,
        t: f64,
        z: &mut SVector<f64, N>,
        mut tan: Option<&mut Tangent<N>>,
    ) -> Result<()>
    where
        Const<N>: DimMin<Const<N>, Output = Const<N>>,
    {        let p = self.energy(z.as_slice());
        if t == 0.0 || p == 0.0 {
            return Ok(());
        }
        let sign = t.signum();
        let mut remaining = t.abs();
        let support = self.metric().support_radius();
        if support == Some(0.0) {
            free_flight(z, sign * remaining, tan);
            return Ok(());
        }
        let h = self.step_for_energy(p);
        let mut steps = 0usize;
        let mut inside = support.is_none();
        while remaining > 0.0 {
            if !inside {
                let r = support.expect("bounded support");
                let (r2, xv) = radial_state(z, sign);
                if xv >= 0.0 && r2 >= r * r {
                    free_flight(z, sign * remaining, tan);
                    return Ok(());
                }
                if r2 > r * r {
                    match entry_time(z, sign, r) {
                        Some(s) if s < remaining => {
                            free_flight(z, sign * s, tan.as_deref_mut());
                            remaining -= s;
                        }
                        _ => {
                            free_flight(z, sign * remaining, tan);
                            return Ok(());
                        }
                    }
                }
                inside = true;
            }
            let step = h.min(remaining);
            *z = self.composed(z, sign * step, tan.as_deref_mut()).ok_or_else(|| LabError::Integration {
                t: t - sign * remaining,
                state: z.as_slice().to_vec(),
                reason: "implicit midpoint solve did not converge".into(),
            })?;
            remaining = if step >= remaining { 0.0 } else { remaining - step };
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(LabError::Integration {
                    t: t - sign * remaining,
                    state: z.as_slice().to_vec(),
                    reason: "step budget exhausted".into(),
                });
            }
            if let Some(r) = support {
                let (r2, xv) = radial_state(z, sign);
                if r2 >= r * r && xv >= 0.0 {
                    inside = false;
                }
            }
        }
        Ok(())
    }

    fn composed<const N: usize>(
        &self,
        z: &SVector<f64, N>,
        h: f64,
        mut tan: Option<&mut Tangent<N>>,
    ) -> Option<SVector<f64, N>>
    where
        Const<N>: DimMin<Const<N>, Output = Const<N>>,
    {        let mut cur = *z;
        for w in STAGES {
            cur = self.midpoint(&cur, w * h, tan.as_deref_mut())?;
        }
        if let Some(t) = tan {
            t.close_chunk_if_large();
        }
        Some(cur)
    }

    /// Implicit midpoint step `z' = z + h X((z + z')/2)`, solved by Newton iteration.
    fn midpoint<const N: usize>(
        &self,
        z: &SVector<f64, N>,
        h: f64,
        tan: Option<&mut Tangent<N>>,
    ) -> Option<SVector<f64, N>>
    where
        Const<N>: DimMin<Const<N>, Output = Const<N>>,
    {        let id = SMatrix::<f64, N, N>::identity();
        let mut m = z + self.ham.field_n(z) * (0.5 * h);
        let mut last_a = None;
        for _ in 0..30 {
            let (f, a) = self.ham.field_and_derivative(&m);
            let res = m - z - f * (0.5 * h);
            let delta = solve(id - a * (0.5 * h), &res)?;
            m -= delta;
            if !m.amax().is_finite() {
                return None;
            }
            if delta.amax() <= self.opts.newton_tol * m.amax().max(1.0) {
                last_a = Some(a);
                break;
            }
        }
        let a = last_a?;
        if let Some(t) = tan {
            // derivative at the converged midpoint (the last update is below roundoff)
            let a = a * (0.5 * h);
            let step = solve(id - a, &(id + a))?;
            t.absorb_post();
            t.core = step * t.core;
            t.started = true;
        }
        Some(m * 2.0 - z)
    }

    /// Closed-form flow when the orbit is a great circle that never leaves the
    /// exact sphere zone of the metric.
    pub fn sphere_geodesic(&self, t: f64, z: &[f64]) -> Option<Vec<f64>> {
        let zone = self.metric().sphere_zone()?;
        let d = self.dim();
        let (x, xi) = (&z[..d], &z[d..]);
        let u: f64 = x.iter().map(|v| v * v).sum();
        if u.sqrt() >= zone {
            return None;
        }
        let p = self.ham.symbol(x, xi);
        if p <= 0.0 {
            return Some(z.to_vec());
        }
        let xdot: Vec<f64> = self.ham.field(x, xi).0;
        let (big_x, jac) = chart_with_jacobian(x);
        let mut v = vec![0.0; d + 1];
        for i in 0..=d {
            for k in 0..d {
                v[i] += jac[(i, k)] * xdot[k];
            }
        }
        let omega = 2.0 * p.sqrt();
        let amp = (big_x[d].powi(2) + (v[d] / omega).powi(2)).sqrt();
        let r_max = ((1.0 + amp) / 2.0).sqrt();
        if r_max > zone {
            return None;
        }
        let (c, s) = ((omega * t).cos(), (omega * t).sin());
        let xt: Vec<f64> = (0..=d).map(|i| c * big_x[i] + s * v[i] / omega).collect();
        let vt: Vec<f64> = (0..=d).map(|i| -omega * s * big_x[i] + c * v[i]).collect();
        // back to the ball: x = X'/(2√s), s = (1 − X_{d+1})/2
        let sh = ((1.0 - xt[d]) / 2.0).sqrt();
        let xb: Vec<f64> = xt[..d].iter().map(|v| v / (2.0 * sh)).collect();
        let (_, jb) = chart_with_jacobian(&xb);
        // ξ = ½ Jᵀ Ẋ
        let mut out = xb;
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..=d {
                acc += jb[(i, k)] * vt[i];
            }
            out.push(0.5 * acc);
        }
        Some(out)
    }
}

/// The chart `x ↦ (2x√(1−|x|²), 2|x|² − 1)` from the unit ball to the sphere, with its Jacobian.
pub fn chart_with_jacobian(x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let d = x.len();
    let u: f64 = x.iter().map(|v| v * v).sum();
    let s = (1.0 - u).sqrt();
    let mut big: Vec<f64> = x.iter().map(|v| 2.0 * v * s).collect();
    big.push(2.0 * u - 1.0);
    let jac = DMatrix::from_fn(d + 1, d, |i, k| {
        if i < d {
            (if i == k { 2.0 * s } else { 0.0 }) - 2.0 * x[i] * x[k] / s
        } else {
            4.0 * x[k]
        }
    });
    (big, jac)
}

fn solve<const N: usize, const C: usize>(a: SMatrix<f64, N, N>, b: &SMatrix<f64, N, C>) -> Option<SMatrix<f64, N, C>>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    a.lu().solve(b)
}

#[inline]
fn radial_state<const N: usize>(z: &SVector<f64, N>, sign: f64) -> (f64, f64) {
    let d = N / 2;
    let mut r2 = 0.0;
    let mut xv = 0.0;
    for k in 0..d {
        r2 += z[k] * z[k];
        xv += z[k] * z[d + k];
    }
    (r2, sign * xv)
}

/// Time (in `|t|` units) until the straight line enters the ball of radius `r`.
fn entry_time<const N: usize>(z: &SVector<f64, N>, sign: f64, r: f64) -> Option<f64> {
    let d = N / 2;
    let (mut xv, mut vv, mut r2) = (0.0, 0.0, 0.0);
    for k in 0..d {
        let v = 2.0 * sign * z[d + k];
        xv += z[k] * v;
        vv += v * v;
        r2 += z[k] * z[k];
    }
    if vv == 0.0 {
        return None;
    }
    let disc = xv * xv - vv * (r2 - r * r);
    if disc <= 0.0 {
        return None;
    }
    Some(((-xv - disc.sqrt()) / vv).max(0.0))
}

fn free_flight<const N: usize>(z: &mut SVector<f64, N>, t: f64, tan: Option<&mut Tangent<N>>) {
    let d = N / 2;
    for k in 0..d {
        z[k] += 2.0 * t * z[d + k];
    }
    if let Some(tg) = tan {
        if tg.started {
            tg.post += t;
        } else {
            tg.pre += t;
        }
    }
}

/// The free-flight Jacobian `[[I, 2tI], [0, I]]`.
fn shear<const N: usize>(t: f64) -> SMatrix<f64, N, N> {
    let d = N / 2;
    let mut s = SMatrix::<f64, N, N>::identity();
    for k in 0..d {
        s[(k, d + k)] = 2.0 * t;
    }
    s
}

/// First return time to the Poincaré section through `x(0)` orthogonal to `ẋ(0)`,
/// searched on `(0, t_max]` with sampling interval `dt`.
pub fn detect_period(fm: &FlowMap, z0: &[f64], t_max: f64, dt: f64) -> Result<Option<f64>> {
    let d = fm.dim();
    let (v0, _) = fm.hamiltonian().field(&z0[..d], &z0[d..]);
    let section = |z: &[f64]| -> f64 { (0..d).map(|k| v0[k] * (z[k] - z0[k])).sum() };
    let mut t = 0.0;
    let mut cur = z0.to_vec();
    let mut prev_s = 0.0;
    let mut left = false;
    while t < t_max {
        let next = fm.evaluate(dt, &cur)?;
        let s = section(&next);
        if s < 0.0 {
            left = true;
        }
        if left && prev_s < 0.0 && s >= 0.0 {
            // refine by regula falsi (Illinois) on [t, t + dt]
            let (mut a, mut b) = (0.0, dt);
            let (mut fa, mut fb) = (prev_s, s);
            let mut side = 0i32;
            for _ in 0..80 {
                let c = (a * fb - b * fa) / (fb - fa);
                let fc = section(&fm.evaluate(c, &cur)?);
                if fc == 0.0 || (b - a).abs() < 1e-14 {
                    a = c;
                    b = c;
                    break;
                }
                if fc * fb > 0.0 {
                    b = c;
                    fb = fc;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                } else {
                    a = c;
                    fa = fc;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                }
            }
            return Ok(Some(t + 0.5 * (a + b)));
        }
        prev_s = s;
        cur = next;
        t += dt;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{GluedMetricParams, glued_sphere_metric, ball_to_sphere};

    fn glued() -> FlowMap {
        FlowMap::new(glued_sphere_metric(GluedMetricParams::default()).unwrap())
    }

    fn trap() -> FlowMap {
        FlowMap::new(glued_sphere_metric(GluedMetricParams { r0: 0.75, eps: 0.1, dim: 2 }).unwrap())
    }

    #[test]
    fn euclidean_free_flow() {
        let fm = FlowMap::new(MetricField::euclidean(3).unwrap());
        let z = fm.evaluate(1.0, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(z, vec![2.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let j = fm.jacobian(1.0, &[0.3, 0.1, -0.2, 1.0, 0.5, 0.0]).unwrap();
        let mut expect = DMatrix::identity(6, 6);
        for k in 0..3 {
            expect[(k, 3 + k)] = 2.0;
        }
        assert_eq!(j, expect);
    }

    #[test]
    fn zero_time_is_identity() {
        let fm = glued();
        let z = [0.05, -0.02, 0.7, 0.3];
        assert_eq!(fm.evaluate(0.0, &z).unwrap(), z.to_vec());
        assert_eq!(fm.jacobian(0.0, &z).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn field_matches_symbol_gradient() {
        let h = KineticHamiltonian::new(glued_sphere_metric(GluedMetricParams::default()).unwrap());
        let (x, xi) = ([0.13, -0.06], [0.4, 1.1]);
        let (xd, xid) = h.field(&x, &xi);
        let e = 1e-6;
        for k in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[k] += e;
            xm[k] -= e;
            let dpx = (h.symbol(&xp, &xi) - h.symbol(&xm, &xi)) / (2.0 * e);
            let (mut qp, mut qm) = (xi, xi);
            qp[k] += e;
            qm[k] -= e;
            let dpq = (h.symbol(&x, &qp) - h.symbol(&x, &qm)) / (2.0 * e);
            assert!((xd[k] - dpq).abs() <= 1e-6 * dpq.abs().max(1.0));
            assert!((xid[k] + dpx).abs() <= 1e-6 * dpx.abs().max(1.0));
        }
        let (a, b) = h.field(&x, &[0.0, 0.0]);
        assert_eq!((a, b), (vec![0.0, 0.0], vec![0.0, 0.0]));
    }

    #[test]
    fn glued_flow_conserves_and_reverses() {
        let fm = glued();
        let z0 = [0.02, -0.18, 0.3, 1.2];
        for t in [3.0, -7.5, 40.0] {
            let (z, j) = fm.evaluate_with_jacobian(t, &z0).unwrap();
            assert!((j.matrix.determinant() - 1.0).abs() <= 1e-6);
            let p0 = fm.energy(&z0);
            assert!((fm.energy(&z) - p0).abs() <= 1e-8 * p0);
            assert!((j.det - 1.0).abs() <= 1e-6);
            let back = fm.evaluate(-t, &z).unwrap();
            for (a, b) in back.iter().zip(&z0) {
                assert!((a - b).abs() < 1e-8, "t={t}: {back:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let fm = glued();
        let z0 = [0.05, 0.01, -0.4, 0.9];
        let j = fm.jacobian(2.0, &z0).unwrap();
        let e = 1e-6;
        for c in 0..4 {
            let (mut zp, mut zm) = (z0, z0);
            zp[c] += e;
            zm[c] -= e;
            let (fp, fmn) = (fm.integrate(2.0, &zp).unwrap(), fm.integrate(2.0, &zm).unwrap());
            for r in 0..4 {
                let fd = (fp[r] - fmn[r]) / (2.0 * e);
                assert!((fd - j[(r, c)]).abs() < 1e-4 * (1.0 + fd.abs()), "r={r} c={c}");
            }
        }
    }

    #[test]
    fn sphere_fast_path_matches_integration() {
        let fm = trap();
        let z0 = [0.7, 0.05, 0.1, 1.4];
        for t in [0.7, 2.0, 9.3] {
            let a = fm.sphere_geodesic(t, &z0).expect("orbit inside zone");
            let b = fm.integrate(t, &z0).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-8, "t={t}: {a:?} vs {b:?}");
            }
        }
        assert!(glued().sphere_geodesic(1.0, &[0.01, 0.0, 1.0, 0.0]).is_none());
    }

    #[test]
    fn equator_orbit_is_periodic_and_bounded() {
        let fm = trap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // equator of the sphere, unit energy
        let x = [r, 0.0];
        let mut xi = [0.0, 1.0];
        let p = fm.energy(&[x[0], x[1], xi[0], xi[1]]);
        xi[1] /= p.sqrt();
        let z0 = [x[0], x[1], xi[0], xi[1]];
        assert!((ball_to_sphere(&x).unwrap()[2]).abs() < 1e-15);
        let per = detect_period(&fm, &z0, 20.0, 0.05).unwrap().unwrap();
        assert!((per - std::f64::consts::PI).abs() < 1e-8, "period {per}");
        let mut cur = z0.to_vec();
        for _ in 0..100 {
            cur = fm.integrate(1.0, &cur).unwrap();
            let rr = (cur[0] * cur[0] + cur[1] * cur[1]).sqrt();
            assert!(rr <= 0.85);
        }
    }

    #[test]
    fn euclidean_escapes() {
        let fm = FlowMap::new(MetricField::euclidean(2).unwrap());
        let z = fm.evaluate(100.0, &[0.1, 0.0, 0.0, 0.5]).unwrap();
        assert!(z[1] > 99.0);
    }
}
