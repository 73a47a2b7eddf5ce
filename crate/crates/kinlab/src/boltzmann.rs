//! Gain-only contraction, Kaniel–Shinbrot monotone iteration and scattering
//! extraction for the cutoff Boltzmann equation on Euclidean phase space.
//!
//! Every iterate is stored in the interaction picture `ã(t, z) = a(t, e^{tH}z)`
//! on a node grid over a box `[−X, X]^d × [−V, V]^d`, split as
//! `ã = f₀ · E + G` so the initial datum keeps its closed form between
//! nodes. A step of the scheme solves `∂ₜã = −L̃(b) ã + Q̃⁺(a, a)` with the
//! trapezoid rule in time, which is monotone in both arguments as long as
//! `Δt·L/2 ≤ 1`; the monotone sandwich is then a property of the discrete
//! map, not only of the continuous one.

use std::thread;

use crate::collision::{gain_term, loss_functional, CollisionKernel, VelocityDensity, ZetaQuadrature, MAX_VDIM};
use crate::error::{LabError, Result};
use crate::field::PhaseField;
use crate::flow::FlowMap;
use crate::transport::{mixed_norm, GridLevel};

/// Exponents `(q, r, p)` of the monitored norm `L^q_t L^r_x L^p_ξ`.
pub const MONITOR_EXPONENTS: [f64; 3] = [2.0, 30.0 / 11.0, 10.0 / 7.0];

/// Node grid for the interaction-picture unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub dim: usize,
    pub nx: usize,
    pub x_half: f64,
    pub nv: usize,
    pub v_half: f64,
}

impl PhaseGrid {
    pub fn new(dim: usize, nx: usize, x_half: f64, nv: usize, v_half: f64) -> Result<Self> {
        if !(1..=MAX_VDIM).contains(&dim) {
            return Err(LabError::Params(format!("kinetic dimension {dim} unsupported")));
        }
        if nx < 2 || nv < 2 {
            return Err(LabError::EmptyGrid);
        }
        if !(x_half > 0.0 && v_half > 0.0) {
            return Err(LabError::Params("grid half-widths must be positive".into()));
        }
        Ok(Self { dim, nx, x_half, nv, v_half })
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.x_half / (self.nx - 1) as f64
    }

    pub fn hv(&self) -> f64 {
        2.0 * self.v_half / (self.nv - 1) as f64
    }

    pub fn x_count(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    pub fn v_count(&self) -> usize {
        self.nv.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.x_count() * self.v_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase-space volume attached to one node.
    pub fn cell_volume(&self) -> f64 {
        (self.hx() * self.hv()).powi(self.dim as i32)
    }

    /// Node `i` as `(y, v)`; position indices vary slowest.
    pub fn node(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut vi = i % self.v_count();
        let mut xi = i / self.v_count();
        let mut y = vec![0.0; d];
        let mut v = vec![0.0; d];
        for k in (0..d).rev() {
            y[k] = -self.x_half + (xi % self.nx) as f64 * self.hx();
            v[k] = -self.v_half + (vi % self.nv) as f64 * self.hv();
            xi /= self.nx;
            vi /= self.nv;
        }
        (y, v)
    }

    /// Multilinear weights of `(y, v)`: calls `f(node, weight)` for the
    /// `2^{2d}` surrounding nodes; nothing outside the box.
    #[inline]
    fn stencil(&self, y: &[f64], v: &[f64], mut f: impl FnMut(usize, f64)) {
        let d = self.dim;
        let mut base = [0usize; 2 * MAX_VDIM];
        let mut frac = [0.0; 2 * MAX_VDIM];
        let mut size = [0usize; 2 * MAX_VDIM];
        for k in 0..2 * d {
            let (c, half, n, h) = if k < d {
                (y[k], self.x_half, self.nx, self.hx())
            } else {
                (v[k - d], self.v_half, self.nv, self.hv())
            };
            let s = (c + half) / h;
            if !(s >= 0.0 && s <= (n - 1) as f64) {
                return;
            }
            let b = (s.floor() as usize).min(n - 2);
            base[k] = b;
            frac[k] = s - b as f64;
            size[k] = n;
        }
        for corner in 0..(1usize << (2 * d)) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..2 * d {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * size[k] + base[k] + bit;
            }
            if w != 0.0 {
                f(idx, w);
            }
        }
    }
}

/// Which object of the iteration a state represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Lower,
    Upper,
    GainOnly,
    Solution,
}

/// An interaction-picture trajectory `ã(t_k) = f₀ E_k + G_k` on the nodes.
#[derive(Clone, Debug)]
pub struct KineticState {
    pub role: Role,
    pub iteration: usize,
    /// Loss factor `E_k` per time level and node.
    pub decay: Vec<Vec<f64>>,
    /// Accumulated gain `G_k` per time level and node.
    pub gain: Vec<Vec<f64>>,
}

impl KineticState {
    fn zero(levels: usize, nodes: usize, role: Role) -> Self {
        Self { role, iteration: 0, decay: vec![vec![0.0; nodes]; levels], gain: vec![vec![0.0; nodes]; levels] }
    }

    fn free(levels: usize, nodes: usize, role: Role) -> Self {
        Self { role, iteration: 0, decay: vec![vec![1.0; nodes]; levels], gain: vec![vec![0.0; nodes]; levels] }
    }
}

/// Lower and upper iterates of the monotone scheme.
#[derive(Clone, Debug)]
pub struct SandwichPair {
    pub lower: KineticState,
    pub upper: KineticState,
}

#[derive(Clone, Debug)]
pub struct KsOptions {
    /// Gauss–Legendre points per axis for the `ζ*` integrals.
    pub zeta_order: usize,
    pub tol: f64,
    pub n_max: usize,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Allowed violation of the ordering, relative to `sup f₀`.
    pub slack: f64,
    pub threads: usize,
}

impl Default for KsOptions {
    fn default() -> Self {
        Self { zeta_order: 3, tol: 1e-6, n_max: 20, picard_tol: 1e-13, picard_max: 80, slack: 1e-9, threads: 1 }
    }
}

/// Default time levels: fine near `t = 0`, doubling out to `t_max`.
pub fn default_times(t_max: f64) -> Vec<f64> {
    let base = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0];
    let mut times: Vec<f64> = base.iter().copied().filter(|&t| t < t_max).collect();
    let mut t = 80.0;
    while t < t_max {
        t *= 1.5;
        times.push(t.min(t_max) / 1.5);
    }
    times.push(t_max);
    times.dedup();
    times
}

#[derive(Clone, Debug)]
pub struct GainOnlyReport {
    pub state: KineticState,
    pub iterations: usize,
    /// Successive-difference ratios of the Picard iteration.
    pub ratios: Vec<f64>,
    pub last_change: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateRecord {
    pub n: usize,
    pub sup_gap: f64,
    pub l3_norm: f64,
}

#[derive(Clone, Debug)]
pub struct KsOutcome {
    pub pair: SandwichPair,
    pub history: Vec<IterateRecord>,
    pub converged: bool,
    /// Largest ordering violation seen, relative to `sup f₀`.
    pub worst_violation: f64,
}

#[derive(Clone, Debug)]
pub struct ScatteringReport {
    /// `(t, ‖v(2t) − v(t)‖_{L³})` over the ladder.
    pub tails: Vec<(f64, f64)>,
    pub decreasing: bool,
    /// `f_∞` on the nodes, taken from the last time level.
    pub f_infinity: Vec<f64>,
}

/// Solver for one initial datum, kernel and grid.
pub struct KineticSolver {
    grid: PhaseGrid,
    times: Vec<f64>,
    kernel: CollisionKernel,
    f0: PhaseField,
    f0_nodes: Vec<f64>,
    f0_sup: f64,
    opts: KsOptions,
}

struct Slice<'a> {
    solver: &'a KineticSolver,
    state: &'a KineticState,
    level: usize,
    x: [f64; MAX_VDIM],
}

impl VelocityDensity for Slice<'_> {
    fn density(&self, v: &[f64]) -> f64 {
        self.solver.physical(self.state, self.level, &self.x[..v.len()], v)
    }
}

impl KineticSolver {
    pub fn new(grid: PhaseGrid, times: Vec<f64>, kernel: CollisionKernel, f0: PhaseField, flow: &FlowMap, opts: KsOptions) -> Result<Self> {
        if !flow.metric().is_euclidean() {
            return Err(LabError::Params("the kinetic solver supports the Euclidean flow only".into()));
        }
        if f0.dim() != grid.dim || kernel.dim() != grid.dim || flow.dim() != grid.dim {
            return Err(LabError::Params("datum, kernel, flow and grid dimensions differ".into()));
        }
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Params("time levels must start at 0 and increase".into()));
        }
        let mut f0_nodes = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (y, v) = grid.node(i);
            let val = f0.eval(&y, &v);
            if !(val >= 0.0) {
                return Err(LabError::Params(format!("initial datum negative or NaN at {y:?}, {v:?}")));
            }
            f0_nodes.push(val);
        }
        let f0_sup = f0_nodes.iter().copied().fold(0.0, f64::max);
        Ok(Self { grid, times, kernel, f0, f0_nodes, f0_sup, opts })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }

    pub fn options(&self) -> &KsOptions {
        &self.opts
    }

    /// `sup f₀` over the nodes.
    pub fn datum_sup(&self) -> f64 {
        self.f0_sup
    }

    /// Discrete `L³` and `L^{15/8}` norms of the datum on the nodes.
    pub fn datum_norms(&self) -> (f64, f64) {
        let cell = self.grid.cell_volume();
        let lp = |p: f64| (self.f0_nodes.iter().map(|v| v.powf(p)).sum::<f64>() * cell).powf(1.0 / p);
        (lp(3.0), lp(15.0 / 8.0))
    }

    /// Value of the interaction-picture unknown at node `i`, level `k`.
    pub fn node_value(&self, a: &KineticState, k: usize, i: usize) -> f64 {
        self.f0_nodes[i] * a.decay[k][i] + a.gain[k][i]
    }

    /// All node values at level `k`.
    pub fn level_values(&self, a: &KineticState, k: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.node_value(a, k, i)).collect()
    }

    /// Interaction-picture value at an arbitrary `(y, v)`.
    pub fn interaction_value(&self, a: &KineticState, k: usize, y: &[f64], v: &[f64]) -> f64 {
        let (mut e, mut g) = (0.0, 0.0);
        let (de, dg) = (&a.decay[k], &a.gain[k]);
        self.grid.stencil(y, v, |i, w| {
            e += w * de[i];
            g += w * dg[i];
        });
        if e != 0.0 {
            g += e * self.f0.eval(y, v);
        }
        g
    }

    /// Physical value `a(t_k, x, v) = ã(t_k, x − 2 t_k v, v)`.
    pub fn physical(&self, a: &KineticState, k: usize, x: &[f64], v: &[f64]) -> f64 {
        let s = self.times[k];
        let mut y = [0.0; MAX_VDIM];
        for j in 0..x.len() {
            y[j] = x[j] - 2.0 * s * v[j];
        }
        self.interaction_value(a, k, &y[..x.len()], v)
    }

    /// Velocities `v` for which `(x − 2sv, v)` lies in the grid box.
    fn slice_box(&self, s: f64, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.grid.dim;
        let (mut lo, mut hi) = (vec![-self.grid.v_half; d], vec![self.grid.v_half; d]);
        if s > 0.0 {
            for k in 0..d {
                lo[k] = lo[k].max((x[k] - self.grid.x_half) / (2.0 * s));
                hi[k] = hi[k].min((x[k] + self.grid.x_half) / (2.0 * s));
                if lo[k] >= hi[k] {
                    return None;
                }
            }
        }
        Some((lo, hi))
    }

    /// Gain `Q⁺(a, a)` and loss rate `L(b)` at the physical image of node `i`
    /// at level `k`.
    fn rates(&self, a: &KineticState, b: &KineticState, k: usize, i: usize) -> Result<(f64, f64)> {
        if self.kernel.is_trivial() {
            return Ok((0.0, 0.0));
        }
        let s = self.times[k];
        let d = self.grid.dim;
        let (y, v) = self.grid.node(i);
        let mut x = [0.0; MAX_VDIM];
        for j in 0..d {
            x[j] = y[j] + 2.0 * s * v[j];
        }
        let Some((lo, hi)) = self.slice_box(s, &x[..d]) else {
            return Ok((0.0, 0.0));
        };
        let order = self.opts.zeta_order;
        let loss_q = ZetaQuadrature::Box { lo: lo.clone(), hi: hi.clone(), order, panels: 1 };
        let gain_lo: Vec<f64> = (0..d).map(|j| 2.0 * lo[j] - v[j]).collect();
        let gain_hi: Vec<f64> = (0..d).map(|j| 2.0 * hi[j] - v[j]).collect();
        let gain_q = ZetaQuadrature::Box { lo: gain_lo, hi: gain_hi, order, panels: 1 };
        let sa = Slice { solver: self, state: a, level: k, x };
        let sb = Slice { solver: self, state: b, level: k, x };
        let q = gain_term(&sa, &sa, &v, &self.kernel, &gain_q)?;
        let l = loss_functional(&sb, &v, &self.kernel, &loss_q)?;
        Ok((q, l))
    }

    /// `(q, l)` tables over all levels and nodes, split across threads.
    fn rate_tables(&self, a: &KineticState, b: &KineticState) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let levels = self.times.len();
        let n = self.grid.len();
        let jobs: Vec<(usize, usize)> = (0..levels).flat_map(|k| (0..n).map(move |i| (k, i))).collect();
        let threads = self.opts.threads.max(1).min(jobs.len().max(1));
        let chunk = jobs.len().div_ceil(threads);
        let results: Vec<Result<Vec<(f64, f64)>>> = if threads == 1 {
            vec![jobs.iter().map(|&(k, i)| self.rates(a, b, k, i)).collect()]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .chunks(chunk)
                    .map(|part| scope.spawn(move || part.iter().map(|&(k, i)| self.rates(a, b, k, i)).collect()))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rate worker panicked")).collect()
            })
        };
        let mut q = vec![vec![0.0; n]; levels];
        let mut l = vec![vec![0.0; n]; levels];
        let mut it = jobs.iter();
        for part in results {
            for (ql, ll) in part? {
                let &(k, i) = it.next().expect("job bookkeeping");
                q[k][i] = ql;
                l[k][i] = ll;
            }
        }
        Ok((q, l))
    }

    /// One application of the monotone map: gain from `a`, loss from `b`.
    pub fn step(&self, a: &KineticState, b: &KineticState, role: Role, iteration: usize) -> Result<KineticState> {
        let (q, l) = self.rate_tables(a, b)?;
        self.integrate(&q, &l, role, iteration)
    }

    fn integrate(&self, q: &[Vec<f64>], l: &[Vec<f64>], role: Role, iteration: usize) -> Result<KineticState> {
        let levels = self.times.len();
        let n = self.grid.len();
        let mut out = KineticState::free(levels, n, role);
        out.iteration = iteration;
        for k in 0..levels - 1 {
            let dt = self.times[k + 1] - self.times[k];
            for i in 0..n {
                let keep = 1.0 - 0.5 * dt * l[k][i];
                if keep < 0.0 {
                    return Err(LabError::MonotonicityBroken { iteration, excess: -keep });
                }
                let shrink = 1.0 / (1.0 + 0.5 * dt * l[k + 1][i]);
                out.decay[k + 1][i] = out.decay[k][i] * keep * shrink;
                out.gain[k + 1][i] = (out.gain[k][i] * keep + 0.5 * dt * (q[k][i] + q[k + 1][i])) * shrink;
            }
        }
        Ok(out)
    }

    /// Monitored `L^2_t L^{30/11}_x L^{10/7}_ξ` norm of node values.
    pub fn monitor_norm(&self, values: &[Vec<f64>]) -> Result<f64> {
        let g = &self.grid;
        let levels = [
            GridLevel { count: g.x_count(), cell: g.hx().powi(g.dim as i32) },
            GridLevel { count: g.v_count(), cell: g.hv().powi(g.dim as i32) },
        ];
        let mut acc = 0.0;
        for (k, vals) in values.iter().enumerate() {
            let inner = mixed_norm(vals, &levels, &MONITOR_EXPONENTS[1..])?;
            acc += trapezoid_weight(&self.times, k) * inner.powf(MONITOR_EXPONENTS[0]);
        }
        Ok(acc.powf(1.0 / MONITOR_EXPONENTS[0]))
    }

    fn all_values(&self, a: &KineticState) -> Vec<Vec<f64>> {
        (0..self.times.len()).map(|k| self.level_values(a, k)).collect()
    }

    fn difference_norm(&self, a: &KineticState, b: &KineticState) -> Result<f64> {
        let va = self.all_values(a);
        let vb = self.all_values(b);
        let diff: Vec<Vec<f64>> = va.iter().zip(&vb).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
        self.monitor_norm(&diff)
    }

    /// Picard iteration for the gain-only equation starting from `start`
    /// (the zero state when `None`).
    pub fn gain_only_solve_from(&self, start: Option<KineticState>) -> Result<GainOnlyReport> {
        let levels = self.times.len();
        let n = self.grid.len();
        let zero_loss = KineticState::zero(levels, n, Role::Lower);
        let mut cur = start.unwrap_or_else(|| KineticState::zero(levels, n, Role::GainOnly));
        let mut ratios = Vec::new();
        let mut prev_change: Option<f64> = None;
        let scale = self.monitor_norm(&self.all_values(&KineticState::free(levels, n, Role::GainOnly)))?.max(f64::MIN_POSITIVE);
        for m in 1..=self.opts.picard_max {
            let next = self.step(&cur, &zero_loss, Role::GainOnly, m)?;
            let change = self.difference_norm(&next, &cur)?;
            if let Some(p) = prev_change {
                if p > 0.0 {
                    let ratio = change / p;
                    ratios.push(ratio);
                    // Round-off can stall the tail of the iteration; judge
                    // contraction only while the change is well above it.
                    if ratio >= 0.5 && change > 1e3 * f64::EPSILON * scale {
                        return Err(LabError::SmallnessViolated { ratio });
                    }
                }
            }
            cur = next;
            if change <= self.opts.picard_tol * scale {
                return Ok(GainOnlyReport { state: cur, iterations: m, ratios, last_change: change / scale });
            }
            prev_change = Some(change);
        }
        Err(LabError::Params(format!("gain-only iteration did not settle in {} steps", self.opts.picard_max)))
    }

    pub fn gain_only_solve(&self) -> Result<GainOnlyReport> {
        self.gain_only_solve_from(None)
    }

    /// Kaniel–Shinbrot iteration from `h₁ = 0`, `g₁ = f₊`.
    pub fn ks_iterate(&self, fplus: &KineticState) -> Result<KsOutcome> {
        let levels = self.times.len();
        let n = self.grid.len();
        let slack = self.opts.slack * self.f0_sup.max(f64::MIN_POSITIVE);
        let mut lower = KineticState::zero(levels, n, Role::Lower);
        let mut upper = fplus.clone();
        upper.role = Role::Upper;
        let mut history = Vec::new();
        let mut worst: f64 = 0.0;
        let mut converged = false;
        for it in 1..=self.opts.n_max {
            let new_lower = self.step(&lower, &upper, Role::Lower, it + 1)?;
            let new_upper = self.step(&upper, &lower, Role::Upper, it + 1)?;
            let mut gap: f64 = 0.0;
            for k in 0..levels {
                for i in 0..n {
                    let h0 = self.node_value(&lower, k, i);
                    let h1 = self.node_value(&new_lower, k, i);
                    let g1 = self.node_value(&new_upper, k, i);
                    let g0 = self.node_value(&upper, k, i);
                    let fp = self.node_value(fplus, k, i);
                    let excess = [-h0, h0 - h1, h1 - g1, g1 - g0, g0 - fp].into_iter().fold(f64::MIN, f64::max);
                    if excess > slack {
                        return Err(LabError::MonotonicityBroken { iteration: it + 1, excess });
                    }
                    worst = worst.max(excess.max(0.0) / self.f0_sup.max(f64::MIN_POSITIVE));
                    gap = gap.max(g1 - h1);
                }
            }
            lower = new_lower;
            upper = new_upper;
            let last = self.level_values(&lower, levels - 1);
            let l3 = (last.iter().map(|v| v.abs().powi(3)).sum::<f64>() * self.grid.cell_volume()).cbrt();
            history.push(IterateRecord { n: it + 1, sup_gap: gap, l3_norm: l3 });
            if gap < self.opts.tol {
                converged = true;
                break;
            }
        }
        Ok(KsOutcome { pair: SandwichPair { lower, upper }, history, converged, worst_violation: worst })
    }

    /// Largest deviation from `ã(t_k) = f₀ + ∫₀^{t_k} (Q̃⁺ − L̃ ã) ds` over
    /// levels and nodes, with the time integral taken by the trapezoid rule.
    pub fn duhamel_residual(&self, f: &KineticState) -> Result<f64> {
        let (q, l) = self.rate_tables(f, f)?;
        let n = self.grid.len();
        let mut worst: f64 = 0.0;
        let mut acc = vec![0.0; n];
        for k in 0..self.times.len() {
            if k > 0 {
                let dt = self.times[k] - self.times[k - 1];
                for (i, a) in acc.iter_mut().enumerate() {
                    let prev = q[k - 1][i] - l[k - 1][i] * self.node_value(f, k - 1, i);
                    let cur = q[k][i] - l[k][i] * self.node_value(f, k, i);
                    *a += 0.5 * dt * (prev + cur);
                }
            }
            for i in 0..n {
                worst = worst.max((self.node_value(f, k, i) - self.f0_nodes[i] - acc[i]).abs());
            }
        }
        Ok(worst)
    }

    /// Tail `‖v(2t) − v(t)‖_{L³}` of `v(t) = U(−t) f(t)` over a time ladder;
    /// every `t` and `2t` must be a time level.
    pub fn scattering_state(&self, f: &KineticState, ladder: &[f64]) -> Result<ScatteringReport> {
        let level = |t: f64| {
            self.times
                .iter()
                .position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
                .ok_or_else(|| LabError::Params(format!("time {t} is not a level of the solver")))
        };
        let cell = self.grid.cell_volume();
        let mut tails = Vec::with_capacity(ladder.len());
        for &t in ladder {
            let (a, b) = (level(t)?, level(2.0 * t)?);
            let sum: f64 = (0..self.grid.len())
                .map(|i| (self.node_value(f, b, i) - self.node_value(f, a, i)).abs().powi(3))
                .sum();
            tails.push((t, (sum * cell).cbrt()));
        }
        let decreasing = tails.windows(2).all(|w| w[1].1 < w[0].1);
        let f_infinity = self.level_values(f, self.times.len() - 1);
        Ok(ScatteringReport { tails, decreasing, f_infinity })
    }
}

fn trapezoid_weight(times: &[f64], k: usize) -> f64 {
    let left = if k > 0 { times[k] - times[k - 1] } else { 0.0 };
    let right = if k + 1 < times.len() { times[k + 1] - times[k] } else { 0.0 };
    0.5 * (left + right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::AngularFactor;
    use crate::metric::MetricField;
    use crate::transport::propagate_field;

    fn setup(dim: usize, amplitude: f64, b: AngularFactor) -> (KineticSolver, FlowMap) {
        let grid = PhaseGrid::new(dim, 5, 1.5, 7, 1.5).unwrap();
        let eta = 0.5 * grid.hv();
        let kernel = CollisionKernel::new(dim, -0.5, eta, b, 2, 4).unwrap();
        let base = PhaseField::poly_bump(&vec![0.0; dim], 1.0, &vec![0.0; dim], 1.0, 2);
        let f0 = PhaseField::closed(base.support().clone(), true, move |x, v| amplitude * base.eval(x, v));
        let fm = FlowMap::new(MetricField::euclidean(dim).unwrap());
        let times = vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let solver = KineticSolver::new(grid, times, kernel, f0, &fm, KsOptions::default()).unwrap();
        (solver, fm)
    }

    #[test]
    fn default_time_levels_contain_the_ladder() {
        let t = default_times(80.0);
        for s in [5.0, 10.0, 20.0, 40.0, 80.0] {
            assert!(t.contains(&s));
        }
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn collisionless_run_is_free_transport() {
        let (solver, fm) = setup(1, 1.0, AngularFactor::Zero);
        let fplus = solver.gain_only_solve().unwrap().state;
        let out = solver.ks_iterate(&fplus).unwrap();
        assert!(out.converged);
        assert_eq!(out.history[0].n, 2);
        let f0 = PhaseField::poly_bump(&[0.0], 1.0, &[0.0], 1.0, 2);
        for (k, &t) in solver.times().iter().enumerate() {
            let free = propagate_field(&f0, &fm, t);
            for (x, v) in [(0.3, 0.2), (-1.0, 0.7), (2.5, 0.9)] {
                let a = solver.physical(&out.pair.lower, k, &[x], &[v]);
                assert!((a - free.eval(&[x], &[v]).unwrap()).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_datum_stays_zero() {
        let (solver, _) = setup(1, 0.0, AngularFactor::Linear);
        let fplus = solver.gain_only_solve().unwrap().state;
        let out = solver.ks_iterate(&fplus).unwrap();
        assert!(out.converged);
        let v = solver.level_values(&out.pair.upper, solver.times().len() - 1);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn small_data_sandwich_converges() {
        let (solver, _) = setup(1, 0.05, AngularFactor::Linear);
        let gain = solver.gain_only_solve().unwrap();
        assert!(gain.ratios.iter().all(|&r| r < 0.5));
        let out = solver.ks_iterate(&gain.state).unwrap();
        assert!(out.converged, "{:?}", out.history);
        assert!(out.worst_violation <= 1e-9);
        let res = solver.duhamel_residual(&out.pair.lower).unwrap();
        assert!(res < 1e-5, "residual {res}");
    }
}
