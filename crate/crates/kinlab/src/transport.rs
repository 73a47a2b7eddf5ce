//! Transport observables: velocity averages, phase-space norms, mixed
//! space-time norms and Duhamel averages along the flow.

use crate::error::{LabError, Result};
use crate::field::PhaseField;
use crate::flow::FlowMap;
use crate::quad::TensorRule;

/// Tensor Gauss–Legendre rule used for ξ-integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VelocityQuadrature {
    pub order: usize,
    pub panels: usize,
}

impl Default for VelocityQuadrature {
    fn default() -> Self {
        Self { order: 32, panels: 1 }
    }
}

/// `f ∘ e^{−tH_p}`, evaluated by pulling back along the reverse flow.
#[derive(Clone, Copy, Debug)]
pub struct Transported<'a> {
    pub field: &'a PhaseField,
    pub flow: &'a FlowMap,
    pub t: f64,
}

pub fn propagate_field<'a>(field: &'a PhaseField, flow: &'a FlowMap, t: f64) -> Transported<'a> {
    Transported { field, flow, t }
}

impl Transported<'_> {
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        if self.t == 0.0 {
            return Ok(self.field.eval(x, xi));
        }
        let mut z = x.to_vec();
        z.extend_from_slice(xi);
        let back = self.flow.evaluate(-self.t, &z)?;
        Ok(self.field.eval_z(&back))
    }
}

/// ξ-box containing every `ξ` with `e^{−tH_p}(x, ξ)` in the support of `f`,
/// or `None` when that set is empty.
pub fn velocity_box(f: &PhaseField, fm: &FlowMap, t: f64, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let sb = f.support();
    let d = sb.dim();
    if fm.metric().is_euclidean() {
        // exact preimage: x − 2tξ ∈ X-box
        let mut lo = sb.xi_lo.clone();
        let mut hi = sb.xi_hi.clone();
        for k in 0..d {
            if t == 0.0 {
                if x[k] < sb.x_lo[k] || x[k] > sb.x_hi[k] {
                    return None;
                }
                continue;
            }
            let (a, b) = ((x[k] - sb.x_hi[k]) / (2.0 * t), (x[k] - sb.x_lo[k]) / (2.0 * t));
            lo[k] = lo[k].max(a.min(b));
            hi[k] = hi[k].min(a.max(b));
            if lo[k] >= hi[k] {
                return None;
            }
        }
        return Some((lo, hi));
    }
    // energy is conserved: λ|ξ|² ≤ p ≤ Λ|η|², and speeds are at most 2Λ|η|
    let (lam, big) = fm.inverse_bounds();
    let eta = sb.xi_radius();
    let reach = 2.0 * big * eta * t.abs();
    let dist2: f64 = (0..d)
        .map(|k| (sb.x_lo[k] - x[k]).max(x[k] - sb.x_hi[k]).max(0.0).powi(2))
        .sum();
    if dist2.sqrt() > reach {
        return None;
    }
    let r = (big / lam).sqrt() * eta;
    Some((vec![-r; d], vec![r; d]))
}

/// `ρ(t, x) = ∫ f(e^{−tH_p}(x, ξ)) dξ` by tensor Gauss–Legendre quadrature.
pub fn velocity_average(f: &PhaseField, fm: &FlowMap, t: f64, x: &[f64], quad: &VelocityQuadrature) -> Result<f64> {
    let Some((lo, hi)) = velocity_box(f, fm, t, x) else {
        return Ok(0.0);
    };
    let rule = TensorRule::boxed(quad.order, quad.panels, &lo, &hi);
    let tr = propagate_field(f, fm, t);
    let mut acc = 0.0;
    let mut err = None;
    rule.for_each(|xi, w| {
        if err.is_some() {
            return;
        }
        match tr.eval(x, xi) {
            Ok(v) => acc += w * v,
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

/// `‖f‖_{L^a}` over phase space by tensor quadrature on the support box (`a = ∞` gives the node maximum).
pub fn lp_norm(f: &PhaseField, a: f64, order: usize, panels: usize) -> f64 {
    let (lo, hi) = f.support().phase_bounds();
    let rule = TensorRule::boxed(order, panels, &lo, &hi);
    if a.is_infinite() {
        let mut m = 0.0f64;
        rule.for_each(|z, _| m = m.max(f.eval_z(z).abs()));
        return m;
    }
    let mut acc = 0.0;
    rule.for_each(|z, w| acc += w * f.eval_z(z).abs().powf(a));
    acc.powf(1.0 / a)
}

/// `‖f ∘ e^{−tH_p}‖_{L^a}` for several exponents, by the change of variables
/// `w = e^{tH_p}(z)`: each node `z` of the support rule is pushed forward,
/// the transported field is evaluated at `w` through an independent backward
/// flow, and the weight carries `|det ∂w/∂z|`.
pub fn transported_lp_norms(
    f: &PhaseField,
    fm: &FlowMap,
    t: f64,
    exponents: &[f64],
    order: usize,
    panels: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = f.support().phase_bounds();
    let rule = TensorRule::boxed(order, panels, &lo, &hi);
    let mut sums = vec![0.0; exponents.len()];
    let mut maxes = vec![0.0f64; exponents.len()];
    let tr = propagate_field(f, fm, t);
    let d = f.dim();
    let mut err = None;
    rule.for_each(|z, w| {
        if err.is_some() {
            return;
        }
        let res = (|| -> Result<()> {
            let (zt, jac) = fm.evaluate_with_jacobian(t, z)?;
            let v = tr.eval(&zt[..d], &zt[d..])?.abs();
            for (i, a) in exponents.iter().enumerate() {
                if a.is_infinite() {
                    maxes[i] = maxes[i].max(v);
                } else {
                    sums[i] += w * v.powf(*a) * jac.det.abs();
                }
            }
            Ok(())
        })();
        if let Err(e) = res {
            err = Some(e);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(exponents
        .iter()
        .enumerate()
        .map(|(i, a)| if a.is_infinite() { maxes[i] } else { sums[i].powf(1.0 / a) })
        .collect())
}

/// One level of a nested grid: number of points and cell measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridLevel {
    pub count: usize,
    pub cell: f64,
}

/// Nested Riemann-sum norm, outermost level first; the innermost level is
/// reduced first. Infinite exponents take maxima.
pub fn mixed_norm(values: &[f64], levels: &[GridLevel], exponents: &[f64]) -> Result<f64> {
    if levels.is_empty() || levels.iter().any(|l| l.count == 0) || values.is_empty() {
        return Err(LabError::EmptyGrid);
    }
    if levels.len() != exponents.len() {
        return Err(LabError::Params("one exponent per grid level required".into()));
    }
    let total: usize = levels.iter().map(|l| l.count).product();
    if total != values.len() {
        return Err(LabError::Params(format!("{} values for a grid of {total}", values.len())));
    }
    let mut cur: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    for (level, &p) in levels.iter().zip(exponents).rev() {
        cur = cur
            .chunks(level.count)
            .map(|c| {
                if p.is_infinite() {
                    c.iter().copied().fold(0.0, f64::max)
                } else {
                    (c.iter().map(|v| v.powf(p)).sum::<f64>() * level.cell).powf(1.0 / p)
                }
            })
            .collect();
    }
    Ok(cur[0])
}

/// `∫_0^t F(s) ∘ e^{−(t−s)H_p}(z) ds` by the composite trapezoid rule on `n` intervals.
pub fn duhamel_average(
    source: &dyn Fn(f64, &[f64]) -> f64,
    fm: &FlowMap,
    t: f64,
    n: usize,
    z: &[f64],
) -> Result<f64> {
    if n == 0 {
        return Err(LabError::EmptyGrid);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = t / n as f64;
    let mut acc = 0.0;
    for j in 0..=n {
        let s = j as f64 * h;
        let w = if j == 0 || j == n { 0.5 * h } else { h };
        let back = fm.evaluate(-(t - s), z)?;
        acc += w * source(s, &back);
    }
    Ok(acc)
}

/// Densities `ρ(t_i, x_j)` on a time and space grid, time-major.
pub fn density_grid(
    f: &PhaseField,
    fm: &FlowMap,
    times: &[f64],
    xs: &[Vec<f64>],
    quad: &VelocityQuadrature,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len() * xs.len());
    for &t in times {
        for x in xs {
            out.push(velocity_average(f, fm, t, x, quad)?);
        }
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SupportBox;
    use crate::quad::Rule1d;
    use crate::metric::{GluedMetricParams, MetricField, glued_sphere_metric};

    fn euclid(d: usize) -> FlowMap {
        FlowMap::new(MetricField::euclidean(d).unwrap())
    }

    #[test]
    fn interval_intersection_example() {
        let f = PhaseField::indicator(SupportBox::symmetric(1, 1.0, 1.0));
        let rho = velocity_average(&f, &euclid(1), 1.0, &[0.0], &VelocityQuadrature::default()).unwrap();
        assert!((rho - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_field_and_zero_time() {
        let q = VelocityQuadrature::default();
        let fm = euclid(2);
        assert_eq!(velocity_average(&PhaseField::zero(2), &fm, 3.0, &[0.1, 0.2], &q).unwrap(), 0.0);
        let f = PhaseField::indicator(SupportBox::symmetric(2, 1.0, 0.5));
        assert!((velocity_average(&f, &fm, 0.0, &[0.2, -0.3], &q).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(velocity_average(&f, &fm, 0.0, &[1.2, -0.3], &q).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_transport_is_shift() {
        let f = PhaseField::smooth_bump(&[0.0], 1.0, &[0.5], 0.5);
        let fm = euclid(1);
        let tr = propagate_field(&f, &fm, 0.7);
        let (x, q) = (0.9, 0.6);
        assert!((tr.eval(&[x], &[q]).unwrap() - f.eval(&[x - 1.4 * q], &[q])).abs() < 1e-15);
    }

    #[test]
    fn mixed_norm_basics() {
        let ones = vec![1.0; 8 * 8 * 8];
        let lv = [GridLevel { count: 8, cell: 1.0 / 8.0 }; 3];
        assert!((mixed_norm(&ones, &lv, &[2.0, 3.0, 1.5]).unwrap() - 1.0).abs() < 1e-14);
        // q = ∞ over two slices with norms 2 and 3
        let v = [2.0, 3.0];
        let lv = [GridLevel { count: 2, cell: 1.0 }, GridLevel { count: 1, cell: 1.0 }];
        assert_eq!(mixed_norm(&v, &lv, &[f64::INFINITY, 2.0]).unwrap(), 3.0);
        assert!(matches!(mixed_norm(&[], &[], &[]), Err(LabError::EmptyGrid)));
    }

    #[test]
    fn liouville_direct_grid_one_dimension() {
        // transported L² norm by a direct grid over the transported support
        let f = PhaseField::poly_bump(&[0.0], 1.0, &[0.5], 0.5, 2);
        let fm = euclid(1);
        let t = 2.0;
        let tr = propagate_field(&f, &fm, t);
        let (xr, qr) = (Rule1d::composite(8, 40, -1.0, 5.0), Rule1d::composite(8, 4, 0.0, 1.0));
        let mut acc = 0.0;
        for (x, wx) in xr.nodes.iter().zip(&xr.weights) {
            for (q, wq) in qr.nodes.iter().zip(&qr.weights) {
                acc += wx * wq * tr.eval(&[*x], &[*q]).unwrap().powi(2);
            }
        }
        let reference = lp_norm(&f, 2.0, 12, 1);
        assert!((acc.sqrt() / reference - 1.0).abs() < 1e-6, "{} vs {reference}", acc.sqrt());
    }

    #[test]
    fn glued_norms_preserved() {
        let fm = FlowMap::new(glued_sphere_metric(GluedMetricParams::default()).unwrap());
        let f = PhaseField::poly_bump(&[0.0, 0.0], 0.3, &[1.0, 0.0], 0.5, 2);
        let norms = transported_lp_norms(&f, &fm, 1.0, &[1.0, 2.0], 5, 1).unwrap();
        for (a, n) in [1.0, 2.0].iter().zip(norms) {
            let r = lp_norm(&f, *a, 8, 1);
            assert!((n / r - 1.0).abs() < 1e-3, "a={a}: {n} vs {r}");
        }
    }

    #[test]
    fn duhamel_small_time_and_zero() {
        let f = PhaseField::smooth_bump(&[0.0], 1.0, &[0.0], 1.0);
        let fm = euclid(1);
        let z = [0.2, 0.1];
        assert_eq!(duhamel_average(&|_, _| 0.0, &fm, 1.0, 10, &z).unwrap(), 0.0);
        let src = |_s: f64, w: &[f64]| f.eval_z(w);
        for t in [1e-2, 5e-3] {
            let v = duhamel_average(&src, &fm, t, 4, &z).unwrap();
            assert!((v - t * f.eval_z(&z)).abs() < 2.0 * t * t);
        }
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }
}
