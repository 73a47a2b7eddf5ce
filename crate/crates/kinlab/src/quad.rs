//! Quadrature rules: Gauss–Legendre (tensor and composite) and adaptive
//! Gauss–Kronrod for complex-valued integrands.

use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{LabError, Result};

/// A one-dimensional rule with nodes and weights on a concrete interval.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Gauss–Legendre rule of `order` points on `[a, b]`.
    pub fn gauss(order: usize, a: f64, b: f64) -> Self {
        Self::composite(order, 1, a, b)
    }

    /// `panels` equal sub-intervals of `[a, b]`, each with a Gauss–Legendre rule.
    pub fn composite(order: usize, panels: usize, a: f64, b: f64) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let gl = GaussLegendre::new(order);
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(order.get() * panels);
        let mut weights = Vec::with_capacity(order.get() * panels);
        for k in 0..panels {
            let lo = a + k as f64 * width;
            for &(x, w) in gl.as_node_weight_pairs() {
                nodes.push(lo + 0.5 * (x + 1.0) * width);
                weights.push(0.5 * w * width);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Tensor product of 1-D rules; iterates over all multi-indices.
#[derive(Clone, Debug)]
pub struct TensorRule {
    pub axes: Vec<Rule1d>,
}

impl TensorRule {
    pub fn new(axes: Vec<Rule1d>) -> Self {
        Self { axes }
    }

    /// Same composite Gauss rule on every axis of a box.
    pub fn boxed(order: usize, panels: usize, lo: &[f64], hi: &[f64]) -> Self {
        Self::new(
            lo.iter()
                .zip(hi)
                .map(|(&a, &b)| Rule1d::composite(order, panels, a, b))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Rule1d::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(point, weight)` for every tensor node, in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        let d = self.axes.len();
        if d == 0 || self.is_empty() {
            return;
        }
        let mut idx = vec![0usize; d];
        let mut pt: Vec<f64> = self.axes.iter().map(|r| r.nodes[0]).collect();
        loop {
            let w: f64 = (0..d).map(|k| self.axes[k].weights[idx[k]]).product();
            f(&pt, w);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.axes[k].len() {
                    pt[k] = self.axes[k].nodes[idx[k]];
                    break;
                }
                idx[k] = 0;
                pt[k] = self.axes[k].nodes[0];
            }
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each(|p, w| acc += w * f(p));
        acc
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    ((kron * h), ((kron - gauss) * h).norm())
}

struct Panel {
    a: f64,
    b: f64,
    val: Complex64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub value: Complex64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod (7/15) over a list of breakpoints.
pub fn adaptive_gk(
    mut f: impl FnMut(f64) -> Complex64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Adaptive> {
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (Complex64::new(0.0, 0.0), 0.0);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (val, e) = gk15(&mut f, w[0], w[1]);
            total += val;
            err += e;
            heap.push(Panel { a: w[0], b: w[1], val, err: e });
        }
    }
    while err > abs_tol.max(rel_tol * total.norm()) {
        if heap.len() >= max_panels {
            return Err(LabError::Quadrature { achieved: err, panels: heap.len() });
        }
        let p = heap.pop().expect("non-empty panel heap");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, val: v2, err: e2 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|p| p.val).sum();
    let error = heap.iter().map(|p| p.err).sum();
    Ok(Adaptive { value, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let r = Rule1d::gauss(5, -1.0, 2.0);
        let v = r.integrate(|x| x.powi(9));
        assert!((v - (2f64.powi(10) - 1.0) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn tensor_rule_volume() {
        let t = TensorRule::boxed(3, 2, &[0.0, -1.0], &[2.0, 1.0]);
        assert!((t.integrate(|_| 1.0) - 4.0).abs() < 1e-14);
        assert!((t.integrate(|p| p[0] * p[1] * p[1]) - 4.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_oscillatory() {
        let r = adaptive_gk(|x| Complex64::from_polar(1.0, 50.0 * x), &[0.0, 1.0], 1e-13, 0.0, 10_000)
            .unwrap();
        let exact = (Complex64::from_polar(1.0, 50.0) - 1.0) / Complex64::new(0.0, 50.0);
        assert!((r.value - exact).norm() < 1e-12);
    }
}
