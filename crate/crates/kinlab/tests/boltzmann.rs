//! Boltzmann solver checks that need more than one run: uniqueness of the
//! gain-only fixed point and conservation of mass by the sandwich.

use kinlab::boltzmann::{KineticSolver, KsOptions, PhaseGrid};
use kinlab::collision::{AngularFactor, CollisionKernel};
use kinlab::field::PhaseField;
use kinlab::flow::FlowMap;
use kinlab::metric::MetricField;

fn solver(dim: usize, amplitude: f64) -> KineticSolver {
    let grid = PhaseGrid::new(dim, 5, 1.5, 7, 1.5).unwrap();
    let kernel = CollisionKernel::new(dim, -0.5, 0.5 * grid.hv(), AngularFactor::Linear, 2, 4).unwrap();
    let base = PhaseField::poly_bump(&vec![0.0; dim], 1.0, &vec![0.0; dim], 1.0, 2);
    let f0 = PhaseField::closed(base.support().clone(), true, move |x, v| amplitude * base.eval(x, v));
    let fm = FlowMap::new(MetricField::euclidean(dim).unwrap());
    KineticSolver::new(grid, vec![0.0, 0.5, 1.0, 2.0, 4.0], kernel, f0, &fm, KsOptions::default()).unwrap()
}

#[test]
fn gain_only_fixed_point_is_unique() {
    let s = solver(1, 0.05);
    let a = s.gain_only_solve().unwrap();
    let mut start = a.state.clone();
    for level in start.gain.iter_mut() {
        for v in level.iter_mut() {
            *v = 3.0 * *v + 0.01;
        }
    }
    let b = s.gain_only_solve_from(Some(start)).unwrap();
    let mut worst = 0.0f64;
    for k in 0..s.times().len() {
        for (x, y) in s.level_values(&a.state, k).iter().zip(s.level_values(&b.state, k)) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst <= 1e-10 * s.datum_sup(), "fixed points differ by {worst:e}");
}

#[test]
fn sandwich_brackets_the_gain_only_bound() {
    let s = solver(1, 0.05);
    let fplus = s.gain_only_solve().unwrap().state;
    let out = s.ks_iterate(&fplus).unwrap();
    assert!(out.converged);
    let last = s.times().len() - 1;
    let upper = s.level_values(&fplus, last);
    for (lo, up) in s.level_values(&out.pair.lower, last).iter().zip(&upper) {
        assert!(*lo >= 0.0 && *lo <= up + 1e-9 * s.datum_sup());
    }
    let gaps: Vec<f64> = out.history.iter().map(|h| h.sup_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
}
