//! Property tests for the invariants of the flow, collision, quantization,
//! norm and I/O layers.

use kinlab::collision::{CollisionKernel, AngularFactor, collide_velocities};
use kinlab::config::parse_config;
use kinlab::error::LabError;
use kinlab::flow::FlowMap;
use kinlab::io::format_value;
use kinlab::kt::{Exponent, NormSpec, check_kt_admissible};
use kinlab::metric::{GluedMetricParams, glued_sphere_metric};
use kinlab::semiclassical::{GridQuantization, weyl_quantize_observable, density_of};
use kinlab::transport::{GridLevel, mixed_norm};
use kinlab::verify::kt_reference;
use proptest::prelude::*;
use std::sync::OnceLock;

fn glued() -> &'static FlowMap {
    static FM: OnceLock<FlowMap> = OnceLock::new();
    FM.get_or_init(|| FlowMap::new(glued_sphere_metric(GluedMetricParams::default()).unwrap()))
}

fn phase_point() -> impl Strategy<Value = [f64; 4]> {
    (0.0..0.25f64, 0.0..std::f64::consts::TAU, 0.5..2.0f64, 0.0..std::f64::consts::TAU)
        .prop_map(|(r, a, s, b)| [r * a.cos(), r * a.sin(), s * b.cos(), s * b.sin()])
}

fn unit_vector() -> impl Strategy<Value = Vec<f64>> {
    (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU)
        .prop_map(|(th, ph)| vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn flow_conserves_energy_and_volume(z in phase_point(), t in -20.0..20.0f64) {
        let fm = glued();
        let (zt, jac) = fm.evaluate_with_jacobian(t, &z).unwrap();
        let p = fm.energy(&z);
        prop_assert!((fm.energy(&zt) - p).abs() <= 1e-8 * p);
        prop_assert!((jac.det - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn flow_is_homogeneous(z in phase_point(), t in -10.0..10.0f64, lambda in 0.25..4.0f64) {
        let fm = glued();
        let lhs = fm.evaluate(t, &[z[0], z[1], lambda * z[2], lambda * z[3]]).unwrap();
        let base = fm.evaluate(lambda * t, &z).unwrap();
        let rhs = [base[0], base[1], lambda * base[2], lambda * base[3]];
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn flow_is_reversible(z in phase_point(), t in -10.0..10.0f64) {
        let fm = glued();
        let back = fm.evaluate(-t, &fm.evaluate(t, &z).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn collisions_conserve_momentum_and_energy(
        z in prop::collection::vec(-5.0..5.0f64, 3),
        zs in prop::collection::vec(-5.0..5.0f64, 3),
        w in unit_vector(),
    ) {
        let (a, b) = collide_velocities(&z, &zs, &w).unwrap();
        let e0: f64 = z.iter().chain(&zs).map(|v| v * v).sum();
        let e1: f64 = a.iter().chain(&b).map(|v| v * v).sum();
        prop_assert!((e1 - e0).abs() <= 1e-14 * e0.max(1.0));
        for k in 0..3 {
            prop_assert!((a[k] + b[k] - z[k] - zs[k]).abs() <= 1e-14 * e0.sqrt().max(1.0));
        }
        // an involution: colliding again with the same direction restores the pair
        let (c, d) = collide_velocities(&a, &b, &w).unwrap();
        for k in 0..3 {
            prop_assert!((c[k] - z[k]).abs() <= 1e-13 * (1.0 + e0.sqrt()));
            prop_assert!((d[k] - zs[k]).abs() <= 1e-13 * (1.0 + e0.sqrt()));
        }
    }

    #[test]
    fn non_unit_directions_are_rejected(scale in 1.001..3.0f64, w in unit_vector()) {
        let w: Vec<f64> = w.iter().map(|v| v * scale).collect();
        prop_assert!(matches!(collide_velocities(&[1.0, 0.0, 0.0], &[0.0; 3], &w), Err(LabError::NonUnit(_))));
    }

    #[test]
    fn kernel_rejects_gamma_outside_range(d in 1usize..=3, excess in 0.0..2.0f64) {
        prop_assert!(CollisionKernel::new(d, -(d as f64) - excess, 0.1, AngularFactor::Linear, 2, 4).is_err());
        prop_assert!(CollisionKernel::new(d, 1e-3 + excess, 0.1, AngularFactor::Linear, 2, 4).is_err());
    }

    #[test]
    fn kt_checker_matches_reference(
        d in 1u32..=4,
        ip in 0i64..=12, ir in 0i64..=12, ia in 0i64..=12, iq in 0i64..=12,
    ) {
        // reciprocals k/12 cover the finite and infinite exponents on a common lattice
        let e = |k: i64| Exponent::from_recip(num_rational::Rational64::new(k, 12)).unwrap();
        let (q, r, p, a) = (e(iq), e(ir), e(ip), e(ia));
        let exact = check_kt_admissible(&NormSpec { q, r, p, a }, d).admissible;
        let reference = kt_reference(q.to_f64(), r.to_f64(), p.to_f64(), a.to_f64(), d as f64);
        prop_assert_eq!(exact, reference);
    }

    #[test]
    fn equal_exponents_reduce_to_a_flat_norm(
        values in prop::collection::vec(-3.0..3.0f64, 12),
        p in 1.0..6.0f64,
    ) {
        let levels = [GridLevel { count: 3, cell: 0.5 }, GridLevel { count: 4, cell: 0.25 }];
        let nested = mixed_norm(&values, &levels, &[p, p]).unwrap();
        let flat = (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * 0.125).powf(1.0 / p);
        prop_assert!((nested - flat).abs() <= 1e-12 * flat.max(1.0));
    }

    #[test]
    fn csv_numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn unknown_keys_report_their_line(blank in 0usize..5, key in "[a-z]{3,8}\\.[a-z]{3,8}") {
        prop_assume!(parse_config(&format!("{key} = 1")).is_err());
        let text = format!("{}{key} = 1\n", "\n".repeat(blank));
        match parse_config(&text) {
            Err(LabError::Config { line, .. }) => prop_assert_eq!(line, blank + 1),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn real_symbols_quantize_to_hermitian_operators(
        c in -1.0..1.0f64, s in 0.3..2.0f64, k in 0.0..2.0f64, h in 0.1..0.5f64,
    ) {
        let gq = GridQuantization::new(24, 4.0, h).unwrap();
        let a = move |x: f64, z: f64| (-(x - c).powi(2) / s).exp() * (k * z).cos() + z * x;
        let op = weyl_quantize_observable(a, &gq);
        prop_assert!(op.hermitian_defect() <= 1e-12 * op.scale().max(1.0));
        // trace = Δx Σ ρ and equals the lattice phase-space sum over 2πh
        let rho = density_of(&op);
        let trace: f64 = gq.dx() * rho.iter().sum::<f64>();
        let mut lattice = 0.0;
        for j in 0..gq.n {
            for col in 0..2 * gq.n {
                lattice += a(gq.x(j), gq.zeta(col)) * gq.dx() * gq.dzeta();
            }
        }
        prop_assert!((trace - lattice / (2.0 * std::f64::consts::PI * h)).abs() <= 1e-10 * lattice.abs().max(1.0));
    }
}
