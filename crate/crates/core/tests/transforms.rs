use fpt_core::greens::{resolvent_integral, GreenKernel, PiecewiseExpPayoff};
use fpt_core::inversion::{transition_density, DensityRow, InversionParams};
use fpt_core::quadrature::{integrate, QuadOptions};
use fpt_core::spectral::{DriftSpec, Frequency, System};
use fpt_core::transforms::*;
use proptest::prelude::*;

fn spec(b: f64, lambda: f64) -> BoundarySpec {
    BoundarySpec::new(b, lambda, JumpLaw::degenerate(1.0)).unwrap()
}

/// `lambda * int e^{-alpha y} G_s(z, y) dy` over `[lower, upper)`.
fn resolvent_route(system: System, d: &DriftSpec, bd: &BoundarySpec, alpha: f64, theta: f64, z: f64, lower: f64, upper: f64) -> f64 {
    let h = PiecewiseExpPayoff::exponential(-alpha, lower, upper).unwrap();
    let s = Frequency::real(bd.lambda + theta).unwrap();
    bd.lambda * resolvent_integral(system, d, s, z, &h).unwrap().re
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Smallest `|D_i|` over the denominators; the closed forms lose digits near zero.
fn min_denominator(d: &DriftSpec, s: f64, alpha: f64) -> f64 {
    let q = s - 0.5 * alpha * alpha;
    (q + alpha * d.mu1).abs().min((q + alpha * d.mu2).abs())
}

fn params() -> impl Strategy<Value = (DriftSpec, BoundarySpec, f64, f64, f64)> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.2..1.8f64, 0.5..3.0f64, 0.2..3.0f64, 0.05..3.0f64, 0.05..0.95f64, 0.0..1.0f64)
        .prop_map(|(mu1, mu2, c, b, lambda, theta, xf, af)| {
            let d = DriftSpec::new(mu1, mu2, c).unwrap();
            let s = lambda + theta;
            let crit = mu1 + (mu1 * mu1 + 2.0 * s).sqrt();
            (d, spec(b, lambda), theta, xf * b, 0.9 * af * crit)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn alpha_zero_sum_rules((d, bd, theta, x, _a) in params()) {
        let want = bd.lambda / (bd.lambda + theta);
        let p = phi_quadruple(&d, &bd, 0.0, theta, x).unwrap();
        prop_assert!((p[0] + p[1] - want).abs() < 1e-12);
        let p = phi_tilde_quadruple(&d, &bd, 0.0, theta, x).unwrap();
        prop_assert!((p[0] + p[1] - want).abs() < 1e-12);
    }

    #[test]
    fn dominance_and_bounds((d, bd, theta, x, a) in params()) {
        // The free path may sit below 0 at T1, where e^{-alpha X} > 1, so
        // only Phi2 and Phi4 are bounded by 1 there.
        let free = phi_quadruple(&d, &bd, a, theta, x).unwrap();
        let refl = phi_tilde_quadruple(&d, &bd, a, theta, x).unwrap();
        for (p, capped) in [(free, [false, true, false, true]), (refl, [true; 4])] {
            for (v, cap) in p.iter().zip(capped) {
                prop_assert!(*v >= -1e-12, "{p:?}");
                prop_assert!(!cap || *v <= 1.0 + 1e-12, "{p:?}");
            }
            prop_assert!(p[2] <= p[0] + 1e-12 && p[3] <= p[1] + 1e-12, "{p:?}");
        }
        let free0 = phi_quadruple(&d, &bd, 0.0, theta, x).unwrap();
        prop_assert!(free0.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn closed_form_matches_resolvent_route((d, bd, theta, x, a) in params()) {
        prop_assume!(min_denominator(&d, bd.lambda + theta, a) > 1e-3);
        let c = d.c;
        let p = phi_quadruple(&d, &bd, a, theta, x).unwrap();
        prop_assert!(rel(p[0], resolvent_route(System::Free, &d, &bd, a, theta, x, f64::NEG_INFINITY, c)) < 1e-9);
        prop_assert!(rel(p[1], resolvent_route(System::Free, &d, &bd, a, theta, x, c, f64::INFINITY)) < 1e-9);
        let p = phi_tilde_quadruple(&d, &bd, a, theta, x).unwrap();
        prop_assert!(rel(p[0], resolvent_route(System::Reflected, &d, &bd, a, theta, x, 0.0, c)) < 1e-9);
        prop_assert!(rel(p[1], resolvent_route(System::Reflected, &d, &bd, a, theta, x, c, f64::INFINITY)) < 1e-9);
    }

    #[test]
    fn killed_expectation_matches_quadruple((d, bd, theta, x, a) in params()) {
        prop_assume!(min_denominator(&d, bd.lambda + theta, a) > 1e-3);
        let h = PiecewiseExpPayoff::exponential(-a, 0.0, bd.b).unwrap();
        let p = phi_quadruple(&d, &bd, a, theta, x).unwrap();
        let k = killed_expectation(System::Free, &d, &bd, theta, x, &h).unwrap();
        prop_assert!((k - (p[0] + p[1] - p[2] - p[3])).abs() < 1e-9 * (p[0] + p[1]));
        let p = phi_tilde_quadruple(&d, &bd, a, theta, x).unwrap();
        let k = killed_expectation(System::Reflected, &d, &bd, theta, x, &h).unwrap();
        prop_assert!((k - (p[0] + p[1] - p[2] - p[3])).abs() < 1e-9 * (p[0] + p[1]));
    }

    #[test]
    fn joint_transform_decreases_in_theta((d, bd, theta, x, a) in params()) {
        for system in [System::Free, System::Reflected] {
            for v in JointVariant::all(system) {
                let lo = joint_lt(system, &d, &bd, &TransformQuery::new(a, theta, x).unwrap(), v).unwrap().value;
                let hi = joint_lt(system, &d, &bd, &TransformQuery::new(a, theta * 1.5, x).unwrap(), v).unwrap().value;
                prop_assert!((0.0..=1.0).contains(&lo));
                prop_assert!(hi < lo + 1e-14, "{system} {v:?}: {hi} vs {lo}");
            }
        }
    }

    #[test]
    fn reflected_transform_increases_in_x((d, bd, theta, _x, a) in params()) {
        for v in JointVariant::all(System::Reflected) {
            let mut last = 0.0;
            for i in 0..=10 {
                let x = bd.b * i as f64 / 10.0;
                let q = TransformQuery::new(a, theta, x).unwrap();
                let psi = joint_lt(System::Reflected, &d, &bd, &q, v).unwrap().value;
                prop_assert!(psi >= last - 1e-14, "{v:?} x = {x}: {psi} < {last}");
                last = psi;
            }
        }
    }
}

#[test]
fn random_alpha_sweep_agrees_at_one_parameter_set() {
    let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
    let bd = spec(2.0, 1.0);
    let theta = 0.5;
    let crit = 0.4 + (0.16f64 + 3.0).sqrt();
    let mut checked = 0;
    for i in 0..100 {
        let a = crit * (i as f64 + 0.5) / 101.0;
        if min_denominator(&d, 1.5, a) < 1e-3 {
            continue;
        }
        for x in [0.3, 1.0, 1.7] {
            let p = phi_quadruple(&d, &bd, a, theta, x).unwrap();
            let r1 = resolvent_route(System::Free, &d, &bd, a, theta, x, f64::NEG_INFINITY, 1.0);
            assert!(rel(p[0], r1) < 1e-9, "alpha {a}: {} vs {r1}", p[0]);
            let p = phi_tilde_quadruple(&d, &bd, a, theta, x).unwrap();
            let r1 = resolvent_route(System::Reflected, &d, &bd, a, theta, x, 0.0, 1.0);
            assert!(rel(p[0], r1) < 1e-9, "alpha {a}: {} vs {r1}", p[0]);
        }
        checked += 1;
    }
    assert!(checked >= 95);
}

#[test]
fn uniform_drift_collapse() {
    let d = DriftSpec::new(0.35, 0.35, 1.0).unwrap();
    let bd = spec(2.0, 0.8);
    for (a, theta, x) in [(0.3, 0.5, 0.7), (1.1, 0.2, 1.5), (0.0, 1.0, 1.0)] {
        let p = phi_quadruple(&d, &bd, a, theta, x).unwrap();
        let whole = resolvent_route(System::Free, &d, &bd, a, theta, x, f64::NEG_INFINITY, f64::INFINITY);
        assert!(rel(p[0] + p[1], whole) < 1e-10);
        let s = bd.lambda + theta;
        assert!(rel(p[0] + p[1], bd.lambda * (-a * x).exp() / (s + 0.35 * a - 0.5 * a * a)) < 1e-10);
    }
}

#[test]
fn g_functions_match_time_domain() {
    let d = DriftSpec::new(0.5, -0.4, 1.0).unwrap();
    let bd = spec(2.0, 0.7);
    let theta = 0.6;
    let s = bd.lambda + theta;
    let inv = InversionParams::default();
    let opts = QuadOptions { abs_tol: 1e-8, rel_tol: 1e-8, max_depth: 30 };
    for x in [0.4, 1.3] {
        // g = lambda int e^{-s t} P_x(X_t >= c) dt
        let oracle = |system: System| {
            integrate(
                |t| {
                    let w = (-s * t).exp();
                    // Below t = 1e-3 the probability is within e^{-40} of its
                    // t = 0 limit, and the Bromwich nodes would overflow.
                    if t < 1e-3 {
                        return w * f64::from(u8::from(x >= d.c));
                    }
                    if w < 1e-300 {
                        return 0.0;
                    }
                    w * DensityRow::new(system, &d, t, x, &inv).unwrap().upper_tail(d.c).unwrap()
                },
                0.0,
                f64::INFINITY,
                opts,
            )
            .unwrap()
                * bd.lambda
        };
        let GValues::Free { g } = g_functions(System::Free, &d, &bd, theta, x).unwrap() else { panic!() };
        assert!((g - oracle(System::Free)).abs() < 1e-4);
        assert!((0.0..=bd.lambda / s).contains(&g));
        let GValues::Reflected { g0, g1 } = g_functions(System::Reflected, &d, &bd, theta, x).unwrap() else {
            panic!()
        };
        assert!((g0 - oracle(System::Reflected)).abs() < 1e-4);
        // g1 = (1 / 2 lambda) E[e^{-theta T1} p~(T1; x, 0)]
        let g1_oracle = 0.5
            * integrate(
                |t| {
                    let w = (-s * t).exp();
                    if t < 1e-3 || w < 1e-300 {
                        return 0.0;
                    }
                    w * transition_density(System::Reflected, &d, t, x, 0.0, &inv).unwrap().value
                },
                0.0,
                f64::INFINITY,
                opts,
            )
            .unwrap();
        assert!((g1 - g1_oracle).abs() < 1e-4, "{g1} vs {g1_oracle}");
        assert!(g1 >= 0.0);
    }
}

#[test]
fn reflected_hitting_is_certain_without_post_jump_killing() {
    let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
    let bd = spec(2.0, 1.0);
    for x in [0.0, 0.5, 1.5] {
        let q = TransformQuery::new(0.0, 1e-8, x).unwrap();
        let v = JointVariant::new(MVariant::ThetaOnly, ReflectedReading::PostJumpPosition);
        let psi = joint_lt(System::Reflected, &d, &bd, &q, v).unwrap().value;
        assert!((psi - 1.0).abs() < 1e-4, "x = {x}: {psi}");
    }
}

#[test]
fn small_jump_reduces_to_constant_boundary() {
    let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
    let (alpha, theta, x, b) = (0.3, 0.5, 1.0, 2.0);
    let (w1, w2) = two_sided_exit_lt(&d, theta, b, x).unwrap();
    let want = w1 + (-alpha * b).exp() * w2;
    let mut gaps = Vec::new();
    for y in [1e-2, 1e-3, 1e-4] {
        let bd = BoundarySpec::new(b, 1.0, JumpLaw::degenerate(y)).unwrap();
        let q = TransformQuery::new(alpha, theta, x).unwrap();
        let v = JointVariant::new(MVariant::ThetaOnly, ReflectedReading::default());
        gaps.push((joint_lt(System::Free, &d, &bd, &q, v).unwrap().value - want).abs());
    }
    assert!(gaps[2] < 1e-4 && gaps[2] < gaps[1] && gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn killed_expectation_vanishes_at_the_barriers() {
    let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
    let bd = spec(2.0, 1.0);
    let h = PiecewiseExpPayoff::exponential(-0.3, 0.0, 2.0).unwrap();
    for x in [1e-7, 2.0 - 1e-7] {
        assert!(killed_expectation(System::Free, &d, &bd, 0.5, x, &h).unwrap().abs() < 1e-6);
    }
}

#[test]
fn exit_transforms_match_classical_formulas() {
    let d = DriftSpec::new(0.0, 0.0, 0.7).unwrap();
    for (theta, b, x) in [(0.5, 2.0, 1.0), (1.3, 1.5, 0.2), (0.1, 3.0, 2.4)] {
        let k = (2.0f64 * theta).sqrt();
        let (w1, w2) = two_sided_exit_lt(&d, theta, b, x).unwrap();
        assert!((w1 - (k * (b - x)).sinh() / (k * b).sinh()).abs() < 1e-10);
        assert!((w2 - (k * x).sinh() / (k * b).sinh()).abs() < 1e-10);
        let h = reflected_hit_lt(&d, theta, b, x).unwrap();
        assert!((h - (k * x).cosh() / (k * b).cosh()).abs() < 1e-10);
    }
    // With drift mu the exit transform is e^{-mu x} sinh(k x) / (e^{-mu b} sinh(k b)), k = sqrt(mu^2 + 2 theta).
    let d = DriftSpec::new(0.3, 0.3, 1.0).unwrap();
    let (theta, b, x) = (0.8, 2.0, 0.6);
    let k = (0.09f64 + 1.6).sqrt();
    let (w1, w2) = two_sided_exit_lt(&d, theta, b, x).unwrap();
    assert!((w2 - (0.3 * (b - x)).exp() * (k * x).sinh() / (k * b).sinh()).abs() < 1e-10);
    assert!((w1 - (-0.3 * x).exp() * (k * (b - x)).sinh() / (k * b).sinh()).abs() < 1e-10);
}

#[test]
fn green_kernel_is_reused_consistently() {
    // g0 and the tail mass of the reflected kernel are the same object.
    let d = DriftSpec::new(0.2, 0.6, 0.8).unwrap();
    let bd = spec(2.0, 1.2);
    let k = GreenKernel::new(System::Reflected, &d, Frequency::real(1.2 + 0.4).unwrap()).unwrap();
    let GValues::Reflected { g0, g1 } = g_functions(System::Reflected, &d, &bd, 0.4, 0.5).unwrap() else { panic!() };
    assert!((g0 - 1.2 * k.tail_mass(0.5, 0.8).unwrap().re).abs() < 1e-15);
    assert!((g1 - 0.5 * k.eval(0.5, 0.0).re).abs() < 1e-15);
}
