use std::f64::consts::PI;

use fpt_core::quadrature::gauss_legendre;
use fpt_core::*;
use num_complex::Complex64;

type C64 = Complex64;

fn euler() -> InversionParams {
    InversionParams::default()
}

fn stehfest() -> InversionParams {
    InversionParams { method: InversionMethod::GaverStehfest, terms: 16, ..Default::default() }
}

/// Transform/original pairs; several have a branch point at the origin.
fn known_pairs() -> Vec<(&'static str, Box<dyn Fn(C64) -> C64>, Box<dyn Fn(f64) -> f64>)> {
    let one = C64::new(1.0, 0.0);
    vec![
        ("1/s", Box::new(move |s| one / s), Box::new(|_| 1.0)),
        ("1/(s+1)", Box::new(move |s| one / (s + 1.0)), Box::new(|t| (-t).exp())),
        ("1/s^2", Box::new(move |s| one / (s * s)), Box::new(|t| t)),
        ("1/(s+2)^2", Box::new(move |s| one / ((s + 2.0) * (s + 2.0))), Box::new(|t| t * (-2.0 * t).exp())),
        ("1/sqrt(s)", Box::new(move |s| one / s.sqrt()), Box::new(|t| 1.0 / (PI * t).sqrt())),
        (
            "exp(-sqrt(s))/sqrt(s)",
            Box::new(move |s| (-s.sqrt()).exp() / s.sqrt()),
            Box::new(|t| (-1.0 / (4.0 * t)).exp() / (PI * t).sqrt()),
        ),
        (
            "exp(-sqrt(s))",
            Box::new(move |s| (-s.sqrt()).exp()),
            Box::new(|t| (-1.0 / (4.0 * t)).exp() / (2.0 * (PI * t * t * t).sqrt())),
        ),
        ("1/(s^2+1)", Box::new(move |s| one / (s * s + 1.0)), Box::new(|t| t.sin())),
    ]
}

#[test]
fn known_pairs_to_1e_8() {
    for (name, f, exact) in known_pairs() {
        for t in [0.5, 1.0, 3.0] {
            let v = invert_laplace(|s| Ok(f(s.value())), t, &euler()).unwrap();
            let e = exact(t);
            assert!((v - e).abs() < 1e-8, "{name} at t={t}: {v} vs {e}");
        }
    }
}

#[test]
fn documented_inversion_examples() {
    let one = C64::new(1.0, 0.0);
    let v = invert_laplace(|s| Ok(one / s.value()), 3.0, &euler()).unwrap();
    assert!((v - 1.0).abs() < 1e-8);
    let v = invert_laplace(|s| Ok(one / (s.value() + 1.0)), 1.0, &euler()).unwrap();
    assert!((v - 0.367879441171).abs() < 1e-8);
    let v = invert_laplace(|s| Ok(one / s.value().sqrt()), 1.0, &euler()).unwrap();
    assert!((v - 0.564189583548).abs() < 1e-8);
}

#[test]
fn stehfest_rule_on_smooth_pairs() {
    let one = C64::new(1.0, 0.0);
    let v = invert_laplace(|s| Ok(one / (s.value() + 1.0)), 1.0, &stehfest()).unwrap();
    assert!((v - (-1.0f64).exp()).abs() < 1e-6);
    let v = invert_laplace(|s| Ok(one / s.value().sqrt()), 2.0, &stehfest()).unwrap();
    assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6);
}

#[test]
fn driftless_heat_kernels() {
    let d = DriftSpec::new(0.0, 0.0, 1.0).unwrap();
    let p = transition_density(System::Free, &d, 1.0, 0.0, 0.0, &euler()).unwrap();
    assert!((p.value - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6, "{}", p.value);
    let p = transition_density(System::Reflected, &d, 1.0, 0.0, 0.0, &euler()).unwrap();
    assert!((p.value - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-6, "{}", p.value);
    // Off-diagonal values against the Gaussian and its reflection.
    let gauss = |t: f64, z: f64| (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    for (x, y, t) in [(0.3, 1.1, 0.7), (1.5, 0.2, 2.0)] {
        let p = transition_density(System::Free, &d, t, x, y, &euler()).unwrap();
        assert!((p.value - gauss(t, y - x)).abs() < 1e-8);
        let p = transition_density(System::Reflected, &d, t, x, y, &euler()).unwrap();
        assert!((p.value - gauss(t, y - x) - gauss(t, y + x)).abs() < 1e-8);
    }
}

/// Composite Gauss-Legendre over `[lower, upper]`.
fn panels(lower: f64, upper: f64, n_panels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let h = (upper - lower) / n_panels as f64;
    (0..n_panels)
        .flat_map(|i| gauss_legendre(nodes, lower + i as f64 * h, lower + (i + 1) as f64 * h))
        .collect()
}

fn broken() -> DriftSpec {
    DriftSpec::new(0.4, -0.2, 1.0).unwrap()
}

#[test]
fn densities_normalize() {
    let d = broken();
    for system in System::ALL {
        for (t, x) in [(0.5, 0.5), (1.0, 1.0), (2.0, 1.7)] {
            let row = DensityRow::new(system, &d, t, x, &euler()).unwrap();
            let (lo, hi) = match system {
                System::Free => (x - 6.0, x + 6.0),
                System::Reflected => (0.0, x + 6.0),
            };
            // Panel edges at c and x, where the density has kinks.
            let mut cuts = vec![lo, d.c, x, hi];
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut inner = 0.0;
            let mut clamp = 0.0f64;
            for w in cuts.windows(2) {
                for (y, wt) in panels(w[0], w[1], 24, 12) {
                    let p = row.density(y).unwrap();
                    clamp = clamp.max(p.clamped);
                    inner += wt * p.value;
                }
            }
            let above = row.upper_tail(hi).unwrap();
            let below = match system {
                System::Free => 1.0 - row.upper_tail(lo).unwrap(),
                System::Reflected => 0.0,
            };
            let total = inner + above + below;
            assert!((total - 1.0).abs() < 1e-5, "{system:?} t={t} x={x}: {total}");
            assert!(clamp <= 1e-6);
        }
    }
}

#[test]
fn euler_and_stehfest_agree_on_densities() {
    let d = broken();
    let checked = InversionParams::default().with_cross_check();
    for system in System::ALL {
        for t in [0.5, 1.0, 2.0] {
            for x in [0.25, 1.0, 1.5] {
                let row = DensityRow::new(system, &d, t, x, &checked).unwrap();
                for y in [0.1, 0.6, 1.0, 1.4, 2.5] {
                    let e = transition_density(system, &d, t, x, y, &euler()).unwrap().value;
                    let c = row.density(y).unwrap_or_else(|err| panic!("{system} ({t},{x},{y}): {err}"));
                    assert_eq!(c.value, e);
                }
            }
        }
    }
}

#[test]
fn stehfest_primary_is_checked_by_euler() {
    let d = DriftSpec::new(0.0, 0.0, 1.0).unwrap();
    let p = InversionParams { cross_check: true, ..stehfest() };
    let v = transition_density(System::Free, &d, 1.0, 0.0, 0.0, &p).unwrap().value;
    assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6);
}

#[test]
fn chapman_kolmogorov() {
    // One fixed draw of generic parameters.
    let d = DriftSpec::new(-0.37, 0.61, 0.83).unwrap();
    let (t1, t2, x, y) = (0.45, 0.7, 0.52, 1.31);
    for system in System::ALL {
        let first = DensityRow::new(system, &d, t1, x, &euler()).unwrap();
        let direct = transition_density(system, &d, t1 + t2, x, y, &euler()).unwrap().value;
        let (lo, hi) = match system {
            System::Free => (-6.0, 7.0),
            System::Reflected => (0.0, 7.0),
        };
        let mut cuts = vec![lo, d.c, x, y, hi];
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            for (z, wt) in panels(w[0], w[1], 6, 12) {
                let p1 = first.density(z).unwrap().value;
                let p2 = transition_density(system, &d, t2, z, y, &euler()).unwrap().value;
                total += wt * p1 * p2;
            }
        }
        assert!((total - direct).abs() < 1e-4, "{system:?}: {total} vs {direct}");
    }
}

#[test]
fn clamping_is_tiny_far_in_the_tail() {
    let d = broken();
    let row = DensityRow::new(System::Free, &d, 0.2, 0.0, &euler()).unwrap();
    for r in row.tabulate(&[-6.0, -4.0, 4.0, 6.0, 9.0]) {
        let p = r.unwrap();
        assert!(p.value >= 0.0 && p.clamped <= 1e-6);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let d = broken();
    assert!(transition_density(System::Free, &d, 0.0, 0.0, 0.0, &euler()).is_err());
    assert!(transition_density(System::Reflected, &d, 1.0, -0.1, 0.0, &euler()).is_err());
    let bad = InversionParams { terms: 5, ..Default::default() };
    assert!(invert_laplace(|s| Ok(s.value().inv()), 1.0, &bad).is_err());
    let bad = InversionParams { method: InversionMethod::GaverStehfest, terms: 20, ..Default::default() };
    assert!(invert_laplace(|s| Ok(s.value().inv()), 1.0, &bad).is_err());
}
