//! Gauss-Legendre rules and an adaptive Gauss-Kronrod (7/15) integrator.

use crate::error::{FptError, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[lower, upper]`.
pub fn gauss_legendre(n: usize, lower: f64, upper: f64) -> Vec<(f64, f64)> {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let half = 0.5 * (upper - lower);
    let mid = 0.5 * (upper + lower);
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(z) and P_n'(z) by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let step = pn / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.push((mid - half * z, half * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * half, (k - g).abs() * half)
}

/// Tolerances and recursion limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-12, max_depth: 40 }
    }
}

/// Adaptive Gauss-Kronrod integral over `[lower, upper]`. An infinite upper
/// limit is mapped to the unit interval by `t = lower + u / (1 - u)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lower: f64,
    upper: f64,
    opts: QuadOptions,
) -> Result<f64> {
    if upper == f64::INFINITY {
        let mut g = |u: f64| {
            let v = 1.0 - u;
            f(lower + u / v) / (v * v)
        };
        return adapt(&mut g, 0.0, 1.0, opts.abs_tol, opts, opts.max_depth);
    }
    if !(lower.is_finite() && upper.is_finite()) {
        return Err(FptError::Quadrature(format!("unsupported interval [{lower}, {upper}]")));
    }
    adapt(&mut f, lower, upper, opts.abs_tol, opts, opts.max_depth)
}

fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    opts: QuadOptions,
    depth: u32,
) -> Result<f64> {
    let (value, err) = kronrod15(f, a, b);
    if !value.is_finite() {
        return Err(FptError::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    if err <= abs_tol.max(opts.rel_tol * value.abs()) {
        return Ok(value);
    }
    if depth == 0 {
        return Err(FptError::Quadrature(format!(
            "error estimate {err:e} on [{a}, {b}] after maximum subdivision"
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * abs_tol, opts, depth - 1)? + adapt(f, m, b, 0.5 * abs_tol, opts, depth - 1)?)
}
