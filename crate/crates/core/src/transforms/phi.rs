//! The four killed transforms at the jump time `T1`:
//!
//! `Phi1 = E[e^{-a X(T1) - theta T1}; X(T1) < c]`, `Phi2` the same on
//! `X(T1) >= c`, and `Phi3`, `Phi4` their restrictions to paths that reached
//! `{0, b}` (free) or `b` (reflected) before `T1`.
//!
//! With `s = lambda + theta`, `D_i = s + a mu_i - a^2/2` and `w(x) =
//! e^{-a min(x, c)}`, integrating the generator against `e^{-a y}` on each
//! side of `c` gives
//!
//! ```text
//! D1 Phi1 = lambda w(x) - s e^{-ac} g - lambda a g1 + (lambda a / 2) e^{-ac} G(x, c)
//! D2 Phi2 = lambda (e^{-ax} - e^{-ac}) 1{x >= c} + s e^{-ac} g - (lambda a / 2) e^{-ac} G(x, c)
//! ```
//!
//! where `G = G_s`, `g = lambda int_c^inf G(x, y) dy`, and `g1 = G(x, 0) / 2`
//! is the local-time term present only for the reflected process.

use crate::error::{invalid, FptError, Result};
use crate::greens::GreenKernel;
use crate::spectral::{DriftSpec, Frequency, System};

use super::boundary::BoundarySpec;
use super::exit::{check_interval, ExitPair, HitRatio};

/// Denominators smaller than this are treated as sitting on a pole.
pub const POLE_GUARD: f64 = 1e-8;

/// Offsets for the symmetric Richardson limit at a removable pole.
pub const RICHARDSON_STEPS: [f64; 3] = [1e-4, 5e-5, 2.5e-5];

/// Largest tolerated disagreement between the two first-level extrapolants.
pub const RICHARDSON_SPREAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GValues {
    /// `g = E[e^{-theta T1}; X(T1) >= c]`.
    Free { g: f64 },
    /// `g0` as above for the reflected process; `g1 = G~_{theta+lambda}(x, 0) / 2`.
    Reflected { g0: f64, g1: f64 },
}

pub fn g_functions(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    theta: f64,
    x: f64,
) -> Result<GValues> {
    let inputs = PhiInputs::new(system, drift, boundary, theta, x)?;
    Ok(match system {
        System::Free => GValues::Free { g: inputs.g },
        System::Reflected => GValues::Reflected { g0: inputs.g, g1: inputs.g1 },
    })
}

/// Everything in the closed forms that does not depend on `alpha`.
#[derive(Debug, Clone, Copy)]
struct PhiInputs {
    system: System,
    drift: DriftSpec,
    lambda: f64,
    s: f64,
    x: f64,
    g: f64,
    g1: f64,
    gc: f64,
}

impl PhiInputs {
    fn new(system: System, drift: &DriftSpec, boundary: &BoundarySpec, theta: f64, x: f64) -> Result<Self> {
        boundary.validate()?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        system.check_state(x)?;
        let lambda = boundary.lambda;
        let s = lambda + theta;
        let kernel = GreenKernel::new(system, drift, Frequency::real(s)?)?;
        let g1 = match system {
            System::Free => 0.0,
            System::Reflected => 0.5 * kernel.eval(x, 0.0).re,
        };
        Ok(Self {
            system,
            drift: *drift,
            lambda,
            s,
            x,
            g: lambda * kernel.tail_mass(x, drift.c)?.re,
            g1,
            gc: kernel.eval(x, drift.c).re,
        })
    }

    fn denominators(&self, a: f64) -> (f64, f64) {
        let q = self.s - 0.5 * a * a;
        (q + a * self.drift.mu1, q + a * self.drift.mu2)
    }

    fn numerators(&self, a: f64) -> (f64, f64) {
        let Self { lambda, s, x, g, g1, gc, .. } = *self;
        let c = self.drift.c;
        let ec = (-a * c).exp();
        let w = if x < c { (-a * x).exp() } else { ec };
        let above = if x >= c { (-a * x).exp() - ec } else { 0.0 };
        let local = 0.5 * lambda * a * ec * gc;
        (lambda * w - s * ec * g - lambda * a * g1 + local, lambda * above + s * ec * g - local)
    }

    fn raw(&self, a: f64) -> (f64, f64) {
        let (n1, n2) = self.numerators(a);
        let (d1, d2) = self.denominators(a);
        (n1 / d1, n2 / d2)
    }

    fn pair(&self, a: f64) -> Result<(f64, f64)> {
        let (d1, d2) = self.denominators(a);
        let (mut p1, mut p2) = self.raw(a);
        if d1.abs() < POLE_GUARD || (self.system == System::Free && d1 < 0.0) {
            if self.system == System::Free {
                // The integral over (-inf, c) itself diverges here.
                return Err(FptError::Divergent(format!(
                    "alpha = {a} reaches mu1 + sqrt(mu1^2 + 2(lambda + theta)) = {}",
                    self.drift.mu1 + (self.drift.mu1 * self.drift.mu1 + 2.0 * self.s).sqrt()
                )));
            }
            p1 = removable_limit(|e| self.raw(e).0, a)?;
        }
        if d2.abs() < POLE_GUARD {
            p2 = removable_limit(|e| self.raw(e).1, a)?;
        }
        Ok((p1, p2))
    }
}

/// Symmetric-offset Richardson limit of `f` at `a`.
fn removable_limit(f: impl Fn(f64) -> f64, a: f64) -> Result<f64> {
    let [f1, f2, f3] = RICHARDSON_STEPS.map(|e| 0.5 * (f(a + e) + f(a - e)));
    let r1 = (4.0 * f2 - f1) / 3.0;
    let r2 = (4.0 * f3 - f2) / 3.0;
    let spread = (r2 - r1).abs();
    if !(spread <= RICHARDSON_SPREAD) {
        return Err(FptError::UnstableLimit { spread });
    }
    Ok((16.0 * r2 - r1) / 15.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("alpha must be nonnegative, got {alpha}")))
    }
}

/// `(Phi1, Phi2)` at an arbitrary start `z` (no killing at the boundary).
pub fn phi_pair(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    alpha: f64,
    theta: f64,
    z: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    PhiInputs::new(system, drift, boundary, theta, z)?.pair(alpha)
}

/// `[Phi1, Phi2, Phi3, Phi4]` for the free process started at `x` in `[0, b]`.
pub fn phi_quadruple(
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    alpha: f64,
    theta: f64,
    x: f64,
) -> Result<[f64; 4]> {
    boundary.validate()?;
    check_alpha(alpha)?;
    check_interval(theta, boundary.b, x)?;
    let at = |z| PhiInputs::new(System::Free, drift, boundary, theta, z)?.pair(alpha);
    let (p1, p2) = at(x)?;
    let (l1, l2) = at(0.0)?;
    let (u1, u2) = at(boundary.b)?;
    let (w1, w2) = ExitPair::new(drift, boundary.lambda + theta, boundary.b)?.at(x);
    Ok([p1, p2, l1 * w1 + u1 * w2, l2 * w1 + u2 * w2])
}

/// `[Phi~1, Phi~2, Phi~3, Phi~4]` for the reflected process started at `x` in `[0, b]`.
pub fn phi_tilde_quadruple(
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    alpha: f64,
    theta: f64,
    x: f64,
) -> Result<[f64; 4]> {
    boundary.validate()?;
    check_alpha(alpha)?;
    check_interval(theta, boundary.b, x)?;
    let at = |z| PhiInputs::new(System::Reflected, drift, boundary, theta, z)?.pair(alpha);
    let (p1, p2) = at(x)?;
    let (u1, u2) = at(boundary.b)?;
    let ratio = if x == boundary.b {
        1.0
    } else {
        HitRatio::new(drift, boundary.lambda + theta, boundary.b)?.at(x)
    };
    Ok([p1, p2, u1 * ratio, u2 * ratio])
}
