use serde::{Deserialize, Serialize};

use crate::error::{FptError, Result};
use crate::greens::{GreenKernel, PiecewiseExpPayoff};
use crate::spectral::{DriftSpec, Frequency, System};

use super::boundary::{BoundarySpec, JointVariant, ReflectedReading, TransformQuery};
use super::exit::{ExitPair, HitRatio};

/// Node count at which continuous jump-law refinement gives up.
pub const MAX_JUMP_NODES: usize = 4096;

/// Change in the transform below which node doubling stops.
pub const JUMP_NODE_TOL: f64 = 1e-8;

/// `K_h = lambda [R h(x) - sum_j k_j R h(z_j)]`, where `R` is the resolvent at
/// `lambda + theta` and the `(z_j, k_j)` restart the process at the barrier
/// it was absorbed at.
#[derive(Debug, Clone)]
pub(crate) struct Killing {
    kernel: GreenKernel,
    lambda: f64,
    x: f64,
    restarts: Vec<(f64, f64)>,
}

impl Killing {
    /// `x` must lie strictly inside the absorbing interval.
    pub(crate) fn new(system: System, drift: &DriftSpec, boundary: &BoundarySpec, theta: f64, x: f64) -> Result<Self> {
        let s = boundary.lambda + theta;
        let b = boundary.b;
        let restarts = match system {
            System::Free => {
                let (w1, w2) = ExitPair::new(drift, s, b)?.at(x);
                vec![(0.0, w1), (b, w2)]
            }
            System::Reflected => vec![(b, HitRatio::new(drift, s, b)?.at(x))],
        };
        Ok(Self { kernel: GreenKernel::new(system, drift, Frequency::real(s)?)?, lambda: boundary.lambda, x, restarts })
    }

    pub(crate) fn apply(&self, h: &PiecewiseExpPayoff) -> Result<f64> {
        let mut total = self.kernel.integrate(self.x, h)?.re;
        for &(z, k) in &self.restarts {
            total -= k * self.kernel.integrate(z, h)?.re;
        }
        Ok(self.lambda * total)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(crate::error::invalid(format!("theta must be positive, got {theta}")))
    }
}

fn outside(system: System, b: f64, x: f64) -> Result<bool> {
    system.check_state(x)?;
    Ok(match system {
        System::Free => x <= 0.0 || x >= b,
        System::Reflected => x >= b,
    })
}

/// `E_x[e^{-theta T1} h(X(T1)); tau >= T1]`.
pub fn killed_expectation(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    theta: f64,
    x: f64,
    h: &PiecewiseExpPayoff,
) -> Result<f64> {
    drift.validate()?;
    boundary.validate()?;
    check_theta(theta)?;
    if outside(system, boundary.b, x)? {
        return Ok(0.0);
    }
    Killing::new(system, drift, boundary, theta, x)?.apply(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLt {
    pub value: f64,
    /// The start was on or beyond the barrier, so `tau = 0`.
    pub degenerate: bool,
}

/// `E_x[e^{-alpha X(tau) - theta tau}]` against the jumping boundary.
pub fn joint_lt(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    query: &TransformQuery,
    variant: JointVariant,
) -> Result<JointLt> {
    drift.validate()?;
    boundary.validate()?;
    query.validate()?;
    if system == System::Reflected {
        drift.require_positive_threshold()?;
    }
    let TransformQuery { alpha, theta, x } = *query;
    let (b, lambda) = (boundary.b, boundary.lambda);
    if outside(system, b, x)? {
        let value = if x <= 0.0 && system == System::Free { 1.0 } else { (-alpha * b).exp() };
        return Ok(JointLt { value, degenerate: true });
    }

    let s = lambda + theta;
    let base = match system {
        System::Free => {
            let (w1, w2) = ExitPair::new(drift, s, b)?.at(x);
            w1 + (-alpha * b).exp() * w2
        }
        System::Reflected => (-alpha * b).exp() * HitRatio::new(drift, s, b)?.at(x),
    };

    let killing = Killing::new(system, drift, boundary, theta, x)?;
    let r = variant.rate.rate(lambda, theta);
    let constant_reading = system == System::Reflected && variant.reading == ReflectedReading::StartingPoint;
    let k_one = if constant_reading { killing.apply(&PiecewiseExpPayoff::indicator(0.0, b)?)? } else { 0.0 };

    let post_jump = |y: f64| -> Result<f64> {
        let top = b + y;
        let discount = (-alpha * top).exp();
        match system {
            System::Free => {
                let h = PiecewiseExpPayoff::new(ExitPair::new(drift, r, top)?.segments(1.0, discount, 0.0, b))?;
                killing.apply(&h)
            }
            System::Reflected => {
                let ratio = HitRatio::new(drift, r, top)?;
                if constant_reading {
                    Ok(discount * ratio.at(x) * k_one)
                } else {
                    killing.apply(&PiecewiseExpPayoff::new(ratio.segments(discount, 0.0, b))?)
                }
            }
        }
    };
    let jump_sum = |nodes: &[(f64, f64)]| -> Result<f64> {
        let mut acc = 0.0;
        for &(y, w) in nodes {
            acc += w * post_jump(y)?;
        }
        Ok(acc)
    };

    let law = &boundary.jump_law;
    let third = if law.is_continuous() {
        let mut n = law.nodes();
        let mut prev = jump_sum(&law.discretize(n))?;
        loop {
            if 2 * n > MAX_JUMP_NODES {
                return Err(FptError::Quadrature(format!(
                    "jump-law integral still moving at {n} nodes"
                )));
            }
            n *= 2;
            let next = jump_sum(&law.discretize(n))?;
            if (next - prev).abs() < JUMP_NODE_TOL {
                break next;
            }
            prev = next;
        }
    } else {
        jump_sum(&law.discretize(0))?
    };
    Ok(JointLt { value: base + third, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::JumpLaw;

    fn setup() -> (DriftSpec, BoundarySpec) {
        (DriftSpec::new(0.4, -0.2, 1.0).unwrap(), BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap())
    }

    #[test]
    fn constant_payoff_killed_expectation() {
        let (d, bd) = setup();
        let one = PiecewiseExpPayoff::indicator(0.0, 2.0).unwrap();
        let k = killed_expectation(System::Free, &d, &bd, 0.5, 0.8, &one).unwrap();
        let (w1, w2) = crate::transforms::two_sided_exit_lt(&d, 1.5, 2.0, 0.8).unwrap();
        assert!((k - (1.0 / 1.5) * (1.0 - w1 - w2)).abs() < 1e-13);
        assert_eq!(killed_expectation(System::Free, &d, &bd, 0.5, 0.0, &one).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_starts() {
        let (d, bd) = setup();
        let v = JointVariant::default();
        let q = TransformQuery::new(0.3, 0.5, 2.0).unwrap();
        let r = joint_lt(System::Reflected, &d, &bd, &q, v).unwrap();
        assert!(r.degenerate && (r.value - (-0.6f64).exp()).abs() < 1e-15);
        let q = TransformQuery::new(0.3, 0.5, -1.0).unwrap();
        assert_eq!(joint_lt(System::Free, &d, &bd, &q, v).unwrap().value, 1.0);
        assert!(joint_lt(System::Reflected, &d, &bd, &q, v).is_err());
    }

    #[test]
    fn values_are_transforms() {
        let (d, bd) = setup();
        for system in [System::Free, System::Reflected] {
            for v in JointVariant::all(system) {
                let q = TransformQuery::new(0.3, 0.5, 1.0).unwrap();
                let psi = joint_lt(system, &d, &bd, &q, v).unwrap().value;
                assert!(psi > 0.0 && psi < 1.0, "{system} {v:?}: {psi}");
            }
        }
    }

    #[test]
    fn continuous_law_approaches_narrow_atom() {
        let (d, _) = setup();
        let narrow = BoundarySpec::new(2.0, 1.0, JumpLaw::Uniform { low: 0.999, high: 1.001, nodes: 8 }).unwrap();
        let atom = BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap();
        let q = TransformQuery::new(0.3, 0.5, 1.0).unwrap();
        let v = JointVariant::default();
        let a = joint_lt(System::Free, &d, &narrow, &q, v).unwrap().value;
        let b = joint_lt(System::Free, &d, &atom, &q, v).unwrap().value;
        assert!((a - b).abs() < 1e-6);
    }
}
