use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::piecewise::Segment;
use crate::spectral::{Direction, DriftSpec, Frequency, SpectralData, System};

type C64 = Complex64;

/// `w1(r; top, .)` and `w2(r; top, .)` on `[0, top]`, each as a combination
/// `k_phi * phi_r + k_psi * psi_r` of the free fundamental solutions.
#[derive(Debug, Clone)]
pub(crate) struct ExitPair {
    data: SpectralData,
    lower: (C64, C64),
    upper: (C64, C64),
}

impl ExitPair {
    pub(crate) fn new(drift: &DriftSpec, r: f64, top: f64) -> Result<Self> {
        let data = SpectralData::new(drift, Frequency::real(r)?)?;
        let psi = |x| data.eval(System::Free, Direction::Increasing, x);
        let phi = |x| data.eval(System::Free, Direction::Decreasing, x);
        let (psi0, phi0, psit, phit) = (psi(0.0), phi(0.0), psi(top), phi(top));
        let den1 = phi0 * psit - psi0 * phit;
        let den2 = phit * psi0 - psit * phi0;
        Ok(Self { lower: (psit / den1, -phit / den1), upper: (psi0 / den2, -phi0 / den2), data })
    }

    fn combine(&self, k: (C64, C64), x: f64) -> f64 {
        let psi = self.data.eval(System::Free, Direction::Increasing, x);
        let phi = self.data.eval(System::Free, Direction::Decreasing, x);
        (k.0 * phi + k.1 * psi).re
    }

    pub(crate) fn at(&self, x: f64) -> (f64, f64) {
        (self.combine(self.lower, x), self.combine(self.upper, x))
    }

    /// `k1 * w1 + k2 * w2` restricted to `[lower, upper)`.
    pub(crate) fn segments(&self, k1: f64, k2: f64, lower: f64, upper: f64) -> Vec<Segment> {
        let kphi = self.lower.0 * k1 + self.upper.0 * k2;
        let kpsi = self.lower.1 * k1 + self.upper.1 * k2;
        let phi = self.data.solution(System::Free, Direction::Decreasing);
        let psi = self.data.solution(System::Free, Direction::Increasing);
        phi.iter()
            .zip(psi.iter())
            .filter_map(|(f, p)| {
                let mut terms = f.scaled(kphi).terms;
                terms.extend(p.scaled(kpsi).terms);
                Segment::new(f.lower, f.upper, terms).clipped(lower, upper)
            })
            .collect()
    }
}

/// `psi~_r(.) / psi~_r(top)` for the reflected system.
#[derive(Debug, Clone)]
pub(crate) struct HitRatio {
    data: SpectralData,
    scale: C64,
}

impl HitRatio {
    pub(crate) fn new(drift: &DriftSpec, r: f64, top: f64) -> Result<Self> {
        drift.require_positive_threshold()?;
        let data = SpectralData::new(drift, Frequency::real(r)?)?;
        let scale = data.eval(System::Reflected, Direction::Increasing, top).inv();
        Ok(Self { data, scale })
    }

    pub(crate) fn at(&self, x: f64) -> f64 {
        (self.data.eval(System::Reflected, Direction::Increasing, x) * self.scale).re
    }

    /// `k * psi~_r / psi~_r(top)` restricted to `[lower, upper)`.
    pub(crate) fn segments(&self, k: f64, lower: f64, upper: f64) -> Vec<Segment> {
        self.data
            .solution(System::Reflected, Direction::Increasing)
            .iter()
            .filter_map(|s| s.scaled(self.scale * k).clipped(lower, upper))
            .collect()
    }
}

pub(crate) fn check_interval(theta: f64, b: f64, x: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("level b must be positive, got {b}")));
    }
    if !(0.0..=b).contains(&x) {
        return Err(invalid(format!("x = {x} lies outside [0, {b}]")));
    }
    Ok(())
}

/// `(E_x[e^{-theta R_0}; R_0 < R_b], E_x[e^{-theta R_b}; R_b < R_0])` for the
/// free process started in `[0, b]`.
pub fn two_sided_exit_lt(drift: &DriftSpec, theta: f64, b: f64, x: f64) -> Result<(f64, f64)> {
    drift.validate()?;
    check_interval(theta, b, x)?;
    if x == 0.0 {
        return Ok((1.0, 0.0));
    }
    if x == b {
        return Ok((0.0, 1.0));
    }
    Ok(ExitPair::new(drift, theta, b)?.at(x))
}

/// `E_x[e^{-theta R_b}]` for the reflected process, `psi~_theta(x) / psi~_theta(b)`.
pub fn reflected_hit_lt(drift: &DriftSpec, theta: f64, b: f64, x: f64) -> Result<f64> {
    drift.validate()?;
    check_interval(theta, b, x)?;
    if x == b {
        return Ok(1.0);
    }
    Ok(HitRatio::new(drift, theta, b)?.at(x))
}
