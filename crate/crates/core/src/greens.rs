//! Green (resolvent) kernels of the free and reflected broken-drift motions.
//!
//! `G_s(x, y) = m(y) psi_s(min(x, y)) phi_s(max(x, y)) / w_s`. As a function
//! of `y` the kernel is a sum of exponentials on each interval cut by `x` and
//! `c`, so integrals against piecewise-exponential payoffs are done in closed
//! form.

use num_complex::Complex64;

use crate::error::{invalid, FptError, Result};
use crate::piecewise::{multiply, ExpTerm, Segment};
use crate::spectral::{speed_term, Direction, DriftSpec, Frequency, SpectralData, System};

type C64 = Complex64;

/// `h(y) = sum coeff * exp(rate * y)` on each of a list of ordered, disjoint
/// segments; zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpPayoff {
    segments: Vec<Segment>,
}

impl PiecewiseExpPayoff {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for seg in &segments {
            if seg.lower.is_nan() || seg.upper.is_nan() || !(seg.lower < seg.upper) {
                return Err(invalid(format!(
                    "payoff segment [{}, {}) is empty or malformed",
                    seg.lower, seg.upper
                )));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].lower < pair[0].upper {
                return Err(invalid("payoff segments must be ordered and disjoint"));
            }
        }
        Ok(Self { segments })
    }

    /// `1` on `[lower, upper)`.
    pub fn indicator(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![Segment::new(lower, upper, vec![ExpTerm::constant(C64::new(1.0, 0.0))])])
    }

    /// `exp(rate * y)` on `[lower, upper)`.
    pub fn exponential(rate: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![Segment::new(
            lower,
            upper,
            vec![ExpTerm::new(C64::new(1.0, 0.0), C64::new(rate, 0.0))],
        )])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn eval(&self, y: f64) -> C64 {
        self.segments
            .iter()
            .find(|s| s.contains(y))
            .map_or(C64::new(0.0, 0.0), |s| s.eval(y))
    }
}

/// Green kernel at one frequency; reuse it across many `(x, y)` pairs.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    system: System,
    data: SpectralData,
    psi: [Segment; 2],
    phi: [Segment; 2],
    inv_w: C64,
}

impl GreenKernel {
    pub fn new(system: System, drift: &DriftSpec, s: Frequency) -> Result<Self> {
        drift.validate()?;
        if system == System::Reflected {
            drift.require_positive_threshold()?;
        }
        let data = SpectralData::new(drift, s)?;
        let w = data.wronskian(system);
        if w.norm() == 0.0 || !w.is_finite() {
            return Err(invalid(format!("degenerate Wronskian {w} at s = {}", s.value())));
        }
        Ok(Self {
            system,
            psi: data.solution(system, Direction::Increasing),
            phi: data.solution(system, Direction::Decreasing),
            inv_w: w.inv(),
            data,
        })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.data
    }

    fn c(&self) -> f64 {
        self.data.drift.c
    }

    fn side(&self, y: f64) -> usize {
        usize::from(y >= self.c())
    }

    pub fn psi(&self, x: f64) -> C64 {
        self.psi[self.side(x)].eval(x)
    }

    pub fn phi(&self, x: f64) -> C64 {
        self.phi[self.side(x)].eval(x)
    }

    /// Kernel value; domain checks are the caller's job.
    pub fn eval(&self, x: f64, y: f64) -> C64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let m = speed_term(&self.data.drift, y >= self.c()).eval(y);
        m * self.psi(lo) * self.phi(hi) * self.inv_w
    }

    /// `y -> G(x, y)` as exponential terms, valid on an interval that contains
    /// `probe` and is not cut by `x` or `c`.
    fn kernel_terms(&self, x: f64, probe: f64) -> Vec<ExpTerm> {
        let side = self.side(probe);
        let m = [speed_term(&self.data.drift, side == 1)];
        if probe <= x {
            let k = self.phi(x) * self.inv_w;
            multiply(&m, &self.psi[side].terms).into_iter().map(|t| t.scaled(k)).collect()
        } else {
            let k = self.psi(x) * self.inv_w;
            multiply(&m, &self.phi[side].terms).into_iter().map(|t| t.scaled(k)).collect()
        }
    }

    /// `int G(x, y) h(y) dy` in closed form.
    pub fn integrate(&self, x: f64, payoff: &PiecewiseExpPayoff) -> Result<C64> {
        let floor = match self.system {
            System::Free => f64::NEG_INFINITY,
            System::Reflected => 0.0,
        };
        let mut total = C64::new(0.0, 0.0);
        for seg in payoff.segments() {
            let Some(seg) = seg.clipped(floor, f64::INFINITY) else { continue };
            let mut cuts = vec![seg.lower];
            for p in [x, self.c()] {
                if p > seg.lower && p < seg.upper {
                    cuts.push(p);
                }
            }
            cuts.push(seg.upper);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let probe = match (a.is_finite(), b.is_finite()) {
                    (true, true) => 0.5 * (a + b),
                    (true, false) => a + 1.0,
                    (false, true) => b - 1.0,
                    (false, false) => 0.0,
                };
                let kernel = self.kernel_terms(x, probe);
                for term in multiply(&kernel, &seg.terms) {
                    total += term.integrate(a, b).map_err(|e| match e {
                        FptError::DivergentPayoff { rate, .. } => {
                            FptError::DivergentPayoff { lower: seg.lower, upper: seg.upper, rate }
                        }
                        other => other,
                    })?;
                }
            }
        }
        Ok(total)
    }

    /// `int_level^inf G(x, y) dy`.
    pub fn tail_mass(&self, x: f64, level: f64) -> Result<C64> {
        self.integrate(x, &PiecewiseExpPayoff::indicator(level, f64::INFINITY)?)
    }
}

pub fn green(system: System, drift: &DriftSpec, s: Frequency, x: f64, y: f64) -> Result<C64> {
    system.check_state(x)?;
    system.check_state(y)?;
    Ok(GreenKernel::new(system, drift, s)?.eval(x, y))
}

pub fn resolvent_integral(
    system: System,
    drift: &DriftSpec,
    s: Frequency,
    x: f64,
    h: &PiecewiseExpPayoff,
) -> Result<C64> {
    system.check_state(x)?;
    GreenKernel::new(system, drift, s)?.integrate(x, h)
}

/// `int_level^inf G_s(x, y) dy`; `level` defaults to the threshold `c`.
pub fn tail_mass(
    system: System,
    drift: &DriftSpec,
    s: Frequency,
    x: f64,
    level: Option<f64>,
) -> Result<C64> {
    system.check_state(x)?;
    let level = level.unwrap_or(drift.c);
    if level.is_nan() || level == f64::INFINITY {
        return Err(invalid(format!("tail level must be below +inf, got {level}")));
    }
    GreenKernel::new(system, drift, s)?.tail_mass(x, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(s: f64) -> Frequency {
        Frequency::real(s).unwrap()
    }

    #[test]
    fn driftless_resolvent_at_origin() {
        let d = DriftSpec::new(0.0, 0.0, 0.5).unwrap();
        let g = green(System::Free, &d, freq(0.5), 0.0, 0.0).unwrap();
        assert!((g.re - 1.0).abs() < 1e-14 && g.im.abs() < 1e-15);
    }

    #[test]
    fn constant_payoff_integrates_to_inverse_frequency() {
        let d = DriftSpec::new(0.3, -0.6, 1.0).unwrap();
        let h = PiecewiseExpPayoff::indicator(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        for x in [-1.0, 0.4, 1.0, 2.2] {
            let v = resolvent_integral(System::Free, &d, freq(1.3), x, &h).unwrap();
            assert!((v.re - 1.0 / 1.3).abs() < 1e-12);
        }
        for x in [0.0, 0.4, 1.0, 2.2] {
            let v = resolvent_integral(System::Reflected, &d, freq(1.3), x, &h).unwrap();
            assert!((v.re - 1.0 / 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn driftless_tail_mass() {
        let d = DriftSpec::new(0.0, 0.0, 1.0).unwrap();
        let v = tail_mass(System::Free, &d, freq(0.5), 0.0, None).unwrap();
        assert!((v.re - (-1.0f64).exp()).abs() < 1e-14);
        let v = tail_mass(System::Free, &d, freq(0.5), 0.0, Some(f64::NEG_INFINITY)).unwrap();
        assert!((v.re - 2.0).abs() < 1e-13);
    }

    #[test]
    fn divergent_payoff_is_rejected() {
        let d = DriftSpec::new(0.0, 0.0, 1.0).unwrap();
        let h = PiecewiseExpPayoff::exponential(2.0, 0.0, f64::INFINITY).unwrap();
        let r = resolvent_integral(System::Free, &d, freq(0.5), 0.0, &h);
        assert!(matches!(r, Err(FptError::DivergentPayoff { .. })));
    }

    #[test]
    fn malformed_payoffs_are_rejected() {
        assert!(PiecewiseExpPayoff::indicator(1.0, 1.0).is_err());
        let one = vec![ExpTerm::constant(C64::new(1.0, 0.0))];
        let overlapping = vec![Segment::new(0.0, 2.0, one.clone()), Segment::new(1.0, 3.0, one)];
        assert!(PiecewiseExpPayoff::new(overlapping).is_err());
    }

    #[test]
    fn reflected_payoff_below_zero_is_ignored() {
        let d = DriftSpec::new(0.2, 0.1, 1.0).unwrap();
        let a = PiecewiseExpPayoff::indicator(-5.0, 1.5).unwrap();
        let b = PiecewiseExpPayoff::indicator(0.0, 1.5).unwrap();
        let va = resolvent_integral(System::Reflected, &d, freq(0.8), 0.3, &a).unwrap();
        let vb = resolvent_integral(System::Reflected, &d, freq(0.8), 0.3, &b).unwrap();
        assert_eq!(va, vb);
    }
}
