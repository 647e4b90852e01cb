//! Fundamental solutions of the broken-drift generator.
//!
//! For a drift `mu1` below the threshold `c` and `mu2` at or above it, the
//! equation `f''/2 + mu(x) f' = s f` has, on each side of `c`, the exponential
//! solutions `exp(l x)` with `l^2/2 + mu l - s = 0`. The increasing and
//! decreasing solutions (and their reflected counterparts, which satisfy a
//! Neumann condition at the origin) are glued at `c` so that value and slope
//! are continuous. Everything here is evaluated for complex `s` with positive
//! real part, where the principal square root never meets its branch cut.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FptError, Result};
use crate::piecewise::{ExpTerm, Segment};

type C64 = Complex64;

/// Free Brownian motion on the line or the process reflected at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    Free,
    Reflected,
}

impl System {
    pub const ALL: [System; 2] = [System::Free, System::Reflected];

    pub fn name(self) -> &'static str {
        match self {
            System::Free => "free",
            System::Reflected => "reflected",
        }
    }

    pub(crate) fn check_state(self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(invalid(format!("state must be finite, got {x}")));
        }
        if self == System::Reflected && x < 0.0 {
            return Err(FptError::NegativeState(x));
        }
        Ok(())
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Piecewise-constant drift: `mu1` on `x < c`, `mu2` on `x >= c`, unit diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub c: f64,
}

impl DriftSpec {
    pub fn new(mu1: f64, mu2: f64, c: f64) -> Result<Self> {
        let d = Self { mu1, mu2, c };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite() && self.c.is_finite()) {
            return Err(invalid(format!("drift parameters must be finite: {self:?}")));
        }
        Ok(())
    }

    /// Drift at `x`; the threshold itself belongs to the upper regime.
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        if x < self.c {
            self.mu1
        } else {
            self.mu2
        }
    }

    pub(crate) fn require_positive_threshold(&self) -> Result<()> {
        if self.c > 0.0 {
            Ok(())
        } else {
            Err(invalid(format!("reflected model needs a threshold c > 0, got {}", self.c)))
        }
    }
}

/// Laplace frequency with `Re(s) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency(C64);

impl Frequency {
    pub fn new(s: C64) -> Result<Self> {
        if s.re > 0.0 && s.im.is_finite() && s.re.is_finite() {
            Ok(Self(s))
        } else {
            Err(FptError::NonPositiveFrequency(s))
        }
    }

    pub fn real(s: f64) -> Result<Self> {
        Self::new(C64::new(s, 0.0))
    }

    #[inline]
    pub fn value(self) -> C64 {
        self.0
    }
}

/// The four characteristic roots `l1±`, `l2±` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roots {
    pub l1p: C64,
    pub l1m: C64,
    pub l2p: C64,
    pub l2m: C64,
}

pub fn spectral_roots(drift: &DriftSpec, s: Frequency) -> Result<Roots> {
    drift.validate()?;
    let s = s.value();
    let r1 = (C64::from(drift.mu1 * drift.mu1) + 2.0 * s).sqrt();
    let r2 = (C64::from(drift.mu2 * drift.mu2) + 2.0 * s).sqrt();
    Ok(Roots {
        l1p: -drift.mu1 + r1,
        l1m: -drift.mu1 - r1,
        l2p: -drift.mu2 + r2,
        l2m: -drift.mu2 - r2,
    })
}

/// Roots, gluing coefficients and Wronskians at one frequency.
///
/// The coefficient fields hold the full values (`A1 = ratio * exp(..c)`); the
/// solution pieces returned by [`SpectralData::solution`] keep the exponential
/// factor inside the exponent instead, which is what evaluation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub drift: DriftSpec,
    pub s: C64,
    pub l1p: C64,
    pub l1m: C64,
    pub l2p: C64,
    pub l2m: C64,
    pub a1: C64,
    pub a2: C64,
    pub b1: C64,
    pub b2: C64,
    pub at1: C64,
    pub at2: C64,
    pub bt1: C64,
    pub bt2: C64,
    pub w_free: C64,
    pub w_refl: C64,
    psi: [Segment; 2],
    phi: [Segment; 2],
    psi_refl: [Segment; 2],
}

impl SpectralData {
    pub fn new(drift: &DriftSpec, s: Frequency) -> Result<Self> {
        let Roots { l1p, l1m, l2p, l2m } = spectral_roots(drift, s)?;
        let c = drift.c;
        let one = C64::new(1.0, 0.0);
        let d1 = l1p - l1m;
        let d2 = l2p - l2m;

        // A1 e^{l2m x} = ra1 exp(l2m x + (l1p - l2m) c), etc.
        let ra1 = (l2p - l1p) / d2;
        let ra2 = (l1p - l2m) / d2;
        let rb1 = (l1p - l2m) / d1;
        let rb2 = (l2m - l1m) / d1;
        let ea1 = (l1p - l2m) * c;
        let ea2 = (l1p - l2p) * c;
        let eb1 = (l2m - l1m) * c;
        let eb2 = (l2m - l1p) * c;

        // Reflected increasing solution above c: each of A~1, A~2 is a
        // difference of two exponentials.
        let rt = [
            (l1p * (l2p - l1m) / d2, l2m, (l1m - l2m) * c),
            (-l1m * (l2p - l1p) / d2, l2m, (l1p - l2m) * c),
            (l1p * (l1m - l2m) / d2, l2p, (l1m - l2p) * c),
            (-l1m * (l1p - l2m) / d2, l2p, (l1p - l2p) * c),
        ];

        let (flo, fhi) = (f64::NEG_INFINITY, c);
        let psi = [
            Segment::new(flo, fhi, vec![ExpTerm::new(one, l1p)]),
            Segment::new(
                c,
                f64::INFINITY,
                vec![ExpTerm::shifted(ra1, l2m, ea1), ExpTerm::shifted(ra2, l2p, ea2)],
            ),
        ];
        let phi = [
            Segment::new(
                flo,
                fhi,
                vec![ExpTerm::shifted(rb1, l1m, eb1), ExpTerm::shifted(rb2, l1p, eb2)],
            ),
            Segment::new(c, f64::INFINITY, vec![ExpTerm::new(one, l2m)]),
        ];
        let psi_refl = [
            Segment::new(0.0, c, vec![ExpTerm::new(l1p, l1m), ExpTerm::new(-l1m, l1p)]),
            Segment::new(
                c,
                f64::INFINITY,
                rt.iter().map(|&(k, r, e)| ExpTerm::shifted(k, r, e)).collect(),
            ),
        ];

        let w_free = (l1p - l2m) * ((l2m - l1m) * c).exp();
        let w_refl = -l1p * (l2m - l1m) * ((l2m - l1p) * c).exp()
            - l1m * (l1p - l2m) * ((l2m - l1m) * c).exp();

        Ok(Self {
            drift: *drift,
            s: s.value(),
            l1p,
            l1m,
            l2p,
            l2m,
            a1: ra1 * ea1.exp(),
            a2: ra2 * ea2.exp(),
            b1: rb1 * eb1.exp(),
            b2: rb2 * eb2.exp(),
            at1: rt[0].0 * rt[0].2.exp() + rt[1].0 * rt[1].2.exp(),
            at2: rt[2].0 * rt[2].2.exp() + rt[3].0 * rt[3].2.exp(),
            bt1: rb1 * eb1.exp(),
            bt2: rb2 * eb2.exp(),
            w_free,
            w_refl,
            psi,
            phi,
            psi_refl,
        })
    }

    pub fn roots(&self) -> Roots {
        Roots { l1p: self.l1p, l1m: self.l1m, l2p: self.l2p, l2m: self.l2m }
    }

    /// The two pieces (below and at/above `c`) of a fundamental solution.
    ///
    /// For the reflected system the lower piece starts at 0. The reflected
    /// decreasing solution coincides with the free one on `[0, inf)`.
    pub fn solution(&self, system: System, direction: Direction) -> [Segment; 2] {
        match (system, direction) {
            (System::Free, Direction::Increasing) => self.psi.clone(),
            (System::Free, Direction::Decreasing) => self.phi.clone(),
            (System::Reflected, Direction::Increasing) => self.psi_refl.clone(),
            (System::Reflected, Direction::Decreasing) => {
                let mut p = self.phi.clone();
                p[0].lower = 0.0;
                p
            }
        }
    }

    fn piece(&self, system: System, direction: Direction, x: f64) -> &Segment {
        let pieces = match (system, direction) {
            (System::Free, Direction::Increasing) => &self.psi,
            (System::Reflected, Direction::Increasing) => &self.psi_refl,
            (_, Direction::Decreasing) => &self.phi,
        };
        if x < self.drift.c {
            &pieces[0]
        } else {
            &pieces[1]
        }
    }

    /// Value of a fundamental solution; the caller has checked the domain.
    #[inline]
    pub fn eval(&self, system: System, direction: Direction, x: f64) -> C64 {
        self.piece(system, direction, x).eval(x)
    }

    #[inline]
    pub fn eval_derivative(&self, system: System, direction: Direction, x: f64) -> C64 {
        self.piece(system, direction, x).derivative(x)
    }

    pub fn wronskian(&self, system: System) -> C64 {
        match system {
            System::Free => self.w_free,
            System::Reflected => self.w_refl,
        }
    }
}

fn check_system(system: System, drift: &DriftSpec) -> Result<()> {
    drift.validate()?;
    if system == System::Reflected {
        drift.require_positive_threshold()?;
    }
    Ok(())
}

pub fn fundamental_solution(
    system: System,
    direction: Direction,
    drift: &DriftSpec,
    s: Frequency,
    x: f64,
) -> Result<C64> {
    check_system(system, drift)?;
    system.check_state(x)?;
    Ok(SpectralData::new(drift, s)?.eval(system, direction, x))
}

pub fn fundamental_solution_derivative(
    system: System,
    direction: Direction,
    drift: &DriftSpec,
    s: Frequency,
    x: f64,
) -> Result<C64> {
    check_system(system, drift)?;
    system.check_state(x)?;
    Ok(SpectralData::new(drift, s)?.eval_derivative(system, direction, x))
}

pub fn wronskian(system: System, drift: &DriftSpec, s: Frequency) -> Result<C64> {
    check_system(system, drift)?;
    Ok(SpectralData::new(drift, s)?.wronskian(system))
}

/// Speed density `m(x)` as an exponential term on the given side of `c`.
pub(crate) fn speed_term(drift: &DriftSpec, above: bool) -> ExpTerm {
    let two = C64::new(2.0, 0.0);
    if above {
        ExpTerm::shifted(
            two,
            C64::from(2.0 * drift.mu2),
            C64::from(2.0 * (drift.mu1 - drift.mu2) * drift.c),
        )
    } else {
        ExpTerm::new(two, C64::from(2.0 * drift.mu1))
    }
}

/// Speed density `m(x)` and scale density `s(x)`; their product is 2.
pub fn speed_scale_densities(system: System, drift: &DriftSpec, x: f64) -> Result<(f64, f64)> {
    drift.validate()?;
    system.check_state(x)?;
    let (mu1, mu2, c) = (drift.mu1, drift.mu2, drift.c);
    Ok(if x < c {
        (2.0 * (2.0 * mu1 * x).exp(), (-2.0 * mu1 * x).exp())
    } else {
        (
            2.0 * (2.0 * (mu1 - mu2) * c + 2.0 * mu2 * x).exp(),
            (2.0 * (mu2 - mu1) * c - 2.0 * mu2 * x).exp(),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(s: f64) -> Frequency {
        Frequency::real(s).unwrap()
    }

    #[test]
    fn roots_for_perfect_squares() {
        let r = spectral_roots(&DriftSpec::new(0.0, 0.0, 1.0).unwrap(), freq(2.0)).unwrap();
        assert!((r.l1p.re - 2.0).abs() < 1e-15 && (r.l1m.re + 2.0).abs() < 1e-15);
        let r = spectral_roots(&DriftSpec::new(1.0, 0.0, 1.0).unwrap(), freq(1.5)).unwrap();
        assert!((r.l1p.re - 1.0).abs() < 1e-15 && (r.l1m.re + 3.0).abs() < 1e-15);
        let r = spectral_roots(&DriftSpec::new(0.0, -1.0, 1.0).unwrap(), freq(4.0)).unwrap();
        assert!((r.l2p.re - 4.0).abs() < 1e-15 && (r.l2m.re + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(matches!(Frequency::real(0.0), Err(FptError::NonPositiveFrequency(_))));
        assert!(Frequency::new(C64::new(-1.0, 3.0)).is_err());
    }

    #[test]
    fn reflected_rejects_negative_state() {
        let d = DriftSpec::new(0.1, 0.2, 1.0).unwrap();
        let r = fundamental_solution(System::Reflected, Direction::Increasing, &d, freq(1.0), -0.1);
        assert!(matches!(r, Err(FptError::NegativeState(_))));
    }

    #[test]
    fn uniform_drift_collapse() {
        let d = DriftSpec::new(0.3, 0.3, 1.0).unwrap();
        let sd = SpectralData::new(&d, freq(0.7)).unwrap();
        assert!((sd.a1).norm() < 1e-15);
        assert!((sd.a2 - 1.0).norm() < 1e-14);
        assert!((sd.b1 - 1.0).norm() < 1e-14);
        assert!((sd.b2).norm() < 1e-15);
        let rate = -0.3 + (0.09f64 + 1.4).sqrt();
        for x in [-1.0, 0.5, 1.0, 2.5] {
            let v = sd.eval(System::Free, Direction::Increasing, x);
            assert!((v.re - (rate * x).exp()).abs() < 1e-13 * (rate * x).exp());
        }
    }

    #[test]
    fn driftless_values() {
        let d = DriftSpec::new(0.0, 0.0, 0.3).unwrap();
        let v = fundamental_solution(System::Free, Direction::Increasing, &d, freq(0.5), 1.0).unwrap();
        assert!((v.re - std::f64::consts::E).abs() < 1e-14);
        let v = fundamental_solution(System::Reflected, Direction::Increasing, &d, freq(0.5), 0.0).unwrap();
        assert!((v.re - 2.0).abs() < 1e-15);
        assert!((wronskian(System::Free, &d, freq(0.5)).unwrap().re - 2.0).abs() < 1e-15);
        assert!((wronskian(System::Reflected, &d, freq(0.5)).unwrap().re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn speed_scale_examples() {
        let d = DriftSpec::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(speed_scale_densities(System::Free, &d, -3.0).unwrap(), (2.0, 1.0));
        let d = DriftSpec::new(1.0, -0.5, 1.0).unwrap();
        let (m, _) = speed_scale_densities(System::Free, &d, 0.5).unwrap();
        assert!((m - 2.0 * std::f64::consts::E).abs() < 1e-14);
        for x in [-2.0, 0.3, 1.0, 4.0] {
            let (m, s) = speed_scale_densities(System::Free, &d, x).unwrap();
            assert!((m * s - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn threshold_belongs_to_upper_branch() {
        let d = DriftSpec::new(0.4, -0.7, 1.2).unwrap();
        let sd = SpectralData::new(&d, freq(1.0)).unwrap();
        let upper = sd.solution(System::Free, Direction::Increasing)[1].eval(1.2);
        assert_eq!(sd.eval(System::Free, Direction::Increasing, 1.2), upper);
    }

    #[test]
    fn reflected_needs_positive_threshold() {
        let d = DriftSpec::new(0.4, -0.7, 0.0).unwrap();
        assert!(wronskian(System::Reflected, &d, freq(1.0)).is_err());
        assert!(wronskian(System::Free, &d, freq(1.0)).is_ok());
    }
}
