//! Sums of complex exponentials on real intervals.
//!
//! Every function the library handles in closed form (fundamental solutions,
//! Green kernels, payoffs) is a finite sum of `coeff * exp(rate * y + shift)`
//! on each of a few intervals. Keeping the exponent as a single `rate * y +
//! shift` lets products of large and small factors be formed before `exp` is
//! applied.

use num_complex::Complex64;

use crate::error::{FptError, Result};

/// Margin on `Re(rate)` required for an integral over a half-line to converge.
pub const CONVERGENCE_MARGIN: f64 = 1e-12;

/// Below this `|rate * length|` an integral uses the midpoint form.
const SMALL_EXPONENT: f64 = 1e-8;

/// `coeff * exp(rate * y + shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coeff: Complex64,
    pub rate: Complex64,
    pub shift: Complex64,
}

impl ExpTerm {
    pub fn new(coeff: Complex64, rate: Complex64) -> Self {
        Self { coeff, rate, shift: Complex64::new(0.0, 0.0) }
    }

    pub fn shifted(coeff: Complex64, rate: Complex64, shift: Complex64) -> Self {
        Self { coeff, rate, shift }
    }

    /// The constant `coeff`.
    pub fn constant(coeff: Complex64) -> Self {
        Self::new(coeff, Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn eval(&self, y: f64) -> Complex64 {
        self.coeff * (self.rate * y + self.shift).exp()
    }

    #[inline]
    pub fn derivative(&self, y: f64) -> Complex64 {
        self.rate * self.eval(y)
    }

    pub fn scaled(self, k: Complex64) -> Self {
        Self { coeff: self.coeff * k, ..self }
    }

    pub fn product(self, other: ExpTerm) -> Self {
        Self {
            coeff: self.coeff * other.coeff,
            rate: self.rate + other.rate,
            shift: self.shift + other.shift,
        }
    }

    /// Integral over `[lower, upper]`; either end may be infinite.
    pub fn integrate(&self, lower: f64, upper: f64) -> Result<Complex64> {
        if !(lower < upper) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let divergent = || FptError::DivergentPayoff { lower, upper, rate: self.rate };
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => {
                let len = upper - lower;
                let z = self.rate * len;
                if z.norm() < SMALL_EXPONENT {
                    let mid = 0.5 * (lower + upper);
                    Ok(self.coeff * len * (self.rate * mid + self.shift).exp())
                } else {
                    Ok(self.coeff * (self.rate * lower + self.shift).exp() * expm1(z) / self.rate)
                }
            }
            (true, false) => {
                if self.rate.re < -CONVERGENCE_MARGIN {
                    Ok(-self.coeff * (self.rate * lower + self.shift).exp() / self.rate)
                } else {
                    Err(divergent())
                }
            }
            (false, true) => {
                if self.rate.re > CONVERGENCE_MARGIN {
                    Ok(self.coeff * (self.rate * upper + self.shift).exp() / self.rate)
                } else {
                    Err(divergent())
                }
            }
            (false, false) => Err(divergent()),
        }
    }
}

/// `exp(z) - 1` without cancellation near zero.
pub fn expm1(z: Complex64) -> Complex64 {
    let em1 = z.re.exp_m1();
    let half = 0.5 * z.im;
    let cos_m1 = -2.0 * half.sin() * half.sin();
    Complex64::new(em1 * cos_m1 + em1 + cos_m1, z.re.exp() * z.im.sin())
}

/// A sum of exponential terms on `[lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub terms: Vec<ExpTerm>,
}

impl Segment {
    pub fn new(lower: f64, upper: f64, terms: Vec<ExpTerm>) -> Self {
        Self { lower, upper, terms }
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lower && y < self.upper
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(y)).sum()
    }

    pub fn derivative(&self, y: f64) -> Complex64 {
        self.terms.iter().map(|t| t.derivative(y)).sum()
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        Self {
            lower: self.lower,
            upper: self.upper,
            terms: self.terms.iter().map(|t| t.scaled(k)).collect(),
        }
    }

    /// Restriction to `[lower, upper)`, or `None` if the overlap is empty.
    pub fn clipped(&self, lower: f64, upper: f64) -> Option<Self> {
        let lo = self.lower.max(lower);
        let hi = self.upper.min(upper);
        (lo < hi).then(|| Self { lower: lo, upper: hi, terms: self.terms.clone() })
    }
}

/// Pointwise product of two term lists.
pub fn multiply(a: &[ExpTerm], b: &[ExpTerm]) -> Vec<ExpTerm> {
    a.iter().flat_map(|x| b.iter().map(move |y| x.product(*y))).collect()
}
