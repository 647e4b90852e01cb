//! Numerical Laplace inversion.
//!
//! The primary method is the Fourier-series (trapezoidal) rule on the vertical
//! line `Re(s) = a` with Euler (binomial) averaging of the alternating tail.
//! It only ever evaluates transforms with `Re(s) > 0`, so the branch points of
//! `sqrt(mu^2 + 2 s)` on the negative real axis are never approached.
//! Gaver-Stehfest, which samples the transform on the positive real axis
//! only, serves as an independent cross-check. For densities the check runs
//! in extended precision (see [`extended`]), because in double precision its
//! error on these kernels is around `1e-5`.

mod extended;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FptError, Result};
use crate::greens::GreenKernel;
use crate::spectral::{DriftSpec, Frequency, System};
use extended::ExtendedStehfest;

type C64 = Complex64;

/// Densities in `[-CLAMP_TOL, 0)` are rounding noise and are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionMethod {
    EulerSummation,
    GaverStehfest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionParams {
    pub method: InversionMethod,
    /// Series length: terms before Euler averaging, or the Gaver-Stehfest `N`.
    pub terms: usize,
    /// Order of the binomial average applied to the alternating tail.
    pub euler_order: usize,
    /// Real part of the Bromwich line. When absent it is chosen so that the
    /// aliasing error `exp(-2 a t)` equals `target_tol`.
    pub abscissa_shift: Option<f64>,
    pub target_tol: f64,
    /// Also run Gaver-Stehfest and fail if the two disagree.
    pub cross_check: bool,
    /// Gaver-Stehfest `N` used by the double-precision cross-check.
    pub stehfest_terms: usize,
    /// Gaver-Stehfest `N` used by the extended-precision density cross-check.
    pub extended_terms: usize,
}

impl Default for InversionParams {
    fn default() -> Self {
        Self {
            method: InversionMethod::EulerSummation,
            terms: 60,
            euler_order: 20,
            abscissa_shift: None,
            target_tol: 1e-11,
            cross_check: false,
            stehfest_terms: 16,
            extended_terms: 32,
        }
    }
}

impl InversionParams {
    pub fn with_cross_check(mut self) -> Self {
        self.cross_check = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let stehfest_ok = |n: usize| n >= 2 && n % 2 == 0 && n <= 18;
        match self.method {
            InversionMethod::EulerSummation if self.terms < 10 => {
                return Err(invalid(format!("euler summation needs at least 10 terms, got {}", self.terms)))
            }
            InversionMethod::GaverStehfest if !stehfest_ok(self.terms) => {
                return Err(invalid(format!("gaver-stehfest needs an even N <= 18, got {}", self.terms)))
            }
            _ => {}
        }
        if self.cross_check && !stehfest_ok(self.stehfest_terms) {
            return Err(invalid(format!(
                "gaver-stehfest needs an even N <= 18, got {}",
                self.stehfest_terms
            )));
        }
        if self.cross_check && !(self.extended_terms >= 2 && self.extended_terms % 2 == 0 && self.extended_terms <= 64) {
            return Err(invalid(format!(
                "extended gaver-stehfest needs an even N <= 64, got {}",
                self.extended_terms
            )));
        }
        if !(self.target_tol > 0.0 && self.target_tol < 1.0) {
            return Err(invalid(format!("target_tol must lie in (0, 1), got {}", self.target_tol)));
        }
        if let Some(a) = self.abscissa_shift {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid(format!("abscissa shift must be positive, got {a}")));
            }
        }
        Ok(())
    }

    fn abscissa(&self, t: f64) -> f64 {
        self.abscissa_shift.unwrap_or_else(|| -self.target_tol.ln() / (2.0 * t))
    }
}

/// Sample points and real weights: `f(t) ~ sum w_k Re F(s_k)`.
#[derive(Debug, Clone)]
struct Rule {
    nodes: Vec<(Frequency, f64)>,
}

impl Rule {
    fn euler(t: f64, params: &InversionParams) -> Result<Self> {
        let a = params.abscissa(t);
        let (n, m) = (params.terms, params.euler_order);
        let pre = (a * t).exp() / t;
        let binom = binomial_row(m);
        let scale = 0.5f64.powi(m as i32);
        let mut nodes = Vec::with_capacity(n + m + 1);
        for k in 0..=n + m {
            let tail: f64 = if k <= n { 1.0 } else { binom[k - n..].iter().sum::<f64>() * scale };
            let base = if k == 0 { 0.5 } else { 1.0 };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let s = C64::new(a, k as f64 * std::f64::consts::PI / t);
            nodes.push((Frequency::new(s)?, pre * base * sign * tail));
        }
        Ok(Self { nodes })
    }

    fn stehfest(t: f64, n: usize) -> Result<Self> {
        let ln2 = std::f64::consts::LN_2;
        let nodes = stehfest_weights(n)
            .into_iter()
            .enumerate()
            .map(|(i, v)| Ok((Frequency::real((i + 1) as f64 * ln2 / t)?, v * ln2 / t)))
            .collect::<Result<_>>()?;
        Ok(Self { nodes })
    }

    fn apply<F: FnMut(Frequency) -> Result<C64>>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for &(s, w) in &self.nodes {
            acc += w * f(s)?.re;
        }
        Ok(acc)
    }
}

fn binomial_row(m: usize) -> Vec<f64> {
    let mut row = vec![1.0f64; m + 1];
    for j in 1..m {
        row[j] = row[j - 1] * (m + 1 - j) as f64 / j as f64;
    }
    row
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn stehfest_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    (1..=n)
        .map(|k| {
            let lo = (k + 1) / 2;
            let hi = k.min(half);
            let sum: f64 = (lo..=hi)
                .map(|j| {
                    (j as f64).powi(half as i32) * factorial(2 * j)
                        / (factorial(half - j)
                            * factorial(j)
                            * factorial(j - 1)
                            * factorial(k - j)
                            * factorial(2 * j - k))
                })
                .sum();
            if (k + half) % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

/// Both rules for one time point, built once and reused across transforms.
#[derive(Debug, Clone)]
struct Plan {
    t: f64,
    primary: Rule,
    check: Option<Rule>,
    euler_is_primary: bool,
}

impl Plan {
    fn new(t: f64, params: &InversionParams) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("inversion time must be positive, got {t}")));
        }
        params.validate()?;
        Ok(match params.method {
            InversionMethod::EulerSummation => Self {
                t,
                primary: Rule::euler(t, params)?,
                check: params
                    .cross_check
                    .then(|| Rule::stehfest(t, params.stehfest_terms))
                    .transpose()?,
                euler_is_primary: true,
            },
            InversionMethod::GaverStehfest => Self {
                t,
                primary: Rule::stehfest(t, params.terms)?,
                check: params.cross_check.then(|| Rule::euler(t, params)).transpose()?,
                euler_is_primary: false,
            },
        })
    }

    fn frequencies(&self) -> impl Iterator<Item = Frequency> + '_ {
        self.primary.nodes.iter().chain(self.check.iter().flat_map(|r| r.nodes.iter())).map(|n| n.0)
    }

    /// Inverts `f`; with a cross-check the Euler value is returned.
    fn invert<F: FnMut(usize, Frequency) -> Result<C64>>(&self, mut f: F) -> Result<f64> {
        let mut idx = 0;
        let primary = self.primary.apply(|s| {
            idx += 1;
            f(idx - 1, s)
        })?;
        let Some(check) = &self.check else { return Ok(primary) };
        let secondary = check.apply(|s| {
            idx += 1;
            f(idx - 1, s)
        })?;
        let (euler, stehfest) =
            if self.euler_is_primary { (primary, secondary) } else { (secondary, primary) };
        agree(self.t, euler, stehfest)
    }
}

fn agree(t: f64, euler: f64, stehfest: f64) -> Result<f64> {
    if (euler - stehfest).abs() > 1e-6f64.max(1e-6 * euler.abs()) {
        return Err(FptError::InversionDisagreement { t, euler, stehfest });
    }
    Ok(euler)
}

/// Plan for point densities. An Euler primary with a cross-check is checked
/// by the extended-precision rule instead of the double-precision one.
fn density_plan(t: f64, params: &InversionParams) -> Result<(Plan, Option<ExtendedStehfest>)> {
    params.validate()?;
    if params.cross_check && params.method == InversionMethod::EulerSummation {
        let plain = InversionParams { cross_check: false, ..params.clone() };
        Ok((Plan::new(t, &plain)?, Some(ExtendedStehfest::new(t, params.extended_terms)?)))
    } else {
        Ok((Plan::new(t, params)?, None))
    }
}

/// Inverts the transform `f` at time `t`.
pub fn invert_laplace<F>(f: F, t: f64, params: &InversionParams) -> Result<f64>
where
    F: Fn(Frequency) -> Result<C64>,
{
    Plan::new(t, params)?.invert(|_, s| f(s))
}

/// A nonnegative density value and the magnitude of any clamping applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub value: f64,
    pub clamped: f64,
}

impl Density {
    fn from_raw(t: f64, raw: f64) -> Result<Self> {
        if raw >= 0.0 {
            Ok(Self { value: raw, clamped: 0.0 })
        } else if raw >= -CLAMP_TOL {
            Ok(Self { value: 0.0, clamped: -raw })
        } else {
            Err(FptError::NegativeDensity { t, value: raw })
        }
    }
}

/// Green kernels at every inversion node for one `(system, drift, t, x)`.
///
/// Tabulating `p(t; x, y)` over many `y` shares all spectral data.
#[derive(Debug, Clone)]
pub struct DensityRow {
    system: System,
    drift: DriftSpec,
    x: f64,
    plan: Plan,
    extended: Option<ExtendedStehfest>,
    kernels: Vec<GreenKernel>,
}

impl DensityRow {
    pub fn new(system: System, drift: &DriftSpec, t: f64, x: f64, params: &InversionParams) -> Result<Self> {
        system.check_state(x)?;
        let (plan, extended) = density_plan(t, params)?;
        let kernels = plan
            .frequencies()
            .map(|s| GreenKernel::new(system, drift, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { system, drift: *drift, x, plan, extended, kernels })
    }

    pub fn t(&self) -> f64 {
        self.plan.t
    }

    /// Inverts an arbitrary functional of the Green kernel at this row's `x`.
    /// Only the double-precision cross-check, if any, applies here.
    pub fn invert_with<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&GreenKernel, f64) -> Result<C64>,
    {
        self.plan.invert(|i, _| f(&self.kernels[i], self.x))
    }

    pub fn density(&self, y: f64) -> Result<Density> {
        self.system.check_state(y)?;
        let mut raw = self.invert_with(|k, x| Ok(k.eval(x, y)))?;
        if let Some(rule) = &self.extended {
            raw = agree(self.plan.t, raw, rule.density(self.system, &self.drift, self.x, y)?)?;
        }
        Density::from_raw(self.plan.t, raw)
    }

    /// `P_x(X_t >= level)`.
    pub fn upper_tail(&self, level: f64) -> Result<f64> {
        self.invert_with(|k, x| k.tail_mass(x, level))
    }

    pub fn tabulate(&self, ys: &[f64]) -> Vec<Result<Density>> {
        ys.par_iter().map(|&y| self.density(y)).collect()
    }
}

/// `p(t; x, y)` (free) or its reflected counterpart, by inverting `G_s(x, y)`.
pub fn transition_density(
    system: System,
    drift: &DriftSpec,
    t: f64,
    x: f64,
    y: f64,
    params: &InversionParams,
) -> Result<Density> {
    system.check_state(x)?;
    system.check_state(y)?;
    let (plan, extended) = density_plan(t, params)?;
    let mut raw = plan.invert(|_, s| Ok(GreenKernel::new(system, drift, s)?.eval(x, y)))?;
    if let Some(rule) = &extended {
        raw = agree(t, raw, rule.density(system, drift, x, y)?)?;
    }
    Density::from_raw(t, raw)
}

/// The same density by Gaver-Stehfest with `terms` nodes in extended
/// precision, on a kernel rebuilt independently of [`GreenKernel`].
pub fn stehfest_density(system: System, drift: &DriftSpec, t: f64, x: f64, y: f64, terms: usize) -> Result<f64> {
    drift.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("inversion time must be positive, got {t}")));
    }
    system.check_state(x)?;
    system.check_state(y)?;
    if system == System::Reflected {
        drift.require_positive_threshold()?;
    }
    ExtendedStehfest::new(t, terms)?.density(system, drift, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stehfest_weights_sum_to_zero() {
        for n in [8, 12, 16] {
            let w = stehfest_weights(n);
            let scale: f64 = w.iter().map(|v| v.abs()).sum();
            assert!(w.iter().sum::<f64>().abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn stehfest_n2_weights() {
        assert_eq!(stehfest_weights(2), vec![2.0, -2.0]);
    }

    #[test]
    fn rejects_bad_params() {
        let p = InversionParams { terms: 5, ..Default::default() };
        assert!(p.validate().is_err());
        let p = InversionParams { method: InversionMethod::GaverStehfest, terms: 20, ..Default::default() };
        assert!(p.validate().is_err());
        let p = InversionParams { method: InversionMethod::GaverStehfest, terms: 13, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(invert_laplace(|s| Ok(s.value().inv()), 0.0, &InversionParams::default()).is_err());
    }

    #[test]
    fn unit_step() {
        let v = invert_laplace(|s| Ok(s.value().inv()), 3.0, &InversionParams::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clamp_rules() {
        assert_eq!(Density::from_raw(1.0, -1e-8).unwrap(), Density { value: 0.0, clamped: 1e-8 });
        assert!(Density::from_raw(1.0, -1e-3).is_err());
    }
}
