use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::gauss_legendre;

/// Default Gauss-Legendre node count for continuous jump laws.
pub const DEFAULT_JUMP_NODES: usize = 32;

fn default_nodes() -> usize {
    DEFAULT_JUMP_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpAtom {
    pub value: f64,
    pub weight: f64,
}

/// Law of the jump size `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    Atoms {
        atoms: Vec<JumpAtom>,
    },
    Uniform {
        low: f64,
        high: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// Exponential with the given rate, conditioned on `[low, high]`.
    TruncatedExponential {
        rate: f64,
        low: f64,
        high: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

impl JumpLaw {
    pub fn degenerate(y: f64) -> Self {
        JumpLaw::Atoms { atoms: vec![JumpAtom { value: y, weight: 1.0 }] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("jump law needs at least one atom"));
                }
                for a in atoms {
                    if !(a.value > 0.0 && a.value.is_finite()) {
                        return Err(invalid(format!("jump atoms must be positive and finite, got {}", a.value)));
                    }
                    if !(a.weight >= 0.0 && a.weight <= 1.0) {
                        return Err(invalid(format!("jump weight {} is not a probability", a.weight)));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("jump weights sum to {total}, not 1")));
                }
            }
            JumpLaw::Uniform { low, high, nodes } => check_support(*low, *high, *nodes)?,
            JumpLaw::TruncatedExponential { rate, low, high, nodes } => {
                check_support(*low, *high, *nodes)?;
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid(format!("exponential jump rate must be positive, got {rate}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, JumpLaw::Atoms { .. })
    }

    /// Starting node count for continuous laws.
    pub fn nodes(&self) -> usize {
        match self {
            JumpLaw::Atoms { atoms } => atoms.len(),
            JumpLaw::Uniform { nodes, .. } | JumpLaw::TruncatedExponential { nodes, .. } => *nodes,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Atoms { atoms } => atoms.iter().map(|a| a.value * a.weight).sum(),
            JumpLaw::Uniform { low, high, .. } => 0.5 * (low + high),
            JumpLaw::TruncatedExponential { rate, low, high, .. } => {
                let len = high - low;
                let tail = (-rate * len).exp();
                low + 1.0 / rate - len * tail / (1.0 - tail)
            }
        }
    }

    /// Density of a continuous law; zero for atomic laws.
    pub fn density(&self, y: f64) -> f64 {
        match *self {
            JumpLaw::Atoms { .. } => 0.0,
            JumpLaw::Uniform { low, high, .. } => {
                if (low..=high).contains(&y) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            JumpLaw::TruncatedExponential { rate, low, high, .. } => {
                if (low..=high).contains(&y) {
                    rate * (-rate * (y - low)).exp() / -(-rate * (high - low)).exp_m1()
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse distribution function, used to sample `Y` from a uniform `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            JumpLaw::Atoms { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms[atoms.len() - 1].value
            }
            JumpLaw::Uniform { low, high, .. } => low + u * (high - low),
            JumpLaw::TruncatedExponential { rate, low, high, .. } => {
                let mass = -(-rate * (high - low)).exp_m1();
                low - (-u * mass).ln_1p() / rate
            }
        }
    }

    /// `(y, weight)` pairs: the atoms themselves, or an `n`-point
    /// Gauss-Legendre rule weighted by the density.
    pub fn discretize(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            JumpLaw::Atoms { atoms } => atoms.iter().map(|a| (a.value, a.weight)).collect(),
            JumpLaw::Uniform { low, high, .. } | JumpLaw::TruncatedExponential { low, high, .. } => {
                gauss_legendre(n, *low, *high).into_iter().map(|(y, w)| (y, w * self.density(y))).collect()
            }
        }
    }
}

fn check_support(low: f64, high: f64, nodes: usize) -> Result<()> {
    if !(low >= 0.0 && low < high && high.is_finite()) {
        return Err(invalid(format!("jump support [{low}, {high}] must be a bounded interval in [0, inf)")));
    }
    if nodes == 0 {
        return Err(invalid("continuous jump law needs at least one quadrature node"));
    }
    Ok(())
}

/// The random boundary: level `b` until an `Exp(lambda)` time, `b + Y` after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub b: f64,
    pub lambda: f64,
    pub jump_law: JumpLaw,
}

impl BoundarySpec {
    pub fn new(b: f64, lambda: f64, jump_law: JumpLaw) -> Result<Self> {
        let spec = Self { b, lambda, jump_law };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid(format!("boundary level b must be positive, got {}", self.b)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("jump rate lambda must be positive, got {}", self.lambda)));
        }
        self.jump_law.validate()
    }
}

/// Evaluation point `(alpha, theta, x)` of a joint Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformQuery {
    pub alpha: f64,
    pub theta: f64,
    pub x: f64,
}

impl TransformQuery {
    pub fn new(alpha: f64, theta: f64, x: f64) -> Result<Self> {
        let q = Self { alpha, theta, x };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(invalid(format!("theta must be positive, got {}", self.theta)));
        }
        if !self.x.is_finite() {
            return Err(invalid(format!("x must be finite, got {}", self.x)));
        }
        Ok(())
    }
}

/// Killing rate inside the post-jump factor `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MVariant {
    #[default]
    ThetaPlusLambda,
    ThetaOnly,
}

/// Argument of the reflected post-jump factor: the position at the jump
/// time, or the fixed starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflectedReading {
    #[default]
    PostJumpPosition,
    StartingPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointVariant {
    pub rate: MVariant,
    #[serde(default)]
    pub reading: ReflectedReading,
}

impl MVariant {
    pub const ALL: [MVariant; 2] = [MVariant::ThetaPlusLambda, MVariant::ThetaOnly];

    pub fn name(self) -> &'static str {
        match self {
            MVariant::ThetaPlusLambda => "theta-plus-lambda",
            MVariant::ThetaOnly => "theta-only",
        }
    }

    pub(crate) fn rate(self, lambda: f64, theta: f64) -> f64 {
        match self {
            MVariant::ThetaPlusLambda => lambda + theta,
            MVariant::ThetaOnly => theta,
        }
    }
}

impl ReflectedReading {
    pub const ALL: [ReflectedReading; 2] = [ReflectedReading::PostJumpPosition, ReflectedReading::StartingPoint];

    pub fn name(self) -> &'static str {
        match self {
            ReflectedReading::PostJumpPosition => "post-jump-position",
            ReflectedReading::StartingPoint => "starting-point",
        }
    }
}

impl JointVariant {
    pub fn new(rate: MVariant, reading: ReflectedReading) -> Self {
        Self { rate, reading }
    }

    /// Every variant that changes the value for `system`.
    pub fn all(system: crate::spectral::System) -> Vec<Self> {
        match system {
            crate::spectral::System::Free => {
                MVariant::ALL.iter().map(|&r| Self::new(r, ReflectedReading::default())).collect()
            }
            crate::spectral::System::Reflected => MVariant::ALL
                .iter()
                .flat_map(|&r| ReflectedReading::ALL.iter().map(move |&g| Self::new(r, g)))
                .collect(),
        }
    }

    pub fn label(self, system: crate::spectral::System) -> String {
        match system {
            crate::spectral::System::Free => self.rate.name().to_string(),
            crate::spectral::System::Reflected => format!("{}/{}", self.rate.name(), self.reading.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_validation() {
        assert!(JumpLaw::degenerate(1.0).validate().is_ok());
        assert!(JumpLaw::degenerate(0.0).validate().is_err());
        assert!(JumpLaw::degenerate(-1.0).validate().is_err());
        let bad = JumpLaw::Atoms {
            atoms: vec![JumpAtom { value: 1.0, weight: 0.5 }, JumpAtom { value: 2.0, weight: 0.4 }],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn continuous_weights_integrate_to_one() {
        let laws = [
            JumpLaw::Uniform { low: 0.5, high: 1.5, nodes: 32 },
            JumpLaw::TruncatedExponential { rate: 2.0, low: 0.1, high: 3.0, nodes: 32 },
        ];
        for law in laws {
            let total: f64 = law.discretize(32).iter().map(|p| p.1).sum();
            assert!((total - 1.0).abs() < 1e-13);
            let mean: f64 = law.discretize(32).iter().map(|p| p.0 * p.1).sum();
            assert!((mean - law.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn quantiles_invert_distribution() {
        let law = JumpLaw::TruncatedExponential { rate: 1.5, low: 0.2, high: 2.0, nodes: 32 };
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let y = law.quantile(u);
            let cdf: f64 = gauss_legendre(40, 0.2, y).iter().map(|&(z, w)| w * law.density(z)).sum();
            assert!((cdf - u).abs() < 1e-12);
        }
        let atoms = JumpLaw::Atoms {
            atoms: vec![JumpAtom { value: 1.0, weight: 0.25 }, JumpAtom { value: 3.0, weight: 0.75 }],
        };
        assert_eq!(atoms.quantile(0.2), 1.0);
        assert_eq!(atoms.quantile(0.3), 3.0);
    }

    #[test]
    fn serde_shape() {
        let spec = BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"atoms\""));
        let back: BoundarySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let law: JumpLaw = serde_json::from_str(r#"{"kind":"uniform","low":0.5,"high":1.0}"#).unwrap();
        assert_eq!(law.nodes(), DEFAULT_JUMP_NODES);
    }
}
