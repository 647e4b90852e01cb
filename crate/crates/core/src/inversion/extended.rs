//! Gaver-Stehfest in arbitrary precision, used to cross-check densities.
//!
//! In double precision the Stehfest weights (about `10^9` at `N = 16`) cancel
//! away every digit past `1e-6`, and at `N <= 18` the truncation error on the
//! densities here is still around `1e-5`. Both limits go away when the Green
//! kernel at real `s` is evaluated with a few hundred bits. The kernel is
//! rebuilt from scratch on this route: fundamental solutions are glued at `c`
//! by matching value and slope numerically rather than through the closed-form
//! coefficients used on the complex route.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode};

use crate::error::{invalid, Result};
use crate::spectral::{DriftSpec, System};

const RM: RoundingMode = RoundingMode::ToEven;

/// Arithmetic at a fixed precision.
struct Ctx {
    p: usize,
    cc: RefCell<Consts>,
}

impl Ctx {
    fn new(p: usize) -> Result<Self> {
        let cc = Consts::new().map_err(|e| invalid(format!("extended precision unavailable: {e:?}")))?;
        Ok(Self { p, cc: RefCell::new(cc) })
    }

    fn num(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.p)
    }

    fn int(&self, v: u64) -> BigFloat {
        BigFloat::from_u64(v, self.p)
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }

    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }

    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }

    fn exp(&self, a: &BigFloat) -> BigFloat {
        a.exp(self.p, RM, &mut self.cc.borrow_mut())
    }

    fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(self.p, RM)
    }

    fn ln2(&self) -> BigFloat {
        self.int(2).ln(self.p, RM, &mut self.cc.borrow_mut())
    }

    fn to_f64(&self, a: &BigFloat) -> f64 {
        a.to_string().parse().unwrap_or(f64::NAN)
    }
}

/// `A e^{r1 (z - c)} + B e^{r2 (z - c)}`.
struct Pair {
    a: BigFloat,
    r1: BigFloat,
    b: BigFloat,
    r2: BigFloat,
    c: BigFloat,
}

impl Pair {
    /// The combination with value `v` and slope `d` at `c`.
    fn matching(ctx: &Ctx, v: &BigFloat, d: &BigFloat, r1: &BigFloat, r2: &BigFloat, c: &BigFloat) -> Self {
        let b = ctx.div(&ctx.sub(d, &ctx.mul(r1, v)), &ctx.sub(r2, r1));
        Self { a: ctx.sub(v, &b), r1: r1.clone(), b, r2: r2.clone(), c: c.clone() }
    }

    fn eval(&self, ctx: &Ctx, z: &BigFloat) -> BigFloat {
        let u = ctx.sub(z, &self.c);
        ctx.add(&ctx.mul(&self.a, &ctx.exp(&ctx.mul(&self.r1, &u))), &ctx.mul(&self.b, &ctx.exp(&ctx.mul(&self.r2, &u))))
    }
}

/// Real-`s` Green kernel of either system.
struct Kernel<'a> {
    ctx: &'a Ctx,
    system: System,
    c: BigFloat,
    mu1: BigFloat,
    mu2: BigFloat,
    l1p: BigFloat,
    l1m: BigFloat,
    l2m: BigFloat,
    psi_high: Pair,
    phi_low: Pair,
    inv_w: BigFloat,
}

impl<'a> Kernel<'a> {
    fn new(ctx: &'a Ctx, system: System, drift: &DriftSpec, s: &BigFloat) -> Self {
        let (mu1, mu2, c) = (ctx.num(drift.mu1), ctx.num(drift.mu2), ctx.num(drift.c));
        let two_s = ctx.mul(&ctx.int(2), s);
        let r1 = ctx.sqrt(&ctx.add(&ctx.mul(&mu1, &mu1), &two_s));
        let r2 = ctx.sqrt(&ctx.add(&ctx.mul(&mu2, &mu2), &two_s));
        let l1p = ctx.sub(&r1, &mu1);
        let l1m = ctx.sub(&mu1.neg(), &r1);
        let l2p = ctx.sub(&r2, &mu2);
        let l2m = ctx.sub(&mu2.neg(), &r2);

        let mut k = Self {
            ctx,
            system,
            c: c.clone(),
            mu1,
            mu2,
            l1p,
            l1m,
            l2m,
            psi_high: Pair { a: ctx.int(0), r1: ctx.int(0), b: ctx.int(0), r2: ctx.int(0), c: c.clone() },
            phi_low: Pair { a: ctx.int(0), r1: ctx.int(0), b: ctx.int(0), r2: ctx.int(0), c: c.clone() },
            inv_w: ctx.int(0),
        };
        let (psi_c, dpsi_c) = k.psi_low(&c);
        k.psi_high = Pair::matching(ctx, &psi_c, &dpsi_c, &k.l2m, &l2p, &c);
        let phi_c = ctx.exp(&ctx.mul(&k.l2m, &c));
        let dphi_c = ctx.mul(&k.l2m, &phi_c);
        k.phi_low = Pair::matching(ctx, &phi_c, &dphi_c, &k.l1m, &k.l1p, &c);
        // w = (psi' phi - psi phi') / S'(c), with S'(c) = exp(-2 mu1 c).
        let cross = ctx.sub(&ctx.mul(&dpsi_c, &phi_c), &ctx.mul(&psi_c, &dphi_c));
        let scale = ctx.exp(&ctx.mul(&ctx.mul(&ctx.int(2), &k.mu1), &c));
        k.inv_w = ctx.div(&ctx.int(1), &ctx.mul(&cross, &scale));
        k
    }

    /// Increasing solution and its slope below `c`.
    fn psi_low(&self, z: &BigFloat) -> (BigFloat, BigFloat) {
        let ctx = self.ctx;
        let ep = ctx.exp(&ctx.mul(&self.l1p, z));
        match self.system {
            System::Free => (ep.clone(), ctx.mul(&self.l1p, &ep)),
            System::Reflected => {
                // l1p e^{l1m z} - l1m e^{l1p z}: zero slope at the origin.
                let em = ctx.exp(&ctx.mul(&self.l1m, z));
                let v = ctx.sub(&ctx.mul(&self.l1p, &em), &ctx.mul(&self.l1m, &ep));
                let lp_lm = ctx.mul(&self.l1p, &self.l1m);
                (v, ctx.mul(&lp_lm, &ctx.sub(&em, &ep)))
            }
        }
    }

    fn below(&self, z: &BigFloat) -> bool {
        z.cmp(&self.c).is_some_and(|o| o < 0)
    }

    fn psi(&self, z: &BigFloat) -> BigFloat {
        if self.below(z) {
            self.psi_low(z).0
        } else {
            self.psi_high.eval(self.ctx, z)
        }
    }

    fn phi(&self, z: &BigFloat) -> BigFloat {
        if self.below(z) {
            self.phi_low.eval(self.ctx, z)
        } else {
            self.ctx.exp(&self.ctx.mul(&self.l2m, z))
        }
    }

    fn speed(&self, y: &BigFloat) -> BigFloat {
        let ctx = self.ctx;
        let two = ctx.int(2);
        let rate = if self.below(y) {
            ctx.mul(&ctx.mul(&two, &self.mu1), y)
        } else {
            let shift = ctx.mul(&ctx.mul(&two, &ctx.sub(&self.mu1, &self.mu2)), &self.c);
            ctx.add(&shift, &ctx.mul(&ctx.mul(&two, &self.mu2), y))
        };
        ctx.mul(&two, &ctx.exp(&rate))
    }

    fn eval(&self, x: f64, y: f64) -> BigFloat {
        let ctx = self.ctx;
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let v = ctx.mul(&self.psi(&ctx.num(lo)), &self.phi(&ctx.num(hi)));
        ctx.mul(&ctx.mul(&self.speed(&ctx.num(y)), &v), &self.inv_w)
    }
}

/// Gaver-Stehfest rule of order `n` at time `t`.
#[derive(Clone)]
pub(crate) struct ExtendedStehfest {
    precision: usize,
    nodes: Vec<(BigFloat, BigFloat)>,
}

impl std::fmt::Debug for ExtendedStehfest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtendedStehfest").field("n", &self.nodes.len()).field("precision", &self.precision).finish()
    }
}

impl ExtendedStehfest {
    pub(crate) fn new(t: f64, n: usize) -> Result<Self> {
        if !(n >= 2 && n % 2 == 0 && n <= 64) {
            return Err(invalid(format!("extended gaver-stehfest needs an even N <= 64, got {n}")));
        }
        // The largest weight grows like 2^(3N/2 + ...); keep 128 spare bits.
        let ctx = Ctx::new((3 * n + 128).div_ceil(64) * 64)?;
        let ln2 = ctx.ln2();
        let t = ctx.num(t);
        let step = ctx.div(&ln2, &t);
        let fact: Vec<BigFloat> = {
            let mut f = vec![ctx.int(1)];
            for k in 1..=2 * n as u64 {
                let next = ctx.mul(&f[k as usize - 1], &ctx.int(k));
                f.push(next);
            }
            f
        };
        let half = n / 2;
        let nodes = (1..=n)
            .map(|k| {
                let mut v = ctx.int(0);
                for j in k.div_ceil(2)..=k.min(half) {
                    let num = ctx.mul(&ctx.int(j as u64).powi(half, ctx.p, RM), &fact[2 * j]);
                    let den = [half - j, j, j - 1, k - j, 2 * j - k]
                        .iter()
                        .fold(ctx.int(1), |acc, &i| ctx.mul(&acc, &fact[i]));
                    v = ctx.add(&v, &ctx.div(&num, &den));
                }
                if (k + half) % 2 == 1 {
                    v = v.neg();
                }
                (ctx.mul(&step, &ctx.int(k as u64)), ctx.mul(&v, &step))
            })
            .collect();
        Ok(Self { precision: ctx.p, nodes })
    }

    /// `p(t; x, y)` without clamping.
    pub(crate) fn density(&self, system: System, drift: &DriftSpec, x: f64, y: f64) -> Result<f64> {
        let ctx = &Ctx::new(self.precision)?;
        let mut acc = ctx.int(0);
        for (s, w) in &self.nodes {
            let g = Kernel::new(ctx, system, drift, s).eval(x, y);
            acc = ctx.add(&acc, &ctx.mul(w, &g));
        }
        Ok(ctx.to_f64(&acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_kernel() {
        let d = DriftSpec { mu1: 0.0, mu2: 0.0, c: 1.0 };
        let rule = ExtendedStehfest::new(1.0, 32).unwrap();
        let g = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((rule.density(System::Free, &d, 0.2, 1.3).unwrap() - g(1.1)).abs() < 1e-9);
        assert!((rule.density(System::Reflected, &d, 0.2, 1.3).unwrap() - g(1.1) - g(1.5)).abs() < 1e-9);
    }

    #[test]
    fn order_is_checked() {
        assert!(ExtendedStehfest::new(1.0, 15).is_err());
        assert!(ExtendedStehfest::new(1.0, 66).is_err());
    }
}
