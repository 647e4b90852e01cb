//! Path-simulation oracle.
//!
//! Euler-Maruyama with the drift taken at the left end of each step,
//! reflection at zero by projection, the jump time `T1` inserted as a grid
//! point, and an optional Brownian-bridge test for crossings between grid
//! points. Every path draws from its own generator keyed by `(seed, index)`,
//! and all reductions run in index order, so results do not depend on the
//! number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Exp1, StandardNormal};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{DriftSpec, System};
use crate::transforms::{BoundarySpec, TransformQuery};

/// Bridge probabilities below `e^{-BRIDGE_CUTOFF}` are not worth a uniform draw.
const BRIDGE_CUTOFF: f64 = 37.0;

/// How a reflected step that lands below zero is brought back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reflection {
    /// `max(0, x)`. Leaves an atom at zero of order `sqrt(dt)` in the
    /// marginal law, which shows up in histogram bins touching the barrier.
    #[default]
    Projection,
    /// `|x|`, the symmetrized scheme.
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    pub t_max: f64,
    pub reflection: Reflection,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            n_paths: 1_000_000,
            seed: 0,
            bridge_correction: true,
            t_max: 1e3,
            reflection: Reflection::Projection,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(invalid(format!("dt must lie in (0, 1e-2], got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be at least 1"));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(invalid(format!("t_max must be finite and at least dt, got {}", self.t_max)));
        }
        Ok(())
    }
}

/// Generator for path `index`; independent of how paths are scheduled.
pub fn path_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
    let key = SplitMix64::seed_from_u64(seed).next_u64();
    Xoshiro256PlusPlus::seed_from_u64(key.wrapping_add(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HitKind {
    Lower,
    /// Level `b`, before the jump.
    Upper,
    /// Level `b + Y`, after the jump.
    BoundaryJump,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitSample {
    pub tau: f64,
    pub x_tau: f64,
    pub hit_kind: HitKind,
    /// `T1 < tau`.
    pub jumped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
    pub censored_fraction: f64,
    /// Upper bound on the bias from scoring censored paths as zero.
    pub censor_bias: f64,
}

impl MCEstimate {
    /// Sample mean and `sd / sqrt(n)` of per-path values.
    pub fn from_values(values: &[f64], censored: usize, censor_bound: f64) -> Self {
        let n = values.len();
        // Constant samples are reported exactly, without summation rounding.
        let constant = values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits());
        let (mean, var) = if constant {
            (values.first().copied().unwrap_or(f64::NAN), 0.0)
        } else {
            let mean = pairwise_sum(values) / n as f64;
            let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (mean, if n > 1 { pairwise_sum(&sq) / (n - 1) as f64 } else { 0.0 })
        };
        let censored_fraction = censored as f64 / n as f64;
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
            censored_fraction,
            censor_bias: censored_fraction * censor_bound,
        }
    }

    /// `(value - mean) / std_err`; zero-variance estimates give 0 on exact
    /// agreement and an infinite score otherwise.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = value - self.mean;
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d.abs() <= 1e-12 * value.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 128 {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Lower,
    Upper,
}

/// Per-step constants for one step length `h`.
#[derive(Debug, Clone, Copy)]
struct Grid {
    sqrt_h: f64,
    two_over_h: f64,
    drift_low: f64,
    drift_high: f64,
}

#[derive(Debug, Clone, Copy)]
struct Scheme {
    mu1: f64,
    mu2: f64,
    c: f64,
    dt: f64,
    full: Grid,
    bridge: bool,
    t_max: f64,
    /// Whole steps of `dt` that make up the horizon.
    max_steps: u64,
    mirror: bool,
}

impl Scheme {
    fn new(drift: &DriftSpec, config: &SimConfig) -> Self {
        let mut s = Self {
            mu1: drift.mu1,
            mu2: drift.mu2,
            c: drift.c,
            dt: config.dt,
            full: Grid { sqrt_h: 0.0, two_over_h: 0.0, drift_low: 0.0, drift_high: 0.0 },
            bridge: config.bridge_correction,
            t_max: config.t_max,
            max_steps: (config.t_max / config.dt).ceil() as u64,
            mirror: config.reflection == Reflection::Mirror,
        };
        s.full = s.grid(config.dt);
        s
    }

    fn grid(&self, h: f64) -> Grid {
        Grid { sqrt_h: h.sqrt(), two_over_h: 2.0 / h, drift_low: self.mu1 * h, drift_high: self.mu2 * h }
    }

    /// Whole steps strictly before `t`, and the remaining partial step in `(0, dt]`.
    fn split(&self, t: f64) -> (u64, f64) {
        let n = ((t / self.dt).ceil() as u64).saturating_sub(1);
        (n, t - n as f64 * self.dt)
    }

    /// Bridge test given `e = 2 (level - a)(level - b) / h`.
    #[inline(always)]
    fn bridge_crossed<R: Rng>(rng: &mut R, e: f64) -> bool {
        e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp()
    }

    /// One step from `*x`. With `watch` set, reports an exit from `(0, level)`
    /// (free) or a visit to `level` (reflected), including crossings caught by
    /// the bridge test. `*x` always holds the new grid value.
    #[inline(always)]
    fn step<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, g: &Grid, x: &mut f64, level: f64, watch: bool) -> Option<Exit> {
        let z: f64 = rng.sample(StandardNormal);
        self.shift::<REFLECTED, R>(rng, g, x, g.sqrt_h * z, level, watch)
    }

    /// [`Scheme::step`] with the Brownian increment `dw` supplied.
    #[inline(always)]
    fn shift<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, g: &Grid, x: &mut f64, dw: f64, level: f64, watch: bool) -> Option<Exit> {
        let cur = *x;
        let mut next = cur + if cur < self.c { g.drift_low } else { g.drift_high } + dw;
        if REFLECTED && next < 0.0 {
            next = if self.mirror { -next } else { 0.0 };
        }
        *x = next;
        if !watch {
            return None;
        }
        if !REFLECTED && next <= 0.0 {
            return Some(Exit::Lower);
        }
        if next >= level {
            return Some(Exit::Upper);
        }
        if self.bridge {
            if !REFLECTED && Self::bridge_crossed(rng, cur * next * g.two_over_h) {
                return Some(Exit::Lower);
            }
            if Self::bridge_crossed(rng, (level - cur) * (level - next) * g.two_over_h) {
                return Some(Exit::Upper);
            }
        }
        None
    }

    /// Up to `n` whole steps; returns the exit and its 1-based step index.
    #[inline(always)]
    fn run<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, x: &mut f64, n: u64, level: f64, watch: bool) -> Option<(Exit, u64)> {
        let g = self.full;
        for k in 1..=n {
            if let Some(e) = self.step::<REFLECTED, R>(rng, &g, x, level, watch) {
                return Some((e, k));
            }
        }
        None
    }

    /// Runs one path until it leaves `(0, level)` (free) or reaches `level`
    /// (reflected). The level switches to `b + y` at time `t1`, which is a
    /// grid point. Hitting times are step midpoints.
    fn hit<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, x0: f64, b: f64, t1: f64, y: f64) -> HitSample {
        let mut x = x0;
        let sample = exit_sample;
        if t1 >= self.t_max {
            return match self.run::<REFLECTED, R>(rng, &mut x, self.max_steps, b, true) {
                Some((e, k)) => sample(e, (k as f64 - 0.5) * self.dt, b, false),
                None => HitSample { tau: self.t_max, x_tau: x, hit_kind: HitKind::Censored, jumped: false },
            };
        }
        let (n1, h) = self.split(t1);
        if let Some((e, k)) = self.run::<REFLECTED, R>(rng, &mut x, n1, b, true) {
            return sample(e, (k as f64 - 0.5) * self.dt, b, false);
        }
        let g = self.grid(h);
        if let Some(e) = self.step::<REFLECTED, R>(rng, &g, &mut x, b, true) {
            return sample(e, t1 - 0.5 * h, b, false);
        }
        let level = b + y;
        let n2 = ((self.t_max - t1) / self.dt).ceil() as u64;
        match self.run::<REFLECTED, R>(rng, &mut x, n2, level, true) {
            Some((e, k)) => sample(e, t1 + (k as f64 - 0.5) * self.dt, level, true),
            None => HitSample { tau: self.t_max, x_tau: x, hit_kind: HitKind::Censored, jumped: true },
        }
    }

    /// Runs one path to `t1`, recording whether it met the fixed barriers
    /// (`0` and `b` free, `b` reflected) on the way. The path is not stopped
    /// at the barriers.
    fn to_jump<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, x0: f64, b: f64, t1: f64) -> JumpSample {
        let mut x = x0;
        let mut hit = if REFLECTED { x0 >= b } else { x0 <= 0.0 || x0 >= b };
        let (n1, h) = self.split(t1);
        if hit {
            self.run::<REFLECTED, R>(rng, &mut x, n1, b, false);
        } else if let Some((_, k)) = self.run::<REFLECTED, R>(rng, &mut x, n1, b, true) {
            hit = true;
            self.run::<REFLECTED, R>(rng, &mut x, n1 - k, b, false);
        }
        let g = self.grid(h);
        hit |= self.step::<REFLECTED, R>(rng, &g, &mut x, b, !hit).is_some();
        JumpSample { t1, x_t1: x, hit_before: hit, censored: false }
    }

    /// Positions at each of the increasing `times`.
    fn positions<const REFLECTED: bool, R: Rng>(&self, rng: &mut R, x0: f64, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let (mut t, mut x) = (0.0, x0);
        for &target in times {
            let (n, h) = self.split(target - t);
            self.run::<REFLECTED, R>(rng, &mut x, n, f64::INFINITY, false);
            let g = self.grid(h);
            self.step::<REFLECTED, R>(rng, &g, &mut x, f64::INFINITY, false);
            t = target;
            out.push(x);
        }
        out
    }
}

fn exit_sample(e: Exit, tau: f64, level: f64, jumped: bool) -> HitSample {
    match e {
        Exit::Lower => HitSample { tau, x_tau: 0.0, hit_kind: HitKind::Lower, jumped },
        Exit::Upper => HitSample {
            tau,
            x_tau: level,
            hit_kind: if jumped { HitKind::BoundaryJump } else { HitKind::Upper },
            jumped,
        },
    }
}

fn check_start(system: System, x: f64) -> Result<()> {
    system.check_state(x)
}

/// Starts on or beyond a barrier exit at time zero.
fn immediate_exit(system: System, x: f64, b: f64) -> Option<HitSample> {
    if system == System::Free && x <= 0.0 {
        Some(exit_sample(Exit::Lower, 0.0, b, false))
    } else if x >= b {
        Some(exit_sample(Exit::Upper, 0.0, b, false))
    } else {
        None
    }
}

fn draw_jump<R: Rng>(rng: &mut R, boundary: &BoundarySpec) -> (f64, f64) {
    let e: f64 = rng.sample(Exp1);
    (e / boundary.lambda, boundary.jump_law.quantile(rng.random::<f64>()))
}

/// Hitting samples of the jumping boundary for `config.n_paths` paths from `x`.
pub fn simulate_hitting(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    x: f64,
    config: &SimConfig,
) -> Result<Vec<HitSample>> {
    drift.validate()?;
    boundary.validate()?;
    config.validate()?;
    check_start(system, x)?;
    let scheme = Scheme::new(drift, config);
    let b = boundary.b;
    Ok((0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            let (t1, y) = draw_jump(&mut rng, boundary);
            if let Some(s) = immediate_exit(system, x, b) {
                return s;
            }
            match system {
                System::Free => scheme.hit::<false, _>(&mut rng, x, b, t1, y),
                System::Reflected => scheme.hit::<true, _>(&mut rng, x, b, t1, y),
            }
        })
        .collect())
}

/// Hitting samples for a level `b` that never jumps.
pub fn simulate_fixed_level(system: System, drift: &DriftSpec, b: f64, x: f64, config: &SimConfig) -> Result<Vec<HitSample>> {
    drift.validate()?;
    config.validate()?;
    check_start(system, x)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("level b must be positive, got {b}")));
    }
    let scheme = Scheme::new(drift, config);
    Ok((0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            if let Some(s) = immediate_exit(system, x, b) {
                return s;
            }
            match system {
                System::Free => scheme.hit::<false, _>(&mut rng, x, b, f64::INFINITY, 0.0),
                System::Reflected => scheme.hit::<true, _>(&mut rng, x, b, f64::INFINITY, 0.0),
            }
        })
        .collect())
}

/// One side of a coupled pair: Brownian increments are accumulated until the
/// walker's own grid point and then applied as a single step.
struct Walker {
    x: f64,
    dw: f64,
    h: f64,
    out: Option<HitSample>,
}

impl Walker {
    fn new(x: f64) -> Self {
        Self { x, dw: 0.0, h: 0.0, out: None }
    }

    fn push(&mut self, dw: f64, h: f64) {
        self.dw += dw;
        self.h += h;
    }

    /// Applies the accumulated increment as one step ending at `t_end`.
    fn flush<const REFLECTED: bool, R: Rng>(&mut self, scheme: &Scheme, rng: &mut R, t_end: f64, level: f64, jumped: bool) {
        let h = std::mem::take(&mut self.h);
        let dw = std::mem::take(&mut self.dw);
        if self.out.is_some() || h <= 0.0 {
            return;
        }
        if let Some(e) = scheme.shift::<REFLECTED, R>(rng, &scheme.grid(h), &mut self.x, dw, level, true) {
            self.out = Some(exit_sample(e, t_end - 0.5 * h, level, jumped));
        }
    }
}

impl Scheme {
    /// One Brownian path discretized at `dt` (coarse) and `dt / 2` (fine).
    /// The coarse increment over each of its steps is the sum of the fine
    /// ones; bridge tests draw from a separate stream.
    fn coupled_hit<const REFLECTED: bool, W: Rng, U: Rng>(
        &self,
        fine: &Scheme,
        normals: &mut W,
        uniforms: &mut U,
        x0: f64,
        b: f64,
        t1: f64,
        y: f64,
    ) -> (HitSample, HitSample) {
        let (mut coarse_w, mut fine_w) = (Walker::new(x0), Walker::new(x0));
        #[allow(clippy::too_many_arguments)]
        fn run<const REFLECTED: bool, W: Rng, U: Rng>(
            coarse: &Scheme,
            fine: &Scheme,
            normals: &mut W,
            uniforms: &mut U,
            n: u64,
            start: f64,
            level: f64,
            jumped: bool,
            coarse_w: &mut Walker,
            fine_w: &mut Walker,
        ) {
            let hf = fine.dt;
            for j in 1..=n {
                if coarse_w.out.is_some() && fine_w.out.is_some() {
                    return;
                }
                let z: f64 = normals.sample(StandardNormal);
                let dw = fine.full.sqrt_h * z;
                let t_end = start + j as f64 * hf;
                fine_w.push(dw, hf);
                fine_w.flush::<REFLECTED, U>(fine, uniforms, t_end, level, jumped);
                coarse_w.push(dw, hf);
                if j % 2 == 0 {
                    coarse_w.flush::<REFLECTED, U>(coarse, uniforms, t_end, level, jumped);
                }
            }
        }
        if t1 >= self.t_max {
            let n = 2 * self.max_steps;
            run::<REFLECTED, W, U>(self, fine, normals, uniforms, n, 0.0, b, false, &mut coarse_w, &mut fine_w);
        } else {
            let (n1, h) = fine.split(t1);
            run::<REFLECTED, W, U>(self, fine, normals, uniforms, n1, 0.0, b, false, &mut coarse_w, &mut fine_w);
            let z: f64 = normals.sample(StandardNormal);
            let dw = h.sqrt() * z;
            fine_w.push(dw, h);
            fine_w.flush::<REFLECTED, U>(fine, uniforms, t1, b, false);
            coarse_w.push(dw, h);
            coarse_w.flush::<REFLECTED, U>(self, uniforms, t1, b, false);
            let n2 = 2 * ((self.t_max - t1) / self.dt).ceil() as u64;
            run::<REFLECTED, W, U>(self, fine, normals, uniforms, n2, t1, b + y, true, &mut coarse_w, &mut fine_w);
        }
        let jumped = t1 < self.t_max;
        let finish = |w: Walker| {
            w.out.unwrap_or(HitSample { tau: self.t_max, x_tau: w.x, hit_kind: HitKind::Censored, jumped })
        };
        (finish(coarse_w), finish(fine_w))
    }
}

/// Hitting samples at `config.dt` and at `config.dt / 2` on shared Brownian
/// paths, for measuring the effect of the step size.
pub fn simulate_hitting_coupled(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    x: f64,
    config: &SimConfig,
) -> Result<(Vec<HitSample>, Vec<HitSample>)> {
    drift.validate()?;
    boundary.validate()?;
    config.validate()?;
    check_start(system, x)?;
    let coarse = Scheme::new(drift, config);
    let fine = Scheme::new(drift, &SimConfig { dt: 0.5 * config.dt, ..*config });
    let b = boundary.b;
    // A second stream per path, keyed away from the first.
    let offset = 1u64 << 63;
    Ok((0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut normals = path_rng(config.seed, i);
            let mut uniforms = path_rng(config.seed, i ^ offset);
            let (t1, y) = draw_jump(&mut normals, boundary);
            if let Some(s) = immediate_exit(system, x, b) {
                return (s, s);
            }
            match system {
                System::Free => coarse.coupled_hit::<false, _, _>(&fine, &mut normals, &mut uniforms, x, b, t1, y),
                System::Reflected => coarse.coupled_hit::<true, _, _>(&fine, &mut normals, &mut uniforms, x, b, t1, y),
            }
        })
        .unzip())
}

/// `e^{-alpha X(tau) - theta tau}` averaged over hitting samples; censored
/// paths score zero.
pub fn joint_lt_from_samples(samples: &[HitSample], alpha: f64, theta: f64, t_max: f64) -> MCEstimate {
    let mut censored = 0;
    let values: Vec<f64> = samples
        .iter()
        .map(|s| {
            if s.hit_kind == HitKind::Censored {
                censored += 1;
                0.0
            } else {
                (-alpha * s.x_tau - theta * s.tau).exp()
            }
        })
        .collect();
    MCEstimate::from_values(&values, censored, (-theta * t_max).exp())
}

pub fn estimate_joint_lt(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    query: &TransformQuery,
    config: &SimConfig,
) -> Result<MCEstimate> {
    query.validate()?;
    let samples = simulate_hitting(system, drift, boundary, query.x, config)?;
    Ok(joint_lt_from_samples(&samples, query.alpha, query.theta, config.t_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub t1: f64,
    pub x_t1: f64,
    /// The path met the barrier(s) before `t1`.
    pub hit_before: bool,
    /// `t1` exceeded the horizon and the path was not run.
    pub censored: bool,
}

/// Position at the jump time and whether the fixed barriers were met first.
pub fn simulate_to_jump(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    x: f64,
    config: &SimConfig,
) -> Result<Vec<JumpSample>> {
    drift.validate()?;
    boundary.validate()?;
    config.validate()?;
    check_start(system, x)?;
    let scheme = Scheme::new(drift, config);
    let b = boundary.b;
    Ok((0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            let (t1, _) = draw_jump(&mut rng, boundary);
            if t1 > config.t_max {
                return JumpSample { t1, x_t1: f64::NAN, hit_before: false, censored: true };
            }
            match system {
                System::Free => scheme.to_jump::<false, _>(&mut rng, x, b, t1),
                System::Reflected => scheme.to_jump::<true, _>(&mut rng, x, b, t1),
            }
        })
        .collect())
}

/// `[Phi1, Phi2, Phi3, Phi4]` estimates from jump-time samples.
pub fn phi_from_samples(samples: &[JumpSample], alpha: f64, theta: f64, c: f64, t_max: f64) -> [MCEstimate; 4] {
    let censored = samples.iter().filter(|s| s.censored).count();
    let bound = (-theta * t_max).exp();
    std::array::from_fn(|k| {
        let values: Vec<f64> = samples
            .iter()
            .map(|s| {
                if s.censored {
                    return 0.0;
                }
                let below = s.x_t1 < c;
                let side = if k % 2 == 0 { below } else { !below };
                let killed = k < 2 || s.hit_before;
                if side && killed {
                    (-alpha * s.x_t1 - theta * s.t1).exp()
                } else {
                    0.0
                }
            })
            .collect();
        MCEstimate::from_values(&values, censored, bound)
    })
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_phi_quadruple(
    system: System,
    drift: &DriftSpec,
    boundary: &BoundarySpec,
    alpha: f64,
    theta: f64,
    x: f64,
    config: &SimConfig,
) -> Result<[MCEstimate; 4]> {
    let samples = simulate_to_jump(system, drift, boundary, x, config)?;
    Ok(phi_from_samples(&samples, alpha, theta, drift.c, config.t_max))
}

/// `n` equal bins on `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper && self.lower.is_finite() && self.upper.is_finite() && self.n > 0) {
            return Err(invalid(format!("bad histogram bins {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.n as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.lower + i as f64 * self.width()).collect()
    }

    fn index(&self, y: f64) -> Option<usize> {
        if y < self.lower || y >= self.upper {
            return None;
        }
        Some((((y - self.lower) / self.width()) as usize).min(self.n - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub t: f64,
    pub bins: BinSpec,
    pub counts: Vec<u64>,
    /// Count per bin divided by `n * width`.
    pub density: Vec<f64>,
    /// Binomial standard error of `density`.
    pub std_err: Vec<f64>,
    /// Samples below and above the binned range.
    pub below: u64,
    pub above: u64,
    pub n: usize,
}

impl Histogram {
    fn build(t: f64, bins: BinSpec, samples: impl Iterator<Item = f64>) -> Self {
        let mut counts = vec![0u64; bins.n];
        let (mut below, mut above, mut n) = (0, 0, 0usize);
        for y in samples {
            n += 1;
            match bins.index(y) {
                Some(i) => counts[i] += 1,
                None if y < bins.lower => below += 1,
                None => above += 1,
            }
        }
        let w = bins.width();
        let nf = n as f64;
        let density = counts.iter().map(|&k| k as f64 / (nf * w)).collect();
        let std_err = counts
            .iter()
            .map(|&k| {
                let p = k as f64 / nf;
                (p * (1.0 - p) / nf).sqrt() / w
            })
            .collect();
        Self { t, bins, counts, density, std_err, below, above, n }
    }
}

/// Histograms of `X_t` for each of the increasing `times`, all from one set of paths.
pub fn density_histograms(
    system: System,
    drift: &DriftSpec,
    times: &[f64],
    x: f64,
    bins: BinSpec,
    config: &SimConfig,
) -> Result<Vec<Histogram>> {
    drift.validate()?;
    config.validate()?;
    bins.validate()?;
    check_start(system, x)?;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid("histogram times must be positive"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("histogram times must be strictly increasing"));
    }
    let scheme = Scheme::new(drift, config);
    let paths: Vec<Vec<f64>> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            match system {
                System::Free => scheme.positions::<false, _>(&mut rng, x, times),
                System::Reflected => scheme.positions::<true, _>(&mut rng, x, times),
            }
        })
        .collect();
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| Histogram::build(t, bins, paths.iter().map(|p| p[k])))
        .collect())
}

pub fn density_histogram(
    system: System,
    drift: &DriftSpec,
    t: f64,
    x: f64,
    bins: BinSpec,
    config: &SimConfig,
) -> Result<Histogram> {
    Ok(density_histograms(system, drift, &[t], x, bins, config)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::JumpLaw;

    fn small(seed: u64) -> SimConfig {
        SimConfig { dt: 1e-3, n_paths: 2000, seed, ..Default::default() }
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }

    #[test]
    fn standard_error_definition() {
        let e = MCEstimate::from_values(&[1.0, 2.0, 3.0, 4.0], 0, 0.0);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn start_on_barrier_hits_immediately() {
        let d = DriftSpec::new(0.1, 0.1, 1.0).unwrap();
        let bd = BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap();
        let q = TransformQuery::new(0.3, 0.5, 2.0).unwrap();
        let e = estimate_joint_lt(System::Reflected, &d, &bd, &q, &small(1)).unwrap();
        assert!((e.mean - (-0.6f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn reflected_paths_stay_nonnegative() {
        let d = DriftSpec::new(-1.0, -1.0, 1.0).unwrap();
        let bins = BinSpec { lower: -1.0, upper: 3.0, n: 40 };
        let h = density_histogram(System::Reflected, &d, 0.5, 0.1, bins, &small(3)).unwrap();
        assert_eq!(h.counts[..10].iter().sum::<u64>(), 0);
        assert_eq!(h.below, 0);
    }

    #[test]
    fn same_seed_same_samples() {
        let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
        let bd = BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap();
        let a = simulate_hitting(System::Free, &d, &bd, 1.0, &small(7)).unwrap();
        let b = simulate_hitting(System::Free, &d, &bd, 1.0, &small(7)).unwrap();
        assert_eq!(a, b);
        let c = simulate_hitting(System::Free, &d, &bd, 1.0, &small(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hit_kinds_are_consistent() {
        let d = DriftSpec::new(0.4, -0.2, 1.0).unwrap();
        let bd = BoundarySpec::new(2.0, 1.0, JumpLaw::degenerate(1.0)).unwrap();
        for s in simulate_hitting(System::Free, &d, &bd, 1.0, &small(9)).unwrap() {
            match s.hit_kind {
                HitKind::Lower => assert_eq!(s.x_tau, 0.0),
                HitKind::Upper => assert!(s.x_tau == 2.0 && !s.jumped),
                HitKind::BoundaryJump => assert!(s.x_tau == 3.0 && s.jumped),
                HitKind::Censored => assert_eq!(s.tau, 1e3),
            }
        }
    }
}
