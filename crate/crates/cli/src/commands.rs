//! The four subcommands. Each returns its tables and a JSON summary; writing
//! them is left to the caller.

use fpt_core::montecarlo::{
    joint_lt_from_samples, phi_from_samples, simulate_fixed_level, simulate_to_jump, HitKind, HitSample,
};
use fpt_core::{
    density_histograms, joint_lt, phi_quadruple, phi_tilde_quadruple, reflected_hit_lt, simulate_hitting,
    two_sided_exit_lt, BoundarySpec, DensityRow, DriftSpec, JointVariant, MCEstimate, SimConfig, System,
    TransformQuery,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Quantity, RunConfig};
use crate::error::CliError;
use crate::output::{Cell, Table};

pub const TRANSFORM_COLUMNS: [&str; 12] =
    ["system", "mu1", "mu2", "c", "b", "lambda", "alpha", "theta", "x", "value", "method", "variant"];

pub const VALIDATE_COLUMNS: [&str; 16] = [
    "system", "mu1", "mu2", "c", "b", "lambda", "alpha", "theta", "x", "value", "method", "variant", "mc_value",
    "mc_se", "z", "pass",
];

pub const DENSITY_COLUMNS: [&str; 9] = ["system", "mu1", "mu2", "c", "t", "x", "y", "density", "clamped"];

pub const DENSITY_VALIDATE_COLUMNS: [&str; 11] =
    ["system", "mu1", "mu2", "c", "x", "t", "y", "density", "mc_density", "mc_se", "z"];

pub const SIMULATE_COLUMNS: [&str; 18] = [
    "system", "mu1", "mu2", "c", "b", "lambda", "x", "seed", "n_paths", "dt", "p_lower", "p_upper",
    "p_boundary_jump", "p_censored", "p_jumped", "mean_tau", "se_tau", "mean_x_tau",
];

pub const SAMPLE_COLUMNS: [&str; 7] = ["system", "x", "path", "tau", "x_tau", "hit_kind", "jumped"];

/// What a subcommand produced. `tables[0]` is the main output; the others
/// are written next to it under their tag.
#[derive(Debug)]
pub struct Outcome {
    pub tables: Vec<(&'static str, Table)>,
    pub summary: Value,
    /// Seeds of the individual simulations, in the order they ran.
    pub streams: Vec<Value>,
    /// Set when `validate` found a disagreement.
    pub failure: Option<String>,
}

fn model_cells(system: System, d: &DriftSpec, bd: &BoundarySpec) -> Vec<Cell> {
    vec![system.name().into(), d.mu1.into(), d.mu2.into(), d.c.into(), bd.b.into(), bd.lambda.into()]
}

/// The configured variants that apply to `system`.
fn variants(cfg: &RunConfig, system: System) -> Vec<JointVariant> {
    JointVariant::all(system)
        .into_iter()
        .filter(|v| cfg.variants.rates.contains(&v.rate))
        .filter(|v| system == System::Free || cfg.variants.readings.contains(&v.reading))
        .collect()
}

/// Exit-transform labels and values at `(theta, x)` for a level fixed at `b`.
fn exit_values(system: System, d: &DriftSpec, theta: f64, b: f64, x: f64) -> fpt_core::Result<Vec<(&'static str, f64)>> {
    Ok(match system {
        System::Free => {
            let (w1, w2) = two_sided_exit_lt(d, theta, b, x)?;
            vec![("omega1", w1), ("omega2", w2)]
        }
        System::Reflected => vec![("hit", reflected_hit_lt(d, theta, b, x)?)],
    })
}

fn phi_values(system: System, d: &DriftSpec, bd: &BoundarySpec, alpha: f64, theta: f64, x: f64) -> fpt_core::Result<[f64; 4]> {
    match system {
        System::Free => phi_quadruple(d, bd, alpha, theta, x),
        System::Reflected => phi_tilde_quadruple(d, bd, alpha, theta, x),
    }
}

const PHI_LABELS: [&str; 4] = ["phi1", "phi2", "phi3", "phi4"];

pub fn transform(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let bd = cfg.boundary()?;
    let g = &cfg.grid;
    cfg.require("theta", &g.theta)?;
    cfg.require("x", &g.x)?;
    let needs_alpha = cfg.quantities.iter().any(|q| *q != Quantity::Exit);
    if needs_alpha {
        cfg.require("alpha", &g.alpha)?;
    }
    let d = &cfg.drift;
    let mut points = Vec::new();
    for &system in &cfg.systems {
        for &x in &g.x {
            for &theta in &g.theta {
                points.push((system, x, theta));
            }
        }
    }
    let blocks: Vec<Result<Vec<Vec<Cell>>, CliError>> = points
        .par_iter()
        .map(|&(system, x, theta)| {
            let mut rows = Vec::new();
            let row = |alpha: Cell, value: f64, method: &str, variant: String| {
                let mut r = model_cells(system, d, bd);
                r.extend([alpha, theta.into(), x.into(), value.into(), method.into(), variant.into()]);
                r
            };
            for q in &cfg.quantities {
                match q {
                    Quantity::Joint => {
                        for &alpha in &g.alpha {
                            let query = TransformQuery::new(alpha, theta, x)?;
                            for v in variants(cfg, system) {
                                let r = joint_lt(system, d, bd, &query, v)?;
                                let method = if r.degenerate { "start-on-barrier" } else { "killed-expectation" };
                                rows.push(row(alpha.into(), r.value, method, v.label(system)));
                            }
                        }
                    }
                    Quantity::Phi => {
                        for &alpha in &g.alpha {
                            let p = phi_values(system, d, bd, alpha, theta, x)?;
                            for (label, v) in PHI_LABELS.iter().zip(p) {
                                rows.push(row(alpha.into(), v, "closed-form", label.to_string()));
                            }
                        }
                    }
                    Quantity::Exit => {
                        for (label, v) in exit_values(system, d, theta, bd.b, x)? {
                            rows.push(row(Cell::Empty, v, "closed-form", label.to_string()));
                        }
                    }
                }
            }
            Ok(rows)
        })
        .collect();
    let mut table = Table::new(&TRANSFORM_COLUMNS);
    for block in blocks {
        for r in block? {
            table.push(r);
        }
    }
    let summary = json!({ "rows": table.rows.len() });
    Ok(Outcome { tables: vec![("main", table)], summary, streams: Vec::new(), failure: None })
}

pub fn density(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = &cfg.grid;
    cfg.require("t", &g.t)?;
    cfg.require("x", &g.x)?;
    cfg.require("y", &g.y)?;
    let d = &cfg.drift;
    let mut points = Vec::new();
    for &system in &cfg.systems {
        for &t in &g.t {
            for &x in &g.x {
                points.push((system, t, x));
            }
        }
    }
    let blocks: Vec<Result<Vec<Vec<Cell>>, CliError>> = points
        .par_iter()
        .map(|&(system, t, x)| {
            let row = DensityRow::new(system, d, t, x, &cfg.inversion)?;
            g.y.iter()
                .map(|&y| {
                    let p = row.density(y)?;
                    Ok(vec![
                        system.name().into(),
                        d.mu1.into(),
                        d.mu2.into(),
                        d.c.into(),
                        t.into(),
                        x.into(),
                        y.into(),
                        p.value.into(),
                        p.clamped.into(),
                    ])
                })
                .collect()
        })
        .collect();
    let mut table = Table::new(&DENSITY_COLUMNS);
    let mut max_clamp = 0.0f64;
    for block in blocks {
        for r in block? {
            if let Cell::Num(c) = r[8] {
                max_clamp = max_clamp.max(c);
            }
            table.push(r);
        }
    }
    let summary = json!({ "rows": table.rows.len(), "max_clamped": max_clamp });
    Ok(Outcome { tables: vec![("main", table)], summary, streams: Vec::new(), failure: None })
}

/// Hands out one seed per simulation and remembers what it was for.
struct Streams {
    base: u64,
    log: Vec<Value>,
}

impl Streams {
    fn next(&mut self, sim: &SimConfig, purpose: &str, system: System, x: f64) -> SimConfig {
        let seed = self.base.wrapping_add(self.log.len() as u64);
        self.log.push(json!({ "purpose": purpose, "system": system.name(), "x": x, "seed": seed }));
        SimConfig { seed, ..*sim }
    }
}

#[derive(Default)]
struct Tally {
    cells: usize,
    passed: usize,
    max_abs_z: f64,
}

impl Tally {
    fn add(&mut self, z: f64, pass: bool) {
        self.cells += 1;
        self.passed += usize::from(pass);
        self.max_abs_z = self.max_abs_z.max(z.abs());
    }

    fn json(&self) -> Value {
        json!({ "cells": self.cells, "passed": self.passed, "max_abs_z": self.max_abs_z })
    }
}

fn estimate_values(values: Vec<f64>, censored: usize, theta: f64, t_max: f64) -> MCEstimate {
    MCEstimate::from_values(&values, censored, (-theta * t_max).exp())
}

/// Analytic against Monte Carlo. Joint-transform variants are scored side
/// by side and the run fails only when no variant of a system passes every
/// cell; every other check must pass outright.
pub fn validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let bd = cfg.boundary()?;
    let g = &cfg.grid;
    let d = &cfg.drift;
    let th = cfg.thresholds;
    let t_max = cfg.sim.t_max;
    if !cfg.quantities.is_empty() {
        cfg.require("theta", &g.theta)?;
        cfg.require("x", &g.x)?;
    }
    let mut streams = Streams { base: cfg.sim.seed, log: Vec::new() };
    let mut table = Table::new(&VALIDATE_COLUMNS);
    let mut failures = Vec::new();
    // (system, variant) -> tally, in first-seen order.
    let mut variant_tallies: Vec<(System, String, Tally)> = Vec::new();
    let mut other = Tally::default();
    let mut censoring = Vec::new();

    let mut note_censoring = |what: &str, system: System, x: f64, fraction: f64, failures: &mut Vec<String>| {
        censoring.push(json!({ "check": what, "system": system.name(), "x": x, "censored_fraction": fraction }));
        if fraction > th.max_censored_fraction {
            failures.push(format!(
                "{system} {what} at x = {x}: censored fraction {fraction} exceeds {}",
                th.max_censored_fraction
            ));
        }
    };

    for &system in &cfg.systems {
        for q in &cfg.quantities {
            for &x in &g.x {
                let mut push = |alpha: Cell, theta: f64, value: f64, method: &str, variant: &str, est: &MCEstimate| {
                    let z = est.z_score(value);
                    let pass = z.abs() < th.z_max;
                    let mut r = model_cells(system, d, bd);
                    r.extend([
                        alpha,
                        theta.into(),
                        x.into(),
                        value.into(),
                        method.into(),
                        variant.into(),
                        est.mean.into(),
                        est.std_err.into(),
                        z.into(),
                        pass.into(),
                    ]);
                    table.push(r);
                    (z, pass)
                };
                match q {
                    Quantity::Joint => {
                        cfg.require("alpha", &g.alpha)?;
                        let sim = streams.next(&cfg.sim, "joint", system, x);
                        let samples = simulate_hitting(system, d, bd, x, &sim)?;
                        let mut fraction = 0.0;
                        for &alpha in &g.alpha {
                            for &theta in &g.theta {
                                let est = joint_lt_from_samples(&samples, alpha, theta, t_max);
                                fraction = est.censored_fraction;
                                let query = TransformQuery::new(alpha, theta, x)?;
                                for v in variants(cfg, system) {
                                    let r = joint_lt(system, d, bd, &query, v)?;
                                    let label = v.label(system);
                                    let method = if r.degenerate { "start-on-barrier" } else { "killed-expectation" };
                                    let (z, pass) = push(alpha.into(), theta, r.value, method, &label, &est);
                                    let pos = variant_tallies.iter().position(|(s, l, _)| *s == system && *l == label);
                                    let pos = pos.unwrap_or_else(|| {
                                        variant_tallies.push((system, label.clone(), Tally::default()));
                                        variant_tallies.len() - 1
                                    });
                                    variant_tallies[pos].2.add(z, pass);
                                }
                            }
                        }
                        note_censoring("joint", system, x, fraction, &mut failures);
                    }
                    Quantity::Exit => {
                        let sim = streams.next(&cfg.sim, "exit", system, x);
                        let samples = simulate_fixed_level(system, d, bd.b, x, &sim)?;
                        let censored = samples.iter().filter(|s| s.hit_kind == HitKind::Censored).count();
                        for &theta in &g.theta {
                            for (label, value) in exit_values(system, d, theta, bd.b, x)? {
                                let kind = if label == "omega1" { HitKind::Lower } else { HitKind::Upper };
                                let values = samples
                                    .iter()
                                    .map(|s| if s.hit_kind == kind { (-theta * s.tau).exp() } else { 0.0 })
                                    .collect();
                                let est = estimate_values(values, censored, theta, t_max);
                                let (z, pass) = push(Cell::Empty, theta, value, "closed-form", label, &est);
                                other.add(z, pass);
                                if !pass {
                                    failures.push(format!("{system} {label} at theta = {theta}, x = {x}: z = {z:.2}"));
                                }
                            }
                        }
                        note_censoring("exit", system, x, censored as f64 / samples.len() as f64, &mut failures);
                    }
                    Quantity::Phi => {
                        cfg.require("alpha", &g.alpha)?;
                        let sim = streams.next(&cfg.sim, "phi", system, x);
                        let samples = simulate_to_jump(system, d, bd, x, &sim)?;
                        let censored = samples.iter().filter(|s| s.censored).count();
                        for &alpha in &g.alpha {
                            for &theta in &g.theta {
                                let analytic = phi_values(system, d, bd, alpha, theta, x)?;
                                let est = phi_from_samples(&samples, alpha, theta, d.c, t_max);
                                for k in 0..4 {
                                    let label = PHI_LABELS[k];
                                    let (z, pass) = push(alpha.into(), theta, analytic[k], "closed-form", label, &est[k]);
                                    other.add(z, pass);
                                    if !pass {
                                        failures.push(format!(
                                            "{system} {label} at alpha = {alpha}, theta = {theta}, x = {x}: z = {z:.2}"
                                        ));
                                    }
                                }
                            }
                        }
                        note_censoring("phi", system, x, censored as f64 / samples.len() as f64, &mut failures);
                    }
                }
            }
        }
    }

    // Adjudication: per system, at least one variant must pass every cell.
    let mut adjudication = Vec::new();
    for &system in &cfg.systems {
        let mine: Vec<&(System, String, Tally)> = variant_tallies.iter().filter(|(s, _, _)| *s == system).collect();
        if mine.is_empty() {
            continue;
        }
        let survivors: Vec<&str> =
            mine.iter().filter(|(_, _, t)| t.passed == t.cells).map(|(_, l, _)| l.as_str()).collect();
        if survivors.is_empty() {
            failures.push(format!("no {system} variant agrees with Monte Carlo in every cell"));
        }
        let per_variant: Vec<Value> = mine
            .iter()
            .map(|(_, l, t)| {
                let mut v = t.json();
                v["variant"] = json!(l);
                v["consistent"] = json!(t.passed == t.cells);
                v
            })
            .collect();
        adjudication.push(json!({ "system": system.name(), "variants": per_variant, "consistent": survivors }));
    }

    let mut tables = vec![("main", table)];
    let mut density_summary = Value::Null;
    if let Some(check) = &cfg.density_check {
        let (t, s) = density_validation(cfg, check, &mut streams, &mut failures)?;
        tables.push(("density", t));
        density_summary = s;
    }

    let summary = json!({
        "z_max": th.z_max,
        "adjudication": adjudication,
        "other_checks": other.json(),
        "censoring": censoring,
        "density": density_summary,
        "failures": failures,
    });
    let failure = (!failures.is_empty()).then(|| {
        let mut msg = failures[..failures.len().min(5)].join("; ");
        if failures.len() > 5 {
            msg.push_str(&format!("; and {} more", failures.len() - 5));
        }
        msg
    });
    Ok(Outcome { tables, summary, streams: streams.log, failure })
}

/// Histogram of `X_t` against the inverted density, bin by bin. The
/// standard error uses the analytic bin mass, so empty bins still score.
fn density_validation(
    cfg: &RunConfig,
    check: &crate::config::DensityCheck,
    streams: &mut Streams,
    failures: &mut Vec<String>,
) -> Result<(Table, Value), CliError> {
    let d = &cfg.drift;
    let bins = check.bins;
    let w = bins.width();
    let edges = bins.edges();
    let mut table = Table::new(&DENSITY_VALIDATE_COLUMNS);
    let mut per_system = Vec::new();
    for &system in &cfg.systems {
        let sim = streams.next(&cfg.sim, "density", system, check.x);
        let hists = density_histograms(system, d, &check.t, check.x, bins, &sim)?;
        let mut worst = 0.0f64;
        for h in &hists {
            let row = DensityRow::new(system, d, h.t, check.x, &cfg.inversion)?;
            let tail = |level: f64| -> fpt_core::Result<f64> {
                if system == System::Reflected && level <= 0.0 {
                    Ok(1.0)
                } else {
                    row.upper_tail(level)
                }
            };
            let tails: Vec<f64> = edges.iter().map(|&e| tail(e)).collect::<fpt_core::Result<_>>()?;
            let n = h.n as f64;
            for i in 0..bins.n {
                let mass = (tails[i] - tails[i + 1]).max(0.0);
                let analytic = mass / w;
                let se = (mass * (1.0 - mass) / n).sqrt() / w;
                let mc = h.density[i];
                let z = if se > 0.0 {
                    (mc - analytic) / se
                } else if mc == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z.abs());
                table.push(vec![
                    system.name().into(),
                    d.mu1.into(),
                    d.mu2.into(),
                    d.c.into(),
                    check.x.into(),
                    h.t.into(),
                    (0.5 * (edges[i] + edges[i + 1])).into(),
                    analytic.into(),
                    mc.into(),
                    se.into(),
                    z.into(),
                ]);
            }
        }
        if worst >= cfg.thresholds.density_z_max {
            failures.push(format!(
                "{system} density histogram: max |z| {worst:.2} reaches {}",
                cfg.thresholds.density_z_max
            ));
        }
        per_system.push(json!({ "system": system.name(), "bins": bins.n * hists.len(), "max_abs_z": worst }));
    }
    Ok((table, json!({ "z_max": cfg.thresholds.density_z_max, "systems": per_system })))
}

fn kind_name(k: HitKind) -> &'static str {
    match k {
        HitKind::Lower => "lower",
        HitKind::Upper => "upper",
        HitKind::BoundaryJump => "boundary-jump",
        HitKind::Censored => "censored",
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let bd = cfg.boundary()?;
    let d = &cfg.drift;
    cfg.require("x", &cfg.grid.x)?;
    let mut streams = Streams { base: cfg.sim.seed, log: Vec::new() };
    let mut table = Table::new(&SIMULATE_COLUMNS);
    let mut raw = Table::new(&SAMPLE_COLUMNS);
    for &system in &cfg.systems {
        for &x in &cfg.grid.x {
            let sim = streams.next(&cfg.sim, "hitting", system, x);
            let samples = simulate_hitting(system, d, bd, x, &sim)?;
            let n = samples.len() as f64;
            let share = |k: HitKind| samples.iter().filter(|s| s.hit_kind == k).count() as f64 / n;
            let done: Vec<&HitSample> = samples.iter().filter(|s| s.hit_kind != HitKind::Censored).collect();
            let tau = MCEstimate::from_values(&done.iter().map(|s| s.tau).collect::<Vec<_>>(), 0, 0.0);
            let place = MCEstimate::from_values(&done.iter().map(|s| s.x_tau).collect::<Vec<_>>(), 0, 0.0);
            let mut r = model_cells(system, d, bd);
            r.extend([
                x.into(),
                sim.seed.into(),
                sim.n_paths.into(),
                sim.dt.into(),
                share(HitKind::Lower).into(),
                share(HitKind::Upper).into(),
                share(HitKind::BoundaryJump).into(),
                share(HitKind::Censored).into(),
                (samples.iter().filter(|s| s.jumped).count() as f64 / n).into(),
                tau.mean.into(),
                tau.std_err.into(),
                place.mean.into(),
            ]);
            table.push(r);
            if cfg.output.samples {
                for (i, s) in samples.iter().enumerate() {
                    raw.push(vec![
                        system.name().into(),
                        x.into(),
                        i.into(),
                        s.tau.into(),
                        s.x_tau.into(),
                        kind_name(s.hit_kind).into(),
                        s.jumped.into(),
                    ]);
                }
            }
        }
    }
    let summary = json!({ "rows": table.rows.len() });
    let mut tables = vec![("main", table)];
    if cfg.output.samples {
        tables.push(("samples", raw));
    }
    Ok(Outcome { tables, summary, streams: streams.log, failure: None })
}
