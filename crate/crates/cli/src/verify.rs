//! Oracle suite: closed forms against the event-driven engine, plus seeded
//! random configurations.

use std::io::Write;

use pulse_dde::engine::{residual_check, solve, ForcingSchedule, HistoryFunction};
use pulse_dde::model::{eval_periodic, limit_cycle, ModelParams};
use pulse_dde::periodic::{a1_threshold, iterate_pulse_map, sample_pulse_map, simulate_forced};
use pulse_dde::single_pulse::{delta_constants, measure_pulse, pulse_response, response_grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::Ctx;
use crate::output::Output;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, value: f64, tol: f64) -> Check {
    Check { name: name.into(), value, tol, pass: value <= tol }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Closed-form pulse map against the engine, plus the engine residual.
fn forced_oracles(p: &ModelParams, f: &ForcingSchedule, n: usize) -> pulse_dde::Result<(f64, f64)> {
    let t_end = f.onset(n as u64) + f.sigma + 1e-9;
    let traj = simulate_forced(p, f, t_end)?;
    let closed = iterate_pulse_map(p, f, n)?;
    let sim = sample_pulse_map(&traj, f, n)?;
    let err = max_abs(&closed.onset, &sim.onset).max(max_abs(&closed.offset, &sim.offset));
    Ok((err, residual_check(&traj, p, f, 2000)))
}

pub fn suite(ctx: &Ctx, random_cases: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();

    let unit = ModelParams::new(1.0, 1.0, 1.0)?;
    out.push(check("limit cycle period (unit parameters) vs 2.97976", (limit_cycle(&unit).period - 2.97976).abs(), 5e-6));

    // Configured model when present, unit parameters otherwise.
    let given = ctx.cfg.model.is_some() || ctx.ov.tau.is_some() || ctx.ov.beta_u.is_some() || ctx.ov.beta_l.is_some();
    let p = if given { ctx.model()? } else { unit };
    let lc = limit_cycle(&p);
    let traj = solve(&p, &HistoryFunction::limit_cycle(&p, &lc, 0.0), &ForcingSchedule::none(), 10.0 * lc.period)?;
    let mut err: f64 = 0.0;
    for k in 0..=5000 {
        let t = 10.0 * lc.period * k as f64 / 5000.0;
        err = err.max((traj.value(t) - eval_periodic(&lc, &p, t)).abs());
    }
    out.push(check("unperturbed engine vs closed-form cycle", err, 1e-10));

    // Single pulse, a < beta_U: the cycle-length maximum sits at delta2.
    let (sigma, a) = (1.0, 0.5);
    let d2 = delta_constants(&unit, sigma, a)?.delta2.value().unwrap_or(f64::NAN);
    let t_d2 = pulse_response(&unit, d2, sigma, a)?.cycle_length;
    let expect = limit_cycle(&unit).period + (unit.beta_u / (unit.beta_u - a * -(-sigma).exp_m1())).ln();
    out.push(check("cycle length at delta2 vs closed-form maximum", (t_d2 - expect).abs(), 1e-9));
    let grid = response_grid(&unit, sigma, a, 400, ctx.exec)?;
    let mut min_f = f64::INFINITY;
    for (_, r) in &grid {
        if let Ok(r) = r {
            min_f = min_f.min(r.resetting_time);
        }
    }
    out.push(check("min resetting time equals sigma", (min_f - sigma).abs(), 1e-9));
    // A pulse one full period later sees the same cycle state.
    let per = limit_cycle(&unit).period;
    let (_, m0) = measure_pulse(&unit, 0.0, sigma, a)?;
    let (_, mt) = measure_pulse(&unit, per, sigma, a)?;
    out.push(check("endpoint closure T(0) = T(period)", (m0.shift - mt.shift).abs(), 1e-9));
    out.push(check("endpoint closure F(0) = F(period)", (m0.return_time - (mt.return_time - per)).abs(), 1e-9));

    // Above-threshold periodic forcing from x = 0.
    let p1 = ModelParams::new(1.0, 0.4, 1.4)?;
    let a1 = a1_threshold(p1.beta_u, 0.6, 0.3)?;
    let f1 = ForcingSchedule::periodic(limit_cycle(&p1).z2, 0.6, 0.3, 1.5 * a1)?;
    let (e, r) = forced_oracles(&p1, &f1, 40)?;
    out.push(check("pulse map closed form vs engine", e, 1e-10));
    out.push(check("forced run residual", r, 1e-9));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_map, mut worst_res): (f64, f64) = (0.0, 0.0);
    for _ in 0..random_cases {
        let tau = rng.gen_range(0.5..2.0);
        let p = ModelParams::new(tau, rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5))?;
        let sigma = rng.gen_range(0.05..1.0) * tau;
        let alpha = rng.gen_range(0.05..1.0);
        let a = a1_threshold(p.beta_u, sigma, alpha)? * rng.gen_range(1.0..3.0);
        let f = ForcingSchedule::periodic(limit_cycle(&p).z2, sigma, alpha, a)?;
        let (e, r) = forced_oracles(&p, &f, 30)?;
        worst_map = worst_map.max(e);
        worst_res = worst_res.max(r);
    }
    if random_cases > 0 {
        out.push(check(format!("random pulse maps vs engine ({random_cases} cases, seed {seed})"), worst_map, 1e-9));
        out.push(check(format!("random residuals ({random_cases} cases, seed {seed})"), worst_res, 1e-9));
    }
    Ok(out)
}

pub fn run(ctx: &Ctx, out: &mut Output, random_cases: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let n = random_cases.or(ctx.cfg.verify.random_cases).unwrap_or(50);
    let seed = seed.or(ctx.cfg.verify.seed).unwrap_or(0);
    let checks = suite(ctx, n, seed)?;
    out.note("random_cases", n);
    out.note("seed", seed);
    out.emit(&checks, |w: &mut dyn Write| {
        writeln!(w, "check,value,tol,status")?;
        for c in &checks {
            writeln!(w, "\"{}\",{:e},{:e},{}", c.name, c.value, c.tol, if c.pass { "PASS" } else { "FAIL" })?;
        }
        Ok(())
    })?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}
