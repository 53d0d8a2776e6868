//! Subcommand implementations.

use std::io::Write;

use pulse_dde::bifurcation::{
    self, Continuation, Direction, SectionSpec, SweepParameter, SweepSpec, EXTREMA_CLUSTER_TOL,
};
use pulse_dde::engine::{residual_check, solve, Crossing, ForcingSchedule, HistoryFunction, MERGE_REL, ZERO_REL};
use pulse_dde::model::{limit_cycle, ModelParams};
use pulse_dde::par::Execution;
use pulse_dde::periodic::{self, a1_threshold, detect_locking_with, LOCKING_TOL, MAX_LOCKING_RATIO};
use pulse_dde::single_pulse::{self, PHASE_MATCH_TOL};
use pulse_dde::treatment::{self, BandSpec, NeutrophilMapping, PhysioParams, ScanSpec};
use pulse_dde::Error;
use serde::Serialize;

use crate::config::{
    resolve_model, AmplitudeSpec, CrossingSel, ForcingValues, NamedAmplitude, Overrides, RunConfig,
};
use crate::output::Output;
use crate::{Cli, CliError, Cmd, ContinuationArg, DirArg, ParamArg, TreatCmd};

pub struct Ctx {
    pub cfg: RunConfig,
    pub ov: Overrides,
    pub exec: Execution,
}

impl Ctx {
    pub fn model(&self) -> Result<ModelParams, CliError> {
        resolve_model(&self.cfg, &self.ov)
    }

    pub fn forcing(&self, p: &ModelParams) -> ForcingValues {
        ForcingValues::resolve(&self.cfg, &self.ov, p)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ov = Overrides {
        tau: cli.tau,
        beta_u: cli.beta_u,
        beta_l: cli.beta_l,
        delta0: cli.delta0,
        sigma: cli.sigma,
        alpha: cli.alpha,
        a: cli.a,
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Ctx { cfg, ov, exec };
    let name = command_name(&cli.cmd);
    let mut out = Output::new(cli.format, cli.out.clone(), name);
    if let Some(path) = &cli.config {
        out.note("config", path.display());
    }
    out.note("parallel", exec.is_parallel());
    match &cli.cmd {
        Cmd::Simulate { t_end, samples } => simulate(&ctx, &mut out, *t_end, samples.or(cli.mesh)),
        Cmd::LimitCycle => limit_cycle_cmd(&ctx, &mut out),
        Cmd::Classify { delta } => classify(&ctx, &mut out, *delta),
        Cmd::Clm => clm(&ctx, &mut out, cli.mesh),
        Cmd::ForcedCycle => forced_cycle(&ctx, &mut out),
        Cmd::Lock { t_end, t_lo } => lock(&ctx, &mut out, *t_end, *t_lo),
        Cmd::Treat(t) => treat(&ctx, &mut out, t),
        Cmd::Sweep { parameter, lo, hi, continuation } => {
            sweep(&ctx, &mut out, *parameter, *lo, *hi, *continuation, cli.mesh, cli.direction)
        }
        Cmd::Poincare { level, crossing, t_end, t_lo } => poincare(&ctx, &mut out, *level, *crossing, *t_end, *t_lo),
        Cmd::Embed { t_end, t_lo } => embed(&ctx, &mut out, *t_end, *t_lo, cli.mesh),
        Cmd::Verify { random_cases } => crate::verify::run(&ctx, &mut out, *random_cases, cli.seed),
    }
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Simulate { .. } => "simulate",
        Cmd::LimitCycle => "limit-cycle",
        Cmd::Classify { .. } => "classify",
        Cmd::Clm => "clm",
        Cmd::ForcedCycle => "forced-cycle",
        Cmd::Lock { .. } => "lock",
        Cmd::Treat(TreatCmd::MinRestInterval { .. }) => "treat min-rest-interval",
        Cmd::Treat(TreatCmd::FitBand { .. }) => "treat fit-band",
        Cmd::Treat(TreatCmd::Gcsf { .. }) => "treat gcsf",
        Cmd::Treat(TreatCmd::ChemoScan { .. }) => "treat chemo-scan",
        Cmd::Sweep { .. } => "sweep",
        Cmd::Poincare { .. } => "poincare",
        Cmd::Embed { .. } => "embed",
        Cmd::Verify { .. } => "verify",
    }
}

fn note_model(out: &mut Output, p: &ModelParams) {
    out.note("tau", p.tau);
    out.note("beta_u", p.beta_u);
    out.note("beta_l", p.beta_l);
}

fn note_forcing(out: &mut Output, f: &ForcingSchedule) {
    out.note("delta0", f.delta0);
    out.note("sigma", f.sigma);
    out.note("alpha", f.alpha);
    out.note("a", f.amplitude);
    out.note("pulse_count", f.pulse_count.map_or("unbounded".to_string(), |n| n.to_string()));
}

fn note_engine(out: &mut Output) {
    out.note("engine_merge_rel", MERGE_REL);
    out.note("engine_zero_rel", ZERO_REL);
}

/// Rows of `quantity,value`.
fn kv_csv(w: &mut dyn Write, rows: &[(&str, String)]) -> std::io::Result<()> {
    writeln!(w, "quantity,value")?;
    for (k, v) in rows {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

fn periodic_schedule(ctx: &Ctx, p: &ModelParams) -> Result<ForcingSchedule, CliError> {
    let fv = ctx.forcing(p);
    if fv.alpha.is_none() {
        return Err(CliError::Validation("forcing: alpha missing; this command needs a periodic schedule".into()));
    }
    fv.schedule()
}

fn simulate(ctx: &Ctx, out: &mut Output, t_end: Option<f64>, samples: Option<usize>) -> Result<(), CliError> {
    let p = ctx.model()?;
    let lc = limit_cycle(&p);
    let fv = ctx.forcing(&p);
    let f = if fv.sigma.is_some() || fv.a.is_some() { fv.schedule()? } else { ForcingSchedule::none() };
    let t_end = t_end.or(ctx.cfg.simulate.t_end).unwrap_or(10.0 * lc.period);
    let samples = samples.or(ctx.cfg.simulate.samples).unwrap_or(2000);
    let phase = ctx.cfg.simulate.phase.unwrap_or(0.0);
    let traj = solve(&p, &HistoryFunction::limit_cycle(&p, &lc, phase), &f, t_end)?;
    let res = residual_check(&traj, &p, &f, 1000);
    note_model(out, &p);
    note_forcing(out, &f);
    note_engine(out);
    out.note("history_phase", phase);
    out.note("t_end", t_end);
    out.note("samples", samples);
    out.note("residual", res);
    out.emit(&traj, |w| traj.write_csv(w, samples))
}

#[derive(Serialize)]
struct LimitCycleOut {
    x_min: f64,
    x_max: f64,
    z1: f64,
    z2: f64,
    t_max: f64,
    period: f64,
}

fn limit_cycle_cmd(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let p = ctx.model()?;
    let lc = limit_cycle(&p);
    note_model(out, &p);
    let d = LimitCycleOut { x_min: lc.x_min, x_max: lc.x_max, z1: lc.z1, z2: lc.z2, t_max: lc.t_max, period: lc.period };
    out.emit(&d, |w| {
        kv_csv(
            w,
            &[
                ("x_min", d.x_min.to_string()),
                ("x_max", d.x_max.to_string()),
                ("z1", d.z1.to_string()),
                ("z2", d.z2.to_string()),
                ("t_max", d.t_max.to_string()),
                ("period", format!("{:.5}", d.period)),
                ("period_full", d.period.to_string()),
            ],
        )
    })
}

#[derive(Serialize)]
struct ClassifyOut {
    constants: single_pulse::DeltaConstants,
    response: single_pulse::PulseResponse,
}

fn classify(ctx: &Ctx, out: &mut Output, delta: Option<crate::config::TimeSpec>) -> Result<(), CliError> {
    let p = ctx.model()?;
    let fv = ctx.forcing(&p);
    let sigma = ForcingValues::need(fv.sigma, "sigma")?;
    let a = ForcingValues::need(fv.a, "a")?;
    let delta = match delta.or(ctx.cfg.classify.delta) {
        Some(d) => d.resolve(&p),
        None => ForcingValues::need(fv.delta0, "delta0")?,
    };
    let constants = single_pulse::delta_constants(&p, sigma, a)?;
    let response = single_pulse::pulse_response(&p, delta, sigma, a)?;
    note_model(out, &p);
    out.note("sigma", sigma);
    out.note("a", a);
    out.note("phase_match_tol", PHASE_MATCH_TOL);
    note_engine(out);
    let th = |t: &single_pulse::Threshold| t.value().map_or("undefined".to_string(), |v| v.to_string());
    let rows = vec![
        ("delta", delta.to_string()),
        ("case", response.case.to_string()),
        ("resetting_time", response.resetting_time.to_string()),
        ("cycle_length", response.cycle_length.to_string()),
        ("new_phase", response.new_phase.to_string()),
        ("measured_resetting_time", response.measured_resetting_time.to_string()),
        ("measured_cycle_length", response.measured_cycle_length.to_string()),
        ("formula_available", response.formula_available.to_string()),
        ("delta1", th(&constants.delta1)),
        ("delta2", th(&constants.delta2)),
        ("delta4", th(&constants.delta4)),
        ("delta4_hat", th(&constants.delta4_hat)),
        ("delta5", th(&constants.delta5)),
        ("delta_inf", th(&constants.delta_inf)),
    ];
    let d = ClassifyOut { constants, response };
    out.emit(&d, |w| kv_csv(w, &rows))
}

#[derive(Serialize)]
struct ClmRow {
    delta: f64,
    case_label: String,
    resetting_time: f64,
    cycle_length: f64,
}

fn clm(ctx: &Ctx, out: &mut Output, mesh: Option<usize>) -> Result<(), CliError> {
    let p = ctx.model()?;
    let fv = ctx.forcing(&p);
    let sigma = ForcingValues::need(fv.sigma, "sigma")?;
    let a = ForcingValues::need(fv.a, "a")?;
    let n = mesh.or(ctx.cfg.clm.mesh).unwrap_or(2000);
    let grid = single_pulse::response_grid(&p, sigma, a, n, ctx.exec)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (delta, r) in grid {
        rows.push(match r {
            Ok(r) => ClmRow {
                delta,
                case_label: r.case.to_string(),
                resetting_time: r.resetting_time,
                cycle_length: r.cycle_length,
            },
            Err(Error::InfiniteResetting { .. }) => ClmRow {
                delta,
                case_label: single_pulse::classify(&p, delta, sigma, a)?.to_string(),
                resetting_time: f64::INFINITY,
                cycle_length: f64::INFINITY,
            },
            Err(e) => return Err(e.into()),
        });
    }
    note_model(out, &p);
    out.note("sigma", sigma);
    out.note("a", a);
    out.note("mesh", n);
    out.note("grid", "delta = k * period / mesh, k = 0..mesh-1");
    out.note("phase_match_tol", PHASE_MATCH_TOL);
    note_engine(out);
    out.emit(&rows, |w| {
        writeln!(w, "delta,case_label,F,T")?;
        for r in &rows {
            writeln!(w, "{},{},{},{}", r.delta, r.case_label, r.resetting_time, r.cycle_length)?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct DosingOut {
    a: f64,
    alpha: f64,
    sigma: f64,
    a1: f64,
    x_min_p: f64,
    x_max_p: f64,
    period: f64,
}

impl DosingOut {
    fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("a", self.a.to_string()),
            ("alpha", self.alpha.to_string()),
            ("sigma", self.sigma.to_string()),
            ("a1", self.a1.to_string()),
            ("x_min_p", self.x_min_p.to_string()),
            ("x_max_p", self.x_max_p.to_string()),
            ("period", self.period.to_string()),
        ]
    }
}

fn forced_cycle(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let p = ctx.model()?;
    let fv = ctx.forcing(&p);
    let sigma = ForcingValues::need(fv.sigma, "sigma")?;
    let alpha = ForcingValues::need(fv.alpha, "alpha")?;
    let a = ForcingValues::need(fv.a, "a")?;
    let c = periodic::forced_cycle(&p, sigma, alpha, a)?;
    note_model(out, &p);
    let d = DosingOut { a, alpha, sigma, a1: c.a1, x_min_p: c.x_min_p, x_max_p: c.x_max_p, period: c.period };
    out.emit(&d, |w| kv_csv(w, &d.rows()))
}

#[derive(Serialize)]
struct LockOut {
    locked: bool,
    q: Option<u32>,
    period: Option<f64>,
    forcing_period: f64,
    t_lo: f64,
    t_end: f64,
}

fn lock(ctx: &Ctx, out: &mut Output, t_end: Option<f64>, t_lo: Option<f64>) -> Result<(), CliError> {
    let p = ctx.model()?;
    let f = periodic_schedule(ctx, &p)?;
    let o = &ctx.cfg.lock;
    let t_end = t_end.or(o.t_end).unwrap_or(1200.0);
    let t_lo = t_lo.or(o.t_lo).unwrap_or(t_end / 2.0);
    let max_q = o.max_q.unwrap_or(MAX_LOCKING_RATIO);
    let tol = o.tol.unwrap_or(LOCKING_TOL);
    let traj = periodic::simulate_forced(&p, &f, t_end)?;
    let l = detect_locking_with(&traj, f.period(), t_lo, max_q, tol);
    note_model(out, &p);
    note_forcing(out, &f);
    note_engine(out);
    out.note("max_q", max_q);
    out.note("locking_tol", tol);
    let d = LockOut {
        locked: l.is_some(),
        q: l.map(|l| l.q),
        period: l.map(|l| l.period),
        forcing_period: f.period(),
        t_lo,
        t_end,
    };
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
    let rows = vec![
        ("locked", d.locked.to_string()),
        ("q", opt(d.q.map(|q| q.to_string()))),
        ("period", opt(d.period.map(|v| v.to_string()))),
        ("forcing_period", d.forcing_period.to_string()),
        ("t_lo", t_lo.to_string()),
        ("t_end", t_end.to_string()),
    ];
    out.emit(&d, |w| kv_csv(w, &rows))
}

fn physio(ctx: &Ctx) -> PhysioParams {
    ctx.cfg.physio.unwrap_or_default()
}

fn treat(ctx: &Ctx, out: &mut Output, t: &TreatCmd) -> Result<(), CliError> {
    let o = &ctx.cfg.treat;
    match t {
        TreatCmd::MinRestInterval { x_norm } => {
            let p = ctx.model()?;
            let fv = ctx.forcing(&p);
            let a = ForcingValues::need(ctx.ov.a.or(o.min_rest_interval.a).or(fv.a), "a")?;
            let sigma = ForcingValues::need(ctx.ov.sigma.or(o.min_rest_interval.sigma).or(fv.sigma), "sigma")?;
            let x_norm = ForcingValues::need(x_norm.or(o.min_rest_interval.x_norm), "x-norm")?;
            let alpha = treatment::min_rest_interval(a, sigma, x_norm, p.beta_u)?;
            let c = periodic::forced_cycle(&p, sigma, alpha, a)?;
            note_model(out, &p);
            out.note("x_norm", x_norm);
            let d = DosingOut { a, alpha, sigma, a1: c.a1, x_min_p: c.x_min_p, x_max_p: c.x_max_p, period: c.period };
            out.emit(&d, |w| kv_csv(w, &d.rows()))
        }
        TreatCmd::FitBand { x_norm, f_min, f_max } => {
            let p = ctx.model()?;
            let fv = ctx.forcing(&p);
            let b = &o.fit_band;
            let band = BandSpec {
                x_norm: ForcingValues::need(x_norm.or(b.x_norm), "x-norm")?,
                f_min: ForcingValues::need(f_min.or(b.f_min), "f-min")?,
                f_max: ForcingValues::need(f_max.or(b.f_max), "f-max")?,
            };
            let sigma = ForcingValues::need(ctx.ov.sigma.or(b.sigma).or(fv.sigma), "sigma")?;
            let fit = treatment::fit_band(&p, &band, sigma)?;
            note_model(out, &p);
            out.note("x_norm", band.x_norm);
            out.note("f_min", band.f_min);
            out.note("f_max", band.f_max);
            out.note("iterations", fit.iterations);
            out.note("bisection_fallback", fit.bisection);
            let c = fit.cycle;
            let d = DosingOut {
                a: fit.a,
                alpha: fit.alpha,
                sigma,
                a1: c.a1,
                x_min_p: c.x_min_p,
                x_max_p: c.x_max_p,
                period: c.period,
            };
            out.emit(&d, |w| kv_csv(w, &d.rows()))
        }
        TreatCmd::Gcsf { amplitude, start_day, end_day } => {
            let ph = physio(ctx);
            let m = treatment::map_neutrophil_model(&ph)?;
            let g = &o.gcsf;
            let amp = match amplitude.or(g.amplitude).unwrap_or(AmplitudeSpec::Named(NamedAmplitude::A1)) {
                AmplitudeSpec::Value(v) => v,
                AmplitudeSpec::Named(NamedAmplitude::A1) => a1_threshold(m.params.beta_u, m.gamma_n, m.gamma_n)?,
                AmplitudeSpec::Named(NamedAmplitude::Physiological) => ph.gcsf_amplitude(),
            };
            let start = start_day.or(g.start_day).unwrap_or(21.0);
            let end = end_day.or(g.end_day).unwrap_or(200.0);
            let r = treatment::gcsf_simulation(&m, amp, start, end, g.settle_days)?;
            note_mapping(out, &m);
            out.note("severe_neutropenia", treatment::SEVERE_NEUTROPENIA);
            let a1 = a1_threshold(m.params.beta_u, m.gamma_n, m.gamma_n)?;
            let summary = vec![
                ("amplitude", amp.to_string()),
                ("a1", a1.to_string()),
                ("start_day", start.to_string()),
                ("end_day", end.to_string()),
                ("settle_days", r.settle_days.to_string()),
                ("nadir_before", r.nadir_before.to_string()),
                ("nadir_post_onset", r.nadir_post_onset.to_string()),
                ("max_post_onset", r.max_post_onset.to_string()),
                ("nadir_after", r.nadir_after.to_string()),
                ("max_after", r.max_after.to_string()),
                ("severe_before", r.severe_before.to_string()),
                ("severe_after", r.severe_after.to_string()),
            ];
            for (k, v) in &summary {
                out.note(k, v);
            }
            let samples = r.trajectory.dense_samples(0.0, r.trajectory.t_end, ((end * 20.0) as usize).max(2));
            #[derive(Serialize)]
            struct GcsfOut {
                summary: std::collections::BTreeMap<String, String>,
                units: &'static str,
            }
            let d = GcsfOut {
                summary: summary.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
                units: treatment::UNIT_LABEL,
            };
            out.emit(&d, |w| {
                writeln!(w, "day,concentration,units")?;
                for (t, x, _, _) in &samples {
                    writeln!(w, "{},{},{}", m.to_days(*t), m.concentration(*x), treatment::UNIT_LABEL)?;
                }
                Ok(())
            })
        }
        TreatCmd::ChemoScan { window_lo, window_hi } => {
            let p = ctx.model()?;
            let c = &o.chemo_scan;
            let gamma_n = c.gamma_n.unwrap_or(PhysioParams::default().gamma_n);
            let n_star = c.n_star.unwrap_or(PhysioParams::default().n_star / treatment::UNIT);
            let m = NeutrophilMapping::from_reduced(p, gamma_n, n_star)?;
            let (lo, hi, step) = (c.period_lo.unwrap_or(1.0), c.period_hi.unwrap_or(40.0), c.period_step.unwrap_or(0.1));
            if !(step > 0.0 && hi >= lo) {
                return Err(CliError::Validation("chemo_scan: need period_step > 0 and period_hi >= period_lo".into()));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            let window = c.window.unwrap_or((600.0, 2000.0));
            let spec = ScanSpec {
                periods_days: (0..count).map(|i| lo + step * i as f64).collect(),
                window_days: (window_lo.unwrap_or(window.0), window_hi.unwrap_or(window.1)),
                sigma_days: c.sigma_days.unwrap_or(1.0),
            };
            let r = treatment::chemo_scan(&m, &spec, ctx.exec)?;
            note_mapping(out, &m);
            out.note("dose_amplitude", r.amplitude_a);
            out.note("first_nadir_estimate", treatment::chemo_first_nadir_estimate(&p, n_star, spec.sigma_days * gamma_n));
            let peaks: Vec<String> =
                r.nadir_peaks(0.01).into_iter().map(|i| r.points[i].period_days.to_string()).collect();
            out.note("nadir_peaks_days", peaks.join(" "));
            let marks: Vec<String> = r.resonance_markers.iter().map(|v| format!("{v:.4}")).collect();
            out.note("half_period_multiples_days", marks.join(" "));
            out.emit(&r, |w| r.write_csv(w))
        }
    }
}

fn note_mapping(out: &mut Output, m: &NeutrophilMapping) {
    note_model(out, &m.params);
    out.note("gamma_n_per_day", m.gamma_n);
    out.note("n_star", m.n_star);
    out.note("units", treatment::UNIT_LABEL);
    out.note("period_days", m.period_days);
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    ctx: &Ctx,
    out: &mut Output,
    parameter: Option<ParamArg>,
    lo: Option<f64>,
    hi: Option<f64>,
    continuation: Option<ContinuationArg>,
    mesh: Option<usize>,
    direction: Option<DirArg>,
) -> Result<(), CliError> {
    let p = ctx.model()?;
    let f = periodic_schedule(ctx, &p)?;
    let o = &ctx.cfg.sweep;
    let param = match parameter {
        Some(ParamArg::A) => SweepParameter::A,
        Some(ParamArg::Sigma) => SweepParameter::Sigma,
        Some(ParamArg::BetaU) => SweepParameter::BetaU,
        Some(ParamArg::Tau) => SweepParameter::Tau,
        None => o.parameter.ok_or_else(|| CliError::Validation("sweep: parameter missing".into()))?,
    };
    let lo = lo.or(o.lo).ok_or_else(|| CliError::Validation("sweep: lo missing".into()))?;
    let hi = hi.or(o.hi).ok_or_else(|| CliError::Validation("sweep: hi missing".into()))?;
    let mut spec = SweepSpec::new(param, lo, hi);
    if let Some(n) = mesh.or(o.mesh) {
        spec.mesh_count = n;
    }
    spec.direction = match direction {
        Some(DirArg::Inc) => Direction::Increasing,
        Some(DirArg::Dec) => Direction::Decreasing,
        None => o.direction.unwrap_or(Direction::Increasing),
    };
    spec.continuation = match continuation {
        Some(ContinuationArg::Warm) => Continuation::Warm,
        Some(ContinuationArg::Cold) => Continuation::Cold,
        None => o.continuation.unwrap_or(Continuation::Warm),
    };
    if let Some(v) = o.transient_periods {
        spec.transient_periods = v;
    }
    if let Some(v) = o.record_periods {
        spec.record_periods = v;
    }
    if let Some(v) = o.first_transient_periods {
        spec.first_transient_periods = v;
    }
    let recs = bifurcation::sweep(&p, &f, &spec, ctx.exec)?;
    note_model(out, &p);
    note_forcing(out, &f);
    note_engine(out);
    out.note("parameter", format!("{param:?}"));
    out.note("range", format!("[{lo}, {hi}]"));
    out.note("mesh", spec.mesh_count);
    out.note("direction", format!("{:?}", spec.direction));
    out.note("continuation", format!("{:?}", spec.continuation));
    out.note("transient_periods", spec.transient_periods);
    out.note("record_periods", spec.record_periods);
    out.note("first_transient_periods", spec.first_transient_periods);
    out.note("extrema_cluster_tol", EXTREMA_CLUSTER_TOL);
    #[derive(Serialize)]
    struct Row {
        value: f64,
        maxima: Vec<f64>,
        minima: Vec<f64>,
    }
    let rows: Vec<Row> = recs
        .iter()
        .map(|r| Row {
            value: r.value,
            maxima: r.distinct_maxima(EXTREMA_CLUSTER_TOL),
            minima: r.distinct_minima(EXTREMA_CLUSTER_TOL),
        })
        .collect();
    out.emit(&rows, |w| bifurcation::write_diagram_csv(&recs, w))
}

fn forced_run(ctx: &Ctx, t_end: f64) -> Result<(ModelParams, ForcingSchedule, pulse_dde::engine::Trajectory), CliError> {
    let p = ctx.model()?;
    let f = periodic_schedule(ctx, &p)?;
    let traj = periodic::simulate_forced(&p, &f, t_end)?;
    Ok((p, f, traj))
}

fn poincare(
    ctx: &Ctx,
    out: &mut Output,
    level: Option<f64>,
    crossing: Option<CrossingSel>,
    t_end: Option<f64>,
    t_lo: Option<f64>,
) -> Result<(), CliError> {
    let o = &ctx.cfg.poincare;
    let t_end = t_end.or(o.t_end).unwrap_or(400.0);
    let t_lo = t_lo.or(o.t_lo).unwrap_or(200.0);
    let level = level.or(o.level).unwrap_or(0.14);
    let sel = crossing.or(o.crossing).unwrap_or(CrossingSel::Both);
    let (p, f, traj) = forced_run(ctx, t_end)?;
    let dirs: &[Crossing] = match sel {
        CrossingSel::Rising => &[Crossing::Rising],
        CrossingSel::Falling => &[Crossing::Falling],
        CrossingSel::Both => &[Crossing::Rising, Crossing::Falling],
    };
    let mut pts = Vec::new();
    for &d in dirs {
        let spec = SectionSpec { level, direction: d, delays: (p.tau, 2.0 * p.tau) };
        pts.extend(bifurcation::poincare_section(&traj, &spec, t_lo, t_end)?);
    }
    pts.sort_by(|a, b| a.t.total_cmp(&b.t));
    note_model(out, &p);
    note_forcing(out, &f);
    note_engine(out);
    out.note("level", level);
    out.note("crossing", format!("{sel:?}"));
    out.note("window", format!("[{t_lo}, {t_end})"));
    out.emit(&pts, |w| bifurcation::write_section_csv(&pts, w))
}

fn embed(ctx: &Ctx, out: &mut Output, t_end: Option<f64>, t_lo: Option<f64>, mesh: Option<usize>) -> Result<(), CliError> {
    let o = &ctx.cfg.embed;
    let t_end = t_end.or(o.t_end).unwrap_or(400.0);
    let t_lo = t_lo.or(o.t_lo).unwrap_or(200.0);
    let n = mesh.or(o.samples).unwrap_or(4000);
    let (p, f, traj) = forced_run(ctx, t_end)?;
    let pts = bifurcation::delay_embedding(&traj, t_lo, t_end, p.tau, n)?;
    note_model(out, &p);
    note_forcing(out, &f);
    note_engine(out);
    out.note("window", format!("[{t_lo}, {t_end}]"));
    out.note("samples", n);
    out.emit(&pts, |w| bifurcation::write_embedding_csv(&pts, w))
}
