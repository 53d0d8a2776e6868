//! Dosing rules, the neutrophil-model mapping and the chemotherapy scan.
//!
//! Concentrations are stored in units of 1e9 cells/kg; time in the reduced
//! model is `t = gamma_N * days`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{solve, ForcingSchedule, HistoryFunction, Segment, Trajectory};
use crate::error::{positive_finite, require, Error, Result};
use crate::model::{limit_cycle, normalize_params, ModelParams, RawParams};
use crate::par::Execution;
use crate::periodic::{a1_threshold, cycle_history, forced_cycle, ForcedCycle};

/// Cells/kg per internal concentration unit.
pub const UNIT: f64 = 1e9;
pub const UNIT_LABEL: &str = "1e9 cells/kg";
/// Severe neutropenia, in internal units.
pub const SEVERE_NEUTROPENIA: f64 = 0.061;

/// Smallest OFF interval keeping the forced minimum at `x_norm` for dose `(a, sigma)`.
pub fn min_rest_interval(a: f64, sigma: f64, x_norm: f64, beta_u: f64) -> Result<f64> {
    positive_finite("a", a)?;
    positive_finite("sigma", sigma)?;
    positive_finite("x_norm", x_norm)?;
    positive_finite("beta_U", beta_u)?;
    let c = x_norm + beta_u;
    let arg = (a + (c - a) * (-sigma).exp()) / c;
    if arg.is_nan() || arg <= 1.0 {
        return Err(Error::Infeasible(format!(
            "dose a = {a}, sigma = {sigma} cannot hold the minimum at x_norm = {x_norm} (log argument {arg} <= 1)"
        )));
    }
    Ok(arg.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub x_norm: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl BandSpec {
    pub fn validate(&self) -> Result<()> {
        positive_finite("x_norm", self.x_norm)?;
        require(self.f_min > 0.0 && self.f_min <= 1.0 && self.f_max >= 1.0 && self.f_max.is_finite(), || {
            format!("band needs 0 < f_min <= 1 <= f_max (got {}, {})", self.f_min, self.f_max)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandFit {
    pub a: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// True when the bisection fallback produced the answer.
    pub bisection: bool,
    pub cycle: ForcedCycle,
}

const FIT_MAX_ITER: usize = 200;
const FIT_TOL: f64 = 1e-10;

/// Extrema `(x_min, x_max)` of the forced cycle without the threshold check.
fn extrema(beta_u: f64, sigma: f64, a: f64, alpha: f64) -> (f64, f64) {
    let c = a * -(-sigma).exp_m1() / (alpha.exp() - (-sigma).exp());
    (-beta_u + c, -beta_u + c * alpha.exp())
}

/// Solve for `(a, alpha)` so that the forced cycle spans `[f_min, f_max] * x_norm`.
pub fn fit_band(p: &ModelParams, band: &BandSpec, sigma: f64) -> Result<BandFit> {
    p.validate()?;
    band.validate()?;
    positive_finite("sigma", sigma)?;
    require(sigma <= p.tau, || format!("sigma = {sigma} must not exceed tau = {}", p.tau))?;
    if band.f_max <= band.f_min {
        return Err(Error::Infeasible("a flat band needs alpha = 0; the forced cycle always has positive amplitude".into()));
    }
    let (lo_t, hi_t) = (band.f_min * band.x_norm, band.f_max * band.x_norm);
    let bu = p.beta_u;
    let s = -(-sigma).exp_m1();
    let resid = |a: f64, al: f64| {
        let (lo, hi) = extrema(bu, sigma, a, al);
        (lo - lo_t, hi - hi_t)
    };

    let newton = || -> Option<(f64, f64, usize)> {
        let (mut a, mut al) = (bu * (band.f_max + 1.0), sigma);
        for it in 0..FIT_MAX_ITER {
            let (r1, r2) = resid(a, al);
            let norm = r1.hypot(r2);
            if norm < FIT_TOL {
                return Some((a, al, it));
            }
            let d = al.exp() - (-sigma).exp();
            let c = a * s / d;
            let dc_da = s / d;
            let dc_dal = -a * s * al.exp() / (d * d);
            let (j11, j12) = (dc_da, dc_dal);
            let (j21, j22) = (dc_da * al.exp(), (c + dc_dal) * al.exp());
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let da = (r1 * j22 - r2 * j12) / det;
            let dal = (j11 * r2 - j21 * r1) / det;
            let mut lambda = 1.0;
            loop {
                let (na, nal) = (a - lambda * da, al - lambda * dal);
                if na > 0.0 && nal > 0.0 {
                    let (q1, q2) = resid(na, nal);
                    if q1.hypot(q2) < norm {
                        a = na;
                        al = nal;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-12 {
                    return None;
                }
            }
        }
        None
    };

    let (a, alpha, iterations, bisection) = match newton() {
        Some((a, al, it)) => (a, al, it, false),
        None => {
            let (a, al) = nested_bisection(bu, sigma, lo_t, hi_t)?;
            (a, al, FIT_MAX_ITER, true)
        }
    };
    let (r1, r2) = resid(a, alpha);
    if r1.hypot(r2) >= FIT_TOL {
        return Err(Error::NoConvergence { iterations, residual: r1.hypot(r2) });
    }
    let a1 = a1_threshold(bu, sigma, alpha)?;
    if a < a1 * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!("fitted a = {a} is below a1 = {a1}")));
    }
    let cycle = forced_cycle(p, sigma, alpha, a.max(a1))?;
    Ok(BandFit { a, alpha, iterations, bisection, cycle })
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if (f(m) <= 0.0) == (f_lo <= 0.0) {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Both extrema rise with `a`; at the matched minimum the maximum rises with `alpha`.
fn nested_bisection(bu: f64, sigma: f64, lo_t: f64, hi_t: f64) -> Result<(f64, f64)> {
    let a_for = |al: f64| {
        let f = |a: f64| extrema(bu, sigma, a, al).0 - lo_t;
        let mut hi = 1.0f64.max(bu);
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::NAN;
            }
        }
        bisect(0.0, hi, f)
    };
    let g = |al: f64| extrema(bu, sigma, a_for(al), al).1 - hi_t;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoConvergence { iterations: FIT_MAX_ITER, residual: g(hi).abs() });
        }
    }
    let al = bisect(1e-300, hi, g);
    Ok((a_for(al), al))
}

/// Physiological constants of the neutrophil model, in cells/kg and days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysioParams {
    pub gamma_n: f64,
    /// Production delay, proliferation plus maturation.
    pub tau_n: f64,
    pub n_star: f64,
    pub q_star: f64,
    pub a_n: f64,
    pub f0: f64,
    /// `b_U = epsilon * b_L`.
    pub epsilon: f64,
    pub eta_np_max: f64,
    pub gamma0_min: f64,
    pub tau_np: f64,
    pub tau_nm_gcsf: f64,
}

impl Default for PhysioParams {
    fn default() -> Self {
        PhysioParams {
            gamma_n: 2.4,
            tau_n: 9.3,
            n_star: 0.63e9,
            q_star: 1.1e6,
            a_n: 6.55e4,
            f0: 0.4,
            epsilon: 1e-4,
            eta_np_max: 3.0552,
            gamma0_min: 0.12,
            tau_np: 5.0,
            tau_nm_gcsf: 4.3,
        }
    }
}

impl PhysioParams {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("gamma_N", self.gamma_n),
            ("tau_N", self.tau_n),
            ("N_star", self.n_star),
            ("Q_star", self.q_star),
            ("A_N", self.a_n),
            ("f0", self.f0),
            ("epsilon", self.epsilon),
            ("eta_NP_max", self.eta_np_max),
            ("gamma0_min", self.gamma0_min),
            ("tau_NP", self.tau_np),
            ("tau_NM_gcsf", self.tau_nm_gcsf),
        ] {
            positive_finite(n, v)?;
        }
        require(self.epsilon < 1.0, || format!("epsilon = {} must be < 1", self.epsilon))
    }

    /// Feedback levels `(b_L, b_U)` in cells/kg/day.
    pub fn feedback_levels(&self) -> (f64, f64) {
        let b_l = self.a_n * self.f0 * self.q_star;
        (b_l, self.epsilon * b_l)
    }

    /// Amplification under G-CSF.
    pub fn a_n_gcsf(&self) -> f64 {
        (self.eta_np_max * self.tau_np - self.gamma0_min * self.tau_nm_gcsf).exp()
    }

    /// Dose amplitude implied by the change in amplification, internal units.
    pub fn gcsf_amplitude(&self) -> f64 {
        (self.a_n_gcsf() - self.a_n) * self.q_star * self.f0 / (2.0 * self.gamma_n) / UNIT
    }
}

/// Reduced model plus the conversion back to days and concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutrophilMapping {
    pub params: ModelParams,
    pub gamma_n: f64,
    /// Normal level, internal units.
    pub n_star: f64,
    /// Exact unperturbed period in days.
    pub period_days: f64,
    /// `2 tau_N + ln((g+1)^2/g)/gamma_N` with `g = beta_L / beta_U`.
    pub period_estimate_days: f64,
}

impl NeutrophilMapping {
    pub fn from_reduced(params: ModelParams, gamma_n: f64, n_star: f64) -> Result<Self> {
        params.validate()?;
        positive_finite("gamma_N", gamma_n)?;
        positive_finite("N_star", n_star)?;
        let lc = limit_cycle(&params);
        let g = params.beta_l / params.beta_u;
        Ok(NeutrophilMapping {
            params,
            gamma_n,
            n_star,
            period_days: lc.period / gamma_n,
            period_estimate_days: period_estimate(params.tau / gamma_n, gamma_n, g),
        })
    }

    pub fn to_days(&self, t: f64) -> f64 {
        t / self.gamma_n
    }

    pub fn to_reduced_time(&self, days: f64) -> f64 {
        days * self.gamma_n
    }

    pub fn concentration(&self, x: f64) -> f64 {
        x + self.n_star
    }
}

pub fn period_estimate(tau_n: f64, gamma_n: f64, g: f64) -> f64 {
    2.0 * tau_n + ((g + 1.0).powi(2) / g).ln() / gamma_n
}

pub fn map_neutrophil_model(phys: &PhysioParams) -> Result<NeutrophilMapping> {
    phys.validate()?;
    let (b_l, b_u) = phys.feedback_levels();
    let raw = RawParams { gamma: phys.gamma_n, tau_raw: phys.tau_n, b_l: b_l / UNIT, b_u: b_u / UNIT, theta: phys.n_star / UNIT };
    let p = normalize_params(&raw)?;
    NeutrophilMapping::from_reduced(p, phys.gamma_n, phys.n_star / UNIT)
}

/// Period range over `g = beta_L/beta_U` on a log grid; the exact period
/// depends on `g` and `tau` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSweep {
    pub g_lo: f64,
    pub g_hi: f64,
    pub estimate_min: f64,
    pub estimate_max: f64,
    pub exact_min: f64,
    pub exact_max: f64,
    pub g_at_min: f64,
}

pub fn g_sweep(tau_n: f64, gamma_n: f64, g_lo: f64, g_hi: f64, n: usize) -> Result<GSweep> {
    positive_finite("tau_N", tau_n)?;
    positive_finite("gamma_N", gamma_n)?;
    positive_finite("g_lo", g_lo)?;
    require(g_hi >= g_lo && g_hi.is_finite() && n >= 2, || "g sweep needs g_lo <= g_hi and n >= 2".into())?;
    let mut out = GSweep {
        g_lo,
        g_hi,
        estimate_min: f64::INFINITY,
        estimate_max: f64::NEG_INFINITY,
        exact_min: f64::INFINITY,
        exact_max: f64::NEG_INFINITY,
        g_at_min: f64::NAN,
    };
    let mut gs: Vec<f64> = (0..n).map(|i| g_lo * (g_hi / g_lo).powf(i as f64 / (n - 1) as f64)).collect();
    // The estimate is smallest at g = 1.
    if g_lo <= 1.0 && g_hi >= 1.0 {
        gs.push(1.0);
    }
    for g in gs {
        let est = period_estimate(tau_n, gamma_n, g);
        let p = ModelParams::new(tau_n * gamma_n, 1.0, g)?;
        let exact = limit_cycle(&p).period / gamma_n;
        if est < out.estimate_min {
            out.estimate_min = est;
            out.g_at_min = g;
        }
        out.estimate_max = out.estimate_max.max(est);
        out.exact_min = out.exact_min.min(exact);
        out.exact_max = out.exact_max.max(exact);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcsfReport {
    pub amplitude: f64,
    pub start_day: f64,
    /// Minimum concentration before the first dose.
    pub nadir_before: f64,
    /// Extremes over `[start_day, end_day]`, onset transient included.
    pub nadir_post_onset: f64,
    pub max_post_onset: f64,
    /// Extremes over `[start_day + settle_days, end_day]`.
    pub nadir_after: f64,
    pub max_after: f64,
    pub settle_days: f64,
    pub severe_before: bool,
    pub severe_after: bool,
    pub forcing: ForcingSchedule,
    pub trajectory: Trajectory,
}

/// Daily dosing (one day on, one day off) from `start_day`, starting on the
/// unperturbed cycle at its minimum. `settle_days` defaults to one
/// unperturbed period.
pub fn gcsf_simulation(
    m: &NeutrophilMapping,
    amplitude: f64,
    start_day: f64,
    end_day: f64,
    settle_days: Option<f64>,
) -> Result<GcsfReport> {
    let settle_days = settle_days.unwrap_or(m.period_days);
    require(amplitude >= 0.0 && amplitude.is_finite(), || format!("dose amplitude must be >= 0 (got {amplitude})"))?;
    require(start_day >= 0.0 && settle_days >= 0.0 && start_day + settle_days < end_day && end_day.is_finite(), || {
        format!("need 0 <= start_day < start_day + settle_days < end_day (got {start_day}, {settle_days}, {end_day})")
    })?;
    let g = m.gamma_n;
    let forcing = ForcingSchedule::periodic(start_day * g, g, g, amplitude)?;
    let traj = solve(&m.params, &cycle_history(&m.params), &forcing, end_day * g)?;
    let before = if start_day > 0.0 { traj.range_between(0.0, start_day * g).0 } else { traj.value(0.0) };
    let (lo_on, hi_on) = traj.range_between(start_day * g, end_day * g);
    let (lo, hi) = traj.range_between((start_day + settle_days) * g, end_day * g);
    let nadir_before = m.concentration(before);
    let nadir_after = m.concentration(lo);
    Ok(GcsfReport {
        amplitude,
        start_day,
        nadir_before,
        nadir_post_onset: m.concentration(lo_on),
        max_post_onset: m.concentration(hi_on),
        nadir_after,
        max_after: m.concentration(hi),
        settle_days,
        severe_before: nadir_before < SEVERE_NEUTROPENIA,
        severe_after: nadir_after < SEVERE_NEUTROPENIA,
        forcing,
        trajectory: traj,
    })
}

/// Dose that drives the daily-dosing nadir to zero concentration.
pub fn chemo_amplitude(p: &ModelParams, n_star: f64) -> f64 {
    p.beta_u - n_star / -(-p.tau).exp_m1()
}

/// History `-beta_U + beta_U e^{-(t - sigma + tau)}` on `[-tau, 0]`.
pub fn chemo_history(p: &ModelParams, sigma: f64) -> HistoryFunction {
    let seg = Segment { a: -p.beta_u, b: p.beta_u * sigma.exp(), t_start: -p.tau, t_end: 0.0 };
    HistoryFunction { tau: p.tau, segments: vec![seg] }
}

/// Concentration at the end of the first dose, `(N* - beta_U) e^{-sigma}`.
pub fn chemo_first_nadir_estimate(p: &ModelParams, n_star: f64, sigma: f64) -> f64 {
    (n_star - p.beta_u) * (-sigma).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    /// Dosing periods in days.
    pub periods_days: Vec<f64>,
    pub window_days: (f64, f64),
    /// Dose length in days.
    pub sigma_days: f64,
}

impl ScanSpec {
    /// 391 periods from 1 to 40 days, one-day doses.
    pub fn standard(window_days: (f64, f64)) -> Self {
        ScanSpec { periods_days: (0..391).map(|i| 1.0 + 0.1 * i as f64).collect(), window_days, sigma_days: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub period_days: f64,
    pub nadir: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub window_days: (f64, f64),
    pub units: String,
    pub amplitude_a: f64,
    /// `n * T/2`, n = 1..4, with `T` the unperturbed period in days.
    pub resonance_markers: Vec<f64>,
}

impl ScanResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "period_days,nadir,amplitude,window_lo,window_hi,units")?;
        for pt in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                pt.period_days, pt.nadir, pt.amplitude, self.window_days.0, self.window_days.1, self.units
            )?;
        }
        Ok(())
    }

    /// Resonance peaks: maximal runs of grid points whose nadir exceeds the
    /// median nadir by more than `prominence`. Returns the index of each run's
    /// maximum (the middle of a flat top).
    pub fn nadir_peaks(&self, prominence: f64) -> Vec<usize> {
        let v: Vec<f64> = self.points.iter().map(|p| p.nadir).collect();
        if v.is_empty() {
            return Vec::new();
        }
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let base = sorted[sorted.len() / 2];
        let mut out = Vec::new();
        let mut i = 0;
        while i < v.len() {
            if v[i] - base <= prominence {
                i += 1;
                continue;
            }
            let start = i;
            while i < v.len() && v[i] - base > prominence {
                i += 1;
            }
            let run = &v[start..i];
            let top = run.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let flat: Vec<usize> = (start..i).filter(|&j| top - v[j] <= 1e-9 * top.abs().max(1.0)).collect();
            out.push(flat[flat.len() / 2]);
        }
        out
    }
}

/// Nadir and amplitude of `N` over a window for each dosing period.
/// Negative dose from `chemo_amplitude`, first dose at `t = 0`.
pub fn chemo_scan(m: &NeutrophilMapping, spec: &ScanSpec, exec: Execution) -> Result<ScanResult> {
    let p = m.params;
    let (w0, w1) = spec.window_days;
    require(w0 >= 0.0 && w1 > w0 && w1.is_finite(), || format!("bad window [{w0}, {w1}]"))?;
    positive_finite("sigma_days", spec.sigma_days)?;
    require(spec.periods_days.iter().all(|&t| t >= spec.sigma_days && t.is_finite()), || {
        "every period must be at least the dose length".to_string()
    })?;
    let g = m.gamma_n;
    let sigma = spec.sigma_days * g;
    let a = chemo_amplitude(&p, m.n_star);
    let history = chemo_history(&p, sigma);
    let results = exec.map(&spec.periods_days, |&tp| -> Result<ScanPoint> {
        let alpha = (tp - spec.sigma_days).max(0.0) * g;
        let f = ForcingSchedule::periodic(0.0, sigma, alpha, a)?;
        let traj = solve(&p, &history, &f, w1 * g)?;
        let (lo, hi) = traj.range_between(w0 * g, w1 * g);
        Ok(ScanPoint { period_days: tp, nadir: m.concentration(lo), amplitude: hi - lo })
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        points,
        window_days: spec.window_days,
        units: UNIT_LABEL.to_string(),
        amplitude_a: a,
        resonance_markers: (1..=4).map(|n| n as f64 * m.period_days / 2.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_periodic;

    #[test]
    fn mapping_reproduces_reduced_values() {
        let m = map_neutrophil_model(&PhysioParams::default()).unwrap();
        assert!((m.params.beta_l - 11.3783).abs() < 1e-4);
        assert!((m.params.beta_u - 0.6288).abs() < 1e-4);
        assert!((m.params.tau - 22.32).abs() < 1e-12);
        assert!((m.period_days - 19.85).abs() < 0.01);
        assert!((m.period_estimate_days - m.period_days).abs() < 1e-6);
    }

    #[test]
    fn gcsf_amplitude_estimate() {
        let ph = PhysioParams::default();
        assert!((ph.a_n_gcsf() / 2.5715e6 - 1.0).abs() < 1e-4);
        assert!((ph.gcsf_amplitude() - 229.72).abs() < 0.05);
    }

    #[test]
    fn rest_interval_inverts_forced_minimum() {
        let (bu, xn) = (0.4, 0.6);
        for (a, s) in [(1.2, 0.5), (1.5, 1.0), (3.0, 0.2)] {
            let al = min_rest_interval(a, s, xn, bu).unwrap();
            let (lo, _) = extrema(bu, s, a, al);
            assert!((lo - xn).abs() < 1e-12);
        }
        assert!(matches!(min_rest_interval(0.9, 50.0, 0.6, 0.4), Err(Error::Infeasible(_))));
    }

    #[test]
    fn band_fit_matches_closed_form() {
        let p = ModelParams::new(1.0, 0.4, 1.4).unwrap();
        let band = BandSpec { x_norm: 0.4, f_min: 0.5, f_max: 1.5 };
        let fit = fit_band(&p, &band, 0.6).unwrap();
        assert!(!fit.bisection);
        // Independent solve: the extrema ratio fixes alpha, then the minimum fixes a.
        let alpha = ((0.6 + 0.4) / (0.2 + 0.4f64)).ln();
        let a = (0.2 + 0.4) * (alpha.exp() - (-0.6f64).exp()) / (1.0 - (-0.6f64).exp());
        assert!((fit.alpha - alpha).abs() < 1e-10 && (fit.a - a).abs() < 1e-10);
        let (lo, hi) = nested_bisection(0.4, 0.6, 0.2, 0.6).unwrap();
        assert!((lo - a).abs() < 1e-9 && (hi - alpha).abs() < 1e-9);
        assert!(fit_band(&p, &BandSpec { x_norm: 0.4, f_min: 1.0, f_max: 1.0 }, 0.6).is_err());
    }

    #[test]
    fn chemo_history_acts_like_cycle_window() {
        let p = ModelParams::new(22.32, 0.41, 0.225).unwrap();
        let lc = limit_cycle(&p);
        let sigma = 2.4;
        let h = chemo_history(&p, sigma);
        let w = HistoryFunction::limit_cycle(&p, &lc, lc.period - sigma);
        assert!((h.end_value() - w.end_value()).abs() < 1e-12);
        for k in 0..=400 {
            let t = -p.tau + p.tau * k as f64 / 400.0;
            let phase = t + lc.period - sigma;
            if (phase - lc.z2).abs() > 1e-9 {
                assert_eq!(h.value(t) < 0.0, eval_periodic(&lc, &p, phase) < 0.0, "t={t}");
            }
        }
        let a = chemo_amplitude(&p, 0.63);
        let f = ForcingSchedule::periodic(0.0, sigma, 4.0 * sigma, a).unwrap();
        let t1 = solve(&p, &h, &f, 200.0).unwrap();
        let t2 = solve(&p, &w, &f, 200.0).unwrap();
        for k in 0..=1000 {
            let t = 0.2 * k as f64;
            assert!((t1.value(t) - t2.value(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_dose_keeps_cycle() {
        let m = map_neutrophil_model(&PhysioParams::default()).unwrap();
        let r = gcsf_simulation(&m, 0.0, 21.0, 70.0, Some(0.0)).unwrap();
        let lc = limit_cycle(&m.params);
        assert!((r.nadir_after - m.concentration(lc.x_min)).abs() < 1e-9);
        assert!(r.severe_before);
    }

    #[test]
    fn gcsf_threshold_dose_lifts_nadir_to_steady_state() {
        let m = map_neutrophil_model(&PhysioParams::default()).unwrap();
        let g = m.gamma_n;
        let a1 = crate::periodic::a1_threshold(m.params.beta_u, g, g).unwrap();
        assert!((a1 - 7.560163).abs() < 1e-6);
        let r = gcsf_simulation(&m, a1, 21.0, 200.0, None).unwrap();
        assert!((r.nadir_after - 0.63).abs() < 1e-9);
        assert!(!r.severe_after);
    }

    #[test]
    fn gcsf_small_dose_leaves_mild_neutropenia() {
        let m = map_neutrophil_model(&PhysioParams::default()).unwrap();
        let r = gcsf_simulation(&m, 0.719, 21.0, 200.0, None).unwrap();
        assert!(r.severe_before);
        assert!(r.nadir_after >= SEVERE_NEUTROPENIA);
        assert!((r.max_after - 12.2).abs() < 0.05);
    }
}
