//! Response of the limit cycle to one rectangular pulse: case taxonomy,
//! threshold constants, resetting time `F`, cycle-length map `T` and the
//! rapid unstable cycle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{solve, Crossing, ForcingSchedule, HistoryFunction, Trajectory, Zero};
use crate::error::{positive_finite, require, Error, Result};
use crate::model::{eval_periodic, limit_cycle, LimitCycle, ModelParams};
use crate::par::Execution;

/// Tolerance of the post-pulse phase match against the shifted cycle.
pub const PHASE_MATCH_TOL: f64 = 1e-10;
/// Distance to `delta_inf` below which resetting is treated as infinite.
pub const DELTA_INF_TOL: f64 = 1e-12;
/// Longest post-pulse search, in delay intervals.
pub const MAX_RETURN_DELAYS: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum CaseLabel {
    RNRN,
    RNRP,
    RPRP,
    RPFP,
    RPFN,
    FPFP,
    FPFN,
    FNFP1,
    FNFP2,
    FNFP3,
    FNFP4,
    FNFN,
    FNRN,
    FNRP,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl CaseLabel {
    /// Base label of the 11-way split (FNFP refinements map to `None`).
    pub fn is_fnfp2_family(self) -> bool {
        matches!(self, CaseLabel::FNFP2 | CaseLabel::FNFP3 | CaseLabel::FNFP4)
    }

    /// Index `k` of the zero after the pulse used as the cycle-length marker.
    pub fn marker_zero(self) -> Option<usize> {
        use CaseLabel::*;
        match self {
            RNRN => Some(1),
            RNRP | RPRP | RPFP | FPFP => Some(2),
            RPFN | FPFN | FNFN | FNRN => Some(3),
            FNFP1 | FNRP => Some(4),
            FNFP2 | FNFP3 | FNFP4 => None,
        }
    }
}

/// Base partition cell; `FNFP` is split into FNFP1 and the FNFP2 family later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum BaseCase {
    RNRN,
    RNRP,
    RPRP,
    RPFP,
    RPFN,
    FPFP,
    FPFN,
    FNFP,
    FNFN,
    FNRN,
    FNRP,
}

/// Interval with explicit end closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }
    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: false }
    }
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: true }
    }
    pub fn below(hi: f64, closed: bool) -> Self {
        Interval { lo: f64::NEG_INFINITY, hi, lo_closed: false, hi_closed: closed }
    }
    pub fn above(lo: f64, closed: bool) -> Self {
        Interval { lo, hi: f64::INFINITY, lo_closed: closed, hi_closed: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let hi_ok = if self.hi_closed { x <= self.hi } else { x < self.hi };
        lo_ok && hi_ok
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo, self.lo_closed)
        } else if o.lo > self.lo {
            (o.lo, o.lo_closed)
        } else {
            (self.lo, self.lo_closed && o.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi, self.hi_closed)
        } else if o.hi < self.hi {
            (o.hi, o.hi_closed)
        } else {
            (self.hi, self.hi_closed && o.hi_closed)
        };
        Interval { lo, hi, lo_closed, hi_closed }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }
}

/// A threshold constant or the reason it does not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Defined(f64),
    Undefined(String),
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::Defined(v) => Some(*v),
            Threshold::Undefined(_) => None,
        }
    }

    fn from_log(offset: f64, num: f64, den: f64, what: &str) -> Threshold {
        let r = num / den;
        if r > 0.0 && r.is_finite() {
            Threshold::Defined(offset + r.ln())
        } else {
            Threshold::Undefined(format!("{what}: log argument {r} is not positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaConstants {
    pub delta1: Threshold,
    pub delta2: Threshold,
    pub delta4: Threshold,
    pub delta4_hat: Threshold,
    pub delta5: Threshold,
    pub delta_inf: Threshold,
}

fn check_pulse(p: &ModelParams, sigma: f64, a: f64) -> Result<()> {
    p.validate()?;
    positive_finite("sigma", sigma)?;
    require(sigma <= p.tau, || format!("sigma = {sigma} must not exceed tau = {}", p.tau))?;
    positive_finite("a", a)
}

pub fn delta_constants(p: &ModelParams, sigma: f64, a: f64) -> Result<DeltaConstants> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    Ok(delta_constants_with(p, &lc, sigma, a))
}

fn delta_constants_with(p: &ModelParams, lc: &LimitCycle, sigma: f64, a: f64) -> DeltaConstants {
    let (bu, bl, tau) = (p.beta_u, p.beta_l, p.tau);
    let one_m_es = -(-sigma).exp_m1(); // 1 - e^{-sigma}
    let es_m1 = sigma.exp_m1(); // e^{sigma} - 1
    let one_m_et = -(-tau).exp_m1();
    let z2 = lc.z2;

    let delta1 = Threshold::Defined(lc.z1 - sigma - ((bl + a * one_m_es) / bl).ln());
    let delta2 = if bu > a * one_m_es {
        Threshold::Defined(z2 - sigma + (bu / (bu - a * one_m_es)).ln())
    } else {
        Threshold::Undefined(format!("beta_U = {bu} <= a(1-e^-sigma) = {}", a * one_m_es))
    };
    let delta4 = Threshold::from_log(z2, bu * tau.exp_m1(), a * es_m1, "delta4");
    let delta4_hat = Threshold::from_log(
        0.0,
        a * bl + bu * (a - bu) * one_m_et,
        a * (bl * (-z2).exp() + (a - bu) * es_m1 * (-lc.period).exp()),
        "delta4_hat",
    );
    let delta5 = Threshold::from_log(
        z2,
        bu * (bu + bl) + (bl + bu * (2.0 - (-tau).exp())) * (a - bu),
        a * (bu + bl) - a * es_m1 * one_m_et * (a - bu),
        "delta5",
    );
    let delta_inf = if a > bu * one_m_es {
        Threshold::Defined(z2 + sigma + ((a - bu * one_m_es) / a).ln())
    } else {
        Threshold::Undefined(format!("a = {a} <= beta_U(1-e^-sigma) = {}", bu * one_m_es))
    };
    DeltaConstants { delta1, delta2, delta4, delta4_hat, delta5, delta_inf }
}

/// The 11 base cells in taxonomy order.
pub fn base_intervals(p: &ModelParams, sigma: f64, a: f64) -> Result<Vec<(BaseCase, Interval)>> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    let dc = delta_constants_with(p, &lc, sigma, a);
    Ok(base_intervals_with(&lc, sigma, &dc))
}

fn base_intervals_with(lc: &LimitCycle, sigma: f64, dc: &DeltaConstants) -> Vec<(BaseCase, Interval)> {
    let d1 = dc.delta1.value().unwrap();
    // An undefined delta2 means the pulse end never drops below zero.
    let d2 = dc.delta2.value().unwrap_or(f64::INFINITY);
    let (z1, z2, tmax, period) = (lc.z1, lc.z2, lc.t_max, lc.period);
    let rp_f = Interval::open(tmax - sigma, tmax);
    let fp = Interval::closed(tmax, z2);
    let fn_f = Interval::open(z2, period - sigma);
    let fn_r = Interval::closed_open(period - sigma, period);
    vec![
        (BaseCase::RNRN, Interval::closed(0.0, d1)),
        (BaseCase::RNRP, Interval::closed_open(d1.max(0.0), z1).intersect(&Interval::above(d1, d1 < 0.0))),
        (BaseCase::RPRP, Interval::closed(z1, tmax - sigma)),
        (BaseCase::RPFP, rp_f.intersect(&Interval::below(d2, true))),
        (BaseCase::RPFN, rp_f.intersect(&Interval::above(d2, false))),
        (BaseCase::FPFP, fp.intersect(&Interval::below(d2, true))),
        (BaseCase::FPFN, fp.intersect(&Interval::above(d2, false))),
        (BaseCase::FNFP, fn_f.intersect(&Interval::below(d2, false))),
        (BaseCase::FNFN, fn_f.intersect(&Interval::above(d2, true))),
        (BaseCase::FNRN, fn_r.intersect(&Interval::below(period + d1, false))),
        (BaseCase::FNRP, fn_r.intersect(&Interval::above(period + d1, true))),
    ]
}

fn refine_fnfp(delta: f64, dc: &DeltaConstants) -> CaseLabel {
    let d4 = dc.delta4.value().unwrap_or(f64::NEG_INFINITY);
    if delta >= d4 {
        return CaseLabel::FNFP1;
    }
    match (dc.delta4_hat.value(), dc.delta5.value()) {
        (Some(h), _) if delta < h => CaseLabel::FNFP3,
        (Some(_), Some(d5)) if delta < d5 => CaseLabel::FNFP4,
        _ => CaseLabel::FNFP2,
    }
}

fn base_to_label(b: BaseCase) -> CaseLabel {
    match b {
        BaseCase::RNRN => CaseLabel::RNRN,
        BaseCase::RNRP => CaseLabel::RNRP,
        BaseCase::RPRP => CaseLabel::RPRP,
        BaseCase::RPFP => CaseLabel::RPFP,
        BaseCase::RPFN => CaseLabel::RPFN,
        BaseCase::FPFP => CaseLabel::FPFP,
        BaseCase::FPFN => CaseLabel::FPFN,
        BaseCase::FNFP => CaseLabel::FNFP2,
        BaseCase::FNFN => CaseLabel::FNFN,
        BaseCase::FNRN => CaseLabel::FNRN,
        BaseCase::FNRP => CaseLabel::FNRP,
    }
}

/// Case of a pulse `[delta, delta + sigma]` applied to the cycle.
pub fn classify(p: &ModelParams, delta: f64, sigma: f64, a: f64) -> Result<CaseLabel> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    require((0.0..lc.period).contains(&delta), || {
        format!("delta = {delta} must lie in [0, {})", lc.period)
    })?;
    let dc = delta_constants_with(p, &lc, sigma, a);
    Ok(classify_with(&lc, sigma, &dc, delta))
}

fn classify_with(lc: &LimitCycle, sigma: f64, dc: &DeltaConstants, delta: f64) -> CaseLabel {
    let cells = base_intervals_with(lc, sigma, dc);
    let (base, _) = cells
        .iter()
        .find(|(_, iv)| iv.contains(delta))
        .expect("base intervals cover [0, period)");
    if *base == BaseCase::FNFP {
        refine_fnfp(delta, dc)
    } else {
        base_to_label(*base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseResponse {
    pub delta: f64,
    pub case: CaseLabel,
    /// Resetting time: the case formula when one exists, else the measured value.
    pub resetting_time: f64,
    /// Cycle length `T(delta)`.
    pub cycle_length: f64,
    /// `T - period`.
    pub new_phase: f64,
    /// Earliest `t - delta` after which the solution equals a shifted cycle.
    pub measured_resetting_time: f64,
    /// `period` plus the shift read off the last zero.
    pub measured_cycle_length: f64,
    pub formula_available: bool,
    /// Rising zeros between the pulse onset and the return (FNFP family).
    pub fnfp_depth: Option<u32>,
    pub perturbed_zeros: Vec<f64>,
}

/// Post-pulse phase measurement shared by the formula and generic routes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatch {
    pub shift: f64,
    pub return_time: f64,
    pub zeros: Vec<Zero>,
}

/// Simulate one pulse on the cycle and locate the return to a shifted cycle.
/// Works for any `delta >= 0`.
pub fn measure_pulse(p: &ModelParams, delta: f64, sigma: f64, a: f64) -> Result<(Trajectory, PhaseMatch)> {
    p.validate()?;
    require(delta >= 0.0 && delta.is_finite(), || format!("delta = {delta} must be >= 0"))?;
    let lc = limit_cycle(p);
    let history = HistoryFunction::limit_cycle(p, &lc, 0.0);
    let forcing = ForcingSchedule::single(delta, sigma, a)?;
    let limit = delta + sigma + MAX_RETURN_DELAYS * p.tau + 3.0 * lc.period;
    let mut horizon = delta + sigma + 2.0 * p.tau + 3.0 * lc.period;
    loop {
        let traj = solve(p, &history, &forcing, horizon)?;
        if let Some(m) = phase_match(p, &lc, &traj, delta + sigma) {
            return Ok((traj, m));
        }
        if horizon >= limit {
            return Err(Error::NoReturn { horizon });
        }
        horizon = (delta + 2.0 * (horizon - delta)).min(limit);
    }
}

fn phase_match(p: &ModelParams, lc: &LimitCycle, traj: &Trajectory, pulse_end: f64) -> Option<PhaseMatch> {
    let zeros = traj.solution_zeros().to_vec();
    let k = zeros.len();
    let last = *zeros.last()?;
    let odd = k % 2 == 1;
    if odd != (last.direction == Crossing::Rising) {
        return None;
    }
    let shift = last.t - lc.zero(k);
    let window_lo = last.t - lc.period;
    if window_lo < pulse_end {
        return None;
    }
    let cyc = |t: f64| eval_periodic(lc, p, t - shift);
    let matches = |t: f64| (traj.value(t) - cyc(t)).abs() <= PHASE_MATCH_TOL;
    let n = 64;
    let uniform = (0..=n).map(|i| window_lo + lc.period * i as f64 / n as f64);
    let bps = traj.breaking_points_between(window_lo, last.t).iter().copied();
    if !uniform.chain(bps).all(matches) {
        return None;
    }

    // Walk back through segments that coincide with the shifted cycle.
    let segs = &traj.segments;
    let mut i = traj.segment_index(last.t);
    let seg_matches = |j: usize| {
        let s = &segs[j];
        matches(s.t_start) && matches(0.5 * (s.t_start + s.t_end)) && matches(s.t_end)
    };
    while i > traj.history_len && segs[i - 1].t_start >= pulse_end && seg_matches(i - 1) {
        i -= 1;
    }
    let mut return_time = segs[i].t_start;
    if i > traj.history_len {
        // The match may start inside the previous piece at a cycle branch switch.
        let s = &segs[i - 1];
        let lo = s.t_start.max(pulse_end);
        let mut candidates = Vec::new();
        let first_n = ((lo - shift) / lc.period).floor() as i64 - 1;
        for n in first_n..first_n + 4 {
            for base in [lc.t_max, lc.period] {
                let tb = base + shift + n as f64 * lc.period;
                if tb > lo && tb < s.t_end {
                    candidates.push(tb);
                }
            }
        }
        candidates.sort_by(f64::total_cmp);
        if let Some(&tb) = candidates.iter().find(|&&tb| matches(tb) && matches(0.5 * (tb + s.t_end))) {
            return_time = tb;
        } else if s.t_start < pulse_end && matches(pulse_end) && matches(0.5 * (pulse_end + s.t_end)) {
            return_time = pulse_end;
        }
    }
    Some(PhaseMatch { shift, return_time, zeros })
}

/// Resetting time and cycle length for a pulse at `delta` in `[0, period)`.
pub fn pulse_response(p: &ModelParams, delta: f64, sigma: f64, a: f64) -> Result<PulseResponse> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    require((0.0..lc.period).contains(&delta), || {
        format!("delta = {delta} must lie in [0, {})", lc.period)
    })?;
    let dc = delta_constants_with(p, &lc, sigma, a);
    if let Some(di) = dc.delta_inf.value() {
        if (delta - di).abs() <= DELTA_INF_TOL {
            return Err(Error::InfiniteResetting { delta });
        }
    }
    let case = classify_with(&lc, sigma, &dc, delta);
    let (traj, m) = measure_pulse(p, delta, sigma, a)?;
    // From an instant on the falling positive branch after the pulse, the
    // cycle is rejoined once the solution is down to the cycle maximum.
    let pulse_end = delta + sigma;
    let join_falling = |t: f64| {
        let s = t.max(pulse_end);
        s + ((traj.value(s) + p.beta_u) / (lc.x_max + p.beta_u)).ln().max(0.0)
    };
    let z: Vec<f64> = m.zeros.iter().map(|z| z.t).collect();
    let zk = |k: usize| z.get(k - 1).copied();

    let measured_f = m.return_time - delta;
    let measured_t = lc.period + m.shift;

    let formula = case.marker_zero().and_then(|k| {
        use CaseLabel::*;
        let t = lc.period + zk(k)? - lc.zero(k);
        let f = match case {
            RNRN | FNRN => sigma,
            RPFP | FPFP => join_falling(pulse_end) - delta,
            // The cycle is rejoined no earlier than the first post-pulse maximum.
            RNRP | RPRP => (lc.t_max + (zk(2)? - lc.z2)).max(zk(1)? + p.tau) - delta,
            RPFN | FPFN => join_falling(zk(2)? + p.tau) - delta,
            FNFP1 => join_falling(zk(3)? + p.tau) - delta,
            FNFN => join_falling(lc.z2 + p.tau) - delta,
            FNRP => (lc.zero(3) + p.tau - (lc.zero(4) - zk(4)?)).max(zk(3)? + p.tau) - delta,
            FNFP2 | FNFP3 | FNFP4 => return None,
        };
        Some((f, t))
    });
    let fnfp_depth = case.is_fnfp2_family().then(|| {
        m.zeros
            .iter()
            .filter(|zz| zz.direction == Crossing::Rising && zz.t > delta && zz.t < m.return_time)
            .count() as u32
    });
    let (resetting_time, cycle_length) = formula.unwrap_or((measured_f, measured_t));
    Ok(PulseResponse {
        delta,
        case,
        resetting_time,
        cycle_length,
        new_phase: cycle_length - lc.period,
        measured_resetting_time: measured_f,
        measured_cycle_length: measured_t,
        formula_available: formula.is_some(),
        fnfp_depth,
        perturbed_zeros: z,
    })
}

/// `pulse_response` over `n` evenly spaced onsets in `[0, period)`.
pub fn response_grid(
    p: &ModelParams,
    sigma: f64,
    a: f64,
    n: usize,
    exec: Execution,
) -> Result<Vec<(f64, Result<PulseResponse>)>> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    let deltas: Vec<f64> = (0..n).map(|i| lc.period * i as f64 / n as f64).collect();
    Ok(exec.map(&deltas, |&d| (d, pulse_response(p, d, sigma, a))))
}

/// Maximum of the cycle length on `[lo, hi]` by golden-section search.
/// Assumes a single peak in the bracket. Returns `(delta, T)`.
pub fn refine_cycle_length_max(p: &ModelParams, sigma: f64, a: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    require(lo < hi, || format!("empty bracket [{lo}, {hi}]"))?;
    let t = |d: f64| pulse_response(p, d, sigma, a).map(|r| r.cycle_length);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (t(x1)?, t(x2)?);
    while hi - lo > 1e-13 * p.tau.max(1.0) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = t(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = t(x2)?;
        }
    }
    let d = 0.5 * (lo + hi);
    Ok((d, t(d)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstableCycle {
    pub delta_inf: f64,
    pub period: f64,
    pub min: f64,
    pub max: f64,
}

/// Rapid cycle reached by a pulse at `delta_inf`.
pub fn unstable_cycle(p: &ModelParams, sigma: f64, a: f64) -> Result<UnstableCycle> {
    check_pulse(p, sigma, a)?;
    let lc = limit_cycle(p);
    let dc = delta_constants_with(p, &lc, sigma, a);
    let di = match dc.delta_inf {
        Threshold::Defined(v) => v,
        Threshold::Undefined(why) => return Err(Error::Undefined(why)),
    };
    let bu = p.beta_u;
    Ok(UnstableCycle {
        delta_inf: di,
        period: lc.period - di,
        min: bu * ((-(di - lc.z2)).exp() - 1.0),
        max: a * -(-sigma).exp_m1() + bu * ((lc.z2 - di - sigma).exp() - 1.0),
    })
}

/// Pulse width at which the rapid cycle exists for `a = beta_L + beta_U`.
///
/// A pulse at `delta_inf` makes the negative half-wave last `sigma`; the
/// free oscillation afterwards only repeats when the positive half-wave
/// also matches, which pins `sigma`. Returns the smallest root in `(0, tau]`.
pub fn rapid_cycle_sigma(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    let lc = limit_cycle(p);
    let (bu, bl) = (p.beta_u, p.beta_l);
    let a = bu + bl;
    let mismatch = |sigma: f64| {
        let di = lc.z2 + sigma + ((a + bu * (-sigma).exp_m1()) / a).ln();
        let x0 = bu * ((lc.z2 - di).exp() - 1.0);
        let z3 = di + ((bl - x0) / bl).ln();
        let x1 = bl + (x0 - bl) * (-sigma).exp();
        let z4 = di + sigma + ((bu + x1) / bu).ln();
        (z4 - z3) - (lc.period - di - sigma)
    };
    let n = 400;
    let mut lo = p.tau / n as f64;
    let mut g_lo = mismatch(lo);
    for i in 2..=n {
        let hi = p.tau * i as f64 / n as f64;
        let g_hi = mismatch(hi);
        if g_lo.is_finite() && g_hi.is_finite() && (g_lo <= 0.0) != (g_hi <= 0.0) {
            let (mut l, mut h) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (l + h);
                if (mismatch(m) <= 0.0) == (g_lo <= 0.0) {
                    l = m;
                } else {
                    h = m;
                }
                if h - l <= 1e-16 * h {
                    break;
                }
            }
            return Ok(0.5 * (l + h));
        }
        lo = hi;
        g_lo = g_hi;
    }
    Err(Error::Undefined("no pulse width in (0, tau] sustains a rapid cycle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn delta2_and_delta_inf_anchor_values() {
        let dc = delta_constants(&unit(), 1.0, 0.5).unwrap();
        assert!((dc.delta2.value().unwrap() - 1.35965).abs() < 1e-4);
        let q = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let dc = delta_constants(&q, 0.39235, 0.8).unwrap();
        assert!((dc.delta_inf.value().unwrap() - 2.19505).abs() < 1e-4);
    }

    #[test]
    fn small_amplitude_limits() {
        let p = unit();
        let lc = limit_cycle(&p);
        let dc = delta_constants(&p, 0.3, 1e-12).unwrap();
        assert!((dc.delta1.value().unwrap() - (lc.z1 - 0.3)).abs() < 1e-10);
        assert!((dc.delta2.value().unwrap() - (lc.z2 - 0.3)).abs() < 1e-10);
    }

    #[test]
    fn reference_case_examples() {
        let p = ModelParams::new(1.0, 0.3, 0.4).unwrap();
        assert_eq!(classify(&p, 2.23, 0.6, 0.52).unwrap(), CaseLabel::FNFP1);
        let p = ModelParams::new(1.0, 0.6, 0.4).unwrap();
        assert_eq!(classify(&p, 2.06, 0.4, 0.85).unwrap(), CaseLabel::FNFP3);
        let p = unit();
        assert_eq!(classify(&p, 0.0, 0.1, 0.05).unwrap(), CaseLabel::RNRN);
    }

    #[test]
    fn interval_algebra() {
        let a = Interval::closed(0.0, 1.0);
        let b = Interval::open(1.0, 2.0);
        assert!(a.intersect(&b).is_empty());
        assert!(Interval::closed(1.0, 1.0).contains(1.0));
        let c = a.intersect(&Interval::below(0.5, false));
        assert!(c.contains(0.0) && !c.contains(0.5));
    }

    #[test]
    fn sigma_cases_reset_in_sigma() {
        let p = unit();
        let r = pulse_response(&p, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(r.case, CaseLabel::RPFP);
        assert_eq!(r.resetting_time, 1.0);
        assert!((r.cycle_length - r.measured_cycle_length).abs() < 1e-9);
    }

    #[test]
    fn unstable_cycle_bounds() {
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let lc = limit_cycle(&p);
        let u = unstable_cycle(&p, 0.39235, 0.8).unwrap();
        assert!((u.period - 0.78471).abs() < 1e-4);
        assert!(u.period > 1.0 - 0.39235 && u.period < 1.0);
        assert!(lc.x_min < u.min && u.min < 0.0 && 0.0 < u.max && u.max < lc.x_max);
        assert!(matches!(unstable_cycle(&p, 0.39235, 0.01), Err(Error::Undefined(_))));
        assert!(matches!(
            pulse_response(&p, u.delta_inf, 0.39235, 0.8),
            Err(Error::InfiniteResetting { .. })
        ));
    }

    #[test]
    fn rapid_sigma_symmetric_closed_form() {
        // Symmetric case: half-period h solves 3h = tau + ln(2 / (1 + e^-h)).
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let s = rapid_cycle_sigma(&p).unwrap();
        let g = 3.0 * s - 1.0 - (2.0 / (1.0 + (-s).exp())).ln();
        assert!(g.abs() < 1e-14, "{g}");
        assert!((s - 0.39235).abs() < 5e-6);
        let u = unstable_cycle(&p, s, 0.8).unwrap();
        assert!((u.period - 2.0 * s).abs() < 1e-12);
    }

    #[test]
    fn rapid_cycle_persists_at_exact_sigma() {
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let s = rapid_cycle_sigma(&p).unwrap();
        let u = unstable_cycle(&p, s, 0.8).unwrap();
        let lc = limit_cycle(&p);
        let h = HistoryFunction::limit_cycle(&p, &lc, 0.0);
        let f = ForcingSchedule::single(u.delta_inf, s, 0.8).unwrap();
        let tr = solve(&p, &h, &f, u.delta_inf + 21.0 * u.period).unwrap();
        let rising: Vec<f64> = tr
            .zeros_between(u.delta_inf, f64::INFINITY)
            .iter()
            .filter(|z| z.direction == Crossing::Rising)
            .map(|z| z.t)
            .collect();
        assert!(rising.len() >= 21);
        for w in rising.windows(2).take(20) {
            assert!((w[1] - w[0] - u.period).abs() < 1e-6, "{}", w[1] - w[0]);
        }
    }

    #[test]
    fn refined_maximum_is_delta2() {
        let p = unit();
        let (sigma, a) = (1.0, 0.5);
        let d2 = delta_constants(&p, sigma, a).unwrap().delta2.value().unwrap();
        let (d, t) = refine_cycle_length_max(&p, sigma, a, d2 - 0.01, d2 + 0.02).unwrap();
        let expect = limit_cycle(&p).period + (1.0 / (1.0 - a * -(-sigma).exp_m1())).ln();
        assert!((d - d2).abs() < 1e-9, "{d} vs {d2}");
        assert!((t - expect).abs() < 1e-9);
    }

    #[test]
    fn fnrp_low_maximum_returns_at_maximum() {
        // Pulse starting at period - sigma with sigma near tau: the first
        // post-pulse maximum stays below the cycle maximum.
        let p = ModelParams::new(1.3864536209185863, 0.30998072259319975, 0.358147129293505).unwrap();
        let (sigma, a) = (1.3679156360935159, 0.38139441071478786);
        let lc = limit_cycle(&p);
        for k in 0..8 {
            let d = lc.period - sigma + 0.02 * k as f64;
            let r = pulse_response(&p, d, sigma, a).unwrap();
            assert_eq!(r.case, CaseLabel::FNRP);
            assert!((r.resetting_time - r.measured_resetting_time).abs() < 1e-9, "{d}: {r:?}");
            assert!(r.resetting_time >= sigma);
        }
    }

    #[test]
    fn pulse_ending_above_cycle_maximum_rejoins_later() {
        let p = ModelParams::new(1.173333585146099, 0.2005821904177017, 1.1674882317713378).unwrap();
        let (sigma, a) = (0.23793011986778323, 0.18976520245848813);
        let d = 0.26719191695179817 * limit_cycle(&p).period;
        let r = pulse_response(&p, d, sigma, a).unwrap();
        assert_eq!(r.case, CaseLabel::RPFP);
        assert!(r.resetting_time > sigma + 1e-4);
        assert!((r.resetting_time - r.measured_resetting_time).abs() < 1e-12);
    }
}
