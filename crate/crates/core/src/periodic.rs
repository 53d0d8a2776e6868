//! Periodically forced system: threshold amplitude, the above-threshold
//! forced cycle, the pulse-to-pulse map and frequency locking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{solve, ForcingSchedule, HistoryFunction, Trajectory};
use crate::error::{positive_finite, require, Error, Result};
use crate::model::{eval_unperturbed, limit_cycle, ModelParams};

/// Relative slack when comparing an amplitude with `a1`.
const A1_REL: f64 = 1e-12;
/// Largest locking ratio searched.
pub const MAX_LOCKING_RATIO: u32 = 64;
/// Uniform tolerance for `x(t) = x(t + q T_p)`.
pub const LOCKING_TOL: f64 = 1e-8;

/// Smallest amplitude that keeps the solution non-negative under forcing.
pub fn a1_threshold(beta_u: f64, sigma: f64, alpha: f64) -> Result<f64> {
    positive_finite("beta_U", beta_u)?;
    positive_finite("sigma", sigma)?;
    positive_finite("alpha", alpha)?;
    Ok(beta_u * (alpha.exp() - (-sigma).exp()) / -(-sigma).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcedCycle {
    pub x_min_p: f64,
    pub x_max_p: f64,
    pub period: f64,
    pub a1: f64,
}

impl ForcedCycle {
    pub fn amplitude(&self) -> f64 {
        self.x_max_p - self.x_min_p
    }

    /// Value on the cycle at `t` with onsets at `delta0 + n T_p`.
    pub fn value(&self, p: &ModelParams, sigma: f64, a: f64, delta0: f64, t: f64) -> f64 {
        let s = (t - delta0).rem_euclid(self.period);
        if s <= sigma {
            -p.beta_u + a + (self.x_min_p + p.beta_u - a) * (-s).exp()
        } else {
            -p.beta_u + (self.x_max_p + p.beta_u) * (-(s - sigma)).exp()
        }
    }
}

fn check_forcing(p: &ModelParams, sigma: f64, alpha: f64, a: f64) -> Result<f64> {
    p.validate()?;
    positive_finite("a", a)?;
    let a1 = a1_threshold(p.beta_u, sigma, alpha)?;
    require(sigma <= p.tau, || format!("sigma = {sigma} must not exceed tau = {}", p.tau))?;
    if a < a1 * (1.0 - A1_REL) {
        return Err(Error::BelowThreshold { a, a1 });
    }
    Ok(a1)
}

/// Extrema of the forced cycle; only defined for `a >= a1`.
pub fn forced_cycle(p: &ModelParams, sigma: f64, alpha: f64, a: f64) -> Result<ForcedCycle> {
    let a1 = check_forcing(p, sigma, alpha, a)?;
    let c = a * -(-sigma).exp_m1() / (alpha.exp() - (-sigma).exp());
    Ok(ForcedCycle { x_min_p: -p.beta_u + c, x_max_p: -p.beta_u + c * alpha.exp(), period: sigma + alpha, a1 })
}

/// Solution values at pulse onsets and offsets, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseMap {
    pub onset: Vec<f64>,
    pub offset: Vec<f64>,
}

impl PulseMap {
    pub fn len(&self) -> usize {
        self.onset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onset.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,x_at_onset,x_at_offset")?;
        for (k, (x0, x1)) in self.onset.iter().zip(&self.offset).enumerate() {
            writeln!(w, "{k},{x0},{x1}")?;
        }
        Ok(())
    }
}

/// Closed-form pulse map for `a >= a1` and a first onset in `[t_max, z2]`,
/// where the delayed state stays non-negative from the first pulse on.
/// `delta0 = z2` gives `x(delta0) = 0`.
pub fn iterate_pulse_map(p: &ModelParams, forcing: &ForcingSchedule, n: usize) -> Result<PulseMap> {
    forcing.validate()?;
    require(forcing.alpha.is_finite(), || "pulse map needs a periodic schedule".into())?;
    let (sigma, alpha, a) = (forcing.sigma, forcing.alpha, forcing.amplitude);
    check_forcing(p, sigma, alpha, a)?;
    let lc = limit_cycle(p);
    let d0 = forcing.delta0;
    let tol = 1e-12 * lc.period;
    require(d0 >= lc.t_max - tol && d0 <= lc.z2 + tol, || {
        format!("closed form needs delta0 in [t_max, z2] = [{}, {}] (got {d0}); simulate instead", lc.t_max, lc.z2)
    })?;
    let x0 = if (d0 - lc.z2).abs() <= tol { 0.0 } else { eval_unperturbed(&lc, p, d0)? };
    Ok(pulse_map_from(p.beta_u, sigma, alpha, a, x0, n))
}

/// Affine recursion `x_{n+1} = -beta_U + a e^-alpha (1 - e^-sigma) + (x_n + beta_U) e^-T_p`
/// summed in closed form from `x_0`.
pub fn pulse_map_from(beta_u: f64, sigma: f64, alpha: f64, a: f64, x0: f64, n: usize) -> PulseMap {
    let tp = sigma + alpha;
    let gain = a * -(-sigma).exp_m1();
    let mut onset = Vec::with_capacity(n + 1);
    let mut offset = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let kf = k as f64;
        // sum_{j<k} e^{-j T_p}
        let geo = if k == 0 { 0.0 } else { -(-kf * tp).exp_m1() / -(-tp).exp_m1() };
        let xk = -beta_u + gain * (-alpha).exp() * geo + (x0 + beta_u) * (-kf * tp).exp();
        onset.push(xk);
        offset.push(-beta_u + a + (xk + beta_u - a) * (-sigma).exp());
    }
    PulseMap { onset, offset }
}

/// Limit-cycle history with the cycle minimum at `t = 0`.
pub fn cycle_history(p: &ModelParams) -> HistoryFunction {
    HistoryFunction::limit_cycle(p, &limit_cycle(p), 0.0)
}

/// Simulate the forced system from the unperturbed cycle.
pub fn simulate_forced(p: &ModelParams, forcing: &ForcingSchedule, t_end: f64) -> Result<Trajectory> {
    solve(p, &cycle_history(p), forcing, t_end)
}

/// Pulse map read off a simulated trajectory.
pub fn sample_pulse_map(traj: &Trajectory, forcing: &ForcingSchedule, n: usize) -> Result<PulseMap> {
    let mut onset = Vec::with_capacity(n + 1);
    let mut offset = Vec::with_capacity(n + 1);
    for k in 0..=n as u64 {
        let t = forcing.onset(k);
        onset.push(traj.eval(t)?);
        offset.push(traj.eval(t + forcing.sigma)?);
    }
    Ok(PulseMap { onset, offset })
}

/// Convergence rule for pulse-map sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub consecutive: usize,
    pub tol: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence { consecutive: 5, tol: 1e-10 }
    }
}

impl Convergence {
    /// First index starting a run of `consecutive` samples within `tol` of `target`.
    pub fn first_index(&self, seq: &[f64], target: f64) -> Option<usize> {
        let mut run = 0;
        for (i, &x) in seq.iter().enumerate() {
            if (x - target).abs() <= self.tol {
                run += 1;
                if run >= self.consecutive {
                    return Some(i + 1 - self.consecutive);
                }
            } else {
                run = 0;
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Locking {
    /// Response period is `q` forcing periods.
    pub q: u32,
    pub period: f64,
}

/// Smallest `q <= 64` with `|x(t) - x(t + q T_p)| < 1e-8` on `[t_lo, t_end - q T_p]`.
/// The window must hold at least three response periods.
pub fn detect_locking(traj: &Trajectory, tp: f64, t_lo: f64) -> Option<Locking> {
    detect_locking_with(traj, tp, t_lo, MAX_LOCKING_RATIO, LOCKING_TOL)
}

pub fn detect_locking_with(traj: &Trajectory, tp: f64, t_lo: f64, max_q: u32, tol: f64) -> Option<Locking> {
    if tp.is_nan() || tp <= 0.0 || t_lo < 0.0 {
        return None;
    }
    for q in 1..=max_q {
        let shift = q as f64 * tp;
        let t_hi = traj.t_end - shift;
        if t_hi - t_lo < 2.0 * shift {
            break;
        }
        if shift_matches(traj, shift, t_lo, t_hi, tol) {
            return Some(Locking { q, period: shift });
        }
    }
    None
}

fn shift_matches(traj: &Trajectory, shift: f64, t_lo: f64, t_hi: f64, tol: f64) -> bool {
    let close = |t: f64| (traj.value(t) - traj.value(t + shift)).abs() < tol;
    // Both sides are piecewise exponential, so matching at every breaking point
    // of either side plus interior points is a uniform check.
    let mut ts: Vec<f64> = traj.breaking_points_between(t_lo, t_hi).to_vec();
    ts.extend(traj.breaking_points_between(t_lo + shift, t_hi + shift).iter().map(|b| b - shift));
    ts.sort_by(f64::total_cmp);
    let mut prev = t_lo;
    for &t in ts.iter().chain(std::iter::once(&t_hi)) {
        if !close(t) || !close(0.5 * (prev + t)) {
            return false;
        }
        prev = t;
    }
    close(t_lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a1_anchor_values() {
        assert!((a1_threshold(0.4, 0.6, 0.45).unwrap() - 0.90384).abs() < 1e-4);
        assert!((a1_threshold(0.6288, 2.4, 2.4).unwrap() - 7.5602).abs() < 1e-4);
        assert!((a1_threshold(0.4, 0.6, 1e-12).unwrap() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn threshold_cycle_touches_zero() {
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let a1 = a1_threshold(0.4, 0.6, 0.45).unwrap();
        let c = forced_cycle(&p, 0.6, 0.45, a1).unwrap();
        assert!(c.x_min_p.abs() < 1e-14);
        assert!((c.x_max_p - 0.4 * 0.45f64.exp_m1()).abs() < 1e-14);
        assert!(matches!(forced_cycle(&p, 0.6, 0.45, 0.9 * a1), Err(Error::BelowThreshold { .. })));
    }

    #[test]
    fn closed_form_matches_literal_sums() {
        let (bu, s, al, a) = (0.4, 0.6, 0.45, 1.1);
        let tp = s + al;
        let m = pulse_map_from(bu, s, al, a, 0.0, 12);
        for n in 0..=12 {
            let sum = |upto: usize| (0..=upto).map(|k| (-(k as f64) * tp).exp()).sum::<f64>();
            let nf = n as f64;
            let onset = bu * ((-nf * tp).exp() - 1.0)
                + if n == 0 { 0.0 } else { a * (1.0 - (-s).exp()) * (-al).exp() * sum(n - 1) };
            let offset = bu * ((-nf * tp - s).exp() - 1.0) + a * (1.0 - (-s).exp()) * sum(n);
            assert!((m.onset[n] - onset).abs() < 1e-14);
            assert!((m.offset[n] - offset).abs() < 1e-14);
        }
    }

    #[test]
    fn pulse_map_matches_engine() {
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let lc = limit_cycle(&p);
        let f = ForcingSchedule::periodic(lc.z2, 0.6, 0.45, 1.0).unwrap();
        let m = iterate_pulse_map(&p, &f, 30).unwrap();
        let tr = simulate_forced(&p, &f, f.onset(31)).unwrap();
        let s = sample_pulse_map(&tr, &f, 30).unwrap();
        for k in 0..=30 {
            assert!((m.onset[k] - s.onset[k]).abs() < 1e-10, "k={k}");
            assert!((m.offset[k] - s.offset[k]).abs() < 1e-10, "k={k}");
        }
        let c = forced_cycle(&p, 0.6, 0.45, 1.0).unwrap();
        assert!(Convergence::default().first_index(&s.onset, c.x_min_p).is_some());
        let long = simulate_forced(&p, &f, 80.0).unwrap();
        assert_eq!(detect_locking(&long, f.period(), 40.0).map(|l| l.q), Some(1));
        assert_eq!(detect_locking(&tr, f.period(), 2.0), None);
    }

    #[test]
    fn below_threshold_has_no_closed_form() {
        let p = ModelParams::new(1.0, 0.4, 0.4).unwrap();
        let f = ForcingSchedule::periodic(1.0, 0.6, 0.45, 0.5).unwrap();
        assert!(matches!(iterate_pulse_map(&p, &f, 3), Err(Error::BelowThreshold { .. })));
    }
}
