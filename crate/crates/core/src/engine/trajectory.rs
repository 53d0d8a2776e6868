//! Piecewise-exponential solution record.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::forcing::ForcingSchedule;
use super::history::HistoryFunction;
use super::segment::Segment;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub t: f64,
    pub direction: Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tau: f64,
    /// History pieces first (`t <= 0`), then the solution.
    pub segments: Vec<Segment>,
    pub history_len: usize,
    /// Derivative discontinuities for `t >= 0`, starting with `0`.
    pub breaking_points: Vec<f64>,
    /// Sign changes, including those inside the history.
    pub zeros: Vec<Zero>,
    pub t_end: f64,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.segments[0].t_start
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.t_start <= t).saturating_sub(1)
    }

    /// `x(t)` for `t` in `[-tau, t_end]`, no range check.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.segments[self.segment_index(t)].value(t)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.t_start(), self.t_end);
        if t < lo || t > hi || t.is_nan() {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        Ok(self.value(t))
    }

    pub fn solution_segments(&self) -> &[Segment] {
        &self.segments[self.history_len..]
    }

    pub fn zeros_between(&self, t_lo: f64, t_hi: f64) -> Vec<Zero> {
        let i = self.zeros.partition_point(|z| z.t < t_lo);
        self.zeros[i..].iter().take_while(|z| z.t <= t_hi).copied().collect()
    }

    /// Zeros with `t > 0`, indexed from 1.
    pub fn solution_zeros(&self) -> &[Zero] {
        let i = self.zeros.partition_point(|z| z.t <= 0.0);
        &self.zeros[i..]
    }

    pub fn breaking_points_between(&self, t_lo: f64, t_hi: f64) -> &[f64] {
        let i = self.breaking_points.partition_point(|&b| b < t_lo);
        let j = self.breaking_points.partition_point(|&b| b <= t_hi);
        &self.breaking_points[i..j]
    }

    pub fn is_breaking_point(&self, t: f64) -> bool {
        self.breaking_points.binary_search_by(|b| b.total_cmp(&t)).is_ok()
    }

    /// Exact `(min, max)` of `x` on `[t_lo, t_hi]`. Each piece is monotone, so
    /// only the window ends and breaking points need checking.
    pub fn range_between(&self, t_lo: f64, t_hi: f64) -> (f64, f64) {
        let (a, b) = (self.value(t_lo), self.value(t_hi));
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        for &t in self.breaking_points_between(t_lo, t_hi) {
            let v = self.value(t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Last `len` time units as a history for a continuation run.
    pub fn tail_history(&self, len: f64) -> Result<HistoryFunction> {
        let t0 = self.t_end - len;
        if t0 < self.t_start() {
            return Err(Error::OutOfRange { t: t0, lo: self.t_start(), hi: self.t_end });
        }
        let mut out = Vec::new();
        let first = self.segment_index(t0);
        for s in &self.segments[first..] {
            let lo = s.t_start.max(t0);
            if s.t_end <= lo && !out.is_empty() {
                continue;
            }
            let b = s.value(lo) - s.a;
            out.push(Segment { a: s.a, b, t_start: lo - self.t_end, t_end: s.t_end - self.t_end });
        }
        if out.len() > 1 && out[0].t_end - out[0].t_start <= 0.0 {
            out.remove(0);
        }
        HistoryFunction::from_segments(len, out)
    }

    /// Uniform grid of `n` points on `[t_lo, t_hi]` merged with the breaking
    /// points in that range. Rows are `(t, x, segment_index, is_breaking_point)`.
    pub fn dense_samples(&self, t_lo: f64, t_hi: f64, n: usize) -> Vec<(f64, f64, usize, bool)> {
        let mut ts: Vec<(f64, bool)> = (0..n)
            .map(|k| {
                let t = if n > 1 { t_lo + (t_hi - t_lo) * k as f64 / (n - 1) as f64 } else { t_lo };
                (t, false)
            })
            .collect();
        ts.extend(self.breaking_points_between(t_lo, t_hi).iter().map(|&b| (b, true)));
        ts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        ts.dedup_by(|a, b| a.0 == b.0);
        ts.into_iter()
            .map(|(t, bp)| {
                let i = self.segment_index(t);
                (t, self.segments[i].value(t), i, bp)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, samples: usize) -> std::io::Result<()> {
        writeln!(w, "t,x,segment_index,is_breaking_point")?;
        for (t, x, i, bp) in self.dense_samples(0.0, self.t_end, samples) {
            writeln!(w, "{t},{x},{i},{}", bp as u8)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("trajectory json: {e}")))
    }
}

/// Max of `|x' + x - f(x(t - tau)) - p(t)|` over segment midpoints and
/// `samples` uniform interior points of `[0, t_end]`.
pub fn residual_check(traj: &Trajectory, p: &ModelParams, forcing: &ForcingSchedule, samples: usize) -> f64 {
    let residual_at = |t: f64| {
        let s = &traj.segments[traj.segment_index(t)];
        let delayed = traj.value(t - p.tau);
        (s.derivative(t) + s.value(t) - p.feedback(delayed) - forcing.value(t)).abs()
    };
    let mut worst: f64 = 0.0;
    for s in traj.solution_segments() {
        if s.t_end > s.t_start {
            worst = worst.max(residual_at(0.5 * (s.t_start + s.t_end)));
        }
    }
    let guard = 1e-9 * p.tau;
    for k in 1..=samples {
        let t = traj.t_end * k as f64 / (samples + 1) as f64;
        let i = traj.segment_index(t);
        let s = &traj.segments[i];
        let near_edge = t - s.t_start < guard || s.t_end - t < guard;
        let d = t - p.tau;
        let j = traj.zeros.partition_point(|z| z.t < d - guard);
        let near_delayed_edge = traj.zeros.get(j).is_some_and(|z| z.t <= d + guard);
        let near_pulse_edge = forcing.value(t - guard) != forcing.value(t + guard);
        if !(near_edge || near_delayed_edge || near_pulse_edge) {
            worst = worst.max(residual_at(t));
        }
    }
    worst
}
