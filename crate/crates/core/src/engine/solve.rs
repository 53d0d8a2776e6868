//! Event-driven exact propagation.

use std::collections::VecDeque;

use super::forcing::ForcingSchedule;
use super::history::HistoryFunction;
use super::segment::{NonNeg, Segment};
use super::trajectory::{Crossing, Trajectory, Zero};
use crate::error::{require, Error, Result};
use crate::model::ModelParams;

/// Breaking points closer than this multiple of tau are merged.
pub const MERGE_REL: f64 = 1e-13;
/// Values within this multiple of the model scale count as zero when deciding
/// whether a sign change happened.
pub const ZERO_REL: f64 = 1e-12;
/// Chatter guard.
pub const MAX_NEAR_COINCIDENT: u64 = 1_000_000;

struct SignTracker {
    ztol: f64,
    tau: f64,
    class: NonNeg,
    zeros: Vec<Zero>,
    /// Delayed feedback switches `(time, new class)`, increasing in time.
    pending: VecDeque<(f64, NonNeg)>,
}

impl SignTracker {
    fn push_zero(&mut self, t: f64, class: NonNeg) {
        let direction = if class { Crossing::Rising } else { Crossing::Falling };
        self.zeros.push(Zero { t, direction });
        self.pending.push_back((t + self.tau, class));
    }

    /// Registers sign changes at the start of and inside `seg`.
    /// Returns the interior zero time, if any.
    fn scan(&mut self, seg: &Segment, first: bool) -> Option<f64> {
        let (c0, c1) = seg.classes(self.ztol);
        if !first && c0 != self.class {
            self.push_zero(seg.t_start, c0);
        }
        self.class = c1;
        if c0 != c1 {
            let z = seg.root().unwrap_or(seg.t_start).clamp(seg.t_start, seg.t_end);
            self.push_zero(z, c1);
            Some(z)
        } else {
            None
        }
    }
}

/// Pulse state machine over the schedule's edges.
struct PulseCursor<'a> {
    f: &'a ForcingSchedule,
    index: u64,
    on: bool,
}

impl PulseCursor<'_> {
    fn next_edge(&self) -> f64 {
        if !self.f.is_active() {
            return f64::INFINITY;
        }
        if self.on {
            self.f.onset(self.index) + self.f.sigma
        } else if self.f.has_pulse(self.index) {
            self.f.onset(self.index)
        } else {
            f64::INFINITY
        }
    }

    fn toggle(&mut self) {
        if self.on {
            self.on = false;
            self.index += 1;
        } else {
            self.on = true;
        }
    }
}

/// Solve `x' = -x + f(x(t - tau)) + p(t)` on `[0, t_end]`.
pub fn solve(p: &ModelParams, history: &HistoryFunction, forcing: &ForcingSchedule, t_end: f64) -> Result<Trajectory> {
    p.validate()?;
    forcing.validate()?;
    require(t_end > 0.0 && t_end.is_finite(), || format!("t_end must be > 0 (got {t_end})"))?;
    require((history.tau - p.tau).abs() <= 1e-12 * p.tau, || {
        format!("history spans tau = {} but model tau = {}", history.tau, p.tau)
    })?;

    let merge = MERGE_REL * p.tau;
    let scale = p.scale().max(forcing.amplitude.abs());
    let mut tracker = SignTracker {
        ztol: ZERO_REL * scale,
        tau: p.tau,
        class: true,
        zeros: Vec::new(),
        pending: VecDeque::new(),
    };

    let mut segments: Vec<Segment> = Vec::with_capacity(history.segments.len() + 64);
    for (i, s) in history.segments.iter().enumerate() {
        if i == 0 {
            tracker.class = s.classes(tracker.ztol).0;
        }
        let first = i == 0;
        tracker.scan(s, first);
        segments.push(*s);
    }
    let history_len = segments.len();
    // Feedback on (0, .) follows the sign just after -tau.
    let mut upper = history.segments[0].classes(tracker.ztol).0;

    let mut pulses = PulseCursor { f: forcing, index: 0, on: false };
    let mut breaking_points = vec![0.0];
    let mut x = history.end_value();
    let mut t = 0.0;
    let mut near_coincident: u64 = 0;

    while t < t_end {
        while let Some(&(te, cls)) = tracker.pending.front() {
            if te > t + merge {
                break;
            }
            if te != t {
                near_coincident += 1;
            }
            upper = cls;
            tracker.pending.pop_front();
        }
        while pulses.next_edge() <= t + merge {
            if pulses.next_edge() != t {
                near_coincident += 1;
            }
            pulses.toggle();
        }
        if near_coincident > MAX_NEAR_COINCIDENT {
            return Err(Error::EventStall { count: near_coincident, t });
        }

        let a = if upper { -p.beta_u } else { p.beta_l } + if pulses.on { forcing.amplitude } else { 0.0 };
        let mut seg = Segment { a, b: x - a, t_start: t, t_end };
        // Boundary crossing first so its delayed switch bounds the step.
        let (c0, _) = seg.classes(tracker.ztol);
        if c0 != tracker.class {
            tracker.push_zero(t, c0);
        }
        tracker.class = c0;
        let mut next = t_end.min(pulses.next_edge());
        if let Some(&(te, _)) = tracker.pending.front() {
            next = next.min(te);
        }
        seg.t_end = next;
        let (c0b, c1) = seg.classes(tracker.ztol);
        if c0b != c1 {
            let z = seg.root().unwrap_or(t).clamp(t, next);
            if z + p.tau < next {
                seg.t_end = z + p.tau;
            }
            tracker.push_zero(z, c1);
        }
        let (_, c1) = seg.classes(tracker.ztol);
        tracker.class = c1;

        x = seg.end_value();
        t = seg.t_end;
        segments.push(seg);
        if t < t_end {
            breaking_points.push(t);
        }
    }

    Ok(Trajectory { tau: p.tau, segments, history_len, breaking_points, zeros: tracker.zeros, t_end })
}
