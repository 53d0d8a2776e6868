//! Initial function on `[-tau, 0]` stored as exponential pieces.

use serde::{Deserialize, Serialize};

use super::segment::Segment;
use crate::error::{require, Result};
use crate::model::{LimitCycle, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFunction {
    pub tau: f64,
    pub segments: Vec<Segment>,
}

impl HistoryFunction {
    /// Validates contiguous coverage of `[-tau, 0]` and continuity at joints.
    pub fn from_segments(tau: f64, segments: Vec<Segment>) -> Result<Self> {
        require(tau > 0.0 && tau.is_finite(), || format!("tau must be > 0 (got {tau})"))?;
        require(!segments.is_empty(), || "history needs at least one segment".into())?;
        let span_tol = 1e-12 * tau.max(1.0);
        require((segments[0].t_start + tau).abs() <= span_tol, || {
            format!("history must start at -tau = {} (got {})", -tau, segments[0].t_start)
        })?;
        require(segments.last().unwrap().t_end.abs() <= span_tol, || {
            "history must end at 0".to_string()
        })?;
        let scale = segments
            .iter()
            .map(|s| s.start_value().abs().max(s.end_value().abs()))
            .fold(1e-300, f64::max);
        for (i, s) in segments.iter().enumerate() {
            require(s.a.is_finite() && s.b.is_finite() && s.t_end >= s.t_start, || {
                format!("history segment {i} malformed")
            })?;
            if i > 0 {
                let prev = &segments[i - 1];
                require(prev.t_end == s.t_start, || format!("history gap before segment {i}"))?;
                require((prev.end_value() - s.start_value()).abs() <= 1e-12 * scale, || {
                    format!("history discontinuous at t = {}", s.t_start)
                })?;
            }
        }
        let mut segments = segments;
        segments[0].t_start = -tau;
        segments.last_mut().unwrap().t_end = 0.0;
        Ok(HistoryFunction { tau, segments })
    }

    pub fn constant(tau: f64, c: f64) -> Result<Self> {
        Self::from_segments(tau, vec![Segment { a: c, b: 0.0, t_start: -tau, t_end: 0.0 }])
    }

    /// Window `[phase - tau, phase]` of the unperturbed cycle, shifted onto
    /// `[-tau, 0]`. `phase = 0` starts the solution at the cycle minimum.
    pub fn limit_cycle(p: &ModelParams, lc: &LimitCycle, phase: f64) -> Self {
        let period = lc.period;
        let eps = 1e-14 * period;
        let mut segments = Vec::with_capacity(4);
        let mut u = -p.tau; // shifted time
        while u < 0.0 {
            let mut c = (u + phase).rem_euclid(period);
            if period - c <= eps {
                c = 0.0;
            }
            let (a, branch_end) = if c < lc.t_max { (p.beta_l, lc.t_max) } else { (-p.beta_u, period) };
            let v = if c < lc.t_max {
                p.beta_l + (lc.x_min - p.beta_l) * (-c).exp()
            } else {
                -p.beta_u + (lc.x_max + p.beta_u) * (-(c - lc.t_max)).exp()
            };
            let mut end = u + (branch_end - c);
            if end > -eps {
                end = 0.0;
            }
            if end - u <= eps && end < 0.0 {
                // Rounding left a sliver; fold it into the next piece.
                u = end;
                continue;
            }
            segments.push(Segment { a, b: v - a, t_start: u, t_end: end });
            u = end;
        }
        segments[0].t_start = -p.tau;
        HistoryFunction { tau: p.tau, segments }
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|s| s.t_start <= t).saturating_sub(1);
        self.segments[i].value(t)
    }

    pub fn end_value(&self) -> f64 {
        self.segments.last().unwrap().end_value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eval_periodic, limit_cycle};

    #[test]
    fn limit_cycle_window_matches_cycle() {
        let p = ModelParams::new(1.3, 0.7, 1.4).unwrap();
        let lc = limit_cycle(&p);
        for phase in [0.0, 0.4, lc.t_max, 2.5, lc.period - 1e-3, 7.9] {
            let h = HistoryFunction::limit_cycle(&p, &lc, phase);
            for k in 0..=50 {
                let t = -p.tau + p.tau * k as f64 / 50.0;
                let want = eval_periodic(&lc, &p, t + phase);
                assert!((h.value(t) - want).abs() < 1e-12, "phase {phase} t {t}");
            }
            assert!(HistoryFunction::from_segments(p.tau, h.segments.clone()).is_ok());
        }
    }

    #[test]
    fn rejects_gaps() {
        let s = vec![
            Segment { a: 0.0, b: 1.0, t_start: -1.0, t_end: -0.5 },
            Segment { a: 0.0, b: 1.0, t_start: -0.4, t_end: 0.0 },
        ];
        assert!(HistoryFunction::from_segments(1.0, s).is_err());
    }
}
