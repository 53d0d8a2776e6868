//! Single exponential piece `A + B e^{-(t - t_start)}`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Offset `A`: the value the piece relaxes toward.
    pub a: f64,
    /// Coefficient `B`: `x(t_start) - A`.
    pub b: f64,
    pub t_start: f64,
    pub t_end: f64,
}

/// Sign class of `x` on an open interval. Zero counts as non-negative.
pub(crate) type NonNeg = bool;

impl Segment {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.a + self.b * (-(t - self.t_start)).exp()
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        -self.b * (-(t - self.t_start)).exp()
    }

    #[inline]
    pub fn start_value(&self) -> f64 {
        self.a + self.b
    }

    #[inline]
    pub fn end_value(&self) -> f64 {
        self.value(self.t_end)
    }

    pub fn len(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Sign of the slope on the whole piece: +1, -1 or 0.
    pub fn slope_sign(&self) -> i8 {
        if self.b < 0.0 {
            1
        } else if self.b > 0.0 {
            -1
        } else {
            0
        }
    }

    /// Time where the unbounded exponential crosses zero, if it does.
    pub fn root(&self) -> Option<f64> {
        if self.a == 0.0 || self.b == 0.0 {
            return None;
        }
        let r = -self.b / self.a;
        (r > 0.0).then(|| self.t_start + r.ln())
    }

    /// Zero inside `[t_start, t_end]`, if any.
    pub fn zero_in_span(&self) -> Option<f64> {
        self.root().filter(|&z| z >= self.t_start && z <= self.t_end)
    }

    /// Sign classes just after the start and just before the end, snapping
    /// values within `ztol` of zero onto zero.
    pub(crate) fn classes(&self, ztol: f64) -> (NonNeg, NonNeg) {
        let s0 = snap(self.start_value(), ztol);
        let s1 = snap(self.end_value(), ztol);
        match (s0, s1) {
            (1, -1) => (true, false),
            (-1, 1) => (false, true),
            (0, 0) => {
                let mid = self.value(0.5 * (self.t_start + self.t_end));
                (mid >= 0.0, mid >= 0.0)
            }
            (0, s) | (s, 0) => (s > 0, s > 0),
            (s, _) => (s > 0, s > 0),
        }
    }
}

fn snap(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_matches_value() {
        let s = Segment { a: 1.0, b: -2.0, t_start: 0.5, t_end: 3.0 };
        let z = s.zero_in_span().unwrap();
        assert!((z - (0.5 + 2f64.ln())).abs() < 1e-15);
        assert!(s.value(z).abs() < 1e-15);
    }

    #[test]
    fn classes_cover_touches() {
        let up = Segment { a: 1.0, b: -1.0, t_start: 0.0, t_end: 1.0 };
        assert_eq!(up.classes(1e-12), (true, true));
        let down_to_zero = Segment { a: -1.0, b: 1.0 / (-1.0f64).exp(), t_start: 0.0, t_end: 1.0 };
        assert_eq!(down_to_zero.classes(1e-12), (true, true));
        let cross = Segment { a: -1.0, b: 2.0, t_start: 0.0, t_end: 2.0 };
        assert_eq!(cross.classes(1e-12), (true, false));
        let flat = Segment { a: 0.0, b: 0.0, t_start: 0.0, t_end: 1.0 };
        assert_eq!(flat.classes(1e-12), (true, true));
        assert!(flat.root().is_none());
    }
}
