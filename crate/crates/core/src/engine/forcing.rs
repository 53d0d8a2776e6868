//! Rectangular pulse train: ON on `[delta0 + n T_p, delta0 + n T_p + sigma)`.

use serde::{Deserialize, Serialize};

use crate::error::{require, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSchedule {
    pub delta0: f64,
    pub sigma: f64,
    /// OFF interval between pulses; infinite for a single pulse.
    pub alpha: f64,
    pub amplitude: f64,
    /// `None` means unbounded.
    pub pulse_count: Option<u64>,
}

impl ForcingSchedule {
    pub fn none() -> Self {
        ForcingSchedule { delta0: 0.0, sigma: 0.0, alpha: f64::INFINITY, amplitude: 0.0, pulse_count: Some(0) }
    }

    pub fn single(delta: f64, sigma: f64, amplitude: f64) -> Result<Self> {
        let f = ForcingSchedule { delta0: delta, sigma, alpha: f64::INFINITY, amplitude, pulse_count: Some(1) };
        f.validate()?;
        Ok(f)
    }

    pub fn periodic(delta0: f64, sigma: f64, alpha: f64, amplitude: f64) -> Result<Self> {
        let f = ForcingSchedule { delta0, sigma, alpha, amplitude, pulse_count: None };
        f.validate()?;
        Ok(f)
    }

    pub fn with_count(mut self, n: u64) -> Self {
        self.pulse_count = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        require(self.delta0.is_finite() && self.delta0 >= 0.0, || {
            format!("delta0 must be finite and >= 0 (got {})", self.delta0)
        })?;
        require(self.sigma.is_finite() && self.sigma >= 0.0, || {
            format!("sigma must be finite and >= 0 (got {})", self.sigma)
        })?;
        // alpha = 0 is back-to-back pulses.
        require(self.alpha >= 0.0 && !self.alpha.is_nan(), || {
            format!("alpha must be >= 0 (got {})", self.alpha)
        })?;
        require(self.amplitude.is_finite(), || "amplitude must be finite".to_string())?;
        if self.pulse_count.is_none_or(|n| n > 1) {
            require(self.sigma + self.alpha > 0.0, || "pulse period sigma + alpha must be > 0".to_string())?;
        }
        if self.alpha.is_infinite() {
            require(self.pulse_count.is_some_and(|n| n <= 1), || {
                "infinite alpha requires at most one pulse".to_string()
            })?;
        }
        Ok(())
    }

    /// Pulse period `T_p = sigma + alpha`.
    pub fn period(&self) -> f64 {
        self.sigma + self.alpha
    }

    pub fn is_active(&self) -> bool {
        self.amplitude != 0.0 && self.pulse_count != Some(0)
    }

    pub fn onset(&self, n: u64) -> f64 {
        if n == 0 {
            self.delta0
        } else {
            self.delta0 + n as f64 * self.period()
        }
    }

    pub fn has_pulse(&self, n: u64) -> bool {
        self.pulse_count.is_none_or(|c| n < c)
    }

    /// Forcing value `p(t)`.
    pub fn value(&self, t: f64) -> f64 {
        if !self.is_active() || t < self.delta0 {
            return 0.0;
        }
        let n = if self.alpha.is_infinite() { 0 } else { ((t - self.delta0) / self.period()).floor() as u64 };
        // floor can land one pulse late when t sits on an onset.
        for k in [n.saturating_sub(1), n] {
            if self.has_pulse(k) {
                let on = self.onset(k);
                if t >= on && t < on + self.sigma {
                    return self.amplitude;
                }
            }
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_values() {
        let f = ForcingSchedule::periodic(1.0, 0.5, 1.5, 2.0).unwrap();
        assert_eq!(f.period(), 2.0);
        assert_eq!(f.value(0.9), 0.0);
        assert_eq!(f.value(1.0), 2.0);
        assert_eq!(f.value(1.49), 2.0);
        assert_eq!(f.value(1.5), 0.0);
        assert_eq!(f.value(5.2), 2.0);
    }

    #[test]
    fn single_pulse_only_once() {
        let f = ForcingSchedule::single(0.3, 0.2, 1.0).unwrap();
        assert_eq!(f.value(0.4), 1.0);
        assert_eq!(f.value(100.4), 0.0);
        assert!(ForcingSchedule { pulse_count: None, ..f }.validate().is_err());
    }

    #[test]
    fn zero_gap_is_continuous_on() {
        let f = ForcingSchedule::periodic(0.0, 0.5, 0.0, 1.0).unwrap();
        for k in 0..100 {
            assert_eq!(f.value(k as f64 * 0.0731), 1.0);
        }
    }
}
