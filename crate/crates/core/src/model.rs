//! Reduced model `x' = -x + f(x(t - tau))`, the raw-to-reduced parameter map and
//! the closed-form unperturbed limit cycle.
//!
//! The feedback is `f(y) = beta_L` for `y < 0` and `f(y) = -beta_U` for `y >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{positive_finite, require, Error, Result};

/// Physiological five-parameter form `x' = -gamma x + F(x(t - tau_raw))`,
/// with `F` switching from `b_L` to `b_U` at the threshold `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub gamma: f64,
    pub tau_raw: f64,
    pub b_l: f64,
    pub b_u: f64,
    pub theta: f64,
}

impl RawParams {
    pub fn validate(&self) -> Result<()> {
        positive_finite("gamma", self.gamma)?;
        positive_finite("tau_raw", self.tau_raw)?;
        positive_finite("b_L", self.b_l)?;
        positive_finite("b_U", self.b_u)?;
        positive_finite("theta", self.theta)?;
        require(self.b_l > self.b_u, || {
            format!("b_L > b_U required (b_L={}, b_U={})", self.b_l, self.b_u)
        })
    }
}

/// Reduced parameters. `beta_u` and `beta_l` are magnitudes: the feedback
/// takes the values `-beta_u < 0 < beta_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub tau: f64,
    pub beta_u: f64,
    pub beta_l: f64,
}

impl ModelParams {
    pub fn new(tau: f64, beta_u: f64, beta_l: f64) -> Result<Self> {
        let p = ModelParams { tau, beta_u, beta_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive_finite("tau", self.tau)?;
        positive_finite("beta_U", self.beta_u)?;
        positive_finite("beta_L", self.beta_l)
    }

    /// Feedback value for a delayed state `y`. Ties go to the upper branch.
    #[inline]
    pub fn feedback(&self, y: f64) -> f64 {
        if y < 0.0 {
            self.beta_l
        } else {
            -self.beta_u
        }
    }

    /// Natural amplitude scale used for absolute tolerances.
    pub fn scale(&self) -> f64 {
        self.beta_u.max(self.beta_l)
    }
}

/// Map raw parameters to the reduced form.
pub fn normalize_params(raw: &RawParams) -> Result<ModelParams> {
    raw.validate()?;
    let gt = raw.gamma * raw.theta;
    if raw.b_l <= gt {
        return Err(Error::NonOscillatoryRegime(format!(
            "b_L = {} must exceed gamma*theta = {}",
            raw.b_l, gt
        )));
    }
    if raw.b_u >= gt {
        return Err(Error::NonOscillatoryRegime(format!(
            "b_U = {} must be below gamma*theta = {}",
            raw.b_u, gt
        )));
    }
    ModelParams::new(
        raw.gamma * raw.tau_raw,
        raw.theta - raw.b_u / raw.gamma,
        raw.b_l / raw.gamma - raw.theta,
    )
}

/// Inverse of [`normalize_params`] given `gamma` and `theta`.
pub fn denormalize_params(p: &ModelParams, gamma: f64, theta: f64) -> Result<RawParams> {
    p.validate()?;
    positive_finite("gamma", gamma)?;
    positive_finite("theta", theta)?;
    let raw = RawParams {
        gamma,
        tau_raw: p.tau / gamma,
        b_l: gamma * (theta + p.beta_l),
        b_u: gamma * (theta - p.beta_u),
        theta,
    };
    require(raw.b_u > 0.0, || format!("beta_U = {} exceeds theta = {theta}", p.beta_u))?;
    Ok(raw)
}

/// Unperturbed periodic solution descriptors. Time origin is at the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub x_min: f64,
    pub x_max: f64,
    pub z1: f64,
    pub z2: f64,
    pub period: f64,
    pub t_max: f64,
}

impl LimitCycle {
    /// Zero with 1-based index `k` counted from t = 0 (odd rising, even falling).
    pub fn zero(&self, k: usize) -> f64 {
        assert!(k >= 1, "zero index starts at 1");
        let base = if k % 2 == 1 { self.z1 } else { self.z2 };
        base + ((k - 1) / 2) as f64 * self.period
    }
}

pub fn limit_cycle(p: &ModelParams) -> LimitCycle {
    let decay = -(-p.tau).exp_m1(); // 1 - e^{-tau}
    let x_min = -p.beta_u * decay;
    let x_max = p.beta_l * decay;
    let z1 = ((p.beta_l - x_min) / p.beta_l).ln();
    let z2 = z1 + p.tau + ((p.beta_u + x_max) / p.beta_u).ln();
    LimitCycle {
        x_min,
        x_max,
        z1,
        z2,
        period: z2 + p.tau,
        t_max: z1 + p.tau,
    }
}

/// Value of the limit cycle at `t` in `[0, period]`.
pub fn eval_unperturbed(lc: &LimitCycle, p: &ModelParams, t: f64) -> Result<f64> {
    if !(0.0..=lc.period).contains(&t) {
        return Err(Error::OutOfRange { t, lo: 0.0, hi: lc.period });
    }
    Ok(branch_value(lc, p, t))
}

/// Value of the limit cycle at any real `t` (periodic extension).
pub fn eval_periodic(lc: &LimitCycle, p: &ModelParams, t: f64) -> f64 {
    branch_value(lc, p, t.rem_euclid(lc.period))
}

fn branch_value(lc: &LimitCycle, p: &ModelParams, t: f64) -> f64 {
    if t <= lc.t_max {
        p.beta_l + (lc.x_min - p.beta_l) * (-t).exp()
    } else {
        -p.beta_u + (lc.x_max + p.beta_u) * (-(t - lc.t_max)).exp()
    }
}
