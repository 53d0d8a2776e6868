//! TOML run configuration. See `configs/SCHEMA.md`.

use std::path::Path;

use pulse_dde::bifurcation::{Continuation, Direction, SweepParameter};
use pulse_dde::engine::ForcingSchedule;
use pulse_dde::model::{limit_cycle, normalize_params, ModelParams, RawParams};
use pulse_dde::treatment::PhysioParams;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelBlock>,
    pub forcing: Option<ForcingBlock>,
    #[serde(default)]
    pub simulate: SimulateOpts,
    #[serde(default)]
    pub classify: ClassifyOpts,
    #[serde(default)]
    pub clm: ClmOpts,
    #[serde(default)]
    pub lock: LockOpts,
    #[serde(default)]
    pub sweep: SweepOpts,
    #[serde(default)]
    pub poincare: PoincareOpts,
    #[serde(default)]
    pub embed: EmbedOpts,
    #[serde(default)]
    pub treat: TreatOpts,
    pub physio: Option<PhysioParams>,
    #[serde(default)]
    pub verify: VerifyOpts,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub raw: Option<RawParams>,
    pub reduced: Option<ReducedBlock>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedBlock {
    pub tau: f64,
    pub beta_u: f64,
    pub beta_l: f64,
}

/// A time given as a number or as a named point of the unperturbed cycle.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Value(f64),
    Named(NamedTime),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTime {
    Z1,
    Z2,
    TMax,
}

impl TimeSpec {
    pub fn resolve(self, p: &ModelParams) -> f64 {
        let lc = limit_cycle(p);
        match self {
            TimeSpec::Value(v) => v,
            TimeSpec::Named(NamedTime::Z1) => lc.z1,
            TimeSpec::Named(NamedTime::Z2) => lc.z2,
            TimeSpec::Named(NamedTime::TMax) => lc.t_max,
        }
    }
}

impl std::str::FromStr for TimeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "z1" => Ok(TimeSpec::Named(NamedTime::Z1)),
            "z2" => Ok(TimeSpec::Named(NamedTime::Z2)),
            "t_max" => Ok(TimeSpec::Named(NamedTime::TMax)),
            _ => s.parse::<f64>().map(TimeSpec::Value).map_err(|e| format!("{s}: {e}")),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingBlock {
    pub delta0: Option<TimeSpec>,
    pub sigma: Option<f64>,
    /// Omit for a single pulse.
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub count: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
    /// Phase of the unperturbed cycle used as history.
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOpts {
    pub delta: Option<TimeSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClmOpts {
    pub mesh: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockOpts {
    pub t_end: Option<f64>,
    pub t_lo: Option<f64>,
    pub max_q: Option<u32>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOpts {
    pub parameter: Option<SweepParameter>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub mesh: Option<usize>,
    pub direction: Option<Direction>,
    pub continuation: Option<Continuation>,
    pub transient_periods: Option<f64>,
    pub record_periods: Option<f64>,
    pub first_transient_periods: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CrossingSel {
    Rising,
    Falling,
    Both,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareOpts {
    pub t_end: Option<f64>,
    pub t_lo: Option<f64>,
    pub level: Option<f64>,
    pub crossing: Option<CrossingSel>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedOpts {
    pub t_end: Option<f64>,
    pub t_lo: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatOpts {
    #[serde(default)]
    pub min_rest_interval: RestOpts,
    #[serde(default)]
    pub fit_band: BandOpts,
    #[serde(default)]
    pub gcsf: GcsfOpts,
    #[serde(default)]
    pub chemo_scan: ChemoOpts,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestOpts {
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub x_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandOpts {
    pub x_norm: Option<f64>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcsfOpts {
    /// Number, or "a1" for the threshold dose.
    pub amplitude: Option<AmplitudeSpec>,
    pub start_day: Option<f64>,
    pub end_day: Option<f64>,
    pub settle_days: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeSpec {
    Value(f64),
    Named(NamedAmplitude),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedAmplitude {
    A1,
    /// Estimate from the change in amplification.
    Physiological,
}

impl std::str::FromStr for AmplitudeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a1" => Ok(AmplitudeSpec::Named(NamedAmplitude::A1)),
            "physiological" => Ok(AmplitudeSpec::Named(NamedAmplitude::Physiological)),
            _ => s.parse::<f64>().map(AmplitudeSpec::Value).map_err(|e| format!("{s}: {e}")),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemoOpts {
    pub gamma_n: Option<f64>,
    pub n_star: Option<f64>,
    pub period_lo: Option<f64>,
    pub period_hi: Option<f64>,
    pub period_step: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub sigma_days: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOpts {
    pub random_cases: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tau: Option<f64>,
    pub beta_u: Option<f64>,
    pub beta_l: Option<f64>,
    pub delta0: Option<TimeSpec>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
}

/// Reduced parameters from exactly one model block, then overrides.
pub fn resolve_model(cfg: &RunConfig, ov: &Overrides) -> Result<ModelParams, CliError> {
    let base = match &cfg.model {
        Some(ModelBlock { raw: Some(_), reduced: Some(_) }) => {
            return Err(CliError::Validation(
                "model: exactly one of [model.raw] and [model.reduced] may be given".into(),
            ))
        }
        Some(ModelBlock { raw: Some(r), reduced: None }) => Some(normalize_params(r)?),
        Some(ModelBlock { raw: None, reduced: Some(r) }) => {
            Some(ModelParams { tau: r.tau, beta_u: r.beta_u, beta_l: r.beta_l })
        }
        _ => None,
    };
    let pick = |name: &str, o: Option<f64>, b: Option<f64>| {
        o.or(b).ok_or_else(|| CliError::Validation(format!("model: {name} missing (config or --{name})")))
    };
    let p = ModelParams {
        tau: pick("tau", ov.tau, base.map(|b| b.tau))?,
        beta_u: pick("beta-u", ov.beta_u, base.map(|b| b.beta_u))?,
        beta_l: pick("beta-l", ov.beta_l, base.map(|b| b.beta_l))?,
    };
    p.validate()?;
    Ok(p)
}

/// Resolved forcing values; any of them may be absent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForcingValues {
    pub delta0: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub count: Option<u64>,
}

impl ForcingValues {
    pub fn resolve(cfg: &RunConfig, ov: &Overrides, p: &ModelParams) -> Self {
        let f = cfg.forcing.clone().unwrap_or_default();
        ForcingValues {
            delta0: ov.delta0.or(f.delta0).map(|d| d.resolve(p)),
            sigma: ov.sigma.or(f.sigma),
            alpha: ov.alpha.or(f.alpha),
            a: ov.a.or(f.a),
            count: f.count,
        }
    }

    pub fn need(v: Option<f64>, name: &str) -> Result<f64, CliError> {
        v.ok_or_else(|| CliError::Validation(format!("forcing: {name} missing (config or --{name})")))
    }

    /// Periodic train when `alpha` is set, a single pulse otherwise.
    pub fn schedule(&self) -> Result<ForcingSchedule, CliError> {
        let sigma = Self::need(self.sigma, "sigma")?;
        let a = Self::need(self.a, "a")?;
        let d = self.delta0.unwrap_or(0.0);
        let mut f = match self.alpha {
            Some(al) => ForcingSchedule::periodic(d, sigma, al, a)?,
            None => ForcingSchedule::single(d, sigma, a)?,
        };
        if let Some(n) = self.count {
            f = f.with_count(n);
            f.validate()?;
        }
        Ok(f)
    }
}
