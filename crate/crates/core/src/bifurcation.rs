//! Orbit diagrams by parameter continuation, delay embeddings and projected
//! Poincaré sections.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{solve, Crossing, ForcingSchedule, HistoryFunction, Trajectory};
use crate::error::{require, Result};
use crate::model::{limit_cycle, ModelParams};
use crate::par::Execution;
use crate::periodic::detect_locking;

/// Clustering tolerance for distinct extrema.
pub const EXTREMA_CLUSTER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    A,
    Sigma,
    BetaU,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// How each mesh point gets its history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    /// Tail of the previous point's run; sequential.
    Warm,
    /// Unperturbed cycle at every point; independent, so parallelizable.
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub mesh_count: usize,
    pub direction: Direction,
    /// In forcing periods.
    pub transient_periods: f64,
    pub record_periods: f64,
    /// Transient before the first (or every cold) point.
    pub first_transient_periods: f64,
    pub continuation: Continuation,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, lo: f64, hi: f64) -> Self {
        SweepSpec {
            parameter,
            lo,
            hi,
            mesh_count: 10_000,
            direction: Direction::Increasing,
            transient_periods: 5.5,
            record_periods: 5.5,
            first_transient_periods: 220.0,
            continuation: Continuation::Warm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.mesh_count >= 2, || format!("mesh_count must be >= 2 (got {})", self.mesh_count))?;
        require(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi, || {
            format!("sweep range must satisfy lo < hi (got [{}, {}])", self.lo, self.hi)
        })?;
        require(self.transient_periods >= 0.0 && self.first_transient_periods >= 0.0, || {
            "transients must be >= 0".to_string()
        })?;
        require(self.record_periods > 0.0, || "record_periods must be > 0".to_string())
    }

    /// Parameter values in traversal order.
    pub fn mesh(&self) -> Vec<f64> {
        let n = self.mesh_count;
        let mut v: Vec<f64> = (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect();
        if self.direction == Direction::Decreasing {
            v.reverse();
        }
        v
    }
}

/// Apply one swept value to the base configuration.
pub fn apply_parameter(
    p: &ModelParams,
    f: &ForcingSchedule,
    which: SweepParameter,
    value: f64,
) -> Result<(ModelParams, ForcingSchedule)> {
    let (mut p, mut f) = (*p, *f);
    match which {
        SweepParameter::A => f.amplitude = value,
        SweepParameter::Sigma => f.sigma = value,
        SweepParameter::BetaU => p.beta_u = value,
        SweepParameter::Tau => p.tau = value,
    }
    p.validate()?;
    f.validate()?;
    Ok((p, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaRecord {
    pub value: f64,
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
}

fn cluster(mut xs: Vec<f64>, tol: f64) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in xs {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

impl ExtremaRecord {
    pub fn distinct_maxima(&self, tol: f64) -> Vec<f64> {
        cluster(self.maxima.iter().map(|e| e.x).collect(), tol)
    }

    pub fn distinct_minima(&self, tol: f64) -> Vec<f64> {
        cluster(self.minima.iter().map(|e| e.x).collect(), tol)
    }
}

/// Local extrema on `[t_lo, t_hi]` from slope sign changes across breaking
/// points. Flat pieces are skipped.
pub fn extrema_between(traj: &Trajectory, t_lo: f64, t_hi: f64) -> (Vec<Extremum>, Vec<Extremum>) {
    let (mut maxima, mut minima) = (Vec::new(), Vec::new());
    let segs = traj.solution_segments();
    let mut prev: Option<(i8, f64)> = None; // (slope sign, end time)
    for s in segs {
        if s.t_end <= t_lo || s.t_start > t_hi || s.t_end <= s.t_start {
            continue;
        }
        let sign = s.slope_sign();
        if sign == 0 {
            continue;
        }
        if let Some((ps, _)) = prev {
            let t = s.t_start;
            if t > t_lo && t < t_hi && ps != sign {
                let e = Extremum { t, x: s.start_value() };
                if ps > 0 {
                    maxima.push(e);
                } else {
                    minima.push(e);
                }
            }
        }
        prev = Some((sign, s.t_end));
    }
    (maxima, minima)
}

/// Run length for a point: ends on a pulse onset.
fn run_end(f: &ForcingSchedule, periods: f64) -> f64 {
    f.delta0 + periods.ceil() * f.period()
}

fn one_point(
    p: &ModelParams,
    f: &ForcingSchedule,
    history: &HistoryFunction,
    transient: f64,
    spec: &SweepSpec,
    value: f64,
) -> Result<(ExtremaRecord, Trajectory)> {
    let t_end = run_end(f, transient + spec.record_periods);
    let traj = solve(p, history, f, t_end)?;
    let lo = t_end - spec.record_periods * f.period();
    let (maxima, minima) = extrema_between(&traj, lo, t_end);
    Ok((ExtremaRecord { value, maxima, minima }, traj))
}

/// Orbit diagram. Warm continuation runs in mesh order; cold points are
/// independent and use `exec`.
pub fn sweep(p0: &ModelParams, forcing0: &ForcingSchedule, spec: &SweepSpec, exec: Execution) -> Result<Vec<ExtremaRecord>> {
    spec.validate()?;
    require(forcing0.alpha.is_finite(), || "sweeps need a periodic schedule".into())?;
    let mesh = spec.mesh();
    match spec.continuation {
        Continuation::Cold => {
            let out = exec.map(&mesh, |&v| -> Result<ExtremaRecord> {
                let (p, f) = apply_parameter(p0, forcing0, spec.parameter, v)?;
                let h = HistoryFunction::limit_cycle(&p, &limit_cycle(&p), 0.0);
                Ok(one_point(&p, &f, &h, spec.first_transient_periods, spec, v)?.0)
            });
            out.into_iter().collect()
        }
        Continuation::Warm => {
            let mut out = Vec::with_capacity(mesh.len());
            let mut prev: Option<Trajectory> = None;
            for &v in &mesh {
                let (p, mut f) = apply_parameter(p0, forcing0, spec.parameter, v)?;
                let (h, transient) = match &prev {
                    None => (HistoryFunction::limit_cycle(&p, &limit_cycle(&p), 0.0), spec.first_transient_periods),
                    Some(tr) => {
                        // The previous run ended on an onset, so the next starts with a pulse.
                        f.delta0 = 0.0;
                        (tr.tail_history(p.tau)?, spec.transient_periods)
                    }
                };
                let (rec, tr) = one_point(&p, &f, &h, transient, spec, v)?;
                out.push(rec);
                prev = Some(tr);
            }
            Ok(out)
        }
    }
}

/// Periodic orbit class: locking ratio and number of distinct maxima
/// ("period-k" in the orbit diagram).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitClass {
    pub q: u32,
    pub branches: usize,
}

/// Orbit class per value from a warm continuation with a long record.
/// `None` marks points with no `q <= 64` lock on the record (irregular).
pub fn orbit_profile(
    p0: &ModelParams,
    forcing0: &ForcingSchedule,
    parameter: SweepParameter,
    values: &[f64],
    transient_periods: f64,
    record_periods: f64,
    first_transient_periods: f64,
) -> Result<Vec<Option<OrbitClass>>> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev: Option<Trajectory> = None;
    for &v in values {
        let (p, mut f) = apply_parameter(p0, forcing0, parameter, v)?;
        let (h, transient) = match &prev {
            None => (HistoryFunction::limit_cycle(&p, &limit_cycle(&p), 0.0), first_transient_periods),
            Some(tr) => {
                f.delta0 = 0.0;
                (tr.tail_history(p.tau)?, transient_periods)
            }
        };
        let t_end = run_end(&f, transient + record_periods);
        let traj = solve(&p, &h, &f, t_end)?;
        let lo = t_end - record_periods * f.period();
        out.push(detect_locking(&traj, f.period(), lo).map(|l| {
            let (maxima, _) = extrema_between(&traj, lo, t_end);
            let branches = cluster(maxima.iter().map(|e| e.x).collect(), EXTREMA_CLUSTER_TOL).len();
            OrbitClass { q: l.q, branches }
        }));
        prev = Some(traj);
    }
    Ok(out)
}

/// Windows of equal branch count (`None` = irregular), dropping runs shorter
/// than `min_len` and merging neighbours that become equal.
pub fn branch_windows(profile: &[Option<OrbitClass>], min_len: usize) -> Vec<(Option<usize>, usize, usize)> {
    let labels: Vec<Option<usize>> = profile.iter().map(|c| c.map(|c| c.branches)).collect();
    let mut out: Vec<(Option<usize>, usize, usize)> = Vec::new();
    for w in windows(&labels).into_iter().filter(|w| w.2 >= min_len) {
        match out.last_mut() {
            Some(last) if last.0 == w.0 => last.2 = w.1 + w.2 - last.1,
            _ => out.push(w),
        }
    }
    out
}

/// Consecutive runs of equal labels, `(label, first index, length)`.
pub fn windows<T: PartialEq + Copy>(labels: &[T]) -> Vec<(T, usize, usize)> {
    let mut out: Vec<(T, usize, usize)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == l => last.2 += 1,
            _ => out.push((l, i, 1)),
        }
    }
    out
}

pub fn write_diagram_csv<W: Write>(records: &[ExtremaRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "param_value,kind,x_value")?;
    for r in records {
        for x in r.distinct_maxima(EXTREMA_CLUSTER_TOL) {
            writeln!(w, "{},max,{x}", r.value)?;
        }
        for x in r.distinct_minima(EXTREMA_CLUSTER_TOL) {
            writeln!(w, "{},min,{x}", r.value)?;
        }
    }
    Ok(())
}

/// `(x(t - tau), x(t))` on a uniform grid merged with the breaking points of
/// both coordinates.
pub fn delay_embedding(traj: &Trajectory, t_lo: f64, t_hi: f64, tau: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    require(t_lo - tau >= traj.t_start() && t_hi <= traj.t_end && t_lo < t_hi, || {
        format!("embedding window [{t_lo}, {t_hi}] needs [{}, {}]", traj.t_start() + tau, traj.t_end)
    })?;
    let mut ts: Vec<f64> =
        (0..n.max(2)).map(|k| t_lo + (t_hi - t_lo) * k as f64 / (n.max(2) - 1) as f64).collect();
    ts.extend_from_slice(traj.breaking_points_between(t_lo, t_hi));
    ts.extend(traj.breaking_points_between(t_lo - tau, t_hi - tau).iter().map(|b| b + tau));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts.into_iter().map(|t| (traj.value(t - tau), traj.value(t))).collect())
}

pub fn write_embedding_csv<W: Write>(pts: &[(f64, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x_tau,x")?;
    for (a, b) in pts {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub level: f64,
    pub direction: Crossing,
    /// Embedding delays, usually `(tau, 2 tau)`.
    pub delays: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub t: f64,
    pub x_d1: f64,
    pub x_d2: f64,
    pub direction: Crossing,
}

/// Crossings of `x = level` in the requested direction on `[t_lo, t_hi)`,
/// projected onto `(x(t - d1), x(t - d2))`.
pub fn poincare_section(traj: &Trajectory, spec: &SectionSpec, t_lo: f64, t_hi: f64) -> Result<Vec<SectionPoint>> {
    let (d1, d2) = spec.delays;
    require(spec.level.is_finite(), || "section level must be finite".into())?;
    require(t_lo - d1.max(d2) >= traj.t_start() && t_hi <= traj.t_end, || {
        format!("section window [{t_lo}, {t_hi}] exceeds the stored trajectory")
    })?;
    let mut out = Vec::new();
    for s in traj.solution_segments() {
        if s.t_end <= t_lo || s.t_start >= t_hi || s.t_end <= s.t_start {
            continue;
        }
        let dir = match s.slope_sign() {
            1 => Crossing::Rising,
            -1 => Crossing::Falling,
            _ => continue,
        };
        if dir != spec.direction {
            continue;
        }
        // a + b e^{-(t - ts)} = level
        let r = (spec.level - s.a) / s.b;
        if r.is_nan() || r <= 0.0 {
            continue;
        }
        let t = s.t_start - r.ln();
        if t >= s.t_start && t < s.t_end && t >= t_lo && t < t_hi {
            out.push(SectionPoint { t, x_d1: traj.value(t - d1), x_d2: traj.value(t - d2), direction: dir });
        }
    }
    Ok(out)
}

pub fn write_section_csv<W: Write>(pts: &[SectionPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x_tau,x_2tau,t_c,direction")?;
    for p in pts {
        let d = match p.direction {
            Crossing::Rising => "rising",
            Crossing::Falling => "falling",
        };
        writeln!(w, "{},{},{},{d}", p.x_d1, p.x_d2, p.t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_base() -> (ModelParams, ForcingSchedule) {
        let p = ModelParams::new(1.0, 0.7, 1.4).unwrap();
        let lc = limit_cycle(&p);
        (p, ForcingSchedule::periodic(lc.z2, 0.6, 0.3, 0.9).unwrap())
    }

    #[test]
    fn zero_amplitude_gives_cycle_extrema() {
        let (p, f) = fig_base();
        let lc = limit_cycle(&p);
        let mut spec = SweepSpec::new(SweepParameter::A, 0.0, 0.1);
        spec.mesh_count = 2;
        spec.first_transient_periods = 10.0;
        let recs = sweep(&p, &f, &spec, Execution::Sequential).unwrap();
        let r = &recs[0];
        assert_eq!(r.distinct_maxima(EXTREMA_CLUSTER_TOL).len(), 1);
        assert!((r.distinct_maxima(1e-7)[0] - lc.x_max).abs() < 1e-12);
        assert!(r.minima.iter().all(|e| (e.x - lc.x_min).abs() < 1e-12));
    }

    #[test]
    fn extrema_sit_on_breaking_points() {
        let (p, f) = fig_base();
        let tr = solve(&p, &HistoryFunction::limit_cycle(&p, &limit_cycle(&p), 0.0), &f, 60.0).unwrap();
        let (mx, mn) = extrema_between(&tr, 10.0, 60.0);
        assert!(!mx.is_empty() && !mn.is_empty());
        for e in mx.iter().chain(&mn) {
            assert!(tr.is_breaking_point(e.t));
        }
    }

    #[test]
    fn section_points_hit_level() {
        let (p, f) = fig_base();
        let tr = solve(&p, &HistoryFunction::limit_cycle(&p, &limit_cycle(&p), 0.0), &f, 60.0).unwrap();
        let spec = SectionSpec { level: 0.14, direction: Crossing::Rising, delays: (1.0, 2.0) };
        let pts = poincare_section(&tr, &spec, 5.0, 60.0).unwrap();
        assert!(!pts.is_empty());
        for q in &pts {
            assert!((tr.value(q.t) - 0.14).abs() < 1e-12);
        }
        let high = SectionSpec { level: 100.0, ..spec };
        assert!(poincare_section(&tr, &high, 5.0, 60.0).unwrap().is_empty());
    }

    #[test]
    fn warm_sweep_is_deterministic() {
        let (p, f) = fig_base();
        let mut spec = SweepSpec::new(SweepParameter::BetaU, 0.6, 0.8);
        spec.mesh_count = 20;
        let a = sweep(&p, &f, &spec, Execution::Sequential).unwrap();
        let b = sweep(&p, &f, &spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn locked_profile_counts_branches() {
        let (p, f) = fig_base();
        let prof = orbit_profile(&p, &f, SweepParameter::BetaU, &[0.7], 100.0, 60.0, 220.0).unwrap();
        assert_eq!(prof[0], Some(OrbitClass { q: 5, branches: 4 }));
    }

    #[test]
    fn branch_windows_drop_blips() {
        let c = |b| Some(OrbitClass { q: 5, branches: b });
        let prof = [c(1), c(1), c(5), c(5), c(3), c(5), c(5), None, None];
        let w = branch_windows(&prof, 2);
        assert_eq!(w, vec![(Some(1), 0, 2), (Some(5), 2, 5), (None, 7, 2)]);
    }

    #[test]
    fn windows_group_runs() {
        let w = windows(&[1, 1, 5, 5, 5, 4]);
        assert_eq!(w, vec![(1, 0, 2), (5, 2, 3), (4, 5, 1)]);
    }
}
