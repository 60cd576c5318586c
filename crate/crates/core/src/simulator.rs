//! Forward-Euler simulation of the guided ring with zero-order-hold control,
//! emergency braking, collision detection and driver-error models.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::ring_model::{optimal_velocity, Controller, GuidanceKind, SystemMatrices};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_step: f64,
    pub total_time: f64,
    pub n_seeds: usize,
    pub perturb_s: f64,
    pub perturb_v: f64,
    pub a_min: f64,
    pub s_d: f64,
    pub convergence_eps: f64,
    pub rng_seed: u64,
    /// Emergency braking on/off.
    pub aeb: bool,
    /// Runs whose state norm exceeds this are stopped as diverged.
    pub divergence_norm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_step: 0.01,
            total_time: 300.0,
            n_seeds: 50,
            perturb_s: 7.5,
            perturb_v: 4.5,
            a_min: -5.0,
            s_d: 0.5,
            convergence_eps: 1.0,
            rng_seed: 0,
            aeb: true,
            divergence_norm: 1e6,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.t_step > 0.0 && self.t_step.is_finite()) {
            return bad("t_step must be positive");
        }
        if !(self.total_time >= self.t_step) {
            return bad("total_time must be at least t_step");
        }
        if !(self.convergence_eps > 0.0) {
            return bad("convergence_eps must be positive");
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be positive");
        }
        if !(self.perturb_s >= 0.0 && self.perturb_v >= 0.0) {
            return bad("perturbation half-widths must be nonnegative");
        }
        if !(self.a_min < 0.0) {
            return bad("a_min must be negative");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.total_time / self.t_step).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DisturbanceKind {
    #[default]
    None,
    /// Constant offset `d_nv` (m/s²) on masked vehicles.
    Nonvanishing(f64),
    /// Offset `d_v · ‖x‖₂` on masked vehicles.
    Vanishing(f64),
    /// Control updates take effect `Σ` seconds late.
    ReactionDelay(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayRealization {
    #[default]
    WorstCase,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub bernoulli_p: f64,
    /// Redraw the Bernoulli mask every step instead of once per run.
    pub redraw_per_step: bool,
    pub delay: DelayRealization,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::None,
            bernoulli_p: 0.5,
            redraw_per_step: false,
            delay: DelayRealization::WorstCase,
        }
    }
}

impl DisturbanceModel {
    pub fn new(kind: DisturbanceKind) -> Self {
        Self { kind, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Plant {
    Linearized,
    #[default]
    NonlinearOvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    AebTriggered,
    Collision,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::AebTriggered => "aeb",
            EventKind::Collision => "collision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub vehicle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Collided,
    Diverged,
}

/// Tail windows used for ultimate-bound estimates.
pub const TAIL_FRACTIONS: [f64; 3] = [0.10, 0.20, 0.30];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub status: RunStatus,
    pub final_norm: f64,
    /// Max of ‖x‖₂ over the last 10/20/30% of the horizon.
    pub tail_max: [f64; 3],
    pub collision_time: Option<f64>,
    pub aeb_activations: usize,
}

impl RunSummary {
    pub fn collided(&self) -> bool {
        self.status == RunStatus::Collided
    }

    pub fn converged(&self, eps: f64) -> bool {
        self.status == RunStatus::Completed && self.final_norm <= eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Error states `x(t)`.
    pub states: Vec<Vec<f64>>,
    /// Control applied to the guided vehicle at each recorded time.
    pub controls: Vec<f64>,
    /// `(t_k, u)` at every hold update.
    pub control_log: Vec<(f64, f64)>,
    pub events: Vec<Event>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Converged,
    Collided,
    NotConverged,
}

impl VerdictStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictStatus::Converged => "converged",
            VerdictStatus::Collided => "collided",
            VerdictStatus::NotConverged => "not_converged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub status: VerdictStatus,
    /// Largest final ‖x‖₂ across runs.
    pub final_error_norm: f64,
    pub ultimate_bound: Option<f64>,
    pub n_runs: usize,
    pub n_converged: usize,
    pub n_collided: usize,
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    half_width * (2.0 * rng.random::<f64>() - 1.0)
}

fn seeded_rng(rng_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(seed);
    rng
}

struct InitialDraw {
    pos: Vec<f64>,
    vel: Vec<f64>,
    rng: ChaCha8Rng,
}

/// Unwrapped positions with vehicle 1 in front: `p_i = (n - i) s* + δs_i`.
fn initial_draw(sys: &SystemMatrices, cfg: &SimConfig, seed: u64) -> InitialDraw {
    let n = sys.n();
    let s_star = sys.eq.s_star;
    let mut rng = seeded_rng(cfg.rng_seed, seed);
    let ds: Vec<f64> = (0..n).map(|_| uniform(&mut rng, cfg.perturb_s)).collect();
    let dv: Vec<f64> = (0..n).map(|_| uniform(&mut rng, cfg.perturb_v)).collect();
    let pos = (0..n).map(|i| (n - 1 - i) as f64 * s_star + ds[i]).collect();
    let vel = (0..n).map(|i| sys.eq.v_star + dv[i]).collect();
    InitialDraw { pos, vel, rng }
}

fn spacings(pos: &[f64], l: f64, out: &mut [f64]) {
    let n = pos.len();
    out[0] = pos[n - 1] + l - pos[0];
    for i in 1..n {
        out[i] = pos[i - 1] - pos[i];
    }
}

/// Error state `x(0)` for `(cfg.rng_seed, seed)`.
pub fn initial_state(sys: &SystemMatrices, cfg: &SimConfig, seed: u64) -> Vector {
    let d = initial_draw(sys, cfg, seed);
    let n = sys.n();
    let mut s = vec![0.0; n];
    spacings(&d.pos, sys.params.l, &mut s);
    let mut x = Vector::zeros(2 * n);
    for i in 0..n {
        x[2 * i] = s[i] - sys.eq.s_star;
        x[2 * i + 1] = d.vel[i] - sys.eq.v_star;
    }
    x
}

/// Emergency braking rule; returns the override acceleration if it fires.
pub fn aeb_override(v_i: f64, v_prev: f64, s_i: f64, cfg: &SimConfig) -> Option<f64> {
    if s_i <= cfg.s_d {
        return Some(cfg.a_min);
    }
    let lhs = (v_i * v_i - v_prev * v_prev) / (2.0 * (s_i - cfg.s_d));
    (lhs >= cfg.a_min.abs()).then_some(cfg.a_min)
}

/// Number of integration steps per hold period; `delta` is snapped down to the step grid.
pub fn hold_steps(delta: f64, t_step: f64) -> Result<usize> {
    if !delta.is_finite() || delta < t_step * (1.0 - 1e-9) {
        return Err(Error::InvalidDelta { delta, t_step });
    }
    let k = ((delta / t_step) + 1e-9).floor() as usize;
    if ((k as f64) * t_step - delta).abs() > 1e-9 * delta.max(1.0) {
        log::debug!("hold length {delta} snapped to {}", k as f64 * t_step);
    }
    Ok(k.max(1))
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn new(cap: usize) -> Self {
        Self {
            traj: Trajectory {
                times: Vec::with_capacity(cap),
                states: Vec::with_capacity(cap),
                controls: Vec::with_capacity(cap),
                control_log: Vec::new(),
                events: Vec::new(),
                summary: RunSummary {
                    seed: 0,
                    status: RunStatus::Completed,
                    final_norm: 0.0,
                    tail_max: [0.0; 3],
                    collision_time: None,
                    aeb_activations: 0,
                },
            },
        }
    }
}

struct Engine<'a> {
    sys: &'a SystemMatrices,
    c: &'a Controller,
    dist: &'a DisturbanceModel,
    plant: Plant,
    cfg: &'a SimConfig,
    hold: usize,
}

impl<'a> Engine<'a> {
    fn run(&self, seed: u64, mut rec: Option<&mut Recorder>) -> RunSummary {
        let sys = self.sys;
        let cfg = self.cfg;
        let n = sys.n();
        let dim = 2 * n;
        let h = cfg.t_step;
        let l = sys.params.l;
        let (s_star, v_star) = (sys.eq.s_star, sys.eq.v_star);
        let steps = cfg.n_steps();
        let tail_start: [usize; 3] =
            TAIL_FRACTIONS.map(|f| ((1.0 - f) * steps as f64).floor() as usize);

        let InitialDraw { mut pos, mut vel, mut rng } = initial_draw(sys, cfg, seed);
        let mut mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < self.dist.bernoulli_p { 1.0 } else { 0.0 })
            .collect();

        let mut s = vec![0.0; n];
        spacings(&pos, l, &mut s);
        let mut x = vec![0.0; dim];
        for i in 0..n {
            x[2 * i] = s[i] - s_star;
            x[2 * i + 1] = vel[i] - v_star;
        }

        let delay_steps = |rng: &mut ChaCha8Rng| -> usize {
            match self.dist.kind {
                DisturbanceKind::ReactionDelay(sigma) => {
                    let d = match self.dist.delay {
                        DelayRealization::WorstCase => sigma,
                        DelayRealization::Uniform => sigma * rng.random::<f64>(),
                    };
                    (d / h + 1e-9).floor() as usize
                }
                _ => 0,
            }
        };

        let mut pending: VecDeque<(usize, f64)> = VecDeque::new();
        let mut u = 0.0;
        let mut acc = vec![0.0; n];
        let mut xdot = vec![0.0; dim];
        let mut braking = vec![false; n];
        let mut summary = RunSummary {
            seed,
            status: RunStatus::Completed,
            final_norm: 0.0,
            tail_max: [0.0; 3],
            collision_time: None,
            aeb_activations: 0,
        };

        let mut k = 0usize;
        loop {
            let t = k as f64 * h;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > cfg.divergence_norm {
                summary.status = RunStatus::Diverged;
                summary.final_norm = f64::INFINITY;
                break;
            }
            for (j, start) in tail_start.iter().enumerate() {
                if k >= *start {
                    summary.tail_max[j] = summary.tail_max[j].max(norm);
                }
            }
            if let Some(v) = s.iter().position(|&si| si < 0.0) {
                summary.status = RunStatus::Collided;
                summary.collision_time = Some(t);
                summary.final_norm = norm;
                if let Some(r) = rec.as_deref_mut() {
                    r.traj.events.push(Event { t, kind: EventKind::Collision, vehicle: v });
                    r.traj.times.push(t);
                    r.traj.states.push(x.clone());
                    r.traj.controls.push(u);
                }
                break;
            }

            if k % self.hold == 0 {
                let uk = self.c.control(&x);
                let lag = delay_steps(&mut rng);
                if lag == 0 {
                    u = uk;
                } else {
                    pending.push_back((k + lag, uk));
                }
                if let Some(r) = rec.as_deref_mut() {
                    r.traj.control_log.push((t, uk));
                }
            }
            while let Some(&(when, uk)) = pending.front() {
                if when > k {
                    break;
                }
                u = uk;
                pending.pop_front();
            }

            if let Some(r) = rec.as_deref_mut() {
                r.traj.times.push(t);
                r.traj.states.push(x.clone());
                r.traj.controls.push(u);
            }
            if k == steps {
                summary.final_norm = norm;
                break;
            }

            // Physical accelerations before overrides.
            match self.plant {
                Plant::NonlinearOvm => {
                    let p = &sys.params;
                    for i in 1..n {
                        acc[i] = p.alpha * (optimal_velocity(s[i], p) - vel[i]) + p.beta * (vel[i - 1] - vel[i]);
                    }
                    acc[0] = match sys.guidance {
                        GuidanceKind::PiecewiseAcceleration => u,
                        GuidanceKind::PiecewiseVelocity => {
                            p.alpha * (v_star + u - vel[0]) + p.beta * (vel[n - 1] - vel[0])
                        }
                    };
                }
                Plant::Linearized => {
                    for r in 0..dim {
                        let row = sys.a.row(r);
                        xdot[r] = row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + sys.b[(r, 0)] * u;
                    }
                    for i in 0..n {
                        acc[i] = xdot[2 * i + 1];
                    }
                }
            }

            if self.dist.redraw_per_step && k > 0 {
                for m in mask.iter_mut() {
                    *m = if rng.random::<f64>() < self.dist.bernoulli_p { 1.0 } else { 0.0 };
                }
            }
            let offset = match self.dist.kind {
                DisturbanceKind::Nonvanishing(d) => d,
                DisturbanceKind::Vanishing(d) => d * norm,
                _ => 0.0,
            };
            if offset != 0.0 {
                for i in 0..n {
                    acc[i] += mask[i] * offset;
                }
            }

            if cfg.aeb {
                for i in 0..n {
                    let prev = if i == 0 { n - 1 } else { i - 1 };
                    let fired = match aeb_override(vel[i], vel[prev], s[i], cfg) {
                        Some(a) => {
                            acc[i] = acc[i].min(a);
                            true
                        }
                        None => false,
                    };
                    if fired && !braking[i] {
                        summary.aeb_activations += 1;
                        if let Some(r) = rec.as_deref_mut() {
                            r.traj.events.push(Event { t, kind: EventKind::AebTriggered, vehicle: i });
                        }
                    }
                    braking[i] = fired;
                }
            }

            match self.plant {
                Plant::NonlinearOvm => {
                    for i in 0..n {
                        pos[i] += h * vel[i];
                        vel[i] += h * acc[i];
                    }
                    spacings(&pos, l, &mut s);
                    for i in 0..n {
                        x[2 * i] = s[i] - s_star;
                        x[2 * i + 1] = vel[i] - v_star;
                    }
                }
                Plant::Linearized => {
                    for i in 0..n {
                        x[2 * i] += h * xdot[2 * i];
                        x[2 * i + 1] += h * acc[i];
                        s[i] = x[2 * i] + s_star;
                        vel[i] = x[2 * i + 1] + v_star;
                    }
                }
            }
            k += 1;
        }
        summary
    }
}

fn engine<'a>(
    sys: &'a SystemMatrices,
    c: &'a Controller,
    delta: f64,
    dist: &'a DisturbanceModel,
    plant: Plant,
    cfg: &'a SimConfig,
) -> Result<Engine<'a>> {
    cfg.validate()?;
    if c.dim() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "controller has {} gains, system has {} states",
            c.dim(),
            sys.dim()
        )));
    }
    if let DisturbanceKind::ReactionDelay(sigma) = dist.kind {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParams("reaction delay must be nonnegative".into()));
        }
    }
    Ok(Engine {
        sys,
        c,
        dist,
        plant,
        cfg,
        hold: hold_steps(delta, cfg.t_step)?,
    })
}

/// Full trajectory for one seed.
pub fn simulate(
    sys: &SystemMatrices,
    c: &Controller,
    delta: f64,
    dist: &DisturbanceModel,
    plant: Plant,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Trajectory> {
    let e = engine(sys, c, delta, dist, plant, cfg)?;
    let mut rec = Recorder::new(cfg.n_steps() + 1);
    let summary = e.run(seed, Some(&mut rec));
    rec.traj.summary = summary;
    Ok(rec.traj)
}

/// Summary of one seed without storing the trajectory.
pub fn simulate_summary(
    sys: &SystemMatrices,
    c: &Controller,
    delta: f64,
    dist: &DisturbanceModel,
    plant: Plant,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RunSummary> {
    Ok(engine(sys, c, delta, dist, plant, cfg)?.run(seed, None))
}

/// Summaries for seeds `0..cfg.n_seeds`, in seed order.
pub fn run_ensemble(
    sys: &SystemMatrices,
    c: &Controller,
    delta: f64,
    dist: &DisturbanceModel,
    plant: Plant,
    cfg: &SimConfig,
) -> Result<Vec<RunSummary>> {
    let e = engine(sys, c, delta, dist, plant, cfg)?;
    Ok((0..cfg.n_seeds as u64).into_par_iter().map(|s| e.run(s, None)).collect())
}

/// True iff every seed converges; stops at the first failing seed.
pub fn ensemble_converges(
    sys: &SystemMatrices,
    c: &Controller,
    delta: f64,
    dist: &DisturbanceModel,
    plant: Plant,
    cfg: &SimConfig,
) -> Result<bool> {
    let e = engine(sys, c, delta, dist, plant, cfg)?;
    let eps = cfg.convergence_eps;
    Ok((0..cfg.n_seeds as u64).into_par_iter().all(|s| e.run(s, None).converged(eps)))
}

pub fn classify(runs: &[RunSummary], cfg: &SimConfig) -> Result<StabilityVerdict> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("classify needs at least one run"));
    }
    let n_collided = runs.iter().filter(|r| r.collided()).count();
    let n_converged = runs.iter().filter(|r| r.converged(cfg.convergence_eps)).count();
    let status = if n_collided > 0 {
        VerdictStatus::Collided
    } else if n_converged == runs.len() {
        VerdictStatus::Converged
    } else {
        VerdictStatus::NotConverged
    };
    Ok(StabilityVerdict {
        status,
        final_error_norm: runs.iter().map(|r| r.final_norm).fold(0.0, f64::max),
        ultimate_bound: Some(runs.iter().map(|r| r.tail_max[0]).fold(0.0, f64::max)),
        n_runs: runs.len(),
        n_converged,
        n_collided,
    })
}

pub fn classify_trajectories(trajs: &[Trajectory], cfg: &SimConfig) -> Result<StabilityVerdict> {
    let runs: Vec<RunSummary> = trajs.iter().map(|t| t.summary).collect();
    classify(&runs, cfg)
}

/// Max of ‖x‖₂ over the last `tail_fraction` of every trajectory.
pub fn ultimate_bound(trajs: &[Trajectory], tail_fraction: f64) -> Result<f64> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput("ultimate_bound needs at least one trajectory"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParams("tail fraction must lie in (0, 1]".into()));
    }
    let len = trajs[0].states.len();
    if trajs.iter().any(|t| t.states.len() != len) {
        return Err(Error::DimensionMismatch("trajectories differ in length".into()));
    }
    let steps = len.saturating_sub(1);
    let start = ((1.0 - tail_fraction) * steps as f64).floor() as usize;
    let mut best: f64 = 0.0;
    for t in trajs {
        for x in &t.states[start..] {
            best = best.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    Ok(best)
}

/// Ultimate bounds at the 10/20/30% tails from run summaries.
pub fn ultimate_bounds(runs: &[RunSummary]) -> Result<[f64; 3]> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("ultimate_bounds needs at least one run"));
    }
    let mut out = [0.0f64; 3];
    for r in runs {
        for j in 0..3 {
            out[j] = out[j].max(r.tail_max[j]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring_model::{build_system, OvmParams};

    fn default_sys() -> SystemMatrices {
        build_system(&OvmParams::default(), GuidanceKind::PiecewiseAcceleration).unwrap()
    }

    #[test]
    fn aeb_examples() {
        let cfg = SimConfig::default();
        assert_eq!(aeb_override(15.0, 15.0, 20.0, &cfg), None);
        assert_eq!(aeb_override(20.0, 10.0, 2.5, &cfg), Some(-5.0));
        assert_eq!(aeb_override(10.0, 20.0, 20.0, &cfg), None);
        assert_eq!(aeb_override(0.0, 0.0, 0.3, &cfg), Some(-5.0));
    }

    #[test]
    fn hold_snapping() {
        assert_eq!(hold_steps(1.59, 0.01).unwrap(), 159);
        assert_eq!(hold_steps(0.01, 0.01).unwrap(), 1);
        assert_eq!(hold_steps(0.015, 0.01).unwrap(), 1);
        assert!(hold_steps(0.005, 0.01).is_err());
    }

    #[test]
    fn equilibrium_is_invariant() {
        let sys = default_sys();
        let cfg = SimConfig {
            perturb_s: 0.0,
            perturb_v: 0.0,
            total_time: 20.0,
            ..Default::default()
        };
        let c = Controller::zero(40);
        for plant in [Plant::Linearized, Plant::NonlinearOvm] {
            let tr = simulate(&sys, &c, 1.0, &DisturbanceModel::default(), plant, &cfg, 0).unwrap();
            assert!(tr.events.is_empty());
            for x in &tr.states {
                assert!(x.iter().all(|v| v.abs() < 1e-9), "{plant:?}");
            }
        }
        assert!(initial_state(&sys, &cfg, 3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_state_is_deterministic() {
        let sys = default_sys();
        let cfg = SimConfig::default();
        assert_eq!(initial_state(&sys, &cfg, 7), initial_state(&sys, &cfg, 7));
        assert_ne!(initial_state(&sys, &cfg, 7), initial_state(&sys, &cfg, 8));
    }

    #[test]
    fn classify_rules() {
        let cfg = SimConfig::default();
        let ok = RunSummary {
            seed: 0,
            status: RunStatus::Completed,
            final_norm: 0.0,
            tail_max: [0.0; 3],
            collision_time: None,
            aeb_activations: 0,
        };
        assert_eq!(classify(&[ok], &cfg).unwrap().status, VerdictStatus::Converged);
        let crash = RunSummary { status: RunStatus::Collided, final_norm: 0.0, ..ok };
        assert_eq!(classify(&[ok, crash], &cfg).unwrap().status, VerdictStatus::Collided);
        let far = RunSummary { final_norm: 3.0, ..ok };
        assert_eq!(classify(&[ok, far], &cfg).unwrap().status, VerdictStatus::NotConverged);
        assert!(classify(&[], &cfg).is_err());
    }

    #[test]
    fn hold_updates_on_grid() {
        let sys = default_sys();
        let mut k = Vector::zeros(40);
        k[1] = 0.5;
        k[3] = 0.2;
        let c = Controller::new(k, crate::ring_model::Provenance::Manual);
        let cfg = SimConfig { total_time: 10.0, ..Default::default() };
        let tr = simulate(&sys, &c, 0.5, &DisturbanceModel::default(), Plant::NonlinearOvm, &cfg, 1).unwrap();
        for (t, _) in &tr.control_log {
            let k = (t / 0.5).round();
            assert!((t - k * 0.5).abs() < 1e-9);
        }
        for w in tr.controls.windows(2).enumerate() {
            let (i, pair) = w;
            if pair[0] != pair[1] {
                assert_eq!((i + 1) % 50, 0);
            }
        }
    }
}
