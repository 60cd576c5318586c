//! Hold-limit bisection, parameter sweeps and human-error experiments.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::h2_synth::h2_controller;
use crate::lmi_cert::lk_hold_limit;
use crate::lyapunov::{
    estimate_d_v_bar, lyapunov_hold_bound, nonvanishing_ultimate_bound, reaction_delay_bound, vanishing_hold_bound,
};
use crate::ring_model::{
    build_system, injection_matrix, reduce, scale_controller, string_stability_margin, Controller, OvmParams,
    SystemMatrices,
};
use crate::simulator::{
    classify, ensemble_converges, hold_steps, run_ensemble, simulate, ultimate_bounds, DisturbanceKind,
    DisturbanceModel, Plant, StabilityVerdict, VerdictStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeResult {
    Stable,
    Unstable,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub delta: f64,
    pub result: ProbeResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    /// Largest stable grid point, 0 when even the first grid point fails.
    pub limit: f64,
    pub probes: Vec<Probe>,
    pub unstable_at_floor: bool,
    pub stable_at_ceiling: bool,
    pub failures: usize,
}

fn grid_points(range: (f64, f64), granularity: f64) -> Result<(i64, i64)> {
    let (lo, hi) = range;
    if !(granularity > 0.0 && lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "bad search range [{lo}, {hi}] with granularity {granularity}"
        )));
    }
    let k_lo = ((lo / granularity) - 1e-9).ceil().max(1.0) as i64;
    let k_hi = ((hi / granularity) + 1e-9).floor() as i64;
    if k_hi < k_lo {
        return Err(Error::InvalidParams("search range holds no grid point".into()));
    }
    Ok((k_lo, k_hi))
}

/// Bisection over the grid `k · granularity` inside `range`, assuming stability is
/// monotone in the hold length. Failed probes count as unstable; more than 10% failed
/// probes is an error.
pub fn grid_search<F>(range: (f64, f64), granularity: f64, mut probe: F) -> Result<GridSearch>
where
    F: FnMut(f64) -> Result<ProbeResult>,
{
    let (k_lo, k_hi) = grid_points(range, granularity)?;
    let mut probes = Vec::new();
    let mut eval = |k: i64, probes: &mut Vec<Probe>| -> Result<bool> {
        let delta = k as f64 * granularity;
        let result = probe(delta)?;
        probes.push(Probe { delta, result });
        Ok(result == ProbeResult::Stable)
    };
    let finish = |limit: f64, probes: Vec<Probe>, floor: bool, ceil: bool| -> Result<GridSearch> {
        let failures = probes.iter().filter(|p| p.result == ProbeResult::Failed).count();
        if failures * 10 > probes.len() {
            return Err(Error::NumericalFailure(format!(
                "{failures} of {} hold-limit probes failed numerically",
                probes.len()
            )));
        }
        log::info!("hold-limit search assumes monotone stability in delta; limit {limit:.4}");
        Ok(GridSearch {
            limit,
            probes,
            unstable_at_floor: floor,
            stable_at_ceiling: ceil,
            failures,
        })
    };

    if !eval(k_lo, &mut probes)? {
        return finish(0.0, probes, true, false);
    }
    if k_hi == k_lo {
        return finish(k_lo as f64 * granularity, probes, false, true);
    }
    if eval(k_hi, &mut probes)? {
        return finish(k_hi as f64 * granularity, probes, false, true);
    }
    let (mut good, mut bad) = (k_lo, k_hi);
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if eval(mid, &mut probes)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    finish(good as f64 * granularity, probes, false, false)
}

/// Full ensemble verdicts on both sides of a reported limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub stable_delta: f64,
    pub stable: StabilityVerdict,
    pub unstable_delta: f64,
    pub unstable: StabilityVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimHoldLimit {
    pub limit: f64,
    pub search: GridSearch,
    /// Absent when the search hit the floor or the ceiling.
    pub witness: Option<Witness>,
    /// Granularity steps the bracket moved during confirmation.
    pub widened: i64,
}

impl SimHoldLimit {
    pub fn unstable_at_floor(&self) -> bool {
        self.search.unstable_at_floor
    }
}

/// Largest grid hold length for which every seed converges.
#[allow(clippy::too_many_arguments)]
pub fn simulation_hold_limit(
    sys: &SystemMatrices,
    c: &Controller,
    dist: &DisturbanceModel,
    plant: Plant,
    cfg: &crate::simulator::SimConfig,
    range: (f64, f64),
    granularity: f64,
) -> Result<SimHoldLimit> {
    cfg.validate()?;
    let search = grid_search(range, granularity, |delta| {
        Ok(if ensemble_converges(sys, c, delta, dist, plant, cfg)? {
            ProbeResult::Stable
        } else {
            ProbeResult::Unstable
        })
    })?;
    if search.unstable_at_floor || search.stable_at_ceiling {
        return Ok(SimHoldLimit {
            limit: search.limit,
            search,
            witness: None,
            widened: 0,
        });
    }
    let (k_lo, k_hi) = grid_points(range, granularity)?;
    let verdict = |k: i64| -> Result<StabilityVerdict> {
        let runs = run_ensemble(sys, c, k as f64 * granularity, dist, plant, cfg)?;
        classify(&runs, cfg)
    };
    let mut k = (search.limit / granularity).round() as i64;
    let start = k;
    let mut lower = verdict(k)?;
    let mut upper = verdict(k + 1)?;
    // Confirmation pass: slide the bracket one step at a time until it holds.
    for _ in 0..20 {
        if lower.status != VerdictStatus::Converged && k > k_lo {
            log::warn!("confirmation disagrees at delta={:.4}; widening down", k as f64 * granularity);
            k -= 1;
            upper = lower;
            lower = verdict(k)?;
        } else if upper.status == VerdictStatus::Converged && k + 1 < k_hi {
            log::warn!("non-monotone stability above delta={:.4}; widening up", k as f64 * granularity);
            k += 1;
            lower = upper;
            upper = verdict(k + 1)?;
        } else {
            break;
        }
    }
    let limit = if lower.status == VerdictStatus::Converged { k as f64 * granularity } else { 0.0 };
    Ok(SimHoldLimit {
        limit,
        search,
        witness: Some(Witness {
            stable_delta: k as f64 * granularity,
            stable: lower,
            unstable_delta: (k + 1) as f64 * granularity,
            unstable: upper,
        }),
        widened: k - start,
    })
}

/// Disturbance model for `kind` with the mask settings of `cfg`.
pub fn disturbance(cfg: &RunConfig, kind: DisturbanceKind) -> DisturbanceModel {
    DisturbanceModel {
        kind,
        bernoulli_p: cfg.bernoulli_p,
        redraw_per_step: cfg.mask_redraw,
        delay: cfg.delay_realization,
    }
}

pub fn system_for(cfg: &RunConfig) -> Result<SystemMatrices> {
    build_system(&cfg.ovm, cfg.guidance)
}

/// H2 controller for `cfg`, scaled by its `k_mult`.
pub fn controller_for(cfg: &RunConfig, sys: &SystemMatrices) -> Result<Controller> {
    let sol = h2_controller(sys, &cfg.weights, &cfg.sdp)?;
    scale_controller(&sol.controller, cfg.k_mult)
}

pub fn sim_hold_limit_for(
    cfg: &RunConfig,
    sys: &SystemMatrices,
    c: &Controller,
    kind: DisturbanceKind,
) -> Result<SimHoldLimit> {
    simulation_hold_limit(
        sys,
        c,
        &disturbance(cfg, kind),
        cfg.plant,
        &cfg.sim,
        (cfg.search_min, cfg.search_max),
        cfg.granularity,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    L,
    N,
    SSt,
    SGo,
    VMax,
    Alpha,
    Beta,
    KMult,
    GammaS,
    GammaV,
}

impl SweepParam {
    pub const ALL: [SweepParam; 10] = [
        SweepParam::L,
        SweepParam::N,
        SweepParam::SSt,
        SweepParam::SGo,
        SweepParam::VMax,
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::KMult,
        SweepParam::GammaS,
        SweepParam::GammaV,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::L => "L",
            SweepParam::N => "n",
            SweepParam::SSt => "s_st",
            SweepParam::SGo => "s_go",
            SweepParam::VMax => "v_max",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::KMult => "k_mult",
            SweepParam::GammaS => "gamma_s",
            SweepParam::GammaV => "gamma_v",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.as_str() == s)
    }

    /// Whether a new point needs a fresh H2 solve; only `k_mult` rescales the base gain.
    pub fn needs_resynthesis(&self) -> bool {
        !matches!(self, SweepParam::KMult)
    }

    /// Shipped grid.
    pub fn default_grid(&self) -> Vec<f64> {
        let step = |a: f64, b: f64, h: f64| -> Vec<f64> {
            let k = ((b - a) / h).round() as usize;
            (0..=k).map(|i| ((a + i as f64 * h) * 1e6).round() / 1e6).collect()
        };
        match self {
            SweepParam::L => step(250.0, 550.0, 50.0),
            SweepParam::N => vec![14.0, 16.0, 18.0, 20.0, 22.0, 24.0],
            SweepParam::SSt => step(2.0, 8.0, 1.0),
            SweepParam::SGo => step(30.0, 40.0, 2.0),
            SweepParam::VMax => step(20.0, 40.0, 4.0),
            SweepParam::Alpha => step(0.3, 1.05, 0.15),
            SweepParam::Beta => step(0.3, 2.0, 0.1),
            SweepParam::KMult => vec![0.005, 0.05, 0.2, 0.5, 1.0],
            SweepParam::GammaS => vec![0.01, 0.03, 0.1, 0.3],
            SweepParam::GammaV => vec![0.05, 0.15, 0.5, 1.5],
        }
    }

    /// Copy of `cfg` with this parameter set to `value`.
    pub fn apply(&self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut out = cfg.clone();
        match self {
            SweepParam::L => out.ovm.l = value,
            SweepParam::N => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::InvalidParams(format!("n must be an integer >= 2, got {value}")));
                }
                out.ovm.n = value as usize;
            }
            SweepParam::SSt => out.ovm.s_st = value,
            SweepParam::SGo => out.ovm.s_go = value,
            SweepParam::VMax => out.ovm.v_max = value,
            SweepParam::Alpha => out.ovm.alpha = value,
            SweepParam::Beta => out.ovm.beta = value,
            SweepParam::KMult => out.k_mult = value,
            SweepParam::GammaS => out.weights.gamma_s = value,
            SweepParam::GammaV => out.weights.gamma_v = value,
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub resynthesize: bool,
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>) -> Self {
        Self {
            parameter,
            values,
            resynthesize: parameter.needs_resynthesis(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptyInput("sweep needs at least one value"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParams("sweep values must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub param_value: f64,
    pub sim_hold_limit: f64,
    pub lk_hold_limit: f64,
    pub lyap_bound: f64,
    pub ovm_margin: f64,
    /// Collided seeds at the first unstable grid point.
    pub n_collided: usize,
    pub runtime_s: f64,
    /// Reasons for NaN columns and search flags.
    pub notes: Vec<String>,
    pub witness: Option<Witness>,
}

/// All four estimates for one resolved configuration and controller.
pub fn evaluate_point(param: &str, value: f64, cfg: &RunConfig, base: Option<&Controller>) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        param: param.to_string(),
        param_value: value,
        sim_hold_limit: f64::NAN,
        lk_hold_limit: f64::NAN,
        lyap_bound: f64::NAN,
        ovm_margin: string_stability_margin(&cfg.ovm),
        n_collided: 0,
        runtime_s: 0.0,
        notes: Vec::new(),
        witness: None,
    };
    let sys = match system_for(cfg) {
        Ok(s) => s,
        Err(e) => {
            row.notes.push(format!("system: {e}"));
            row.runtime_s = start.elapsed().as_secs_f64();
            return row;
        }
    };
    let c = match base {
        Some(b) => scale_controller(b, cfg.k_mult),
        None => controller_for(cfg, &sys),
    };
    let c = match c {
        Ok(c) => c,
        Err(e) => {
            row.notes.push(format!("controller: {e}"));
            row.runtime_s = start.elapsed().as_secs_f64();
            return row;
        }
    };

    match sim_hold_limit_for(cfg, &sys, &c, DisturbanceKind::None) {
        Ok(h) => {
            row.sim_hold_limit = h.limit;
            if h.unstable_at_floor() {
                row.notes.push("sim: unstable at floor".into());
            }
            if h.search.stable_at_ceiling {
                row.notes.push("sim: stable at ceiling".into());
            }
            if h.widened != 0 {
                row.notes.push(format!("sim: bracket widened by {} steps", h.widened));
            }
            if let Some(w) = &h.witness {
                row.n_collided = w.unstable.n_collided;
            }
            row.witness = h.witness;
        }
        Err(e) => row.notes.push(format!("sim: {e}")),
    }

    match lyapunov_hold_bound(&sys, &c, None, cfg.c_prime) {
        Ok(cert) => row.lyap_bound = cert.delta_bound,
        Err(e) => row.notes.push(format!("lyap: {e}")),
    }

    if cfg.lk_in_sweeps {
        match reduce(&sys, &c).and_then(|red| {
            lk_hold_limit(&red.a, &red.injection(), (cfg.search_min, cfg.search_max), cfg.granularity, &cfg.sdp)
        }) {
            Ok(g) => {
                row.lk_hold_limit = g.limit;
                if g.unstable_at_floor {
                    row.notes.push("lk: infeasible at floor".into());
                }
            }
            Err(e) => row.notes.push(format!("lk: {e}")),
        }
    } else {
        row.notes.push("lk: skipped (lk_in_sweeps = false)".into());
    }
    row.runtime_s = start.elapsed().as_secs_f64();
    row
}

/// One row per value, in input order; per-row failures are recorded in the row.
pub fn sensitivity_sweep(spec: &SweepSpec, cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let base = if spec.resynthesize {
        None
    } else {
        let sys = system_for(cfg)?;
        Some(h2_controller(&sys, &cfg.weights, &cfg.sdp)?.controller)
    };
    let name = spec.parameter.as_str();
    Ok(spec
        .values
        .par_iter()
        .map(|&v| match spec.parameter.apply(cfg, v) {
            Ok(point) => evaluate_point(name, v, &point, base.as_ref()),
            Err(e) => failed_row(name, v, format!("config: {e}")),
        })
        .collect())
}

fn failed_row(param: &str, value: f64, note: String) -> SweepRow {
    SweepRow {
        param: param.to_string(),
        param_value: value,
        sim_hold_limit: f64::NAN,
        lk_hold_limit: f64::NAN,
        lyap_bound: f64::NAN,
        ovm_margin: f64::NAN,
        n_collided: 0,
        runtime_s: 0.0,
        notes: vec![note],
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointScenario {
    pub index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub s_st: f64,
    pub s_go: f64,
}

impl JointScenario {
    /// Seven scenarios on straight lines between fixed endpoints; scenario 4 is the default.
    pub fn defaults() -> Vec<JointScenario> {
        (0..7)
            .map(|i| {
                let t = i as f64;
                JointScenario {
                    index: i + 1,
                    alpha: ((0.9 - 0.1 * t) * 1e9).round() / 1e9,
                    beta: ((0.6 + 0.1 * t) * 1e9).round() / 1e9,
                    s_st: 2.0 + t,
                    s_go: 38.0 - t,
                }
            })
            .collect()
    }

    pub fn apply(&self, cfg: &RunConfig) -> Result<RunConfig> {
        let mut out = cfg.clone();
        out.ovm = OvmParams {
            alpha: self.alpha,
            beta: self.beta,
            s_st: self.s_st,
            s_go: self.s_go,
            ..cfg.ovm
        };
        out.validate()?;
        Ok(out)
    }
}

pub fn joint_scenario_sweep(scenarios: &[JointScenario], cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    if scenarios.is_empty() {
        return Err(Error::EmptyInput("joint sweep needs at least one scenario"));
    }
    Ok(scenarios
        .par_iter()
        .map(|s| match s.apply(cfg) {
            Ok(point) => evaluate_point("scenario", s.index as f64, &point, None),
            Err(e) => failed_row("scenario", s.index as f64, format!("config: {e}")),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HumanErrorKind {
    NonvanishingBound,
    VanishingHoldLimit,
    DelayHoldLimit,
}

impl HumanErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HumanErrorKind::NonvanishingBound => "nonvanishing",
            HumanErrorKind::VanishingHoldLimit => "vanishing",
            HumanErrorKind::DelayHoldLimit => "delay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::NonvanishingBound, Self::VanishingHoldLimit, Self::DelayHoldLimit]
            .into_iter()
            .find(|k| k.as_str() == s)
    }

    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            HumanErrorKind::NonvanishingBound => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            HumanErrorKind::VanishingHoldLimit => vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12],
            HumanErrorKind::DelayHoldLimit => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanErrorRow {
    pub kind: HumanErrorKind,
    pub value: f64,
    /// Hold length used (nonvanishing) or found (others).
    pub delta: f64,
    /// Ultimate bound at the 10/20/30% tails; NaN for hold-limit kinds.
    pub ultimate_bound: [f64; 3],
    /// Lyapunov-theory counterpart: radius or hold bound.
    pub theory: f64,
    pub n_collided: usize,
    pub notes: Vec<String>,
}

/// Smoothness constant from a seed-0 pilot run at hold length `delta`.
pub fn pilot_d_v_bar(cfg: &RunConfig, sys: &SystemMatrices, c: &Controller, delta: f64) -> Result<f64> {
    let traj = simulate(sys, c, delta, &DisturbanceModel::default(), cfg.plant, &cfg.sim, 0)?;
    let hold = hold_steps(delta, cfg.sim.t_step)?;
    let samples: Vec<usize> = (0..traj.states.len()).step_by(hold).collect();
    let a1 = injection_matrix(sys, c)?;
    Ok(estimate_d_v_bar(&sys.a, &a1, &traj.states, &samples))
}

pub fn human_error_sweep(kind: HumanErrorKind, values: &[f64], cfg: &RunConfig) -> Result<Vec<HumanErrorRow>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("human-error sweep needs at least one value"));
    }
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParams("error magnitudes must be finite and nonnegative".into()));
    }
    let sys = system_for(cfg)?;
    let c = controller_for(cfg, &sys)?;
    let cert = lyapunov_hold_bound(&sys, &c, None, cfg.c_prime);
    let theory_note = cert.as_ref().err().map(|e| format!("lyap: {e}"));

    let clean = match kind {
        HumanErrorKind::NonvanishingBound => Some(sim_hold_limit_for(cfg, &sys, &c, DisturbanceKind::None)?.limit),
        HumanErrorKind::DelayHoldLimit if cfg.d_v_bar.is_none() => {
            Some(sim_hold_limit_for(cfg, &sys, &c, DisturbanceKind::None)?.limit)
        }
        _ => None,
    };
    let d_v_bar = match (kind, cfg.d_v_bar) {
        (HumanErrorKind::DelayHoldLimit, Some(v)) => v,
        (HumanErrorKind::DelayHoldLimit, None) => {
            let delta = clean.unwrap_or(cfg.granularity).max(cfg.sim.t_step);
            pilot_d_v_bar(cfg, &sys, &c, delta)?
        }
        _ => f64::NAN,
    };

    let rows = values
        .par_iter()
        .map(|&value| {
            let mut notes: Vec<String> = theory_note.iter().cloned().collect();
            let mut row = HumanErrorRow {
                kind,
                value,
                delta: f64::NAN,
                ultimate_bound: [f64::NAN; 3],
                theory: f64::NAN,
                n_collided: 0,
                notes: Vec::new(),
            };
            match kind {
                HumanErrorKind::NonvanishingBound => {
                    let delta = clean.unwrap_or(0.0).max(cfg.sim.t_step);
                    row.delta = delta;
                    let dist = disturbance(cfg, DisturbanceKind::Nonvanishing(value));
                    match run_ensemble(&sys, &c, delta, &dist, cfg.plant, &cfg.sim) {
                        Ok(runs) => {
                            row.n_collided = runs.iter().filter(|r| r.collided()).count();
                            match ultimate_bounds(&runs) {
                                Ok(b) => row.ultimate_bound = b,
                                Err(e) => notes.push(format!("sim: {e}")),
                            }
                        }
                        Err(e) => notes.push(format!("sim: {e}")),
                    }
                    if let Ok(cert) = &cert {
                        row.theory = nonvanishing_ultimate_bound(cert, value, cfg.d_margin);
                    }
                }
                HumanErrorKind::VanishingHoldLimit | HumanErrorKind::DelayHoldLimit => {
                    let dk = if kind == HumanErrorKind::VanishingHoldLimit {
                        DisturbanceKind::Vanishing(value)
                    } else {
                        DisturbanceKind::ReactionDelay(value)
                    };
                    match sim_hold_limit_for(cfg, &sys, &c, dk) {
                        Ok(h) => {
                            row.delta = h.limit;
                            if h.unstable_at_floor() {
                                notes.push("sim: unstable at floor".into());
                            }
                            if let Some(w) = &h.witness {
                                row.n_collided = w.unstable.n_collided;
                            }
                        }
                        Err(e) => notes.push(format!("sim: {e}")),
                    }
                    if let Ok(cert) = &cert {
                        row.theory = if kind == HumanErrorKind::VanishingHoldLimit {
                            let (b, flag) = vanishing_hold_bound(cert, value);
                            if flag {
                                notes.push("theory: disturbance too large".into());
                            }
                            b
                        } else {
                            reaction_delay_bound(cert, value, d_v_bar, cfg.c_dprime)
                        };
                    }
                }
            }
            row.notes = notes;
            row
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_search_finds_threshold() {
        let g = grid_search((0.0, 10.0), 0.01, |d| {
            Ok(if d <= 1.664 { ProbeResult::Stable } else { ProbeResult::Unstable })
        })
        .unwrap();
        assert!((g.limit - 1.66).abs() < 1e-12);
        assert!(g.probes.len() <= 13);
        assert!(!g.unstable_at_floor && !g.stable_at_ceiling);
    }

    #[test]
    fn grid_search_edges() {
        let g = grid_search((0.0, 10.0), 0.01, |_| Ok(ProbeResult::Unstable)).unwrap();
        assert_eq!(g.limit, 0.0);
        assert!(g.unstable_at_floor);
        let g = grid_search((0.0, 10.0), 0.01, |_| Ok(ProbeResult::Stable)).unwrap();
        assert!((g.limit - 10.0).abs() < 1e-12);
        assert!(g.stable_at_ceiling);
        assert!(grid_search((0.0, 10.0), 0.01, |_| Ok(ProbeResult::Failed)).is_err());
        let err = grid_search((0.0, 10.0), 0.01, |d| {
            Ok(if d < 0.02 { ProbeResult::Stable } else { ProbeResult::Failed })
        });
        assert!(err.is_err());
        assert!(grid_search((1.0, 0.5), 0.01, |_| Ok(ProbeResult::Stable)).is_err());
    }

    #[test]
    fn default_grids_are_sorted_and_valid() {
        let cfg = RunConfig::default();
        for p in SweepParam::ALL {
            let spec = SweepSpec::new(p, p.default_grid());
            spec.validate().unwrap();
            for v in &spec.values {
                p.apply(&cfg, *v).unwrap();
            }
            assert_eq!(SweepParam::parse(p.as_str()), Some(p));
        }
        assert_eq!(SweepParam::Beta.default_grid().len(), 18);
    }

    #[test]
    fn joint_defaults_monotone_with_default_middle() {
        let s = JointScenario::defaults();
        assert_eq!(s.len(), 7);
        for w in s.windows(2) {
            assert!(w[1].s_st > w[0].s_st && w[1].s_go < w[0].s_go);
            assert!(w[1].alpha < w[0].alpha && w[1].beta > w[0].beta);
        }
        let cfg = RunConfig::default();
        assert_eq!(s[3].apply(&cfg).unwrap().ovm, cfg.ovm);
    }
}
