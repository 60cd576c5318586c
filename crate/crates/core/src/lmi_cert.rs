//! Lyapunov-Krasovskii certificates for sampled-data feedback: analysis,
//! H∞ attenuation and gain synthesis, all on the reduced coordinates.

use crate::error::{Error, Result};
use crate::holdlimit::{grid_search, GridSearch, ProbeResult};
use crate::linalg::{self, Mat};
use crate::ring_model::{lift_gain, Controller, Provenance};
use crate::sdp::{
    solve_feasibility, FeasibilityMode, LmiCheck, LmiId, LmiProblem, SdpOptions, SdpOutcome, SdpSolution, VarId,
    VarKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Feasible => "feasible",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LkCertificate {
    pub p: Mat,
    pub u: Mat,
    pub p2: Mat,
    pub p3: Mat,
    pub delta: f64,
    pub feasible: bool,
    pub solver_status: SolverStatus,
    /// Attained margin (negative when feasible).
    pub t: Option<f64>,
    pub checks: Vec<LmiCheck>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HinfCertificate {
    pub gamma: f64,
    pub lk: LkCertificate,
}

impl HinfCertificate {
    pub fn feasible(&self) -> bool {
        self.lk.feasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LkSynthesisResult {
    pub p_bar: Mat,
    pub u_bar: Mat,
    pub q_syn: Mat,
    pub l_syn: Mat,
    pub epsilon: f64,
    pub delta_in: f64,
    /// Reduced gain for `u = -K x`.
    pub k_red: Mat,
    pub controller: Controller,
    pub cond_q: f64,
    pub t: Option<f64>,
    /// Analysis LMIs hold for the synthesised gain at `delta_in`.
    pub verified: bool,
}

/// Handles to the four analysis variables.
#[derive(Debug, Clone, Copy)]
pub struct LkVars {
    pub p: VarId,
    pub u: VarId,
    pub p2: VarId,
    pub p3: VarId,
}

fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

fn check_square(a: &Mat, a1: &Mat) -> Result<usize> {
    let m = a.nrows();
    if a.shape() != (m, m) || a1.shape() != (m, m) {
        return Err(Error::DimensionMismatch("A and A1 must be square and equal in size".into()));
    }
    Ok(m)
}

/// Analysis LMIs for hold length `delta`; with `hinf = Some((B_d, γ))` the attenuation variant.
pub fn lk_problem(a: &Mat, a1: &Mat, delta: f64, hinf: Option<(&Mat, f64)>) -> Result<(LmiProblem, LkVars)> {
    let m = check_square(a, a1)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("hold length must be positive, got {delta}")));
    }
    let mt = (a + a1).transpose();
    let mut pr = LmiProblem::new();
    let p = pr.add_pd_var("P", m);
    let u = pr.add_pd_var("U", m);
    let p2 = pr.add_var("P2", m, m, VarKind::Full);
    let p3 = pr.add_var("P3", m, m, VarKind::Full);

    let (nd, bd, gamma) = match hinf {
        Some((bd, g)) => {
            if bd.nrows() != m {
                return Err(Error::DimensionMismatch("B_d must have as many rows as A".into()));
            }
            if !(g > 0.0) {
                return Err(Error::InvalidParams("gamma must be positive".into()));
            }
            (bd.ncols(), Some(bd), g)
        }
        None => (0, None, 0.0),
    };

    // Shared upper-left 2x2 structure.
    let common = |pr: &mut LmiProblem, l: LmiId| {
        pr.add_term(l, 0, 0, mt.clone(), p2, eye(m));
        pr.add_term(l, 0, 1, eye(m), p, eye(m));
        pr.add_term(l, 1, 0, -eye(m), p2, eye(m));
        pr.add_term(l, 0, 1, mt.clone(), p3, eye(m));
        pr.add_term(l, 1, 1, -eye(m), p3, eye(m));
    };

    let mut sizes1 = vec![m, m];
    if bd.is_some() {
        sizes1.push(nd);
    }
    let l1 = pr.add_lmi("LK first block", &sizes1, true);
    common(&mut pr, l1);
    pr.add_sym_term(l1, 1, u, delta);

    let mut sizes2 = vec![m, m, m];
    if bd.is_some() {
        sizes2.push(nd);
    }
    let l2 = pr.add_lmi("LK second block", &sizes2, true);
    common(&mut pr, l2);
    pr.add_term(l2, 2, 0, -(a1.transpose() * delta), p2, eye(m));
    pr.add_term(l2, 2, 1, -(a1.transpose() * delta), p3, eye(m));
    pr.add_sym_term(l2, 2, u, -delta);

    if let Some(bd) = bd {
        let bdt = bd.transpose();
        let g2 = -gamma * gamma;
        pr.add_constant(l1, 0, 0, &eye(m));
        pr.add_term(l1, 2, 0, bdt.clone(), p2, eye(m));
        pr.add_term(l1, 2, 1, bdt.clone(), p3, eye(m));
        pr.add_constant(l1, 2, 2, &(eye(nd) * g2));
        pr.add_constant(l2, 0, 0, &eye(m));
        pr.add_term(l2, 3, 0, bdt.clone(), p2, eye(m));
        pr.add_term(l2, 3, 1, bdt, p3, eye(m));
        pr.add_constant(l2, 3, 3, &(eye(nd) * g2));
    }
    Ok((pr, LkVars { p, u, p2, p3 }))
}

fn certificate(delta: f64, vars: LkVars, out: Result<SdpOutcome>, m: usize) -> Result<LkCertificate> {
    let empty = || Mat::zeros(m, m);
    let base = |status, t, iterations| LkCertificate {
        p: empty(),
        u: empty(),
        p2: empty(),
        p3: empty(),
        delta,
        feasible: false,
        solver_status: status,
        t,
        checks: Vec::new(),
        iterations,
    };
    match out {
        Ok(SdpOutcome::Feasible(sol)) => Ok(LkCertificate {
            p: sol.values[vars.p.0].clone(),
            u: sol.values[vars.u.0].clone(),
            p2: sol.values[vars.p2.0].clone(),
            p3: sol.values[vars.p3.0].clone(),
            delta,
            feasible: true,
            solver_status: SolverStatus::Feasible,
            t: sol.t,
            checks: sol.checks,
            iterations: sol.iterations,
        }),
        Ok(SdpOutcome::Infeasible { t_star, iterations }) => Ok(base(SolverStatus::Infeasible, Some(t_star), iterations)),
        Err(e) if e.is_numerical() => {
            log::warn!("LK oracle failed at delta {delta}: {e}");
            Ok(base(SolverStatus::NumericalFailure, None, 0))
        }
        Err(e) => Err(e),
    }
}

/// Feasibility of the LK analysis LMIs at hold length `delta`.
pub fn lk_feasible(a: &Mat, a1: &Mat, delta: f64, opts: &SdpOptions) -> Result<LkCertificate> {
    let (pr, vars) = lk_problem(a, a1, delta, None)?;
    let out = solve_feasibility(&pr, FeasibilityMode::FirstFeasible, opts);
    certificate(delta, vars, out, a.nrows())
}

/// H∞ variant at attenuation level `gamma`; `b_d` maps the disturbance into the reduced state.
pub fn lk_hinf_feasible(a: &Mat, a1: &Mat, b_d: &Mat, delta: f64, gamma: f64, opts: &SdpOptions) -> Result<HinfCertificate> {
    let (pr, vars) = lk_problem(a, a1, delta, Some((b_d, gamma)))?;
    let out = solve_feasibility(&pr, FeasibilityMode::FirstFeasible, opts);
    Ok(HinfCertificate {
        gamma,
        lk: certificate(delta, vars, out, a.nrows())?,
    })
}

/// Largest grid hold length with feasible LK LMIs.
pub fn lk_hold_limit(a: &Mat, a1: &Mat, range: (f64, f64), granularity: f64, opts: &SdpOptions) -> Result<GridSearch> {
    grid_search(range, granularity, |delta| {
        let cert = lk_feasible(a, a1, delta, opts)?;
        log::debug!("LK probe delta={delta:.2} -> {}", cert.solver_status.as_str());
        Ok(match cert.solver_status {
            SolverStatus::Feasible => ProbeResult::Stable,
            SolverStatus::Infeasible => ProbeResult::Unstable,
            SolverStatus::NumericalFailure => ProbeResult::Failed,
        })
    })
}

/// Handles to the synthesis variables.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisVars {
    pub p_bar: VarId,
    pub u_bar: VarId,
    pub q: VarId,
    pub l: VarId,
}

/// Synthesis LMIs in the `u = +K x` sign convention (`A₁ = B L Q⁻¹`).
pub fn lk_synthesis_problem(a: &Mat, b: &Mat, delta: f64, epsilon: f64) -> Result<(LmiProblem, SynthesisVars)> {
    let m = a.nrows();
    if a.ncols() != m || b.nrows() != m {
        return Err(Error::DimensionMismatch("A must be square and B must match its rows".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("hold length must be positive, got {delta}")));
    }
    let nu = b.ncols();
    let mut pr = LmiProblem::new();
    let p_bar = pr.add_pd_var("P_bar", m);
    let u_bar = pr.add_pd_var("U_bar", m);
    let q = pr.add_var("Q", m, m, VarKind::Full);
    let l = pr.add_var("L", nu, m, VarKind::Full);

    let common = |pr: &mut LmiProblem, id: LmiId| {
        // Φ̄11 = A Q + Qᵀ Aᵀ + B L + Lᵀ Bᵀ
        pr.add_term(id, 0, 0, a.clone(), q, eye(m));
        pr.add_term(id, 0, 0, b.clone(), l, eye(m));
        // (1,2) = P̄ - Q + ε (Qᵀ Aᵀ + Lᵀ Bᵀ)
        pr.add_term(id, 0, 1, eye(m), p_bar, eye(m));
        pr.add_term(id, 0, 1, -eye(m), q, eye(m));
        pr.add_term(id, 1, 0, a * epsilon, q, eye(m));
        pr.add_term(id, 1, 0, b * epsilon, l, eye(m));
        // (2,2) = -ε (Q + Qᵀ)
        pr.add_term(id, 1, 1, -eye(m) * epsilon, q, eye(m));
    };

    let l1 = pr.add_lmi("LK synthesis first block", &[m, m], true);
    common(&mut pr, l1);
    pr.add_sym_term(l1, 1, u_bar, delta);

    let l2 = pr.add_lmi("LK synthesis second block", &[m, m, m], true);
    common(&mut pr, l2);
    pr.add_term(l2, 0, 2, -(b * delta), l, eye(m));
    pr.add_term(l2, 1, 2, -(b * (delta * epsilon)), l, eye(m));
    pr.add_sym_term(l2, 2, u_bar, -delta);
    Ok((pr, SynthesisVars { p_bar, u_bar, q, l }))
}

/// Gain synthesis at input hold length `delta_in`; the returned controller uses `u = -K x`.
pub fn lk_synthesize(
    a: &Mat,
    b: &Mat,
    delta_in: f64,
    epsilon: f64,
    mode: FeasibilityMode,
    opts: &SdpOptions,
) -> Result<LkSynthesisResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    let (pr, v) = lk_synthesis_problem(a, b, delta_in, epsilon)?;
    let sol: SdpSolution = match solve_feasibility(&pr, mode, opts)? {
        SdpOutcome::Feasible(s) => s,
        SdpOutcome::Infeasible { t_star, .. } => {
            return Err(Error::Infeasible(format!(
                "no stabilising gain at hold length {delta_in} (margin {t_star:.3e})"
            )))
        }
    };
    let q = sol.values[v.q.0].clone();
    let l = sol.values[v.l.0].clone();
    let cond_q = linalg::condition_number(&q);
    log::info!("LK synthesis at delta_in={delta_in}: cond(Q) = {cond_q:.3e}");
    if cond_q > 1e12 {
        return Err(Error::IllConditioned(cond_q));
    }
    let q_inv = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("synthesis Q is singular".into()))?;
    let k_red = -(&l * q_inv);
    let a1 = -(b * &k_red);
    let verified = lk_feasible(a, &a1, delta_in, opts)?.feasible;
    if !verified {
        log::warn!("synthesised gain does not pass the analysis LMIs at delta_in={delta_in}");
    }
    Ok(LkSynthesisResult {
        p_bar: sol.values[v.p_bar.0].clone(),
        u_bar: sol.values[v.u_bar.0].clone(),
        q_syn: q,
        l_syn: l,
        epsilon,
        delta_in,
        controller: Controller::new(lift_gain(&k_red), Provenance::LkSynthesized),
        k_red,
        cond_q,
        t: sol.t,
        verified,
    })
}

/// Analysis variables implied by a synthesis solution: `P₂ = Q⁻¹`, `P₃ = ε Q⁻¹`, `P = Q⁻ᵀ P̄ Q⁻¹`, `U = Q⁻ᵀ Ū Q⁻¹`.
pub fn synthesis_to_analysis(res: &LkSynthesisResult) -> Result<[Mat; 4]> {
    let qi = res
        .q_syn
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("synthesis Q is singular".into()))?;
    let qit = qi.transpose();
    Ok([
        &qit * &res.p_bar * &qi,
        &qit * &res.u_bar * &qi,
        qi.clone(),
        &qi * res.epsilon,
    ])
}
