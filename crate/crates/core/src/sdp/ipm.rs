//! Dual-form primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) specialised to the term structure of [`LmiProblem`].
//!
//! Standard form: maximise `bᵀy` subject to `S = C - Σ yᵢ Aᵢ ⪰ 0`, where
//! `C = -F₀` and `Aᵢ` is the coefficient of coordinate `yᵢ` in `F`.

use faer::prelude::Solve;
use nalgebra::Cholesky;

use super::{LmiCheck, LmiId, LmiProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityMode {
    /// Stop at the first iterate that satisfies every strict LMI with margin.
    FirstFeasible,
    /// Solve the margin-maximisation problem to optimality.
    MaxMargin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Strict LMIs are enforced as `F ⪯ -margin·I`.
    pub margin: f64,
    /// Box `|yᵢ| ≤ R` on every coordinate in feasibility mode; makes homogeneous LMIs bounded.
    /// Ignored when any LMI has a constant term.
    pub box_radius: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub step_factor: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            margin: 1e-7,
            box_radius: Some(1.0),
            tol: 1e-8,
            max_iter: 150,
            step_factor: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub values: Vec<Mat>,
    pub coords: Vec<f64>,
    /// Attained margin variable in feasibility mode.
    pub t: Option<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub checks: Vec<LmiCheck>,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpOutcome {
    Feasible(SdpSolution),
    Infeasible { t_star: f64, iterations: usize },
}

impl SdpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SdpOutcome::Feasible(_))
    }
}

type Entries = Vec<([(usize, usize); 2], usize)>;

struct Block {
    lmi: usize,
    dim: usize,
    c: Mat,
    with_t: bool,
}

struct StdForm<'a> {
    prob: &'a LmiProblem,
    blocks: Vec<Block>,
    entries: Vec<Entries>,
    ny: usize,
    t_index: Option<usize>,
    m: usize,
    b: Vec<f64>,
    box_radius: Option<f64>,
}

#[derive(Clone)]
struct Iterate {
    y: Vec<f64>,
    x: Vec<Mat>,
    z: Vec<Mat>,
    xl: Vec<f64>,
    zl: Vec<f64>,
}

struct Direction {
    dy: Vec<f64>,
    dx: Vec<Mat>,
    dz: Vec<Mat>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
}

fn dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest step `α` with `X + α dX ⪰ 0`, or infinity.
fn max_step_sdp(x: &Mat, dx: &Mat) -> Result<f64> {
    let chol = Cholesky::new(x.clone())
        .ok_or_else(|| Error::NumericalFailure("primal block lost positive definiteness".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(dx)
        .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
    let lam = linalg::min_eig_sym(&m);
    Ok(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn inverse_spd(z: &Mat) -> Result<Mat> {
    Cholesky::new(z.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NumericalFailure("dual slack lost positive definiteness".into()))
}

impl<'a> StdForm<'a> {
    fn new(prob: &'a LmiProblem, feasibility: bool, opts: &SdpOptions) -> Self {
        let ny = prob.n_coords();
        let t_index = feasibility.then_some(ny);
        let m = ny + usize::from(feasibility);
        let blocks = prob
            .lmis
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut c = -&l.constant;
                if l.strict && !feasibility {
                    for i in 0..l.dim() {
                        c[(i, i)] -= opts.margin;
                    }
                }
                Block {
                    lmi: k,
                    dim: l.dim(),
                    c,
                    with_t: feasibility && l.strict,
                }
            })
            .collect();
        let mut b = vec![0.0; m];
        if let Some(t) = t_index {
            b[t] = -1.0;
        } else {
            for (bi, ci) in b.iter_mut().zip(prob.objective_vector()) {
                *bi = -ci;
            }
        }
        Self {
            prob,
            blocks,
            entries: prob.vars.iter().map(|v| v.coord_entries()).collect(),
            ny,
            t_index,
            m,
            b,
            // The box only normalises scale; a constant term fixes the scale and the box would cut feasible points off.
            box_radius: if feasibility && prob.lmis.iter().all(|l| l.constant.amax() == 0.0) {
                opts.box_radius
            } else {
                None
            },
        }
    }

    fn n_lp(&self) -> usize {
        if self.box_radius.is_some() {
            2 * self.ny
        } else {
            0
        }
    }

    fn t(&self, y: &[f64]) -> f64 {
        self.t_index.map_or(0.0, |t| y[t])
    }

    /// `Σ yᵢ Aᵢ` restricted to each SDP block, and to the box.
    fn aty(&self, y: &[f64]) -> (Vec<Mat>, Vec<f64>) {
        let values = self.prob.values_from_coords(&y[..self.ny]);
        let t = self.t(y);
        let mats = self
            .blocks
            .iter()
            .map(|blk| {
                let mut f = self.prob.assemble(LmiId(blk.lmi), &values);
                f -= &self.prob.lmis[blk.lmi].constant;
                if blk.with_t {
                    for i in 0..blk.dim {
                        f[(i, i)] -= t;
                    }
                }
                f
            })
            .collect();
        let mut lp = Vec::with_capacity(self.n_lp());
        if self.box_radius.is_some() {
            lp.extend_from_slice(&y[..self.ny]);
            lp.extend(y[..self.ny].iter().map(|v| -v));
        }
        (mats, lp)
    }

    fn lp_c(&self) -> Vec<f64> {
        vec![self.box_radius.unwrap_or(0.0); self.n_lp()]
    }

    /// Adds `⟨Aᵢ, G⟩` over one block to `out` for symmetric `G`.
    fn adjoint_block(&self, k: usize, g: &Mat, out: &mut [f64]) {
        let blk = &self.blocks[k];
        let lmi = &self.prob.lmis[blk.lmi];
        for term in &lmi.terms {
            let (or, oc) = (lmi.offsets[term.row_blk], lmi.offsets[term.col_blk]);
            let grc = g.view((or, oc), (lmi.sizes[term.row_blk], lmi.sizes[term.col_blk]));
            let p = term.left.transpose() * grc * term.right.transpose();
            let spec = &self.prob.vars[term.var.0];
            for (i, (e, cnt)) in self.entries[term.var.0].iter().enumerate() {
                let mut s = 0.0;
                for &(a, b) in &e[..*cnt] {
                    s += p[(a, b)];
                }
                out[spec.offset + i] += 2.0 * s;
            }
        }
        if blk.with_t {
            out[self.t_index.unwrap()] -= g.trace();
        }
    }

    fn adjoint(&self, g: &[Mat], gl: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (k, gk) in g.iter().enumerate() {
            self.adjoint_block(k, gk, &mut out);
        }
        if self.box_radius.is_some() {
            for i in 0..self.ny {
                out[i] += gl[i] - gl[self.ny + i];
            }
        }
        out
    }

    /// Lower triangle of `M_ij = Σ tr(Aᵢ X Aⱼ Z⁻¹)`, column-major.
    fn schur(&self, x: &[Mat], w: &[Mat], xl: &[f64], zl: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut mm = vec![0.0; m * m];
        for (k, blk) in self.blocks.iter().enumerate() {
            let lmi = &self.prob.lmis[blk.lmi];
            let xk = &x[k];
            let wk = &w[k];
            let sub = |a: &Mat, r: usize, c: usize| {
                a.view((lmi.offsets[r], lmi.offsets[c]), (lmi.sizes[r], lmi.sizes[c])).into_owned()
            };
            let lt: Vec<Mat> = lmi.terms.iter().map(|t| t.left.transpose()).collect();
            let rt: Vec<Mat> = lmi.terms.iter().map(|t| t.right.transpose()).collect();
            for (ti, t) in lmi.terms.iter().enumerate() {
                for (si, s) in lmi.terms.iter().enumerate() {
                    if t.var.0 > s.var.0 {
                        continue;
                    }
                    let (rt_, ct_) = (t.row_blk, t.col_blk);
                    let (rs_, cs_) = (s.row_blk, s.col_blk);
                    let xrl = &t.right * sub(xk, ct_, rs_) * &s.left;
                    let xrr = &t.right * sub(xk, ct_, cs_) * &rt[si];
                    let xll = &lt[ti] * sub(xk, rt_, rs_) * &s.left;
                    let xlr = &lt[ti] * sub(xk, rt_, cs_) * &rt[si];
                    let slr = &lt[ti] * sub(wk, rt_, cs_) * &rt[si];
                    let sll = &lt[ti] * sub(wk, rt_, rs_) * &s.left;
                    let srr = &t.right * sub(wk, ct_, cs_) * &rt[si];
                    let srl = &t.right * sub(wk, ct_, rs_) * &s.left;
                    let et = &self.entries[t.var.0];
                    let es = &self.entries[s.var.0];
                    let ot = self.prob.vars[t.var.0].offset;
                    let os = self.prob.vars[s.var.0].offset;
                    let same = t.var == s.var;
                    for (i, (ei, ni)) in et.iter().enumerate() {
                        let gi = ot + i;
                        let col = &mut mm[gi * m..(gi + 1) * m];
                        let j0 = if same { i } else { 0 };
                        for (j, (ej, nj)) in es.iter().enumerate().skip(j0) {
                            let mut h = 0.0;
                            for &(a, b) in &ei[..*ni] {
                                for &(c, d) in &ej[..*nj] {
                                    h += xrl[(b, c)] * slr[(a, d)]
                                        + xrr[(b, d)] * sll[(a, c)]
                                        + xll[(a, c)] * srr[(b, d)]
                                        + xlr[(a, d)] * srl[(b, c)];
                                }
                            }
                            col[os + j] += h;
                        }
                    }
                }
            }
            if blk.with_t {
                let ti = self.t_index.unwrap();
                let g = linalg::symmetrize(&(xk * wk));
                let mut adj = vec![0.0; m];
                self.adjoint_block(k, &g, &mut adj);
                // adjoint_block already subtracts tr(G) at t: M_tt = tr(X W) = -adj[t].
                for i in 0..self.ny {
                    mm[i * m + ti] -= adj[i];
                }
                mm[ti * m + ti] += g.trace();
            }
        }
        if self.box_radius.is_some() {
            for i in 0..self.ny {
                mm[i * m + i] += xl[i] / zl[i] + xl[self.ny + i] / zl[self.ny + i];
            }
        }
        // Mirror to the upper triangle.
        for j in 0..m {
            for i in (j + 1)..m {
                mm[i * m + j] = mm[j * m + i];
            }
        }
        mm
    }

    fn values(&self, y: &[f64]) -> Vec<Mat> {
        self.prob.values_from_coords(&y[..self.ny])
    }
}

struct Factor {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl Factor {
    fn new(mm: &mut [f64], m: usize) -> Result<Self> {
        let max_diag = (0..m).map(|i| mm[i * m + i].abs()).fold(0.0, f64::max).max(1e-300);
        for attempt in 0..4 {
            let mat = faer::MatRef::from_column_major_slice(mm, m, m);
            if let Ok(llt) = mat.llt(faer::Side::Lower) {
                return Ok(Self { llt });
            }
            let reg = max_diag * 1e-14 * 100f64.powi(attempt);
            for i in 0..m {
                mm[i * m + i] += reg;
            }
        }
        Err(Error::NumericalFailure("Schur complement is not positive definite".into()))
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

struct Residuals {
    rd: Vec<Mat>,
    rdl: Vec<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
    gap: f64,
    mu: f64,
}

fn residuals(sf: &StdForm, it: &Iterate) -> Residuals {
    let (aty, atyl) = sf.aty(&it.y);
    let rd: Vec<Mat> = sf
        .blocks
        .iter()
        .zip(&aty)
        .zip(&it.z)
        .map(|((blk, a), z)| &blk.c - z - a)
        .collect();
    let lpc = sf.lp_c();
    let rdl: Vec<f64> = (0..sf.n_lp()).map(|i| lpc[i] - it.zl[i] - atyl[i]).collect();
    let ax = sf.adjoint(&it.x, &it.xl);
    let rp: Vec<f64> = sf.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bnorm = sf.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = (sf.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>() + vdot(&lpc, &lpc)).sqrt();
    let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
    let dinf = (rd.iter().map(|m| m.norm_squared()).sum::<f64>() + vdot(&rdl, &rdl)).sqrt() / (1.0 + cnorm);
    let pobj = sf.blocks.iter().zip(&it.x).map(|(b, x)| dot(&b.c, x)).sum::<f64>() + vdot(&lpc, &it.xl);
    let dobj = vdot(&sf.b, &it.y);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    let xz = it.x.iter().zip(&it.z).map(|(x, z)| dot(x, z)).sum::<f64>() + vdot(&it.xl, &it.zl);
    let n = sf.blocks.iter().map(|b| b.dim).sum::<usize>() + sf.n_lp();
    Residuals {
        rd,
        rdl,
        pinf,
        dinf,
        pobj,
        dobj,
        gap,
        mu: xz / n as f64,
    }
}

fn direction(
    sf: &StdForm,
    it: &Iterate,
    res: &Residuals,
    w: &[Mat],
    factor: &Factor,
    sigma_mu: f64,
    pred: Option<&Direction>,
) -> Direction {
    // rhs = b - σμ A(W) + A(X R_d W) [+ A(dXp dZp W)]
    let mut g: Vec<Mat> = Vec::with_capacity(sf.blocks.len());
    for k in 0..sf.blocks.len() {
        let mut gk = &it.x[k] * &res.rd[k] * &w[k] - &w[k] * sigma_mu;
        if let Some(p) = pred {
            gk += &p.dx[k] * &p.dz[k] * &w[k];
        }
        g.push(linalg::symmetrize(&gk));
    }
    let gl: Vec<f64> = (0..sf.n_lp())
        .map(|i| {
            let mut v = (it.xl[i] * res.rdl[i] - sigma_mu) / it.zl[i];
            if let Some(p) = pred {
                v += p.dxl[i] * p.dzl[i] / it.zl[i];
            }
            v
        })
        .collect();
    let ag = sf.adjoint(&g, &gl);
    let rhs: Vec<f64> = sf.b.iter().zip(&ag).map(|(b, a)| b + a).collect();
    let dy = factor.solve(&rhs);
    let (a_dy, a_dyl) = sf.aty(&dy);
    let dz: Vec<Mat> = res.rd.iter().zip(&a_dy).map(|(r, a)| r - a).collect();
    let dzl: Vec<f64> = res.rdl.iter().zip(&a_dyl).map(|(r, a)| r - a).collect();
    let mut dx = Vec::with_capacity(sf.blocks.len());
    for k in 0..sf.blocks.len() {
        let mut d = &w[k] * sigma_mu - &it.x[k] - &it.x[k] * &dz[k] * &w[k];
        if let Some(p) = pred {
            d -= &p.dx[k] * &p.dz[k] * &w[k];
        }
        dx.push(linalg::symmetrize(&d));
    }
    let dxl: Vec<f64> = (0..sf.n_lp())
        .map(|i| {
            let mut v = sigma_mu / it.zl[i] - it.xl[i] - it.xl[i] * dzl[i] / it.zl[i];
            if let Some(p) = pred {
                v -= p.dxl[i] * p.dzl[i] / it.zl[i];
            }
            v
        })
        .collect();
    Direction { dy, dx, dz, dxl, dzl }
}

fn step_lengths(it: &Iterate, d: &Direction) -> Result<(f64, f64)> {
    let mut ap = max_step_lp(&it.xl, &d.dxl);
    let mut ad = max_step_lp(&it.zl, &d.dzl);
    for k in 0..it.x.len() {
        ap = ap.min(max_step_sdp(&it.x[k], &d.dx[k])?);
        ad = ad.min(max_step_sdp(&it.z[k], &d.dz[k])?);
    }
    Ok((ap, ad))
}

fn initial_iterate(sf: &StdForm) -> Iterate {
    let mut y = vec![0.0; sf.m];
    let n_t: usize = sf.blocks.iter().filter(|b| b.with_t).map(|b| b.dim).sum();
    if let Some(ti) = sf.t_index {
        // Start the margin variable high enough that every strict slack is the identity or larger.
        let worst = sf
            .blocks
            .iter()
            .filter(|b| b.with_t)
            .map(|b| -linalg::min_eig_sym(&b.c))
            .fold(0.0, f64::max);
        y[ti] = worst + 1.0;
    }
    let n_total = sf.blocks.iter().map(|b| b.dim).sum::<usize>() + sf.n_lp();
    let cnorm = sf.blocks.iter().map(|b| b.c.norm()).fold(0.0, f64::max);
    let zeta = 10f64.max((n_total as f64).sqrt()).max(cnorm);
    let xi = if sf.t_index.is_some() {
        1.0 / n_t.max(1) as f64
    } else {
        let bmax = sf.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        10f64.max((n_total as f64).sqrt()).max(bmax)
    };
    let t = sf.t(&y);
    let mut x = Vec::new();
    let mut z = Vec::new();
    for blk in &sf.blocks {
        x.push(Mat::identity(blk.dim, blk.dim) * xi);
        if blk.with_t {
            let mut s = blk.c.clone();
            for i in 0..blk.dim {
                s[(i, i)] += t;
            }
            z.push(linalg::symmetrize(&s));
        } else {
            z.push(Mat::identity(blk.dim, blk.dim) * zeta);
        }
    }
    let n_lp = sf.n_lp();
    Iterate {
        y,
        x,
        z,
        xl: vec![xi; n_lp],
        zl: sf.lp_c(),
    }
}

struct RunResult {
    it: Iterate,
    res: Residuals,
    iterations: usize,
    converged: bool,
    early_feasible: bool,
}

fn strict_margin_ok(sf: &StdForm, y: &[f64], margin: f64) -> bool {
    let values = sf.values(y);
    sf.prob.lmis.iter().enumerate().all(|(k, l)| {
        let e = linalg::max_eig_sym(&sf.prob.assemble(LmiId(k), &values));
        if l.strict {
            e <= -margin
        } else {
            e <= 0.0
        }
    })
}

/// Largest of the three relative residuals.
fn score(r: &Residuals) -> f64 {
    r.pinf.max(r.dinf).max(r.gap)
}

/// Below this score a stalled run is accepted at reduced accuracy.
const RELAXED_FACTOR: f64 = 1e3;

fn run(sf: &StdForm, opts: &SdpOptions, stop_when_feasible: bool) -> Result<RunResult> {
    let mut best: Option<(f64, Iterate, usize)> = None;
    let relaxed = |best: Option<(f64, Iterate, usize)>, err: Error| -> Result<RunResult> {
        match best {
            Some((sc, it, iter)) if sc <= RELAXED_FACTOR * opts.tol => {
                let level = if sc <= 10.0 * opts.tol { log::Level::Info } else { log::Level::Warn };
                log::log!(level, "interior-point run stalled ({err}); accepting iterate {iter} at accuracy {sc:.2e}");
                let res = residuals(sf, &it);
                Ok(RunResult { it, res, iterations: iter, converged: true, early_feasible: false })
            }
            _ => Err(err),
        }
    };
    let mut it = initial_iterate(sf);
    let mut stalls = 0;
    for iter in 0..opts.max_iter {
        let res = residuals(sf, &it);
        let sc = score(&res);
        if sc.is_finite() && best.as_ref().map_or(true, |b| sc < b.0) {
            best = Some((sc, it.clone(), iter));
        } else if let Some(b) = &best {
            if iter >= b.2 + 10 && b.0 <= RELAXED_FACTOR * opts.tol {
                return relaxed(best, Error::NumericalFailure("no progress in 10 iterations".into()));
            }
        }
        log::trace!(
            "ipm iter {iter}: pobj {:.6e} dobj {:.6e} pinf {:.2e} dinf {:.2e} gap {:.2e} mu {:.2e}",
            res.pobj,
            res.dobj,
            res.pinf,
            res.dinf,
            res.gap,
            res.mu
        );
        if stop_when_feasible && iter > 0 && strict_margin_ok(sf, &it.y, opts.margin) {
            return Ok(RunResult { it, res, iterations: iter, converged: false, early_feasible: true });
        }
        if res.pinf <= opts.tol && res.dinf <= opts.tol && res.gap <= opts.tol {
            return Ok(RunResult { it, res, iterations: iter, converged: true, early_feasible: false });
        }
        if sf.t_index.is_some() && res.pinf <= opts.tol && res.dinf <= opts.tol && -res.pobj > 1e3 * opts.margin {
            // Weak duality: every margin t is at least -pobj, so no feasible point exists.
            return Ok(RunResult { it, res, iterations: iter, converged: true, early_feasible: false });
        }
        if !res.mu.is_finite() {
            return Err(Error::NumericalFailure("interior-point iterate became non-finite".into()));
        }

        let w: Vec<Mat> = match it.z.iter().map(inverse_spd).collect::<Result<_>>() {
            Ok(w) => w,
            Err(e) => return relaxed(best, e),
        };
        let mut mm = sf.schur(&it.x, &w, &it.xl, &it.zl);
        let factor = match Factor::new(&mut mm, sf.m) {
            Ok(f) => f,
            Err(e) => return relaxed(best, e),
        };

        let pred = direction(sf, &it, &res, &w, &factor, 0.0, None);
        let (ap, ad) = match step_lengths(&it, &pred) {
            Ok(v) => v,
            Err(e) => return relaxed(best, e),
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let n_total = sf.blocks.iter().map(|b| b.dim).sum::<usize>() + sf.n_lp();
        let mut xz_aff = 0.0;
        for k in 0..it.x.len() {
            let xa = &it.x[k] + &pred.dx[k] * ap;
            let za = &it.z[k] + &pred.dz[k] * ad;
            xz_aff += dot(&xa, &za);
        }
        for i in 0..it.xl.len() {
            xz_aff += (it.xl[i] + ap * pred.dxl[i]) * (it.zl[i] + ad * pred.dzl[i]);
        }
        let mu_aff = xz_aff / n_total as f64;
        let sigma = (mu_aff / res.mu).clamp(0.0, 1.0).powi(3);

        let corr = direction(sf, &it, &res, &w, &factor, sigma * res.mu, Some(&pred));
        let (ap, ad) = match step_lengths(&it, &corr) {
            Ok(v) => v,
            Err(e) => return relaxed(best, e),
        };
        let ap = (opts.step_factor * ap).min(1.0);
        let ad = (opts.step_factor * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                return relaxed(
                    best,
                    Error::NumericalFailure(format!("interior-point method stalled at iteration {iter}")),
                );
            }
        } else {
            stalls = 0;
        }
        for k in 0..it.x.len() {
            it.x[k] = linalg::symmetrize(&(&it.x[k] + &corr.dx[k] * ap));
            it.z[k] = linalg::symmetrize(&(&it.z[k] + &corr.dz[k] * ad));
        }
        for i in 0..it.xl.len() {
            it.xl[i] += ap * corr.dxl[i];
            it.zl[i] += ad * corr.dzl[i];
        }
        for i in 0..sf.m {
            it.y[i] += ad * corr.dy[i];
        }
    }
    let res = residuals(sf, &it);
    if stop_when_feasible && strict_margin_ok(sf, &it.y, opts.margin) {
        return Ok(RunResult { it, res, iterations: opts.max_iter, converged: false, early_feasible: true });
    }
    let err = Error::NumericalFailure(format!(
        "no convergence in {} iterations (pinf {:.2e}, dinf {:.2e}, gap {:.2e})",
        opts.max_iter, res.pinf, res.dinf, res.gap
    ));
    relaxed(best, err)
}

fn solution(sf: &StdForm, r: &RunResult) -> SdpSolution {
    log::debug!(
        "ipm stopped after {} iterations (converged {}, early feasible {})",
        r.iterations,
        r.converged,
        r.early_feasible
    );
    let values = sf.values(&r.it.y);
    SdpSolution {
        checks: sf.prob.check(&values),
        coords: r.it.y[..sf.ny].to_vec(),
        values,
        t: sf.t_index.map(|t| r.it.y[t]),
        objective: -r.res.dobj,
        iterations: r.iterations,
        gap: r.res.gap,
        primal_infeasibility: r.res.pinf,
        dual_infeasibility: r.res.dinf,
    }
}

/// Decides whether all strict LMIs of `prob` can hold with margin `opts.margin`.
///
/// Solves `min t` subject to `F_k ⪯ t·I` for each strict LMI (plus the box),
/// so the attained `t` measures how deep inside the feasible cone the answer is.
pub fn solve_feasibility(prob: &LmiProblem, mode: FeasibilityMode, opts: &SdpOptions) -> Result<SdpOutcome> {
    if prob.n_coords() == 0 {
        return Err(Error::InvalidParams("LMI problem has no variables".into()));
    }
    if !prob.lmis.iter().any(|l| l.strict) {
        return Err(Error::InvalidParams("feasibility mode needs at least one strict LMI".into()));
    }
    let sf = StdForm::new(prob, true, opts);
    let r = run(&sf, opts, mode == FeasibilityMode::FirstFeasible)?;
    let t_star = sf.t(&r.it.y);
    let sol = solution(&sf, &r);
    let verified = sol.checks.iter().all(|c| if c.strict { c.max_eig <= -1e-9 } else { c.max_eig <= 1e-9 });
    if r.early_feasible || (t_star <= -opts.margin && verified) {
        if !verified {
            return Err(Error::NumericalFailure("feasible iterate failed independent re-check".into()));
        }
        return Ok(SdpOutcome::Feasible(sol));
    }
    if t_star <= -opts.margin {
        return Err(Error::NumericalFailure(format!(
            "margin {t_star:.3e} reached but the reassembled LMIs do not verify"
        )));
    }
    Ok(SdpOutcome::Infeasible { t_star: t_star.max(-r.res.pobj), iterations: r.iterations })
}

/// Minimises the problem's linear objective; strict LMIs are shifted by `opts.margin`.
pub fn solve_objective(prob: &LmiProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    if prob.n_coords() == 0 {
        return Err(Error::InvalidParams("LMI problem has no variables".into()));
    }
    let sf = StdForm::new(prob, false, opts);
    let r = run(&sf, opts, false)?;
    let sol = solution(&sf, &r);
    for c in &sol.checks {
        let limit = if c.strict { 0.0 } else { 1e-6 };
        if c.max_eig > limit {
            return Err(Error::NumericalFailure(format!(
                "LMI '{}' violated by {:.3e} at the returned point",
                c.name, c.max_eig
            )));
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{LmiProblem, VarKind};

    #[test]
    fn trace_minimisation_over_shifted_cone() {
        // min tr X s.t. X ⪰ I  ->  X = I
        let mut p = LmiProblem::new();
        let x = p.add_var("X", 3, 3, VarKind::Symmetric);
        let l = p.add_lmi("X >= I", &[3], false);
        p.add_sym_term(l, 0, x, -1.0);
        p.add_constant(l, 0, 0, &Mat::identity(3, 3));
        p.set_objective(x, Mat::identity(3, 3));
        let sol = solve_objective(&p, &SdpOptions::default()).unwrap();
        assert!((&sol.values[0] - Mat::identity(3, 3)).amax() < 1e-6, "{}", sol.values[0]);
        assert!((sol.objective - 3.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_lyapunov_feasibility() {
        for (a, feasible) in [(-1.0, true), (1.0, false)] {
            let mut p = LmiProblem::new();
            let v = p.add_pd_var("p", 1);
            let l = p.add_lmi("2ap < 0", &[1], true);
            p.add_sym_term(l, 0, v, 2.0 * a);
            let out = solve_feasibility(&p, FeasibilityMode::FirstFeasible, &SdpOptions::default()).unwrap();
            assert_eq!(out.is_feasible(), feasible, "a = {a}");
        }
    }

    #[test]
    fn full_variable_terms() {
        // find G with  [[-1, G],[G^T, -1]] < 0 and G - 0.5 > 0 (scalar): feasible for G in (0.5, 1)
        let mut p = LmiProblem::new();
        let g = p.add_var("G", 1, 1, VarKind::Full);
        let l = p.add_lmi("block", &[1, 1], true);
        p.add_constant(l, 0, 0, &Mat::from_element(1, 1, -1.0));
        p.add_constant(l, 1, 1, &Mat::from_element(1, 1, -1.0));
        p.add_term(l, 0, 1, Mat::identity(1, 1), g, Mat::identity(1, 1));
        let l2 = p.add_lmi("G > 0.5", &[1], true);
        p.add_term(l2, 0, 0, Mat::from_element(1, 1, -0.5), g, Mat::identity(1, 1));
        p.add_constant(l2, 0, 0, &Mat::from_element(1, 1, 0.5));
        let opts = SdpOptions { box_radius: Some(10.0), ..Default::default() };
        let out = solve_feasibility(&p, FeasibilityMode::MaxMargin, &opts).unwrap();
        match out {
            SdpOutcome::Feasible(sol) => {
                let gv = sol.values[0][(0, 0)];
                assert!(gv > 0.5 && gv < 1.0, "{gv}");
                // margin optimum: min(1 - G, G - 0.5) maximised at G = 0.75
                assert!((gv - 0.75).abs() < 1e-5, "{gv}");
            }
            other => panic!("{other:?}"),
        }
    }
}
