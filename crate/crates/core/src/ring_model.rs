//! Optimal-velocity model on a ring road, its uniform-flow linearisation and
//! the zero-order-hold system matrices.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvmParams {
    /// Ring length (m).
    pub l: f64,
    /// Number of vehicles.
    pub n: usize,
    /// Stop spacing (m).
    pub s_st: f64,
    /// Free-flow spacing (m).
    pub s_go: f64,
    /// Maximum speed (m/s).
    pub v_max: f64,
    /// Headway sensitivity (1/s).
    pub alpha: f64,
    /// Relative-velocity sensitivity (1/s).
    pub beta: f64,
}

impl Default for OvmParams {
    fn default() -> Self {
        Self {
            l: 400.0,
            n: 20,
            s_st: 5.0,
            s_go: 35.0,
            v_max: 30.0,
            alpha: 0.6,
            beta: 0.9,
        }
    }
}

impl OvmParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, what: &str| {
            if c {
                Ok(())
            } else {
                Err(Error::InvalidParams(what.to_string()))
            }
        };
        ok(self.l.is_finite() && self.l > 0.0, "L must be positive")?;
        ok(self.n >= 2, "n must be at least 2")?;
        ok(
            self.s_st.is_finite() && self.s_go.is_finite() && 0.0 < self.s_st && self.s_st < self.s_go,
            "need 0 < s_st < s_go",
        )?;
        ok(self.v_max.is_finite() && self.v_max > 0.0, "v_max must be positive")?;
        ok(self.alpha.is_finite() && self.alpha > 0.0, "alpha must be positive")?;
        ok(self.beta.is_finite() && self.beta > 0.0, "beta must be positive")?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

pub fn optimal_velocity(s: f64, p: &OvmParams) -> f64 {
    if s <= p.s_st {
        0.0
    } else if s >= p.s_go {
        p.v_max
    } else {
        0.5 * p.v_max * (1.0 - (PI * (s - p.s_st) / (p.s_go - p.s_st)).cos())
    }
}

/// Derivative of [`optimal_velocity`]; zero on the clamps and at their boundaries.
pub fn optimal_velocity_slope(s: f64, p: &OvmParams) -> f64 {
    if s <= p.s_st || s >= p.s_go {
        0.0
    } else {
        let w = PI / (p.s_go - p.s_st);
        0.5 * p.v_max * w * (w * (s - p.s_st)).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub s_star: f64,
    pub v_star: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

pub fn equilibrium(p: &OvmParams) -> Equilibrium {
    let s_star = p.l / p.n as f64;
    Equilibrium {
        s_star,
        v_star: optimal_velocity(s_star, p),
        a1: p.alpha * optimal_velocity_slope(s_star, p),
        a2: p.alpha + p.beta,
        a3: p.beta,
    }
}

/// `alpha + 2 beta - 2 V'(L/n)`; nonnegative means the uncontrolled ring is stable.
pub fn string_stability_margin(p: &OvmParams) -> f64 {
    p.alpha + 2.0 * p.beta - 2.0 * optimal_velocity_slope(p.l / p.n as f64, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuidanceKind {
    #[default]
    PiecewiseAcceleration,
    PiecewiseVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub params: OvmParams,
    pub eq: Equilibrium,
    pub a: Mat,
    pub b: Mat,
    pub b_d: Mat,
    pub guidance: GuidanceKind,
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }
}

fn put2(m: &mut Mat, bi: usize, bj: usize, blk: [[f64; 2]; 2]) {
    for r in 0..2 {
        for c in 0..2 {
            m[(2 * bi + r, 2 * bj + c)] = blk[r][c];
        }
    }
}

/// Error dynamics `ẋ = A x + B u` for state `[s̃1, ṽ1, ..., s̃n, ṽn]`; vehicle 1 is guided and follows vehicle n.
pub fn build_system(p: &OvmParams, g: GuidanceKind) -> Result<SystemMatrices> {
    p.validate()?;
    let n = p.n;
    let eq = equilibrium(p);
    let dim = 2 * n;
    let mut a = Mat::zeros(dim, dim);
    let d1 = [[0.0, -1.0], [eq.a1, -eq.a2]];
    let d2 = [[0.0, 1.0], [0.0, eq.a3]];
    let (c1, c2, b1) = match g {
        GuidanceKind::PiecewiseAcceleration => ([[0.0, -1.0], [0.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]], 1.0),
        GuidanceKind::PiecewiseVelocity => ([[0.0, -1.0], [0.0, -eq.a2]], [[0.0, 1.0], [0.0, eq.a3]], p.alpha),
    };
    put2(&mut a, 0, 0, c1);
    put2(&mut a, 0, n - 1, c2);
    for i in 1..n {
        put2(&mut a, i, i - 1, d2);
        put2(&mut a, i, i, d1);
    }
    let mut b = Mat::zeros(dim, 1);
    b[(1, 0)] = b1;
    let mut b_d = Mat::zeros(dim, dim);
    for i in 0..n {
        b_d[(2 * i + 1, 2 * i + 1)] = 1.0;
    }
    Ok(SystemMatrices {
        params: *p,
        eq,
        a,
        b,
        b_d,
        guidance: g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    H2,
    LkSynthesized,
    #[default]
    Manual,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::H2 => "h2",
            Provenance::LkSynthesized => "lk",
            Provenance::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "h2" => Some(Provenance::H2),
            "lk" => Some(Provenance::LkSynthesized),
            "manual" => Some(Provenance::Manual),
            _ => None,
        }
    }
}

/// Full-state feedback `u = -k_mult · K x(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub k: Vector,
    pub k_mult: f64,
    pub provenance: Provenance,
}

impl Controller {
    pub fn new(k: Vector, provenance: Provenance) -> Self {
        Self {
            k,
            k_mult: 1.0,
            provenance,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(Vector::zeros(dim), Provenance::Manual)
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    /// `k_mult · K` as a 1×dim row.
    pub fn effective_row(&self) -> Mat {
        Mat::from_row_slice(1, self.k.len(), (self.k.clone() * self.k_mult).as_slice())
    }

    pub fn control(&self, x: &[f64]) -> f64 {
        -self.k_mult * self.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>()
    }
}

pub fn scale_controller(c: &Controller, k_mult: f64) -> Result<Controller> {
    if !(k_mult >= 0.0 && k_mult.is_finite()) {
        return Err(Error::InvalidParams(format!("k_mult must be nonnegative, got {k_mult}")));
    }
    Ok(Controller {
        k_mult: c.k_mult * k_mult,
        ..c.clone()
    })
}

fn check_dims(sys: &SystemMatrices, c: &Controller) -> Result<()> {
    if c.dim() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "controller has {} gains, system has {} states",
            c.dim(),
            sys.dim()
        )));
    }
    Ok(())
}

/// `A₁ = -B k_mult K`.
pub fn injection_matrix(sys: &SystemMatrices, c: &Controller) -> Result<Mat> {
    check_dims(sys, c)?;
    Ok(-(&sys.b * c.effective_row()))
}

pub fn closed_loop(sys: &SystemMatrices, c: &Controller) -> Result<Mat> {
    Ok(&sys.a + injection_matrix(sys, c)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub a: Mat,
    pub b: Mat,
    /// Effective gain (k_mult applied) on the reduced coordinates.
    pub k: Mat,
    pub b_d: Mat,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `A₁ = -B K` on the reduced coordinates.
    pub fn injection(&self) -> Mat {
        -(&self.b * &self.k)
    }

    pub fn closed_loop(&self) -> Mat {
        &self.a + self.injection()
    }

    /// Disturbance input restricted to the velocity channels, (2n-1)×n.
    pub fn b_d_velocity(&self) -> Mat {
        let m = self.b_d.nrows();
        let cols: Vec<usize> = (0..m).filter(|&j| self.b_d.column(j).amax() != 0.0).collect();
        Mat::from_fn(m, cols.len(), |i, j| self.b_d[(i, cols[j])])
    }
}

/// Embedding `x = T x_red` for states with zero spacing sum; `x_red` drops `s̃1`.
pub fn reduction_basis(n: usize) -> Mat {
    let dim = 2 * n;
    let mut t = Mat::zeros(dim, dim - 1);
    for i in 1..n {
        t[(0, 2 * i - 1)] = -1.0;
    }
    for r in 1..dim {
        t[(r, r - 1)] = 1.0;
    }
    t
}

/// Drops `s̃1` from a full state.
pub fn project(x: &Vector) -> Vector {
    x.rows(1, x.len() - 1).into_owned()
}

/// Inverse of the reduction on the constraint manifold: `s̃1 = -(s̃2 + ... + s̃n)`.
pub fn embed(x_red: &Vector) -> Vector {
    let mut x = Vector::zeros(x_red.len() + 1);
    x.rows_mut(1, x_red.len()).copy_from(x_red);
    let mut s = 0.0;
    let mut i = 2;
    while i < x.len() {
        s += x[i];
        i += 2;
    }
    x[0] = -s;
    x
}

pub fn reduce(sys: &SystemMatrices, c: &Controller) -> Result<ReducedSystem> {
    check_dims(sys, c)?;
    let t = reduction_basis(sys.n());
    let dim = sys.dim();
    let pi = |m: &Mat| m.rows(1, dim - 1).into_owned();
    Ok(ReducedSystem {
        a: pi(&(&sys.a * &t)),
        b: pi(&sys.b),
        k: c.effective_row() * &t,
        b_d: pi(&(&sys.b_d * &t)),
    })
}

/// Lifts a reduced gain row to the full state by putting zero on `s̃1`.
pub fn lift_gain(k_red: &Mat) -> Vector {
    let m = k_red.ncols();
    let mut k = Vector::zeros(m + 1);
    for j in 0..m {
        k[j + 1] = k_red[(0, j)];
    }
    k
}
