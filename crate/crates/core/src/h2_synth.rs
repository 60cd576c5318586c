//! Continuous-time H2 state-feedback synthesis via the standard convex program.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ring_model::{lift_gain, reduce, Controller, Provenance, SystemMatrices};
use crate::sdp::{solve_objective, LmiProblem, SdpOptions, VarKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Weights {
    pub gamma_s: f64,
    pub gamma_v: f64,
    pub gamma_u: f64,
}

impl Default for H2Weights {
    fn default() -> Self {
        Self {
            gamma_s: 0.03,
            gamma_v: 0.15,
            gamma_u: 1.0,
        }
    }
}

impl H2Weights {
    pub fn validate(&self) -> Result<()> {
        if [self.gamma_s, self.gamma_v, self.gamma_u].iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams("H2 weights must be positive".into()))
        }
    }

    /// State weight on the full state `[s̃1, ṽ1, ...]`; each weight enters linearly.
    pub fn state_weight(&self, n: usize) -> Mat {
        Mat::from_fn(2 * n, 2 * n, |i, j| {
            if i != j {
                0.0
            } else if i % 2 == 0 {
                self.gamma_s
            } else {
                self.gamma_v
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H2Solution {
    pub x: Mat,
    pub y: Mat,
    pub z: Mat,
    /// Reduced gain `Z X⁻¹`.
    pub k_red: Mat,
    pub controller: Controller,
    pub objective_value: f64,
}

/// Solves `min Tr(Q X) + Tr(R Y)` s.t. `(A X - B Z) + (A X - B Z)ᵀ + I ⪯ 0`, `[[Y, Z], [Zᵀ, X]] ⪰ 0`, `X ≻ 0`
/// on reduced matrices.
pub fn h2_reduced(a: &Mat, b: &Mat, q: &Mat, r: &Mat, opts: &SdpOptions) -> Result<(Mat, Mat, Mat, f64)> {
    let m = a.nrows();
    let nu = b.ncols();
    let mut pr = LmiProblem::new();
    let x = pr.add_pd_var("X", m);
    let y = pr.add_var("Y", nu, nu, VarKind::Symmetric);
    let z = pr.add_var("Z", nu, m, VarKind::Full);

    let lyap = pr.add_lmi("H2 Lyapunov", &[m], false);
    pr.add_term(lyap, 0, 0, a.clone(), x, Mat::identity(m, m));
    pr.add_term(lyap, 0, 0, -b, z, Mat::identity(m, m));
    pr.add_constant(lyap, 0, 0, &Mat::identity(m, m));

    let schur = pr.add_lmi("H2 Schur", &[nu, m], false);
    pr.add_sym_term(schur, 0, y, -1.0);
    pr.add_term(schur, 0, 1, -Mat::identity(nu, nu), z, Mat::identity(m, m));
    pr.add_sym_term(schur, 1, x, -1.0);

    pr.set_objective(x, q.clone());
    pr.set_objective(y, r.clone());
    let sol = solve_objective(&pr, opts)?;
    Ok((
        sol.values[x.0].clone(),
        sol.values[y.0].clone(),
        sol.values[z.0].clone(),
        sol.objective,
    ))
}

pub fn h2_controller(sys: &SystemMatrices, w: &H2Weights, opts: &SdpOptions) -> Result<H2Solution> {
    w.validate()?;
    let red = reduce(sys, &Controller::zero(sys.dim()))?;
    let m = red.dim();
    // Reduced state weight: the retained coordinates of diag(γs, γv, ...).
    let qf = w.state_weight(sys.n());
    let q = qf.view((1, 1), (m, m)).into_owned();
    let r = Mat::from_element(1, 1, w.gamma_u);
    let (x, y, z, objective_value) = h2_reduced(&red.a, &red.b, &q, &r, opts)?;
    let x_inv = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("H2 X is singular".into()))?;
    let k_red = &z * x_inv;
    let a_cl = &red.a - &red.b * &k_red;
    if linalg::spectral_abscissa(&a_cl) >= 0.0 {
        return Err(Error::NumericalFailure("H2 closed loop is not Hurwitz".into()));
    }
    Ok(H2Solution {
        controller: Controller::new(lift_gain(&k_red), Provenance::H2),
        k_red,
        x,
        y,
        z,
        objective_value,
    })
}
