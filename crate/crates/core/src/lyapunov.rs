//! Closed-form Lyapunov hold-length bound and its driver-error extensions.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ring_model::{reduce, Controller, SystemMatrices};

pub use crate::linalg::solve_continuous_lyapunov;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub p: Mat,
    pub q: Mat,
    pub sigma_min_q: f64,
    pub sigma_max_p: f64,
    pub sigma_max_a: f64,
    pub sigma_max_a1: f64,
    pub delta_bound: f64,
    pub c_prime: f64,
    pub d_margin: f64,
    /// Relative residual of the Lyapunov solve.
    pub residual: f64,
    /// Reduced disturbance matrix the extensions are evaluated with.
    pub b_d: Mat,
}

impl LyapunovCertificate {
    /// `σ_max(P) (σ_max(A) + σ_max(A₁))²`.
    fn denominator(&self) -> f64 {
        let s = self.sigma_max_a + self.sigma_max_a1;
        self.sigma_max_p * s * s
    }

    /// `σ_max(B_d P + P B_dᵀ)`.
    pub fn sigma_max_bdp(&self) -> f64 {
        let m = &self.b_d * &self.p + &self.p * self.b_d.transpose();
        linalg::sigma_max(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanErrorBounds {
    pub d_nv: f64,
    pub d_v: f64,
    pub sigma: f64,
    pub d_v_bar: f64,
    pub c_dprime: f64,
    pub ultimate_radius: f64,
    pub delta_vanishing: f64,
    pub disturbance_too_large: bool,
    pub delta_delay: f64,
}

/// Bound from matrices already on the reduced coordinates.
pub fn hold_bound_reduced(a: &Mat, a1: &Mat, b_d: &Mat, q: &Mat, c_prime: f64) -> Result<LyapunovCertificate> {
    if !(c_prime > 0.0) {
        return Err(Error::InvalidParams("c_prime must be positive".into()));
    }
    let a_cl = a + a1;
    let p = solve_continuous_lyapunov(&a_cl, q)?;
    let residual = linalg::lyapunov_residual(&a_cl, &p, q);
    let sigma_min_q = linalg::sigma_min(q);
    let sigma_max_p = linalg::sigma_max(&p);
    let sigma_max_a = linalg::sigma_max(a);
    let sigma_max_a1 = linalg::sigma_max(a1);
    let s = sigma_max_a + sigma_max_a1;
    let delta_bound = c_prime * sigma_min_q / (sigma_max_p * s * s);
    if !delta_bound.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite Lyapunov bound {delta_bound}")));
    }
    Ok(LyapunovCertificate {
        p,
        q: q.clone(),
        sigma_min_q,
        sigma_max_p,
        sigma_max_a,
        sigma_max_a1,
        delta_bound,
        c_prime,
        d_margin: 2.0,
        residual,
        b_d: b_d.clone(),
    })
}

/// Hold bound `c' σ_min(Q) / (σ_max(P) (σ_max(A) + σ_max(A₁))²)` on the reduced system; `Q = I` when `None`.
pub fn lyapunov_hold_bound(
    sys: &SystemMatrices,
    c: &Controller,
    q: Option<&Mat>,
    c_prime: f64,
) -> Result<LyapunovCertificate> {
    let red = reduce(sys, c)?;
    let m = red.dim();
    let ident = Mat::identity(m, m);
    let q = q.unwrap_or(&ident);
    if q.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("Q must be {m}x{m}")));
    }
    hold_bound_reduced(&red.a, &red.injection(), &red.b_d, q, c_prime)
}

/// Radius `10 σ_max(B_d P + P B_dᵀ) d_nv / (σ_min(Q) / d)`.
pub fn nonvanishing_ultimate_bound(cert: &LyapunovCertificate, d_nv: f64, d_margin: f64) -> f64 {
    10.0 * cert.sigma_max_bdp() * d_nv / (cert.sigma_min_q / d_margin)
}

/// Hold bound under a vanishing error of gain `d_v`; the flag is set when the bound floors at zero.
pub fn vanishing_hold_bound(cert: &LyapunovCertificate, d_v: f64) -> (f64, bool) {
    let num = cert.sigma_min_q - 5.0 * cert.sigma_max_bdp() * d_v;
    if num < 0.0 {
        return (0.0, true);
    }
    (cert.c_prime * num / cert.denominator(), false)
}

/// Hold bound shrunk by a reaction delay `Σ`, floored at zero.
pub fn reaction_delay_bound(cert: &LyapunovCertificate, sigma: f64, d_v_bar: f64, c_dprime: f64) -> f64 {
    (cert.delta_bound - c_dprime * d_v_bar * sigma).max(0.0)
}

pub fn human_error_bounds(
    cert: &LyapunovCertificate,
    d_nv: f64,
    d_v: f64,
    sigma: f64,
    d_v_bar: f64,
    c_dprime: f64,
) -> HumanErrorBounds {
    let (delta_vanishing, disturbance_too_large) = vanishing_hold_bound(cert, d_v);
    HumanErrorBounds {
        d_nv,
        d_v,
        sigma,
        d_v_bar,
        c_dprime,
        ultimate_radius: nonvanishing_ultimate_bound(cert, d_nv, cert.d_margin),
        delta_vanishing,
        disturbance_too_large,
        delta_delay: reaction_delay_bound(cert, sigma, d_v_bar, c_dprime),
    }
}

/// Empirical smoothness constant: the largest ratio between the peak ‖ẋ‖ of a
/// hold period and the peak of the period before it, along a sampled trajectory.
pub fn estimate_d_v_bar(a: &Mat, a1: &Mat, states: &[Vec<f64>], samples: &[usize]) -> f64 {
    let peaks: Vec<f64> = (0..samples.len().saturating_sub(1))
        .map(|k| {
            let xk = nalgebra::DVector::from_column_slice(&states[samples[k]]);
            (samples[k]..samples[k + 1].min(states.len()))
                .map(|i| {
                    let x = nalgebra::DVector::from_column_slice(&states[i]);
                    (a * &x + a1 * &xk).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    peaks
        .windows(2)
        .filter(|w| w[0] > 1e-12)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}
