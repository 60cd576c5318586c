//! Dense helpers on top of nalgebra: singular values, symmetric spectra,
//! Hurwitz checks and a Bartels-Stewart Lyapunov solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest singular value.
pub fn sigma_max(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value.
pub fn sigma_min(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().min()
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_eig_sym(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn min_eig_sym(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fails with `NotHurwitz` unless every eigenvalue has real part below `-tol`.
pub fn check_hurwitz(m: &Mat, tol: f64) -> Result<()> {
    let ev = eigenvalues(m);
    let abscissa = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa.is_finite() && abscissa < -tol {
        return Ok(());
    }
    let offending = ev
        .iter()
        .filter(|z| !(z.re < -tol))
        .map(|z| (z.re, z.im))
        .collect();
    Err(Error::NotHurwitz { abscissa, offending })
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

/// Solves `A P + P Aᵀ = -Q` for Hurwitz `A` by Bartels-Stewart on the real Schur form.
pub fn solve_continuous_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let m = a.nrows();
    if a.ncols() != m || q.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "lyapunov: A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    if m == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    check_hurwitz(a, 1e-9)?;

    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("real Schur decomposition did not converge".into()))?;
    let (u, t) = schur.unpack();
    // A = U T Uᵀ; with Y = Uᵀ P U the equation becomes T Y + Y Tᵀ = F, F = -Uᵀ Q U.
    let f = -(u.transpose() * q * &u);
    let y = solve_quasi_triangular_lyapunov(&t, &f)?;
    let p = &u * y * u.transpose();
    Ok(symmetrize(&p))
}

/// Diagonal block boundaries of a quasi-upper-triangular matrix.
fn schur_blocks(t: &Mat) -> Vec<(usize, usize)> {
    let m = t.nrows();
    let scale = t.amax().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < m {
        if i + 1 < m && t[(i + 1, i)].abs() > 1e-14 * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `T Y + Y Tᵀ = F` for quasi-upper-triangular `T`, block by block from the bottom right.
fn solve_quasi_triangular_lyapunov(t: &Mat, f: &Mat) -> Result<Mat> {
    let m = t.nrows();
    let blocks = schur_blocks(t);
    let mut y = Mat::zeros(m, m);
    for bi in (0..blocks.len()).rev() {
        let (ri, ni) = blocks[bi];
        for bj in (0..blocks.len()).rev() {
            let (rj, nj) = blocks[bj];
            let mut rhs = f.view((ri, rj), (ni, nj)).into_owned();
            let tail_i = m - (ri + ni);
            if tail_i > 0 {
                rhs -= t.view((ri, ri + ni), (ni, tail_i)) * y.view((ri + ni, rj), (tail_i, nj));
            }
            let tail_j = m - (rj + nj);
            if tail_j > 0 {
                rhs -= y.view((ri, rj + nj), (ni, tail_j)) * t.view((rj, rj + nj), (nj, tail_j)).transpose();
            }
            let tii = t.view((ri, ri), (ni, ni)).into_owned();
            let tjj = t.view((rj, rj), (nj, nj)).into_owned();
            let sol = small_sylvester(&tii, &tjj, &rhs)?;
            y.view_mut((ri, rj), (ni, nj)).copy_from(&sol);
        }
    }
    Ok(y)
}

/// Solves `T X + X Sᵀ = R` for blocks of size at most 2 by vectorisation.
fn small_sylvester(t: &Mat, s: &Mat, r: &Mat) -> Result<Mat> {
    let (ni, nj) = r.shape();
    let op = kron(&Mat::identity(nj, nj), t) + kron(s, &Mat::identity(ni, ni));
    let rhs = Vector::from_column_slice(r.as_slice());
    let x = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Sylvester block is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("Sylvester block is singular".into()));
    }
    Ok(Mat::from_column_slice(ni, nj, x.as_slice()))
}

/// Relative residual `‖A P + P Aᵀ + Q‖_F / ‖Q‖_F`.
pub fn lyapunov_residual(a: &Mat, p: &Mat, q: &Mat) -> f64 {
    let r = a * p + p * a.transpose() + q;
    r.norm() / q.norm().max(f64::MIN_POSITIVE)
}

/// Condition number in the 2-norm.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.singular_values();
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_simple_matrices() {
        assert!((sigma_max(&Mat::identity(5, 5)) - 1.0).abs() < 1e-14);
        let d = Mat::from_diagonal(&Vector::from_vec(vec![3.0, -4.0]));
        assert!((sigma_max(&d) - 4.0).abs() < 1e-14);
        assert!((sigma_min(&d) - 3.0).abs() < 1e-14);
        let shift = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]) * 5.0;
        assert!((sigma_max(&shift) - 5.0).abs() < 1e-13);
    }

    #[test]
    fn kron_shape_and_entries() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Mat::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(1, 2)], 0.0);
    }

    #[test]
    fn lyapunov_on_negative_identity() {
        let a = -Mat::identity(3, 3);
        let p = solve_continuous_lyapunov(&a, &Mat::identity(3, 3)).unwrap();
        assert!((p - Mat::identity(3, 3) * 0.5).amax() < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match solve_continuous_lyapunov(&a, &Mat::identity(2, 2)) {
            Err(Error::NotHurwitz { offending, .. }) => assert_eq!(offending.len(), 1),
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
    }

    #[test]
    fn lyapunov_with_complex_pair() {
        let a = Mat::from_row_slice(3, 3, &[-0.5, 2.0, 0.3, -2.0, -0.5, 0.1, 0.0, 0.4, -1.0]);
        let q = Mat::identity(3, 3);
        let p = solve_continuous_lyapunov(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &p, &q) < 1e-12);
        assert!(min_eig_sym(&p) > 0.0);
    }

    #[test]
    fn hurwitz_check_boundary() {
        assert!(check_hurwitz(&(-Mat::identity(2, 2)), 1e-9).is_ok());
        assert!(check_hurwitz(&Mat::zeros(2, 2), 1e-9).is_err());
    }
}
