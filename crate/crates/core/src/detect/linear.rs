//! Dense ZF and MMSE detectors.
//!
//! These form the full matrix and are meant for small grids and as reference
//! solutions; Monte Carlo runs use [`super::TimeDomainEqualizer`].

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{Float, Zero};

use crate::effective::EffectiveChannel;
use crate::error::{OtfsError, Result};
use crate::scalar::{Real, C};

fn check_len<T: Real>(h: &DMatrix<C<T>>, y: &[C<T>]) -> Result<()> {
    if h.nrows() != y.len() {
        return Err(OtfsError::LengthMismatch {
            expected: h.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// LU solve of a square system, failing on numerically singular pivots.
fn solve_square<T: Real + RealField>(a: DMatrix<C<T>>, b: DVector<C<T>>) -> Result<DVector<C<T>>> {
    let n = a.nrows();
    let lu = a.lu();
    let u = lu.u();
    let pivots: Vec<T> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let largest = pivots.iter().copied().fold(T::zero(), Float::max);
    let floor = <T as Float>::epsilon() * T::from_usize_lossy(n.max(1)) * largest;
    if largest.is_zero() || pivots.iter().any(|&p| p <= floor) {
        return Err(OtfsError::SingularMatrix);
    }
    lu.solve(&b).ok_or(OtfsError::SingularMatrix)
}

/// Zero-forcing solution `H^+ y`.
///
/// Square systems are solved directly, wide ones take the minimum-norm
/// solution `H^H (H H^H)^{-1} y` and tall ones the least-squares solution
/// `(H^H H)^{-1} H^H y`.
pub fn zf_solve<T: Real + RealField>(h: &DMatrix<C<T>>, y: &[C<T>]) -> Result<Vec<C<T>>> {
    check_len(h, y)?;
    let yv = DVector::from_column_slice(y);
    let (r, c) = h.shape();
    let x = if r == c {
        solve_square(h.clone(), yv)?
    } else if r < c {
        let hh = h.adjoint();
        hh.clone() * solve_square(h * &hh, yv)?
    } else {
        let hh = h.adjoint();
        solve_square(&hh * h, hh * yv)?
    };
    Ok(x.as_slice().to_vec())
}

/// MMSE solution `H^H (H H^H + sigma2 I)^{-1} y`, evaluated in whichever of
/// the two push-through forms has the smaller system.
pub fn mmse_solve<T: Real + RealField>(h: &DMatrix<C<T>>, y: &[C<T>], sigma2: T) -> Result<Vec<C<T>>> {
    check_len(h, y)?;
    if !(sigma2 > T::zero()) {
        return Err(OtfsError::InvalidInput("MMSE needs a positive noise variance".into()));
    }
    let yv = DVector::from_column_slice(y);
    let (r, c) = h.shape();
    let hh = h.adjoint();
    let reg = C::new(sigma2, T::zero());
    let x = if r <= c {
        let g = h * &hh + DMatrix::from_diagonal_element(r, r, reg);
        hh * solve_square(g, yv)?
    } else {
        let g = &hh * h + DMatrix::from_diagonal_element(c, c, reg);
        solve_square(g, hh * yv)?
    };
    Ok(x.as_slice().to_vec())
}

/// Columns of `H_eff` that carry data, as a dense matrix.
pub(crate) fn data_matrix<T: Real>(h: &EffectiveChannel<T>) -> Result<(DMatrix<C<T>>, Option<Vec<usize>>)> {
    if h.cfg.data_rows() == h.cfg.m {
        Ok((h.to_dense(), None))
    } else {
        let cols = h.cfg.data_indices();
        Ok((h.matrix.select_columns(&cols)?.to_dense(), Some(cols)))
    }
}

pub(crate) fn expand<T: Real>(x: Vec<C<T>>, cols: Option<Vec<usize>>, len: usize) -> Vec<C<T>> {
    match cols {
        None => x,
        Some(cols) => {
            let mut out = vec![C::zero(); len];
            for (v, c) in x.into_iter().zip(cols) {
                out[c] = v;
            }
            out
        }
    }
}

/// ZF detection `x = H_eff^H (H_eff H_eff^H)^{-1} y` on the data cells.
pub fn zf_detect<T: Real + RealField>(h: &EffectiveChannel<T>, y: &[C<T>]) -> Result<Vec<C<T>>> {
    let (a, cols) = data_matrix(h)?;
    Ok(expand(zf_solve(&a, y)?, cols, h.matrix.ncols()))
}

/// MMSE detection `x = H_eff^H (H_eff H_eff^H + sigma2 I)^{-1} y` on the data cells.
pub fn mmse_detect<T: Real + RealField>(h: &EffectiveChannel<T>, y: &[C<T>], sigma2: T) -> Result<Vec<C<T>>> {
    let (a, cols) = data_matrix(h)?;
    Ok(expand(mmse_solve(&a, y, sigma2)?, cols, h.matrix.ncols()))
}
