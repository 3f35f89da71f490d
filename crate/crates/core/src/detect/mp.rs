//! Message-passing detection on the sparse factor graph of `H_eff`.
//!
//! Each observation node treats the interference from all but one symbol as
//! Gaussian; symbol nodes return damped extrinsic probability vectors.

use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use super::Constellation;
use crate::effective::EffectiveChannel;
use crate::error::{OtfsError, Result};
use crate::scalar::{Real, C};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpConfig {
    pub max_iterations: usize,
    /// Weight of the new message in `p = d * p_new + (1 - d) * p_old`.
    pub damping: f64,
    /// Stop once no posterior probability moves by more than this.
    pub convergence_tol: f64,
}

impl Default for MpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            damping: 0.6,
            convergence_tol: 1e-4,
        }
    }
}

impl MpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(OtfsError::Configuration("MP needs at least one iteration".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(OtfsError::Configuration(format!(
                "MP damping {} outside (0, 1]",
                self.damping
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(OtfsError::Configuration(
                "MP convergence tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs message passing on `y = H x + w` and returns hard decisions.
///
/// `noise_var` is the complex noise variance. A zero variance is replaced by a
/// floor of `1e-12 * max|H|^2` so noiseless inputs stay finite.
pub fn mp_solve<T: Real>(
    h: &SparseMatrix<T>,
    y: &[C<T>],
    cons: &Constellation<T>,
    noise_var: T,
    cfg: &MpConfig,
) -> Result<Vec<C<T>>> {
    cfg.validate()?;
    if y.len() != h.nrows() {
        return Err(OtfsError::LengthMismatch {
            expected: h.nrows(),
            found: y.len(),
        });
    }
    if noise_var < T::zero() || !Float::is_finite(noise_var) {
        return Err(OtfsError::InvalidInput(
            "noise variance must be finite and non-negative".into(),
        ));
    }
    let q = cons.len();
    let pts = cons.points();
    let edges = h.entries();
    let ne = edges.len();
    let nv = h.ncols();
    let peak = edges.iter().fold(T::zero(), |a, e| Float::max(a, e.2.norm_sqr()));
    let floor = T::lit(1e-12) * peak;
    let noise = Float::max(noise_var, floor);

    // Edges are sorted by row; group them by column as well.
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (e, &(_, c, _)) in edges.iter().enumerate() {
        by_col[c].push(e);
    }
    let mut row_start = vec![0usize; h.nrows() + 1];
    for &(r, _, _) in edges {
        row_start[r + 1] += 1;
    }
    for r in 0..h.nrows() {
        row_start[r + 1] += row_start[r];
    }

    let damping = T::lit(cfg.damping);
    let tol = T::lit(cfg.convergence_tol);
    let uniform = T::one() / T::from_usize_lossy(q);
    let mut p = vec![uniform; ne * q];
    let mut post = vec![uniform; nv * q];
    let mut mean = vec![C::<T>::zero(); ne];
    let mut var = vec![T::zero(); ne];
    let mut mu = vec![C::<T>::zero(); ne];
    let mut sig = vec![T::zero(); ne];
    let mut ll: Vec<T> = Vec::new();
    let mut total = vec![T::zero(); q];
    let mut scratch = vec![T::zero(); q];

    for it in 0..cfg.max_iterations {
        for e in 0..ne {
            let probs = &p[e * q..(e + 1) * q];
            let mut m = C::<T>::zero();
            let mut s = T::zero();
            for (pa, a) in probs.iter().zip(pts) {
                m = m + a * *pa;
                s = s + *pa * a.norm_sqr();
            }
            mean[e] = m;
            var[e] = Float::max(s - m.norm_sqr(), T::zero());
        }
        for r in 0..h.nrows() {
            let span = row_start[r]..row_start[r + 1];
            let mut tm = C::<T>::zero();
            let mut tv = noise;
            for e in span.clone() {
                let g = edges[e].2;
                tm = tm + g * mean[e];
                tv = tv + g.norm_sqr() * var[e];
            }
            for e in span {
                let g = edges[e].2;
                mu[e] = tm - g * mean[e];
                sig[e] = Float::max(tv - g.norm_sqr() * var[e], floor);
            }
        }
        let mut change = T::zero();
        for (c, col_edges) in by_col.iter().enumerate() {
            if col_edges.is_empty() {
                continue;
            }
            total.iter_mut().for_each(|v| *v = T::zero());
            ll.clear();
            for &e in col_edges {
                let (r, _, g) = edges[e];
                for (a, pt) in pts.iter().enumerate() {
                    let v = -(y[r] - mu[e] - g * pt).norm_sqr() / sig[e];
                    total[a] = total[a] + v;
                    ll.push(v);
                }
            }
            for (j, &e) in col_edges.iter().enumerate() {
                for a in 0..q {
                    scratch[a] = total[a] - ll[j * q + a];
                }
                softmax(&mut scratch);
                let probs = &mut p[e * q..(e + 1) * q];
                for (old, new) in probs.iter_mut().zip(&scratch) {
                    *old = damping * *new + (T::one() - damping) * *old;
                }
            }
            scratch.copy_from_slice(&total);
            softmax(&mut scratch);
            for (a, v) in scratch.iter().enumerate() {
                if !Float::is_finite(*v) {
                    return Err(OtfsError::NumericalFailure { iteration: it });
                }
                let d = Float::abs(*v - post[c * q + a]);
                change = Float::max(change, d);
                post[c * q + a] = *v;
            }
        }
        if change < tol {
            break;
        }
    }
    Ok((0..nv)
        .map(|c| {
            let probs = &post[c * q..(c + 1) * q];
            let mut best = 0;
            for a in 1..q {
                if probs[a] > probs[best] {
                    best = a;
                }
            }
            pts[best]
        })
        .collect())
}

fn softmax<T: Real>(v: &mut [T]) {
    let top = v.iter().copied().fold(T::neg_infinity(), Float::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = Float::exp(*x - top);
        sum = sum + *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

/// MP detection on the data cells of `H_eff`; zero-suffix cells come back as zero.
pub fn mp_detect<T: Real>(
    h: &EffectiveChannel<T>,
    y: &[C<T>],
    cons: &Constellation<T>,
    noise_var: T,
    cfg: &MpConfig,
) -> Result<Vec<C<T>>> {
    if h.cfg.data_rows() == h.cfg.m {
        mp_solve(&h.matrix, y, cons, noise_var, cfg)
    } else {
        let cols = h.cfg.data_indices();
        let x = mp_solve(&h.matrix.select_columns(&cols)?, y, cons, noise_var, cfg)?;
        Ok(super::linear::expand(x, Some(cols), h.matrix.ncols()))
    }
}
