//! Fast linear equalisation in the time domain.
//!
//! Because `H_eff = U H U^H` with `U = F_N kron I_M` unitary, ZF/MMSE on
//! `H_eff` equal ZF/MMSE on the time-domain matrix `H` followed by the same
//! transform. `H` has one entry per tap and row and only short-range (possibly
//! cyclic) couplings, so its Gram matrix is banded apart from a corner that a
//! small border block absorbs.

use nalgebra::DMatrix;
use num_traits::{Float, Zero};

use crate::channel::TimeChannelMatrix;
use crate::effective::effective_dims;
use crate::error::{OtfsError, Result};
use crate::grid::{DelayDopplerFrame, FrameKind, OtfsTransform};
use crate::scalar::{Real, C};
use crate::sparse::SparseMatrix;

/// Dense Cholesky factor, lower triangle, of a Hermitian positive definite matrix.
fn dense_cholesky<T: Real>(a: &DMatrix<C<T>>) -> Result<DMatrix<C<T>>> {
    let n = a.nrows();
    let scale = (0..n).fold(T::zero(), |m, i| Float::max(m, a[(i, i)].re));
    let floor = <T as Float>::epsilon() * T::from_usize_lossy(n.max(1)) * scale;
    let mut l = DMatrix::from_element(n, n, C::<T>::zero());
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d = d - l[(j, k)].norm_sqr();
        }
        if !(d > floor) {
            return Err(OtfsError::SingularMatrix);
        }
        let djj = Float::sqrt(d);
        l[(j, j)] = C::new(djj, T::zero());
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

fn dense_cholesky_solve<T: Real>(l: &DMatrix<C<T>>, b: &mut [C<T>]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[(k, i)].conj() * b[k];
        }
        b[i] = s / l[(i, i)].re;
    }
}

/// Lower-band Cholesky factor: `band[i * (w + 1) + d] = L(i, i - d)`.
#[derive(Clone, Debug)]
struct BandCholesky<T: Real> {
    n: usize,
    w: usize,
    band: Vec<C<T>>,
}

impl<T: Real> BandCholesky<T> {
    /// `lower[i * (w + 1) + d]` holds `A(i, i - d)`.
    fn factor(n: usize, w: usize, mut band: Vec<C<T>>) -> Result<Self> {
        let stride = w + 1;
        let scale = (0..n).fold(T::zero(), |m, i| Float::max(m, band[i * stride].re));
        let floor = <T as Float>::epsilon() * T::from_usize_lossy(n.max(1)) * scale;
        for i in 0..n {
            for j in i.saturating_sub(w)..=i {
                let mut s = band[i * stride + (i - j)];
                for k in i.saturating_sub(w)..j {
                    s = s - band[i * stride + (i - k)] * band[j * stride + (j - k)].conj();
                }
                if i == j {
                    if !(s.re > floor) {
                        return Err(OtfsError::SingularMatrix);
                    }
                    band[i * stride] = C::new(Float::sqrt(s.re), T::zero());
                } else {
                    band[i * stride + (i - j)] = s / band[j * stride].re;
                }
            }
        }
        Ok(Self { n, w, band })
    }

    fn solve(&self, b: &mut [C<T>]) {
        let stride = self.w + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(self.w)..i {
                s = s - self.band[i * stride + (i - k)] * b[k];
            }
            b[i] = s / self.band[i * stride].re;
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + self.w + 1).min(self.n) {
                s = s - self.band[k * stride + (k - i)].conj() * b[k];
            }
            b[i] = s / self.band[i * stride].re;
        }
    }
}

#[derive(Clone, Debug)]
enum BlockFactor<T: Real> {
    Dense(DMatrix<C<T>>),
    Bordered {
        interior: BandCholesky<T>,
        /// Interior-border coupling `B`, `ni x nb`, column-major.
        coupling: DMatrix<C<T>>,
        /// `A^{-1} B`.
        z: DMatrix<C<T>>,
        /// Cholesky factor of the Schur complement `D - B^H A^{-1} B`.
        schur: DMatrix<C<T>>,
    },
}

/// Solver for Hermitian positive definite systems that are block diagonal with
/// cyclically banded blocks.
///
/// Each block of size `s` with cyclic half-bandwidth `w` is split into the
/// first `s - w` indices (banded, no wrap-around) and the last `w` indices
/// (the border, which picks up every wrap-around coupling).
#[derive(Clone, Debug)]
pub struct BorderedBandedSolver<T: Real> {
    block: usize,
    factors: Vec<BlockFactor<T>>,
}

impl<T: Real> BorderedBandedSolver<T> {
    pub fn new(g: &SparseMatrix<T>, block: usize) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n || block == 0 || n % block != 0 {
            return Err(OtfsError::InvalidDimension(format!(
                "{}x{} matrix cannot be split into blocks of {block}",
                g.nrows(),
                g.ncols()
            )));
        }
        let nblocks = n / block;
        let mut per_block: Vec<Vec<(usize, usize, C<T>)>> = vec![Vec::new(); nblocks];
        for &(r, c, v) in g.entries() {
            if r / block != c / block {
                return Err(OtfsError::NotStructured {
                    pattern: "block diagonal",
                    residual: v.norm().to_f64_lossy(),
                });
            }
            per_block[r / block].push((r % block, c % block, v));
        }
        let factors = per_block
            .into_iter()
            .map(|entries| Self::factor_block(block, &entries))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { block, factors })
    }

    fn factor_block(s: usize, entries: &[(usize, usize, C<T>)]) -> Result<BlockFactor<T>> {
        let w = entries
            .iter()
            .map(|&(r, c, _)| {
                let d = r.abs_diff(c);
                d.min(s - d)
            })
            .max()
            .unwrap_or(0);
        if 3 * w + 1 >= s {
            let mut a = DMatrix::from_element(s, s, C::<T>::zero());
            for &(r, c, v) in entries {
                a[(r, c)] = v;
            }
            return Ok(BlockFactor::Dense(dense_cholesky(&a)?));
        }
        let ni = s - w;
        let nb = w;
        let stride = w + 1;
        let mut band = vec![C::<T>::zero(); ni * stride];
        let mut coupling = DMatrix::from_element(ni, nb, C::<T>::zero());
        let mut border = DMatrix::from_element(nb, nb, C::<T>::zero());
        for &(r, c, v) in entries {
            match (r < ni, c < ni) {
                (true, true) => {
                    if r >= c {
                        if r - c > w {
                            return Err(OtfsError::NotStructured {
                                pattern: "cyclically banded",
                                residual: v.norm().to_f64_lossy(),
                            });
                        }
                        band[r * stride + (r - c)] = v;
                    }
                }
                (true, false) => coupling[(r, c - ni)] = v,
                (false, false) => border[(r - ni, c - ni)] = v,
                (false, true) => {}
            }
        }
        let interior = BandCholesky::factor(ni, w, band)?;
        let mut z = coupling.clone();
        for j in 0..nb {
            let mut col: Vec<C<T>> = z.column(j).iter().copied().collect();
            interior.solve(&mut col);
            z.column_mut(j).iter_mut().zip(col).for_each(|(d, v)| *d = v);
        }
        let mut schur = border;
        for a in 0..nb {
            for b in 0..nb {
                let mut s = C::zero();
                for i in 0..ni {
                    s = s + coupling[(i, a)].conj() * z[(i, b)];
                }
                schur[(a, b)] = schur[(a, b)] - s;
            }
        }
        Ok(BlockFactor::Bordered {
            interior,
            coupling,
            z,
            schur: dense_cholesky(&schur)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.block * self.factors.len()
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &[C<T>]) -> Result<Vec<C<T>>> {
        if b.len() != self.dim() {
            return Err(OtfsError::LengthMismatch {
                expected: self.dim(),
                found: b.len(),
            });
        }
        let mut x = b.to_vec();
        for (blk, f) in x.chunks_mut(self.block).zip(&self.factors) {
            match f {
                BlockFactor::Dense(l) => dense_cholesky_solve(l, blk),
                BlockFactor::Bordered {
                    interior,
                    coupling,
                    z,
                    schur,
                } => {
                    let ni = interior.n;
                    let (head, tail) = blk.split_at_mut(ni);
                    interior.solve(head);
                    for (a, t) in tail.iter_mut().enumerate() {
                        let mut s = C::zero();
                        for i in 0..ni {
                            s = s + coupling[(i, a)].conj() * head[i];
                        }
                        *t = *t - s;
                    }
                    dense_cholesky_solve(schur, tail);
                    for i in 0..ni {
                        let mut s = C::zero();
                        for (a, t) in tail.iter().enumerate() {
                            s = s + z[(i, a)] * *t;
                        }
                        head[i] = head[i] - s;
                    }
                }
            }
        }
        Ok(x)
    }
}

/// ZF (`noise_var = 0`) or MMSE equaliser for one channel realisation,
/// working on the stripped receive vector.
#[derive(Clone, Debug)]
pub struct TimeDomainEqualizer<T: Real> {
    h: SparseMatrix<T>,
    cols: Vec<usize>,
    len: usize,
    m: usize,
    n: usize,
    solver: BorderedBandedSolver<T>,
}

impl<T: Real> TimeDomainEqualizer<T> {
    pub fn new(h: &TimeChannelMatrix<T>, noise_var: T) -> Result<Self> {
        if noise_var < T::zero() || !Float::is_finite(noise_var) {
            return Err(OtfsError::InvalidInput(
                "noise variance must be finite and non-negative".into(),
            ));
        }
        let cfg = h.cfg;
        let (m, n) = effective_dims(&cfg);
        let rows = cfg.data_rows();
        let cols: Vec<usize> = if rows == cfg.m {
            (0..m * n).collect()
        } else {
            cfg.data_indices()
        };
        let hd = h.matrix.select_columns(&cols)?;
        let gram = hd.gram();
        let nc = cols.len();
        let diag = (0..nc).map(|i| (i, i, C::new(noise_var, T::zero())));
        let g = SparseMatrix::from_triplets(nc, nc, gram.entries().iter().copied().chain(diag))?;
        let block = match cfg.kind {
            FrameKind::Fcp => m,
            FrameKind::Fzs => rows,
            _ => nc,
        };
        Ok(Self {
            solver: BorderedBandedSolver::new(&g, block)?,
            h: hd,
            cols,
            len: m * n,
            m,
            n,
        })
    }

    /// Time-domain estimate of the transmitted (un-prefixed) samples; zero
    /// suffix positions are zero.
    pub fn equalize(&self, r: &[C<T>]) -> Result<Vec<C<T>>> {
        let rhs = self.h.adjoint_mul_vec(r)?;
        let x = self.solver.solve(&rhs)?;
        let mut out = vec![C::zero(); self.len];
        for (v, &c) in x.into_iter().zip(&self.cols) {
            out[c] = v;
        }
        Ok(out)
    }

    /// Delay-Doppler estimate; `tr` must match the effective grid.
    pub fn detect(&self, r: &[C<T>], tr: &OtfsTransform<T>) -> Result<DelayDopplerFrame<T>> {
        if tr.m() != self.m || tr.n() != self.n {
            return Err(OtfsError::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.n),
                found: format!("{}x{}", tr.m(), tr.n()),
            });
        }
        tr.demodulate(&self.equalize(r)?)
    }
}
