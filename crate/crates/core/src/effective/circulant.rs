//! Doubly block circulant matrices and their DFT (block-)diagonalisation.

use nalgebra::DMatrix;
use num_traits::{Float, Zero};

use crate::channel::ChannelModel;
use crate::error::{OtfsError, Result};
use crate::grid::{adjoint, dft_matrix, kron, matmul, DelayDopplerFrame, FrameConfig, FrameKind, OtfsTransform};
use crate::scalar::{wrap, Real, C};

use super::effective_from_dense;

/// `Circ(A_0, .., A_{N-1})` where `A_n` is the `M x M` circulant generated by
/// column `n` of `a`. Then `A vec(b) = vec(a (*) b)`, the 2D circular
/// convolution.
pub fn doubly_block_circulant<T: Real>(a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (m, n) = a.shape();
    DMatrix::from_fn(m * n, m * n, |row, col| {
        let (p, r) = (row / m, row % m);
        let (q, c) = (col / m, col % m);
        a[(wrap(r as i64 - c as i64, m), wrap(p as i64 - q as i64, n))]
    })
}

/// Largest deviation of `a` from block-circulant structure with `M x M` blocks.
pub fn block_circulant_residual<T: Real>(a: &DMatrix<C<T>>, m: usize, n: usize) -> Result<T> {
    check_square(a, m * n)?;
    let mut worst = T::zero();
    for p in 0..n {
        for q in 0..n {
            let d = wrap(p as i64 - q as i64, n);
            for r in 0..m {
                for c in 0..m {
                    let dev = (a[(p * m + r, q * m + c)] - a[(d * m + r, c)]).norm();
                    worst = Float::max(worst, dev);
                }
            }
        }
    }
    Ok(worst)
}

fn check_square<T: Real>(a: &DMatrix<C<T>>, size: usize) -> Result<()> {
    if a.nrows() != size || a.ncols() != size {
        return Err(OtfsError::ShapeMismatch {
            expected: format!("{size}x{size}"),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    Ok(())
}

fn structural_bound<T: Real>(a: &DMatrix<C<T>>) -> T {
    let peak = a.iter().fold(T::one(), |acc, v| Float::max(acc, v.norm()));
    T::structural_tol() * peak
}

/// Result of [`sfft_diagonalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Diagonalization<T: Real> {
    /// Diagonal of `Sigma`, indexed `k * M + l`.
    pub diag: Vec<C<T>>,
    /// Largest off-diagonal modulus.
    pub residual: T,
}

/// `Sigma = (F_N kron F_M^H) A (F_N^H kron F_M)`.
///
/// For `A = doubly_block_circulant(a)` the diagonal is
/// `sqrt(MN) vec(F_M^H a F_N)`. Fails with [`OtfsError::NotStructured`] when
/// the off-diagonal residual exceeds the structural tolerance.
pub fn sfft_diagonalize<T: Real>(a: &DMatrix<C<T>>, m: usize, n: usize) -> Result<Diagonalization<T>> {
    check_square(a, m * n)?;
    let fm = dft_matrix::<T>(m)?;
    let fn_ = dft_matrix::<T>(n)?;
    let left = kron(&fn_, &adjoint(&fm));
    let right = kron(&adjoint(&fn_), &fm);
    let sigma = matmul(&matmul(&left, a), &right);
    let mut residual = T::zero();
    for (idx, v) in sigma.iter().enumerate() {
        if idx % (m * n) != idx / (m * n) {
            residual = Float::max(residual, v.norm());
        }
    }
    if residual > structural_bound(a) {
        return Err(OtfsError::NotStructured {
            pattern: "doubly block circulant",
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(Diagonalization {
        diag: sigma.diagonal().iter().copied().collect(),
        residual,
    })
}

/// Result of [`block_diagonalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonalization<T: Real> {
    pub blocks: Vec<DMatrix<C<T>>>,
    /// Largest modulus outside the diagonal blocks.
    pub residual: T,
}

/// `D = (F_N kron I_M) A (F_N^H kron I_M)` for a block-circulant `A`.
///
/// Applied to `H_eff` this inverts the time-to-delay-Doppler conjugation up to
/// the index reversal `n -> [-n]_N`: block `n` of the result is `H_{[-n]_N}`.
pub fn block_diagonalize<T: Real>(a: &DMatrix<C<T>>, m: usize, n: usize) -> Result<BlockDiagonalization<T>> {
    check_square(a, m * n)?;
    let d = effective_from_dense(a, m, n)?;
    let mut residual = T::zero();
    for col in 0..m * n {
        for row in 0..m * n {
            if row / m != col / m {
                residual = Float::max(residual, d[(row, col)].norm());
            }
        }
    }
    if residual > structural_bound(a) {
        return Err(OtfsError::NotStructured {
            pattern: "block circulant",
            residual: residual.to_f64_lossy(),
        });
    }
    let blocks = (0..n).map(|b| d.view((b * m, b * m), (m, m)).into_owned()).collect();
    Ok(BlockDiagonalization { blocks, residual })
}

/// Equalises a static (zero-Doppler) channel under FCP or FZS by element-wise
/// division in the 2D transform domain.
///
/// The received grid is the 2D circular convolution of the data with the
/// generator `a(l_i, 0) = h_i`, so `X = IDFT2(DFT2(Y) / DFT2(a))`. Bins with
/// `|sqrt(MN) DFT2(a)| < 1e-12` make the channel singular.
pub fn static_equalize<T: Real>(
    y: &DelayDopplerFrame<T>,
    model: &ChannelModel<T>,
    cfg: &FrameConfig,
) -> Result<DelayDopplerFrame<T>> {
    cfg.validate()?;
    if !matches!(cfg.kind, FrameKind::Fcp | FrameKind::Fzs) {
        return Err(OtfsError::Configuration(format!(
            "static equalisation needs FCP or FZS framing, got {}",
            cfg.kind
        )));
    }
    if !model.is_static() {
        return Err(OtfsError::InvalidInput(
            "static equalisation needs k_i = 0 on every tap".into(),
        ));
    }
    model.check_delays(cfg)?;
    let (m, n) = (cfg.m, cfg.n);
    if y.rows() != m || y.cols() != n {
        return Err(OtfsError::ShapeMismatch {
            expected: format!("{m}x{n}"),
            found: format!("{}x{}", y.rows(), y.cols()),
        });
    }
    let mut a = DMatrix::from_element(m, n, C::<T>::zero());
    for t in &model.taps {
        a[(t.delay, 0)] = a[(t.delay, 0)] + t.gain;
    }
    let tr = OtfsTransform::<T>::new(m, n)?;
    let scale = Float::sqrt(T::from_usize_lossy(m * n));
    let eig = tr.dft2(&a).map(|v| v * scale);
    let tol = T::lit(1e-12);
    let bins: Vec<(usize, usize)> = (0..n)
        .flat_map(|k| (0..m).map(move |l| (l, k)))
        .filter(|&(l, k)| eig[(l, k)].norm() < tol)
        .collect();
    if !bins.is_empty() {
        return Err(OtfsError::SingularChannel { bins });
    }
    let mut spec = tr.dft2(&y.data);
    spec.zip_apply(&eig, |s, e| *s = *s / e);
    Ok(DelayDopplerFrame::new(tr.idft2(&spec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelTap;
    use crate::grid::{ReferenceGrid, TimeFrequencyFrame};
    use crate::testutil::{random_c64, random_frame, rng};
    use num_complex::Complex;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn circ_conv(a: &DMatrix<C<f64>>, b: &DMatrix<C<f64>>) -> DMatrix<C<f64>> {
        let (m, n) = a.shape();
        DMatrix::from_fn(m, n, |l, k| {
            let mut acc = c(0.0, 0.0);
            for lp in 0..m {
                for kp in 0..n {
                    acc += a[(lp, kp)] * b[((l + m - lp) % m, (k + n - kp) % n)];
                }
            }
            acc
        })
    }

    #[test]
    fn delta_generator_is_identity() {
        let mut a = DMatrix::from_element(3, 4, c(0.0, 0.0));
        a[(0, 0)] = c(1.0, 0.0);
        let big = doubly_block_circulant(&a);
        assert_eq!(big, DMatrix::identity(12, 12).map(|v: f64| c(v, 0.0)));
    }

    #[test]
    fn product_is_circular_convolution() {
        let mut r = rng(1);
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let b = random_frame(&mut r, 2, 2).data;
        let big = doubly_block_circulant(&a);
        let got = &big * DMatrix::from_column_slice(4, 1, b.as_slice());
        let want = circ_conv(&a, &b);
        assert!(got.iter().zip(want.iter()).all(|(u, v)| (u - v).norm() < 1e-13));
    }

    #[test]
    fn diagonal_matches_sfft_of_generator() {
        let mut r = rng(2);
        let (m, n) = (4, 3);
        let a = random_frame(&mut r, m, n).data;
        let d = sfft_diagonalize(&doubly_block_circulant(&a), m, n).unwrap();
        let want = crate::grid::sfft(&TimeFrequencyFrame::new(a.clone())).unwrap();
        let s = (m as f64 * n as f64).sqrt();
        for (x, y) in d.diag.iter().zip(want.as_vec()) {
            assert!((x - y * s).norm() < 1e-12);
        }
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn non_circulant_is_rejected() {
        let mut r = rng(4);
        let a = DMatrix::from_fn(6, 6, |_, _| random_c64(&mut r));
        assert!(matches!(
            sfft_diagonalize(&a, 3, 2),
            Err(OtfsError::NotStructured { .. })
        ));
        assert!(matches!(
            block_diagonalize(&a, 3, 2),
            Err(OtfsError::NotStructured { .. })
        ));
        assert!(block_circulant_residual(&a, 3, 2).unwrap() > 0.1);
    }

    #[test]
    fn block_diagonalize_random_block_circulant() {
        let mut r = rng(5);
        let (m, n) = (3, 4);
        let gens: Vec<DMatrix<C<f64>>> = (0..3)
            .map(|_| DMatrix::from_fn(m, m, |_, _| random_c64(&mut r)))
            .collect();
        let mut a = DMatrix::from_element(m * n, m * n, c(0.0, 0.0));
        for p in 0..n {
            for q in 0..n {
                let g = (p + n - q) % n;
                if g < 3 {
                    a.view_mut((p * m, q * m), (m, m)).copy_from(&gens[g]);
                }
            }
        }
        assert!(block_circulant_residual(&a, m, n).unwrap() < 1e-15);
        let bd = block_diagonalize(&a, m, n).unwrap();
        assert!(bd.residual < 1e-12);
        // Block b equals sum_g G_g exp(-j 2 pi g b / N).
        for (b, blk) in bd.blocks.iter().enumerate() {
            let mut want = DMatrix::from_element(m, m, c(0.0, 0.0));
            for (g, gen) in gens.iter().enumerate() {
                let ph = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (g * b) as f64 / n as f64);
                want += gen * ph;
            }
            assert!((blk - want).iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn static_equalize_identity_and_singular() {
        let mut r = rng(6);
        let cfg = FrameConfig::fcp(4, 4, 2).unwrap();
        let y = random_frame(&mut r, 4, 4);
        let id = ChannelModel::identity(ReferenceGrid::Full);
        let x = static_equalize(&y, &id, &cfg).unwrap();
        assert!((x.data - &y.data).iter().all(|v| v.norm() < 1e-14));

        let null = ChannelModel::new(
            vec![
                ChannelTap::new(c(1.0, 0.0), 0, 0.0),
                ChannelTap::new(c(-1.0, 0.0), 2, 0.0),
            ],
            ReferenceGrid::Full,
        )
        .unwrap();
        match static_equalize(&y, &null, &cfg) {
            Err(OtfsError::SingularChannel { bins }) => assert!(bins.contains(&(0, 0))),
            other => panic!("expected singular channel, got {other:?}"),
        }
        let moving = ChannelModel::new(vec![ChannelTap::new(c(1.0, 0.0), 0, 1.0)], ReferenceGrid::Full).unwrap();
        assert!(static_equalize(&y, &moving, &cfg).is_err());
        assert!(static_equalize(&y, &id, &FrameConfig::rcp(4, 4, 2).unwrap()).is_err());
    }
}
