//! Effective delay-Doppler channel `H_eff = (F_N kron I_M) H (F_N^H kron I_M)`,
//! its closed forms per framing, the common phase term and the noiseless
//! input-output relation.
//!
//! Every framing obeys the same twisted convolution
//! `Y(l, k) = sum_i h_i Gamma_i(l, k) X([l - l_i]_M, [k - k_i]_N)`;
//! only the phase `Gamma_i` differs (see [`gamma`]). RFCP works on the
//! extended `(M + L_cp) x N` grid as a reduced-CP frame.

mod circulant;

pub use circulant::{
    block_circulant_residual, block_diagonalize, doubly_block_circulant, sfft_diagonalize, static_equalize,
    BlockDiagonalization, Diagonalization,
};

use nalgebra::DMatrix;
use num_traits::{Float, One, Zero};

use crate::channel::{zero_suffix_columns, ChannelModel, ChannelTap, TimeChannelMatrix};
use crate::error::{OtfsError, Result};
use crate::grid::{dft_matrix, DelayDopplerFrame, FrameConfig, FrameKind};
use crate::scalar::{root_of_unity, wrap, Real, C};
use crate::sparse::SparseMatrix;

/// `H_eff` with row/column index `k * M + l`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannel<T: Real> {
    pub matrix: SparseMatrix<T>,
    pub cfg: FrameConfig,
}

/// Delay-Doppler grid on which `cfg`'s effective channel acts.
pub fn effective_dims(cfg: &FrameConfig) -> (usize, usize) {
    let eq = cfg.rcp_equivalent();
    (eq.m, eq.n)
}

impl<T: Real> EffectiveChannel<T> {
    pub fn dims(&self) -> (usize, usize) {
        effective_dims(&self.cfg)
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        self.matrix.to_dense()
    }

    /// `vec(Y) = H_eff vec(X)`.
    pub fn apply(&self, x: &DelayDopplerFrame<T>) -> Result<DelayDopplerFrame<T>> {
        let (m, n) = self.dims();
        if x.rows() != m || x.cols() != n {
            return Err(OtfsError::ShapeMismatch {
                expected: format!("{m}x{n}"),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        DelayDopplerFrame::from_vec(m, n, self.matrix.mul_vec(x.as_vec())?)
    }

    /// Copy with the zero-suffix input columns cleared (FZS only; identity
    /// otherwise).
    pub fn with_suffix_columns_zeroed(&self) -> Result<Self> {
        Ok(Self {
            matrix: zero_suffix_columns(&self.matrix, &self.cfg)?,
            cfg: self.cfg,
        })
    }

    /// Maximum number of non-zeros in any row.
    pub fn max_row_nnz(&self) -> usize {
        self.matrix.row_nnz().into_iter().max().unwrap_or(0)
    }
}

/// Dense conjugation `(F_N kron I_M) H (F_N^H kron I_M)` of an `MN x MN` matrix.
pub fn effective_from_dense<T: Real>(h: &DMatrix<C<T>>, m: usize, n: usize) -> Result<DMatrix<C<T>>> {
    let mn = m * n;
    if h.nrows() != mn || h.ncols() != mn {
        return Err(OtfsError::ShapeMismatch {
            expected: format!("{mn}x{mn}"),
            found: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let f = dft_matrix::<T>(n)?;
    // Left factor acts on the Doppler index of every column.
    let mut left = DMatrix::from_element(mn, mn, C::<T>::zero());
    for j in 0..mn {
        for k in 0..n {
            for l in 0..m {
                let mut acc = C::<T>::zero();
                for kp in 0..n {
                    acc = acc + f[(k, kp)] * h[(kp * m + l, j)];
                }
                left[(k * m + l, j)] = acc;
            }
        }
    }
    // Right factor: (F_N^H kron I_M)(k' M + l, k M + l) = conj(F_N(k, k')).
    let mut out = DMatrix::from_element(mn, mn, C::<T>::zero());
    for r in 0..mn {
        for k in 0..n {
            for l in 0..m {
                let mut acc = C::<T>::zero();
                for kp in 0..n {
                    acc = acc + left[(r, kp * m + l)] * f[(k, kp)].conj();
                }
                out[(r, k * m + l)] = acc;
            }
        }
    }
    Ok(out)
}

/// Effective channel by explicit conjugation of the time-domain matrix.
///
/// Entries below `eps * MN * max|H|` are dropped as rounding residue.
pub fn effective_from_time<T: Real>(h: &TimeChannelMatrix<T>) -> Result<EffectiveChannel<T>> {
    let (m, n) = effective_dims(&h.cfg);
    let dense = effective_from_dense(&h.to_dense(), m, n)?;
    let peak = dense.iter().fold(T::zero(), |a, v| Float::max(a, v.norm()));
    let tol = T::epsilon() * T::from_usize_lossy(m * n) * peak;
    Ok(EffectiveChannel {
        matrix: SparseMatrix::from_dense(&dense, tol),
        cfg: h.cfg,
    })
}

/// Taps with their native integer Doppler bins.
fn integer_taps<T: Real>(model: &ChannelModel<T>, cfg: &FrameConfig) -> Result<Vec<(C<T>, usize, i64)>> {
    cfg.validate()?;
    model.check_delays(cfg)?;
    let ks = model.integer_dopplers(cfg)?;
    Ok(model.taps.iter().zip(ks).map(|(t, k)| (t.gain, t.delay, k)).collect())
}

/// Assembles `Circ[G_0, .., G_{N-1}]`: block `(p, q)` is `G_{[p - q]_N}`.
fn block_circulant<T: Real>(blocks: &[Vec<(usize, usize, C<T>)>], m: usize) -> Result<SparseMatrix<T>> {
    let n = blocks.len();
    let mut trip = Vec::new();
    for p in 0..n {
        for q in 0..n {
            for &(r, c, v) in &blocks[wrap(p as i64 - q as i64, n)] {
                trip.push((p * m + r, q * m + c, v));
            }
        }
    }
    SparseMatrix::from_triplets(m * n, m * n, trip)
}

/// Sparse `H_eff` assembled directly from the taps.
///
/// * RCP/RZP/RFCP: `sum_i h_i T_i` with `T_i(kM + l, [l - l_i]_M + M[k - k_i]_N)
///   = z_i^{[l - l_i]_M}`, times `exp(-j 2 pi k / N)` when `l < l_i`.
/// * FCP: `Circ[G_0, ..]` where only `G_{[k_i]_N}` receives tap `i`, at
///   `(l, [l - l_i]_M)` with phase `exp(j 2 pi k_i (L_cp + l - l_i) / ((M + L_cp) N))`.
/// * FZS: `Circ[Omega_0, ..]`, like FCP with `L_cp = 0` but only for `l >= l_i`.
pub fn heff_closed_form<T: Real>(model: &ChannelModel<T>, cfg: &FrameConfig) -> Result<EffectiveChannel<T>> {
    let taps = integer_taps(model, cfg)?;
    let (m, n) = effective_dims(cfg);
    let mn = m * n;
    let matrix = match cfg.kind {
        FrameKind::Rcp | FrameKind::Rzp | FrameKind::Rfcp => {
            let mut trip = Vec::with_capacity(taps.len() * mn);
            for &(h, li, ki) in &taps {
                for k in 0..n {
                    for l in 0..m {
                        let lw = wrap(l as i64 - li as i64, m);
                        let q = lw + m * wrap(k as i64 - ki, n);
                        let mut v = h * root_of_unity::<T>(ki * lw as i64, mn);
                        if l < li {
                            v = v * root_of_unity::<T>(-(k as i64), n);
                        }
                        trip.push((k * m + l, q, v));
                    }
                }
            }
            SparseMatrix::from_triplets(mn, mn, trip)?
        }
        FrameKind::Fcp | FrameKind::Fzs => {
            let (lcp, len) = if cfg.kind == FrameKind::Fcp {
                (cfg.cp_len, (m + cfg.cp_len) * n)
            } else {
                (0, mn)
            };
            let mut blocks = vec![Vec::new(); n];
            for &(h, li, ki) in &taps {
                let g = &mut blocks[wrap(ki, n)];
                for l in 0..m {
                    if cfg.kind == FrameKind::Fzs && l < li {
                        continue;
                    }
                    let e = (lcp + l) as i64 - li as i64;
                    g.push((l, wrap(l as i64 - li as i64, m), h * root_of_unity::<T>(ki * e, len)));
                }
            }
            block_circulant(&blocks, m)?
        }
    };
    Ok(EffectiveChannel { matrix, cfg: *cfg })
}

/// Phase factor of one tap at one output cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseTerm<T: Real> {
    /// Unit-modulus phase.
    Unit(C<T>),
    /// No contribution: the shifted input lies in the zero suffix.
    Zero,
}

impl<T: Real> PhaseTerm<T> {
    /// The multiplier, zero for [`PhaseTerm::Zero`].
    pub fn value(&self) -> C<T> {
        match self {
            PhaseTerm::Unit(v) => *v,
            PhaseTerm::Zero => C::zero(),
        }
    }
}

/// `Gamma_i(l, k)` for a tap whose Doppler is an integer number of native
/// bins of `cfg` (for RFCP, `(l, k)` index the extended grid).
///
/// * RCP/RZP/RFCP: `z_i^{[l - l_i]_M} Lambda_i(l, k)`, `z_i = exp(j 2 pi k_i / (MN))`,
///   `Lambda_i = exp(-j 2 pi k / N)` if `l < l_i` and 1 otherwise.
/// * FCP: `exp(j 2 pi k_i (L_cp + l - l_i) / ((M + L_cp) N))`.
/// * FZS: `exp(j 2 pi k_i (l - l_i) / (MN))` for `l >= l_i`, zero weight below.
pub fn gamma<T: Real>(cfg: &FrameConfig, tap: &ChannelTap<T>, l: usize, k: usize) -> Result<PhaseTerm<T>> {
    let (m, n) = effective_dims(cfg);
    if l >= m || k >= n {
        return Err(OtfsError::InvalidInput(format!(
            "cell ({l}, {k}) outside the {m}x{n} grid"
        )));
    }
    let kf = tap.doppler.to_f64_lossy();
    let ki = kf.round();
    if (kf - ki).abs() > 1e-9 {
        return Err(OtfsError::FractionalDoppler { tap: 0, doppler: kf });
    }
    let ki = ki as i64;
    let li = tap.delay as i64;
    let l = l as i64;
    Ok(match cfg.kind {
        FrameKind::Rcp | FrameKind::Rzp | FrameKind::Rfcp => {
            let mut v = root_of_unity::<T>(ki * wrap(l - li, m) as i64, m * n);
            if l < li {
                v = v * root_of_unity::<T>(-(k as i64), n);
            }
            PhaseTerm::Unit(v)
        }
        FrameKind::Fcp => PhaseTerm::Unit(root_of_unity(ki * (cfg.cp_len as i64 + l - li), (m + cfg.cp_len) * n)),
        FrameKind::Fzs => {
            if l >= li {
                PhaseTerm::Unit(root_of_unity(ki * (l - li), m * n))
            } else {
                PhaseTerm::Zero
            }
        }
    })
}

/// Noiseless received grid from the twisted-convolution relation.
///
/// For RFCP `x` is the extended `(M + L_cp) x N` grid and so is the output.
pub fn io_response<T: Real>(
    x: &DelayDopplerFrame<T>,
    model: &ChannelModel<T>,
    cfg: &FrameConfig,
) -> Result<DelayDopplerFrame<T>> {
    let taps = integer_taps(model, cfg)?;
    let (m, n) = effective_dims(cfg);
    if x.rows() != m || x.cols() != n {
        return Err(OtfsError::ShapeMismatch {
            expected: format!("{m}x{n}"),
            found: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    let mut y = DelayDopplerFrame::zeros(m, n);
    for &(h, li, ki) in &taps {
        let tap = ChannelTap::new(h, li, T::lit(ki as f64));
        for k in 0..n {
            let ks = wrap(k as i64 - ki, n);
            for l in 0..m {
                let g = gamma(cfg, &tap, l, k)?;
                if let PhaseTerm::Unit(v) = g {
                    let ls = wrap(l as i64 - li as i64, m);
                    y.data[(l, k)] = y.data[(l, k)] + h * v * x.data[(ls, ks)];
                }
            }
        }
    }
    Ok(y)
}

/// `|Gamma| - 1` over every cell, for property checks.
pub fn max_gamma_modulus_error<T: Real>(cfg: &FrameConfig, tap: &ChannelTap<T>) -> Result<T> {
    let (m, n) = effective_dims(cfg);
    let mut worst = T::zero();
    for k in 0..n {
        for l in 0..m {
            if let PhaseTerm::Unit(v) = gamma(cfg, tap, l, k)? {
                worst = Float::max(worst, Float::abs(v.norm() - T::one()));
            }
        }
    }
    Ok(worst)
}

/// Identity effective channel for `cfg`'s grid.
pub fn identity_effective<T: Real>(cfg: &FrameConfig) -> EffectiveChannel<T> {
    let (m, n) = effective_dims(cfg);
    EffectiveChannel {
        matrix: SparseMatrix::identity(m * n),
        cfg: *cfg,
    }
}

impl<T: Real> PhaseTerm<T> {
    pub fn is_unit(&self) -> bool {
        matches!(self, PhaseTerm::Unit(v) if Float::abs(v.norm() - T::one()) < T::structural_tol())
    }

    pub fn one() -> Self {
        PhaseTerm::Unit(C::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_time_channel;
    use crate::grid::ReferenceGrid;
    use crate::testutil::{example_model, random_frame, rng};
    use num_complex::Complex;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn dense_eq(a: &DMatrix<C<f64>>, want: &[(usize, usize, C<f64>)], tol: f64) {
        let mut expect = DMatrix::from_element(a.nrows(), a.ncols(), c(0.0, 0.0));
        for &(r, col, v) in want {
            expect[(r, col)] = v;
        }
        let d = (a - &expect).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(d <= tol, "deviation {d}\n{a}");
    }

    fn rcp_example() -> Vec<(usize, usize, C<f64>)> {
        vec![
            (0, 0, c(1.0, 0.0)),
            (1, 1, c(1.0, 0.0)),
            (2, 2, c(1.0, 0.0)),
            (3, 3, c(1.0, 0.0)),
            (0, 3, c(0.0, 0.5)),
            (1, 2, c(0.5, 0.0)),
            (2, 1, c(0.0, -0.5)),
            (3, 0, c(0.5, 0.0)),
        ]
    }

    #[test]
    fn rcp_example_effective() {
        let model = example_model(ReferenceGrid::Reduced);
        let cfg = FrameConfig::rcp(2, 2, 1).unwrap();
        let h = build_time_channel(&model, &cfg).unwrap();
        dense_eq(&effective_from_time(&h).unwrap().to_dense(), &rcp_example(), 1e-12);
        dense_eq(
            &heff_closed_form(&model, &cfg).unwrap().to_dense(),
            &rcp_example(),
            1e-15,
        );
    }

    #[test]
    fn fcp_example_effective() {
        let model = example_model(ReferenceGrid::Full);
        let cfg = FrameConfig::fcp(2, 2, 2).unwrap();
        let q = 0.5 * Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let want = vec![
            (0, 0, c(1.0, 0.0)),
            (1, 1, c(1.0, 0.0)),
            (2, 2, c(1.0, 0.0)),
            (3, 3, c(1.0, 0.0)),
            (0, 3, q),
            (1, 2, c(0.0, 0.5)),
            (2, 1, q),
            (3, 0, c(0.0, 0.5)),
        ];
        let h = build_time_channel(&model, &cfg).unwrap();
        dense_eq(&effective_from_time(&h).unwrap().to_dense(), &want, 1e-12);
        dense_eq(&heff_closed_form(&model, &cfg).unwrap().to_dense(), &want, 1e-15);
    }

    #[test]
    fn fzs_example_effective_masked() {
        let model = example_model(ReferenceGrid::Reduced);
        let cfg = FrameConfig::fzs(2, 2, 1).unwrap();
        let h = build_time_channel(&model, &cfg)
            .unwrap()
            .with_suffix_columns_zeroed()
            .unwrap();
        let want = vec![
            (0, 0, c(1.0, 0.0)),
            (2, 2, c(1.0, 0.0)),
            (1, 2, c(0.5, 0.0)),
            (3, 0, c(0.5, 0.0)),
        ];
        dense_eq(&effective_from_time(&h).unwrap().to_dense(), &want, 1e-12);
        let closed = heff_closed_form(&model, &cfg)
            .unwrap()
            .with_suffix_columns_zeroed()
            .unwrap();
        dense_eq(&closed.to_dense(), &want, 1e-15);
    }

    #[test]
    fn gamma_examples() {
        let tap = ChannelTap::new(c(0.5, 0.0), 1, 1.0);
        let rcp = FrameConfig::rcp(2, 2, 1).unwrap();
        assert!((gamma(&rcp, &tap, 0, 0).unwrap().value() - c(0.0, 1.0)).norm() < 1e-15);
        assert!((gamma(&rcp, &tap, 0, 1).unwrap().value() - c(0.0, -1.0)).norm() < 1e-15);
        let fcp = FrameConfig::fcp(2, 2, 2).unwrap();
        let e = Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        for k in 0..2 {
            assert!((gamma(&fcp, &tap, 0, k).unwrap().value() - e).norm() < 1e-15);
        }
        let fzs = FrameConfig::fzs(2, 2, 1).unwrap();
        assert_eq!(gamma(&fzs, &tap, 0, 0).unwrap(), PhaseTerm::Zero);
        assert!(gamma(&fzs, &tap, 1, 0).unwrap().is_unit());
        assert!(gamma(&rcp, &tap, 2, 0).is_err());
    }

    #[test]
    fn identity_channel_response() {
        let mut r = rng(3);
        let x = random_frame(&mut r, 4, 4);
        for cfg in [FrameConfig::rcp(4, 4, 1).unwrap(), FrameConfig::fcp(4, 4, 1).unwrap()] {
            let id = ChannelModel::identity(cfg.native_grid());
            assert_eq!(io_response(&x, &id, &cfg).unwrap(), x);
            let h = build_time_channel(&id, &cfg).unwrap();
            let e = effective_from_time(&h).unwrap().to_dense();
            assert!((e - DMatrix::identity(16, 16).map(|v: f64| c(v, 0.0)))
                .iter()
                .all(|v| v.norm() < 1e-14));
        }
    }

    #[test]
    fn io_response_matches_closed_form_product() {
        let mut r = rng(8);
        let model = example_model(ReferenceGrid::Reduced);
        let cfg = FrameConfig::rcp(4, 4, 1).unwrap();
        let x = random_frame(&mut r, 4, 4);
        let y = io_response(&x, &model, &cfg).unwrap();
        let y2 = heff_closed_form(&model, &cfg).unwrap().apply(&x).unwrap();
        assert!((y.data - y2.data).iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn effective_nonzeros_per_row() {
        let model = example_model(ReferenceGrid::Reduced);
        let cfg = FrameConfig::rcp(8, 8, 2).unwrap();
        let e = heff_closed_form(&model, &cfg).unwrap();
        assert!(e.matrix.row_nnz().iter().all(|&k| k == 2));
        assert_eq!(e.max_row_nnz(), 2);
    }

    #[test]
    fn shape_checks() {
        assert!(effective_from_dense(&DMatrix::<C<f64>>::zeros(3, 4), 2, 2).is_err());
        let cfg = FrameConfig::rcp(4, 4, 1).unwrap();
        let model = example_model(ReferenceGrid::Reduced);
        let x = DelayDopplerFrame::<f64>::zeros(3, 4);
        assert!(io_response(&x, &model, &cfg).is_err());
        assert_eq!(identity_effective::<f64>(&cfg).matrix.nnz(), 16);
        assert_eq!(PhaseTerm::<f64>::one().value(), c(1.0, 0.0));
    }
}
