//! Frame containers and the unitary transforms between the delay-Doppler,
//! time-frequency and time domains.
//!
//! Grids are `M x N` matrices: rows are delay bins `l` (or subcarriers `m`),
//! columns are Doppler bins `k` (or time slots `n`). Vectorisation is
//! column-major, so the delay index runs fastest and entry `(l, k)` sits at
//! vector index `k * M + l`. This is also nalgebra's native storage order.
//!
//! Every DFT here is the unitary one, `F(a, b) = exp(-j 2 pi a b / n) / sqrt(n)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{Float, Zero};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::scalar::{root_of_unity, Real, C};

/// Prefix/suffix arrangement of an OTFS frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    /// One cyclic prefix ahead of the whole `MN`-sample frame.
    #[serde(rename = "RCP")]
    Rcp,
    /// Zero padding after the whole frame, folded back at the receiver.
    #[serde(rename = "RZP")]
    Rzp,
    /// One cyclic prefix ahead of each of the `N` blocks of `M` samples.
    #[serde(rename = "FCP")]
    Fcp,
    /// Last `L_zs` delay rows left empty, acting as a per-block guard.
    #[serde(rename = "FZS")]
    Fzs,
    /// Full-CP frame with an extra reduced CP prepended to the whole frame.
    #[serde(rename = "RFCP")]
    Rfcp,
}

impl FrameKind {
    pub const ALL: [FrameKind; 5] = [
        FrameKind::Rcp,
        FrameKind::Rzp,
        FrameKind::Fcp,
        FrameKind::Fzs,
        FrameKind::Rfcp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FrameKind::Rcp => "RCP",
            FrameKind::Rzp => "RZP",
            FrameKind::Fcp => "FCP",
            FrameKind::Fzs => "FZS",
            FrameKind::Rfcp => "RFCP",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which frame length the integer Doppler bins of a channel model refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceGrid {
    /// `MN` samples (reduced prefix frames).
    #[serde(rename = "RCP")]
    Reduced,
    /// `(M + L_cp) N` samples (full prefix frames).
    #[serde(rename = "FCP")]
    Full,
}

/// Frame geometry plus prefix/suffix configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub kind: FrameKind,
    /// Delay bins (subcarriers).
    #[serde(rename = "M")]
    pub m: usize,
    /// Doppler bins (subsymbols).
    #[serde(rename = "N")]
    pub n: usize,
    /// Prefix length in samples.
    #[serde(rename = "Lcp", default)]
    pub cp_len: usize,
    /// Zero-suffix length in samples.
    #[serde(rename = "Lzs", default)]
    pub zs_len: usize,
}

impl FrameConfig {
    pub fn new(kind: FrameKind, m: usize, n: usize, cp_len: usize, zs_len: usize) -> Result<Self> {
        let cfg = FrameConfig {
            kind,
            m,
            n,
            cp_len,
            zs_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rcp(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        Self::new(FrameKind::Rcp, m, n, cp_len, 0)
    }

    pub fn rzp(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        Self::new(FrameKind::Rzp, m, n, cp_len, 0)
    }

    pub fn fcp(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        Self::new(FrameKind::Fcp, m, n, cp_len, 0)
    }

    pub fn fzs(m: usize, n: usize, zs_len: usize) -> Result<Self> {
        Self::new(FrameKind::Fzs, m, n, 0, zs_len)
    }

    pub fn rfcp(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        Self::new(FrameKind::Rfcp, m, n, cp_len, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(OtfsError::InvalidDimension(format!(
                "M and N must be positive, got M={} N={}",
                self.m, self.n
            )));
        }
        if self.kind == FrameKind::Fzs && self.zs_len >= self.m {
            return Err(OtfsError::Configuration(format!(
                "zero suffix L_zs={} must be shorter than M={}",
                self.zs_len, self.m
            )));
        }
        Ok(())
    }

    /// Number of delay-Doppler grid cells, `MN`.
    pub fn grid_len(&self) -> usize {
        self.m * self.n
    }

    /// Length of the frame whose samples define the native Doppler resolution.
    pub fn native_frame_len(&self) -> usize {
        match self.kind {
            FrameKind::Rcp | FrameKind::Rzp | FrameKind::Fzs => self.m * self.n,
            FrameKind::Fcp | FrameKind::Rfcp => (self.m + self.cp_len) * self.n,
        }
    }

    /// Frame length that `grid` refers to under this geometry.
    pub fn reference_frame_len(&self, grid: ReferenceGrid) -> usize {
        match grid {
            ReferenceGrid::Reduced => self.m * self.n,
            ReferenceGrid::Full => (self.m + self.cp_len) * self.n,
        }
    }

    /// Reference grid matching [`Self::native_frame_len`].
    pub fn native_grid(&self) -> ReferenceGrid {
        match self.kind {
            FrameKind::Fcp | FrameKind::Rfcp => ReferenceGrid::Full,
            _ => ReferenceGrid::Reduced,
        }
    }

    /// Samples on air after framing.
    pub fn transmit_len(&self) -> usize {
        let mn = self.m * self.n;
        match self.kind {
            FrameKind::Rcp | FrameKind::Rzp => mn + self.cp_len,
            FrameKind::Fcp => (self.m + self.cp_len) * self.n,
            FrameKind::Fzs => mn,
            FrameKind::Rfcp => (self.m + self.cp_len) * self.n + self.cp_len,
        }
    }

    /// Index into the framed signal where the Doppler phase ramp starts at zero.
    ///
    /// Reduced-CP frames reference the first data sample; every other framing
    /// references the first transmitted sample.
    pub fn doppler_origin(&self) -> usize {
        match self.kind {
            FrameKind::Rcp | FrameKind::Rfcp => self.cp_len,
            _ => 0,
        }
    }

    /// Largest tap delay (in samples) the framing absorbs without inter-frame leakage.
    pub fn max_supported_delay(&self) -> usize {
        match self.kind {
            FrameKind::Fzs => self.zs_len,
            _ => self.cp_len,
        }
    }

    /// Delay rows that carry data.
    pub fn data_rows(&self) -> usize {
        match self.kind {
            FrameKind::Fzs => self.m - self.zs_len,
            _ => self.m,
        }
    }

    /// Vector indices `k * M + l` of the grid cells that carry data.
    pub fn data_indices(&self) -> Vec<usize> {
        let rows = self.data_rows();
        (0..self.n)
            .flat_map(|k| (0..rows).map(move |l| k * self.m + l))
            .collect()
    }

    /// For RFCP, the reduced-CP configuration on the extended `(M + L_cp) x N`
    /// grid that it is equivalent to. Identity for every other kind.
    pub fn rcp_equivalent(&self) -> FrameConfig {
        match self.kind {
            FrameKind::Rfcp => FrameConfig {
                kind: FrameKind::Rcp,
                m: self.m + self.cp_len,
                n: self.n,
                cp_len: self.cp_len,
                zs_len: 0,
            },
            _ => *self,
        }
    }
}

impl fmt::Display for FrameConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(M={}, N={}, Lcp={}, Lzs={})",
            self.kind, self.m, self.n, self.cp_len, self.zs_len
        )
    }
}

/// `M x N` grid of delay-Doppler symbols, row = delay `l`, column = Doppler `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayDopplerFrame<T: Real> {
    pub data: DMatrix<C<T>>,
}

/// `M x N` time-frequency grid, row = subcarrier `m`, column = time slot `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrequencyFrame<T: Real> {
    pub data: DMatrix<C<T>>,
}

/// Time-domain sample vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrame<T: Real> {
    pub samples: Vec<C<T>>,
}

macro_rules! grid_common {
    ($ty:ident) => {
        impl<T: Real> $ty<T> {
            pub fn new(data: DMatrix<C<T>>) -> Self {
                Self { data }
            }

            pub fn zeros(m: usize, n: usize) -> Self {
                Self {
                    data: DMatrix::from_element(m, n, Complex::zero()),
                }
            }

            /// Builds an `m x n` grid from its column-major vectorisation.
            pub fn from_vec(m: usize, n: usize, v: Vec<C<T>>) -> Result<Self> {
                if v.len() != m * n {
                    return Err(OtfsError::LengthMismatch {
                        expected: m * n,
                        found: v.len(),
                    });
                }
                Ok(Self {
                    data: DMatrix::from_vec(m, n, v),
                })
            }

            pub fn rows(&self) -> usize {
                self.data.nrows()
            }

            pub fn cols(&self) -> usize {
                self.data.ncols()
            }

            /// Column-major vectorisation, index `k * M + l`.
            pub fn as_vec(&self) -> &[C<T>] {
                self.data.as_slice()
            }

            pub fn into_vec(self) -> Vec<C<T>> {
                self.data.as_slice().to_vec()
            }

            /// Sum of squared magnitudes.
            pub fn energy(&self) -> T {
                self.data.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
            }
        }
    };
}

grid_common!(DelayDopplerFrame);
grid_common!(TimeFrequencyFrame);

impl<T: Real> DelayDopplerFrame<T> {
    /// Checks shape against `cfg` and, for FZS, that the suffix rows are empty.
    pub fn validate_for(&self, cfg: &FrameConfig) -> Result<()> {
        if self.rows() != cfg.m || self.cols() != cfg.n {
            return Err(OtfsError::ShapeMismatch {
                expected: format!("{}x{}", cfg.m, cfg.n),
                found: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        if cfg.kind == FrameKind::Fzs {
            for k in 0..cfg.n {
                for l in cfg.data_rows()..cfg.m {
                    if !self.data[(l, k)].is_zero() {
                        return Err(OtfsError::InvalidInput(format!(
                            "FZS frame has non-zero symbol in suffix row {l}, column {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Copy with the zero-suffix rows of `cfg` cleared.
    pub fn with_suffix_cleared(&self, cfg: &FrameConfig) -> Self {
        let mut out = self.clone();
        if cfg.kind == FrameKind::Fzs {
            for l in cfg.data_rows()..cfg.m {
                out.data.row_mut(l).fill(Complex::zero());
            }
        }
        out
    }
}

impl<T: Real> TimeFrame<T> {
    pub fn new(samples: Vec<C<T>>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![Complex::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }
}

/// Unitary `n x n` DFT matrix, entry `(a, b) = exp(-j 2 pi a b / n) / sqrt(n)`.
pub fn dft_matrix<T: Real>(n: usize) -> Result<DMatrix<C<T>>> {
    if n == 0 {
        return Err(OtfsError::InvalidDimension("DFT size must be positive".into()));
    }
    let scale = T::one() / Float::sqrt(T::from_usize_lossy(n));
    Ok(DMatrix::from_fn(n, n, |a, b| {
        root_of_unity::<T>(-((a * b) as i64), n) * scale
    }))
}

/// Conjugate transpose.
pub fn adjoint<T: Real>(a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    a.transpose().map(|v| v.conj())
}

/// Kronecker product `a kron b`.
pub fn kron<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let (br, bc) = b.shape();
    DMatrix::from_fn(a.nrows() * br, a.ncols() * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Dense product for generic scalars.
pub fn matmul<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimensions");
    let mut out = DMatrix::from_element(a.nrows(), b.ncols(), C::<T>::zero());
    for j in 0..b.ncols() {
        for p in 0..a.ncols() {
            let v = b[(p, j)];
            if v.is_zero() {
                continue;
            }
            for i in 0..a.nrows() {
                out[(i, j)] = out[(i, j)] + a[(i, p)] * v;
            }
        }
    }
    out
}

/// Cached FFT plans for one `M x N` geometry.
///
/// Holding one of these avoids re-planning in Monte Carlo loops; the free
/// functions ([`isfft`], [`otfs_modulate`], ...) build one per call.
#[derive(Clone)]
pub struct OtfsTransform<T: Real> {
    m: usize,
    n: usize,
    fwd_m: Arc<dyn Fft<T>>,
    inv_m: Arc<dyn Fft<T>>,
    fwd_n: Arc<dyn Fft<T>>,
    inv_n: Arc<dyn Fft<T>>,
    scale_m: T,
    scale_n: T,
}

impl<T: Real> fmt::Debug for OtfsTransform<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OtfsTransform")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl<T: Real> OtfsTransform<T> {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(OtfsError::InvalidDimension(format!(
                "transform needs positive M and N, got {m}x{n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            n,
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
            scale_m: T::one() / Float::sqrt(T::from_usize_lossy(m)),
            scale_n: T::one() / Float::sqrt(T::from_usize_lossy(n)),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.m || cols != self.n {
            return Err(OtfsError::ShapeMismatch {
                expected: format!("{}x{}", self.m, self.n),
                found: format!("{rows}x{cols}"),
            });
        }
        Ok(())
    }

    fn columns(&self, data: &mut DMatrix<C<T>>, plan: &Arc<dyn Fft<T>>) {
        let scale = self.scale_m;
        for mut col in data.column_iter_mut() {
            let s = col.as_mut_slice();
            plan.process(s);
            s.iter_mut().for_each(|v| *v = *v * scale);
        }
    }

    fn rows(&self, data: &mut DMatrix<C<T>>, plan: &Arc<dyn Fft<T>>) {
        let scale = self.scale_n;
        let mut buf = vec![Complex::zero(); self.n];
        for l in 0..self.m {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = data[(l, k)];
            }
            plan.process(&mut buf);
            for (k, b) in buf.iter().enumerate() {
                data[(l, k)] = *b * scale;
            }
        }
    }

    /// `X_TF = F_M X_DD F_N^H`.
    pub fn isfft(&self, x: &DelayDopplerFrame<T>) -> Result<TimeFrequencyFrame<T>> {
        self.check(x.rows(), x.cols())?;
        let mut d = x.data.clone();
        self.columns(&mut d, &self.fwd_m);
        self.rows(&mut d, &self.inv_n);
        Ok(TimeFrequencyFrame { data: d })
    }

    /// `X_DD = F_M^H Y_TF F_N`, the inverse of [`Self::isfft`].
    pub fn sfft(&self, y: &TimeFrequencyFrame<T>) -> Result<DelayDopplerFrame<T>> {
        self.check(y.rows(), y.cols())?;
        let mut d = y.data.clone();
        self.columns(&mut d, &self.inv_m);
        self.rows(&mut d, &self.fwd_n);
        Ok(DelayDopplerFrame { data: d })
    }

    /// `s = vec(X_DD F_N^H) = (F_N^H kron I_M) vec(X_DD)`.
    pub fn modulate(&self, x: &DelayDopplerFrame<T>) -> Result<TimeFrame<T>> {
        self.check(x.rows(), x.cols())?;
        let mut d = x.data.clone();
        self.rows(&mut d, &self.inv_n);
        Ok(TimeFrame {
            samples: d.as_slice().to_vec(),
        })
    }

    /// `y = (F_N kron I_M) r`, reshaped to `M x N`.
    pub fn demodulate(&self, r: &[C<T>]) -> Result<DelayDopplerFrame<T>> {
        if r.len() != self.m * self.n {
            return Err(OtfsError::LengthMismatch {
                expected: self.m * self.n,
                found: r.len(),
            });
        }
        let mut d = DMatrix::from_column_slice(self.m, self.n, r);
        self.rows(&mut d, &self.fwd_n);
        Ok(DelayDopplerFrame { data: d })
    }

    /// 2D forward DFT along both axes with unitary scaling, `F_M A F_N`.
    pub(crate) fn dft2(&self, a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let mut d = a.clone();
        self.columns(&mut d, &self.fwd_m);
        self.rows(&mut d, &self.fwd_n);
        d
    }

    /// Inverse of [`Self::dft2`], `F_M^H A F_N^H`.
    pub(crate) fn idft2(&self, a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let mut d = a.clone();
        self.columns(&mut d, &self.inv_m);
        self.rows(&mut d, &self.inv_n);
        d
    }
}

pub fn isfft<T: Real>(x: &DelayDopplerFrame<T>) -> Result<TimeFrequencyFrame<T>> {
    OtfsTransform::new(x.rows(), x.cols())?.isfft(x)
}

pub fn sfft<T: Real>(y: &TimeFrequencyFrame<T>) -> Result<DelayDopplerFrame<T>> {
    OtfsTransform::new(y.rows(), y.cols())?.sfft(y)
}

/// Heisenberg transform with rectangular pulses. No prefix is inserted here;
/// see [`crate::channel::add_framing`].
pub fn otfs_modulate<T: Real>(x: &DelayDopplerFrame<T>) -> Result<TimeFrame<T>> {
    OtfsTransform::new(x.rows(), x.cols())?.modulate(x)
}

/// Wigner transform followed by SFFT for a prefix-free `MN`-sample frame.
pub fn otfs_demodulate<T: Real>(r: &TimeFrame<T>, m: usize, n: usize) -> Result<DelayDopplerFrame<T>> {
    OtfsTransform::new(m, n)?.demodulate(&r.samples)
}
