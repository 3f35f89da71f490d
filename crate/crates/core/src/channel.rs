//! Doubly-dispersive channel: tap model, framing, sample-level propagation and
//! the exact time-domain channel matrix for each framing.
//!
//! A tap applies `h_i * exp(j 2 pi k_i t / T_len) * s[t - l_i]`: the Doppler
//! ramp is evaluated at the time index of the *delayed* sample. `T_len` is the
//! length of the frame the model's Doppler bins refer to (see
//! [`ReferenceGrid`]).

use num_complex::Complex;
use num_traits::{Float, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::grid::{FrameConfig, FrameKind, ReferenceGrid, TimeFrame};
use crate::scalar::{cis, root_of_unity, wrap, Real, C};
use crate::sparse::SparseMatrix;

/// Integer bins closer than this to an integer are treated as integer.
const INTEGER_BIN_TOL: f64 = 1e-9;

/// One propagation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTap<T: Real> {
    pub gain: C<T>,
    /// Delay in samples.
    pub delay: usize,
    /// Doppler in bins of the model's reference grid; may be fractional.
    pub doppler: T,
}

impl<T: Real> ChannelTap<T> {
    pub fn new(gain: C<T>, delay: usize, doppler: T) -> Self {
        Self { gain, delay, doppler }
    }
}

/// Tap list plus the frame grid its Doppler bins are counted on.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel<T: Real> {
    pub taps: Vec<ChannelTap<T>>,
    pub grid: ReferenceGrid,
    /// Declares that the generating ensemble has unit total average power.
    pub normalized: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TapDoc {
    gain_re: f64,
    gain_im: f64,
    delay: usize,
    doppler: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    taps: Vec<TapDoc>,
    grid: ReferenceGrid,
    #[serde(default)]
    normalized: bool,
}

impl<T: Real> ChannelModel<T> {
    pub fn new(taps: Vec<ChannelTap<T>>, grid: ReferenceGrid) -> Result<Self> {
        let model = Self {
            taps,
            grid,
            normalized: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(OtfsError::InvalidInput("channel model needs at least one tap".into()));
        }
        for (i, t) in self.taps.iter().enumerate() {
            if !(Float::is_finite(t.gain.re) && Float::is_finite(t.gain.im)) {
                return Err(OtfsError::InvalidInput(format!("tap {i} has non-finite gain")));
            }
            if !Float::is_finite(t.doppler) {
                return Err(OtfsError::InvalidInput(format!("tap {i} has non-finite Doppler")));
            }
        }
        Ok(())
    }

    /// Single tap `h = 1` at delay 0 with no Doppler.
    pub fn identity(grid: ReferenceGrid) -> Self {
        Self {
            taps: vec![ChannelTap::new(Complex::new(T::one(), T::zero()), 0, T::zero())],
            grid,
            normalized: true,
        }
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    /// `sum |h_i|^2` of this realisation.
    pub fn power(&self) -> T {
        self.taps.iter().fold(T::zero(), |a, t| a + t.gain.norm_sqr())
    }

    pub fn is_static(&self) -> bool {
        self.taps.iter().all(|t| t.doppler.is_zero())
    }

    /// Doppler of `tap` in cycles per sample.
    pub fn cycles_per_sample(&self, tap: &ChannelTap<T>, cfg: &FrameConfig) -> T {
        tap.doppler / T::from_usize_lossy(cfg.reference_frame_len(self.grid))
    }

    /// Doppler of `tap` counted in bins of `cfg`'s native frame length.
    pub fn native_doppler(&self, tap: &ChannelTap<T>, cfg: &FrameConfig) -> T {
        self.cycles_per_sample(tap, cfg) * T::from_usize_lossy(cfg.native_frame_len())
    }

    /// Native-grid Doppler bins of every tap, which must all be integers.
    pub fn integer_dopplers(&self, cfg: &FrameConfig) -> Result<Vec<i64>> {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let k = self.native_doppler(t, cfg).to_f64_lossy();
                let r = k.round();
                if (k - r).abs() > INTEGER_BIN_TOL {
                    Err(OtfsError::FractionalDoppler { tap: i, doppler: k })
                } else {
                    Ok(r as i64)
                }
            })
            .collect()
    }

    /// Same physical channel re-expressed on `cfg`'s native grid.
    pub fn on_native_grid(&self, cfg: &FrameConfig) -> Self {
        Self {
            taps: self
                .taps
                .iter()
                .map(|t| ChannelTap::new(t.gain, t.delay, self.native_doppler(t, cfg)))
                .collect(),
            grid: cfg.native_grid(),
            normalized: self.normalized,
        }
    }

    /// Builds a model on `cfg`'s native grid from taps whose Doppler is given in
    /// cycles per sample.
    pub fn from_cycles(taps: &[(C<T>, usize, T)], cfg: &FrameConfig) -> Result<Self> {
        let len = T::from_usize_lossy(cfg.native_frame_len());
        Self::new(
            taps.iter()
                .map(|&(g, d, phi)| ChannelTap::new(g, d, phi * len))
                .collect(),
            cfg.native_grid(),
        )
    }

    /// Checks that every delay fits the framing of `cfg`.
    pub fn check_delays(&self, cfg: &FrameConfig) -> Result<()> {
        let bound = cfg.max_supported_delay();
        for (i, t) in self.taps.iter().enumerate() {
            if t.delay >= cfg.m {
                return Err(OtfsError::Configuration(format!(
                    "tap {i} delay {} is not below M={}",
                    t.delay, cfg.m
                )));
            }
            if t.delay > bound {
                return Err(OtfsError::Configuration(format!(
                    "tap {i} delay {} exceeds the {} guard of {bound} samples",
                    t.delay, cfg.kind
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            taps: self
                .taps
                .iter()
                .map(|t| TapDoc {
                    gain_re: t.gain.re.to_f64_lossy(),
                    gain_im: t.gain.im.to_f64_lossy(),
                    delay: t.delay,
                    doppler: t.doppler.to_f64_lossy(),
                })
                .collect(),
            grid: self.grid,
            normalized: self.normalized,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        let model = Self {
            taps: doc
                .taps
                .into_iter()
                .map(|t| {
                    ChannelTap::new(
                        Complex::new(T::lit(t.gain_re), T::lit(t.gain_im)),
                        t.delay,
                        T::lit(t.doppler),
                    )
                })
                .collect(),
            grid: doc.grid,
            normalized: doc.normalized,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Additive white Gaussian noise setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `E_s / N_0` in dB, relative to unit average symbol energy.
    pub snr_db: f64,
    pub enabled: bool,
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            snr_db: f64::INFINITY,
            enabled: false,
        }
    }

    pub fn snr_db(snr_db: f64) -> Self {
        Self { snr_db, enabled: true }
    }

    /// Complex noise variance `sigma^2`; zero when disabled.
    pub fn variance(&self) -> f64 {
        if self.enabled {
            noise_variance(self.snr_db)
        } else {
            0.0
        }
    }
}

/// `sigma^2 = 10^(-snr_db / 10)` for unit-energy symbols.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Random tap generator used by Monte Carlo experiments.
///
/// Gains are i.i.d. circular complex Gaussian with variance `1/L`, delays are
/// drawn without replacement from `0..=max_delay`, and Doppler bins are
/// uniform integers in `[-k_max, k_max]`. When `doppler_frame_len` is set the
/// integer bins are counted on a frame of that many samples, so the same draw
/// is fractional on other grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomChannelSpec {
    #[serde(rename = "L")]
    pub taps: usize,
    pub k_max: i64,
    pub max_delay: usize,
    #[serde(default)]
    pub doppler_frame_len: Option<usize>,
}

/// One realisation from a [`RandomChannelSpec`], independent of any frame
/// geometry until [`ChannelDraw::model_for`] is called.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw<T: Real> {
    pub taps: Vec<(C<T>, usize, i64)>,
    pub doppler_frame_len: Option<usize>,
}

impl RandomChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(OtfsError::Configuration("random channel needs L >= 1".into()));
        }
        if self.taps > self.max_delay + 1 {
            return Err(OtfsError::Configuration(format!(
                "cannot draw {} distinct delays from 0..={}",
                self.taps, self.max_delay
            )));
        }
        if self.k_max < 0 {
            return Err(OtfsError::Configuration("k_max must be non-negative".into()));
        }
        if self.doppler_frame_len == Some(0) {
            return Err(OtfsError::Configuration("doppler_frame_len must be positive".into()));
        }
        Ok(())
    }

    pub fn draw<T: Real, R: RngCore>(&self, rng: &mut R) -> ChannelDraw<T> {
        let scale = (0.5 / self.taps as f64).sqrt();
        let mut delays: Vec<usize> = (0..=self.max_delay).collect();
        // Partial Fisher-Yates for sampling without replacement.
        for i in 0..self.taps {
            let j = rng.random_range(i..delays.len());
            delays.swap(i, j);
        }
        let taps = (0..self.taps)
            .map(|i| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let k = rng.random_range(-self.k_max..=self.k_max);
                (Complex::new(T::lit(re * scale), T::lit(im * scale)), delays[i], k)
            })
            .collect();
        ChannelDraw {
            taps,
            doppler_frame_len: self.doppler_frame_len,
        }
    }
}

impl<T: Real> ChannelDraw<T> {
    /// The drawn channel expressed on `cfg`'s native Doppler grid.
    pub fn model_for(&self, cfg: &FrameConfig) -> ChannelModel<T> {
        let native = cfg.native_frame_len();
        let taps = self
            .taps
            .iter()
            .map(|&(g, d, k)| {
                let bins = match self.doppler_frame_len {
                    Some(len) => T::lit(k as f64 * native as f64 / len as f64),
                    None => T::lit(k as f64),
                };
                ChannelTap::new(g, d, bins)
            })
            .collect();
        ChannelModel {
            taps,
            grid: cfg.native_grid(),
            normalized: true,
        }
    }
}

/// `z_i = exp(j 2 pi k_i / frame_len)`.
pub fn per_sample_phase<T: Real>(tap: &ChannelTap<T>, frame_len: usize) -> Result<C<T>> {
    if frame_len == 0 {
        return Err(OtfsError::InvalidDimension("frame length must be positive".into()));
    }
    Ok(cis(T::TAU() * tap.doppler / T::from_usize_lossy(frame_len)))
}

/// Exact linear map from the framed-and-stripped transmit vector to the
/// stripped receive vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeChannelMatrix<T: Real> {
    pub matrix: SparseMatrix<T>,
    pub cfg: FrameConfig,
}

impl<T: Real> TimeChannelMatrix<T> {
    pub fn to_dense(&self) -> nalgebra::DMatrix<C<T>> {
        self.matrix.to_dense()
    }

    pub fn apply(&self, s: &[C<T>]) -> Result<Vec<C<T>>> {
        self.matrix.mul_vec(s)
    }

    /// Copy with the columns of zero-suffix samples cleared. Those inputs are
    /// zero by construction, so this does not change `H s` for valid frames.
    pub fn with_suffix_columns_zeroed(&self) -> Result<Self> {
        Ok(Self {
            matrix: zero_suffix_columns(&self.matrix, &self.cfg)?,
            cfg: self.cfg,
        })
    }
}

/// Zeroes columns `k*M + l` with `l` in the zero suffix of `cfg`.
pub(crate) fn zero_suffix_columns<T: Real>(a: &SparseMatrix<T>, cfg: &FrameConfig) -> Result<SparseMatrix<T>> {
    let keep: Vec<(usize, usize, C<T>)> = a
        .entries()
        .iter()
        .copied()
        .filter(|&(_, c, _)| c % cfg.m < cfg.data_rows())
        .collect();
    SparseMatrix::from_triplets(a.nrows(), a.ncols(), keep)
}

/// Time-domain channel matrix after prefix removal.
///
/// * RCP/RZP: `sum_i h_i Pi^{l_i} Delta^{k_i}` on `MN` samples.
/// * FCP: `diag(H_0, .., H_{N-1})`, entry `(l, [l - l_i]_M)` of `H_n` equal to
///   `h_i z_i^{n(M+L_cp) + L_cp + l - l_i}` with the exponent left unwrapped.
/// * FZS: `diag(TriL(H_0), ..)` with the FCP blocks at `L_cp = 0`.
/// * RFCP: the RCP matrix of the extended `(M + L_cp) N`-sample frame.
pub fn build_time_channel<T: Real>(model: &ChannelModel<T>, cfg: &FrameConfig) -> Result<TimeChannelMatrix<T>> {
    cfg.validate()?;
    model.check_delays(cfg)?;
    let ks = model.integer_dopplers(cfg)?;
    let taps: Vec<(C<T>, usize, i64)> = model.taps.iter().zip(&ks).map(|(t, &k)| (t.gain, t.delay, k)).collect();
    let (m, n, lcp) = (cfg.m, cfg.n, cfg.cp_len);
    let matrix = match cfg.kind {
        FrameKind::Rcp | FrameKind::Rzp => cyclic_matrix(&taps, m * n),
        FrameKind::Rfcp => cyclic_matrix(&taps, (m + lcp) * n),
        FrameKind::Fcp => {
            let len = (m + lcp) * n;
            let mut trip = Vec::with_capacity(taps.len() * m * n);
            for blk in 0..n {
                for l in 0..m {
                    for &(h, d, k) in &taps {
                        let col = blk * m + wrap(l as i64 - d as i64, m);
                        let e = (blk * (m + lcp) + lcp + l) as i64 - d as i64;
                        trip.push((blk * m + l, col, h * root_of_unity::<T>(k * e, len)));
                    }
                }
            }
            SparseMatrix::from_triplets(m * n, m * n, trip)?
        }
        FrameKind::Fzs => {
            let len = m * n;
            let mut trip = Vec::with_capacity(taps.len() * m * n);
            for blk in 0..n {
                for l in 0..m {
                    for &(h, d, k) in taps.iter().filter(|t| t.1 <= l) {
                        let e = (blk * m + l - d) as i64;
                        trip.push((blk * m + l, blk * m + l - d, h * root_of_unity::<T>(k * e, len)));
                    }
                }
            }
            SparseMatrix::from_triplets(m * n, m * n, trip)?
        }
    };
    Ok(TimeChannelMatrix { matrix, cfg: *cfg })
}

fn cyclic_matrix<T: Real>(taps: &[(C<T>, usize, i64)], len: usize) -> SparseMatrix<T> {
    let mut trip = Vec::with_capacity(taps.len() * len);
    for t in 0..len {
        for &(h, d, k) in taps {
            let src = wrap(t as i64 - d as i64, len);
            trip.push((t, src, h * root_of_unity::<T>(k * src as i64, len)));
        }
    }
    SparseMatrix::from_triplets(len, len, trip).expect("cyclic indices in range")
}

/// Samples expected by [`add_framing`] for `cfg`.
fn unframed_len(cfg: &FrameConfig) -> usize {
    match cfg.kind {
        FrameKind::Rfcp => cfg.m * cfg.n,
        _ => cfg.grid_len(),
    }
}

fn per_block_cp<T: Real>(s: &[C<T>], m: usize, n: usize, lcp: usize) -> Vec<C<T>> {
    let mut out = Vec::with_capacity((m + lcp) * n);
    for blk in s.chunks(m).take(n) {
        out.extend_from_slice(&blk[m - lcp..]);
        out.extend_from_slice(blk);
    }
    out
}

/// Inserts the prefix/suffix of `cfg` around an `MN`-sample OTFS frame.
pub fn add_framing<T: Real>(s: &TimeFrame<T>, cfg: &FrameConfig) -> Result<TimeFrame<T>> {
    cfg.validate()?;
    let mn = unframed_len(cfg);
    if s.len() != mn {
        return Err(OtfsError::LengthMismatch {
            expected: mn,
            found: s.len(),
        });
    }
    if cfg.cp_len > cfg.m && matches!(cfg.kind, FrameKind::Fcp | FrameKind::Rfcp) {
        return Err(OtfsError::Configuration(format!(
            "per-block CP of {} samples longer than the {}-sample block",
            cfg.cp_len, cfg.m
        )));
    }
    let lcp = cfg.cp_len;
    let samples = match cfg.kind {
        FrameKind::Rcp => {
            if lcp > mn {
                return Err(OtfsError::Configuration("CP longer than the frame".into()));
            }
            let mut out = Vec::with_capacity(mn + lcp);
            out.extend_from_slice(&s.samples[mn - lcp..]);
            out.extend_from_slice(&s.samples);
            out
        }
        FrameKind::Rzp => {
            let mut out = s.samples.clone();
            out.resize(mn + lcp, Complex::zero());
            out
        }
        FrameKind::Fcp => per_block_cp(&s.samples, cfg.m, cfg.n, lcp),
        FrameKind::Fzs => s.samples.clone(),
        FrameKind::Rfcp => {
            let inner = per_block_cp(&s.samples, cfg.m, cfg.n, lcp);
            let len = inner.len();
            let mut out = Vec::with_capacity(len + lcp);
            out.extend_from_slice(&inner[len - lcp..]);
            out.extend_from_slice(&inner);
            out
        }
    };
    Ok(TimeFrame::new(samples))
}

/// Undoes [`add_framing`] on a received frame, which may carry a channel tail.
///
/// RFCP keeps the full-CP blocks: the result has `(M + L_cp) N` samples.
pub fn strip_framing<T: Real>(r: &TimeFrame<T>, cfg: &FrameConfig) -> Result<TimeFrame<T>> {
    cfg.validate()?;
    let mn = cfg.grid_len();
    let lcp = cfg.cp_len;
    let need = |len: usize| -> Result<()> {
        if r.len() < len {
            Err(OtfsError::LengthMismatch {
                expected: len,
                found: r.len(),
            })
        } else {
            Ok(())
        }
    };
    let samples = match cfg.kind {
        FrameKind::Rcp => {
            need(mn + lcp)?;
            r.samples[lcp..lcp + mn].to_vec()
        }
        FrameKind::Rzp => {
            need(mn)?;
            let mut out = r.samples[..mn].to_vec();
            for (i, v) in r.samples[mn..].iter().enumerate() {
                out[i % mn] = out[i % mn] + v;
            }
            out
        }
        FrameKind::Fcp => {
            need((cfg.m + lcp) * cfg.n)?;
            r.samples[..(cfg.m + lcp) * cfg.n]
                .chunks(cfg.m + lcp)
                .flat_map(|b| b[lcp..].iter().copied())
                .collect()
        }
        FrameKind::Fzs => {
            need(mn)?;
            r.samples[..mn].to_vec()
        }
        FrameKind::Rfcp => {
            let inner = (cfg.m + lcp) * cfg.n;
            need(inner + lcp)?;
            r.samples[lcp..lcp + inner].to_vec()
        }
    };
    Ok(TimeFrame::new(samples))
}

/// Passes a framed signal through the channel, sample by sample.
///
/// `r[t] = sum_i h_i exp(j 2 pi phi_i (t - l_i - t0)) s[t - l_i] + w[t]` where
/// `phi_i` is the tap Doppler in cycles per sample and `t0` is
/// [`FrameConfig::doppler_origin`]. The output carries the `max_delay`-sample
/// channel tail. Noise is circular complex Gaussian with variance `sigma^2`
/// per sample and is a deterministic function of `seed`.
pub fn propagate<T: Real>(
    s: &TimeFrame<T>,
    model: &ChannelModel<T>,
    cfg: &FrameConfig,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<TimeFrame<T>> {
    model.validate()?;
    let out_len = s.len() + model.max_delay();
    let origin = cfg.doppler_origin() as i64;
    let native = cfg.native_frame_len();
    let mut r = vec![Complex::zero(); out_len];
    for tap in &model.taps {
        let k = model.native_doppler(tap, cfg);
        let kr = k.to_f64_lossy().round();
        let integer = (k.to_f64_lossy() - kr).abs() <= INTEGER_BIN_TOL;
        let step = T::TAU() * k / T::from_usize_lossy(native);
        for (i, &x) in s.samples.iter().enumerate() {
            let t = (i + tap.delay) as i64;
            let e = t - tap.delay as i64 - origin;
            // Integer bins go through the exact modular root of unity so the
            // result agrees with the closed-form matrices to rounding.
            let ph = if integer {
                root_of_unity::<T>(kr as i64 * e, native)
            } else {
                cis(step * T::lit(e as f64))
            };
            r[t as usize] = r[t as usize] + tap.gain * ph * x;
        }
    }
    if noise.enabled {
        let sd = T::lit((noise.variance() / 2.0).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in r.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v = *v + Complex::new(T::lit(re) * sd, T::lit(im) * sd);
        }
    }
    Ok(TimeFrame::new(r))
}
