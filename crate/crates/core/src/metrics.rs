//! Capacity and transmit-power accounting per framing, bit-error statistics
//! and Doppler-leakage measurement.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{OtfsError, Result};
use crate::grid::{DelayDopplerFrame, FrameConfig, FrameKind};
use crate::scalar::{wrap, Real};

/// Fraction of the transmitted samples that carry data.
///
/// RCP/RZP: `MN / (MN + L_cp)`, FCP: `M / (M + L_cp)`, FZS: `(M - L_zs) / M`,
/// RFCP: `MN / ((M + L_cp) N + L_cp)`.
pub fn spectral_factor(cfg: &FrameConfig) -> f64 {
    let (m, n, lcp, lzs) = (cfg.m as f64, cfg.n as f64, cfg.cp_len as f64, cfg.zs_len as f64);
    match cfg.kind {
        FrameKind::Rcp | FrameKind::Rzp => m * n / (m * n + lcp),
        FrameKind::Fcp => m / (m + lcp),
        FrameKind::Fzs => (m - lzs) / m,
        FrameKind::Rfcp => m * n / ((m + lcp) * n + lcp),
    }
}

/// Capacity `C = factor * log2(1 + gamma)` in bits/s/Hz for linear SNR `gamma`.
pub fn capacity(cfg: &FrameConfig, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(OtfsError::InvalidInput(format!(
            "SNR {gamma} must be finite and non-negative"
        )));
    }
    Ok(spectral_factor(cfg) * (1.0 + gamma).log2())
}

/// Average transmitted energy per frame for average sample power `symbol_power`.
///
/// RCP: `(MN + L_cp) P`, RZP: `MN P`, FCP: `N (M + L_cp) P`, FZS: `MN P`,
/// RFCP: `((M + L_cp) N + L_cp) P`.
pub fn tx_power(cfg: &FrameConfig, symbol_power: f64) -> Result<f64> {
    if !(symbol_power > 0.0) || !symbol_power.is_finite() {
        return Err(OtfsError::InvalidInput(format!(
            "symbol power {symbol_power} must be finite and positive"
        )));
    }
    let (m, n, lcp) = (cfg.m as f64, cfg.n as f64, cfg.cp_len as f64);
    let samples = match cfg.kind {
        FrameKind::Rcp => m * n + lcp,
        FrameKind::Rzp | FrameKind::Fzs => m * n,
        FrameKind::Fcp => n * (m + lcp),
        FrameKind::Rfcp => (m + lcp) * n + lcp,
    };
    Ok(samples * symbol_power)
}

/// Per-configuration summary row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub capacity: f64,
    pub tx_power: f64,
    pub spectral_eff_factor: f64,
    /// `1 / tx_power` at unit sample power.
    pub power_eff_factor: f64,
}

pub fn efficiency_report(cfg: &FrameConfig, gamma: f64, symbol_power: f64) -> Result<EfficiencyReport> {
    cfg.validate()?;
    Ok(EfficiencyReport {
        capacity: capacity(cfg, gamma)?,
        tx_power: tx_power(cfg, symbol_power)?,
        spectral_eff_factor: spectral_factor(cfg),
        power_eff_factor: 1.0 / tx_power(cfg, 1.0)?,
    })
}

/// Bit error rate with its binomial standard error `sqrt(p (1 - p) / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub stderr: f64,
    pub errors: u64,
    pub bits: u64,
}

pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<BerEstimate> {
    if tx_bits.len() != rx_bits.len() {
        return Err(OtfsError::LengthMismatch {
            expected: tx_bits.len(),
            found: rx_bits.len(),
        });
    }
    if tx_bits.is_empty() {
        return Err(OtfsError::InvalidInput("no bits to compare".into()));
    }
    let errors = count_errors(tx_bits, rx_bits) as u64;
    let n = tx_bits.len() as f64;
    let p = errors as f64 / n;
    Ok(BerEstimate {
        ber: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        errors,
        bits: tx_bits.len() as u64,
    })
}

pub fn count_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Frame-level bit-error tally for Monte Carlo runs.
///
/// Bit errors inside one frame share the channel and noise realisation, so
/// the standard error is computed over frames (cluster sampling), not over
/// bits. Tallies merge associatively, so trials can be split across workers
/// in any order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerTally {
    pub frames: u64,
    pub bits: u64,
    pub errors: u64,
    /// Sum over frames of the squared error count.
    pub errors_sq: u128,
}

impl BerTally {
    pub fn record(&mut self, frame_bits: u64, frame_errors: u64) {
        self.frames += 1;
        self.bits += frame_bits;
        self.errors += frame_errors;
        self.errors_sq += (frame_errors as u128) * (frame_errors as u128);
    }

    pub fn merge(&mut self, other: &BerTally) {
        self.frames += other.frames;
        self.bits += other.bits;
        self.errors += other.errors;
        self.errors_sq += other.errors_sq;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// Standard error of [`Self::ber`] from the spread of per-frame error
    /// rates; assumes every frame carries the same number of bits.
    pub fn stderr(&self) -> f64 {
        if self.frames < 2 || self.bits == 0 {
            return 0.0;
        }
        let f = self.frames as f64;
        let b = self.bits as f64 / f;
        let mean = self.errors as f64 / f;
        let var = ((self.errors_sq as f64) - f * mean * mean).max(0.0) / (f - 1.0);
        (var / f).sqrt() / b
    }
}

/// Nearest integer with ties toward the lower value.
pub fn nominal_bin(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// `1 - (energy on `bins`) / (total energy)`; duplicate bins count once.
pub fn leakage<T: Real>(grid: &DelayDopplerFrame<T>, bins: &[(usize, usize)]) -> Result<f64> {
    let total = grid.energy().to_f64_lossy();
    if !(total > 0.0) {
        return Err(OtfsError::ZeroEnergy);
    }
    let mut seen = bins.to_vec();
    seen.sort_unstable();
    seen.dedup();
    let mut on = 0.0;
    for (l, k) in seen {
        if l >= grid.rows() || k >= grid.cols() {
            return Err(OtfsError::InvalidInput(format!("bin ({l}, {k}) outside the grid")));
        }
        on += grid.data[(l, k)].norm_sqr().to_f64_lossy();
    }
    Ok((1.0 - on / total).max(0.0))
}

/// Leakage of a delay-Doppler impulse response whose pilot sits at `(0, 0)`:
/// tap `i` is expected at `(l_i, [round(k_i)]_N)` with `k_i` in native bins of
/// `cfg`.
pub fn doppler_leakage<T: Real>(cir: &DelayDopplerFrame<T>, model: &ChannelModel<T>, cfg: &FrameConfig) -> Result<f64> {
    let (m, n) = (cir.rows(), cir.cols());
    let bins: Vec<(usize, usize)> = model
        .taps
        .iter()
        .map(|t| {
            let k = nominal_bin(model.native_doppler(t, cfg).to_f64_lossy());
            (t.delay % m, wrap(k, n))
        })
        .collect();
    leakage(cir, &bins)
}
