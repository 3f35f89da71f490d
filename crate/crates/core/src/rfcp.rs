//! Reduced-full CP framing: an FCP frame with one more reduced CP in front,
//! which makes the whole `(M + L_cp) N`-sample frame circular so the
//! per-block CP samples can be demodulated instead of discarded.
//!
//! The received extended grid follows the reduced-CP relation on an
//! `(M + L_cp) x N` grid. Rows `[L_cp, M + L_cp)` form the data block and rows
//! `[0, L_cp)` the CP block.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{add_framing, strip_framing, ChannelModel, ChannelTap};
use crate::effective::{effective_dims, gamma, PhaseTerm};
use crate::error::{OtfsError, Result};
use crate::grid::{DelayDopplerFrame, FrameConfig, FrameKind, OtfsTransform, TimeFrame};
use crate::scalar::{wrap, Real};

/// Extended delay grid plus the length of the outer reduced CP.
#[derive(Clone, Debug, PartialEq)]
pub struct RfcpFrame<T: Real> {
    pub extended_grid: DelayDopplerFrame<T>,
    pub outer_cp_len: usize,
}

/// Repeats the last `cp_len` delay rows of `x` on top of it.
pub fn extend_grid<T: Real>(x: &DelayDopplerFrame<T>, cp_len: usize) -> Result<DelayDopplerFrame<T>> {
    let (m, n) = (x.rows(), x.cols());
    if cp_len > m {
        return Err(OtfsError::Configuration(format!(
            "CP of {cp_len} rows longer than the {m}-row grid"
        )));
    }
    let mut out = DelayDopplerFrame::zeros(m + cp_len, n);
    for k in 0..n {
        for l in 0..m + cp_len {
            let src = if l < cp_len { m - cp_len + l } else { l - cp_len };
            out.data[(l, k)] = x.data[(src, k)];
        }
    }
    Ok(out)
}

impl<T: Real> RfcpFrame<T> {
    pub fn new(x: &DelayDopplerFrame<T>, cfg: &FrameConfig) -> Result<Self> {
        check_rfcp(cfg)?;
        x.validate_for(cfg)?;
        Ok(Self {
            extended_grid: extend_grid(x, cfg.cp_len)?,
            outer_cp_len: cfg.cp_len,
        })
    }

    /// Time samples: per-column modulation of the extended grid, which is the
    /// FCP frame, preceded by its last `outer_cp_len` samples.
    pub fn to_time(&self) -> Result<TimeFrame<T>> {
        let g = &self.extended_grid;
        let inner = OtfsTransform::new(g.rows(), g.cols())?.modulate(g)?;
        let len = inner.len();
        let mut out = Vec::with_capacity(len + self.outer_cp_len);
        out.extend_from_slice(&inner.samples[len - self.outer_cp_len..]);
        out.extend_from_slice(&inner.samples);
        Ok(TimeFrame::new(out))
    }
}

fn check_rfcp(cfg: &FrameConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.kind != FrameKind::Rfcp {
        return Err(OtfsError::Configuration(format!(
            "expected an RFCP configuration, got {cfg}"
        )));
    }
    Ok(())
}

/// RFCP transmit frame of `(M + L_cp) N + L_cp` samples.
pub fn build_rfcp<T: Real>(x: &DelayDopplerFrame<T>, cfg: &FrameConfig) -> Result<TimeFrame<T>> {
    RfcpFrame::new(x, cfg)?.to_time()
}

/// Same as [`build_rfcp`] but first checks that the CP covers `model`'s delays.
pub fn build_rfcp_for<T: Real>(
    x: &DelayDopplerFrame<T>,
    cfg: &FrameConfig,
    model: &ChannelModel<T>,
) -> Result<TimeFrame<T>> {
    check_rfcp(cfg)?;
    model.check_delays(cfg)?;
    build_rfcp(x, cfg)
}

/// Drops the outer CP, demodulates the `(M + L_cp) x N` grid and splits it
/// into the `M x N` data block and the `L_cp x N` CP block.
pub fn rfcp_receive<T: Real>(
    r: &TimeFrame<T>,
    cfg: &FrameConfig,
) -> Result<(DelayDopplerFrame<T>, DelayDopplerFrame<T>)> {
    check_rfcp(cfg)?;
    let inner = strip_framing(r, cfg)?;
    let ext = OtfsTransform::new(cfg.m + cfg.cp_len, cfg.n)?.demodulate(&inner.samples)?;
    Ok(split_extended(&ext, cfg.cp_len))
}

/// Received extended grid without splitting.
pub fn rfcp_extended<T: Real>(r: &TimeFrame<T>, cfg: &FrameConfig) -> Result<DelayDopplerFrame<T>> {
    check_rfcp(cfg)?;
    let inner = strip_framing(r, cfg)?;
    OtfsTransform::new(cfg.m + cfg.cp_len, cfg.n)?.demodulate(&inner.samples)
}

/// `(rows [cp_len, ..), rows [0, cp_len))` of an extended grid.
pub fn split_extended<T: Real>(
    ext: &DelayDopplerFrame<T>,
    cp_len: usize,
) -> (DelayDopplerFrame<T>, DelayDopplerFrame<T>) {
    let (rows, n) = (ext.rows(), ext.cols());
    let data = DelayDopplerFrame::new(ext.data.rows(cp_len, rows - cp_len).into_owned());
    let cp = DelayDopplerFrame::new(ext.data.rows(0, cp_len).into_owned());
    debug_assert_eq!(data.cols(), n);
    (data, cp)
}

/// CP block of a plain FCP reception: the first `(M + L_cp) N` received
/// samples demodulated on the extended grid, with no outer CP to make the
/// frame circular.
pub fn fcp_cp_block<T: Real>(r: &TimeFrame<T>, cfg: &FrameConfig) -> Result<DelayDopplerFrame<T>> {
    cfg.validate()?;
    if cfg.kind != FrameKind::Fcp {
        return Err(OtfsError::Configuration(format!(
            "expected an FCP configuration, got {cfg}"
        )));
    }
    let len = (cfg.m + cfg.cp_len) * cfg.n;
    if r.len() < len {
        return Err(OtfsError::LengthMismatch {
            expected: len,
            found: r.len(),
        });
    }
    let ext = OtfsTransform::new(cfg.m + cfg.cp_len, cfg.n)?.demodulate(&r.samples[..len])?;
    Ok(split_extended(&ext, cfg.cp_len).1)
}

/// FCP transmission of `x` followed by [`fcp_cp_block`] is what an FCP
/// receiver would see if it kept its CP samples.
pub fn fcp_frame<T: Real>(x: &DelayDopplerFrame<T>, cfg: &FrameConfig) -> Result<TimeFrame<T>> {
    let s = OtfsTransform::new(cfg.m, cfg.n)?.modulate(x)?;
    add_framing(&s, cfg)
}

/// Single embedded pilot with a guard region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSpec {
    /// `(l_p, k_p)` on the `M x N` data grid.
    pub position: (usize, usize),
    pub amplitude: f64,
    /// Guard half-width in delay; also the largest tap delay read back.
    pub guard_delay: usize,
    /// Guard half-width in Doppler; also the largest `|k_i|` read back.
    pub guard_doppler: usize,
}

impl PilotSpec {
    /// Guard sized for delays up to `max_delay` and Doppler up to `k_max` bins:
    /// `2 max_delay + 1` rows and `2 k_max + 1` columns around the pilot, with
    /// only the rows before it when it sits on the last delay row.
    pub fn sized_for(position: (usize, usize), amplitude: f64, max_delay: usize, k_max: usize) -> Self {
        Self {
            position,
            amplitude,
            guard_delay: max_delay,
            guard_doppler: k_max,
        }
    }

    /// The pilot sits on the last delay row, so the guard only extends upward.
    pub fn at_grid_end(&self, cfg: &FrameConfig) -> bool {
        self.position.0 + 1 == cfg.m
    }

    pub fn validate(&self, cfg: &FrameConfig) -> Result<()> {
        let (lp, kp) = self.position;
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(OtfsError::Configuration(
                "pilot amplitude must be finite and positive".into(),
            ));
        }
        if lp >= cfg.m || kp >= cfg.n {
            return Err(OtfsError::Configuration(format!("pilot ({lp}, {kp}) outside the grid")));
        }
        let below = if self.at_grid_end(cfg) { 0 } else { self.guard_delay };
        if lp < self.guard_delay || lp + below >= cfg.m {
            return Err(OtfsError::Configuration(format!(
                "pilot delay guard of {} rows around row {lp} is clipped by the {}-row grid",
                self.guard_delay, cfg.m
            )));
        }
        if kp < self.guard_doppler || kp + self.guard_doppler >= cfg.n {
            return Err(OtfsError::Configuration(format!(
                "pilot Doppler guard of {} bins around bin {kp} is clipped by the {}-bin grid",
                self.guard_doppler, cfg.n
            )));
        }
        Ok(())
    }

    /// Rows and columns of the guard region on the `M x N` grid.
    pub fn guard_region(&self, cfg: &FrameConfig) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (lp, kp) = self.position;
        let below = if self.at_grid_end(cfg) { 0 } else { self.guard_delay };
        (
            lp - self.guard_delay..lp + below + 1,
            kp - self.guard_doppler..kp + self.guard_doppler + 1,
        )
    }

    /// `M x N` grid holding only the pilot.
    pub fn frame<T: Real>(&self, cfg: &FrameConfig) -> Result<DelayDopplerFrame<T>> {
        self.validate(cfg)?;
        let mut x = DelayDopplerFrame::zeros(cfg.m, cfg.n);
        x.data[self.position] = Complex::new(T::lit(self.amplitude), T::zero());
        Ok(x)
    }

    /// Places `symbols` on every cell outside the guard region, in vector order.
    pub fn frame_with_data<T: Real>(
        &self,
        cfg: &FrameConfig,
        symbols: &[crate::scalar::C<T>],
    ) -> Result<DelayDopplerFrame<T>> {
        let mut x = self.frame(cfg)?;
        let cells = self.data_cells(cfg);
        if symbols.len() != cells.len() {
            return Err(OtfsError::LengthMismatch {
                expected: cells.len(),
                found: symbols.len(),
            });
        }
        for (&(l, k), &s) in cells.iter().zip(symbols) {
            x.data[(l, k)] = s;
        }
        Ok(x)
    }

    /// Cells outside the guard region, column by column.
    pub fn data_cells(&self, cfg: &FrameConfig) -> Vec<(usize, usize)> {
        let (rows, cols) = self.guard_region(cfg);
        (0..cfg.n)
            .flat_map(|k| (0..cfg.m).map(move |l| (l, k)))
            .filter(|(l, k)| !(rows.contains(l) && cols.contains(k)))
            .collect()
    }
}

/// Reads the channel taps off a received pilot grid.
///
/// `y` is the `M x N` received grid, or for RFCP the `(M + L_cp) x N`
/// extended grid. The tap with delay `l_i` and Doppler `k_i` shows up at
/// `([l_p + l_i], [k_p + k_i]_N)` as `a h_i Gamma_i`; cells above three times
/// the mean guard-cell energy are divided by `a Gamma_i` and reported. The
/// returned Doppler values are native bins of `cfg`.
pub fn pilot_cir<T: Real>(y: &DelayDopplerFrame<T>, pilot: &PilotSpec, cfg: &FrameConfig) -> Result<ChannelModel<T>> {
    pilot.validate(cfg)?;
    let (m, n) = effective_dims(cfg);
    if y.rows() != m || y.cols() != n {
        return Err(OtfsError::ShapeMismatch {
            expected: format!("{m}x{n}"),
            found: format!("{}x{}", y.rows(), y.cols()),
        });
    }
    let offset = if cfg.kind == FrameKind::Rfcp { cfg.cp_len } else { 0 };
    let (lp, kp) = (pilot.position.0 + offset, pilot.position.1);
    let gd = pilot.guard_delay;
    let gk = pilot.guard_doppler as i64;

    // Noise floor from the guard rows above the pilot, which no tap reaches.
    let mut floor = 0.0;
    let mut count = 0usize;
    for d in 1..=gd {
        for dk in -gk..=gk {
            floor += y.data[(lp - d, wrap(kp as i64 + dk, n))].norm_sqr().to_f64_lossy();
            count += 1;
        }
    }
    if count > 0 {
        floor /= count as f64;
    }
    let threshold = (3.0 * floor).max(pilot.amplitude * pilot.amplitude * 1e-20);

    let amp = T::lit(pilot.amplitude);
    let mut taps = Vec::new();
    for d in 0..=gd.min(m - 1) {
        let l = (lp + d) % m;
        for dk in -gk..=gk {
            let k = wrap(kp as i64 + dk, n);
            let v = y.data[(l, k)];
            if v.norm_sqr().to_f64_lossy() <= threshold {
                continue;
            }
            let probe = ChannelTap::new(Complex::new(T::one(), T::zero()), d, T::lit(dk as f64));
            if let PhaseTerm::Unit(g) = gamma(cfg, &probe, l, k)? {
                taps.push(ChannelTap::new(v / (g * amp), d, T::lit(dk as f64)));
            }
        }
    }
    if taps.is_empty() {
        return Err(OtfsError::ZeroEnergy);
    }
    ChannelModel::new(taps, cfg.native_grid())
}
