//! Link-level Monte Carlo: random bits, framing, propagation, detection.
//!
//! Every configuration in a sweep sees the same channel draw, the same bit
//! stream (truncated to its payload) and the same unit-variance noise
//! realisation scaled per SNR, so differences between configurations are not
//! diluted by independent sampling noise.

use num_complex::Complex;
use otfs_core::channel::{ChannelModel, ChannelTap, RandomChannelSpec, TimeChannelMatrix};
use otfs_core::detect::{
    demap_symbols, map_bits, mp_detect, Constellation, DetectorKind, MpConfig, TimeDomainEqualizer,
};
use otfs_core::effective::effective_dims;
use otfs_core::grid::{DelayDopplerFrame, FrameConfig, FrameKind, OtfsTransform};
use otfs_core::metrics::{count_errors, nominal_bin, BerTally};
use otfs_core::rfcp::split_extended;
use otfs_core::{
    add_framing, build_time_channel, heff_closed_form, propagate, strip_framing, Model, NoiseSpec, OtfsError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::seed::{stream_seed, trial_seed};

/// Where each trial's channel comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSource {
    Fixed(Model),
    Random(RandomChannelSpec),
}

impl ChannelSource {
    /// Channel of one trial on `cfg`'s native grid.
    pub fn realise(&self, rng: &mut ChaCha8Rng, frames: &[FrameConfig]) -> Vec<Model> {
        match self {
            ChannelSource::Fixed(m) => frames.iter().map(|_| m.clone()).collect(),
            ChannelSource::Random(spec) => {
                let draw = spec.draw::<f64, _>(rng);
                frames.iter().map(|f| draw.model_for(f)).collect()
            }
        }
    }
}

/// The channel the receiver equalises with: every tap moved to the nearest
/// integer Doppler bin of `cfg`'s native grid (ties toward the lower bin).
///
/// With integer-bin physical Doppler this is the true channel; otherwise it is
/// what an integer-grid delay-Doppler estimate would report.
pub fn receiver_model(model: &Model, cfg: &FrameConfig) -> Model {
    let native = model.on_native_grid(cfg);
    ChannelModel {
        taps: native
            .taps
            .iter()
            .map(|t| ChannelTap::new(t.gain, t.delay, nominal_bin(t.doppler) as f64))
            .collect(),
        grid: native.grid,
        normalized: native.normalized,
    }
}

/// Relative Tikhonov weight used when a channel is numerically singular.
pub const ZF_FALLBACK_REG: f64 = 1e-10;

/// ZF equaliser. Doubly dispersive channels on a few hundred samples are
/// numerically singular now and then; for those the exact inverse does not
/// exist and the solve falls back to `(H^H H + eps I)^{-1} H^H` with
/// `eps = ZF_FALLBACK_REG * sum |h_i|^2`, which is the pseudo-inverse up to
/// directions the channel does not excite.
pub fn zero_forcing(h: &TimeChannelMatrix<f64>, power: f64) -> otfs_core::Result<TimeDomainEqualizer<f64>> {
    match TimeDomainEqualizer::new(h, 0.0) {
        Err(OtfsError::SingularMatrix) => TimeDomainEqualizer::new(h, ZF_FALLBACK_REG * power),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSetup {
    pub frames: Vec<FrameConfig>,
    pub channel: ChannelSource,
    pub snr_db: Vec<f64>,
    pub detectors: Vec<DetectorKind>,
    pub qam_bits: usize,
    pub mp: MpConfig,
}

/// Error tallies indexed by (frame, detector, SNR).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepTallies {
    dims: (usize, usize, usize),
    cells: Vec<BerTally>,
}

impl SweepTallies {
    pub fn new(frames: usize, detectors: usize, snrs: usize) -> Self {
        Self {
            dims: (frames, detectors, snrs),
            cells: vec![BerTally::default(); frames * detectors * snrs],
        }
    }

    fn index(&self, f: usize, d: usize, s: usize) -> usize {
        (f * self.dims.1 + d) * self.dims.2 + s
    }

    pub fn get(&self, f: usize, d: usize, s: usize) -> &BerTally {
        &self.cells[self.index(f, d, s)]
    }

    fn get_mut(&mut self, f: usize, d: usize, s: usize) -> &mut BerTally {
        let i = self.index(f, d, s);
        &mut self.cells[i]
    }

    pub fn merge(mut self, other: &SweepTallies) -> Self {
        assert_eq!(self.dims, other.dims, "merging tallies of different sweeps");
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self
    }
}

impl LinkSetup {
    pub fn tallies(&self) -> SweepTallies {
        SweepTallies::new(self.frames.len(), self.detectors.len(), self.snr_db.len())
    }

    /// Runs `trials` frames, trial `i` seeded by `trial_seed(master_seed, i)`.
    /// The result does not depend on how rayon schedules the trials.
    pub fn run(&self, master_seed: u64, trials: u64) -> otfs_core::Result<SweepTallies> {
        (0..trials)
            .into_par_iter()
            .map(|i| self.run_trial(trial_seed(master_seed, i)))
            .try_reduce(|| self.tallies(), |a, b| Ok(a.merge(&b)))
    }

    /// One frame per configuration, detected at every SNR by every detector.
    pub fn run_trial(&self, seed: u64) -> otfs_core::Result<SweepTallies> {
        let cons = Constellation::<f64>::qam(self.qam_bits)?;
        let q = cons.bits_per_symbol();
        let models = self
            .channel
            .realise(&mut ChaCha8Rng::seed_from_u64(stream_seed(seed, 0)), &self.frames);
        let most = self.frames.iter().map(|f| f.data_indices().len()).max().unwrap_or(0);
        let mut bit_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 1));
        let bits: Vec<u8> = (0..most * q).map(|_| bit_rng.random_range(0..2u8)).collect();
        let noise_seed = stream_seed(seed, 2);

        let mut out = self.tallies();
        for (fi, (cfg, model)) in self.frames.iter().zip(&models).enumerate() {
            model.check_delays(cfg)?;
            let cells = cfg.data_indices();
            let tx_bits = &bits[..cells.len() * q];
            let mut grid = vec![Complex::new(0.0, 0.0); cfg.grid_len()];
            for (&c, s) in cells.iter().zip(map_bits(tx_bits, &cons)?) {
                grid[c] = s;
            }
            let x = DelayDopplerFrame::from_vec(cfg.m, cfg.n, grid)?;
            let framed = add_framing(&OtfsTransform::new(cfg.m, cfg.n)?.modulate(&x)?, cfg)?;

            let rx_model = receiver_model(model, cfg);
            let h = build_time_channel(&rx_model, cfg)?;
            let (em, en) = effective_dims(cfg);
            let tr = OtfsTransform::<f64>::new(em, en)?;
            let zf = if self.detectors.contains(&DetectorKind::Zf) {
                Some(zero_forcing(&h, model.power())?)
            } else {
                None
            };
            let heff = if self.detectors.contains(&DetectorKind::Mp) {
                Some(heff_closed_form(&rx_model, cfg)?)
            } else {
                None
            };

            for (si, &snr) in self.snr_db.iter().enumerate() {
                let noise = NoiseSpec::snr_db(snr);
                let sigma2 = noise.variance();
                let r = strip_framing(&propagate(&framed, model, cfg, &noise, noise_seed)?, cfg)?;
                for (di, det) in self.detectors.iter().enumerate() {
                    let est = match det {
                        DetectorKind::Zf => zf.as_ref().expect("ZF equaliser").detect(&r.samples, &tr)?,
                        DetectorKind::Mmse => TimeDomainEqualizer::new(&h, sigma2)?.detect(&r.samples, &tr)?,
                        DetectorKind::Mp => {
                            let y = tr.demodulate(&r.samples)?;
                            let heff = heff.as_ref().expect("MP channel");
                            DelayDopplerFrame::from_vec(em, en, mp_detect(heff, y.as_vec(), &cons, sigma2, &self.mp)?)?
                        }
                    };
                    let est = if cfg.kind == FrameKind::Rfcp {
                        split_extended(&est, cfg.cp_len).0
                    } else {
                        est
                    };
                    let symbols: Vec<_> = cells.iter().map(|&c| est.as_vec()[c]).collect();
                    let rx_bits = demap_symbols(&symbols, &cons);
                    out.get_mut(fi, di, si)
                        .record(tx_bits.len() as u64, count_errors(tx_bits, &rx_bits) as u64);
                }
            }
        }
        Ok(out)
    }
}
