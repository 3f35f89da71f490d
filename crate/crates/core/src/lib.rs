//! OTFS modulation with rectangular pulses under reduced and full
//! prefix/suffix framings (RCP, RZP, FCP, FZS, RFCP).
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar to `f64` for everyday use.

pub mod channel;
pub mod detect;
pub mod effective;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod rfcp;
pub mod scalar;
pub mod sparse;

#[cfg(test)]
mod testutil;

pub use channel::{
    add_framing, build_time_channel, noise_variance, per_sample_phase, propagate, strip_framing, ChannelDraw,
    ChannelTap, NoiseSpec, RandomChannelSpec,
};
pub use detect::{
    demap_symbols, map_bits, mmse_detect, mp_detect, zf_detect, Constellation, DetectorKind, MpConfig,
    TimeDomainEqualizer,
};
pub use effective::{
    effective_from_time, gamma, heff_closed_form, io_response, static_equalize, EffectiveChannel, PhaseTerm,
};
pub use error::{OtfsError, Result};
pub use grid::{
    dft_matrix, isfft, otfs_demodulate, otfs_modulate, sfft, FrameConfig, FrameKind, OtfsTransform, ReferenceGrid,
};
pub use metrics::{
    ber, capacity, doppler_leakage, efficiency_report, tx_power, BerEstimate, BerTally, EfficiencyReport,
};
pub use rfcp::{build_rfcp, extend_grid, pilot_cir, rfcp_receive, PilotSpec, RfcpFrame};
pub use scalar::{Real, C};
pub use sparse::SparseMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Complex64 = num_complex::Complex<f64>;
pub type Frame = grid::DelayDopplerFrame<f64>;
pub type TfFrame = grid::TimeFrequencyFrame<f64>;
pub type Samples = grid::TimeFrame<f64>;
pub type Tap = channel::ChannelTap<f64>;
pub type Model = channel::ChannelModel<f64>;
pub type TimeMatrix = channel::TimeChannelMatrix<f64>;
pub type Effective = effective::EffectiveChannel<f64>;
