//! Symbol mapping and delay-Doppler detection: ZF, MMSE and message passing.
//!
//! Detectors take an [`EffectiveChannel`](crate::effective::EffectiveChannel)
//! and act on its data columns only: for FZS the zero-suffix cells are known
//! to be zero and are left out of the unknowns, and the returned vector holds
//! zeros there.

mod banded;
mod linear;
mod mp;

pub use banded::{BorderedBandedSolver, TimeDomainEqualizer};
pub use linear::{mmse_detect, mmse_solve, zf_detect, zf_solve};
pub use mp::{mp_detect, mp_solve, MpConfig};

use num_complex::Complex;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::scalar::{Real, C};

/// Detector choice for experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "MP")]
    Mp,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Zf, DetectorKind::Mmse, DetectorKind::Mp];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Zf => "ZF",
            DetectorKind::Mmse => "MMSE",
            DetectorKind::Mp => "MP",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Gray-labelled square QAM with unit average energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation<T: Real> {
    points: Vec<C<T>>,
    bits_per_symbol: usize,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl<T: Real> Constellation<T> {
    /// Square QAM with `2^bits_per_symbol` points; `bits_per_symbol` must be even.
    pub fn qam(bits_per_symbol: usize) -> Result<Self> {
        if bits_per_symbol == 0 || bits_per_symbol % 2 != 0 || bits_per_symbol > 16 {
            return Err(OtfsError::InvalidInput(format!(
                "square QAM needs an even number of bits per symbol, got {bits_per_symbol}"
            )));
        }
        let half = bits_per_symbol / 2;
        let side = 1usize << half;
        // PAM levels -(side-1), .., side-1 indexed by the Gray label of each axis.
        let mut level = vec![0.0f64; side];
        for i in 0..side {
            level[gray(i)] = (2 * i) as f64 - (side - 1) as f64;
        }
        let energy = 2.0 * level.iter().map(|v| v * v).sum::<f64>() / side as f64;
        let scale = 1.0 / energy.sqrt();
        let points = (0..1usize << bits_per_symbol)
            .map(|label| {
                let re = level[label >> half] * scale;
                let im = level[label & (side - 1)] * scale;
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        Ok(Self {
            points,
            bits_per_symbol,
        })
    }

    /// Gray-coded 4-QAM, the default constellation.
    pub fn qpsk() -> Self {
        Self::qam(2).expect("4-QAM is valid")
    }

    pub fn points(&self) -> &[C<T>] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point.
    pub fn slice(&self, x: C<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Smallest distance between two points.
    pub fn min_distance(&self) -> T {
        let mut d = T::infinity();
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = Float::min(d, (a - b).norm());
            }
        }
        d
    }

    /// Bits of `label`, most significant first.
    fn push_bits(&self, label: usize, out: &mut Vec<u8>) {
        for b in (0..self.bits_per_symbol).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
}

/// Maps bits (one `u8` of 0/1 per bit, most significant first) to symbols.
pub fn map_bits<T: Real>(bits: &[u8], cons: &Constellation<T>) -> Result<Vec<C<T>>> {
    let q = cons.bits_per_symbol();
    if bits.len() % q != 0 {
        return Err(OtfsError::InvalidInput(format!(
            "{} bits do not fill whole {q}-bit symbols",
            bits.len()
        )));
    }
    bits.chunks(q)
        .map(|chunk| {
            let mut label = 0usize;
            for &b in chunk {
                if b > 1 {
                    return Err(OtfsError::InvalidInput(format!("bit value {b} is not 0 or 1")));
                }
                label = (label << 1) | b as usize;
            }
            Ok(cons.points()[label])
        })
        .collect()
}

/// Minimum-distance demapping back to bits.
pub fn demap_symbols<T: Real>(x: &[C<T>], cons: &Constellation<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(x.len() * cons.bits_per_symbol());
    for &v in x {
        cons.push_bits(cons.slice(v), &mut out);
    }
    out
}

/// Hard decisions: each estimate replaced by its nearest point.
pub fn hard_decide<T: Real>(x: &[C<T>], cons: &Constellation<T>) -> Vec<C<T>> {
    x.iter().map(|&v| cons.points()[cons.slice(v)]).collect()
}
