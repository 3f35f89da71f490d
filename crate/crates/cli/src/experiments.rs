//! The experiments behind each subcommand. Each one returns a [`Table`] that
//! [`crate::output`] writes as CSV plus a JSON sidecar.

use otfs_core::grid::{FrameConfig, FrameKind};
use otfs_core::metrics::{capacity, leakage, nominal_bin, spectral_factor, tx_power};
use otfs_core::rfcp::PilotSpec;
use otfs_core::{build_time_channel, effective_from_time, Frame, Model, Result as CoreResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ChannelSpec, ExperimentConfig, ExperimentKind};
use crate::equivalence::{effective_input, identity_deviations, oracle_deviations, pipeline};
use crate::error::{CliError, Result};
use crate::seed::trial_seed;
use crate::sim::{ChannelSource, LinkSetup};

/// Column order of `ber_sweep` output.
pub const BER_COLUMNS: [&str; 11] = [
    "config",
    "M",
    "N",
    "Lcp",
    "Lzs",
    "detector",
    "snr_db",
    "ber",
    "ber_stderr",
    "trials",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Experiment-specific figures for the sidecar.
    pub summary: serde_json::Value,
}

fn frame_cols(f: &FrameConfig) -> Vec<String> {
    vec![
        f.kind.label().to_string(),
        f.m.to_string(),
        f.n.to_string(),
        f.cp_len.to_string(),
        f.zs_len.to_string(),
    ]
}

fn channel_source(cfg: &ExperimentConfig) -> Result<ChannelSource> {
    match &cfg.channel {
        Some(ChannelSpec::Random(r)) => Ok(ChannelSource::Random(*r)),
        Some(ChannelSpec::Model(_)) => Ok(ChannelSource::Fixed(cfg.fixed_model()?.expect("model"))),
        None => Err(CliError::Schema(format!(
            "channel: required for {}",
            cfg.experiment.name()
        ))),
    }
}

/// Channel for the single-shot experiments: the fixed model, or the draw of
/// trial 0.
fn single_channel(cfg: &ExperimentConfig) -> Result<Vec<Model>> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.master_seed, 0));
    Ok(channel_source(cfg)?.realise(&mut rng, &cfg.frames()))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::BerSweep => ber_sweep(cfg),
        ExperimentKind::CapacityTable => Ok(capacity_table(cfg)?),
        ExperimentKind::PowerTable => Ok(power_table(cfg)?),
        ExperimentKind::CirDump => cir_dump(cfg),
        ExperimentKind::MatrixDump => matrix_dump(cfg),
        ExperimentKind::EquivalenceCheck => equivalence_check(cfg),
    }
}

fn ber_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let setup = LinkSetup {
        frames: cfg.frames(),
        channel: channel_source(cfg)?,
        snr_db: cfg.snr_db.clone(),
        detectors: cfg.detectors(),
        qam_bits: cfg.qam_bits,
        mp: cfg.mp,
    };
    let tallies = setup.run(cfg.master_seed, cfg.trials)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (fi, f) in setup.frames.iter().enumerate() {
        for (di, d) in setup.detectors.iter().enumerate() {
            for (si, snr) in setup.snr_db.iter().enumerate() {
                let t = tallies.get(fi, di, si);
                let mut row = frame_cols(f);
                row.extend([
                    d.label().to_string(),
                    snr.to_string(),
                    t.ber().to_string(),
                    t.stderr().to_string(),
                    cfg.trials.to_string(),
                    cfg.master_seed.to_string(),
                ]);
                rows.push(row);
                summary.push(json!({"config": f, "detector": d, "snr_db": snr, "tally": t}));
            }
        }
    }
    Ok(Table {
        header: BER_COLUMNS.to_vec(),
        rows,
        summary: json!({ "tallies": summary }),
    })
}

pub fn capacity_table(cfg: &ExperimentConfig) -> CoreResult<Table> {
    let mut rows = Vec::new();
    for f in cfg.frames() {
        for &snr in &cfg.snr_db {
            let gamma = 10f64.powf(snr / 10.0);
            let mut row = frame_cols(&f);
            row.extend([
                snr.to_string(),
                capacity(&f, gamma)?.to_string(),
                spectral_factor(&f).to_string(),
            ]);
            rows.push(row);
        }
    }
    Ok(Table {
        header: vec![
            "config",
            "M",
            "N",
            "Lcp",
            "Lzs",
            "snr_db",
            "capacity",
            "spectral_eff_factor",
        ],
        rows,
        summary: json!({}),
    })
}

pub fn power_table(cfg: &ExperimentConfig) -> CoreResult<Table> {
    let mut rows = Vec::new();
    for f in cfg.frames() {
        let mut row = frame_cols(&f);
        row.extend([
            cfg.symbol_power.to_string(),
            tx_power(&f, cfg.symbol_power)?.to_string(),
            (1.0 / tx_power(&f, 1.0)?).to_string(),
        ]);
        rows.push(row);
    }
    Ok(Table {
        header: vec![
            "config",
            "M",
            "N",
            "Lcp",
            "Lzs",
            "symbol_power",
            "tx_power",
            "power_eff_factor",
        ],
        rows,
        summary: json!({}),
    })
}

/// Cells where each tap should put the energy of each nonzero input cell:
/// `([l0 + l_i], [k0 + round(k_i)]_N)` on the effective grid.
pub fn expected_bins(input: &Frame, model: &Model, cfg: &FrameConfig) -> Vec<(usize, usize)> {
    let (m, n) = (input.rows(), input.cols());
    let mut bins = Vec::new();
    for k0 in 0..n {
        for l0 in 0..m {
            if input.data[(l0, k0)].norm_sqr() == 0.0 {
                continue;
            }
            for t in &model.taps {
                let k = nominal_bin(model.native_doppler(t, cfg));
                bins.push(((l0 + t.delay) % m, otfs_core::scalar::wrap(k0 as i64 + k, n)));
            }
        }
    }
    bins
}

/// Noiseless received pilot grid and its Doppler leakage.
pub fn pilot_response(pilot: &PilotSpec, model: &Model, cfg: &FrameConfig) -> CoreResult<(Frame, f64)> {
    let x: Frame = pilot.frame(cfg)?;
    let y = pipeline(&x, model, cfg)?;
    let bins = expected_bins(&effective_input(&x, cfg)?, model, cfg);
    let leak = leakage(&y, &bins)?;
    Ok((y, leak))
}

fn default_pilot() -> PilotSpec {
    PilotSpec {
        position: (0, 0),
        amplitude: 1.0,
        guard_delay: 0,
        guard_doppler: 0,
    }
}

fn cir_dump(cfg: &ExperimentConfig) -> Result<Table> {
    let pilot = cfg.pilot.unwrap_or_else(default_pilot);
    let models = single_channel(cfg)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (f, model) in cfg.frames().iter().zip(&models) {
        let (y, leak) = pilot_response(&pilot, model, f)?;
        let offset = if f.kind == FrameKind::Rfcp { f.cp_len } else { 0 };
        for k in 0..y.cols() {
            for l in 0..y.rows() {
                let v = y.data[(l, k)];
                let block = if l < offset { "cp" } else { "data" };
                let mut row = frame_cols(f);
                row.extend([
                    block.to_string(),
                    l.to_string(),
                    k.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                    v.norm().to_string(),
                ]);
                rows.push(row);
            }
        }
        summary.push(json!({"config": f, "doppler_leakage": leak}));
    }
    Ok(Table {
        header: vec!["config", "M", "N", "Lcp", "Lzs", "block", "l", "k", "re", "im", "abs"],
        rows,
        summary: json!({ "pilot": pilot, "frames": summary }),
    })
}

fn matrix_dump(cfg: &ExperimentConfig) -> Result<Table> {
    let models = single_channel(cfg)?;
    let mut rows = Vec::new();
    for (f, model) in cfg.frames().iter().zip(&models) {
        let h = build_time_channel(model, f)?;
        let heff = effective_from_time(&h)?;
        for (name, m) in [("time", &h.matrix), ("effective", &heff.matrix)] {
            for &(r, c, v) in m.entries() {
                let mut row = frame_cols(f);
                row.extend([
                    name.to_string(),
                    r.to_string(),
                    c.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ]);
                rows.push(row);
            }
        }
    }
    Ok(Table {
        header: vec!["config", "M", "N", "Lcp", "Lzs", "matrix", "row", "col", "re", "im"],
        rows,
        summary: json!({}),
    })
}

fn equivalence_check(cfg: &ExperimentConfig) -> Result<Table> {
    let Some(ChannelSpec::Random(spec)) = &cfg.channel else {
        return Err(CliError::Schema(
            "channel: equivalence_check needs a random channel".into(),
        ));
    };
    let frames = cfg.frames();
    // (frame, check) -> worst deviation over all trials.
    let mut worst: Vec<(FrameConfig, &'static str, f64)> = Vec::new();
    let mut bump = |f: FrameConfig, name: &'static str, d: f64| match worst.iter_mut().find(|w| w.0 == f && w.1 == name)
    {
        Some(w) => w.2 = w.2.max(d),
        None => worst.push((f, name, d)),
    };
    for t in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.master_seed, t));
        let draw = spec.draw::<f64, _>(&mut rng);
        for f in &frames {
            let v = (0..f.grid_len())
                .map(|_| num_complex::Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let x = Frame::from_vec(f.m, f.n, v)?;
            for (name, d) in oracle_deviations(&x, &draw.model_for(f), f)? {
                bump(*f, name, d);
            }
            if f.kind == FrameKind::Rcp && f.cp_len < f.m {
                for (name, d) in identity_deviations(&x, &draw, f.m, f.n, f.cp_len)? {
                    bump(*f, name, d);
                }
            }
        }
    }
    let overall = worst.iter().map(|w| w.2).fold(0.0, f64::max);
    let rows = worst
        .iter()
        .map(|(f, name, d)| {
            let mut row = frame_cols(f);
            row.extend([
                name.to_string(),
                d.to_string(),
                cfg.trials.to_string(),
                cfg.master_seed.to_string(),
            ]);
            row
        })
        .collect();
    Ok(Table {
        header: vec![
            "config",
            "M",
            "N",
            "Lcp",
            "Lzs",
            "check",
            "max_abs_dev",
            "trials",
            "seed",
        ],
        rows,
        summary: json!({ "max_abs_dev": overall, "tolerance": 1e-10, "pass": overall <= 1e-10 }),
    })
}
