//! Numerical cross-checks between the independent routes to the received
//! delay-Doppler grid, and between configurations that should coincide.

use otfs_core::channel::ChannelDraw;
use otfs_core::grid::{FrameConfig, FrameKind, OtfsTransform};
use otfs_core::rfcp::{build_rfcp, extend_grid, rfcp_extended};
use otfs_core::scalar::max_abs_diff;
use otfs_core::{
    add_framing, build_time_channel, effective_from_time, heff_closed_form, io_response, propagate, strip_framing,
    Frame, Model, NoiseSpec, Result,
};

/// Received grid through framing, sample-level propagation, deframing and
/// demodulation. For RFCP the extended grid is returned.
pub fn pipeline(x: &Frame, model: &Model, cfg: &FrameConfig) -> Result<Frame> {
    if cfg.kind == FrameKind::Rfcp {
        let r = propagate(&build_rfcp(x, cfg)?, model, cfg, &NoiseSpec::off(), 0)?;
        return rfcp_extended(&r, cfg);
    }
    let s = OtfsTransform::new(cfg.m, cfg.n)?.modulate(x)?;
    let r = propagate(&add_framing(&s, cfg)?, model, cfg, &NoiseSpec::off(), 0)?;
    OtfsTransform::new(cfg.m, cfg.n)?.demodulate(&strip_framing(&r, cfg)?.samples)
}

/// Input as the effective channel sees it: suffix rows cleared for FZS,
/// extended grid for RFCP.
pub fn effective_input(x: &Frame, cfg: &FrameConfig) -> Result<Frame> {
    match cfg.kind {
        FrameKind::Rfcp => extend_grid(x, cfg.cp_len),
        FrameKind::Fzs => Ok(x.with_suffix_cleared(cfg)),
        _ => Ok(x.clone()),
    }
}

/// Largest entry-wise deviation of the time-derived `H_eff`, the pipeline and
/// the twisted convolution from the closed form.
pub fn oracle_deviations(x: &Frame, model: &Model, cfg: &FrameConfig) -> Result<Vec<(&'static str, f64)>> {
    let closed = heff_closed_form(model, cfg)?;
    let from_time = effective_from_time(&build_time_channel(model, cfg)?)?;
    let d_time = max_abs_diff(closed.to_dense().as_slice(), from_time.to_dense().as_slice());
    let xin = effective_input(x, cfg)?;
    let want = closed.apply(&xin)?;
    let d_pipe = max_abs_diff(want.as_vec(), pipeline(&xin_for_pipeline(x, cfg), model, cfg)?.as_vec());
    let d_io = max_abs_diff(want.as_vec(), io_response(&xin, model, cfg)?.as_vec());
    Ok(vec![
        ("closed_vs_time", d_time),
        ("closed_vs_pipeline", d_pipe),
        ("closed_vs_io", d_io),
    ])
}

fn xin_for_pipeline(x: &Frame, cfg: &FrameConfig) -> Frame {
    match cfg.kind {
        FrameKind::Fzs => x.with_suffix_cleared(cfg),
        _ => x.clone(),
    }
}

/// Configuration identities for one channel draw on an `M x N` grid with
/// prefix/suffix length `l`:
///
/// * RZP and RCP give the same received grid;
/// * FCP equals RCP on the `(M + l) x N` extended grid, rows `l..`;
/// * FZS equals RCP when the last `l` delay rows are empty.
pub fn identity_deviations(
    x: &Frame,
    draw: &ChannelDraw<f64>,
    m: usize,
    n: usize,
    l: usize,
) -> Result<Vec<(&'static str, f64)>> {
    let rcp = FrameConfig::rcp(m, n, l)?;
    let rzp = FrameConfig::rzp(m, n, l)?;
    let fcp = FrameConfig::fcp(m, n, l)?;
    let fzs = FrameConfig::fzs(m, n, l)?;
    let ext = FrameConfig::rcp(m + l, n, l)?;

    let y_rcp = pipeline(x, &draw.model_for(&rcp), &rcp)?;
    let y_rzp = pipeline(x, &draw.model_for(&rzp), &rzp)?;
    let d_rzp = max_abs_diff(y_rcp.as_vec(), y_rzp.as_vec());

    // Both frames have (M + l) N samples, so the draw lands on the same bins.
    let y_fcp = pipeline(x, &draw.model_for(&fcp), &fcp)?;
    let y_ext = io_response(&extend_grid(x, l)?, &draw.model_for(&ext), &ext)?;
    let rows = y_ext.data.rows(l, m).into_owned();
    let d_fcp = max_abs_diff(y_fcp.as_vec(), rows.as_slice());

    let xz = x.with_suffix_cleared(&fzs);
    let y_fzs = pipeline(&xz, &draw.model_for(&fzs), &fzs)?;
    let y_rcp_z = io_response(&xz, &draw.model_for(&rcp), &rcp)?;
    let d_fzs = max_abs_diff(y_fzs.as_vec(), y_rcp_z.as_vec());

    Ok(vec![
        ("rzp_vs_rcp", d_rzp),
        ("fcp_vs_extended_rcp", d_fcp),
        ("fzs_vs_rcp_zero_tail", d_fzs),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use otfs_core::channel::RandomChannelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(r: &mut ChaCha8Rng, m: usize, n: usize) -> Frame {
        let v = (0..m * n)
            .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        Frame::from_vec(m, n, v).unwrap()
    }

    #[test]
    fn all_routes_agree() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let spec = RandomChannelSpec {
            taps: 3,
            k_max: 2,
            max_delay: 3,
            doppler_frame_len: None,
        };
        for _ in 0..5 {
            let draw = spec.draw::<f64, _>(&mut r);
            let x = random_frame(&mut r, 8, 4);
            for cfg in [
                FrameConfig::rcp(8, 4, 3).unwrap(),
                FrameConfig::rzp(8, 4, 3).unwrap(),
                FrameConfig::fcp(8, 4, 3).unwrap(),
                FrameConfig::fzs(8, 4, 3).unwrap(),
                FrameConfig::rfcp(8, 4, 3).unwrap(),
            ] {
                for (name, d) in oracle_deviations(&x, &draw.model_for(&cfg), &cfg).unwrap() {
                    assert!(d < 1e-10, "{cfg} {name}: {d}");
                }
            }
            for (name, d) in identity_deviations(&x, &draw, 8, 4, 3).unwrap() {
                assert!(d < 1e-10, "{name}: {d}");
            }
        }
    }
}
