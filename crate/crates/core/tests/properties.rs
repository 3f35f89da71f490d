use num_complex::Complex;
use otfs_core::channel::{ChannelModel, ChannelTap};
use otfs_core::effective::{effective_dims, max_gamma_modulus_error};
use otfs_core::grid::DelayDopplerFrame;
use otfs_core::metrics::{capacity, leakage, tx_power, BerTally};
use otfs_core::scalar::max_abs_diff;
use otfs_core::{
    add_framing, build_time_channel, effective_from_time, heff_closed_form, io_response, isfft, propagate, sfft,
    strip_framing, FrameConfig, FrameKind, NoiseSpec, OtfsTransform, ReferenceGrid,
};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = FrameKind> {
    prop::sample::select(FrameKind::ALL.to_vec())
}

fn dim() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![2usize, 4, 8])
}

fn grid(m: usize, n: usize) -> impl Strategy<Value = DelayDopplerFrame<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * n).prop_map(move |v| {
        DelayDopplerFrame::from_vec(m, n, v.into_iter().map(|(a, b)| Complex::new(a, b)).collect()).unwrap()
    })
}

/// Frame config plus an integer-Doppler model whose delays fit it.
fn case() -> impl Strategy<Value = (FrameConfig, ChannelModel<f64>, DelayDopplerFrame<f64>)> {
    (kind(), dim(), dim()).prop_flat_map(|(kind, m, n)| {
        let l = (m - 1).min(3);
        let cfg = match kind {
            FrameKind::Fzs => FrameConfig::new(kind, m, n, 0, l).unwrap(),
            _ => FrameConfig::new(kind, m, n, l, 0).unwrap(),
        };
        let taps = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0..=l, -(n as i64)..=(n as i64)), 1..=4);
        (Just(cfg), taps, grid(m, n)).prop_map(|(cfg, taps, x)| {
            let taps = taps
                .into_iter()
                .map(|(a, b, d, k)| ChannelTap::new(Complex::new(a, b), d, k as f64))
                .collect();
            let model = ChannelModel::new(taps, cfg.native_grid()).unwrap();
            (cfg, model, x)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sfft_inverts_isfft((m, n) in (dim(), dim()), seed in any::<u64>()) {
        let v = (0..m * n).map(|i| Complex::new(((seed >> (i % 60)) & 7) as f64 - 3.5, i as f64)).collect();
        let x = DelayDopplerFrame::from_vec(m, n, v).unwrap();
        let back = sfft(&isfft(&x).unwrap()).unwrap();
        prop_assert!(max_abs_diff(back.as_vec(), x.as_vec()) < 1e-9);
    }

    #[test]
    fn modulation_is_unitary(x in dim().prop_flat_map(|m| dim().prop_flat_map(move |n| grid(m, n)))) {
        let tr = OtfsTransform::new(x.rows(), x.cols()).unwrap();
        let s = tr.modulate(&x).unwrap();
        prop_assert!((s.energy() - x.energy()).abs() < 1e-10 * (1.0 + x.energy()));
        let back = tr.demodulate(&s.samples).unwrap();
        prop_assert!(max_abs_diff(back.as_vec(), x.as_vec()) < 1e-12);
    }

    #[test]
    fn framing_round_trips_without_channel(c in case()) {
        let (cfg, _, x) = c;
        let x = if cfg.kind == FrameKind::Rfcp { return Ok(()); } else { x.with_suffix_cleared(&cfg) };
        let s = OtfsTransform::new(cfg.m, cfg.n).unwrap().modulate(&x).unwrap();
        let framed = add_framing(&s, &cfg).unwrap();
        prop_assert_eq!(framed.len(), cfg.transmit_len());
        let back = strip_framing(&framed, &cfg).unwrap();
        prop_assert!(max_abs_diff(&back.samples, &s.samples) < 1e-15);
    }

    #[test]
    fn closed_form_matches_time_domain_and_twisted_convolution(c in case()) {
        let (cfg, model, x) = c;
        let closed = heff_closed_form(&model, &cfg).unwrap();
        let timed = effective_from_time(&build_time_channel(&model, &cfg).unwrap()).unwrap();
        prop_assert!(max_abs_diff(closed.to_dense().as_slice(), timed.to_dense().as_slice()) < 1e-10);
        let (em, en) = effective_dims(&cfg);
        let xin = if cfg.kind == FrameKind::Rfcp {
            otfs_core::extend_grid(&x, cfg.cp_len).unwrap()
        } else {
            x.clone()
        };
        prop_assert_eq!((xin.rows(), xin.cols()), (em, en));
        let y = io_response(&xin, &model, &cfg).unwrap();
        prop_assert!(max_abs_diff(y.as_vec(), closed.apply(&xin).unwrap().as_vec()) < 1e-10);
        // At most one entry per tap in every row.
        prop_assert!(closed.max_row_nnz() <= model.taps.len());
        for t in &model.taps {
            prop_assert!(max_gamma_modulus_error(&cfg, &ChannelTap::new(t.gain, t.delay, t.doppler)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn noise_free_propagation_is_linear(c in case(), a in -2.0f64..2.0) {
        let (cfg, model, x) = c;
        if cfg.kind == FrameKind::Rfcp { return Ok(()); }
        let tr = OtfsTransform::new(cfg.m, cfg.n).unwrap();
        let s = add_framing(&tr.modulate(&x).unwrap(), &cfg).unwrap();
        let r1 = propagate(&s, &model, &cfg, &NoiseSpec::off(), 0).unwrap();
        let scaled = otfs_core::grid::TimeFrame::new(s.samples.iter().map(|v| v * a).collect());
        let r2 = propagate(&scaled, &model, &cfg, &NoiseSpec::off(), 0).unwrap();
        let want: Vec<_> = r1.samples.iter().map(|v| v * a).collect();
        prop_assert!(max_abs_diff(&r2.samples, &want) < 1e-12);
    }

    #[test]
    fn capacity_and_power_orderings(m in 2usize..64, n in 2usize..64, l in 1usize..16, snr in 0.0f64..40.0) {
        prop_assume!(l < m);
        let gamma = 10f64.powf(snr / 10.0);
        let rcp = FrameConfig::rcp(m, n, l).unwrap();
        let rzp = FrameConfig::rzp(m, n, l).unwrap();
        let fcp = FrameConfig::fcp(m, n, l).unwrap();
        let fzs = FrameConfig::fzs(m, n, l).unwrap();
        let c = |f: &FrameConfig| capacity(f, gamma).unwrap();
        let p = |f: &FrameConfig| tx_power(f, 1.0).unwrap();
        prop_assert_eq!(c(&rcp), c(&rzp));
        prop_assert!(c(&rcp) > c(&fcp) || gamma == 1.0 && c(&rcp) >= c(&fcp));
        prop_assert!(c(&rcp) >= c(&fzs));
        prop_assert!(p(&fcp) > p(&rcp) && p(&rcp) > p(&rzp) && p(&rzp) == p(&fzs));
        let fcp2 = FrameConfig::fcp(m + 1, n, l + 1).unwrap();
        prop_assert!(p(&fcp2) > p(&fcp));
        if l + 1 < m {
            prop_assert!(c(&FrameConfig::fcp(m, n, l + 1).unwrap()) < c(&fcp) || gamma == 1.0);
            prop_assert!(c(&FrameConfig::fzs(m, n, l + 1).unwrap()) < c(&fzs) || gamma == 1.0);
        }
    }

    #[test]
    fn tally_merge_is_associative(frames in prop::collection::vec(0u64..64, 1..40), cut in 0usize..40) {
        let cut = cut.min(frames.len());
        let mut whole = BerTally::default();
        frames.iter().for_each(|&e| whole.record(64, e));
        let (mut a, mut b) = (BerTally::default(), BerTally::default());
        frames[..cut].iter().for_each(|&e| a.record(64, e));
        frames[cut..].iter().for_each(|&e| b.record(64, e));
        b.merge(&a);
        prop_assert_eq!(whole, b);
        prop_assert!((0.0..=1.0).contains(&whole.ber()));
    }

    #[test]
    fn leakage_is_a_fraction(x in grid(4, 4), bins in prop::collection::vec((0usize..4, 0usize..4), 0..8)) {
        prop_assume!(x.energy() > 0.0);
        let v = leakage(&x, &bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn single_precision_pipeline() {
    let cfg = FrameConfig::rcp(8, 4, 2).unwrap();
    let model = ChannelModel::<f32>::new(
        vec![
            ChannelTap::new(Complex::new(1.0, 0.0), 0, 0.0),
            ChannelTap::new(Complex::new(0.5, -0.25), 2, 1.0),
        ],
        ReferenceGrid::Reduced,
    )
    .unwrap();
    let v: Vec<Complex<f32>> = (0..32)
        .map(|i| Complex::new((i % 5) as f32 - 2.0, (i % 3) as f32))
        .collect();
    let x = DelayDopplerFrame::from_vec(8, 4, v).unwrap();
    let tr = OtfsTransform::<f32>::new(8, 4).unwrap();
    let r = propagate(
        &add_framing(&tr.modulate(&x).unwrap(), &cfg).unwrap(),
        &model,
        &cfg,
        &NoiseSpec::off(),
        0,
    )
    .unwrap();
    let y = tr.demodulate(&strip_framing(&r, &cfg).unwrap().samples).unwrap();
    let want = heff_closed_form(&model, &cfg).unwrap().apply(&x).unwrap();
    assert!(max_abs_diff(y.as_vec(), want.as_vec()) < 1e-4);
}
