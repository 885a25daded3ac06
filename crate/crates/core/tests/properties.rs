use proptest::prelude::*;
use uwb_link::analysis::{sigma_mui2, AnalysisOptions};
use uwb_link::channel::{erlang_pdf, ChannelParams, ChannelRealization};
use uwb_link::modem::{decision_statistic, DecisionComponents, PulseTrain, SystemParams, UserSignal};
use uwb_link::montecarlo::{wilson_interval, Z_95};
use uwb_link::pulse::{autocorrelation, bandwidth_10db, make_gaussian_doublet, PulseShape};
use uwb_link::quadrature::{integrate, QuadratureSpec};

fn train(sys: &SystemParams, first: i64, bits: &[i8], codes: &[u32], delay: f64) -> PulseTrain {
    let n = (sys.pulses_per_symbol as i64 - first) as usize;
    PulseTrain {
        first_frame: first,
        bits: bits.iter().cycle().take(n).copied().collect(),
        codes: codes.iter().cycle().take(n).copied().collect(),
        delay_ns: delay,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn autocorrelation_symmetric_and_bounded(shape in 0.08f64..0.5, fine in proptest::bool::ANY) {
        let intervals = if fine { 128.0 } else { 64.0 };
        let p = make_gaussian_doublet(shape, 0.5, 0.5 / intervals).unwrap();
        let r = autocorrelation(&p);
        let v = r.values();
        let mid = v.len() / 2;
        prop_assert!((v[mid] - 1.0).abs() < 1e-12);
        for i in 0..v.len() {
            prop_assert!((v[i] - v[v.len() - 1 - i]).abs() < 1e-12);
            prop_assert!(v[i].abs() <= v[mid] + 1e-12);
        }
        prop_assert_eq!(v[0], 0.0);
    }

    #[test]
    fn correlator_linear_in_taps(
        delays in proptest::collection::vec(0.01f64..1.5, 0..6),
        gains in proptest::collection::vec(-0.4f64..0.4, 6),
        bits in proptest::collection::vec(prop_oneof![Just(-1i8), Just(1i8)], 1..5),
        codes in proptest::collection::vec(1u32..=16, 1..5),
        c in 0.1f64..10.0,
    ) {
        let sys = SystemParams::default();
        let table = autocorrelation(&PulseShape::standard());
        let mut taps = vec![(0.0, 1.0)];
        for (d, g) in delays.iter().zip(&gains) {
            if taps.iter().all(|t: &(f64, f64)| (t.0 - d).abs() > 1e-6) {
                taps.push((*d, *g));
            }
        }
        let scaled: Vec<(f64, f64)> = taps.iter().map(|&(d, g)| (d, c * g)).collect();
        let a = ChannelRealization::from_taps(&taps).unwrap();
        let b = ChannelRealization::from_taps(&scaled).unwrap();
        let h = sys.history_pulses(2.0) as i64;
        let t = train(&sys, -h, &bits, &codes, 0.0);
        let za = decision_statistic(&sys, 2.0, &table, &[UserSignal { channel: &a, train: &t }], 0.0).unwrap();
        let zb = decision_statistic(&sys, 2.0, &table, &[UserSignal { channel: &b, train: &t }], 0.0).unwrap();
        for (x, y) in [(za.z_u, zb.z_u), (za.z_iasi, zb.z_iasi), (za.z_isi, zb.z_isi), (za.z_total, zb.z_total)] {
            prop_assert!((c * x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{} vs {}", c * x, y);
        }
    }

    #[test]
    fn components_partition_total(
        u in -5.0f64..5.0, n in -5.0f64..5.0, ia in -1.0f64..1.0, is in -1.0f64..1.0, mu in -1.0f64..1.0,
    ) {
        let d = DecisionComponents::new(u, n, ia, is, mu);
        prop_assert!((d.z_total - (u + n + ia + is + mu)).abs() < 1e-12);
        prop_assert_eq!(d.bit_estimate, if d.z_total >= 0.0 { 1 } else { -1 });
    }

    #[test]
    fn wilson_narrows_with_trials(p in 0.001f64..0.5, n in 100u64..100_000) {
        let e1 = (p * n as f64).round() as u64;
        let (l1, h1) = wilson_interval(e1, n, Z_95);
        let (l4, h4) = wilson_interval(4 * e1, 4 * n, Z_95);
        prop_assert!(h4 - l4 <= h1 - l1 + 1e-15);
        let q = e1 as f64 / n as f64;
        prop_assert!(l1 <= q && q <= h1);
    }

    #[test]
    fn erlang_integrates_to_one(n in 1u64..12, rate in 0.01f64..5.0) {
        let spec = QuadratureSpec::default();
        let mean = n as f64 / rate;
        let hi = mean + 40.0 * (n as f64).sqrt() / rate;
        let v = integrate(|x| erlang_pdf(n, rate, x), 0.0, hi, &[mean], &spec).unwrap().value;
        prop_assert!((v - 1.0).abs() < 1e-6, "{}", v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mui_variance_linear_in_users(n in 2u32..10) {
        let chan = ChannelParams::office_los();
        let pulse = PulseShape::standard();
        let kernel = AnalysisOptions::default().kernel_for(&pulse);
        let q = QuadratureSpec::default();
        let one = SystemParams { interferers: 1, ..SystemParams::default() };
        let many = SystemParams { interferers: n, ..SystemParams::default() };
        let a = sigma_mui2(&chan, &one, &kernel, 1e-4, &q).unwrap();
        let b = sigma_mui2(&chan, &many, &kernel, 1e-4, &q).unwrap();
        prop_assert!((b / a - n as f64).abs() < 1e-12 * n as f64);
    }
}

#[test]
fn grid_refinement_moves_autocorrelation_little() {
    let coarse = PulseShape::standard();
    let fine = make_gaussian_doublet(coarse.shape_ns(), 0.5, 0.5 / 128.0).unwrap();
    let (rc, rf) = (autocorrelation(&coarse), autocorrelation(&fine));
    for tau in rc.lag_grid() {
        let d = (rc.eval(tau) - rf.eval(tau)).abs();
        assert!(d < 1e-4, "τ = {tau}: {d}");
    }
}

#[test]
fn doubled_shape_halves_bandwidth() {
    let p = PulseShape::standard();
    let wide = make_gaussian_doublet(2.0 * p.shape_ns(), 1.0, 1.0 / 64.0).unwrap();
    let ratio = bandwidth_10db(&wide) / bandwidth_10db(&p);
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
}
