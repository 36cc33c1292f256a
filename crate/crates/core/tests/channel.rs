mod common;

use amc_core::channel::{
    add_awgn, apply_channel, awgn, draw_channel, profile_for, ChannelKind, ChannelRealization, ChannelSpec,
};
use amc_core::{Waveform, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

#[test]
fn rayleigh_tap_powers_follow_profile() {
    for n_taps in [4, 6] {
        let p = profile_for(n_taps).unwrap();
        let mut acc = vec![0.0; n_taps];
        let draws = 100_000;
        for s in 0..draws {
            let r = draw_channel(&ChannelSpec::new(ChannelKind::Rayleigh, n_taps, s)).unwrap();
            for (a, h) in acc.iter_mut().zip(&r.taps) {
                *a += h.norm_sqr();
            }
        }
        for (k, (a, pk)) in acc.iter().zip(&p).enumerate() {
            let mean = a / draws as f64;
            assert!((0.97 * pk..=1.03 * pk).contains(&mean), "{n_taps} taps, tap {k}: {mean} vs {pk}");
        }
    }
}

#[test]
fn six_tap_convolution_matches_oracle() {
    let r = draw_channel(&ChannelSpec::new(ChannelKind::Rayleigh, 6, 3)).unwrap();
    let x = random_signal(300, 1);
    let y = apply_channel(&Waveform::new(x.clone()), &r).unwrap();
    let full = common::convolve(&x, &r.taps);
    for (a, b) in y.samples().iter().zip(&full[..300]) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn nakagami_one_is_rayleigh() {
    let n = 10_000;
    let mut naka = Vec::with_capacity(n);
    let mut rayl = Vec::with_capacity(n);
    for s in 0..n as u64 {
        let mut spec = ChannelSpec::new(ChannelKind::Nakagami, 4, s);
        spec.nakagami_m = 1.0;
        naka.push(draw_channel(&spec).unwrap().taps[0].norm());
        let r = draw_channel(&ChannelSpec::new(ChannelKind::Rayleigh, 4, s + 1_000_000)).unwrap();
        rayl.push(r.taps[0].norm());
    }
    let d = common::ks_statistic(&naka, &rayl);
    assert!(d < common::ks_critical_1pct(n, n), "KS {d}");
}

#[test]
fn realizations_are_reproducible_bytes() {
    let spec = ChannelSpec::new(ChannelKind::Rician, 6, 77);
    let bytes = |r: &ChannelRealization| -> Vec<u8> {
        r.taps.iter().flat_map(|h| [h.re.to_le_bytes(), h.im.to_le_bytes()].concat()).collect()
    };
    assert_eq!(bytes(&draw_channel(&spec).unwrap()), bytes(&draw_channel(&spec).unwrap()));
}

#[test]
fn awgn_signal_component_preserved() {
    let x = random_signal(1000, 2);
    let w = Waveform::new(x.clone());
    let p = w.mean_power();
    let y = add_awgn(&w, 3.0, 99).unwrap();
    let noise = awgn(1000, p / 10f64.powf(0.3), 99);
    for ((yi, ni), xi) in y.samples().iter().zip(&noise).zip(&x) {
        assert!((yi - ni - xi).norm() < 1e-12);
    }
}

#[test]
fn million_sample_snr() {
    let x = random_signal(1_000_000, 4);
    for snr in [-20.0, 0.0, 18.0] {
        let y = add_awgn(&Waveform::new(x.clone()), snr, 8).unwrap();
        let got = common::measured_snr_db(&x, y.samples());
        assert!((got - snr).abs() < 0.2, "{snr}: {got}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn channel_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let r = draw_channel(&ChannelSpec::new(ChannelKind::Nakagami, 6, seed)).unwrap();
        let x = random_signal(64, seed ^ 1);
        let y = random_signal(64, seed ^ 2);
        let mix: Vec<C64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let lhs = apply_channel(&Waveform::new(mix), &r).unwrap();
        let cx = apply_channel(&Waveform::new(x), &r).unwrap();
        let cy = apply_channel(&Waveform::new(y), &r).unwrap();
        for ((l, p), q) in lhs.samples().iter().zip(cx.samples()).zip(cy.samples()) {
            prop_assert!((l - (p * a + q * b)).norm() < 1e-9);
        }
    }
}
