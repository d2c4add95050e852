use risas_core::channel::{generate_realization, FadingSpec};
use risas_core::{Quantization, SystemConfig, C64};

fn big_config() -> SystemConfig {
    SystemConfig {
        n_antennas: 100,
        rf_chains: 2,
        ris_elements: 100,
        quantization: Quantization::Bits(2),
        user_antennas: vec![50, 50],
        user_streams: vec![1, 1],
        power_mw: vec![1.0, 1.0],
        noise_power_mw: 1.0,
    }
}

/// 10 realizations of a 100 x 100 G give 10^5 entries.
fn samples(fading: &FadingSpec) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let config = big_config();
    let (mut g, mut h1, mut h2) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..10 {
        let ch = generate_realization(&config, fading, 1000 + seed).unwrap();
        g.extend(ch.g.iter().copied());
        h1.extend(ch.h[0].iter().copied());
        h2.extend(ch.h[1].iter().copied());
    }
    (g, h1, h2)
}

#[test]
fn entry_moments_match_the_fading_model() {
    let fading = FadingSpec {
        pathloss_db: -60.0,
        ..FadingSpec::default()
    };
    let (v_g, v_h) = fading.entry_variances();
    assert!((v_g * v_h - 1e-6).abs() < 1e-18);
    let (g, h1, _) = samples(&fading);
    for (data, v) in [(&g, v_g), (&h1, v_h)] {
        let n = data.len() as f64;
        let var = data.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var / v - 1.0).abs() < 0.02, "variance {var} vs {v}");
        let re = data.iter().map(|z| z.re * z.re).sum::<f64>() / n;
        let im = data.iter().map(|z| z.im * z.im).sum::<f64>() / n;
        assert!((re / (v / 2.0) - 1.0).abs() < 0.03);
        assert!((im / (v / 2.0) - 1.0).abs() < 0.03);
        let mean: C64 = data.iter().sum::<C64>() / n;
        // standard error of the complex mean is sqrt(v / n)
        assert!(mean.norm() < 3.0 * (v / n).sqrt());
    }
}

#[test]
fn users_are_uncorrelated() {
    let fading = FadingSpec {
        pathloss_db: 0.0,
        ..FadingSpec::default()
    };
    let (_, h1, h2) = samples(&fading);
    let n = h1.len() as f64;
    let corr: C64 = h1.iter().zip(&h2).map(|(a, b)| a * b.conj()).sum::<C64>() / n;
    assert!(corr.norm() < 3.0 / n.sqrt());
}

#[test]
fn seeds_give_distinct_reproducible_draws() {
    let config = big_config();
    let f = FadingSpec::default();
    let a = generate_realization(&config, &f, 3).unwrap();
    let b = generate_realization(&config, &f, 3).unwrap();
    let c = generate_realization(&config, &f, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.g, c.g);
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn positive_path_loss_is_rejected() {
    let f = FadingSpec {
        pathloss_db: 3.0,
        ..FadingSpec::default()
    };
    assert!(generate_realization(&big_config(), &f, 0).is_err());
}
