#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use risas_core::channel::{generate_realization, FadingSpec};
use risas_core::model::{effective_channel, phase_point, WmmseState};
use risas_core::pdd::{update_receiver, DualVariables, PddState};
use risas_core::{CMat, CVec, ChannelRealization, Quantization, SystemConfig, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| cgauss(rng))
}

pub fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| cgauss(rng))
}

/// Hermitian positive definite `A A^H + eps I`.
pub fn hpd(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> CMat {
    let a = cmat(rng, n, n);
    let mut m = &a * a.adjoint();
    for i in 0..n {
        m[(i, i)] += C64::new(eps, 0.0);
    }
    (&m + m.adjoint()).unscale(2.0)
}

pub fn random_phases(rng: &mut ChaCha8Rng, m: usize, quant: Quantization) -> CVec {
    CVec::from_fn(m, |_, _| match quant {
        Quantization::Bits(b) => phase_point(rng.random_range(0..1usize << b), b),
        Quantization::Continuous => {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        }
    })
}

/// Random T-subset as a sorted index list.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, t: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, t).into_vec();
    idx.sort_unstable();
    idx
}

pub fn indicator(n: usize, idx: &[usize]) -> DVector<f64> {
    let mut s = DVector::zeros(n);
    for &i in idx {
        s[i] = 1.0;
    }
    s
}

/// Precoder with power `frac * budget`.
pub fn precoder(rng: &mut ChaCha8Rng, rows: usize, cols: usize, power: f64) -> CMat {
    let p = cmat(rng, rows, cols);
    let scale = (power / p.norm_squared()).sqrt();
    p * C64::new(scale, 0.0)
}

pub fn desk_config() -> SystemConfig {
    SystemConfig {
        n_antennas: 8,
        rf_chains: 3,
        ris_elements: 8,
        quantization: Quantization::Bits(4),
        user_antennas: vec![2, 2],
        user_streams: vec![2, 2],
        power_mw: vec![10f64.powf(-0.5); 2],
        noise_power_mw: 1e-12,
    }
}

/// Unit-scale channels so that block tests are well conditioned.
pub fn unit_channels(rng: &mut ChaCha8Rng, config: &SystemConfig) -> ChannelRealization {
    ChannelRealization {
        g: cmat(rng, config.n_antennas, config.ris_elements),
        h: config
            .user_antennas
            .iter()
            .map(|&nk| cmat(rng, config.ris_elements, nk))
            .collect(),
        seed: 0,
    }
}

pub fn desk_channels(seed: u64) -> ChannelRealization {
    generate_realization(&desk_config(), &FadingSpec::default(), seed).unwrap()
}

/// Arbitrary PDD iterate: relaxed s and s̄, off-alphabet phi, random duals,
/// a perturbed MMSE receiver and a random Hermitian positive definite weight.
pub fn random_pdd_state(
    rng: &mut ChaCha8Rng,
    config: &SystemConfig,
    channels: &ChannelRealization,
) -> PddState {
    let n = config.n_antennas;
    let m = config.ris_elements;
    let l = config.total_streams();
    let unif = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo..hi);
    let s = DVector::from_fn(n, |_, _| unif(rng, -0.2, 1.2));
    let sbar = DVector::from_fn(n, |_, _| unif(rng, -0.2, 1.2));
    let phi = CVec::from_fn(m, |_, _| {
        C64::from_polar(unif(rng, 0.5, 1.5), unif(rng, 0.0, std::f64::consts::TAU))
    });
    let v = random_phases(rng, m, config.quantization);
    let precoders: Vec<CMat> = (0..config.num_users())
        .map(|k| {
            let frac = unif(rng, 0.2, 1.0);
            precoder(
                rng,
                config.user_antennas[k],
                config.user_streams[k],
                frac * config.power_mw[k],
            )
        })
        .collect();
    let duals = DualVariables {
        xi: unif(rng, -1.0, 1.0),
        mu: DVector::from_fn(n, |_, _| unif(rng, -1.0, 1.0)),
        lambda: DVector::from_fn(n, |_, _| unif(rng, -1.0, 1.0)),
        tau: cvec(rng, m).unscale(2.0),
    };
    let weight = hpd(rng, l, 0.5).unscale(l as f64);
    let hbar = effective_channel(&channels.g, &phi, &channels.h, &precoders).unwrap();
    let mmse = update_receiver(&s, &hbar, config.noise_power_mw).unwrap();
    let spread = mmse.norm() / ((n * l) as f64).sqrt();
    let receiver = &mmse + cmat(rng, n, l) * C64::new(0.3 * spread, 0.0);
    PddState {
        wmmse: WmmseState {
            weight,
            receiver,
            mse: CMat::identity(l, l),
        },
        s,
        sbar,
        phi,
        v,
        precoders,
        duals,
        rho: 10f64.powf(unif(rng, -1.0, 1.0)),
        eta: 1.0,
        chi: 0.1,
        outer_iter: 0,
    }
}
