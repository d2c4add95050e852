//! Reference schemes: a random design and alternating optimization (AO)
//! built from the sequential stages.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{sum_rate_direct, ChannelRealization, DesignState, SystemConfig};
use crate::rng;
use crate::so::{
    effective_user_channels, ewbcd_phases, gain_matrix, gain_matrix_from, greedy_selection,
    iterative_waterfilling, selection_gram, weighted_user_gram, SoOptions,
};

/// Random selection and phases with isotropic inputs `Q_k = (p_k / N_k) I`.
/// `P_k` holds the first `L_k` columns of `sqrt(p_k / N_k) I`.
pub fn random_design(
    channels: &ChannelRealization,
    config: &SystemConfig,
    seed: u64,
) -> Result<DesignState> {
    config.validate()?;
    channels.validate(config)?;
    let mut rng = rng::solver_rng(seed, rng::STREAM_RANDOM);
    let mut selection = nalgebra::DVector::zeros(config.n_antennas);
    for i in sample(&mut rng, config.n_antennas, config.rf_chains) {
        selection[i] = 1.0;
    }
    let phases = CVec::from_fn(config.ris_elements, |_, _| {
        rng::random_phase(&mut rng, config.quantization)
    });
    let precoders = (0..config.num_users())
        .map(|k| {
            let amp = (config.power_mw[k] / config.user_antennas[k] as f64).sqrt();
            CMat::from_fn(config.user_antennas[k], config.user_streams[k], |i, j| {
                if i == j {
                    C64::new(amp, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    Ok(DesignState {
        selection,
        phases,
        precoders,
    })
}

/// Sum-rate of a random design with the isotropic covariances
/// `Q_k = (p_k / N_k) I` it is defined by.
pub fn random_scheme_rate(
    design: &DesignState,
    channels: &ChannelRealization,
    config: &SystemConfig,
) -> Result<f64> {
    let covs: Vec<CMat> = (0..config.num_users())
        .map(|k| {
            let nk = config.user_antennas[k];
            CMat::identity(nk, nk) * C64::new(config.power_mw[k] / nk as f64, 0.0)
        })
        .collect();
    sum_rate_direct(
        &design.selected_indices(),
        &channels.g,
        &design.phases,
        &channels.h,
        &covs,
        config.noise_power_mw,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoOptions {
    pub max_rounds: usize,
    /// Relative sum-rate change between rounds below which AO stops.
    pub tol: f64,
    pub so: SoOptions,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            max_rounds: 30,
            tol: 1e-6,
            so: SoOptions::default(),
        }
    }
}

impl AoOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 || !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid(
                "AO needs at least one round and a positive tolerance",
            ));
        }
        self.so.validate()
    }
}

/// Alternating optimization of phases, selection and precoders.
///
/// The first round uses the same isotropic-input surrogates as the
/// sequential pipeline. Later rounds re-weight both surrogates with the
/// current precoder covariances, and the phase gain only counts the
/// currently selected antennas. Phases are warm-started. Returns the final
/// design and the sum-rate after every round.
pub fn ao_solve(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &AoOptions,
    seed: u64,
) -> Result<(DesignState, Vec<f64>)> {
    opts.validate()?;
    let init = random_design(channels, config, seed)?;
    ao_solve_from(channels, config, opts, init.phases)
}

/// [`ao_solve`] from an explicit phase initialization.
pub fn ao_solve_from(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &AoOptions,
    phi_init: CVec,
) -> Result<(DesignState, Vec<f64>)> {
    config.validate()?;
    channels.validate(config)?;
    opts.validate()?;
    let sigma2 = config.noise_power_mw;
    let mut phases = phi_init;
    let mut current: Option<DesignState> = None;
    let mut trace = Vec::with_capacity(opts.max_rounds);

    for _ in 0..opts.max_rounds {
        let (hhat, h_tilde) = match &current {
            None => (
                gain_matrix(
                    &channels.g,
                    &channels.h,
                    &config.power_mw,
                    &config.user_antennas,
                ),
                weighted_user_gram(&channels.h, &config.power_mw, &config.user_antennas),
            ),
            Some(d) => {
                let mut h_tilde = CMat::zeros(config.ris_elements, config.ris_elements);
                for (hk, pk) in channels.h.iter().zip(&d.precoders) {
                    let hp = hk * pk;
                    h_tilde += &hp * hp.adjoint();
                }
                let h_tilde = linalg::hermitize(&h_tilde);
                let masked_g = linalg::scale_rows(&d.selection, &channels.g);
                (gain_matrix_from(&masked_g, &h_tilde), h_tilde)
            }
        };
        phases = ewbcd_phases(&hhat, config.quantization, &phases, &opts.so)?;
        let x = selection_gram(&channels.g, &phases, &h_tilde);
        let sel = greedy_selection(&x, sigma2, config.rf_chains)?;
        let mut selected = sel.order.clone();
        selected.sort_unstable();
        let g_eff = effective_user_channels(channels, &phases, &selected, sigma2);
        let iwf = iterative_waterfilling(&g_eff, &config.power_mw, &config.user_streams, &opts.so)?;
        let design = DesignState {
            selection: sel.indicator,
            phases: phases.clone(),
            precoders: iwf.precoders,
        };
        let rate = design.sum_rate(channels, config)?;

        let prev = trace.last().copied();
        trace.push(rate);
        current = Some(design);
        if let Some(prev) = prev {
            if (rate - prev).abs() / prev.abs().max(f64::MIN_POSITIVE) < opts.tol {
                break;
            }
        }
    }
    let design = current.expect("at least one round runs");
    Ok((design, trace))
}
