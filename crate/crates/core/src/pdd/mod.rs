//! Joint design by penalty dual decomposition (PDD) over the WMMSE
//! reformulation.
//!
//! The binary selection and the discrete phases are decoupled through the
//! auxiliary copies `s̄` and `v` with equality constraints
//! `1^T s = T`, `s̄ = s`, `s ⊙ (1 - s̄) = 0` and `phi = v`. The inner loop runs
//! block coordinate descent on the augmented Lagrangian; the outer loop
//! either updates the multipliers or shrinks the penalty parameter depending
//! on how much the constraint violation dropped.

mod blocks;
mod precoder;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use blocks::{
    phase_system, selection_system, update_phase, update_precoder, update_receiver, update_sbar,
    update_selection, update_v, update_weight, PrecoderUpdate,
};
pub use precoder::{solve_power_constrained, PowerProfile};

use crate::error::{invalid, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{
    effective_channel, mse_matrix, sum_rate, wmmse_objective, ChannelRealization, DesignState,
    SystemConfig, WmmseState,
};
use crate::rng;

/// Multipliers of the four equality-constraint families.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariables {
    /// `1^T s = T`
    pub xi: f64,
    /// `s̄_n = s_n`
    pub mu: DVector<f64>,
    /// `s_n (1 - s̄_n) = 0`
    pub lambda: DVector<f64>,
    /// `phi = v`
    pub tau: CVec,
}

impl DualVariables {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            xi: 0.0,
            mu: DVector::zeros(n),
            lambda: DVector::zeros(n),
            tau: CVec::zeros(m),
        }
    }
}

/// Full primal/dual iterate of the PDD method.
#[derive(Debug, Clone, PartialEq)]
pub struct PddState {
    pub wmmse: WmmseState,
    /// Relaxed selection.
    pub s: DVector<f64>,
    pub sbar: DVector<f64>,
    /// Relaxed phases, not modulus constrained while iterating.
    pub phi: CVec,
    /// Phase copy; always an exact alphabet member.
    pub v: CVec,
    pub precoders: Vec<CMat>,
    pub duals: DualVariables,
    /// Penalty parameter.
    pub rho: f64,
    /// Violation threshold deciding between a dual step and a penalty shrink.
    pub eta: f64,
    /// Penalty / threshold scaling factor.
    pub chi: f64,
    pub outer_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PddOptions {
    /// Relative AL decrease below which the inner loop stops.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Constraint violation below which the outer loop stops.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub rho0: f64,
    pub eta0: f64,
    pub chi: f64,
    /// Relative power residual for the precoder multiplier search.
    pub bisect_tol: f64,
}

impl Default for PddOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-6,
            inner_max_iter: 200,
            outer_tol: 1e-4,
            outer_max_iter: 100,
            rho0: 1.0,
            eta0: 1.0,
            chi: 0.1,
            bisect_tol: 1e-9,
        }
    }
}

impl PddOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.inner_tol,
            self.outer_tol,
            self.rho0,
            self.eta0,
            self.bisect_tol,
        ];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("PDD tolerances, rho0 and eta0 must be positive"));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(invalid(format!("chi must lie in (0, 1), got {}", self.chi)));
        }
        if self.inner_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// One outer iteration as exported to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    /// 1-based outer iteration index.
    pub iter: usize,
    /// Constraint violation after the inner loop.
    pub h: f64,
    /// Penalty used during this iteration's inner loop.
    pub rho: f64,
    /// Threshold `h` was compared against.
    pub eta: f64,
    /// Sum-rate at the relaxed iterate.
    pub relaxed_sum_rate: f64,
    /// Sum-rate after rounding `s` to the T largest entries and `phi` to `v`.
    pub rounded_sum_rate: f64,
    pub inner_iterations: usize,
    pub dual_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PddDiagnostics {
    pub outer: Vec<OuterRecord>,
    /// AL objective per inner sweep, starting with the value before the
    /// first sweep, one list per outer iteration.
    pub inner_traces: Vec<Vec<f64>>,
    pub converged: bool,
    /// Times a zero point had to be projected onto the phase alphabet.
    pub degenerate_projections: usize,
    pub final_sum_rate: f64,
}

impl PddDiagnostics {
    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }
}

/// Penalty `f_rho` for explicit arguments.
#[allow(clippy::too_many_arguments)]
pub fn penalty_value(
    s: &DVector<f64>,
    sbar: &DVector<f64>,
    phi: &CVec,
    v: &CVec,
    duals: &DualVariables,
    rho: f64,
    rf_chains: usize,
) -> f64 {
    let sum_term = (s.sum() - rf_chains as f64 + rho * duals.xi).powi(2);
    let sel: f64 = (0..s.len())
        .map(|n| {
            (s[n] - sbar[n] + rho * duals.mu[n]).powi(2)
                + (s[n] * (1.0 - sbar[n]) + rho * duals.lambda[n]).powi(2)
        })
        .sum();
    let ph: f64 = (0..phi.len())
        .map(|m| (phi[m] - v[m] + duals.tau[m] * rho).norm_sqr())
        .sum();
    (sum_term + sel + ph) / (2.0 * rho)
}

pub fn penalty_term(state: &PddState, rf_chains: usize) -> f64 {
    penalty_value(
        &state.s,
        &state.sbar,
        &state.phi,
        &state.v,
        &state.duals,
        state.rho,
        rf_chains,
    )
}

/// Max-norm of all equality-constraint residuals.
pub fn constraint_violation(state: &PddState, rf_chains: usize) -> f64 {
    let mut h = (state.s.sum() - rf_chains as f64).abs();
    for n in 0..state.s.len() {
        h = h.max((state.sbar[n] - state.s[n]).abs());
        h = h.max((state.s[n] * (1.0 - state.sbar[n])).abs());
    }
    for m in 0..state.phi.len() {
        h = h.max((state.phi[m] - state.v[m]).norm());
    }
    h
}

/// Multiplier step `y += c(x) / rho` for every constraint residual `c`, with
/// the residuals signed as they appear inside `f_rho`.
pub fn dual_update(state: &PddState, rf_chains: usize) -> DualVariables {
    let inv = 1.0 / state.rho;
    let d = &state.duals;
    DualVariables {
        xi: d.xi + (state.s.sum() - rf_chains as f64) * inv,
        mu: DVector::from_fn(state.s.len(), |n, _| {
            d.mu[n] + (state.s[n] - state.sbar[n]) * inv
        }),
        lambda: DVector::from_fn(state.s.len(), |n, _| {
            d.lambda[n] + state.s[n] * (1.0 - state.sbar[n]) * inv
        }),
        tau: CVec::from_fn(state.phi.len(), |m, _| {
            d.tau[m] + (state.phi[m] - state.v[m]) * inv
        }),
    }
}

/// Augmented Lagrangian `tr(W E) - ln det W + f_rho` at the current iterate,
/// with `E` recomputed from `(U, s, phi, P)`.
pub fn al_objective(
    state: &PddState,
    channels: &ChannelRealization,
    config: &SystemConfig,
) -> Result<f64> {
    let hbar = effective_channel(&channels.g, &state.phi, &channels.h, &state.precoders)?;
    let e = mse_matrix(
        &state.wmmse.receiver,
        &state.s,
        &hbar,
        config.noise_power_mw,
    )?;
    Ok(wmmse_objective(&state.wmmse.weight, &e)? + penalty_term(state, config.rf_chains))
}

/// Indicator of the `t` largest entries of `s`; ties go to the lower index.
pub fn round_selection(s: &DVector<f64>, t: usize) -> DVector<f64> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut out = DVector::zeros(s.len());
    for &i in order.iter().take(t) {
        out[i] = 1.0;
    }
    out
}

/// One pass over W -> U -> s̄ -> s -> phi -> v -> {P_k}. Returns the number of
/// degenerate phase projections.
pub fn bcd_sweep(
    state: &mut PddState,
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &PddOptions,
) -> Result<usize> {
    let sigma2 = config.noise_power_mw;
    let hbar = effective_channel(&channels.g, &state.phi, &channels.h, &state.precoders)?;

    let e = mse_matrix(&state.wmmse.receiver, &state.s, &hbar, sigma2)?;
    state.wmmse.weight = update_weight(&e)?;
    state.wmmse.mse = e;
    state.wmmse.receiver = update_receiver(&state.s, &hbar, sigma2)?;

    state.sbar = update_sbar(&state.s, state.rho, &state.duals.mu, &state.duals.lambda);
    state.s = update_selection(
        &state.wmmse.receiver,
        &state.wmmse.weight,
        &hbar,
        &state.sbar,
        &state.duals,
        state.rho,
        config.rf_chains,
    )?;

    state.phi = update_phase(
        &state.wmmse.receiver,
        &state.wmmse.weight,
        &channels.g,
        &state.s,
        &channels.h,
        &state.precoders,
        &state.v,
        &state.duals.tau,
        state.rho,
    )?;
    let (v, degenerate) = update_v(&state.phi, &state.duals.tau, state.rho, config.quantization);
    state.v = v;

    for k in 0..config.num_users() {
        state.precoders[k] = update_precoder(
            &channels.g,
            &state.phi,
            &state.s,
            &channels.h[k],
            &state.wmmse.receiver,
            &state.wmmse.weight,
            config.stream_range(k),
            config.power_mw[k],
            opts.bisect_tol,
        )?
        .precoder;
    }
    Ok(degenerate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    /// AL objective before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    pub degenerate_projections: usize,
}

impl InnerOutcome {
    pub fn sweeps(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Block coordinate descent on the augmented Lagrangian for fixed
/// `(rho, duals)` until the relative decrease falls below `inner_tol`.
pub fn inner_bcd(
    state: &mut PddState,
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &PddOptions,
) -> Result<InnerOutcome> {
    let mut trace = vec![al_objective(state, channels, config)?];
    let mut degenerate = 0;
    for _ in 0..opts.inner_max_iter {
        degenerate += bcd_sweep(state, channels, config, opts)?;
        let prev = *trace.last().expect("trace starts non-empty");
        let cur = al_objective(state, channels, config)?;
        trace.push(cur);
        if (prev - cur) / prev.abs().max(1.0) < opts.inner_tol {
            break;
        }
    }
    Ok(InnerOutcome {
        trace,
        degenerate_projections: degenerate,
    })
}

/// Starting point: `s = s̄ = (T/N) 1`, random alphabet phases for both `phi`
/// and `v`, zero multipliers, Gaussian precoders scaled to full power and the
/// closed-form receiver and weights.
pub fn initial_state(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &PddOptions,
    seed: u64,
) -> Result<PddState> {
    let mut rng = rng::solver_rng(seed, rng::STREAM_PDD);
    let n = config.n_antennas;
    let m = config.ris_elements;
    let s = DVector::from_element(n, config.rf_chains as f64 / n as f64);
    let v = CVec::from_fn(m, |_, _| rng::random_phase(&mut rng, config.quantization));
    let precoders = (0..config.num_users())
        .map(|k| {
            let raw = CMat::from_fn(config.user_antennas[k], config.user_streams[k], |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            let scale = (config.power_mw[k] / linalg::frobenius_sq(&raw)).sqrt();
            raw * C64::new(scale, 0.0)
        })
        .collect::<Vec<_>>();
    let hbar = effective_channel(&channels.g, &v, &channels.h, &precoders)?;
    let receiver = update_receiver(&s, &hbar, config.noise_power_mw)?;
    let mse = mse_matrix(&receiver, &s, &hbar, config.noise_power_mw)?;
    let weight = update_weight(&mse)?;
    Ok(PddState {
        wmmse: WmmseState {
            weight,
            receiver,
            mse,
        },
        sbar: s.clone(),
        s,
        phi: v.clone(),
        v,
        precoders,
        duals: DualVariables::zeros(n, m),
        rho: opts.rho0,
        eta: opts.eta0,
        chi: opts.chi,
        outer_iter: 0,
    })
}

fn rounded_rate(
    state: &PddState,
    channels: &ChannelRealization,
    config: &SystemConfig,
) -> Result<f64> {
    let s = round_selection(&state.s, config.rf_chains);
    let hbar = effective_channel(&channels.g, &state.v, &channels.h, &state.precoders)?;
    sum_rate(&s, &hbar, config.noise_power_mw)
}

/// Rounds the iterate to a feasible design: the T largest entries of `s`,
/// `phi = v`, and one precoder update against the rounded pair.
pub fn finalize(
    state: &PddState,
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &PddOptions,
) -> Result<DesignState> {
    let s = round_selection(&state.s, config.rf_chains);
    let phases = state.v.clone();
    let sigma2 = config.noise_power_mw;
    let hbar = effective_channel(&channels.g, &phases, &channels.h, &state.precoders)?;
    let receiver = update_receiver(&s, &hbar, sigma2)?;
    let weight = update_weight(&mse_matrix(&receiver, &s, &hbar, sigma2)?)?;
    let precoders = (0..config.num_users())
        .map(|k| {
            update_precoder(
                &channels.g,
                &phases,
                &s,
                &channels.h[k],
                &receiver,
                &weight,
                config.stream_range(k),
                config.power_mw[k],
                opts.bisect_tol,
            )
            .map(|u| u.precoder)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignState {
        selection: s,
        phases,
        precoders,
    })
}

/// Runs the full double loop and returns the rounded design.
pub fn pdd_solve(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &PddOptions,
    seed: u64,
) -> Result<(DesignState, PddDiagnostics)> {
    config.validate()?;
    channels.validate(config)?;
    opts.validate()?;

    let mut state = initial_state(channels, config, opts, seed)?;
    let t = config.rf_chains;
    let mut diag = PddDiagnostics {
        outer: Vec::new(),
        inner_traces: Vec::new(),
        converged: false,
        degenerate_projections: 0,
        final_sum_rate: 0.0,
    };

    for _ in 0..opts.outer_max_iter {
        let rho_used = state.rho;
        let inner = inner_bcd(&mut state, channels, config, opts)?;
        let h = constraint_violation(&state, t);
        let hbar = effective_channel(&channels.g, &state.phi, &channels.h, &state.precoders)?;
        let relaxed_sum_rate = sum_rate(&state.s, &hbar, config.noise_power_mw)?;
        let rounded_sum_rate = rounded_rate(&state, channels, config)?;

        let dual_step = h < state.eta;
        let record = OuterRecord {
            iter: state.outer_iter + 1,
            h,
            rho: rho_used,
            eta: state.eta,
            relaxed_sum_rate,
            rounded_sum_rate,
            inner_iterations: inner.sweeps(),
            dual_step,
        };
        if dual_step {
            state.duals = dual_update(&state, t);
        } else {
            state.rho *= state.chi;
        }
        state.eta = state.chi * h;
        state.outer_iter += 1;

        log::debug!(
            "pdd outer {}: h={:.3e} rho={:.1e} sweeps={} rate={:.4}",
            record.iter,
            h,
            rho_used,
            record.inner_iterations,
            rounded_sum_rate
        );
        diag.degenerate_projections += inner.degenerate_projections;
        diag.inner_traces.push(inner.trace);
        diag.outer.push(record);

        if h < opts.outer_tol {
            diag.converged = true;
            break;
        }
    }

    let design = finalize(&state, channels, config, opts)?;
    diag.final_sum_rate = design.sum_rate(channels, config)?;
    Ok((design, diag))
}
