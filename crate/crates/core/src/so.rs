//! Sequential low-complexity design: phases first (element-wise coordinate
//! ascent on the effective channel gain), then greedy antenna selection on
//! the log-det objective, then iterative water-filling for the precoders.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};
use crate::model::{
    is_phase_member, nearest_phase, ChannelRealization, DesignState, Quantization, SystemConfig,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoOptions {
    /// Maximum full passes over the RIS elements.
    pub ewbcd_sweeps: usize,
    /// Relative gain improvement below which the phase sweeps stop.
    pub ewbcd_tol: f64,
    pub iwf_max_rounds: usize,
    /// Relative sum-rate change below which water-filling rounds stop.
    pub iwf_tol: f64,
    /// Relative water-level bracket width.
    pub wf_tol: f64,
}

impl Default for SoOptions {
    fn default() -> Self {
        Self {
            ewbcd_sweeps: 20,
            ewbcd_tol: 1e-6,
            iwf_max_rounds: 100,
            iwf_tol: 1e-8,
            wf_tol: 1e-10,
        }
    }
}

impl SoOptions {
    pub fn validate(&self) -> Result<()> {
        if [self.ewbcd_tol, self.iwf_tol, self.wf_tol]
            .iter()
            .any(|x| !(x.is_finite() && *x > 0.0))
        {
            return Err(invalid("SO tolerances must be positive"));
        }
        if self.ewbcd_sweeps == 0 || self.iwf_max_rounds == 0 {
            return Err(invalid("SO iteration limits must be positive"));
        }
        Ok(())
    }
}

/// `Ĥ = (G^H G) ⊙ H̃^T` with `H̃ = Σ_k (p_k / N_k) H_k H_k^H`, so that the
/// channel gain `tr(H̄ H̄^H)` under isotropic inputs equals `phi^H Ĥ phi`.
pub fn gain_matrix(g: &CMat, h: &[CMat], power: &[f64], user_antennas: &[usize]) -> CMat {
    gain_matrix_from(g, &weighted_user_gram(h, power, user_antennas))
}

/// `(G^H G) ⊙ H̃^T` for an arbitrary user-side Gram matrix `H̃`.
pub fn gain_matrix_from(g: &CMat, ht: &CMat) -> CMat {
    let gg = g.adjoint() * g;
    let m = gg.nrows();
    linalg::hermitize(&CMat::from_fn(m, m, |i, j| gg[(i, j)] * ht[(j, i)]))
}

/// `H̃ = Σ_k (p_k / N_k) H_k H_k^H`.
pub fn weighted_user_gram(h: &[CMat], power: &[f64], user_antennas: &[usize]) -> CMat {
    let m = h.first().map_or(0, |x| x.nrows());
    let mut acc = CMat::zeros(m, m);
    for ((hk, &pk), &nk) in h.iter().zip(power).zip(user_antennas) {
        acc += (hk * hk.adjoint()) * C64::new(pk / nk as f64, 0.0);
    }
    linalg::hermitize(&acc)
}

/// `phi^H Ĥ phi`.
pub fn gain_objective(hhat: &CMat, phi: &CVec) -> f64 {
    (phi.adjoint() * hhat * phi)[(0, 0)].re
}

/// Coupling `Σ_{m' != m} Ĥ[m, m'] phi[m']` of element `m` to the others.
pub fn coupling(hhat: &CMat, phi: &CVec, m: usize) -> C64 {
    (0..phi.len())
        .filter(|&j| j != m)
        .map(|j| hhat[(m, j)] * phi[j])
        .sum()
}

/// Element-wise coordinate ascent of `phi^H Ĥ phi` over the alphabet,
/// sweeping `m = 0..M` in order. Each element is set to the alphabet point
/// nearest its coupling; an element with zero coupling is left unchanged.
pub fn ewbcd_phases(
    hhat: &CMat,
    quant: Quantization,
    phi_init: &CVec,
    opts: &SoOptions,
) -> Result<CVec> {
    if !hhat.is_square() || hhat.nrows() != phi_init.len() {
        return Err(invalid("gain matrix and phase vector sizes differ"));
    }
    if let Some(m) = phi_init.iter().position(|&z| !is_phase_member(z, quant)) {
        return Err(invalid(format!(
            "initial phase {m} is not an alphabet member"
        )));
    }
    let mut phi = phi_init.clone();
    let mut obj = gain_objective(hhat, &phi);
    for _ in 0..opts.ewbcd_sweeps {
        for m in 0..phi.len() {
            let c = coupling(hhat, &phi, m);
            if c.norm() > 0.0 {
                phi[m] = nearest_phase(c, quant)?;
            }
        }
        let next = gain_objective(hhat, &phi);
        let gain = (next - obj) / obj.abs().max(f64::MIN_POSITIVE);
        obj = next;
        if gain < opts.ewbcd_tol {
            break;
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection {
    /// Antennas in the order they were added.
    pub order: Vec<usize>,
    pub indicator: DVector<f64>,
    /// `log2 det(I + sigma^-2 X_SS)` of the final set.
    pub rate: f64,
}

/// Greedy antenna selection maximizing `log2 det(I + sigma^-2 X_SS)`.
///
/// With `A = I + X / sigma^2`, adding antenna `n` to `S` multiplies the
/// determinant by the Schur complement `A_nn - A_nS A_SS^-1 A_Sn`, and the
/// inverse of `A_SS` is grown by bordering, so each round costs O(N |S|^2).
pub fn greedy_selection(x: &CMat, sigma2: f64, rf_chains: usize) -> Result<GreedySelection> {
    let n = x.nrows();
    if !x.is_square() || rf_chains > n {
        return Err(invalid(format!("cannot pick {rf_chains} of {n} antennas")));
    }
    let mut a = linalg::hermitize(x).unscale(sigma2);
    for i in 0..n {
        a[(i, i)] += ONE;
    }
    let mut order: Vec<usize> = Vec::with_capacity(rf_chains);
    let mut chosen = vec![false; n];
    let mut inv = CMat::zeros(0, 0);
    let mut logdet = 0.0;
    for _ in 0..rf_chains {
        let mut best: Option<(usize, f64, CVec)> = None;
        for cand in (0..n).filter(|&c| !chosen[c]) {
            let col = CVec::from_iterator(order.len(), order.iter().map(|&i| a[(i, cand)]));
            let proj = &inv * &col;
            let schur = a[(cand, cand)].re - col.dotc(&proj).re;
            if best.as_ref().is_none_or(|(_, b, _)| schur > *b) {
                best = Some((cand, schur, proj));
            }
        }
        let (cand, schur, proj) = best.expect("rf_chains <= n leaves a candidate");
        // Bordered inverse of the grown principal submatrix.
        let k = order.len();
        let mut grown = CMat::zeros(k + 1, k + 1);
        let outer = &proj * proj.adjoint();
        grown
            .view_mut((0, 0), (k, k))
            .copy_from(&(&inv + outer.unscale(schur)));
        for i in 0..k {
            grown[(i, k)] = -proj[i] / schur;
            grown[(k, i)] = -proj[i].conj() / schur;
        }
        grown[(k, k)] = C64::new(1.0 / schur, 0.0);
        inv = grown;
        logdet += schur.ln();
        chosen[cand] = true;
        order.push(cand);
    }
    let indicator = DVector::from_fn(n, |i, _| if chosen[i] { 1.0 } else { 0.0 });
    Ok(GreedySelection {
        order,
        indicator,
        rate: logdet / std::f64::consts::LN_2,
    })
}

/// Water-filling of `budget` over parallel channels with gains `gains`
/// (power `max(0, level - 1/g)`). The level is bracketed by bisection to
/// relative width `tol`; the active set found there fixes the exact level.
pub fn waterfill(gains: &[f64], budget: f64, tol: f64) -> Vec<f64> {
    let inv: Vec<Option<f64>> = gains.iter().map(|&g| (g > 0.0).then(|| 1.0 / g)).collect();
    let floor = inv.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
    if !floor.is_finite() || !(budget > 0.0) {
        return vec![0.0; gains.len()];
    }
    let poured = |level: f64| {
        inv.iter()
            .flatten()
            .map(|&i| (level - i).max(0.0))
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (floor, floor + budget);
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if poured(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let level_guess = 0.5 * (lo + hi);
    let active: Vec<f64> = inv
        .iter()
        .flatten()
        .copied()
        .filter(|&i| i < level_guess)
        .collect();
    let level = if active.is_empty() {
        level_guess
    } else {
        (budget + active.iter().sum::<f64>()) / active.len() as f64
    };
    inv.iter()
        .map(|i| i.map_or(0.0, |i| (level - i).max(0.0)))
        .collect()
}

/// Capacity-achieving covariance for one user against the whitened
/// interference-plus-noise `z`, restricted to its `streams` strongest modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserSolution {
    pub covariance: CMat,
    pub precoder: CMat,
    /// Mode gains considered (descending).
    pub gains: Vec<f64>,
    pub powers: Vec<f64>,
}

pub fn single_user_waterfill(
    g_k: &CMat,
    z: &CMat,
    budget: f64,
    streams: usize,
    wf_tol: f64,
) -> Result<SingleUserSolution> {
    let zinv_g = linalg::solve_hpd(z, g_k)
        .ok_or_else(|| invalid("interference covariance is not positive definite"))?;
    let f = linalg::hermitize(&(g_k.adjoint() * zinv_g));
    let (ev, vecs) = linalg::hermitian_eigen(&f);
    let top = ev[0].max(0.0);
    let modes = streams.min(ev.len());
    let gains: Vec<f64> = (0..modes)
        .map(|i| if ev[i] > 1e-12 * top { ev[i] } else { 0.0 })
        .collect();
    let powers = waterfill(&gains, budget, wf_tol);
    let nk = g_k.ncols();
    let mut precoder = CMat::zeros(nk, streams);
    for (i, &p) in powers.iter().enumerate() {
        if p > 0.0 {
            precoder.set_column(i, &(vecs.column(i) * C64::new(p.sqrt(), 0.0)));
        }
    }
    let covariance = linalg::hermitize(&(&precoder * precoder.adjoint()));
    Ok(SingleUserSolution {
        covariance,
        precoder,
        gains,
        powers,
    })
}

/// `I + Σ_{k' in users} G_k' Q_k' G_k'^H`.
pub fn received_covariance(g_eff: &[CMat], cov: &[CMat], skip: Option<usize>) -> CMat {
    let rows = g_eff.first().map_or(0, |g| g.nrows());
    let mut z = CMat::identity(rows, rows);
    for (k, (gk, qk)) in g_eff.iter().zip(cov).enumerate() {
        if Some(k) != skip {
            z += gk * qk * gk.adjoint();
        }
    }
    linalg::hermitize(&z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IwfOutcome {
    pub precoders: Vec<CMat>,
    pub covariances: Vec<CMat>,
    /// Sum-rate (bit/s/Hz) at the start and after every single-user update.
    pub rate_trace: Vec<f64>,
    pub rounds: usize,
}

/// Iterative water-filling for the MAC sum-rate
/// `log2 det(I + Σ_k G_k Q_k G_k^H)`, cycling users in ascending order.
pub fn iterative_waterfilling(
    g_eff: &[CMat],
    budgets: &[f64],
    streams: &[usize],
    opts: &SoOptions,
) -> Result<IwfOutcome> {
    if g_eff.len() != budgets.len() || g_eff.len() != streams.len() {
        return Err(invalid("per-user lists differ in length"));
    }
    let mut cov: Vec<CMat> = g_eff
        .iter()
        .map(|g| CMat::zeros(g.ncols(), g.ncols()))
        .collect();
    let mut precoders: Vec<CMat> = g_eff
        .iter()
        .zip(streams)
        .map(|(g, &l)| CMat::zeros(g.ncols(), l))
        .collect();
    let rate = |cov: &[CMat]| -> Result<f64> {
        Ok(linalg::logdet_hpd(&received_covariance(g_eff, cov, None))? / std::f64::consts::LN_2)
    };
    let mut trace = vec![rate(&cov)?];
    let mut rounds = 0;
    for _ in 0..opts.iwf_max_rounds {
        let start = *trace.last().expect("non-empty");
        for k in 0..g_eff.len() {
            let z = received_covariance(g_eff, &cov, Some(k));
            let sol = single_user_waterfill(&g_eff[k], &z, budgets[k], streams[k], opts.wf_tol)?;
            cov[k] = sol.covariance;
            precoders[k] = sol.precoder;
            trace.push(rate(&cov)?);
        }
        rounds += 1;
        let end = *trace.last().expect("non-empty");
        if (end - start).abs() / end.abs().max(f64::MIN_POSITIVE) < opts.iwf_tol {
            break;
        }
    }
    Ok(IwfOutcome {
        precoders,
        covariances: cov,
        rate_trace: trace,
        rounds,
    })
}

/// `sigma^-1 S G Phi H_k` for each user, keeping only the selected rows.
pub fn effective_user_channels(
    channels: &ChannelRealization,
    phi: &CVec,
    selected: &[usize],
    sigma2: f64,
) -> Vec<CMat> {
    let g_phi = linalg::scale_cols(&channels.g, phi);
    let rows = CMat::from_fn(selected.len(), g_phi.ncols(), |i, j| {
        g_phi[(selected[i], j)]
    });
    let scale = C64::new(1.0 / sigma2.sqrt(), 0.0);
    channels.h.iter().map(|hk| (&rows * hk) * scale).collect()
}

/// `X = G Phi H̃ Phi^H G^H`.
pub fn selection_gram(g: &CMat, phi: &CVec, h_tilde: &CMat) -> CMat {
    let g_phi = linalg::scale_cols(g, phi);
    linalg::hermitize(&(&g_phi * h_tilde * g_phi.adjoint()))
}

/// Runs the pipeline from a given phase initialization.
pub fn so_solve_from(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SoOptions,
    phi_init: &CVec,
) -> Result<DesignState> {
    config.validate()?;
    channels.validate(config)?;
    opts.validate()?;
    let hhat = gain_matrix(
        &channels.g,
        &channels.h,
        &config.power_mw,
        &config.user_antennas,
    );
    let phases = ewbcd_phases(&hhat, config.quantization, phi_init, opts)?;
    let h_tilde = weighted_user_gram(&channels.h, &config.power_mw, &config.user_antennas);
    let x = selection_gram(&channels.g, &phases, &h_tilde);
    let sel = greedy_selection(&x, config.noise_power_mw, config.rf_chains)?;
    let mut selected = sel.order.clone();
    selected.sort_unstable();
    let g_eff = effective_user_channels(channels, &phases, &selected, config.noise_power_mw);
    let iwf = iterative_waterfilling(&g_eff, &config.power_mw, &config.user_streams, opts)?;
    Ok(DesignState {
        selection: sel.indicator,
        phases,
        precoders: iwf.precoders,
    })
}

/// Sequential design with phases initialized uniformly from the alphabet.
pub fn so_solve(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SoOptions,
    seed: u64,
) -> Result<DesignState> {
    let mut rng = rng::solver_rng(seed, rng::STREAM_SO);
    let phi_init = CVec::from_fn(config.ris_elements, |_, _| {
        rng::random_phase(&mut rng, config.quantization)
    });
    so_solve_from(channels, config, opts, &phi_init)
}
