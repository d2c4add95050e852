//! The seven exact block minimizers of the augmented Lagrangian.

use nalgebra::{DMatrix, DVector};

use super::precoder::solve_power_constrained;
use super::DualVariables;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{project_phase, Quantization};

/// `W_h = E_h^{-1}`.
pub fn update_weight(e: &CMat) -> Result<CMat> {
    let ev = linalg::hermitian_eigenvalues(e);
    let (max, min) = (ev[0], ev[ev.len() - 1]);
    if !(min > 0.0) || min < 1e-14 * max {
        return Err(Error::IllConditioned(format!(
            "MSE matrix eigenvalues span [{min:e}, {max:e}]"
        )));
    }
    let inv = linalg::solve_hpd(e, &CMat::identity(e.nrows(), e.ncols()))
        .ok_or_else(|| Error::IllConditioned("MSE matrix Cholesky failed".into()))?;
    Ok(linalg::hermitize(&inv))
}

/// MMSE receiver `U_h = (sigma^2 I + Delta Hbar Hbar^H Delta^H)^{-1} Delta Hbar`.
pub fn update_receiver(s: &DVector<f64>, hbar: &CMat, sigma2: f64) -> Result<CMat> {
    if !(sigma2 > 0.0) {
        return Err(invalid("noise power must be positive"));
    }
    let a = linalg::scale_rows(s, hbar);
    let mut lhs = &a * a.adjoint();
    for i in 0..lhs.nrows() {
        lhs[(i, i)] += C64::new(sigma2, 0.0);
    }
    linalg::solve_hpd(&lhs, &a)
        .ok_or_else(|| Error::Numerical("receiver system is not positive definite".into()))
}

/// Closed-form `s̄_n = b̄_n / ā_n` from the two penalty terms that contain it.
pub fn update_sbar(
    s: &DVector<f64>,
    rho: f64,
    mu: &DVector<f64>,
    lambda: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(
        s.len(),
        (0..s.len()).map(|n| {
            let sn = s[n];
            let a = 1.0 + sn * sn;
            let b = sn + rho * mu[n] + sn * sn + sn * rho * lambda[n];
            b / a
        }),
    )
}

/// Quadratic model `s^T Q s - s^T g` of the augmented Lagrangian in `s`.
pub fn selection_system(
    u: &CMat,
    w: &CMat,
    hbar: &CMat,
    sbar: &DVector<f64>,
    duals: &DualVariables,
    rho: f64,
    rf_chains: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = hbar.nrows();
    let uw = u * w;
    let r = &uw * u.adjoint();
    let a = hbar * hbar.adjoint();
    let inv2rho = 0.5 / rho;
    let mut q = DMatrix::from_fn(n, n, |i, j| (r[(i, j)] * a[(j, i)]).re + inv2rho);
    for i in 0..n {
        q[(i, i)] += inv2rho * (1.0 + (1.0 - sbar[i]).powi(2));
    }
    let q = linalg::real_symmetrize(&q);
    let cross = &uw * hbar.adjoint();
    let t = rf_chains as f64;
    let g = DVector::from_fn(n, |i, _| {
        2.0 * cross[(i, i)].re
            - ((rho * duals.xi - t)
                + (rho * duals.mu[i] - sbar[i])
                + rho * (1.0 - sbar[i]) * duals.lambda[i])
                / rho
    });
    (q, g)
}

pub fn update_selection(
    u: &CMat,
    w: &CMat,
    hbar: &CMat,
    sbar: &DVector<f64>,
    duals: &DualVariables,
    rho: f64,
    rf_chains: usize,
) -> Result<DVector<f64>> {
    let (q, g) = selection_system(u, w, hbar, sbar, duals, rho, rf_chains);
    let chol = q.cholesky().ok_or_else(|| {
        Error::Internal("selection quadratic form is not positive definite".into())
    })?;
    Ok(chol.solve(&g) * 0.5)
}

/// Quadratic model `phi^H B phi - 2 Re{phi^H b}` of the augmented Lagrangian
/// in the phases.
#[allow(clippy::too_many_arguments)]
pub fn phase_system(
    u: &CMat,
    w: &CMat,
    g: &CMat,
    s: &DVector<f64>,
    h: &[CMat],
    p: &[CMat],
    v: &CVec,
    tau: &CVec,
    rho: f64,
) -> (CMat, CVec) {
    let m = g.ncols();
    let total: usize = p.iter().map(|pk| pk.ncols()).sum();
    let mut kmat = CMat::zeros(m, total);
    let mut col = 0;
    for (hk, pk) in h.iter().zip(p) {
        kmat.columns_mut(col, pk.ncols()).copy_from(&(hk * pk));
        col += pk.ncols();
    }
    // Δ is real diagonal, so Δ^H = Δ.
    let dg = linalg::scale_rows(s, g);
    let left = dg.adjoint() * u;
    let lw = &left * w;
    let b1 = &lw * left.adjoint();
    let b2 = &kmat * kmat.adjoint();
    let inv2rho = 0.5 / rho;
    let mut bmat = CMat::from_fn(m, m, |i, j| b1[(i, j)] * b2[(j, i)]);
    for i in 0..m {
        bmat[(i, i)] += C64::new(inv2rho, 0.0);
    }
    let cross = &lw * kmat.adjoint();
    let bvec = CVec::from_fn(m, |i, _| cross[(i, i)] + (v[i] - tau[i] * rho) * inv2rho);
    (linalg::hermitize(&bmat), bvec)
}

#[allow(clippy::too_many_arguments)]
pub fn update_phase(
    u: &CMat,
    w: &CMat,
    g: &CMat,
    s: &DVector<f64>,
    h: &[CMat],
    p: &[CMat],
    v: &CVec,
    tau: &CVec,
    rho: f64,
) -> Result<CVec> {
    let (bmat, bvec) = phase_system(u, w, g, s, h, p, v, tau, rho);
    let chol = linalg::cholesky_hpd(&bmat)
        .ok_or_else(|| Error::Internal("phase quadratic form is not positive definite".into()))?;
    Ok(chol.solve(&bvec))
}

/// Projects `phi + rho tau` onto the phase alphabet. The second value counts
/// entries where that point was zero and the first alphabet element was used.
pub fn update_v(phi: &CVec, tau: &CVec, rho: f64, quant: Quantization) -> (CVec, usize) {
    let mut degenerate = 0;
    let v = CVec::from_iterator(
        phi.len(),
        phi.iter().zip(tau.iter()).map(|(&f, &t)| {
            let (p, flag) = project_phase(f + t * rho, quant);
            degenerate += flag as usize;
            p
        }),
    );
    (v, degenerate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderUpdate {
    pub precoder: CMat,
    /// Multiplier of the power constraint (zero when inactive).
    pub multiplier: f64,
}

/// Precoder of one user given everything else; `streams` is the user's row
/// range inside `W_h`.
#[allow(clippy::too_many_arguments)]
pub fn update_precoder(
    g: &CMat,
    phi: &CVec,
    s: &DVector<f64>,
    h_k: &CMat,
    u: &CMat,
    w: &CMat,
    streams: std::ops::Range<usize>,
    budget: f64,
    bisect_tol: f64,
) -> Result<PrecoderUpdate> {
    // O_k^H = U^H Δ G Φ H_k
    let o_h = u.adjoint() * linalg::scale_rows(s, &linalg::scale_cols(g, phi)) * h_k;
    let o = o_h.adjoint();
    let c = linalg::hermitize(&(&o * w * &o_h));
    let w_k = w.rows(streams.start, streams.len());
    let d = &o * w_k.adjoint();
    let (precoder, multiplier) = solve_power_constrained(&c, &d, budget, bisect_tol)?;
    Ok(PrecoderUpdate {
        precoder,
        multiplier,
    })
}
