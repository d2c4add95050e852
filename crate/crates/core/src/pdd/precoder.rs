//! Power-constrained quadratic precoder step:
//! minimize `tr(P^H C P) - 2 Re tr(P^H D)` subject to `tr(P P^H) <= p`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 4000;

/// `C = V diag(ev) V^H` together with the projections `[V^H D D^H V]_nn`,
/// so that `tr(P(λ) P(λ)^H) = Σ_n proj_n / (ev_n + λ)^2`.
#[derive(Debug, Clone)]
pub struct PowerProfile {
    eigenvalues: DVector<f64>,
    basis: CMat,
    rotated_d: CMat,
    projections: DVector<f64>,
}

impl PowerProfile {
    pub fn new(c: &CMat, d: &CMat) -> Self {
        let (mut eigenvalues, basis) = linalg::hermitian_eigen(c);
        let rotated_d = basis.adjoint() * d;
        let mut projections = DVector::from_iterator(
            rotated_d.nrows(),
            rotated_d
                .row_iter()
                .map(|r| r.iter().map(|z| z.norm_sqr()).sum()),
        );
        let top = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let total: f64 = projections.sum();
        for n in 0..eigenvalues.len() {
            // C is PSD by construction; negative or negligible eigenvalues are
            // rounding noise.
            if eigenvalues[n] <= 1e-13 * top {
                eigenvalues[n] = 0.0;
                if projections[n] <= 1e-24 * total {
                    projections[n] = 0.0;
                }
            }
        }
        Self {
            eigenvalues,
            basis,
            rotated_d,
            projections,
        }
    }

    /// Transmit power of `(C + λI)^+ D`; infinite when `λ = 0` and `D` has
    /// energy in the null space of `C`.
    pub fn power(&self, lambda: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(self.projections.iter())
            .map(|(&ev, &pr)| {
                if pr == 0.0 {
                    0.0
                } else if ev + lambda == 0.0 {
                    f64::INFINITY
                } else {
                    pr / (ev + lambda).powi(2)
                }
            })
            .sum()
    }

    /// `(C + λI)^+ D`, with zero modes dropped.
    pub fn precoder(&self, lambda: f64) -> CMat {
        let mut scaled = self.rotated_d.clone();
        for (n, mut row) in scaled.row_iter_mut().enumerate() {
            let denom = self.eigenvalues[n] + lambda;
            let f = if denom > 0.0 && self.projections[n] > 0.0 {
                1.0 / denom
            } else {
                0.0
            };
            row *= C64::new(f, 0.0);
        }
        &self.basis * scaled
    }
}

/// Returns the optimal precoder and its multiplier. A zero multiplier means
/// the power budget is inactive. Otherwise `λ` is located by bisection on
/// the decreasing power curve and the feasible end of the final bracket is
/// returned, so `tr(P P^H) <= budget` always holds.
pub fn solve_power_constrained(c: &CMat, d: &CMat, budget: f64, tol: f64) -> Result<(CMat, f64)> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power budget must be positive, got {budget}"
        )));
    }
    let profile = PowerProfile::new(c, d);
    if profile.power(0.0) <= budget {
        return Ok((profile.precoder(0.0), 0.0));
    }

    let mut hi = 1.0;
    let mut doublings = 0;
    while profile.power(hi) > budget {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Numerical(
                "could not bracket the power multiplier".into(),
            ));
        }
    }
    let mut lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
    for _ in 0..MAX_BISECTIONS {
        if budget - profile.power(hi) < tol * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if profile.power(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((profile.precoder(hi), hi))
}
