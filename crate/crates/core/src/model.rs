//! System model: dimensions, the quantized phase alphabet, the sum-rate
//! metric and the WMMSE quantities built on top of it.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};

/// Largest supported phase resolution; `2^16` candidates per element.
pub const MAX_PHASE_BITS: u32 = 16;

/// Phase resolution of the RIS elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "QuantRepr", into = "QuantRepr")]
pub enum Quantization {
    /// `2^bits` uniformly spaced phases.
    Bits(u32),
    /// Unquantized phases.
    Continuous,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QuantRepr {
    Bits(u32),
    Text(String),
}

impl TryFrom<QuantRepr> for Quantization {
    type Error = String;
    fn try_from(r: QuantRepr) -> std::result::Result<Self, String> {
        match r {
            QuantRepr::Bits(b) => Ok(Quantization::Bits(b)),
            QuantRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Quantization> for QuantRepr {
    fn from(q: Quantization) -> Self {
        match q {
            Quantization::Bits(b) => QuantRepr::Bits(b),
            Quantization::Continuous => QuantRepr::Text("inf".into()),
        }
    }
}

impl std::str::FromStr for Quantization {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "continuous" => Ok(Quantization::Continuous),
            other => other
                .parse::<u32>()
                .map(Quantization::Bits)
                .map_err(|_| format!("invalid quantization `{s}` (expected bits or `inf`)")),
        }
    }
}

impl fmt::Display for Quantization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantization::Bits(b) => write!(f, "{b}"),
            Quantization::Continuous => f.write_str("inf"),
        }
    }
}

impl Quantization {
    pub fn validate(self) -> Result<()> {
        match self {
            Quantization::Bits(b) if !(1..=MAX_PHASE_BITS).contains(&b) => Err(invalid(format!(
                "phase quantization must use 1..={MAX_PHASE_BITS} bits, got {b}"
            ))),
            _ => Ok(()),
        }
    }

    /// Sweep value used in reports; `inf` for continuous phases.
    pub fn as_f64(self) -> f64 {
        match self {
            Quantization::Bits(b) => b as f64,
            Quantization::Continuous => f64::INFINITY,
        }
    }
}

/// Dimensions, budgets and noise level of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas `N`.
    pub n_antennas: usize,
    /// RF chains `T`, strictly fewer than the antennas.
    pub rf_chains: usize,
    /// RIS reflecting elements `M`.
    pub ris_elements: usize,
    pub quantization: Quantization,
    /// Antennas per user terminal.
    pub user_antennas: Vec<usize>,
    /// Data streams per user terminal.
    pub user_streams: Vec<usize>,
    /// Per-user transmit power budgets in mW.
    pub power_mw: Vec<f64>,
    /// Receiver noise power in mW.
    pub noise_power_mw: f64,
}

impl SystemConfig {
    pub fn num_users(&self) -> usize {
        self.user_antennas.len()
    }

    pub fn total_streams(&self) -> usize {
        self.user_streams.iter().sum()
    }

    /// Column range of user `k`'s streams inside the stacked effective channel.
    pub fn stream_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.user_streams[..k].iter().sum();
        start..start + self.user_streams[k]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.ris_elements == 0 {
            return Err(invalid("antenna and RIS element counts must be positive"));
        }
        if self.rf_chains == 0 || self.rf_chains >= self.n_antennas {
            return Err(invalid(format!(
                "need 1 <= T < N, got T={} N={}",
                self.rf_chains, self.n_antennas
            )));
        }
        self.quantization.validate()?;
        let k = self.num_users();
        if k == 0 {
            return Err(invalid("at least one user is required"));
        }
        if self.user_streams.len() != k || self.power_mw.len() != k {
            return Err(invalid("per-user lists must all have length K"));
        }
        for (i, (&nk, &lk)) in self
            .user_antennas
            .iter()
            .zip(&self.user_streams)
            .enumerate()
        {
            if nk == 0 || lk == 0 || lk > nk {
                return Err(invalid(format!(
                    "user {i}: need 1 <= L_k <= N_k, got L_k={lk} N_k={nk}"
                )));
            }
        }
        if self.power_mw.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("power budgets must be positive and finite"));
        }
        if !(self.noise_power_mw.is_finite() && self.noise_power_mw > 0.0) {
            return Err(invalid("noise power must be positive and finite"));
        }
        Ok(())
    }
}

/// One draw of the RIS-to-BS channel `G` (N x M) and the user-to-RIS
/// channels `H_k` (M x N_k).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMat,
    pub h: Vec<CMat>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if self.g.shape() != (config.n_antennas, config.ris_elements) {
            return Err(invalid(format!("G has shape {:?}", self.g.shape())));
        }
        if self.h.len() != config.num_users() {
            return Err(invalid("channel list length differs from user count"));
        }
        for (k, hk) in self.h.iter().enumerate() {
            if hk.shape() != (config.ris_elements, config.user_antennas[k]) {
                return Err(invalid(format!("H_{k} has shape {:?}", hk.shape())));
            }
        }
        if !linalg::all_finite(&self.g) || !self.h.iter().all(linalg::all_finite) {
            return Err(invalid("channel entries must be finite"));
        }
        Ok(())
    }

    /// SHA-256 over the raw bits of every entry; equal digests mean
    /// bitwise-identical channels.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for m in std::iter::once(&self.g).chain(self.h.iter()) {
            hasher.update((m.nrows() as u64).to_le_bytes());
            hasher.update((m.ncols() as u64).to_le_bytes());
            for z in m.iter() {
                hasher.update(z.re.to_bits().to_le_bytes());
                hasher.update(z.im.to_bits().to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Decision variables of the design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    /// Antenna selection indicator (length N).
    pub selection: DVector<f64>,
    /// RIS phase-shifts (length M).
    pub phases: CVec,
    /// Precoders, `P_k` of size N_k x L_k.
    pub precoders: Vec<CMat>,
}

impl DesignState {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selection
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.5)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn effective_channel(&self, channels: &ChannelRealization) -> Result<CMat> {
        effective_channel(&channels.g, &self.phases, &channels.h, &self.precoders)
    }

    /// Sum-rate in bit/s/Hz of this design on `channels`.
    pub fn sum_rate(&self, channels: &ChannelRealization, config: &SystemConfig) -> Result<f64> {
        let hbar = self.effective_channel(channels)?;
        sum_rate(&self.selection, &hbar, config.noise_power_mw)
    }

    /// Checks the binary selection, phase alphabet and power constraints.
    pub fn check_feasible(&self, config: &SystemConfig) -> Result<()> {
        if self.selection.len() != config.n_antennas || self.phases.len() != config.ris_elements {
            return Err(invalid("design dimensions do not match the configuration"));
        }
        if self.selection.iter().any(|&s| s != 0.0 && s != 1.0) {
            return Err(invalid("selection is not binary"));
        }
        let active = self.selection.iter().filter(|&&s| s == 1.0).count();
        if active != config.rf_chains {
            return Err(invalid(format!(
                "selection activates {active} antennas, expected {}",
                config.rf_chains
            )));
        }
        for (m, &z) in self.phases.iter().enumerate() {
            if !is_phase_member(z, config.quantization) {
                return Err(invalid(format!(
                    "phase {m} = {z} is not in the phase alphabet"
                )));
            }
        }
        if self.precoders.len() != config.num_users() {
            return Err(invalid("precoder list length differs from user count"));
        }
        for (k, p) in self.precoders.iter().enumerate() {
            if p.shape() != (config.user_antennas[k], config.user_streams[k]) {
                return Err(invalid(format!("P_{k} has shape {:?}", p.shape())));
            }
            let power = linalg::frobenius_sq(p);
            if power > config.power_mw[k] * (1.0 + 1e-9) {
                return Err(invalid(format!(
                    "P_{k} uses {power} mW of {} mW",
                    config.power_mw[k]
                )));
            }
        }
        Ok(())
    }
}

/// Weight, receiver and MSE matrices of the WMMSE reformulation.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    /// `W_h`, L x L Hermitian positive definite.
    pub weight: CMat,
    /// `U_h`, N x L.
    pub receiver: CMat,
    /// `E_h`, L x L Hermitian positive definite.
    pub mse: CMat,
}

/// `t`-th element (zero-based) of the `2^bits` phase alphabet. Points on the
/// axes are returned exactly.
pub fn phase_point(t: usize, bits: u32) -> C64 {
    let size = 1usize << bits;
    let t = t % size;
    if (4 * t).is_multiple_of(size) {
        match 4 * t / size {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    } else {
        C64::from_polar(1.0, 2.0 * PI * t as f64 / size as f64)
    }
}

/// The ordered phase alphabet `{exp(j 2 pi (t-1) / 2^Q)}`.
pub fn phase_set(bits: u32) -> Result<Vec<C64>> {
    Quantization::Bits(bits).validate()?;
    Ok((0..1usize << bits).map(|t| phase_point(t, bits)).collect())
}

pub fn is_phase_member(z: C64, quant: Quantization) -> bool {
    const TOL: f64 = 1e-12;
    match quant {
        Quantization::Continuous => (z.norm() - 1.0).abs() <= TOL,
        Quantization::Bits(bits) => {
            let size = 1usize << bits;
            let t = (z.arg() / (2.0 * PI) * size as f64).round() as i64;
            let t = t.rem_euclid(size as i64) as usize;
            let p = phase_point(t, bits);
            p == z || (p - z).norm() <= TOL
        }
    }
}

/// Alphabet element maximizing `Re{v z*}`; ties go to the lowest index.
pub fn nearest_phase(z: C64, quant: Quantization) -> Result<C64> {
    let mag = z.norm();
    if !(mag > 0.0) || !mag.is_finite() {
        return Err(Error::Degenerate(format!("cannot take the phase of {z}")));
    }
    match quant {
        Quantization::Continuous => Ok(z / mag),
        Quantization::Bits(bits) => {
            quant.validate()?;
            let size = 1usize << bits;
            // The optimum is one of the two alphabet points bracketing arg(z).
            let pos = z.arg() / (2.0 * PI) * size as f64;
            let lo = (pos.floor() as i64).rem_euclid(size as i64) as usize;
            let hi = (lo + 1) % size;
            let score = |t: usize| (phase_point(t, bits) * z.conj()).re;
            let (s_lo, s_hi) = (score(lo), score(hi));
            let tie = 1e-12 * mag;
            let best = if (s_lo - s_hi).abs() <= tie {
                lo.min(hi)
            } else if s_lo > s_hi {
                lo
            } else {
                hi
            };
            Ok(phase_point(best, bits))
        }
    }
}

/// Like [`nearest_phase`] but maps `z = 0` to the first alphabet element and
/// reports it through the returned flag.
pub fn project_phase(z: C64, quant: Quantization) -> (C64, bool) {
    match nearest_phase(z, quant) {
        Ok(v) => (v, false),
        Err(_) => (ONE, true),
    }
}

/// `diag(s)`.
pub fn selection_delta(s: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(s)
}

/// Stacked effective channel `[G Phi H_1 P_1, ..., G Phi H_K P_K]`.
pub fn effective_channel(g: &CMat, phi: &CVec, h: &[CMat], p: &[CMat]) -> Result<CMat> {
    if g.ncols() != phi.len() {
        return Err(invalid(format!(
            "G has {} columns but phi has {} entries",
            g.ncols(),
            phi.len()
        )));
    }
    if h.len() != p.len() {
        return Err(invalid("channel and precoder lists differ in length"));
    }
    let g_phi = linalg::scale_cols(g, phi);
    let mut blocks = Vec::with_capacity(h.len());
    for (k, (hk, pk)) in h.iter().zip(p).enumerate() {
        if hk.nrows() != phi.len() || hk.ncols() != pk.nrows() {
            return Err(invalid(format!(
                "user {k}: H_k {:?} and P_k {:?} mismatch",
                hk.shape(),
                pk.shape()
            )));
        }
        blocks.push(&g_phi * (hk * pk));
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(g.nrows(), total);
    let mut col = 0;
    for b in &blocks {
        out.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    Ok(out)
}

/// `log2 det(I + sigma^-2 Delta Hbar Hbar^H Delta^H)`, evaluated on the
/// L x L side through `I + sigma^-2 Hbar^H Delta^2 Hbar`.
pub fn sum_rate(s: &DVector<f64>, hbar: &CMat, sigma2: f64) -> Result<f64> {
    if s.len() != hbar.nrows() {
        return Err(invalid(format!(
            "selection has {} entries, channel has {} rows",
            s.len(),
            hbar.nrows()
        )));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0)
        || s.iter().any(|x| !x.is_finite())
        || !linalg::all_finite(hbar)
    {
        return Err(invalid(
            "sum-rate inputs must be finite with positive noise power",
        ));
    }
    let s2 = s.map(|x| x * x);
    let scaled = linalg::scale_rows(&s2, hbar);
    let mut gram = hbar.adjoint() * scaled;
    gram.scale_mut(1.0 / sigma2);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ONE;
    }
    Ok(linalg::logdet_hpd(&gram)? / LN_2)
}

/// Sum-rate written with an explicit T x N row-selection matrix and
/// transmit covariances, `log2 det(I + sigma^-2 sum_k S G Phi H_k Q_k H_k^H Phi^H G^H S^H)`.
/// Evaluated through an LU determinant; used as an independent check of
/// [`sum_rate`].
pub fn sum_rate_direct(
    rows: &[usize],
    g: &CMat,
    phi: &CVec,
    h: &[CMat],
    covariances: &[CMat],
    sigma2: f64,
) -> Result<f64> {
    let n = g.nrows();
    let mut seen = vec![false; n];
    for &r in rows {
        if r >= n {
            return Err(invalid(format!("antenna index {r} out of range")));
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(invalid(format!("antenna index {r} selected twice")));
        }
    }
    if h.len() != covariances.len() || g.ncols() != phi.len() {
        return Err(invalid("dimension mismatch"));
    }
    let t = rows.len();
    let mut select = CMat::zeros(t, n);
    for (i, &r) in rows.iter().enumerate() {
        select[(i, r)] = ONE;
    }
    let front = select * g * linalg::diag_complex(phi);
    let mut acc = CMat::identity(t, t);
    for (hk, qk) in h.iter().zip(covariances) {
        if hk.ncols() != qk.nrows() || !qk.is_square() {
            return Err(invalid("covariance shape mismatch"));
        }
        let a = &front * hk;
        acc += (&a * qk * a.adjoint()).unscale(sigma2);
    }
    let det = acc.determinant();
    if !(det.re > 0.0) {
        return Err(Error::Numerical(format!("non-positive determinant {det}")));
    }
    Ok(det.re.log2())
}

/// MSE matrix `(U^H Delta Hbar - I)(U^H Delta Hbar - I)^H + sigma^2 U^H U`.
pub fn mse_matrix(u: &CMat, s: &DVector<f64>, hbar: &CMat, sigma2: f64) -> Result<CMat> {
    if u.shape() != hbar.shape() || s.len() != hbar.nrows() {
        return Err(invalid(format!(
            "U {:?}, s {}, Hbar {:?} mismatch",
            u.shape(),
            s.len(),
            hbar.shape()
        )));
    }
    let l = hbar.ncols();
    let mut x = u.adjoint() * linalg::scale_rows(s, hbar);
    for i in 0..l {
        x[(i, i)] -= ONE;
    }
    let e = &x * x.adjoint() + (u.adjoint() * u).scale(sigma2);
    Ok(linalg::hermitize(&e))
}

/// `tr(W E) - ln det W`.
pub fn wmmse_objective(w: &CMat, e: &CMat) -> Result<f64> {
    let logdet = linalg::logdet_hpd(w)
        .map_err(|_| Error::Domain("weight matrix is not positive definite".into()))?;
    Ok(linalg::trace_re(&(w * e)) - logdet)
}
