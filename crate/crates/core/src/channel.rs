//! Seeded Rayleigh-fading channel realizations and their JSON-lines dump
//! format.
//!
//! Realizations are drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded
//! with `seed_from_u64(seed)`. Entries are consumed in the order `G`
//! row-major, then `H_1`, ..., `H_K` row-major; each complex entry takes two
//! standard normals (real part first) scaled by `sqrt(v / 2)`.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, C64};
use crate::model::{ChannelRealization, SystemConfig};

/// How the composite UT-RIS-BS path loss is shared between `G` and `H_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Both hops get half of the loss in dB.
    #[default]
    EqualSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    /// Composite path loss of `G H_k` in dB (non-positive).
    pub pathloss_db: f64,
    #[serde(default)]
    pub split_rule: SplitRule,
}

impl Default for FadingSpec {
    fn default() -> Self {
        Self {
            pathloss_db: -120.0,
            split_rule: SplitRule::EqualSplit,
        }
    }
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_db.is_finite() && self.pathloss_db <= 0.0) {
            return Err(invalid(format!(
                "path loss must be <= 0 dB, got {}",
                self.pathloss_db
            )));
        }
        Ok(())
    }

    /// Per-entry variances `(v_G, v_H)` with `v_G * v_H = 10^(pathloss_db / 10)`.
    pub fn entry_variances(&self) -> (f64, f64) {
        match self.split_rule {
            SplitRule::EqualSplit => {
                let v = 10f64.powf(self.pathloss_db / 20.0);
                (v, v)
            }
        }
    }
}

fn draw_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMat {
    let scale = (variance / 2.0).sqrt();
    // from_fn walks column-major, so fill row-major explicitly.
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        data.push(C64::new(scale * re, scale * im));
    }
    CMat::from_row_slice(rows, cols, &data)
}

pub fn generate_realization(
    config: &SystemConfig,
    fading: &FadingSpec,
    seed: u64,
) -> Result<ChannelRealization> {
    config.validate()?;
    fading.validate()?;
    let (v_g, v_h) = fading.entry_variances();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = draw_matrix(&mut rng, config.n_antennas, config.ris_elements, v_g);
    let h = config
        .user_antennas
        .iter()
        .map(|&nk| draw_matrix(&mut rng, config.ris_elements, nk, v_h))
        .collect();
    Ok(ChannelRealization { g, h, seed })
}

/// Row-major matrix of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixRecord {
    fn from(m: &CMat) -> Self {
        let data = m.transpose().iter().map(|z| [z.re, z.im]).collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixRecord> for CMat {
    type Error = Error;
    fn try_from(r: &MatrixRecord) -> Result<CMat> {
        if r.data.len() != r.rows * r.cols {
            return Err(invalid(format!(
                "matrix record has {} entries for {}x{}",
                r.data.len(),
                r.rows,
                r.cols
            )));
        }
        let entries: Vec<C64> = r.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &entries))
    }
}

/// One line of a channel dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub seed: u64,
    pub g: MatrixRecord,
    pub h: Vec<MatrixRecord>,
}

impl From<&ChannelRealization> for ChannelRecord {
    fn from(c: &ChannelRealization) -> Self {
        Self {
            seed: c.seed,
            g: (&c.g).into(),
            h: c.h.iter().map(MatrixRecord::from).collect(),
        }
    }
}

impl TryFrom<&ChannelRecord> for ChannelRealization {
    type Error = Error;
    fn try_from(r: &ChannelRecord) -> Result<Self> {
        Ok(Self {
            seed: r.seed,
            g: CMat::try_from(&r.g)?,
            h: r.h.iter().map(CMat::try_from).collect::<Result<_>>()?,
        })
    }
}

/// Writes one JSON record per line. `serde_json` prints the shortest
/// representation that parses back to the same `f64`.
pub fn write_channels<W: Write>(
    mut out: W,
    channels: &[ChannelRealization],
) -> std::io::Result<()> {
    for c in channels {
        serde_json::to_writer(&mut out, &ChannelRecord::from(c))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_channels<R: BufRead>(input: R) -> Result<Vec<ChannelRealization>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| invalid(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChannelRecord =
            serde_json::from_str(&line).map_err(|e| invalid(format!("line {}: {e}", i + 1)))?;
        out.push(ChannelRealization::try_from(&rec)?);
    }
    Ok(out)
}
