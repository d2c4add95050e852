//! Experiment specification files.
//!
//! Powers are given in dBm and converted to mW here; everything downstream
//! works in linear units.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use risas_core::benchmarks::AoOptions;
use risas_core::channel::FadingSpec;
use risas_core::pdd::PddOptions;
use risas_core::so::SoOptions;
use risas_core::{Quantization, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pdd,
    So,
    Ao,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pdd, Scheme::So, Scheme::Ao, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pdd => "pdd",
            Scheme::So => "so",
            Scheme::Ao => "ao",
            Scheme::Random => "random",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown scheme '{s}' (expected pdd, so, ao or random)"
                ))
            })
    }
}

/// Parameter varied across sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sweep {
    None,
    PowerDbm(Vec<f64>),
    QBits(Vec<Quantization>),
    RfChains(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Power,
    QBits,
    Rf,
}

impl FromStr for SweepKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(SweepKind::Power),
            "qbits" => Ok(SweepKind::QBits),
            "rf" => Ok(SweepKind::Rf),
            _ => Err(HarnessError::Config(format!(
                "unknown sweep '{s}' (expected power, qbits or rf)"
            ))),
        }
    }
}

impl Sweep {
    /// Values used when a sweep is requested without explicit points.
    pub fn default_for(kind: SweepKind) -> Sweep {
        match kind {
            SweepKind::Power => Sweep::PowerDbm(vec![-15.0, -10.0, -5.0, 0.0]),
            SweepKind::QBits => Sweep::QBits((1..=6).map(Quantization::Bits).collect()),
            SweepKind::Rf => Sweep::RfChains((2..=6).collect()),
        }
    }

    pub fn variable(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::PowerDbm(_) => "power_dbm",
            Sweep::QBits(_) => "q_bits",
            Sweep::RfChains(_) => "rf_chains",
        }
    }

    pub fn kind(&self) -> Option<SweepKind> {
        match self {
            Sweep::None => None,
            Sweep::PowerDbm(_) => Some(SweepKind::Power),
            Sweep::QBits(_) => Some(SweepKind::QBits),
            Sweep::RfChains(_) => Some(SweepKind::Rf),
        }
    }

    /// `(label, config)` for every sweep point.
    pub fn points(&self, base: &SystemConfig) -> Vec<(String, SystemConfig)> {
        match self {
            Sweep::None => vec![("none".to_string(), base.clone())],
            Sweep::PowerDbm(v) => v
                .iter()
                .map(|&dbm| {
                    let mut c = base.clone();
                    c.power_mw = vec![dbm_to_mw(dbm); c.num_users()];
                    (dbm.to_string(), c)
                })
                .collect(),
            Sweep::QBits(v) => v
                .iter()
                .map(|&q| {
                    let mut c = base.clone();
                    c.quantization = q;
                    (q.to_string(), c)
                })
                .collect(),
            Sweep::RfChains(v) => v
                .iter()
                .map(|&t| {
                    let mut c = base.clone();
                    c.rf_chains = t;
                    (t.to_string(), c)
                })
                .collect(),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub fading: FadingSpec,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub n_realizations: usize,
    pub seed0: u64,
    pub pdd: PddOptions,
    pub so: SoOptions,
    pub ao: AoOptions,
    /// Record PDD convergence traces.
    pub trace: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(HarnessError::Config(
                "n_realizations must be at least 1".into(),
            ));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Config("no schemes selected".into()));
        }
        let empty = match &self.sweep {
            Sweep::None => false,
            Sweep::PowerDbm(v) => v.is_empty(),
            Sweep::QBits(v) => v.is_empty(),
            Sweep::RfChains(v) => v.is_empty(),
        };
        if empty {
            return Err(HarnessError::Config(format!(
                "sweep over {} has no points",
                self.sweep.variable()
            )));
        }
        for (label, config) in self.sweep.points(&self.base) {
            config
                .validate()
                .map_err(|e| HarnessError::Config(format!("sweep point {label}: {e}")))?;
        }
        self.fading.validate()?;
        self.pdd.validate()?;
        self.so.validate()?;
        self.ao.validate()?;
        Ok(())
    }

    /// Realization count used when none is given: 50 with PDD, 500 without.
    pub fn default_realizations(schemes: &[Scheme]) -> usize {
        if schemes.contains(&Scheme::Pdd) {
            50
        } else {
            500
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, k: usize, what: &str) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(x) => Ok(vec![x.clone(); k]),
            OneOrMany::Many(v) if v.len() == k => Ok(v.clone()),
            OneOrMany::Many(v) => Err(HarnessError::Config(format!(
                "{what} lists {} values for {k} users",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n_antennas: usize,
    rf_chains: usize,
    ris_elements: usize,
    quantization: Quantization,
    users: usize,
    user_antennas: OneOrMany<usize>,
    user_streams: OneOrMany<usize>,
    power_dbm: OneOrMany<f64>,
    noise_dbm: f64,
}

impl Default for SystemFile {
    fn default() -> Self {
        Self {
            n_antennas: 16,
            rf_chains: 6,
            ris_elements: 32,
            quantization: Quantization::Bits(4),
            users: 4,
            user_antennas: OneOrMany::One(3),
            user_streams: OneOrMany::One(3),
            power_dbm: OneOrMany::One(-5.0),
            noise_dbm: -120.0,
        }
    }
}

impl SystemFile {
    fn resolve(&self) -> Result<SystemConfig> {
        let k = self.users;
        Ok(SystemConfig {
            n_antennas: self.n_antennas,
            rf_chains: self.rf_chains,
            ris_elements: self.ris_elements,
            quantization: self.quantization,
            user_antennas: self.user_antennas.expand(k, "user_antennas")?,
            user_streams: self.user_streams.expand(k, "user_streams")?,
            power_mw: self
                .power_dbm
                .expand(k, "power_dbm")?
                .into_iter()
                .map(dbm_to_mw)
                .collect(),
            noise_power_mw: dbm_to_mw(self.noise_dbm),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    power_dbm: Option<Vec<f64>>,
    q_bits: Option<Vec<Quantization>>,
    rf_chains: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default)]
    system: SystemFileOpt,
    #[serde(default)]
    fading: Option<FadingSpec>,
    #[serde(default)]
    sweep: SweepFile,
    schemes: Option<Vec<Scheme>>,
    n_realizations: Option<usize>,
    #[serde(default)]
    seed0: u64,
    #[serde(default)]
    trace: bool,
    #[serde(default)]
    pdd: PddOptions,
    #[serde(default)]
    so: SoOptions,
    #[serde(default)]
    ao: AoOptions,
}

/// `[system]` table where every key is optional and falls back to the
/// reference setup.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFileOpt {
    n_antennas: Option<usize>,
    rf_chains: Option<usize>,
    ris_elements: Option<usize>,
    quantization: Option<Quantization>,
    users: Option<usize>,
    user_antennas: Option<OneOrMany<usize>>,
    user_streams: Option<OneOrMany<usize>>,
    power_dbm: Option<OneOrMany<f64>>,
    noise_dbm: Option<f64>,
}

impl SystemFileOpt {
    fn fill(self) -> SystemFile {
        let d = SystemFile::default();
        SystemFile {
            n_antennas: self.n_antennas.unwrap_or(d.n_antennas),
            rf_chains: self.rf_chains.unwrap_or(d.rf_chains),
            ris_elements: self.ris_elements.unwrap_or(d.ris_elements),
            quantization: self.quantization.unwrap_or(d.quantization),
            users: self.users.unwrap_or(d.users),
            user_antennas: self.user_antennas.unwrap_or(d.user_antennas),
            user_streams: self.user_streams.unwrap_or(d.user_streams),
            power_dbm: self.power_dbm.unwrap_or(d.power_dbm),
            noise_dbm: self.noise_dbm.unwrap_or(d.noise_dbm),
        }
    }
}

/// Command-line values that take precedence over the specification file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub schemes: Option<Vec<Scheme>>,
    pub n_realizations: Option<usize>,
    pub seed0: Option<u64>,
    /// Sweep kind; points come from the file when it sweeps the same
    /// variable, otherwise the defaults for that kind are used.
    pub sweep: Option<SweepKind>,
    pub trace: bool,
}

impl ExperimentSpec {
    /// Parses a TOML specification. Missing keys take the reference defaults
    /// (N=16, T=6, M=32, Q=4, K=4, N_k=L_k=3, p=-5 dBm, noise -120 dBm).
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &Overrides::default())
    }

    pub fn from_toml_with(text: &str, overrides: &Overrides) -> Result<Self> {
        let file: SpecFile =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let given = [
            file.sweep.power_dbm.is_some(),
            file.sweep.q_bits.is_some(),
            file.sweep.rf_chains.is_some(),
        ];
        if given.iter().filter(|&&x| x).count() > 1 {
            return Err(HarnessError::Config(
                "at most one sweep variable may be given".into(),
            ));
        }
        let sweep = if let Some(v) = file.sweep.power_dbm {
            Sweep::PowerDbm(v)
        } else if let Some(v) = file.sweep.q_bits {
            Sweep::QBits(v)
        } else if let Some(v) = file.sweep.rf_chains {
            Sweep::RfChains(v)
        } else {
            Sweep::None
        };
        let sweep = match overrides.sweep {
            Some(kind) if sweep.kind() != Some(kind) => Sweep::default_for(kind),
            _ => sweep,
        };
        let mut schemes = overrides
            .schemes
            .clone()
            .or(file.schemes)
            .unwrap_or_else(|| Scheme::ALL.to_vec());
        schemes.sort();
        schemes.dedup();
        let spec = ExperimentSpec {
            base: file.system.fill().resolve()?,
            fading: file.fading.unwrap_or_default(),
            sweep,
            n_realizations: overrides
                .n_realizations
                .or(file.n_realizations)
                .unwrap_or_else(|| Self::default_realizations(&schemes)),
            schemes,
            seed0: overrides.seed0.unwrap_or(file.seed0),
            pdd: file.pdd,
            so: file.so,
            ao: file.ao,
            trace: file.trace || overrides.trace,
        };
        Ok(spec)
    }

    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_with(&text, overrides).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::format(path, m),
            other => other,
        })
    }

    /// The reference setup with no sweep.
    pub fn default_setup() -> Self {
        Self::from_toml("").expect("empty spec resolves to defaults")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let spec = ExperimentSpec::default_setup();
        let b = &spec.base;
        assert_eq!((b.n_antennas, b.rf_chains, b.ris_elements), (16, 6, 32));
        assert_eq!(b.quantization, Quantization::Bits(4));
        assert_eq!(b.user_antennas, vec![3; 4]);
        assert_eq!(b.user_streams, vec![3; 4]);
        assert!((b.power_mw[0] - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((b.noise_power_mw - 1e-12).abs() < 1e-27);
        assert_eq!(spec.fading.pathloss_db, -120.0);
        assert_eq!(spec.schemes, Scheme::ALL.to_vec());
        assert_eq!(spec.n_realizations, 50);
        assert_eq!(spec.pdd, PddOptions::default());
        spec.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_sweeps() {
        let spec = ExperimentSpec::from_toml(
            r#"
            schemes = ["so", "random"]
            seed0 = 7
            [system]
            n_antennas = 8
            rf_chains = 3
            ris_elements = 8
            users = 2
            user_antennas = [2, 3]
            user_streams = 2
            power_dbm = 0
            quantization = "inf"
            [sweep]
            q_bits = [1, 2, "inf"]
            [pdd]
            chi = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(spec.n_realizations, 500);
        assert_eq!(spec.seed0, 7);
        assert_eq!(spec.base.user_antennas, vec![2, 3]);
        assert_eq!(spec.base.power_mw, vec![1.0, 1.0]);
        assert_eq!(spec.base.quantization, Quantization::Continuous);
        assert_eq!(
            spec.sweep,
            Sweep::QBits(vec![
                Quantization::Bits(1),
                Quantization::Bits(2),
                Quantization::Continuous
            ])
        );
        assert_eq!(spec.pdd.chi, 0.5);
        assert_eq!(spec.pdd.rho0, 1.0);
        let labels: Vec<String> = spec
            .sweep
            .points(&spec.base)
            .into_iter()
            .map(|p| p.0)
            .collect();
        assert_eq!(labels, vec!["1", "2", "inf"]);
    }

    #[test]
    fn overrides_take_precedence() {
        let text = "schemes = [\"pdd\"]\nn_realizations = 9\n[sweep]\nrf_chains = [2, 3]";
        let o = Overrides {
            schemes: Some(vec![Scheme::Random, Scheme::So, Scheme::Random]),
            seed0: Some(11),
            sweep: Some(SweepKind::Rf),
            ..Overrides::default()
        };
        let spec = ExperimentSpec::from_toml_with(text, &o).unwrap();
        assert_eq!(spec.schemes, vec![Scheme::So, Scheme::Random]);
        assert_eq!(spec.n_realizations, 9);
        assert_eq!(spec.seed0, 11);
        assert_eq!(spec.sweep, Sweep::RfChains(vec![2, 3]));

        let o = Overrides {
            schemes: Some(vec![Scheme::So]),
            sweep: Some(SweepKind::Power),
            trace: true,
            ..Overrides::default()
        };
        let spec = ExperimentSpec::from_toml_with("", &o).unwrap();
        assert_eq!(spec.n_realizations, 500);
        assert_eq!(spec.sweep, Sweep::PowerDbm(vec![-15.0, -10.0, -5.0, 0.0]));
        assert!(spec.trace);
    }

    #[test]
    fn bundled_configs_parse() {
        let desk = ExperimentSpec::from_toml(include_str!("../../../configs/desk.toml")).unwrap();
        desk.validate().unwrap();
        assert_eq!(desk.sweep.kind(), Some(SweepKind::Power));
        let full =
            ExperimentSpec::from_toml(include_str!("../../../configs/reference.toml")).unwrap();
        full.validate().unwrap();
        assert_eq!(full.base, ExperimentSpec::default_setup().base);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ExperimentSpec::from_toml("bogus = 1").is_err());
        assert!(ExperimentSpec::from_toml("[sweep]\npower_dbm = [0]\nrf_chains = [2]").is_err());
        assert!(
            ExperimentSpec::from_toml("[system]\nusers = 2\nuser_antennas = [1, 2, 3]").is_err()
        );
        let mut spec = ExperimentSpec::default_setup();
        spec.sweep = Sweep::RfChains(vec![16]);
        assert!(spec.validate().is_err());
        spec.sweep = Sweep::PowerDbm(vec![]);
        assert!(spec.validate().is_err());
        assert!(ExperimentSpec::from_path(
            Path::new("/nonexistent/spec.toml"),
            &Overrides::default()
        )
        .unwrap_err()
        .to_string()
        .contains("/nonexistent/spec.toml"));
        assert!("xyz".parse::<Scheme>().is_err());
        assert_eq!("ao".parse::<Scheme>().unwrap(), Scheme::Ao);
    }
}
