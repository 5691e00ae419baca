//! TOML configuration for the benchmark harness.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelKernel, ChannelModel, CorrelationModel};
use crate::error::{Error, Result};
use crate::manifold::SolverOptions;

/// Estimation schemes, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ls,
    MmseDft,
    Omp,
    IceFilling,
    ArmoIdeal,
    ArmoTrained,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Ls,
        Scheme::MmseDft,
        Scheme::Omp,
        Scheme::IceFilling,
        Scheme::ArmoIdeal,
        Scheme::ArmoTrained,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Ls => "ls",
            Scheme::MmseDft => "mmse-dft",
            Scheme::Omp => "omp",
            Scheme::IceFilling => "ice-filling",
            Scheme::ArmoIdeal => "armo-ideal",
            Scheme::ArmoTrained => "armo-trained",
        }
    }

    /// Whether the scheme uses the channel kernel.
    pub fn uses_kernel(&self) -> bool {
        !matches!(self, Scheme::Ls | Scheme::Omp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scalar or a sweep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub bs: CorrelationModel,
    pub ris: CorrelationModel,
    pub user_ris: CorrelationModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmpConfig {
    /// Defaults to `⌈Q/4⌉`.
    pub max_atoms: Option<usize>,
    /// Defaults to `√(Q σ²)`.
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub spacing_wavelengths: f64,
    pub correlation: CorrelationConfig,
    pub q: OneOrMany<usize>,
    pub snr_db: OneOrMany<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_window")]
    pub window_r: usize,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub omp: OmpConfig,
    /// Write measured wall time into the CSV; off by default so that
    /// reports are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_window() -> usize {
    100
}

fn default_frames() -> usize {
    300
}

/// Below about 0.03 the trained loop locks onto the dominant directions of
/// its first estimates and never measures the rest.
pub const DEFAULT_EPSILON: f64 = 0.1;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SimConfig {
    /// Desk-scale defaults: 4-antenna BS, 4x4 RIS at λ/4, isotropic
    /// scattering on every link, SNR 10 dB.
    pub fn desk_default() -> Self {
        Self {
            m: 4,
            n1: 4,
            n2: 4,
            spacing_wavelengths: 0.25,
            correlation: CorrelationConfig {
                bs: CorrelationModel::IsotropicSinc,
                ris: CorrelationModel::IsotropicSinc,
                user_ris: CorrelationModel::IsotropicSinc,
            },
            q: OneOrMany::Many(vec![8, 16, 24, 32, 40, 48, 56, 64]),
            snr_db: OneOrMany::One(10.0),
            trials: 500,
            schemes: Scheme::ALL.to_vec(),
            window_r: default_window(),
            frames: default_frames(),
            epsilon: default_epsilon(),
            seed: 2025,
            solver: SolverOptions::default(),
            omp: OmpConfig::default(),
            record_timing: false,
        }
    }

    /// Full-size setting: 4-antenna BS, 8x8 RIS, Q = 200. Minutes per
    /// sweep point for the designed schemes.
    pub fn full_scale() -> Self {
        Self {
            m: 4,
            n1: 8,
            n2: 8,
            q: OneOrMany::One(200),
            snr_db: OneOrMany::Many(vec![0.0, 5.0, 10.0, 15.0, 20.0]),
            ..Self::desk_default()
        }
    }

    pub fn with_dims(mut self, m: usize, n1: usize, n2: usize) -> Self {
        self.m = m;
        self.n1 = n1;
        self.n2 = n2;
        self
    }

    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn mn(&self) -> usize {
        self.m * self.n()
    }

    pub fn q_values(&self) -> Vec<usize> {
        self.q.values()
    }

    pub fn snr_values(&self) -> Vec<f64> {
        self.snr_db.values()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<file>".to_string());
            Error::config(field, e.to_string().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("m", "must be >= 1"));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config("n1/n2", "must be >= 1"));
        }
        if !(self.spacing_wavelengths.is_finite() && self.spacing_wavelengths > 0.0) {
            return Err(Error::config("spacing_wavelengths", "must be positive and finite"));
        }
        for (name, model) in [
            ("correlation.bs", self.correlation.bs),
            ("correlation.ris", self.correlation.ris),
            ("correlation.user_ris", self.correlation.user_ris),
        ] {
            model.validate().map_err(|e| Error::config(name, e.to_string()))?;
        }
        let qs = self.q_values();
        if qs.is_empty() || qs.contains(&0) {
            return Err(Error::config("q", "needs at least one value, all >= 1"));
        }
        let snrs = self.snr_values();
        if snrs.is_empty() || snrs.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_db", "needs at least one finite value"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "must list at least one scheme"));
        }
        if self.window_r == 0 {
            return Err(Error::config("window_r", "must be >= 1"));
        }
        if self.frames == 0 {
            return Err(Error::config("frames", "must be >= 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", "must be a finite value >= 0"));
        }
        self.solver
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        if let Some(tol) = self.omp.residual_tol {
            if !(tol >= 0.0) {
                return Err(Error::config("omp.residual_tol", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m, self.n1, self.n2, self.spacing_wavelengths)
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::new(
            &self.geometry()?,
            self.correlation.bs,
            self.correlation.ris,
            self.correlation.user_ris,
        )
    }

    pub fn build_kernel(&self) -> Result<ChannelKernel> {
        Ok(self.channel_model()?.kernel().clone())
    }
}

/// `σ² = 10^(-SNR/10)` with SNR defined as `1/σ²`.
pub fn noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = SimConfig::desk_default();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let mut text = SimConfig::desk_default().to_toml_string();
        text = format!("bogus_key = 3\n{text}");
        let err = SimConfig::from_toml_str(&text).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "bogus_key"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut cfg = SimConfig::desk_default();
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "trials"));
        let mut cfg = SimConfig::desk_default();
        cfg.schemes.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "schemes"));
        let mut cfg = SimConfig::desk_default();
        cfg.snr_db = OneOrMany::One(f64::NAN);
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "snr_db"));
        let mut cfg = SimConfig::desk_default();
        cfg.correlation.ris = CorrelationModel::Exponential { rho: 1.5 };
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "correlation.ris"));
    }

    #[test]
    fn scalar_and_list_forms() {
        let text = SimConfig::desk_default()
            .to_toml_string()
            .replace("snr_db = 10.0", "snr_db = [0.0, 10.0]");
        let cfg = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.snr_values(), vec![0.0, 10.0]);
    }

    #[test]
    fn noise_power_convention() {
        assert!((noise_power(10.0) - 0.1).abs() < 1e-15);
        assert_eq!(noise_power(0.0), 1.0);
    }
}
