use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hiring_core::fitting::DEFAULT_LAMBDA;
use hiring_core::market::Feature;

use crate::error::{CliError, Stage};

/// Synthetic inputs generated when no data paths are configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_institutions: usize,
    pub n_years: usize,
    pub hires_per_year: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_institutions: 205,
            n_years: 42,
            hires_per_year: 63.3,
        }
    }
}

/// Every tunable of a run. Missing keys take their defaults; command-line
/// flags override keys after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub institutions: Option<PathBuf>,
    pub faculty: Option<PathBuf>,
    pub publications: Option<PathBuf>,
    /// CSV `institution_id,region` overriding the institutions file.
    pub region_map: Option<PathBuf>,
    pub synthetic: Option<SynthConfig>,
    pub seed: u64,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lda_iterations: usize,
    pub mvr_restarts: usize,
    pub mvr_samples: usize,
    pub features: Vec<String>,
    pub lambda: f64,
    pub replicates: usize,
    pub greedy: bool,
    pub intercept: bool,
    pub fit_restarts: usize,
    pub fit_max_iter: Option<usize>,
    /// Simulated histories for simulation, checking and analysis.
    pub runs: usize,
    pub model: String,
    pub weights: Option<PathBuf>,
    /// Institutions listed in the rank-band table.
    pub top_n: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            institutions: None,
            faculty: None,
            publications: None,
            region_map: None,
            synthetic: None,
            seed: 0,
            topics: 10,
            alpha: 5.0,
            beta: 0.01,
            lda_iterations: 1000,
            mvr_restarts: 10,
            mvr_samples: 100,
            features: Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
            lambda: DEFAULT_LAMBDA,
            replicates: 25,
            greedy: true,
            intercept: false,
            fit_restarts: 5,
            fit_max_iter: None,
            runs: 200,
            model: "logistic".into(),
            weights: None,
            top_n: 30,
        }
    }
}

impl Config {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(Stage::Config, format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(Stage::Config, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.institutions,
            &mut cfg.faculty,
            &mut cfg.publications,
            &mut cfg.region_map,
            &mut cfg.weights,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn feature_list(&self) -> Result<Vec<Feature>, CliError> {
        self.features
            .iter()
            .map(|f| f.parse().map_err(|e| CliError::usage(Stage::Config, format!("{e}"))))
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::usage(Stage::Config, m.to_string()));
        if self.topics == 0 || self.lda_iterations == 0 {
            return bad("topics and lda_iterations must be positive");
        }
        if self.mvr_restarts == 0 || self.mvr_samples == 0 {
            return bad("mvr_restarts and mvr_samples must be positive");
        }
        if self.replicates == 0 || self.fit_restarts == 0 {
            return bad("replicates and fit_restarts must be positive");
        }
        if self.runs < 2 {
            return bad("runs must be at least 2");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !["uniform", "step", "logistic"].contains(&self.model.as_str()) {
            return bad("model must be uniform, step or logistic");
        }
        self.feature_list()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn partial_file_keeps_defaults_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 9, "faculty": "data/f.csv"}"#).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.runs, 200);
        assert_eq!(cfg.faculty.unwrap(), dir.path().join("data/f.csv"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"sede": 9}"#).unwrap();
        assert_eq!(Config::load(&path).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn validation() {
        assert!(Config::default().validate().is_ok());
        let cfg = Config {
            features: vec!["height".into()],
            ..Config::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = Config {
            model: "random".into(),
            ..Config::default()
        };
        assert!(cfg.validate().is_err());
    }
}
