//! Instance configuration file (TOML).
//!
//! ```toml
//! n = 20
//! k = 10
//! l = 35
//! z = 5
//! sigma2_dbm = -10.0
//! tau_db = 10.0
//! p_tot_dbm = 20.0
//! b_gain_db = 0.0     # optional, default 0
//! xi2_db = -10.0      # optional, absent = perfect CSI
//! seed = 1            # optional, default 0
//! trials = 100        # optional, default 100
//! ```
//!
//! Powers are given in dBm and ratios in dB; everything is converted to
//! linear units here and nowhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, SystemParams};

pub const DEFAULT_TRIALS: usize = 100;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub z: usize,
    pub sigma2_dbm: f64,
    pub tau_db: f64,
    pub p_tot_dbm: f64,
    #[serde(default)]
    pub b_gain_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi2_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.params()?;
        if cfg.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(v) = cfg.xi2_db {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Config(format!("xi2_db must be finite or -inf, got {v}")));
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(
            self.n,
            self.k,
            self.l,
            self.z,
            db_to_linear(self.sigma2_dbm),
            db_to_linear(self.tau_db),
            db_to_linear(self.p_tot_dbm),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Linear CSI error variance; 0 for perfect CSI.
    pub fn xi2(&self) -> f64 {
        self.xi2_db.map_or(0.0, db_to_linear)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "n = 20\nk = 10\nl = 35\nz = 5\nsigma2_dbm = -10\ntau_db = 10\np_tot_dbm = 20\n";

    #[test]
    fn defaults_and_units() {
        let cfg = Config::from_toml(BASE).unwrap();
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.xi2(), 0.0);
        let p = cfg.params().unwrap();
        assert!((p.sigma2 - 0.1).abs() < 1e-15);
        assert!((p.tau - 10.0).abs() < 1e-12);
        assert!((p.p_tot - 100.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let cfg = Config::from_toml(&format!("{BASE}xi2_db = -10\nseed = 7\nb_gain_db = -30\n")).unwrap();
        assert!((cfg.xi2() - 0.1).abs() < 1e-15);
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::from_toml(&format!("{BASE}bogus = 1\n")).is_err());
        assert!(Config::from_toml("n = 20\n").is_err());
        assert!(Config::from_toml(&BASE.replace("z = 5", "z = 40")).is_err());
        assert!(Config::from_toml(&format!("{BASE}trials = 0\n")).is_err());
        assert!(matches!(Config::from_toml("n = [").unwrap_err(), Error::Config(_)));
    }
}
