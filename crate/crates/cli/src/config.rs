//! Run configuration: a TOML file with `[analysis]`, `[source]`, `[scan]` and
//! `[jacobi]` tables, overridden by command-line flags.

use std::path::Path;

use nongauss_timetag::{AnalysisConfig, JacobiBinning, SourceConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGrid {
    pub alpha_max: f64,
    pub alpha_n: usize,
    pub r_max: f64,
    pub r_n: usize,
    pub theta_max: f64,
    pub theta_n: usize,
    /// Points on the boundary and tangent curves.
    pub curve_points: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            alpha_max: 1.0,
            alpha_n: 1000,
            r_max: 1.0,
            r_n: 501,
            theta_max: std::f64::consts::PI,
            theta_n: 21,
            curve_points: 401,
        }
    }
}

impl ScanGrid {
    pub fn validate(&self) -> Result<(), InputError> {
        if self.alpha_n == 0 || self.r_n == 0 || self.theta_n == 0 || self.curve_points < 2 {
            return Err(InputError(format!(
                "scan grid must be non-empty, got {}x{}x{} with {} curve points",
                self.alpha_n, self.r_n, self.theta_n, self.curve_points
            )));
        }
        for (name, v) in [("alpha_max", self.alpha_max), ("r_max", self.r_max), ("theta_max", self.theta_max)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(InputError(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.alpha_max > 0.0) {
            return Err(InputError("alpha_max must be > 0".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.alpha_n * self.r_n * self.theta_n
    }

    /// `alpha_max * i / n` for `i = 1..=n`: the origin is excluded.
    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha_max * (i + 1) as f64 / self.alpha_n as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        endpoint_grid(self.r_max, j, self.r_n)
    }

    pub fn theta(&self, k: usize) -> f64 {
        endpoint_grid(self.theta_max, k, self.theta_n)
    }
}

fn endpoint_grid(max: f64, i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        max * i as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub analysis: AnalysisConfig,
    pub source: SourceConfig,
    pub scan: ScanGrid,
    pub jacobi: JacobiBinning,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, InputError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| InputError(format!("config {}: {e}", path.display())))
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_keep_defaults() {
        let c: RunConfig = toml::from_str("[analysis]\nwindow_ps = 2000\n[scan]\nalpha_n = 3\n").unwrap();
        assert_eq!(c.analysis.window_ps, 2000);
        assert_eq!(c.analysis.period_ps, 12_150);
        assert_eq!(c.scan.alpha_n, 3);
        assert_eq!(c.scan.r_n, 501);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[analysis]\nwindow = 2000\n").is_err());
        assert!(toml::from_str::<RunConfig>("[plot]\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.source.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn grid_points() {
        let g = ScanGrid { alpha_n: 1, r_n: 1, theta_n: 1, ..Default::default() };
        assert_eq!(g.rows(), 1);
        assert_eq!((g.alpha(0), g.r(0), g.theta(0)), (1.0, 0.0, 0.0));
        let g = ScanGrid::default();
        assert_eq!(g.rows(), 1000 * 501 * 21);
        assert_eq!(g.alpha(999), 1.0);
        assert_eq!(g.r(500), 1.0);
        assert_eq!(g.theta(20), std::f64::consts::PI);
        assert!(ScanGrid { r_n: 0, ..Default::default() }.validate().is_err());
    }
}
