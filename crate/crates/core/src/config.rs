//! Run configuration, loadable from JSON with every field optional.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::cauchy::QuadratureConfig;
use crate::tract::TractSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    /// Required lower bound for `|F'|` on the tracts.
    pub k_target: f64,
    /// Radius `R` of the half-plane `Re w > R` and of the disc `|z| <= e^R`.
    pub r_log: f64,
    /// Largest admissible `|s_n|` in external addresses.
    pub symbol_bound: i64,
    /// Budget for the search over `log(1/lambda)`.
    pub max_doublings: u32,
    /// Number of tract points on which `|F'|` is verified.
    pub tract_grid: usize,
    /// Number of random disc samples for the containment check.
    pub disc_samples: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            k_target: 2.0,
            r_log: 16.0,
            symbol_bound: 8,
            max_doublings: 1100,
            tract_grid: 1000,
            disc_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HairConfig {
    /// Real part of the base ray; `0` means `2 r_log`.
    pub x_base: f64,
    /// Largest base-ray parameter.
    pub max_param: f64,
    /// Bisection steps per marker crossing.
    pub marker_iterations: usize,
    /// Number of samples of a traced hair.
    pub samples: usize,
}

impl Default for HairConfig {
    fn default() -> Self {
        HairConfig {
            x_base: 0.0,
            max_param: 1e300,
            marker_iterations: 60,
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub tract: TractSpec,
    pub quadrature: QuadratureConfig,
    pub dynamics: DynamicsConfig,
    pub hair: HairConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn x_base(&self) -> f64 {
        if self.hair.x_base > 0.0 {
            self.hair.x_base
        } else {
            2.0 * self.dynamics.r_log
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c = Config::from_json(r#"{"dynamics": {"r_log": 20.0}, "quadrature": {"kappa": 0.04}}"#).unwrap();
        assert_eq!(c.dynamics.r_log, 20.0);
        assert_eq!(c.dynamics.k_target, 2.0);
        assert_eq!(c.quadrature.kappa, 0.04);
        assert_eq!(c.tract, TractSpec::default());
        assert_eq!(c.x_base(), 40.0);
    }

    #[test]
    fn roundtrip() {
        let c = Config::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&s).unwrap(), c);
    }
}
