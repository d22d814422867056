//! Default tolerances and grid sizes, overridable from `spun4d.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Every tunable number used by the pipeline.
///
/// Missing keys in a config file fall back to the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root isolation tolerance.
    pub root_tol: f64,
    /// Chebyshev degree for cos/sin replacement.
    pub cheb_degree: usize,
    /// Bump replacement degree; `None` keeps the exact bump.
    pub bump_degree: Option<usize>,
    /// Minimum `σ2/σ1` accepted by the rank scan.
    pub rank_tol: f64,
    /// Grid used by the rank and injectivity scans.
    pub verify_grid: (usize, usize),
    /// Image distance below which two samples collide.
    pub image_tol: f64,
    /// `param_sep` as a multiple of the grid cell diagonal.
    pub param_sep_factor: f64,
    /// Collisions kept in a report (the total is always counted).
    pub max_collisions: usize,
    /// Grid for locating pairs with equal `(x, y)` images.
    pub coincidence_grid: (usize, usize),
    /// Perturbation exponent is `2N + 1`.
    pub half_degree: u32,
    /// Members `u` of the perturbation family that are checked.
    pub family_samples: Vec<f64>,
    /// Grid for sampling, meshing and slicing.
    pub export_grid: (usize, usize),
    /// Bernstein fitting degree.
    pub bernstein_degree: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            root_tol: 1e-12,
            cheb_degree: 8,
            bump_degree: None,
            rank_tol: 1e-6,
            verify_grid: (400, 400),
            image_tol: 1e-3,
            param_sep_factor: 4.0,
            max_collisions: 10_000,
            coincidence_grid: (128, 128),
            half_degree: 2,
            family_samples: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            export_grid: (200, 200),
            bernstein_degree: 20,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `spun4d.json` in `dir` if present, defaults otherwise.
    pub fn discover(dir: &Path) -> Result<Config> {
        let p = dir.join("spun4d.json");
        if p.exists() {
            Config::load(&p)
        } else {
            Ok(Config::default())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_keep_defaults() {
        let c: Config = serde_json::from_str(r#"{"image_tol": 0.01}"#).unwrap();
        assert_eq!(c.image_tol, 0.01);
        assert_eq!(c.rank_tol, Config::default().rank_tol);
        assert!(serde_json::from_str::<Config>(r#"{"imagetol": 1}"#).is_err());
    }
}
