//! Surface documents passed between commands.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spun4d::approx::PerturbationSpec;
use spun4d::catalog::KnotArc;
use spun4d::surface::{Jet, Parametrization, PolyMap4, Surface4, Topology};
use spun4d::{Error, Interval, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Expr(Surface4),
    Poly(PolyMap4),
}

/// A surface plus where it came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceDoc {
    /// Short description, e.g. `spin trefoil_spun`.
    pub label: String,
    #[serde(default)]
    pub arc: Option<KnotArc>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    pub shape: Shape,
}

impl SurfaceDoc {
    pub fn load(path: &Path) -> Result<SurfaceDoc> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }

    /// Full-precision JSON; later commands read it back bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl Parametrization for SurfaceDoc {
    fn t_domain(&self) -> Interval {
        match &self.shape {
            Shape::Expr(s) => s.t_domain(),
            Shape::Poly(p) => p.t_domain(),
        }
    }
    fn theta_domain(&self) -> Interval {
        match &self.shape {
            Shape::Expr(s) => s.theta_domain(),
            Shape::Poly(p) => p.theta_domain(),
        }
    }
    fn topology(&self) -> Topology {
        match &self.shape {
            Shape::Expr(s) => s.topology(),
            Shape::Poly(p) => p.topology(),
        }
    }
    fn eval(&self, t: f64, th: f64) -> [f64; 4] {
        match &self.shape {
            Shape::Expr(s) => s.eval(t, th),
            Shape::Poly(p) => p.eval(t, th),
        }
    }
    fn jet(&self, t: f64, th: f64) -> Jet {
        match &self.shape {
            Shape::Expr(s) => s.jet(t, th),
            Shape::Poly(p) => p.jet(t, th),
        }
    }
}
