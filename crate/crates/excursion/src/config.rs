//! Experiment configuration, read from TOML.
//!
//! ```toml
//! mode = "validate"
//! alpha = 0.0
//!
//! [model]
//! family = "squared_exponential_isotropic"
//! sigma2 = 1.0
//! ell = 1.0
//! dim = 2
//!
//! [window]
//! kind = "cube"
//! side = 8.0
//!
//! [grid]
//! n = 512
//! h = 0.125
//! window_points = 65
//!
//! [mc]
//! replications = 200
//! seed = 1
//! ```

use std::path::Path;

use excursion_core::zonotope::MAX_GENERATORS;
use excursion_core::{CovarianceModel, Zonotope};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Predict,
    Simulate,
    Validate,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SquaredExponentialIsotropic,
    SquaredExponentialAnisotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    /// Shape matrix, row-major.
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Ambient dimension; required when nothing else fixes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Zonotope,
    Cube,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub kind: WindowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub alpha: f64,
    pub model: ModelConfig,
    pub window: WindowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

/// Observation window resolved against the model dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Zonotope(Zonotope),
    Cube { dim: usize, side: f64 },
    Ball { dim: usize, radius: f64 },
}

/// Grid geometry for simulation, with the counting sub-box size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPlan {
    pub n: usize,
    pub h: f64,
    pub window_points: usize,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.model()?;
        config.window()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Dimension fixed by the model, the window, or the explicit `model.dim`.
    pub fn dim(&self) -> Result<usize, ConfigError> {
        let mut candidates: Vec<(&str, usize)> = Vec::new();
        if let Some(d) = self.model.dim {
            candidates.push(("model.dim", d));
        }
        if let Some(a) = &self.model.a {
            let d = (a.len() as f64).sqrt().round() as usize;
            if d * d != a.len() {
                return Err(invalid(format!("model.A has {} entries, not a square matrix", a.len())));
            }
            candidates.push(("model.A", d));
        }
        if let Some(g) = self.window.generators.as_ref().and_then(|g| g.first()) {
            candidates.push(("window.generators", g.len()));
        }
        let Some(&(_, d)) = candidates.first() else {
            return Err(invalid("cannot determine the dimension; set model.dim"));
        };
        if let Some((name, other)) = candidates.iter().find(|(_, e)| *e != d) {
            return Err(invalid(format!("{name} implies dimension {other}, but {} implies {d}", candidates[0].0)));
        }
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(d)
    }

    pub fn model(&self) -> Result<CovarianceModel, ConfigError> {
        let d = self.dim()?;
        let m = &self.model;
        let model = match m.family {
            Family::SquaredExponentialIsotropic => {
                if m.a.is_some() {
                    return Err(invalid("model.A is not used by the isotropic family"));
                }
                let ell = m.ell.ok_or_else(|| invalid("model.ell is required for the isotropic family"))?;
                CovarianceModel::isotropic(d, m.sigma2, ell)
            }
            Family::SquaredExponentialAnisotropic => {
                if m.ell.is_some() {
                    return Err(invalid("model.ell is not used by the anisotropic family; give model.A"));
                }
                let a = m.a.as_ref().ok_or_else(|| invalid("model.A is required for the anisotropic family"))?;
                CovarianceModel::anisotropic(m.sigma2, DMatrix::from_row_slice(d, d, a))
            }
        };
        model.map_err(|e| invalid(e.to_string()))
    }

    pub fn window(&self) -> Result<Window, ConfigError> {
        let d = self.dim()?;
        let w = &self.window;
        let extra = |present: bool, key: &str| {
            if present {
                Err(invalid(format!("window.{key} does not apply to a {:?} window", w.kind)))
            } else {
                Ok(())
            }
        };
        match w.kind {
            WindowKind::Zonotope => {
                extra(w.side.is_some(), "side")?;
                extra(w.radius.is_some(), "radius")?;
                let gens = w.generators.as_ref().ok_or_else(|| invalid("window.generators is required"))?;
                if gens.is_empty() {
                    return Err(invalid("a zonotope window needs at least one generator"));
                }
                if gens.len() > MAX_GENERATORS {
                    return Err(invalid(format!("{} generators exceed the limit of {MAX_GENERATORS}", gens.len())));
                }
                let gens = gens
                    .iter()
                    .map(|g| {
                        if g.len() == d {
                            Ok(DVector::from_vec(g.clone()))
                        } else {
                            Err(invalid(format!("generator of length {} in dimension {d}", g.len())))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Window::Zonotope(Zonotope::new(gens).map_err(|e| invalid(e.to_string()))?))
            }
            WindowKind::Cube => {
                extra(w.generators.is_some(), "generators")?;
                extra(w.radius.is_some(), "radius")?;
                let side = w.side.ok_or_else(|| invalid("window.side is required"))?;
                if !(side > 0.0 && side.is_finite()) {
                    return Err(invalid("window.side must be positive"));
                }
                Ok(Window::Cube { dim: d, side })
            }
            WindowKind::Ball => {
                extra(w.generators.is_some(), "generators")?;
                extra(w.side.is_some(), "side")?;
                let radius = w.radius.ok_or_else(|| invalid("window.radius is required"))?;
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("window.radius must be positive"));
                }
                Ok(Window::Ball { dim: d, radius })
            }
        }
    }

    pub fn mc(&self) -> Result<&McConfig, ConfigError> {
        self.mc.as_ref().ok_or_else(|| invalid("the [mc] table is required"))
    }

    /// Grid geometry checked against the window and the model's longest
    /// correlation length. Warnings are returned rather than printed.
    pub fn grid_plan(&self) -> Result<(GridPlan, Vec<String>), ConfigError> {
        let grid = self.grid.as_ref().ok_or_else(|| invalid("the [grid] table is required"))?;
        let d = self.dim()?;
        if !(2..=3).contains(&d) {
            return Err(invalid(format!("simulation supports d = 2 or 3, not {d}")));
        }
        if grid.n < 8 {
            return Err(invalid("grid.n must be at least 8"));
        }
        if !(grid.h > 0.0 && grid.h.is_finite()) {
            return Err(invalid("grid.h must be positive"));
        }
        let side = match self.window()? {
            Window::Cube { side, .. } => side,
            _ => return Err(invalid("simulation windows must be cubes (window.kind = \"cube\")")),
        };
        let steps = side / grid.h;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(invalid(format!("window.side = {side} is not a multiple of grid.h = {}", grid.h)));
        }
        let derived = steps.round() as usize + 1;
        let window_points = match grid.window_points {
            Some(p) if p != derived => {
                return Err(invalid(format!(
                    "grid.window_points = {p} but window.side / grid.h + 1 = {derived}"
                )))
            }
            _ => derived,
        };
        if window_points > grid.n {
            return Err(invalid(format!("window needs {window_points} points per axis but grid.n = {}", grid.n)));
        }
        let (_, ell) = self.model()?.correlation_lengths();
        let mut warnings = Vec::new();
        if side < 4.0 * ell {
            return Err(invalid(format!("window side {side} is below 4 correlation lengths ({})", 4.0 * ell)));
        }
        if side < 8.0 * ell {
            warnings.push(format!("window side {side} is below 8 correlation lengths ({})", 8.0 * ell));
        }
        if grid.h > ell / 8.0 {
            warnings.push(format!("grid.h = {} exceeds ell/8 = {}; discretization bias grows", grid.h, ell / 8.0));
        }
        Ok((GridPlan { n: grid.n, h: grid.h, window_points }, warnings))
    }
}
