//! JSON run configuration. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{Centering, EnsembleSpec, IndexTerm, Variant, MIN_CENTERING_MC};
use crate::error::{Result, SpectralError};
use crate::fractional_noise::{HurstParameter, TimeGrid};
use crate::laws::LawId;
use crate::pathwise_sde::{InitialLaw, InitialLaw2D, Preset};
use crate::stieltjes::{ComplexGrid, FixedPointConfig};

fn cfg_err(msg: impl Into<String>) -> SpectralError {
    SpectralError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringMode {
    /// Exact when the preset has a closed-form mean, estimated otherwise.
    #[default]
    Auto,
    Estimate,
    None,
}

fn default_preset() -> Preset {
    Preset::Fbm
}

fn default_centering_mc() -> usize {
    MIN_CENTERING_MC
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub variant: Variant,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_set: Option<Vec<IndexTerm>>,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default)]
    pub x0: InitialLaw,
    #[serde(default)]
    pub z0: InitialLaw2D,
    #[serde(default)]
    pub centering: CenteringMode,
    #[serde(default = "default_centering_mc")]
    pub centering_mc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentConfig {
    /// Replicas for `auto` law parameters when no closed form exists.
    pub n_mc: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self { n_mc: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZGridConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub n_e: usize,
    pub etas: Vec<f64>,
}

impl Default for ZGridConfig {
    fn default() -> Self {
        Self {
            e_min: -3.0,
            e_max: 3.0,
            n_e: 61,
            etas: vec![0.5],
        }
    }
}

impl ZGridConfig {
    pub fn to_grid(&self) -> Result<ComplexGrid> {
        ComplexGrid::new(self.e_min, self.e_max, self.n_e, self.etas.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderConfig {
    pub epsilon: f64,
    pub paths: usize,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            paths: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    pub stieltjes: bool,
    pub pde_checks: bool,
    pub holder_diag: bool,
    pub fixedpoint: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub hurst: f64,
    pub grid: GridConfig,
    /// Output times (grid nodes); defaults to every node after 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub laws: Vec<String>,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub moments: MomentConfig,
    #[serde(default)]
    pub z_grid: ZGridConfig,
    #[serde(default)]
    pub fixedpoint: FixedPointConfig,
    #[serde(default)]
    pub holder: HolderConfig,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// A validated configuration with its derived objects.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub hurst: HurstParameter,
    pub grid: TimeGrid,
    pub nodes: Vec<usize>,
    pub laws: Vec<LawId>,
    pub spec: EnsembleSpec,
    pub z_grid: ComplexGrid,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(format!("invalid config: {e}")))
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let hurst = HurstParameter::new(self.hurst).map_err(|e| cfg_err(e.to_string()))?;
        let grid = TimeGrid::new(self.grid.t_end, self.grid.steps).map_err(|e| cfg_err(e.to_string()))?;
        let nodes: Vec<usize> = match &self.output_times {
            None => (1..grid.len()).collect(),
            Some(ts) => ts
                .iter()
                .map(|&t| {
                    grid.index_of(t)
                        .ok_or_else(|| cfg_err(format!("output time {t} is not a grid node")))
                })
                .collect::<Result<_>>()?,
        };
        if nodes.is_empty() {
            return Err(cfg_err("no output times"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg_err("output times must increase strictly"));
        }
        let laws = self
            .laws
            .iter()
            .map(|s| s.parse::<LawId>())
            .collect::<Result<Vec<_>>>()?;
        if self.replicas == 0 {
            return Err(cfg_err("replicas must be at least 1"));
        }
        if self.moments.n_mc < 2 {
            return Err(cfg_err("moments.n_mc must be at least 2"));
        }
        if !(self.holder.epsilon > 0.0 && self.holder.epsilon < hurst.value()) {
            return Err(cfg_err("holder.epsilon must lie in (0, H)"));
        }
        let z_grid = self.z_grid.to_grid()?;

        let e = &self.ensemble;
        let mut spec = EnsembleSpec::new(e.variant, e.n, grid, hurst, self.seed)
            .with_x0(e.x0)
            .with_z0(e.z0)
            .with_preset(&e.preset);
        if let Some(p) = e.p {
            spec = spec.with_p(p);
        } else if e.variant.is_wishart() {
            return Err(cfg_err("Wishart variants need `p`"));
        }
        if let Some(terms) = &e.index_set {
            spec = spec.with_index_set(terms.clone());
        } else if e.variant == Variant::Dependent {
            return Err(cfg_err("the dependent variant needs `index_set`"));
        }
        spec = match e.centering {
            CenteringMode::Auto => spec,
            CenteringMode::Estimate => spec.with_centering(Centering::Estimate { n_mc: e.centering_mc }),
            CenteringMode::None => spec.with_centering(Centering::None),
        };
        if let Centering::Estimate { .. } = spec.centering {
            spec = spec.with_centering(Centering::Estimate { n_mc: e.centering_mc });
        }
        spec.validate()?;

        if self.toggles.fixedpoint && e.variant != Variant::Dependent {
            return Err(cfg_err("the fixedpoint toggle needs the dependent variant"));
        }
        if self.toggles.pde_checks {
            if nodes.len() < 3 {
                return Err(cfg_err("pde_checks need at least 3 output times"));
            }
            let step = nodes[1] - nodes[0];
            if nodes.windows(2).any(|w| w[1] - w[0] != step) {
                return Err(cfg_err("pde_checks need uniformly spaced output times"));
            }
        }
        Ok(ResolvedRun {
            config: self.clone(),
            hurst,
            grid,
            nodes,
            laws,
            spec,
            z_grid,
        })
    }
}
