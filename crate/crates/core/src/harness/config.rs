//! TOML experiment configuration.
//!
//! ```toml
//! [field]
//! kind = "rf"              # "rf" (Gaussian rectified flow) | "vp" (cosine probability flow)
//! sigma = 1.0
//! means = { src = [2.0, 0.0], tgt = [-2.0, 0.0] }
//! windows = 4              # straightening windows; must divide grid.n_steps
//! straighten = true
//! hook_scale = 0.4         # auxiliary structural hook, 0 disables
//! alpha_bar_min = 1e-4     # vp only
//!
//! [grid]
//! n_steps = 4
//! k_start = 4
//!
//! [method]
//! inversion = "perrfi"     # "perrfi" | "ddim" | "both" (reconstruct only)
//! strategy = "ili"         # "nli" | "nsli" | "ili"
//! nsli_schedule = "linear" # "linear" | "cosine"
//! guidance = "dpg"         # "none" | "pg" | "dpg"
//! w = 2.5
//! alpha = 0.4
//! mask = true
//! mask_mode = "per-step"   # "per-step" | "fixed"
//!
//! [run]
//! seed = 0                 # required here or via --seed
//! samples = 100
//! source = "src"
//! target = "tgt"
//!
//! [metrics]
//! consistency = "all"      # "all" | "unedited"
//!
//! [sweep]
//! param = "w"              # "w" | "alpha" | "s" | "n_steps"
//! values = [2.0, 2.5, 3.0]
//!
//! [output]
//! dir = "out"
//! format = "csv"           # "csv" | "json"
//! svg = false
//! ```
//!
//! Every section and key is optional except the seed; unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::editing::{GuidanceConfig, GuidanceMode, MaskMode, RegenStrategy};
use crate::fields::{CosineSchedule, GaussianModel, Schedule};
use crate::flow::TimeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Rf,
    Vp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inversion {
    Perrfi,
    Ddim,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Nli,
    Nsli,
    Ili,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSchedule {
    Linear,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyRegion {
    /// Whole latent.
    All,
    /// Coordinates where the source and target means agree.
    Unedited,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    W,
    Alpha,
    S,
    NSteps,
}

impl SweepParam {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParam::W => "w",
            SweepParam::Alpha => "alpha",
            SweepParam::S => "s",
            SweepParam::NSteps => "n_steps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub sigma: f64,
    pub means: BTreeMap<String, Vec<f64>>,
    pub windows: usize,
    pub straighten: bool,
    pub hook_scale: f64,
    pub alpha_bar_min: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        let means = BTreeMap::from([
            ("src".to_string(), vec![2.0, 0.0]),
            ("tgt".to_string(), vec![-2.0, 0.0]),
        ]);
        Self {
            kind: FieldKind::Rf,
            sigma: 1.0,
            means,
            windows: 4,
            straighten: true,
            hook_scale: 0.4,
            alpha_bar_min: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_steps: usize,
    pub k_start: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_steps: 4, k_start: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    pub inversion: Inversion,
    pub strategy: StrategyKind,
    pub nsli_schedule: NoiseSchedule,
    pub guidance: GuidanceMode,
    pub w: f64,
    pub alpha: f64,
    pub mask: bool,
    pub mask_mode: MaskMode,
}

impl Default for MethodSpec {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        Self {
            inversion: Inversion::Perrfi,
            strategy: StrategyKind::Ili,
            nsli_schedule: NoiseSchedule::Linear,
            guidance: g.mode,
            w: g.scale,
            alpha: g.threshold,
            mask: g.mask_enabled,
            mask_mode: g.mask_mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub seed: Option<u64>,
    pub samples: usize,
    pub source: String,
    pub target: String,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: None,
            samples: 100,
            source: "src".into(),
            target: "tgt".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSpec {
    pub consistency: ConsistencyRegion,
    /// PSNR peak; the model's default when absent.
    pub peak: Option<f64>,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            consistency: ConsistencyRegion::All,
            peak: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            param: SweepParam::W,
            values: vec![2.0, 2.5, 3.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub svg: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            svg: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldSpec,
    pub grid: GridSpec,
    pub method: MethodSpec,
    pub run: RunSpec,
    pub metrics: MetricsSpec,
    pub sweep: SweepSpec,
    pub output: OutputSpec,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = Self::default();
        cfg.run.seed = Some(seed);
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn seed(&self) -> Result<u64, HarnessError> {
        self.run
            .seed
            .ok_or_else(|| config_err("run.seed is required (set it in the config or pass --seed)"))
    }

    pub fn model(&self) -> Result<GaussianModel, HarnessError> {
        GaussianModel::new(self.field.means.clone(), self.field.sigma).map_err(|e| config_err(e.to_string()))
    }

    pub fn schedule(&self) -> Result<CosineSchedule, HarnessError> {
        CosineSchedule::new(self.field.alpha_bar_min).map_err(|e| config_err(e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid, HarnessError> {
        TimeGrid::uniform(self.grid.n_steps, 0.0, 1.0, self.field.windows).map_err(|e| config_err(e.to_string()))
    }

    pub fn guidance(&self) -> GuidanceConfig {
        GuidanceConfig {
            mode: self.method.guidance,
            scale: self.method.w,
            mask_enabled: self.method.mask,
            threshold: self.method.alpha,
            mask_mode: self.method.mask_mode,
        }
    }

    /// Regeneration strategy; `nsli_seed` seeds the anchor noise.
    pub fn strategy(&self, nsli_seed: u64) -> RegenStrategy {
        match self.method.strategy {
            StrategyKind::Nli => RegenStrategy::Nli,
            StrategyKind::Ili => RegenStrategy::Ili,
            StrategyKind::Nsli => RegenStrategy::Nsli {
                schedule: match self.method.nsli_schedule {
                    NoiseSchedule::Linear => Schedule::Linear,
                    NoiseSchedule::Cosine => {
                        Schedule::Cosine(CosineSchedule::new(self.field.alpha_bar_min).unwrap_or_default())
                    }
                },
                seed: nsli_seed,
            },
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.seed()?;
        let model = self.model()?;
        for id in [&self.run.source, &self.run.target] {
            if !model.means().contains_key(id.as_str()) {
                return Err(config_err(format!("condition `{id}` is not one of the field means")));
            }
        }
        if self.field.kind == FieldKind::Vp {
            self.schedule()?;
        }
        if !(self.field.hook_scale.is_finite() && self.field.hook_scale >= 0.0) {
            return Err(config_err("field.hook_scale must be finite and non-negative"));
        }
        self.grid()?;
        if self.grid.k_start == 0 || self.grid.k_start > self.grid.n_steps {
            return Err(config_err(format!(
                "grid.k_start must lie in 1..={} (got {})",
                self.grid.n_steps, self.grid.k_start
            )));
        }
        if self.method.inversion != Inversion::Perrfi && self.field.kind != FieldKind::Vp {
            return Err(config_err(
                "DDIM inversion needs a noise-prediction field (field.kind = \"vp\")",
            ));
        }
        self.guidance().validate().map_err(|e| config_err(e.to_string()))?;
        if let Some(peak) = self.metrics.peak {
            if !(peak.is_finite() && peak > 0.0) {
                return Err(config_err("metrics.peak must be positive"));
            }
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(config_err("sweep.values must be finite"));
        }
        Ok(())
    }
}
