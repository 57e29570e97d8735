use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use foa_core::dataset::{validate_split_ratios, DEFAULT_SPLIT_RATIOS};
use foa_core::encoder::DEFAULT_GAIN_CAP_DB;
use foa_core::metrics::LossWeights;
use foa_core::pipeline::{BaselineParams, DEFAULT_GRID_DEGREE};
use foa_core::scene::{ArrayGeometry, SceneConfig};
use foa_core::tf::StftConfig;

/// Everything a run needs. Loaded from `--config`, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenes: usize,
    /// `tetra`, `irregular` or a path to an array JSON file.
    pub array: String,
    pub corpus: Option<PathBuf>,
    pub split_ratios: [f64; 3],
    pub scene: SceneConfig,
    pub stft: StftConfig,
    pub loss_weights: LossWeights,
    pub gain_cap_db: f64,
    pub grid_degree: usize,
    pub diffuse_eq: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            scenes: 10_000,
            array: "tetra".into(),
            corpus: None,
            split_ratios: DEFAULT_SPLIT_RATIOS,
            scene: SceneConfig::default(),
            stft: StftConfig::default(),
            loss_weights: LossWeights::published(),
            gain_cap_db: DEFAULT_GAIN_CAP_DB,
            grid_degree: DEFAULT_GRID_DEGREE,
            diffuse_eq: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.stft.validate()?;
        if self.stft.sample_rate != self.scene.sample_rate {
            bail!(
                "stft.sample_rate {} differs from scene.sample_rate {}",
                self.stft.sample_rate,
                self.scene.sample_rate
            );
        }
        validate_split_ratios(self.split_ratios)?;
        self.loss_weights.validate()?;
        if !(self.gain_cap_db > 0.0 && self.gain_cap_db.is_finite()) {
            bail!("gain_cap_db must be positive, got {}", self.gain_cap_db);
        }
        self.array_geometry()?;
        Ok(())
    }

    pub fn array_geometry(&self) -> Result<ArrayGeometry> {
        parse_array(&self.array)
    }

    pub fn baseline_params(&self) -> BaselineParams {
        BaselineParams {
            sh: self.scene.sh,
            stft: self.stft,
            speed_of_sound: self.scene.speed_of_sound,
            gain_cap_db: self.gain_cap_db,
            grid_degree: self.grid_degree,
            diffuse_eq: self.diffuse_eq,
        }
    }
}

pub fn parse_array(spec: &str) -> Result<ArrayGeometry> {
    match spec {
        "tetra" => Ok(ArrayGeometry::tetra()),
        "irregular" => Ok(ArrayGeometry::irregular()),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("`{path}` is neither tetra, irregular nor a readable array file"))?;
            Ok(ArrayGeometry::from_json(&text).with_context(|| format!("parsing array file {path}"))?)
        }
    }
}
