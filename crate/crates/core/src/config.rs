//! Run configuration shared by every subcommand. A JSON config file mirrors
//! [`RunConfig`]; command-line flags override file values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{DEFAULT_TILE_SIZE_M, DEFAULT_TILE_SIZE_PX};
use crate::imageops::DEFAULT_DECLOUD_THRESHOLD;
use crate::model::TrainConfig;

pub const DEFAULT_RADIUS: u32 = 20;
pub const DEFAULT_CROP: u32 = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Occlusion {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Road visible, context zeroed.
    #[serde(rename = "context")]
    Context,
    /// Context visible, road zeroed.
    #[serde(rename = "road")]
    Road,
    /// Blue channel replaced by the mask.
    #[serde(rename = "channel-replace")]
    ChannelReplace,
}

impl Occlusion {
    pub const ALL: [Occlusion; 4] = [
        Occlusion::None,
        Occlusion::Context,
        Occlusion::Road,
        Occlusion::ChannelReplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Occlusion::None => "none",
            Occlusion::Context => "context",
            Occlusion::Road => "road",
            Occlusion::ChannelReplace => "channel-replace",
        }
    }

    pub fn needs_mask(self) -> bool {
        self != Occlusion::None
    }
}

impl fmt::Display for Occlusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Occlusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Occlusion::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown occlusion mode {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Geometry {
    /// Centre crop straight to the target size.
    #[default]
    #[serde(rename = "crop")]
    Crop,
    /// Centre crop to the largest multiple of the target, then box-downsize.
    #[serde(rename = "crop-downsize")]
    CropDownsize,
}

impl FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crop" => Ok(Geometry::Crop),
            "crop-downsize" => Ok(Geometry::CropDownsize),
            other => Err(Error::invalid(format!("unknown geometry {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    Uniform,
    /// `N / (C * N_c)` from the training split.
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub radius: u32,
    pub decloud_threshold: f64,
    pub crop: u32,
    pub occlusion: Occlusion,
    pub geometry: Geometry,
    pub domain: Option<String>,
    pub points_per_road: usize,
    pub tile_size_m: f64,
    pub tile_size_px: u32,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// (train, val, test) used when a manifest has no split yet.
    pub split_fractions: (f64, f64, f64),
    pub class_weighting: ClassWeighting,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            radius: DEFAULT_RADIUS,
            decloud_threshold: DEFAULT_DECLOUD_THRESHOLD,
            crop: DEFAULT_CROP,
            occlusion: Occlusion::None,
            geometry: Geometry::Crop,
            domain: None,
            points_per_road: 1,
            tile_size_m: DEFAULT_TILE_SIZE_M,
            tile_size_px: DEFAULT_TILE_SIZE_PX,
            threads: None,
            split_fractions: (0.8, 0.2, 0.0),
            class_weighting: ClassWeighting::Uniform,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop == 0 {
            return Err(Error::invalid("crop must be positive"));
        }
        if !(0.0..=255.0).contains(&self.decloud_threshold) {
            return Err(Error::invalid("decloud threshold must lie in [0, 255]"));
        }
        if self.points_per_road == 0 {
            return Err(Error::invalid("points per road must be at least 1"));
        }
        if self.tile_size_m.is_nan() || self.tile_size_m <= 0.0 || self.tile_size_px == 0 {
            return Err(Error::invalid("tile size must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        self.train.validate()
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
