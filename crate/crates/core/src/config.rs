//! Pipeline configuration. Precedence: CLI flag > config file > default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionParams;
use crate::binder::DEFAULT_AD_IOU_THRESHOLD;
use crate::error::{Error, Result};
use crate::inventory::RegistrationParams;
use crate::model::Flavor;
use crate::segmentation::SegmentationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlavorSelection {
    Typed,
    TypedGapfill,
    OrganicHybrid,
    #[default]
    All,
}

impl FlavorSelection {
    pub fn flavors(self) -> Vec<Flavor> {
        match self {
            FlavorSelection::Typed => vec![Flavor::Typed],
            FlavorSelection::TypedGapfill => vec![Flavor::TypedGapfill],
            FlavorSelection::OrganicHybrid => vec![Flavor::OrganicHybrid],
            FlavorSelection::All => Flavor::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmentation: SegmentationParams,
    pub attribution: AttributionParams,
    pub registration: RegistrationParams,
    pub ad_iou_threshold: f64,
    pub flavor: FlavorSelection,
    /// Rules file; the bundled rules when absent.
    pub rules: Option<PathBuf>,
    /// Worker count. Not part of the provenance block: it never changes
    /// outputs.
    #[serde(skip_serializing)]
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            attribution: AttributionParams::default(),
            registration: RegistrationParams::default(),
            ad_iou_threshold: DEFAULT_AD_IOU_THRESHOLD,
            flavor: FlavorSelection::All,
            rules: None,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
