//! Per-trial results shared by every output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attribution::{
    above_fold, assign_fixations, attribute_clicks, fixation_sequence, regression_flags, AttributionParams,
    AttributionResult, TrialClickStatus,
};
use crate::binder::BindWarning;
use crate::error::Result;
use crate::inventory::{RegistrationRecord, SnippetFeatures};
use crate::model::{AdRect, ClickEvent, CursorEvent, Etype, FixationEvent, Flavor, TrialMeta, TypedAoi};
use crate::segmentation::{CardSpan, ColumnBounds};

/// Behavioral columns for one AOI under one flavor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AoiBehavior {
    pub fixated: bool,
    pub n_fixations: usize,
    pub regressive: bool,
    pub above_fold: bool,
    pub n_clicks_attributed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlavorOutput {
    pub aois: Vec<TypedAoi>,
    /// Aligned with `aois`.
    pub behavior: Vec<AoiBehavior>,
    pub click_attribution: Vec<AttributionResult>,
    /// Aligned with the trial's fixations.
    pub fixation_aoi: Vec<Option<String>>,
}

impl FlavorOutput {
    pub fn compute(
        aois: Vec<TypedAoi>,
        meta: &TrialMeta,
        fixations: &[FixationEvent],
        clicks: &[ClickEvent],
        params: &AttributionParams,
    ) -> Result<Self> {
        let assignment = assign_fixations(&aois, fixations);
        let regressive = regression_flags(&fixation_sequence(fixations, &assignment));
        let fold = above_fold(&aois, meta);
        let click_attribution = attribute_clicks(&aois, clicks, params)?;
        let mut clicks_per: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &click_attribution {
            if let Some(id) = &c.aoi_id {
                *clicks_per.entry(id.as_str()).or_default() += 1;
            }
        }
        let behavior = aois
            .iter()
            .zip(fold)
            .map(|(a, above_fold)| {
                let n_fixations = assignment.per_aoi.get(&a.aoi_id).map_or(0, Vec::len);
                AoiBehavior {
                    fixated: n_fixations > 0,
                    n_fixations,
                    regressive: regressive.get(&a.aoi_id).copied().unwrap_or(false),
                    above_fold,
                    n_clicks_attributed: clicks_per.get(a.aoi_id.as_str()).copied().unwrap_or(0),
                }
            })
            .collect();
        Ok(Self { aois, behavior, click_attribution, fixation_aoi: assignment.per_fixation })
    }

    pub fn rows(&self) -> impl Iterator<Item = (&TypedAoi, &AoiBehavior)> {
        self.aois.iter().zip(&self.behavior)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bind_warnings: Vec<BindWarning>,
    /// Labels per chain tier, index 0 = tier 1.
    pub tier_histogram: [usize; 8],
    pub n_doc_cards: usize,
    pub n_spans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentFeatureRow {
    pub aoi_id: String,
    pub position: i32,
    pub etype: Etype,
    pub features: SnippetFeatures,
}

/// Everything computed for one processed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub meta: TrialMeta,
    pub column: ColumnBounds,
    pub spans: Vec<CardSpan>,
    pub ad_rects: Vec<AdRect>,
    pub typed: FlavorOutput,
    pub typed_gapfill: FlavorOutput,
    pub organic_hybrid: FlavorOutput,
    pub click_status: TrialClickStatus,
    pub registration: Option<RegistrationRecord>,
    pub content_features: Vec<ContentFeatureRow>,
    pub diagnostics: Diagnostics,
    pub fixations: Vec<FixationEvent>,
    pub clicks: Vec<ClickEvent>,
    pub cursor: Vec<CursorEvent>,
}

impl TrialResult {
    pub fn flavor(&self, flavor: Flavor) -> &FlavorOutput {
        match flavor {
            Flavor::Typed => &self.typed,
            Flavor::TypedGapfill => &self.typed_gapfill,
            Flavor::OrganicHybrid => &self.organic_hybrid,
        }
    }
}
