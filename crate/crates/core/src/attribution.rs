//! Click and fixation attribution against typed AOIs.
//!
//! Clicks need X *and* Y containment in a main-axis box. When no box
//! strictly contains a click, a small tolerance pass catches link-padding
//! clicks just outside a box edge. Fixations use strict containment only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{final_click, AdRect, ClickEvent, Etype, FixationEvent, Rect, TrialMeta, TypedAoi};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionParams {
    /// Horizontal tolerance of the fallback pass, px.
    pub tolerance_x: f64,
    /// Vertical tolerance of the fallback pass, px.
    pub tolerance_y: f64,
    /// A final click farther than this outside the screenshot is pathological.
    pub pathological_margin: f64,
}

impl Default for AttributionParams {
    fn default() -> Self {
        Self { tolerance_x: 5.0, tolerance_y: 10.0, pathological_margin: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    Strict,
    Tolerance,
    Miss,
}

/// Outcome of attributing one point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointAttribution {
    pub aoi_id: Option<String>,
    pub mode: AttributionMode,
}

impl PointAttribution {
    fn miss() -> Self {
        Self { aoi_id: None, mode: AttributionMode::Miss }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub click: ClickEvent,
    pub aoi_id: Option<String>,
    pub mode: AttributionMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickReason {
    Attributed,
    DdRight,
    ChromeOrFar,
    NoClick,
}

impl ClickReason {
    pub const ALL: [ClickReason; 4] =
        [ClickReason::Attributed, ClickReason::DdRight, ClickReason::ChromeOrFar, ClickReason::NoClick];

    pub fn as_str(self) -> &'static str {
        match self {
            ClickReason::Attributed => "attributed",
            ClickReason::DdRight => "dd_right",
            ClickReason::ChromeOrFar => "chrome_or_far",
            ClickReason::NoClick => "no_click",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialClickStatus {
    pub main_axis: bool,
    pub reason: ClickReason,
    /// Present when the final click was attributed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aoi_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AttributionMode>,
}

impl TrialClickStatus {
    fn flagged(reason: ClickReason) -> Self {
        Self { main_axis: false, reason, aoi_id: None, mode: None }
    }
}

fn check_disjoint(aois: &[TypedAoi]) -> Result<()> {
    for (i, a) in aois.iter().enumerate() {
        for b in &aois[i + 1..] {
            if a.rect().overlaps(&b.rect()) {
                return Err(Error::OverlappingAois { a: a.aoi_id.clone(), b: b.aoi_id.clone() });
            }
        }
    }
    Ok(())
}

fn within_tolerance(r: &Rect, x: f64, y: f64, params: &AttributionParams) -> Option<f64> {
    let (dx, dy) = r.axis_distance(x, y);
    (dx <= params.tolerance_x && dy <= params.tolerance_y).then(|| dx.hypot(dy))
}

/// Attributes a point to one of a trial's main-axis AOIs.
///
/// The strict pass takes the box containing the point. Otherwise every box
/// within the X/Y tolerance is a candidate; the closest box wins, then the
/// lowest position.
pub fn attribute_point(aois: &[TypedAoi], x: f64, y: f64, params: &AttributionParams) -> Result<PointAttribution> {
    check_disjoint(aois)?;
    Ok(attribute_point_unchecked(aois, x, y, params))
}

fn attribute_point_unchecked(aois: &[TypedAoi], x: f64, y: f64, params: &AttributionParams) -> PointAttribution {
    if !x.is_finite() || !y.is_finite() {
        return PointAttribution::miss();
    }
    if let Some(a) = aois.iter().find(|a| a.rect().contains_point(x, y)) {
        return PointAttribution { aoi_id: Some(a.aoi_id.clone()), mode: AttributionMode::Strict };
    }
    aois.iter()
        .filter_map(|a| within_tolerance(&a.rect(), x, y, params).map(|d| (d, a)))
        .min_by(|(da, a), (db, b)| da.total_cmp(db).then(a.position.cmp(&b.position)))
        .map(|(_, a)| PointAttribution { aoi_id: Some(a.aoi_id.clone()), mode: AttributionMode::Tolerance })
        .unwrap_or_else(PointAttribution::miss)
}

fn main_axis(aois: &[TypedAoi]) -> Vec<TypedAoi> {
    aois.iter().filter(|a| a.is_main_axis()).cloned().collect()
}

/// Attributes every click event against the main-axis subset of `aois`.
pub fn attribute_clicks(aois: &[TypedAoi], clicks: &[ClickEvent], params: &AttributionParams) -> Result<Vec<AttributionResult>> {
    let main = main_axis(aois);
    check_disjoint(&main)?;
    Ok(clicks
        .iter()
        .map(|c| {
            let p = attribute_point_unchecked(&main, c.x, c.y, params);
            AttributionResult { click: *c, aoi_id: p.aoi_id, mode: p.mode }
        })
        .collect())
}

fn pathological(c: &ClickEvent, meta: &TrialMeta, params: &AttributionParams) -> bool {
    !c.is_finite()
        || c.x < 0.0
        || c.y < 0.0
        || c.x > meta.screenshot_width as f64 + params.pathological_margin
        || c.y > meta.screenshot_height as f64 + params.pathological_margin
}

/// Trial-level filter: does the final click land on the main axis?
pub fn is_main_axis_click(
    aois: &[TypedAoi],
    clicks: &[ClickEvent],
    ad_rects: &[AdRect],
    meta: &TrialMeta,
    params: &AttributionParams,
) -> Result<TrialClickStatus> {
    let Some(click) = final_click(clicks) else {
        return Ok(TrialClickStatus::flagged(ClickReason::NoClick));
    };
    if pathological(click, meta, params) {
        return Ok(TrialClickStatus::flagged(ClickReason::NoClick));
    }
    let main = main_axis(aois);
    let hit = attribute_point(&main, click.x, click.y, params)?;
    if hit.aoi_id.is_some() {
        return Ok(TrialClickStatus {
            main_axis: true,
            reason: ClickReason::Attributed,
            aoi_id: hit.aoi_id,
            mode: Some(hit.mode),
        });
    }
    let on_rail = ad_rects
        .iter()
        .filter(|a| a.etype == Etype::DdRight)
        .any(|a| within_tolerance(&a.rect(), click.x, click.y, params).is_some());
    Ok(TrialClickStatus::flagged(if on_rail { ClickReason::DdRight } else { ClickReason::ChromeOrFar }))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationAssignment {
    /// Aligned with the input fixations.
    pub per_fixation: Vec<Option<String>>,
    /// Fixation indices per AOI, ordered by fixation start.
    pub per_aoi: BTreeMap<String, Vec<usize>>,
}

/// Assigns each fixation to the AOI strictly containing it, if any.
pub fn assign_fixations(aois: &[TypedAoi], fixations: &[FixationEvent]) -> FixationAssignment {
    let per_fixation: Vec<Option<String>> = fixations
        .iter()
        .map(|f| aois.iter().find(|a| a.rect().contains_point(f.x, f.y)).map(|a| a.aoi_id.clone()))
        .collect();
    let mut order: Vec<usize> = (0..fixations.len()).collect();
    order.sort_by_key(|&i| (fixations[i].start, i));
    let mut per_aoi: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in order {
        if let Some(id) = &per_fixation[i] {
            per_aoi.entry(id.clone()).or_default().push(i);
        }
    }
    FixationAssignment { per_fixation, per_aoi }
}

/// The assigned-AOI sequence in fixation start order.
pub fn fixation_sequence<'a>(fixations: &[FixationEvent], assignment: &'a FixationAssignment) -> Vec<Option<&'a str>> {
    let mut order: Vec<usize> = (0..fixations.len()).collect();
    order.sort_by_key(|&i| (fixations[i].start, i));
    order.into_iter().map(|i| assignment.per_fixation[i].as_deref()).collect()
}

/// Re-entry flags for every fixated AOI.
///
/// Unassigned fixations are skipped, consecutive fixations on the same AOI
/// collapse into one visit, and an AOI is regressive when it has two or
/// more visits (which implies a visit elsewhere in between).
pub fn regression_flags(sequence: &[Option<&str>]) -> BTreeMap<String, bool> {
    let mut visits: BTreeMap<String, usize> = BTreeMap::new();
    let mut prev: Option<&str> = None;
    for id in sequence.iter().flatten() {
        if prev != Some(id) {
            *visits.entry(id.to_string()).or_default() += 1;
            prev = Some(id);
        }
    }
    visits.into_iter().map(|(k, n)| (k, n >= 2)).collect()
}

/// An AOI is above the fold when it shares a row with the initial viewport.
pub fn above_fold(aois: &[TypedAoi], meta: &TrialMeta) -> Vec<bool> {
    let fold = meta.viewport_height as i64;
    aois.iter().map(|a| a.y0() < fold && a.y1() > 0).collect()
}
