//! Shared domain types: trial inputs, typed AOIs, and bundle validation.
//!
//! All geometry lives in screenshot pixel space with the origin at the top
//! left and y growing downward. Boxes are half-open: a box covers
//! `[x, x + w) × [y, y + h)`. Timestamps are integer milliseconds relative to
//! trial start.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Axis-aligned half-open pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    pub const fn from_edges(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
    }

    pub const fn x0(&self) -> i64 {
        self.x
    }
    pub const fn x1(&self) -> i64 {
        self.x + self.w
    }
    pub const fn y0(&self) -> i64 {
        self.y
    }
    pub const fn y1(&self) -> i64 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) * self.h.max(0)
    }

    /// Area of the intersection with `other` (0 when disjoint).
    pub fn intersection_area(&self, other: &Rect) -> i64 {
        let w = self.x1().min(other.x1()) - self.x0().max(other.x0());
        let h = self.y1().min(other.y1()) - self.y0().max(other.y0());
        if w <= 0 || h <= 0 {
            0
        } else {
            w * h
        }
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.intersection_area(other) > 0
    }

    /// True when the half-open Y ranges share at least one row.
    pub fn overlaps_y(&self, other: &Rect) -> bool {
        self.y0() < other.y1() && other.y0() < self.y1()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0() as f64 && x < self.x1() as f64 && y >= self.y0() as f64 && y < self.y1() as f64
    }

    /// Per-axis distance from a point to the box (0 on an axis when inside it).
    pub fn axis_distance(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = (self.x0() as f64 - x).max(x - self.x1() as f64).max(0.0);
        let dy = (self.y0() as f64 - y).max(y - self.y1() as f64).max(0.0);
        (dx, dy)
    }
}

/// Intersection over union of two boxes; 0 when the union is empty.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Element type taxonomy.
///
/// `related_searches` fills the thirteenth slot of the taxonomy; nothing
/// downstream treats it specially beyond routing it off-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Etype {
    Organic,
    DdTop,
    NativeAd,
    DdRight,
    TopPlaces,
    KnowledgePanel,
    Paa,
    ImagePack,
    TopStories,
    OtherWidget,
    UnknownWidget,
    Chrome,
    RelatedSearches,
}

impl Etype {
    pub const ALL: [Etype; 13] = [
        Etype::Organic,
        Etype::DdTop,
        Etype::NativeAd,
        Etype::DdRight,
        Etype::TopPlaces,
        Etype::KnowledgePanel,
        Etype::Paa,
        Etype::ImagePack,
        Etype::TopStories,
        Etype::OtherWidget,
        Etype::UnknownWidget,
        Etype::Chrome,
        Etype::RelatedSearches,
    ];

    pub fn is_main_axis(self) -> bool {
        !matches!(self, Etype::DdRight | Etype::Chrome | Etype::RelatedSearches)
    }

    pub fn is_ad(self) -> bool {
        matches!(self, Etype::DdTop | Etype::NativeAd | Etype::DdRight)
    }

    /// Ads that sit in the main column.
    pub fn is_main_axis_ad(self) -> bool {
        matches!(self, Etype::DdTop | Etype::NativeAd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Etype::Organic => "organic",
            Etype::DdTop => "dd_top",
            Etype::NativeAd => "native_ad",
            Etype::DdRight => "dd_right",
            Etype::TopPlaces => "top_places",
            Etype::KnowledgePanel => "knowledge_panel",
            Etype::Paa => "paa",
            Etype::ImagePack => "image_pack",
            Etype::TopStories => "top_stories",
            Etype::OtherWidget => "other_widget",
            Etype::UnknownWidget => "unknown_widget",
            Etype::Chrome => "chrome",
            Etype::RelatedSearches => "related_searches",
        }
    }
}

impl fmt::Display for Etype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown etype `{0}`")]
pub struct UnknownEtype(pub String);

impl FromStr for Etype {
    type Err = UnknownEtype;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Etype::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| UnknownEtype(s.to_string()))
    }
}

/// AOI output variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Tight boxes straight out of binding.
    Typed,
    /// Adjacent organics extended to their shared midpoint.
    TypedGapfill,
    /// Three-etype pooling over the tight boxes.
    OrganicHybrid,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::Typed, Flavor::TypedGapfill, Flavor::OrganicHybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Typed => "typed",
            Flavor::TypedGapfill => "typed_gapfill",
            Flavor::OrganicHybrid => "organic_hybrid",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoiSource {
    CvSpan,
    ShippedAd,
    Subdivision,
    GapfillExtension,
}

impl AoiSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AoiSource::CvSpan => "cv_span",
            AoiSource::ShippedAd => "shipped_ad",
            AoiSource::Subdivision => "subdivision",
            AoiSource::GapfillExtension => "gapfill_extension",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: String,
    pub viewport_width: u32,
    pub viewport_height: u32,
    pub screenshot_width: u32,
    pub screenshot_height: u32,
    #[serde(default)]
    pub query_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_timestamp: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub x: f64,
    pub y: f64,
    pub start: i64,
    pub end: i64,
}

impl FixationEvent {
    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    /// Midpoint time; may fall on a half millisecond.
    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub is_final: bool,
}

impl ClickEvent {
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// The click that decides the trial: the one flagged final, else the latest.
pub fn final_click(clicks: &[ClickEvent]) -> Option<&ClickEvent> {
    clicks
        .iter()
        .find(|c| c.is_final)
        .or_else(|| clicks.iter().max_by_key(|c| c.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CursorKind {
    Move,
    Click,
    Scroll,
}

impl FromStr for CursorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "move" => Ok(CursorKind::Move),
            "click" => Ok(CursorKind::Click),
            "scroll" => Ok(CursorKind::Scroll),
            other => Err(format!("unknown cursor kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorEvent {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub kind: CursorKind,
}

/// One shipped ad rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdRect {
    pub etype: Etype,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl AdRect {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

/// 8-bit luma raster, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    luma: Vec<u8>,
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Raster").field("width", &self.width).field("height", &self.height).finish()
    }
}

impl Raster {
    /// Panics when `luma.len() != width * height`.
    pub fn from_luma(width: u32, height: u32, luma: Vec<u8>) -> Self {
        assert_eq!(luma.len(), width as usize * height as usize, "luma buffer size");
        Self { width, height, luma }
    }

    /// Converts interleaved RGB8 with BT.601 luma weights.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Self {
        assert_eq!(rgb.len(), width as usize * height as usize * 3, "rgb buffer size");
        let luma = rgb
            .chunks_exact(3)
            .map(|p| bt601_luma(p[0], p[1], p[2]))
            .collect();
        Self { width, height, luma }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, luma: vec![value; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn pixels(&self) -> &[u8] {
        &self.luma
    }
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.luma
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.luma[y as usize * w..(y as usize + 1) * w]
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.luma[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.luma[y as usize * w + x as usize] = v;
    }
}

pub fn bt601_luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// One trial's raw inputs.
#[derive(Debug, Clone)]
pub struct TrialBundle {
    pub meta: TrialMeta,
    pub screenshot: Raster,
    pub html: String,
    pub ad_rects: Vec<AdRect>,
    pub fixations: Vec<FixationEvent>,
    pub clicks: Vec<ClickEvent>,
    pub cursor: Vec<CursorEvent>,
}

/// One typed bounding box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedAoi {
    pub aoi_id: String,
    pub etype: Etype,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    /// 0..N along the main axis in increasing y; -1 off-axis.
    pub position: i32,
    pub flavor: Flavor,
    pub source: AoiSource,
    /// Document-order index of the HTML card bound to this box, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_index: Option<usize>,
}

impl TypedAoi {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }

    pub fn set_rect(&mut self, r: Rect) {
        self.x = r.x;
        self.y = r.y;
        self.w = r.w;
        self.h = r.h;
    }

    pub fn is_main_axis(&self) -> bool {
        self.etype.is_main_axis()
    }

    pub fn y0(&self) -> i64 {
        self.y
    }
    pub fn y1(&self) -> i64 {
        self.y + self.h
    }
}

/// Checks the position / main-axis biconditional over a set of AOIs.
pub fn positions_consistent(aois: &[TypedAoi]) -> bool {
    aois.iter().all(|a| (a.position == -1) == !a.etype.is_main_axis())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    /// Missing meta or no fixations; the trial is not processed.
    TrialDropped,
    ViewportExceedsScreenshot,
    RasterDimensionMismatch,
    AdRectDegenerate,
    AdRectOutOfBounds,
    AdRectWrongEtype,
    FixationInvalid,
    MultipleFinalClicks,
    CursorNotMonotonic,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::TrialDropped => "trial_dropped",
            ViolationCode::ViewportExceedsScreenshot => "viewport_exceeds_screenshot",
            ViolationCode::RasterDimensionMismatch => "raster_dimension_mismatch",
            ViolationCode::AdRectDegenerate => "ad_rect_degenerate",
            ViolationCode::AdRectOutOfBounds => "ad_rect_out_of_bounds",
            ViolationCode::AdRectWrongEtype => "ad_rect_wrong_etype",
            ViolationCode::FixationInvalid => "fixation_invalid",
            ViolationCode::MultipleFinalClicks => "multiple_final_clicks",
            ViolationCode::CursorNotMonotonic => "cursor_not_monotonic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, code: ViolationCode, detail: impl Into<String>) {
        self.violations.push(Violation { code, detail: detail.into() });
    }
}

/// Checks every per-trial invariant. An empty report means the bundle can be
/// processed.
pub fn validate_trial_bundle(bundle: &TrialBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    let meta = &bundle.meta;

    if meta.trial_id.trim().is_empty() {
        report.push(ViolationCode::TrialDropped, "missing meta: empty trial_id");
    }
    if bundle.fixations.is_empty() {
        report.push(ViolationCode::TrialDropped, "no fixations");
    }
    if meta.viewport_width > meta.screenshot_width || meta.viewport_height > meta.screenshot_height {
        report.push(
            ViolationCode::ViewportExceedsScreenshot,
            format!(
                "viewport {}x{} exceeds screenshot {}x{}",
                meta.viewport_width, meta.viewport_height, meta.screenshot_width, meta.screenshot_height
            ),
        );
    }
    if bundle.screenshot.width() != meta.screenshot_width || bundle.screenshot.height() != meta.screenshot_height {
        report.push(
            ViolationCode::RasterDimensionMismatch,
            format!(
                "raster {}x{} vs meta {}x{}",
                bundle.screenshot.width(),
                bundle.screenshot.height(),
                meta.screenshot_width,
                meta.screenshot_height
            ),
        );
    }

    let (sw, sh) = (meta.screenshot_width as i64, meta.screenshot_height as i64);
    for (i, ad) in bundle.ad_rects.iter().enumerate() {
        if !ad.etype.is_ad() {
            report.push(ViolationCode::AdRectWrongEtype, format!("ad rect {i} has etype {}", ad.etype));
        }
        if ad.w <= 0 || ad.h <= 0 {
            report.push(ViolationCode::AdRectDegenerate, format!("ad rect {i} has size {}x{}", ad.w, ad.h));
        } else if ad.x < 0 || ad.y < 0 || ad.x + ad.w > sw || ad.y + ad.h > sh {
            report.push(
                ViolationCode::AdRectOutOfBounds,
                format!("ad rect {i} ({},{},{},{}) outside {sw}x{sh}", ad.x, ad.y, ad.w, ad.h),
            );
        }
    }

    for (i, f) in bundle.fixations.iter().enumerate() {
        if f.end < f.start || !f.x.is_finite() || !f.y.is_finite() {
            report.push(ViolationCode::FixationInvalid, format!("fixation {i}"));
        }
    }

    let finals = bundle.clicks.iter().filter(|c| c.is_final).count();
    if finals > 1 {
        report.push(ViolationCode::MultipleFinalClicks, format!("{finals} clicks flagged final"));
    }

    if let Some(i) = bundle.cursor.windows(2).position(|w| w[1].t < w[0].t) {
        report.push(ViolationCode::CursorNotMonotonic, format!("cursor time decreases at index {}", i + 1));
    }

    report
}
