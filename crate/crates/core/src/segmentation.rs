//! Card-span segmentation from the screenshot raster.
//!
//! The main column is located from per-column activity, each row of the
//! column is reduced to the standard deviation of its intensities, and runs
//! of active rows become card spans. Shipped ad rectangles then override any
//! overlapping span, and spans taller than the composite trigger are split at
//! their widest interior quiet bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdRect, Etype, Raster};

/// Narrowest raster accepted by column detection.
pub const MIN_RASTER_WIDTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Rows with activity strictly above this (intensity std units) are active.
    pub activity_threshold: f64,
    /// Active runs separated by fewer quiet rows than this are merged.
    pub min_gap_rows: u32,
    /// Shorter runs are dropped.
    pub min_card_height: u32,
    /// Spans taller than this are candidates for inner subdivision.
    pub composite_trigger_height: u32,
    /// Interior quiet bands shorter than this never split a composite.
    pub subdivision_min_quiet_rows: u32,
    /// Quantile of the row profile taken as the sensor noise floor and
    /// subtracted before thresholding. 0 disables the correction.
    pub noise_floor_quantile: f64,
    /// Column runs separated by fewer inactive columns are merged.
    pub column_merge_gap: u32,
    /// Columns above this fraction of the peak column activity are active.
    pub column_activity_ratio: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            activity_threshold: 2.0,
            min_gap_rows: 8,
            min_card_height: 24,
            composite_trigger_height: 350,
            subdivision_min_quiet_rows: 5,
            noise_floor_quantile: 0.05,
            column_merge_gap: 24,
            column_activity_ratio: 0.2,
        }
    }
}

/// Horizontal extent `[x0, x1)` of the main results column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBounds {
    pub x0: i64,
    pub x1: i64,
}

impl ColumnBounds {
    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityProfile {
    pub values: Vec<f64>,
    pub column: ColumnBounds,
}

impl ActivityProfile {
    /// Nearest-rank quantile of the row values.
    pub fn noise_floor(&self, quantile: f64) -> f64 {
        if self.values.is_empty() || quantile <= 0.0 {
            return 0.0;
        }
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((quantile.min(1.0) * sorted.len() as f64).ceil() as usize).max(1);
        sorted[rank - 1]
    }

    /// Profile with the noise floor subtracted and clamped at zero.
    pub fn denoised(&self, quantile: f64) -> ActivityProfile {
        let floor = self.noise_floor(quantile);
        ActivityProfile {
            values: self.values.iter().map(|v| (v - floor).max(0.0)).collect(),
            column: self.column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanOrigin {
    Cv,
    ShippedAd,
    Subdivision,
}

/// Half-open row span `[y0, y1)` on the main column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardSpan {
    pub y0: i64,
    pub y1: i64,
    pub origin: SpanOrigin,
}

impl CardSpan {
    pub fn new(y0: i64, y1: i64, origin: SpanOrigin) -> Self {
        Self { y0, y1, origin }
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }
}

fn population_std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let var = xs.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Locates the main results column.
///
/// Column activity is the standard deviation of each pixel column. Bands
/// owned by right-rail ads are zeroed, active columns are grouped into runs,
/// and the run with the largest integrated activity wins. The result is then
/// widened to cover every main-axis ad and clipped left of every right-rail
/// ad.
pub fn main_column_bounds(raster: &Raster, ad_rects: &[AdRect], params: &SegmentationParams) -> Result<ColumnBounds> {
    let width = raster.width();
    if width < MIN_RASTER_WIDTH || raster.height() == 0 {
        return Err(Error::DegenerateRaster { width, min: MIN_RASTER_WIDTH });
    }
    let w = width as usize;
    let h = raster.height() as f64;

    let mut sum = vec![0.0f64; w];
    for y in 0..raster.height() {
        for (s, &p) in sum.iter_mut().zip(raster.row(y)) {
            *s += p as f64;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / h).collect();
    let mut var = vec![0.0f64; w];
    for y in 0..raster.height() {
        for ((v, &p), m) in var.iter_mut().zip(raster.row(y)).zip(&mean) {
            let d = p as f64 - m;
            *v += d * d;
        }
    }
    let mut activity: Vec<f64> = var.iter().map(|v| (v / h).sqrt()).collect();

    let rail_x = ad_rects
        .iter()
        .filter(|a| a.etype == Etype::DdRight)
        .map(|a| a.x)
        .min();
    for ad in ad_rects.iter().filter(|a| a.etype == Etype::DdRight) {
        let lo = ad.x.clamp(0, w as i64) as usize;
        let hi = (ad.x + ad.w).clamp(0, w as i64) as usize;
        activity[lo..hi].iter_mut().for_each(|a| *a = 0.0);
    }

    let peak = activity.iter().copied().fold(0.0, f64::max);
    let mut bounds = if peak < params.activity_threshold {
        ColumnBounds {
            x0: (0.1 * width as f64).round() as i64,
            x1: (0.72 * width as f64).round() as i64,
        }
    } else {
        let threshold = peak * params.column_activity_ratio;
        let runs = merged_runs(&activity, threshold, params.column_merge_gap as usize);
        let (x0, x1) = runs
            .into_iter()
            .max_by(|a, b| {
                let ia: f64 = activity[a.0..a.1].iter().sum();
                let ib: f64 = activity[b.0..b.1].iter().sum();
                // earlier run wins ties
                ia.total_cmp(&ib).then(b.0.cmp(&a.0))
            })
            .expect("peak above threshold implies at least one run");
        ColumnBounds { x0: x0 as i64, x1: x1 as i64 }
    };

    for ad in ad_rects.iter().filter(|a| a.etype.is_main_axis_ad()) {
        bounds.x0 = bounds.x0.min(ad.x);
        bounds.x1 = bounds.x1.max(ad.x + ad.w);
    }
    if let Some(rx) = rail_x {
        bounds.x1 = bounds.x1.min(rx);
    }
    bounds.x0 = bounds.x0.max(0);
    bounds.x1 = bounds.x1.min(width as i64);
    if bounds.x0 >= bounds.x1 {
        return Err(Error::ColumnOutOfRaster { x0: bounds.x0, x1: bounds.x1, width });
    }
    Ok(bounds)
}

/// Maximal runs `[start, end)` of values above `threshold`, merging runs split
/// by fewer than `merge_gap` inactive entries.
fn merged_runs(values: &[f64], threshold: f64, merge_gap: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i] > threshold {
            let start = i;
            while i < values.len() && values[i] > threshold {
                i += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 < merge_gap => last.1 = i,
                _ => runs.push((start, i)),
            }
        } else {
            i += 1;
        }
    }
    runs
}

/// Per-row population standard deviation of intensities inside the column.
pub fn row_activity_profile(raster: &Raster, column: ColumnBounds) -> Result<ActivityProfile> {
    if column.x0 < 0 || column.x1 > raster.width() as i64 || column.x0 >= column.x1 {
        return Err(Error::ColumnOutOfRaster { x0: column.x0, x1: column.x1, width: raster.width() });
    }
    let (x0, x1) = (column.x0 as usize, column.x1 as usize);
    let values = (0..raster.height())
        .map(|y| population_std(raster.row(y)[x0..x1].iter().map(|&p| p as f64)))
        .collect();
    Ok(ActivityProfile { values, column })
}

/// Runs of active rows, merged across short quiet gaps, minus runs too short
/// to be a card.
pub fn card_spans(profile: &ActivityProfile, params: &SegmentationParams) -> Vec<CardSpan> {
    merged_runs(&profile.values, params.activity_threshold, params.min_gap_rows as usize)
        .into_iter()
        .filter(|(s, e)| e - s >= params.min_card_height as usize)
        .map(|(s, e)| CardSpan::new(s as i64, e as i64, SpanOrigin::Cv))
        .collect()
}

/// Makes every main-axis ad rect its own span, trimming or removing the CV
/// spans it overlaps. Right-rail ads are ignored.
pub fn apply_ad_precedence(spans: &[CardSpan], ad_rects: &[AdRect], params: &SegmentationParams) -> Result<Vec<CardSpan>> {
    let mut ads: Vec<(i64, i64)> = ad_rects
        .iter()
        .filter(|a| a.etype.is_main_axis_ad())
        .map(|a| (a.y, a.y + a.h))
        .collect();
    ads.sort_unstable();
    for pair in ads.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::OverlappingAdRects { a0: pair[0].0, a1: pair[0].1, b0: pair[1].0, b1: pair[1].1 });
        }
    }

    let min_h = params.min_card_height as i64;
    let mut out: Vec<CardSpan> = ads.iter().map(|&(y0, y1)| CardSpan::new(y0, y1, SpanOrigin::ShippedAd)).collect();
    for span in spans {
        let mut pieces = vec![(span.y0, span.y1)];
        for &(a0, a1) in &ads {
            pieces = pieces
                .into_iter()
                .flat_map(|(p0, p1)| {
                    if a1 <= p0 || a0 >= p1 {
                        vec![(p0, p1)]
                    } else {
                        [(p0, a0.max(p0)), (a1.min(p1), p1)]
                            .into_iter()
                            .filter(|(s, e)| e > s)
                            .collect()
                    }
                })
                .collect();
        }
        let trimmed = pieces.len() != 1 || pieces[0] != (span.y0, span.y1);
        out.extend(
            pieces
                .into_iter()
                .filter(|(s, e)| !trimmed || e - s >= min_h)
                .map(|(s, e)| CardSpan::new(s, e, span.origin)),
        );
    }
    out.sort_by_key(|s| (s.y0, s.y1));
    Ok(out)
}

/// Splits a tall CV span at the midpoints of its interior quiet bands.
///
/// Children tile the parent exactly. Cuts that would leave a child shorter
/// than `min_card_height` are skipped.
pub fn subdivide_composite(span: &CardSpan, profile: &ActivityProfile, params: &SegmentationParams) -> Vec<CardSpan> {
    if span.origin != SpanOrigin::Cv || span.height() <= params.composite_trigger_height as i64 {
        return vec![*span];
    }
    let lo = span.y0.max(0) as usize;
    let hi = (span.y1 as usize).min(profile.values.len());
    let quiet = |y: usize| profile.values[y] <= params.activity_threshold;

    let mut cuts = Vec::new();
    let mut y = lo;
    while y < hi {
        if quiet(y) {
            let start = y;
            while y < hi && quiet(y) {
                y += 1;
            }
            let interior = start > lo && y < hi;
            if interior && y - start >= params.subdivision_min_quiet_rows as usize {
                cuts.push(((start + y) / 2) as i64);
            }
        } else {
            y += 1;
        }
    }

    let min_h = params.min_card_height as i64;
    let mut children = Vec::new();
    let mut last = span.y0;
    for cut in cuts {
        if cut - last >= min_h && span.y1 - cut >= min_h {
            children.push(CardSpan::new(last, cut, SpanOrigin::Subdivision));
            last = cut;
        }
    }
    if children.is_empty() {
        return vec![*span];
    }
    children.push(CardSpan::new(last, span.y1, SpanOrigin::Subdivision));
    children
}

/// Output of the full segmentation phase for one trial.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub column: ColumnBounds,
    pub profile: ActivityProfile,
    pub spans: Vec<CardSpan>,
}

/// Column detection, profile, spans, ad precedence, and subdivision.
pub fn segment(raster: &Raster, ad_rects: &[AdRect], params: &SegmentationParams) -> Result<Segmentation> {
    let column = main_column_bounds(raster, ad_rects, params)?;
    let profile = row_activity_profile(raster, column)?.denoised(params.noise_floor_quantile);
    let spans = card_spans(&profile, params);
    let spans = apply_ad_precedence(&spans, ad_rects, params)?;
    let spans = spans
        .iter()
        .flat_map(|s| subdivide_composite(s, &profile, params))
        .collect();
    Ok(Segmentation { column, profile, spans })
}
