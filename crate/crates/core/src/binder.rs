//! Joins HTML labels to raster spans by document order, propagates ad
//! identity from the shipped rectangles, and numbers the main axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::EtypeLabel;
use crate::model::{iou, AdRect, AoiSource, Etype, Flavor, Rect, TypedAoi};
use crate::segmentation::{CardSpan, ColumnBounds, SpanOrigin};

/// Minimum IoU for an AOI to inherit a shipped ad rectangle's identity.
pub const DEFAULT_AD_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindWarning {
    /// More span groups than labels; the extras were typed unknown_widget.
    ExcessSpans { count: usize, first_y0: i64 },
    /// More main-axis labels than span groups; the extras were dropped.
    ExcessLabels { count: usize, first_doc_index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindOutcome {
    pub aois: Vec<TypedAoi>,
    pub warnings: Vec<BindWarning>,
}

/// Groups spans so each group takes one label: a run of abutting
/// subdivision children is one group, everything else stands alone.
fn span_groups(spans: &[CardSpan]) -> Vec<&[CardSpan]> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=spans.len() {
        let continues = i < spans.len()
            && spans[i].origin == SpanOrigin::Subdivision
            && spans[i - 1].origin == SpanOrigin::Subdivision
            && spans[i - 1].y1 == spans[i].y0;
        if !continues {
            groups.push(&spans[start..i]);
            start = i;
        }
    }
    groups
}

fn source_of(origin: SpanOrigin) -> AoiSource {
    match origin {
        SpanOrigin::Cv => AoiSource::CvSpan,
        SpanOrigin::ShippedAd => AoiSource::ShippedAd,
        SpanOrigin::Subdivision => AoiSource::Subdivision,
    }
}

/// Binds the i-th main-axis label to the i-th span group, top to bottom.
///
/// Trailing off-axis labels (footer chrome, related searches) take any span
/// groups left after the main axis is exhausted; remaining groups become
/// `unknown_widget`. Positions and ids are left for [`assign_positions`] and
/// [`assign_ids`].
pub fn bind_labels(spans: &[CardSpan], labels: &[EtypeLabel], column: ColumnBounds) -> BindOutcome {
    let main: Vec<&EtypeLabel> = labels.iter().filter(|l| l.etype.is_main_axis()).collect();
    let last_main_doc = main.last().map(|l| l.doc_index);
    let trailing: Vec<&EtypeLabel> = labels
        .iter()
        .filter(|l| matches!(l.etype, Etype::Chrome | Etype::RelatedSearches))
        .filter(|l| last_main_doc.is_none_or(|d| l.doc_index > d))
        .collect();

    let groups = span_groups(spans);
    let mut aois = Vec::new();
    let mut warnings = Vec::new();
    let mut excess = 0usize;
    let mut first_excess_y0 = None;

    for (g, group) in groups.iter().enumerate() {
        let (etype, doc_index) = if let Some(l) = main.get(g) {
            (l.etype, Some(l.doc_index))
        } else if let Some(l) = trailing.get(g - main.len()) {
            (l.etype, Some(l.doc_index))
        } else {
            excess += 1;
            first_excess_y0.get_or_insert(group[0].y0);
            (Etype::UnknownWidget, None)
        };
        for span in group.iter() {
            aois.push(TypedAoi {
                aoi_id: String::new(),
                etype,
                x: column.x0,
                y: span.y0,
                w: column.width(),
                h: span.height(),
                position: 0,
                flavor: Flavor::Typed,
                source: source_of(span.origin),
                doc_index,
            });
        }
    }
    if excess > 0 {
        warnings.push(BindWarning::ExcessSpans { count: excess, first_y0: first_excess_y0.unwrap_or_default() });
    }
    if main.len() > groups.len() {
        warnings.push(BindWarning::ExcessLabels {
            count: main.len() - groups.len(),
            first_doc_index: main[groups.len()].doc_index,
        });
    }
    BindOutcome { aois, warnings }
}

/// Copies shipped ad identity and geometry onto the AOIs that overlap each
/// main-axis rect at `iou_threshold` or better, inserts unmatched rects as
/// new AOIs, and appends right-rail rects as off-axis AOIs.
pub fn propagate_ad_identity(aois: &[TypedAoi], ad_rects: &[AdRect], iou_threshold: f64) -> Result<Vec<TypedAoi>> {
    let mut out = aois.to_vec();
    let mut claimed_by: Vec<Option<usize>> = vec![None; out.len()];

    for (ri, ad) in ad_rects.iter().enumerate().filter(|(_, a)| a.etype.is_main_axis_ad()) {
        let rect = ad.rect();
        let best = aois
            .iter()
            .enumerate()
            .map(|(i, a)| (i, iou(&a.rect(), &rect)))
            .filter(|&(_, v)| v >= iou_threshold)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((i, _)) => {
                if claimed_by[i].is_some() {
                    return Err(Error::AmbiguousAdMatch {
                        aoi_id: format!("y={}", aois[i].y),
                        count: 2,
                    });
                }
                claimed_by[i] = Some(ri);
                let a = &mut out[i];
                a.etype = ad.etype;
                a.set_rect(rect);
                a.source = AoiSource::ShippedAd;
            }
            None => out.push(ad_aoi(ad)),
        }
    }
    out.extend(ad_rects.iter().filter(|a| a.etype == Etype::DdRight).map(ad_aoi));
    Ok(out)
}

fn ad_aoi(ad: &AdRect) -> TypedAoi {
    TypedAoi {
        aoi_id: String::new(),
        etype: ad.etype,
        x: ad.x,
        y: ad.y,
        w: ad.w,
        h: ad.h,
        position: if ad.etype.is_main_axis() { 0 } else { -1 },
        flavor: Flavor::Typed,
        source: AoiSource::ShippedAd,
        doc_index: None,
    }
}

/// Numbers main-axis AOIs 0..K-1 by increasing y and sets off-axis AOIs to
/// -1. Output lists the main axis in position order, then off-axis boxes by
/// (y, x).
pub fn assign_positions(aois: &[TypedAoi]) -> Vec<TypedAoi> {
    let (mut main, mut off): (Vec<TypedAoi>, Vec<TypedAoi>) =
        aois.iter().cloned().partition(|a| a.etype.is_main_axis());
    main.sort_by_key(|a| (a.y, a.x, a.h));
    off.sort_by_key(|a| (a.y, a.x, a.h));
    for (i, a) in main.iter_mut().enumerate() {
        a.position = i as i32;
    }
    for a in off.iter_mut() {
        a.position = -1;
    }
    main.extend(off);
    main
}

/// Stable ids `"{trial_id}#NN"` in the current order.
pub fn assign_ids(trial_id: &str, aois: &mut [TypedAoi]) {
    for (i, a) in aois.iter_mut().enumerate() {
        a.aoi_id = format!("{trial_id}#{i:02}");
    }
}

/// Runs the whole binding phase and returns the tight flavor.
pub fn bind_trial(
    trial_id: &str,
    spans: &[CardSpan],
    labels: &[EtypeLabel],
    column: ColumnBounds,
    ad_rects: &[AdRect],
    iou_threshold: f64,
) -> Result<BindOutcome> {
    let BindOutcome { aois, warnings } = bind_labels(spans, labels, column);
    let aois = propagate_ad_identity(&aois, ad_rects, iou_threshold)?;
    let mut aois = assign_positions(&aois);
    assign_ids(trial_id, &mut aois);
    Ok(BindOutcome { aois, warnings })
}

/// Every main-axis ad rect has exactly one AOI with its etype and geometry.
pub fn ads_consistent(aois: &[TypedAoi], ad_rects: &[AdRect]) -> bool {
    ad_rects.iter().filter(|a| a.etype.is_main_axis_ad()).all(|ad| {
        aois.iter().filter(|a| a.etype == ad.etype && a.rect() == ad.rect()).count() == 1
    })
}

/// No organic AOI overlaps any shipped ad rect.
pub fn organics_clear_of_ads(aois: &[TypedAoi], ad_rects: &[AdRect]) -> bool {
    aois.iter()
        .filter(|a| a.etype == Etype::Organic)
        .all(|a| ad_rects.iter().all(|ad| !a.rect().overlaps(&Rect::new(ad.x, ad.y, ad.w, ad.h))))
}
