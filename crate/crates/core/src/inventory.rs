//! Corpus aggregates: the per-etype behavioral inventory, click rate by
//! position, the shipped-ad consistency audit, the gaze/cursor registration
//! probe, and snippet lexical features.
//!
//! Every aggregate is an order-free fold over per-trial results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{final_click, iou, AdRect, ClickEvent, Etype, FixationEvent, Flavor, TypedAoi};
use crate::trial::TrialResult;

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

// ---------------------------------------------------------------------------
// inventory table

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryRow {
    pub etype: Etype,
    pub n_aois: usize,
    pub n_fixated: usize,
    /// Over the etype's full AOI population.
    pub fixated_pct: f64,
    /// AOI-attributed click events, intermediate clicks included.
    pub n_clicks: usize,
    /// Over all AOI-attributed click events in the corpus.
    pub click_pct: f64,
    pub n_regressive: usize,
    /// Over the fixated subset.
    pub regressive_pct: f64,
    pub n_trials_above_fold: usize,
    /// Over every trial in the corpus, dropped ones included.
    pub above_fold_pct: f64,
}

/// Per-etype behavioral inventory over the gap-fill flavor, main axis only,
/// ordered by AOI count descending. `n_corpus_trials` is the above-fold
/// denominator and counts dropped trials too; it is raised to the number of
/// processed trials when smaller.
pub fn etype_inventory(trials: &[TrialResult], n_corpus_trials: usize) -> Vec<InventoryRow> {
    let n_corpus_trials = n_corpus_trials.max(trials.len());
    #[derive(Default)]
    struct Acc {
        n_aois: usize,
        n_fixated: usize,
        n_clicks: usize,
        n_regressive: usize,
        n_trials_above_fold: usize,
    }
    let mut acc: BTreeMap<Etype, Acc> = BTreeMap::new();
    for t in trials {
        let mut fold_here = BTreeSet::new();
        for (aoi, b) in t.typed_gapfill.rows().filter(|(a, _)| a.is_main_axis()) {
            let e = acc.entry(aoi.etype).or_default();
            e.n_aois += 1;
            e.n_fixated += b.fixated as usize;
            e.n_regressive += (b.fixated && b.regressive) as usize;
            e.n_clicks += b.n_clicks_attributed;
            if b.above_fold {
                fold_here.insert(aoi.etype);
            }
        }
        for etype in fold_here {
            acc.entry(etype).or_default().n_trials_above_fold += 1;
        }
    }
    let total_clicks: usize = acc.values().map(|a| a.n_clicks).sum();
    let mut rows: Vec<InventoryRow> = acc
        .into_iter()
        .map(|(etype, a)| InventoryRow {
            etype,
            n_aois: a.n_aois,
            n_fixated: a.n_fixated,
            fixated_pct: pct(a.n_fixated, a.n_aois),
            n_clicks: a.n_clicks,
            click_pct: pct(a.n_clicks, total_clicks),
            n_regressive: a.n_regressive,
            regressive_pct: pct(a.n_regressive, a.n_fixated),
            n_trials_above_fold: a.n_trials_above_fold,
            above_fold_pct: pct(a.n_trials_above_fold, n_corpus_trials),
        })
        .collect();
    rows.sort_by(|a, b| b.n_aois.cmp(&a.n_aois).then(a.etype.cmp(&b.etype)));
    rows
}

// ---------------------------------------------------------------------------
// rank statistics

/// Average ranks (1-based), ties sharing the mean of their rank range.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson over average ranks. `None` for
/// mismatched or short (< 3) inputs and for constant vectors.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return None;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionConvention {
    /// Positions index organic results only.
    OrganicOnly,
    /// Positions index every main-axis card.
    AllMainAxis,
}

/// Positions 0..9 get their own bucket; everything deeper pools here.
pub const POOLED_BUCKET: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBucket {
    /// "0".."9" or "10+".
    pub position: String,
    pub n_aois: usize,
    pub n_clicked: usize,
    pub click_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRates {
    pub convention: PositionConvention,
    pub buckets: Vec<PositionBucket>,
    /// Spearman rho of click rate against position over buckets 0..9.
    pub rho: Option<f64>,
    pub n_aois_0_9: usize,
}

/// Click rate by position under one numbering convention, gap-fill flavor.
/// An AOI counts as clicked when at least one click event is attributed to it.
pub fn position_click_rates(trials: &[TrialResult], convention: PositionConvention) -> PositionRates {
    let mut n = [0usize; POOLED_BUCKET + 1];
    let mut clicked = [0usize; POOLED_BUCKET + 1];
    for t in trials {
        let mut main: Vec<_> = t.typed_gapfill.rows().filter(|(a, _)| a.is_main_axis()).collect();
        main.sort_by_key(|(a, _)| a.position);
        let ranked = main.into_iter().filter(|(a, _)| match convention {
            PositionConvention::OrganicOnly => a.etype == Etype::Organic,
            PositionConvention::AllMainAxis => true,
        });
        for (i, (aoi, b)) in ranked.enumerate() {
            let pos = match convention {
                PositionConvention::OrganicOnly => i,
                PositionConvention::AllMainAxis => aoi.position.max(0) as usize,
            };
            let bucket = pos.min(POOLED_BUCKET);
            n[bucket] += 1;
            clicked[bucket] += (b.n_clicks_attributed > 0) as usize;
        }
    }
    let buckets: Vec<PositionBucket> = (0..=POOLED_BUCKET)
        .map(|p| PositionBucket {
            position: if p == POOLED_BUCKET { "10+".into() } else { p.to_string() },
            n_aois: n[p],
            n_clicked: clicked[p],
            click_rate: (n[p] > 0).then(|| clicked[p] as f64 / n[p] as f64),
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = buckets[..POOLED_BUCKET]
        .iter()
        .enumerate()
        .filter_map(|(p, b)| b.click_rate.map(|r| (p as f64, r)))
        .unzip();
    PositionRates { convention, rho: spearman(&xs, &ys), n_aois_0_9: n[..POOLED_BUCKET].iter().sum(), buckets }
}

// ---------------------------------------------------------------------------
// gaze / cursor registration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationParams {
    pub window_ms: i64,
    pub threshold_px: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self { window_ms: 1500, threshold_px: 250.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub trial_id: String,
    pub t_click: i64,
    pub click_x: f64,
    pub click_y: f64,
    pub n_in_window: usize,
    /// Minimum distance from any lead-window fixation to the click.
    pub min_lead_distance: Option<f64>,
    /// Distance from the fixation spanning the click time, if any.
    pub concurrent_distance: Option<f64>,
    pub flagged: Option<bool>,
}

/// Lead-window registration record for one trial; `None` when the trial has
/// no usable final click.
pub fn gaze_cursor_registration(
    trial_id: &str,
    fixations: &[FixationEvent],
    clicks: &[ClickEvent],
    params: &RegistrationParams,
) -> Option<RegistrationRecord> {
    let click = final_click(clicks).filter(|c| c.is_finite())?;
    let t = click.t as f64;
    let lo = t - params.window_ms as f64;
    let dist = |f: &FixationEvent| (f.x - click.x).hypot(f.y - click.y);

    let in_window: Vec<&FixationEvent> =
        fixations.iter().filter(|f| (lo..=t).contains(&f.midpoint())).collect();
    let min_lead_distance = in_window.iter().map(|f| dist(f)).min_by(f64::total_cmp);
    let concurrent_distance = fixations
        .iter()
        .filter(|f| f.start <= click.t && click.t <= f.end)
        .min_by_key(|f| f.start)
        .map(dist);
    Some(RegistrationRecord {
        trial_id: trial_id.to_string(),
        t_click: click.t,
        click_x: click.x,
        click_y: click.y,
        n_in_window: in_window.len(),
        min_lead_distance,
        concurrent_distance,
        flagged: min_lead_distance.map(|d| d > params.threshold_px),
    })
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 * n)`, clamped to the first element.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationStats {
    pub n_trials: usize,
    pub n_included: usize,
    /// Final click present but no fixation in the lead window.
    pub n_excluded: usize,
    /// No usable final click.
    pub n_skipped: usize,
    pub median: Option<f64>,
    pub p25: Option<f64>,
    pub p75: Option<f64>,
    pub p95: Option<f64>,
    pub threshold_px: f64,
    pub n_flagged: usize,
    pub flagged_share: Option<f64>,
    pub concurrent_median: Option<f64>,
}

/// Corpus aggregate of the registration records. `n_trials` counts every
/// trial, including those skipped for lack of a final click.
pub fn aggregate_registration(records: &[RegistrationRecord], n_trials: usize, threshold_px: f64) -> RegistrationStats {
    let mut mins: Vec<f64> = records.iter().filter_map(|r| r.min_lead_distance).collect();
    mins.sort_by(f64::total_cmp);
    let mut conc: Vec<f64> = records.iter().filter_map(|r| r.concurrent_distance).collect();
    conc.sort_by(f64::total_cmp);
    let n_flagged = mins.iter().filter(|&&d| d > threshold_px).count();
    RegistrationStats {
        n_trials,
        n_included: mins.len(),
        n_excluded: records.len() - mins.len(),
        n_skipped: n_trials.saturating_sub(records.len()),
        median: nearest_rank(&mins, 50.0),
        p25: nearest_rank(&mins, 25.0),
        p75: nearest_rank(&mins, 75.0),
        p95: nearest_rank(&mins, 95.0),
        threshold_px,
        n_flagged,
        flagged_share: (!mins.is_empty()).then(|| n_flagged as f64 / mins.len() as f64),
        concurrent_median: nearest_rank(&conc, 50.0),
    }
}

// ---------------------------------------------------------------------------
// ad consistency

/// One trial's inputs to the ad audit.
#[derive(Debug, Clone, Copy)]
pub struct AuditInput<'a> {
    pub trial_id: &'a str,
    pub aois: &'a [TypedAoi],
    pub ad_rects: &'a [AdRect],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdDisagreement {
    pub trial_id: String,
    pub rect_index: usize,
    pub etype: Etype,
    pub best_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdAudit {
    pub n_classifications: usize,
    pub n_disagreements: usize,
    pub mean_iou: Option<f64>,
    pub n_organic_overlapping_ads: usize,
    pub iou_threshold: f64,
    pub disagreements: Vec<AdDisagreement>,
}

/// Checks every shipped rect against the AOIs: a rect disagrees when no AOI
/// of its etype overlaps it at `iou_threshold` or better.
pub fn ad_consistency_audit<'a>(inputs: impl IntoIterator<Item = AuditInput<'a>>, iou_threshold: f64) -> AdAudit {
    let mut n_classifications = 0;
    let mut matched_ious = Vec::new();
    let mut disagreements = Vec::new();
    let mut n_organic_overlapping_ads = 0;
    for input in inputs {
        for (i, ad) in input.ad_rects.iter().enumerate() {
            n_classifications += 1;
            let best = input
                .aois
                .iter()
                .filter(|a| a.etype == ad.etype)
                .map(|a| iou(&a.rect(), &ad.rect()))
                .fold(0.0, f64::max);
            if best >= iou_threshold {
                matched_ious.push(best);
            } else {
                disagreements.push(AdDisagreement {
                    trial_id: input.trial_id.to_string(),
                    rect_index: i,
                    etype: ad.etype,
                    best_iou: best,
                });
            }
        }
        n_organic_overlapping_ads += input
            .aois
            .iter()
            .filter(|a| a.etype == Etype::Organic)
            .filter(|a| input.ad_rects.iter().any(|ad| a.rect().overlaps(&ad.rect())))
            .count();
    }
    AdAudit {
        n_classifications,
        n_disagreements: disagreements.len(),
        mean_iou: (!matched_ious.is_empty()).then(|| matched_ious.iter().sum::<f64>() / matched_ious.len() as f64),
        n_organic_overlapping_ads,
        iou_threshold,
        disagreements,
    }
}

/// Audit over the tight flavor of processed trials.
pub fn audit_trials(trials: &[TrialResult], iou_threshold: f64) -> AdAudit {
    ad_consistency_audit(
        trials.iter().map(|t| AuditInput {
            trial_id: &t.meta.trial_id,
            aois: &t.flavor(Flavor::Typed).aois,
            ad_rects: &t.ad_rects,
        }),
        iou_threshold,
    )
}

// ---------------------------------------------------------------------------
// snippet features

/// Lowercase tokens split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnippetFeatures {
    pub type_token_ratio: f64,
    pub query_token_overlap: f64,
}

pub fn snippet_features(snippet: &str, query: &str) -> SnippetFeatures {
    let tokens = tokenize(snippet);
    let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    let query_tokens: BTreeSet<String> = tokenize(query).into_iter().collect();
    let type_token_ratio = if tokens.is_empty() { 0.0 } else { distinct.len() as f64 / tokens.len() as f64 };
    let query_token_overlap = if query_tokens.is_empty() {
        0.0
    } else {
        query_tokens.iter().filter(|q| distinct.contains(q.as_str())).count() as f64 / query_tokens.len() as f64
    };
    SnippetFeatures { type_token_ratio, query_token_overlap }
}
