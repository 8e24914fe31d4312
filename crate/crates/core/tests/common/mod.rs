//! Brute-force reference implementations and random layout builders shared
//! by the integration suites. Nothing here calls the library code under
//! test except for plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use allserp_core::attribution::AttributionMode;
use allserp_core::model::{AoiSource, ClickEvent, Etype, FixationEvent, Flavor, TrialMeta, TypedAoi};
use allserp_core::trial::TrialResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL_X: f64 = 5.0;
pub const TOL_Y: f64 = 10.0;

fn box_aoi(id: usize, etype: Etype, x0: i64, y0: i64, x1: i64, y1: i64, position: i32) -> TypedAoi {
    TypedAoi {
        aoi_id: format!("L#{id:02}"),
        etype,
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
        position,
        flavor: Flavor::Typed,
        source: AoiSource::CvSpan,
        doc_index: None,
    }
}

const MAIN: [Etype; 10] = [
    Etype::Organic,
    Etype::DdTop,
    Etype::NativeAd,
    Etype::TopPlaces,
    Etype::KnowledgePanel,
    Etype::Paa,
    Etype::ImagePack,
    Etype::TopStories,
    Etype::OtherWidget,
    Etype::UnknownWidget,
];

/// Random non-overlapping layout: a stack of main-axis boxes with ragged x
/// extents and gaps of 0..=60 rows (sometimes abutting), plus right-rail
/// boxes. With `blockers`, off-axis boxes are sometimes dropped into gaps
/// inside the column.
pub fn random_layout(rng: &mut ChaCha8Rng, blockers: bool) -> Vec<TypedAoi> {
    let n = rng.random_range(1..=14);
    let mut y = rng.random_range(0..200);
    let mut out = Vec::new();
    let mut gaps = Vec::new();
    for i in 0..n {
        let etype = if rng.random_bool(0.6) { Etype::Organic } else { MAIN[rng.random_range(0..MAIN.len())] };
        let h = rng.random_range(20..=200);
        let x0 = rng.random_range(100..=140);
        let x1 = rng.random_range(560..=700);
        out.push(box_aoi(i, etype, x0, y, x1, y + h, i as i32));
        y += h;
        let gap = if rng.random_bool(0.15) { 0 } else { rng.random_range(1..=60) };
        gaps.push((y, y + gap));
        y += gap;
    }
    let mut id = n;
    let mut ry = rng.random_range(0..300);
    for _ in 0..rng.random_range(0..=2) {
        let h = rng.random_range(40..=250);
        out.push(box_aoi(id, Etype::DdRight, 760, ry, 1060, ry + h, -1));
        id += 1;
        ry += h + rng.random_range(0..=40);
    }
    if blockers {
        for &(g0, g1) in &gaps[..gaps.len().saturating_sub(1)] {
            if g1 - g0 >= 4 && rng.random_bool(0.2) {
                let a = rng.random_range(g0..g1 - 2);
                let b = rng.random_range(a + 1..g1);
                let x0 = rng.random_range(100..600);
                out.push(box_aoi(id, Etype::Chrome, x0, a, x0 + rng.random_range(5..80), b, -1));
                id += 1;
            }
        }
    }
    out
}

/// A point near some box edge, or anywhere on the page.
pub fn random_point(rng: &mut ChaCha8Rng, aois: &[TypedAoi]) -> (f64, f64) {
    let frac = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
        0 => 0.0,
        1 => 0.5,
        _ => rng.random_range(0.0..1.0),
    };
    if rng.random_range(0..100) == 0 {
        return (f64::NAN, 10.0);
    }
    if !aois.is_empty() && rng.random_bool(0.6) {
        let a = &aois[rng.random_range(0..aois.len())];
        let x = if rng.random_bool(0.5) { a.x } else { a.x + a.w } as f64 + rng.random_range(-8..=8) as f64;
        let y = if rng.random_bool(0.5) { a.y } else { a.y + a.h } as f64 + rng.random_range(-14..=14) as f64;
        let (x, y) = match rng.random_range(0..3) {
            0 => (x + frac(rng), rng.random_range(a.y - 14..a.y + a.h + 14) as f64 + frac(rng)),
            1 => (rng.random_range(a.x - 8..a.x + a.w + 8) as f64 + frac(rng), y + frac(rng)),
            _ => (x + frac(rng), y + frac(rng)),
        };
        (x, y)
    } else {
        (rng.random_range(0.0..1280.0), rng.random_range(0.0..3000.0))
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// attribution

fn strictly_inside(a: &TypedAoi, x: f64, y: f64) -> bool {
    a.x as f64 <= x && x < (a.x + a.w) as f64 && a.y as f64 <= y && y < (a.y + a.h) as f64
}

/// Distance from a point to the closed box, computed by clamping.
fn clamp_distance(a: &TypedAoi, x: f64, y: f64) -> (f64, f64) {
    let cx = x.clamp(a.x as f64, (a.x + a.w) as f64);
    let cy = y.clamp(a.y as f64, (a.y + a.h) as f64);
    ((x - cx).abs(), (y - cy).abs())
}

/// Linear scan: strict containment first, else the closest box whose
/// tolerance-expanded closed extent holds the point, ties to the lowest
/// position and then to input order.
pub fn brute_attribute(aois: &[TypedAoi], x: f64, y: f64, tx: f64, ty: f64) -> (Option<String>, AttributionMode) {
    if !(x.is_finite() && y.is_finite()) {
        return (None, AttributionMode::Miss);
    }
    let strict: Vec<&TypedAoi> = aois.iter().filter(|a| strictly_inside(a, x, y)).collect();
    assert!(strict.len() <= 1, "boxes overlap");
    if let Some(a) = strict.first() {
        return (Some(a.aoi_id.clone()), AttributionMode::Strict);
    }
    let mut best: Option<(f64, i32, &TypedAoi)> = None;
    for a in aois {
        let in_x = (a.x as f64 - tx) <= x && x <= (a.x + a.w) as f64 + tx;
        let in_y = (a.y as f64 - ty) <= y && y <= (a.y + a.h) as f64 + ty;
        if !(in_x && in_y) {
            continue;
        }
        let (dx, dy) = clamp_distance(a, x, y);
        let d = dx.hypot(dy);
        let better = match best {
            None => true,
            Some((bd, bp, _)) => d < bd || (d == bd && a.position < bp),
        };
        if better {
            best = Some((d, a.position, a));
        }
    }
    match best {
        Some((_, _, a)) => (Some(a.aoi_id.clone()), AttributionMode::Tolerance),
        None => (None, AttributionMode::Miss),
    }
}

// ---------------------------------------------------------------------------
// gap fill

fn main_sorted(aois: &[TypedAoi]) -> Vec<&TypedAoi> {
    let mut m: Vec<&TypedAoi> = aois.iter().filter(|a| a.etype.is_main_axis()).collect();
    m.sort_by_key(|a| a.y);
    m
}

fn rects_touch(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> bool {
    a.0 < b.2 && b.0 < a.2 && a.1 < b.3 && b.1 < a.3
}

/// Reference gap fill: each pair of main-axis neighbours that are both
/// organic and whose gap region is empty meets at the floor midpoint.
pub fn brute_gapfill(aois: &[TypedAoi]) -> Vec<TypedAoi> {
    let main = main_sorted(aois);
    let mut edges: BTreeMap<String, (i64, i64)> = aois.iter().map(|a| (a.aoi_id.clone(), (a.y, a.y + a.h))).collect();
    for w in main.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.etype != Etype::Organic || b.etype != Etype::Organic {
            continue;
        }
        let (g0, g1) = (a.y + a.h, b.y);
        if g1 <= g0 {
            continue;
        }
        let region = (a.x.min(b.x), g0, (a.x + a.w).max(b.x + b.w), g1);
        let blocked = aois
            .iter()
            .filter(|o| o.aoi_id != a.aoi_id && o.aoi_id != b.aoi_id)
            .any(|o| rects_touch(region, (o.x, o.y, o.x + o.w, o.y + o.h)));
        if blocked {
            continue;
        }
        let m = (g0 + g1).div_euclid(2);
        edges.get_mut(&a.aoi_id).unwrap().1 = m;
        edges.get_mut(&b.aoi_id).unwrap().0 = m;
    }
    aois.iter()
        .map(|a| {
            let (y0, y1) = edges[&a.aoi_id];
            let mut o = a.clone();
            if (y0, y1) != (a.y, a.y + a.h) {
                o.source = AoiSource::GapfillExtension;
            }
            o.y = y0;
            o.h = y1 - y0;
            o
        })
        .collect()
}

/// Structural checks on a gap-fill output. Returns human-readable
/// violations; empty means clean. `tiling` asks for the run tiling check,
/// which only holds when no gap is blocked.
pub fn gapfill_violations(input: &[TypedAoi], output: &[TypedAoi], again: &[TypedAoi], tiling: bool) -> Vec<String> {
    let mut v = Vec::new();
    if output.len() != input.len() {
        v.push("length changed".into());
        return v;
    }
    let by_id: BTreeMap<&str, &TypedAoi> = output.iter().map(|a| (a.aoi_id.as_str(), a)).collect();
    for a in input {
        let o = by_id[a.aoi_id.as_str()];
        if a.etype == Etype::Organic {
            if !(o.x == a.x && o.w == a.w && o.y <= a.y && o.y + o.h >= a.y + a.h) {
                v.push(format!("{} shrank", a.aoi_id));
            }
        } else if (o.x, o.y, o.w, o.h) != (a.x, a.y, a.w, a.h) {
            v.push(format!("{} non-organic changed", a.aoi_id));
        }
    }
    // Clamp: no output box overlaps a non-organic main-axis box, nor any
    // other output box.
    for (i, a) in output.iter().enumerate() {
        for b in &output[i + 1..] {
            if rects_touch((a.x, a.y, a.x + a.w, a.y + a.h), (b.x, b.y, b.x + b.w, b.y + b.h)) {
                v.push(format!("{} overlaps {}", a.aoi_id, b.aoi_id));
            }
        }
    }
    if tiling {
        let main = main_sorted(output);
        let mut i = 0;
        while i < main.len() {
            if main[i].etype != Etype::Organic {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < main.len() && main[j + 1].etype == Etype::Organic {
                j += 1;
            }
            let (lo, hi) = (main[i].y, main[j].y + main[j].h);
            for y in lo..hi {
                let owners = main[i..=j].iter().filter(|a| a.y <= y && y < a.y + a.h).count();
                if owners != 1 {
                    v.push(format!("row {y} owned {owners} times"));
                    break;
                }
            }
            i = j + 1;
        }
    }
    if again != output {
        v.push("not idempotent".into());
    }
    v
}

// ---------------------------------------------------------------------------
// rank statistics

/// Rank of each element: one plus the number strictly smaller, plus half the
/// number of other equal elements.
pub fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&o| o < x).count() as f64;
            let equal = xs.iter().filter(|&&o| o == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

pub fn brute_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(xs), &brute_ranks(ys))
}

/// Random vector with plenty of ties.
pub fn tied_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels = rng.random_range(2..=n.max(2));
    (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect()
}

// ---------------------------------------------------------------------------
// registration

pub fn brute_final_click(clicks: &[ClickEvent]) -> Option<ClickEvent> {
    for c in clicks {
        if c.is_final {
            return Some(*c);
        }
    }
    let mut best: Option<ClickEvent> = None;
    for c in clicks {
        if best.is_none_or(|b| c.t >= b.t) {
            best = Some(*c);
        }
    }
    best
}

/// `Some(None)` when a usable final click has no fixation in the lead
/// window, `None` when there is no usable final click.
pub fn brute_min_lead(fixations: &[FixationEvent], clicks: &[ClickEvent], window_ms: i64) -> Option<Option<f64>> {
    let c = brute_final_click(clicks)?;
    if !(c.x.is_finite() && c.y.is_finite()) {
        return None;
    }
    let mut best: Option<f64> = None;
    for f in fixations {
        let mid = (f.start + f.end) as f64 / 2.0;
        if mid < (c.t - window_ms) as f64 || mid > c.t as f64 {
            continue;
        }
        let d = ((f.x - c.x).powi(2) + (f.y - c.y).powi(2)).sqrt();
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    Some(best)
}

pub fn brute_nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (p / 100.0 * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

// ---------------------------------------------------------------------------
// inventory recount

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Recount {
    pub n_aois: usize,
    pub n_fixated: usize,
    pub n_clicks: usize,
    pub n_regressive: usize,
    pub n_trials_above_fold: usize,
}

/// Per-etype counts straight from the raw events and the gap-fill boxes.
pub fn brute_inventory(trials: &[TrialResult]) -> BTreeMap<Etype, Recount> {
    let mut out: BTreeMap<Etype, Recount> = BTreeMap::new();
    for t in trials {
        let boxes: Vec<&TypedAoi> = t.typed_gapfill.aois.iter().filter(|a| a.etype.is_main_axis()).collect();
        let owned: Vec<TypedAoi> = boxes.iter().map(|a| (*a).clone()).collect();
        let mut order: Vec<&FixationEvent> = t.fixations.iter().collect();
        order.sort_by_key(|f| f.start);
        // Fixations land on any box of the flavor, rail included; the visit
        // sequence runs over all of them.
        let all = &t.typed_gapfill.aois;
        let seq: Vec<&str> = order
            .iter()
            .filter_map(|f| all.iter().find(|a| strictly_inside(a, f.x, f.y)).map(|a| a.aoi_id.as_str()))
            .collect();
        let mut visit_map: BTreeMap<&str, usize> = BTreeMap::new();
        let mut prev = None;
        for &id in &seq {
            if prev != Some(id) {
                *visit_map.entry(id).or_default() += 1;
            }
            prev = Some(id);
        }
        let visits: Vec<usize> = boxes.iter().map(|a| visit_map.get(a.aoi_id.as_str()).copied().unwrap_or(0)).collect();
        let mut fold_etypes = std::collections::BTreeSet::new();
        for (i, a) in boxes.iter().enumerate() {
            let r = out.entry(a.etype).or_default();
            r.n_aois += 1;
            let fixated = visits[i] > 0;
            r.n_fixated += fixated as usize;
            r.n_regressive += (visits[i] >= 2) as usize;
            r.n_clicks += t
                .clicks
                .iter()
                .filter(|c| brute_attribute(&owned, c.x, c.y, TOL_X, TOL_Y).0.as_deref() == Some(a.aoi_id.as_str()))
                .count();
            if a.y < t.meta.viewport_height as i64 && a.y + a.h > 0 {
                fold_etypes.insert(a.etype);
            }
        }
        for e in fold_etypes {
            out.entry(e).or_default().n_trials_above_fold += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// files

/// Every file under `dir`, relative path to bytes.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn meta(trial_id: &str, viewport_height: u32) -> TrialMeta {
    TrialMeta {
        trial_id: trial_id.into(),
        viewport_width: 1280,
        viewport_height,
        screenshot_width: 1280,
        screenshot_height: 4000,
        query_text: String::new(),
        entry_timestamp: None,
    }
}
