//! Seeded synthetic trials with known ground truth.
//!
//! A [`LayoutSpec`] plants cards at explicit coordinates. [`generate_trial`]
//! renders the screenshot, the HTML and the telemetry, and derives the
//! expected AOIs and behavior straight from the layout, without running any
//! pipeline stage.
//!
//! Rendering conventions: white-ish background, text lines of dark speckle
//! spanning the full column width, lines 8..=14 rows tall with 2..=4 quiet
//! rows between them. Every card starts and ends on a text row. Children of
//! a composite card are separated by exactly [`CHILD_GAP`] quiet rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMode, ClickReason};
use crate::error::{Error, Result};
use crate::ingest::write_trial_dir;
use crate::model::{
    AdRect, AoiSource, ClickEvent, CursorEvent, CursorKind, Etype, FixationEvent, Flavor, Raster, Rect, TrialBundle,
    TrialMeta,
};

pub const PAGE_WIDTH: u32 = 1280;
pub const COLUMN_X0: i64 = 160;
pub const COLUMN_X1: i64 = 700;
pub const RAIL_X0: i64 = 760;
pub const RAIL_X1: i64 = 1060;
pub const BACKGROUND: u8 = 240;
pub const CHILD_GAP: i64 = 6;
pub const NATIVE_AD_HEIGHT: i64 = 80;
/// Fixations land at least this far inside their target box.
pub const FIXATION_MARGIN: i64 = 15;
const TEXT_DENSITY: f64 = 0.35;
const HEADER_HEIGHT: i64 = 120;

const WORDS: &[&str] = &[
    "river", "garden", "laptop", "review", "cheap", "flight", "hotel", "recipe", "weather", "museum", "ticket",
    "guide", "best", "price", "city", "coffee", "repair", "school", "music", "health", "bank", "insurance", "shoes",
    "camera", "train", "market", "rental", "house", "pizza", "course", "job", "news", "phone", "battery", "travel",
];

/// One planted card in the main column or the footer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardSpec {
    pub etype: Etype,
    pub y: i64,
    pub h: i64,
    /// Content heights of composite children, top to bottom, separated by
    /// `CHILD_GAP` quiet rows. Empty for a simple card.
    #[serde(default)]
    pub children: Vec<i64>,
}

impl CardSpec {
    pub fn simple(etype: Etype, y: i64, h: i64) -> Self {
        Self { etype, y, h, children: Vec::new() }
    }

    pub fn composite(etype: Etype, y: i64, children: Vec<i64>) -> Self {
        let h = children.iter().sum::<i64>() + CHILD_GAP * (children.len() as i64 - 1).max(0);
        Self { etype, y, h, children }
    }

    pub fn y1(&self) -> i64 {
        self.y + self.h
    }

    /// Tiles of the card as the subdivision stage cuts it: each quiet band
    /// splits at its floor midpoint.
    pub fn tiles(&self) -> Vec<(i64, i64)> {
        if self.children.len() < 2 {
            return vec![(self.y, self.y1())];
        }
        let mut out = Vec::new();
        let mut top = self.y;
        let mut cursor = self.y;
        for (i, &ch) in self.children.iter().enumerate() {
            cursor += ch;
            if i + 1 < self.children.len() {
                let cut = (cursor + cursor + CHILD_GAP) / 2;
                out.push((top, cut));
                top = cut;
                cursor += CHILD_GAP;
            }
        }
        out.push((top, self.y1()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RailAdSpec {
    pub y: i64,
    pub h: i64,
}

/// Where a fixation lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum FixTarget {
    /// The i-th main-axis tile, top to bottom.
    Main(usize),
    Rail(usize),
    /// Right margin, outside every box.
    Blank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum ClickTarget {
    /// Inside the i-th main-axis tile.
    Strict(usize),
    /// A few pixels left of the i-th main-axis tile.
    Tolerance(usize),
    Rail(usize),
    /// Right margin, far from any box.
    Far,
    /// Well outside the screenshot.
    Pathological,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickPlan {
    /// Main-axis tiles clicked before the final click.
    pub intermediate: Vec<usize>,
    pub final_click: Option<ClickTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub trial_id: String,
    pub height: u32,
    pub viewport_height: u32,
    pub query: String,
    /// Main-column cards in vertical order; footer cards (`chrome`,
    /// `related_searches`) come last.
    pub cards: Vec<CardSpec>,
    pub rail: Vec<RailAdSpec>,
    pub noise_sigma: f64,
    pub fixations: Vec<FixTarget>,
    pub clicks: ClickPlan,
}

/// Expected AOI row, behavior included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtAoi {
    pub etype: Etype,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub position: i32,
    pub source: AoiSource,
    pub n_fixations: usize,
    pub regressive: bool,
    pub above_fold: bool,
    pub n_clicks_attributed: usize,
}

impl GtAoi {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trial_id: String,
    /// Expected label per HTML card, document order.
    pub labels: Vec<Etype>,
    pub click_reason: ClickReason,
    pub click_mode: Option<AttributionMode>,
    /// Position of the main-axis AOI taking the final click.
    pub click_position: Option<i32>,
    /// Expected rows per flavor, sorted by `(position, y, x)`.
    pub flavors: BTreeMap<Flavor, Vec<GtAoi>>,
}

fn is_footer(e: Etype) -> bool {
    matches!(e, Etype::Chrome | Etype::RelatedSearches)
}

impl LayoutSpec {
    fn main_cards(&self) -> impl Iterator<Item = &CardSpec> {
        self.cards.iter().filter(|c| !is_footer(c.etype))
    }

    /// Main-axis tiles top to bottom: `(etype, y0, y1, source)`.
    pub fn main_tiles(&self) -> Vec<(Etype, i64, i64, AoiSource)> {
        let mut out = Vec::new();
        for c in self.main_cards() {
            let tiles = c.tiles();
            let source = if c.etype.is_main_axis_ad() {
                AoiSource::ShippedAd
            } else if tiles.len() > 1 {
                AoiSource::Subdivision
            } else {
                AoiSource::CvSpan
            };
            out.extend(tiles.into_iter().map(|(a, b)| (c.etype, a, b, source)));
        }
        out.sort_by_key(|t| t.1);
        out
    }

    pub fn ad_rects(&self) -> Vec<AdRect> {
        let mut ads: Vec<AdRect> = self
            .main_cards()
            .filter(|c| c.etype.is_main_axis_ad())
            .map(|c| AdRect { etype: c.etype, x: COLUMN_X0, y: c.y, w: COLUMN_X1 - COLUMN_X0, h: c.h })
            .collect();
        ads.extend(self.rail.iter().map(|r| AdRect {
            etype: Etype::DdRight,
            x: RAIL_X0,
            y: r.y,
            w: RAIL_X1 - RAIL_X0,
            h: r.h,
        }));
        ads
    }

    /// Checks the planted geometry before rendering.
    pub fn validate(&self) -> Result<()> {
        let min_h = 24;
        for (i, a) in self.cards.iter().enumerate() {
            if a.h < min_h || a.y < 0 || a.y1() > self.height as i64 {
                return Err(Error::InvalidLayout(format!("card {i} at y={} h={} out of range", a.y, a.h)));
            }
            if !a.children.is_empty() {
                let sum = a.children.iter().sum::<i64>() + CHILD_GAP * (a.children.len() as i64 - 1);
                if sum != a.h || a.children.iter().any(|&c| c < min_h) {
                    return Err(Error::InvalidLayout(format!("card {i} children do not fill its height")));
                }
            }
            for (j, b) in self.cards.iter().enumerate().skip(i + 1) {
                if a.y < b.y1() && b.y < a.y1() {
                    return Err(Error::OverlappingPlantedCards { a: i, b: j });
                }
            }
        }
        for (i, a) in self.rail.iter().enumerate() {
            if a.h < min_h || a.y < 0 || a.y + a.h > self.height as i64 {
                return Err(Error::InvalidLayout(format!("rail ad {i} out of range")));
            }
            for b in &self.rail[i + 1..] {
                if a.y < b.y + b.h && b.y < a.y + a.h {
                    return Err(Error::InvalidLayout(format!("rail ad {i} overlaps another")));
                }
            }
        }
        if self.clicks.final_click.is_none() && !self.clicks.intermediate.is_empty() {
            // Without a flagged final click the latest click stands in for it.
            return Err(Error::InvalidLayout("intermediate clicks without a final click".into()));
        }
        if self.viewport_height > self.height {
            return Err(Error::InvalidLayout("viewport taller than page".into()));
        }
        Ok(())
    }

    /// Random but valid layout. The same seed always gives the same spec.
    pub fn random(trial_id: &str, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cards = Vec::new();
        let mut y = HEADER_HEIGHT + rng.random_range(0..40);
        let gap = |rng: &mut ChaCha8Rng| rng.random_range(12..=60);

        for _ in 0..[0, 0, 1, 1, 2, 3].choose(&mut rng).copied().unwrap_or(0) {
            let h = rng.random_range(80..=130);
            cards.push(CardSpec::simple(Etype::DdTop, y, h));
            y += h + gap(&mut rng);
        }
        let n_body = rng.random_range(6..=12);
        let mut n_native = 0;
        for i in 0..n_body {
            let roll: f64 = rng.random();
            let card = if i > 0 && n_native < 2 && roll < 0.08 {
                n_native += 1;
                CardSpec::simple(Etype::NativeAd, y, NATIVE_AD_HEIGHT)
            } else if roll < 0.62 {
                CardSpec::simple(Etype::Organic, y, rng.random_range(80..=200))
            } else {
                let widgets = [
                    Etype::TopPlaces,
                    Etype::KnowledgePanel,
                    Etype::Paa,
                    Etype::ImagePack,
                    Etype::TopStories,
                    Etype::OtherWidget,
                    Etype::UnknownWidget,
                ];
                let etype = *widgets.choose(&mut rng).expect("non-empty");
                let can_split = matches!(etype, Etype::Paa | Etype::TopStories | Etype::ImagePack | Etype::TopPlaces);
                if can_split && rng.random_bool(0.5) {
                    let n = rng.random_range(2..=4);
                    let mut children: Vec<i64> = (0..n).map(|_| rng.random_range(80..=140)).collect();
                    let total = children.iter().sum::<i64>() + CHILD_GAP * (n - 1);
                    if total <= 360 {
                        *children.last_mut().expect("n >= 2") += 361 - total + rng.random_range(0..40);
                    }
                    CardSpec::composite(etype, y, children)
                } else {
                    CardSpec::simple(etype, y, rng.random_range(80..=320))
                }
            };
            y = card.y1() + gap(&mut rng);
            cards.push(card);
        }
        if rng.random_bool(0.6) {
            let h = rng.random_range(80..=160);
            cards.push(CardSpec::simple(Etype::RelatedSearches, y, h));
            y += h + gap(&mut rng);
        }
        let h = rng.random_range(40..=80);
        cards.push(CardSpec::simple(Etype::Chrome, y, h));
        y += h;

        let viewport_height = rng.random_range(700..=1000);
        let height = (y + rng.random_range(60..=200)).max(viewport_height as i64 + 1) as u32;

        let mut rail = Vec::new();
        let mut ry = HEADER_HEIGHT + rng.random_range(0..80);
        for _ in 0..[0, 0, 1, 2].choose(&mut rng).copied().unwrap_or(0) {
            let h = rng.random_range(100..=250);
            if ry + h > height as i64 {
                break;
            }
            rail.push(RailAdSpec { y: ry, h });
            ry += h + rng.random_range(20..=80);
        }

        let n_query = rng.random_range(2..=3);
        let query = WORDS.choose_multiple(&mut rng, n_query).copied().collect::<Vec<_>>().join(" ");

        let mut spec = LayoutSpec {
            trial_id: trial_id.to_string(),
            height,
            viewport_height,
            query,
            cards,
            rail,
            noise_sigma: 0.0,
            fixations: Vec::new(),
            clicks: ClickPlan { intermediate: Vec::new(), final_click: None },
        };
        let n_main = spec.main_tiles().len();
        let n_rail = spec.rail.len();

        let n_fix = rng.random_range(5..=25);
        spec.fixations = (0..n_fix)
            .map(|_| {
                let roll: f64 = rng.random();
                if roll < 0.75 {
                    // Favor the top of the page.
                    let a = rng.random_range(0..n_main);
                    let b = rng.random_range(0..n_main);
                    FixTarget::Main(a.min(b))
                } else if roll < 0.85 && n_rail > 0 {
                    FixTarget::Rail(rng.random_range(0..n_rail))
                } else {
                    FixTarget::Blank
                }
            })
            .collect();

        let n_inter = [0, 0, 1, 2].choose(&mut rng).copied().unwrap_or(0);
        spec.clicks.intermediate = (0..n_inter).map(|_| rng.random_range(0..n_main)).collect();
        let roll: f64 = rng.random();
        spec.clicks.final_click = if roll < 0.60 {
            Some(ClickTarget::Strict(rng.random_range(0..n_main)))
        } else if roll < 0.70 {
            Some(ClickTarget::Tolerance(rng.random_range(0..n_main)))
        } else if roll < 0.78 && n_rail > 0 {
            Some(ClickTarget::Rail(rng.random_range(0..n_rail)))
        } else if roll < 0.86 {
            Some(ClickTarget::Far)
        } else if roll < 0.91 {
            Some(ClickTarget::Pathological)
        } else if roll < 0.93 {
            Some(ClickTarget::NonFinite)
        } else {
            None
        };
        if spec.clicks.final_click.is_none() {
            spec.clicks.intermediate.clear();
        }
        spec
    }
}

// ---------------------------------------------------------------------------
// rendering

fn draw_line(raster: &mut Raster, x0: i64, x1: i64, y0: i64, y1: i64, rng: &mut ChaCha8Rng) {
    for y in y0..y1 {
        for x in x0..x1 {
            if rng.random_bool(TEXT_DENSITY) {
                raster.set(x as u32, y as u32, rng.random_range(30..=100));
            }
        }
    }
}

/// Fills `[y0, y1)` with text lines; the first and last rows are text.
fn draw_text_block(raster: &mut Raster, x0: i64, x1: i64, y0: i64, y1: i64, rng: &mut ChaCha8Rng) {
    let mut y = y0;
    loop {
        let lh = rng.random_range(8..=14);
        if y + lh + 6 >= y1 {
            draw_line(raster, x0, x1, y, y1, rng);
            return;
        }
        draw_line(raster, x0, x1, y, y + lh, rng);
        y += lh + rng.random_range(2..=4);
    }
}

fn render(spec: &LayoutSpec, rng: &mut ChaCha8Rng) -> Raster {
    let mut raster = Raster::filled(PAGE_WIDTH, spec.height, BACKGROUND);
    for c in &spec.cards {
        if c.children.is_empty() {
            draw_text_block(&mut raster, COLUMN_X0, COLUMN_X1, c.y, c.y1(), rng);
        } else {
            let mut y = c.y;
            for &ch in &c.children {
                draw_text_block(&mut raster, COLUMN_X0, COLUMN_X1, y, y + ch, rng);
                y += ch + CHILD_GAP;
            }
        }
    }
    for r in &spec.rail {
        draw_text_block(&mut raster, RAIL_X0, RAIL_X1, r.y, r.y + r.h, rng);
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
        for p in raster.pixels_mut() {
            *p = (*p as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    raster
}

fn words(rng: &mut ChaCha8Rng, n: usize, query: &str) -> String {
    let q: Vec<&str> = query.split(' ').collect();
    (0..n)
        .map(|_| if rng.random_bool(0.15) { *q.choose(rng).expect("query") } else { *WORDS.choose(rng).expect("words") })
        .collect::<Vec<_>>()
        .join(" ")
}

fn card_html(etype: Etype, children: usize, out: &mut String, rng: &mut ChaCha8Rng, query: &str) {
    let n_words = rng.random_range(8..=30);
    let snippet = words(rng, n_words, query);
    let title = words(rng, 4, query);
    let items = |rng: &mut ChaCha8Rng| {
        (0..children.max(2)).map(|_| format!("<div class=\"item\">{}</div>", words(rng, 5, query))).collect::<String>()
    };
    let html = match etype {
        Etype::Organic => format!(
            "<div class=\"g\"><a href=\"https://{w}.example/\"><h3>{title}</h3></a><cite>{w}.example</cite><div class=\"VwiC3b\">{snippet}</div></div>",
            w = WORDS.choose(rng).expect("words")
        ),
        Etype::DdTop => format!(
            "<div class=\"uEierd\"><span>Sponsored</span><a href=\"https://ad.example/\"><div role=\"link\">{title}</div></a><cite>ad.example</cite><div class=\"MUxGbd\">{snippet}</div></div>"
        ),
        Etype::NativeAd => format!(
            "<div class=\"commercial-unit\"><span>Sponsored</span><a href=\"https://shop.example/\">{title}</a></div>"
        ),
        Etype::DdRight => format!("<div class=\"rhs-ad\"><span>Sponsored</span><a href=\"https://rail.example/\">{title}</a></div>"),
        Etype::KnowledgePanel if rng.random_bool(0.5) => {
            format!("<div class=\"kp-wholepage\"><div class=\"kp-header\">{title}</div><span>{snippet}</span></div>")
        }
        Etype::KnowledgePanel => {
            format!("<div class=\"ULSxyf\" data-attrid=\"kc:/entity/summary\"><div>{title}</div><span>{snippet}</span></div>")
        }
        Etype::Paa => format!("<div class=\"ULSxyf\"><div role=\"heading\">People also ask</div>{}</div>", items(rng)),
        Etype::TopPlaces => format!("<div class=\"ULSxyf\"><h2>Places</h2>{}</div>", items(rng)),
        Etype::ImagePack => format!("<div class=\"ULSxyf\"><h2>Images</h2>{}</div>", items(rng)),
        Etype::TopStories => format!("<div class=\"ULSxyf\"><h2>Top stories</h2>{}</div>", items(rng)),
        Etype::OtherWidget => format!("<div class=\"ULSxyf\"><h2>Videos</h2>{}</div>", items(rng)),
        Etype::UnknownWidget => format!("<div class=\"card\"><span>{snippet}</span></div>"),
        Etype::RelatedSearches => format!(
            "<div class=\"related-searches\"><h2>Related searches</h2>{}</div>",
            (0..4).map(|_| format!("<a href=\"#\">{}</a>", words(rng, 3, query))).collect::<String>()
        ),
        Etype::Chrome => "<div class=\"footer-links\"><a href=\"#\">Help</a><a href=\"#\">Privacy</a><a href=\"#\">Terms</a></div>".to_string(),
    };
    out.push_str("    ");
    out.push_str(&html);
    out.push('\n');
}

/// HTML cards in document order: main column, right rail, footer.
fn render_html(spec: &LayoutSpec, rng: &mut ChaCha8Rng) -> (String, Vec<Etype>) {
    let mut html = String::new();
    let _ = writeln!(
        html,
        "<!doctype html>\n<html><head><title>{} - Search</title></head><body>\n<div class=\"navigation\"><a href=\"#\">All</a><a href=\"#\">Images</a></div>\n<div id=\"rso\">",
        spec.query
    );
    let mut labels = Vec::new();
    let mut main: Vec<&CardSpec> = spec.cards.iter().filter(|c| !is_footer(c.etype)).collect();
    main.sort_by_key(|c| c.y);
    for c in main {
        card_html(c.etype, c.children.len(), &mut html, rng, &spec.query);
        labels.push(c.etype);
    }
    html.push_str("</div>\n<div id=\"rhs\">\n");
    for _ in &spec.rail {
        card_html(Etype::DdRight, 0, &mut html, rng, &spec.query);
        labels.push(Etype::DdRight);
    }
    html.push_str("</div>\n<div id=\"foot\">\n");
    let mut footer: Vec<&CardSpec> = spec.cards.iter().filter(|c| is_footer(c.etype)).collect();
    footer.sort_by_key(|c| c.y);
    for c in footer {
        card_html(c.etype, 0, &mut html, rng, &spec.query);
        labels.push(c.etype);
    }
    html.push_str("</div>\n</body></html>\n");
    (html, labels)
}

// ---------------------------------------------------------------------------
// telemetry

fn inside(rng: &mut ChaCha8Rng, lo: i64, hi: i64, margin: i64) -> f64 {
    let (a, b) = (lo + margin, hi - margin);
    if a >= b {
        (lo + hi) as f64 / 2.0
    } else {
        rng.random_range(a..b) as f64 + rng.random_range(0.0..1.0)
    }
}

/// Durations land on the 150 Hz sample grid.
fn sample_duration(rng: &mut ChaCha8Rng) -> i64 {
    (rng.random_range(15..=60) as f64 * 1000.0 / 150.0).round() as i64
}

struct Telemetry {
    fixations: Vec<FixationEvent>,
    clicks: Vec<ClickEvent>,
    cursor: Vec<CursorEvent>,
}

fn telemetry(spec: &LayoutSpec, tiles: &[(Etype, i64, i64, AoiSource)], rng: &mut ChaCha8Rng) -> Telemetry {
    let mut t = rng.random_range(100..400);
    let mut fixations = Vec::new();
    for target in &spec.fixations {
        let (x, y) = match *target {
            FixTarget::Main(i) => {
                let (_, y0, y1, _) = tiles[i];
                (inside(rng, COLUMN_X0, COLUMN_X1, FIXATION_MARGIN), inside(rng, y0, y1, FIXATION_MARGIN))
            }
            FixTarget::Rail(i) => {
                let r = spec.rail[i];
                (inside(rng, RAIL_X0, RAIL_X1, FIXATION_MARGIN), inside(rng, r.y, r.y + r.h, FIXATION_MARGIN))
            }
            FixTarget::Blank => (inside(rng, 1100, 1270, 0), inside(rng, 0, spec.height as i64, 0)),
        };
        let d = sample_duration(rng);
        fixations.push(FixationEvent { x, y, start: t, end: t + d });
        t += d + rng.random_range(20..=60);
    }
    let end = t;

    let click_at = |rng: &mut ChaCha8Rng, target: ClickTarget| -> (f64, f64) {
        match target {
            ClickTarget::Strict(i) => {
                let (_, y0, y1, _) = tiles[i];
                (inside(rng, COLUMN_X0, COLUMN_X1, 3), inside(rng, y0, y1, 3))
            }
            ClickTarget::Tolerance(i) => {
                let (_, y0, y1, _) = tiles[i];
                ((COLUMN_X0 - rng.random_range(1..=4)) as f64, inside(rng, y0, y1, 12))
            }
            ClickTarget::Rail(i) => {
                let r = spec.rail[i];
                (inside(rng, RAIL_X0, RAIL_X1, 5), inside(rng, r.y, r.y + r.h, 5))
            }
            ClickTarget::Far => (inside(rng, 1120, 1270, 0), inside(rng, 0, spec.height as i64, 0)),
            ClickTarget::Pathological => {
                if rng.random_bool(0.5) {
                    (-(rng.random_range(60..400) as f64), 300.0)
                } else {
                    (400.0, (spec.height as i64 + rng.random_range(60..400)) as f64)
                }
            }
            ClickTarget::NonFinite => (f64::NAN, 200.0),
        }
    };

    let mut clicks: Vec<ClickEvent> = spec
        .clicks
        .intermediate
        .iter()
        .map(|&i| {
            let (x, y) = click_at(rng, ClickTarget::Strict(i));
            ClickEvent { t: rng.random_range(0..end.max(1)), x, y, is_final: false }
        })
        .collect();
    clicks.sort_by_key(|c| c.t);
    if let Some(target) = spec.clicks.final_click {
        let (x, y) = click_at(rng, target);
        clicks.push(ClickEvent { t: end + rng.random_range(100..=600), x, y, is_final: true });
    }

    let mut cursor: Vec<CursorEvent> = fixations
        .iter()
        .map(|f| CursorEvent {
            t: f.start + 10,
            x: f.x + rng.random_range(-40.0..40.0),
            y: f.y + rng.random_range(-20.0..20.0),
            kind: CursorKind::Move,
        })
        .collect();
    cursor.extend(clicks.iter().map(|c| CursorEvent { t: c.t, x: c.x, y: c.y, kind: CursorKind::Click }));
    cursor.sort_by_key(|c| c.t);
    Telemetry { fixations, clicks, cursor }
}

// ---------------------------------------------------------------------------
// ground truth

/// Identity of an expected AOI, shared across flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Main(usize),
    Rail(usize),
    Footer(usize),
}

fn ground_truth(spec: &LayoutSpec, labels: Vec<Etype>) -> GroundTruth {
    let tiles = spec.main_tiles();
    let width = COLUMN_X1 - COLUMN_X0;

    // Tight boxes.
    let mut typed: Vec<(Key, GtAoi)> = tiles
        .iter()
        .enumerate()
        .map(|(i, &(etype, y0, y1, source))| {
            (Key::Main(i), aoi(etype, COLUMN_X0, y0, width, y1 - y0, i as i32, source))
        })
        .collect();
    let mut off: Vec<(Key, GtAoi)> = Vec::new();
    for (i, r) in spec.rail.iter().enumerate() {
        off.push((Key::Rail(i), aoi(Etype::DdRight, RAIL_X0, r.y, RAIL_X1 - RAIL_X0, r.h, -1, AoiSource::ShippedAd)));
    }
    for (i, c) in spec.cards.iter().filter(|c| is_footer(c.etype)).enumerate() {
        off.push((Key::Footer(i), aoi(c.etype, COLUMN_X0, c.y, width, c.h, -1, AoiSource::CvSpan)));
    }
    off.sort_by_key(|(_, a)| (a.y, a.x));
    typed.extend(off);

    // Gap fill: every adjacent organic pair meets at the floor midpoint.
    let mut gap = typed.clone();
    for i in 0..tiles.len().saturating_sub(1) {
        if tiles[i].0 == Etype::Organic && tiles[i + 1].0 == Etype::Organic {
            let m = (tiles[i].2 + tiles[i + 1].1).div_euclid(2);
            let a = &mut gap[i].1;
            a.h = m - a.y;
            a.source = AoiSource::GapfillExtension;
            let b = &mut gap[i + 1].1;
            b.h = b.y + b.h - m;
            b.y = m;
            b.source = AoiSource::GapfillExtension;
        }
    }

    let hybrid: Vec<(Key, GtAoi)> = typed
        .iter()
        .filter(|(k, _)| matches!(k, Key::Main(_)))
        .map(|(k, a)| {
            let mut h = a.clone();
            if !h.etype.is_main_axis_ad() {
                h.etype = Etype::Organic;
            }
            (*k, h)
        })
        .collect();

    // Behavior from the plan.
    let fix_keys: Vec<Option<Key>> = spec
        .fixations
        .iter()
        .map(|f| match *f {
            FixTarget::Main(i) => Some(Key::Main(i)),
            FixTarget::Rail(i) => Some(Key::Rail(i)),
            FixTarget::Blank => None,
        })
        .collect();
    let mut click_keys: Vec<Key> = spec.clicks.intermediate.iter().map(|&i| Key::Main(i)).collect();
    let (click_reason, click_mode, click_position) = match spec.clicks.final_click {
        Some(ClickTarget::Strict(i)) => {
            click_keys.push(Key::Main(i));
            (ClickReason::Attributed, Some(AttributionMode::Strict), Some(i as i32))
        }
        Some(ClickTarget::Tolerance(i)) => {
            click_keys.push(Key::Main(i));
            (ClickReason::Attributed, Some(AttributionMode::Tolerance), Some(i as i32))
        }
        Some(ClickTarget::Rail(_)) => (ClickReason::DdRight, None, None),
        Some(ClickTarget::Far) => (ClickReason::ChromeOrFar, None, None),
        Some(ClickTarget::Pathological) | Some(ClickTarget::NonFinite) | None => (ClickReason::NoClick, None, None),
    };

    let vh = spec.viewport_height as i64;
    let finish = |rows: Vec<(Key, GtAoi)>| -> Vec<GtAoi> {
        let present = |k: Key| rows.iter().any(|(r, _)| *r == k);
        let seq: Vec<Key> = fix_keys.iter().flatten().copied().filter(|&k| present(k)).collect();
        let mut visits: Vec<Key> = Vec::new();
        for k in seq {
            if visits.last() != Some(&k) {
                visits.push(k);
            }
        }
        let mut out: Vec<GtAoi> = rows
            .into_iter()
            .map(|(k, mut a)| {
                a.n_fixations = fix_keys.iter().filter(|f| **f == Some(k)).count();
                a.regressive = visits.iter().filter(|&&v| v == k).count() >= 2;
                a.above_fold = a.y < vh && a.y + a.h > 0;
                a.n_clicks_attributed = click_keys.iter().filter(|&&c| c == k).count();
                a
            })
            .collect();
        out.sort_by_key(|a| (a.position, a.y, a.x));
        out
    };

    let mut flavors = BTreeMap::new();
    flavors.insert(Flavor::Typed, finish(typed));
    flavors.insert(Flavor::TypedGapfill, finish(gap));
    flavors.insert(Flavor::OrganicHybrid, finish(hybrid));
    GroundTruth { trial_id: spec.trial_id.clone(), labels, click_reason, click_mode, click_position, flavors }
}

fn aoi(etype: Etype, x: i64, y: i64, w: i64, h: i64, position: i32, source: AoiSource) -> GtAoi {
    GtAoi {
        etype,
        x,
        y,
        w,
        h,
        position,
        source,
        n_fixations: 0,
        regressive: false,
        above_fold: false,
        n_clicks_attributed: 0,
    }
}

/// Renders a trial from its spec. `seed` drives pixels, markup text and
/// telemetry coordinates.
pub fn generate_trial(spec: &LayoutSpec, seed: u64) -> Result<(TrialBundle, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe_f00d_u64);
    let screenshot = render(spec, &mut rng);
    let (html, labels) = render_html(spec, &mut rng);
    let tiles = spec.main_tiles();
    let tel = telemetry(spec, &tiles, &mut rng);
    let meta = TrialMeta {
        trial_id: spec.trial_id.clone(),
        viewport_width: PAGE_WIDTH,
        viewport_height: spec.viewport_height,
        screenshot_width: PAGE_WIDTH,
        screenshot_height: spec.height,
        query_text: spec.query.clone(),
        entry_timestamp: None,
    };
    let bundle = TrialBundle {
        meta,
        screenshot,
        html,
        ad_rects: spec.ad_rects(),
        fixations: tel.fixations,
        clicks: tel.clicks,
        cursor: tel.cursor,
    };
    Ok((bundle, ground_truth(spec, labels)))
}

pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// `n` random trials named `syn-0000`, `syn-0001`, ...
pub fn synth_corpus(n: usize, base_seed: u64, noise_sigma: f64) -> Result<Vec<(TrialBundle, GroundTruth)>> {
    (0..n)
        .map(|i| {
            let seed = trial_seed(base_seed, i);
            let mut spec = LayoutSpec::random(&format!("syn-{i:04}"), seed);
            spec.noise_sigma = noise_sigma;
            generate_trial(&spec, seed)
        })
        .collect()
}

/// Writes a corpus in the trial directory layout plus `ground_truth.json`.
pub fn write_synth_corpus(out_dir: &Path, n: usize, base_seed: u64, noise_sigma: f64) -> Result<Vec<GroundTruth>> {
    let corpus = synth_corpus(n, base_seed, noise_sigma)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut truths = Vec::with_capacity(corpus.len());
    for (bundle, gt) in corpus {
        write_trial_dir(&bundle, &out_dir.join(&bundle.meta.trial_id))?;
        truths.push(gt);
    }
    let path = out_dir.join("ground_truth.json");
    let mut text = serde_json::to_string_pretty(&truths)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(truths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_cut_at_band_midpoints() {
        let c = CardSpec::composite(Etype::Paa, 100, vec![120, 130, 110]);
        assert_eq!(c.h, 120 + 6 + 130 + 6 + 110);
        // bands [220, 226) and [356, 362)
        assert_eq!(c.tiles(), vec![(100, 223), (223, 359), (359, 472)]);
    }

    #[test]
    fn random_specs_are_valid_and_reproducible() {
        for seed in 0..50 {
            let a = LayoutSpec::random("t", seed);
            a.validate().unwrap();
            assert_eq!(a, LayoutSpec::random("t", seed));
        }
    }

    #[test]
    fn overlapping_cards_rejected() {
        let mut spec = LayoutSpec::random("t", 3);
        let first = spec.cards[0].clone();
        spec.cards.push(CardSpec::simple(Etype::Organic, first.y + 5, 40));
        assert!(matches!(generate_trial(&spec, 3), Err(Error::OverlappingPlantedCards { .. })));
    }

    #[test]
    fn same_seed_same_bundle() {
        let spec = LayoutSpec::random("t", 11);
        let (a, ga) = generate_trial(&spec, 11).unwrap();
        let (b, gb) = generate_trial(&spec, 11).unwrap();
        assert_eq!(a.screenshot, b.screenshot);
        assert_eq!(a.html, b.html);
        assert_eq!(ga, gb);
    }

    #[test]
    fn gapfill_truth_meets_at_floor_midpoint() {
        let spec = LayoutSpec {
            trial_id: "t".into(),
            height: 1200,
            viewport_height: 800,
            query: "cheap flight".into(),
            cards: vec![
                CardSpec::simple(Etype::Organic, 200, 100),
                CardSpec::simple(Etype::Organic, 321, 80),
                CardSpec::simple(Etype::Chrome, 500, 40),
            ],
            rail: vec![],
            noise_sigma: 0.0,
            fixations: vec![FixTarget::Main(0), FixTarget::Main(1), FixTarget::Main(0)],
            clicks: ClickPlan { intermediate: vec![], final_click: Some(ClickTarget::Strict(1)) },
        };
        let (_, gt) = generate_trial(&spec, 1).unwrap();
        let g: Vec<&GtAoi> = gt.flavors[&Flavor::TypedGapfill].iter().filter(|a| a.position >= 0).collect();
        // gap [300, 321): m = floor(621 / 2) = 310
        assert_eq!((g[0].y, g[0].h), (200, 110));
        assert_eq!((g[1].y, g[1].h), (310, 91));
        assert!(g[0].regressive && !g[1].regressive);
        assert_eq!(g[1].n_clicks_attributed, 1);
        assert_eq!(gt.click_reason, ClickReason::Attributed);
        assert_eq!(gt.labels, vec![Etype::Organic, Etype::Organic, Etype::Chrome]);
    }
}
