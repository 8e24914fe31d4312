//! Output writers: per-flavor AOI tables, per-trial JSON documents, and the
//! corpus reports. Nothing here stamps wall-clock time, so reruns over the
//! same input are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMode, AttributionResult, ClickReason, TrialClickStatus};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::inventory::{
    aggregate_registration, audit_trials, etype_inventory, position_click_rates, AdAudit, InventoryRow,
    PositionConvention, PositionRates, RegistrationRecord, RegistrationStats,
};
use crate::model::{AoiSource, ClickEvent, CursorEvent, Etype, Flavor, TrialMeta};
use crate::pipeline::{CorpusRun, TrialFailure};
use crate::rules::Rules;
use crate::segmentation::ColumnBounds;
use crate::trial::{Diagnostics, TrialResult};

pub const TRIAL_SCHEMA_VERSION: u32 = 1;
/// JSON schema of the per-trial documents.
pub const TRIAL_SCHEMA: &str = include_str!("../schemas/trial.schema.json");

pub const AOI_CSV_HEADER: [&str; 15] = [
    "trial_id",
    "aoi_id",
    "etype",
    "position",
    "x",
    "y",
    "w",
    "h",
    "flavor",
    "source",
    "fixated",
    "n_fixations",
    "regressive",
    "above_fold",
    "n_clicks_attributed",
];

pub fn aoi_csv_name(flavor: Flavor) -> String {
    format!("adserp_aois_by_trial_id_{}.csv", flavor.as_str())
}

/// One AOI row: geometry, identity and behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRow {
    pub trial_id: String,
    pub aoi_id: String,
    pub etype: Etype,
    pub position: i32,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub flavor: Flavor,
    pub source: AoiSource,
    pub fixated: bool,
    pub n_fixations: usize,
    pub regressive: bool,
    pub above_fold: bool,
    pub n_clicks_attributed: usize,
}

/// Rows of one trial and flavor, sorted by `(position, y, x)`; off-axis rows (-1) first.
pub fn aoi_rows(trial: &TrialResult, flavor: Flavor) -> Vec<AoiRow> {
    let mut rows: Vec<AoiRow> = trial
        .flavor(flavor)
        .rows()
        .map(|(a, b)| AoiRow {
            trial_id: trial.meta.trial_id.clone(),
            aoi_id: a.aoi_id.clone(),
            etype: a.etype,
            position: a.position,
            x: a.x,
            y: a.y,
            w: a.w,
            h: a.h,
            flavor,
            source: a.source,
            fixated: b.fixated,
            n_fixations: b.n_fixations,
            regressive: b.regressive,
            above_fold: b.above_fold,
            n_clicks_attributed: b.n_clicks_attributed,
        })
        .collect();
    rows.sort_by_key(|r| (r.position, r.y, r.x));
    rows
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the corpus AOI table for one flavor. The header is written even
/// when there are no trials.
pub fn write_aoi_csv(path: &Path, trials: &[TrialResult], flavor: Flavor) -> Result<()> {
    write_rows(path, trials.iter().flat_map(|t| aoi_rows(t, flavor)), &AOI_CSV_HEADER)
}

pub fn read_aoi_csv(path: &Path) -> Result<Vec<AoiRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<AoiRow>, _>>()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------------------
// provenance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub rules_name: String,
    pub rules_version: u32,
    pub config: PipelineConfig,
}

impl Provenance {
    pub fn new(config: &PipelineConfig, rules: &Rules) -> Self {
        Self {
            tool: "allserp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rules_name: rules.name.clone(),
            rules_version: rules.version,
            config: config.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// per-trial documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlavorDocument {
    pub aois: Vec<AoiRow>,
    pub click_attribution: Vec<AttributionResult>,
    /// AOI id per fixation, aligned with `replay.fixations`.
    pub fixation_aoi: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayFixation {
    pub x: f64,
    pub y: f64,
    pub start: i64,
    pub end: i64,
    pub duration: i64,
}

/// Time-ordered telemetry for the replay viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTrack {
    pub fixations: Vec<ReplayFixation>,
    pub clicks: Vec<ClickEvent>,
    pub cursor: Vec<CursorEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDocument {
    pub schema_version: u32,
    pub trial_id: String,
    pub meta: TrialMeta,
    /// Screenshot path relative to the document, when one was emitted.
    pub screenshot: Option<String>,
    pub column: ColumnBounds,
    pub click_status: TrialClickStatus,
    pub flavors: BTreeMap<Flavor, FlavorDocument>,
    pub registration: Option<RegistrationRecord>,
    pub diagnostics: Diagnostics,
    pub replay: ReplayTrack,
}

pub fn trial_document(trial: &TrialResult, flavors: &[Flavor], screenshot: Option<String>) -> TrialDocument {
    // Fixation order is kept as ingested so `fixation_aoi` stays aligned;
    // the viewer gets them sorted by start.
    let mut order: Vec<usize> = (0..trial.fixations.len()).collect();
    order.sort_by_key(|&i| (trial.fixations[i].start, trial.fixations[i].end));
    let fixations = order
        .iter()
        .map(|&i| {
            let f = &trial.fixations[i];
            ReplayFixation { x: f.x, y: f.y, start: f.start, end: f.end, duration: f.duration() }
        })
        .collect();
    let mut clicks = trial.clicks.clone();
    clicks.sort_by_key(|c| c.t);
    let mut cursor = trial.cursor.clone();
    cursor.sort_by_key(|c| c.t);

    let flavors = flavors
        .iter()
        .map(|&f| {
            let out = trial.flavor(f);
            let doc = FlavorDocument {
                aois: aoi_rows(trial, f),
                click_attribution: out.click_attribution.clone(),
                fixation_aoi: order.iter().map(|&i| out.fixation_aoi[i].clone()).collect(),
            };
            (f, doc)
        })
        .collect();
    TrialDocument {
        schema_version: TRIAL_SCHEMA_VERSION,
        trial_id: trial.meta.trial_id.clone(),
        meta: trial.meta.clone(),
        screenshot,
        column: trial.column,
        click_status: trial.click_status.clone(),
        flavors,
        registration: trial.registration.clone(),
        diagnostics: trial.diagnostics.clone(),
        replay: ReplayTrack { fixations, clicks, cursor },
    }
}

/// Trial ids become file names; path separators and other awkward bytes
/// are replaced.
pub fn file_stem(trial_id: &str) -> String {
    trial_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn write_trial_documents(dir: &Path, run: &CorpusRun, flavors: &[Flavor], with_screenshots: bool) -> Result<()> {
    create_dir(dir)?;
    for t in &run.trials {
        let stem = file_stem(&t.meta.trial_id);
        let screenshot = match (with_screenshots, run.sources.get(&t.meta.trial_id)) {
            (true, Some(src)) => {
                let from = src.join(crate::ingest::SCREENSHOT_FILE);
                let name = format!("{stem}.png");
                fs::copy(&from, dir.join(&name)).map_err(|e| Error::io(&from, e))?;
                Some(name)
            }
            _ => None,
        };
        write_json(&dir.join(format!("{stem}.json")), &trial_document(t, flavors, screenshot))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// corpus reports

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSplit {
    pub strict: usize,
    pub tolerance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub provenance: Provenance,
    pub n_inputs: usize,
    pub n_processed: usize,
    pub n_failed: usize,
    pub failures: Vec<TrialFailure>,
    /// Trials per final-click reason.
    pub click_status: BTreeMap<ClickReason, usize>,
    /// Share of processed trials whose final click lands on the main axis.
    pub main_axis_click_share: Option<f64>,
    /// How the attributed final clicks were matched.
    pub final_click_modes: ModeSplit,
    /// Every click event, intermediate ones included, on the tight flavor.
    pub n_click_events: usize,
    pub n_click_events_attributed: usize,
    pub tier_histogram: [usize; 8],
    pub n_bind_warnings: usize,
}

pub fn run_summary(run: &CorpusRun, provenance: Provenance) -> RunSummary {
    let mut click_status: BTreeMap<ClickReason, usize> = ClickReason::ALL.iter().map(|&r| (r, 0)).collect();
    let mut modes = ModeSplit::default();
    let mut tiers = [0usize; 8];
    let (mut n_events, mut n_attr, mut n_warn) = (0, 0, 0);
    for t in &run.trials {
        *click_status.entry(t.click_status.reason).or_default() += 1;
        match t.click_status.mode {
            Some(AttributionMode::Strict) => modes.strict += 1,
            Some(AttributionMode::Tolerance) => modes.tolerance += 1,
            _ => {}
        }
        for (acc, n) in tiers.iter_mut().zip(t.diagnostics.tier_histogram) {
            *acc += n;
        }
        n_events += t.typed.click_attribution.len();
        n_attr += t.typed.click_attribution.iter().filter(|c| c.aoi_id.is_some()).count();
        n_warn += t.diagnostics.bind_warnings.len();
    }
    let n = run.trials.len();
    RunSummary {
        provenance,
        n_inputs: run.n_inputs,
        n_processed: n,
        n_failed: run.failures.len(),
        failures: run.failures.clone(),
        main_axis_click_share: (n > 0).then(|| click_status[&ClickReason::Attributed] as f64 / n as f64),
        click_status,
        final_click_modes: modes,
        n_click_events: n_events,
        n_click_events_attributed: n_attr,
        tier_histogram: tiers,
        n_bind_warnings: n_warn,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryReport {
    pub provenance: Provenance,
    pub flavor: Flavor,
    pub n_trials: usize,
    pub rows: Vec<InventoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionReport {
    pub provenance: Provenance,
    pub flavor: Flavor,
    pub conventions: Vec<PositionRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub provenance: Provenance,
    pub stats: RegistrationStats,
    pub records: Vec<RegistrationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub audit: AdAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ContentFeatureCsvRow<'a> {
    trial_id: &'a str,
    aoi_id: &'a str,
    position: i32,
    etype: Etype,
    type_token_ratio: f64,
    query_token_overlap: f64,
}

pub fn write_inventory_reports(out_dir: &Path, run: &CorpusRun, provenance: &Provenance) -> Result<()> {
    create_dir(out_dir)?;
    let rows = etype_inventory(&run.trials, run.n_inputs);
    write_rows(
        &out_dir.join("inventory.csv"),
        &rows,
        &[
            "etype",
            "n_aois",
            "n_fixated",
            "fixated_pct",
            "n_clicks",
            "click_pct",
            "n_regressive",
            "regressive_pct",
            "n_trials_above_fold",
            "above_fold_pct",
        ],
    )?;
    write_json(
        &out_dir.join("inventory.json"),
        &InventoryReport { provenance: provenance.clone(), flavor: Flavor::TypedGapfill, n_trials: run.trials.len(), rows },
    )?;
    write_json(
        &out_dir.join("position_click_rates.json"),
        &PositionReport {
            provenance: provenance.clone(),
            flavor: Flavor::TypedGapfill,
            conventions: vec![
                position_click_rates(&run.trials, PositionConvention::OrganicOnly),
                position_click_rates(&run.trials, PositionConvention::AllMainAxis),
            ],
        },
    )?;
    let mut w = csv_writer(&out_dir.join("content_features.csv"))?;
    let mut any = false;
    for t in &run.trials {
        for r in &t.content_features {
            any = true;
            w.serialize(ContentFeatureCsvRow {
                trial_id: &t.meta.trial_id,
                aoi_id: &r.aoi_id,
                position: r.position,
                etype: r.etype,
                type_token_ratio: r.features.type_token_ratio,
                query_token_overlap: r.features.query_token_overlap,
            })?;
        }
    }
    if !any {
        w.write_record(["trial_id", "aoi_id", "position", "etype", "type_token_ratio", "query_token_overlap"])?;
    }
    w.flush().map_err(|e| Error::io(out_dir.join("content_features.csv"), e))?;
    Ok(())
}

pub fn write_registration_report(out_dir: &Path, run: &CorpusRun, provenance: &Provenance) -> Result<RegistrationStats> {
    create_dir(out_dir)?;
    let records: Vec<RegistrationRecord> = run.trials.iter().filter_map(|t| t.registration.clone()).collect();
    let stats = aggregate_registration(&records, run.trials.len(), provenance.config.registration.threshold_px);
    write_json(
        &out_dir.join("gaze_cursor_coverage.json"),
        &RegistrationReport { provenance: provenance.clone(), stats: stats.clone(), records },
    )?;
    Ok(stats)
}

pub fn write_audit_report(out_dir: &Path, run: &CorpusRun, provenance: &Provenance) -> Result<AdAudit> {
    create_dir(out_dir)?;
    let audit = audit_trials(&run.trials, provenance.config.ad_iou_threshold);
    write_json(&out_dir.join("ad_consistency.json"), &AuditReport { provenance: provenance.clone(), audit: audit.clone() })?;
    Ok(audit)
}

pub fn write_run_summary(out_dir: &Path, run: &CorpusRun, provenance: &Provenance) -> Result<RunSummary> {
    create_dir(out_dir)?;
    let summary = run_summary(run, provenance.clone());
    write_json(&out_dir.join("run_summary.json"), &summary)?;
    Ok(summary)
}

/// Everything `build-aois` produces: AOI tables for the selected flavors,
/// per-trial documents, the audit, inventories and the run summary.
pub fn write_build_outputs(out_dir: &Path, run: &CorpusRun, config: &PipelineConfig, rules: &Rules) -> Result<RunSummary> {
    create_dir(out_dir)?;
    let provenance = Provenance::new(config, rules);
    let flavors = config.flavor.flavors();
    for &f in &flavors {
        write_aoi_csv(&out_dir.join(aoi_csv_name(f)), &run.trials, f)?;
    }
    write_trial_documents(&out_dir.join("trials"), run, &flavors, false)?;
    write_audit_report(out_dir, run, &provenance)?;
    write_registration_report(out_dir, run, &provenance)?;
    write_inventory_reports(out_dir, run, &provenance)?;
    write_run_summary(out_dir, run, &provenance)
}

/// Output paths written by [`write_build_outputs`], for callers that list
/// artifacts.
pub fn build_output_paths(out_dir: &Path, config: &PipelineConfig) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = config.flavor.flavors().into_iter().map(|f| out_dir.join(aoi_csv_name(f))).collect();
    for name in [
        "ad_consistency.json",
        "inventory.csv",
        "inventory.json",
        "position_click_rates.json",
        "gaze_cursor_coverage.json",
        "content_features.csv",
        "run_summary.json",
    ] {
        v.push(out_dir.join(name));
    }
    v
}
