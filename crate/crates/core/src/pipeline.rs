//! Per-trial processing and the parallel corpus driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::is_main_axis_click;
use crate::binder::bind_trial;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gapfill::gapfill;
use crate::ingest::read_trial_dir;
use crate::inventory::{gaze_cursor_registration, snippet_features};
use crate::labeler::{label_sequence, parse_doc_cards, tier_histogram};
use crate::model::{validate_trial_bundle, Etype, Flavor, TrialBundle, TypedAoi, ViolationCode};
use crate::rules::Rules;
use crate::segmentation::segment;
use crate::trial::{ContentFeatureRow, Diagnostics, FlavorOutput, TrialResult};

/// Why a trial was left out of the outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_id: String,
    /// `trial_dropped`, `invalid_bundle`, `ingest_error` or `processing_error`.
    pub reason: String,
    pub detail: String,
}

impl TrialFailure {
    fn new(trial_id: &str, reason: &str, detail: impl Into<String>) -> Self {
        Self { trial_id: trial_id.to_string(), reason: reason.to_string(), detail: detail.into() }
    }
}

/// The pooled flavor: main axis only, every non-ad etype becomes organic.
pub fn pool_to_hybrid(aois: &[TypedAoi]) -> Vec<TypedAoi> {
    aois.iter()
        .filter(|a| a.is_main_axis())
        .map(|a| {
            let mut h = a.clone();
            if !h.etype.is_main_axis_ad() {
                h.etype = Etype::Organic;
            }
            h.flavor = Flavor::OrganicHybrid;
            h
        })
        .collect()
}

fn content_features(aois: &[TypedAoi], cards: &[crate::labeler::DocCard], query: &str) -> Vec<ContentFeatureRow> {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for a in aois.iter().filter(|a| a.is_main_axis()) {
        let Some(i) = a.doc_index else { continue };
        // Subdivision children share one card; the first child carries it.
        if !seen.insert(i) {
            continue;
        }
        let Some(card) = cards.get(i) else { continue };
        if card.snippet_text.is_empty() {
            continue;
        }
        rows.push(ContentFeatureRow {
            aoi_id: a.aoi_id.clone(),
            position: a.position,
            etype: a.etype,
            features: snippet_features(&card.snippet_text, query),
        });
    }
    rows
}

/// Runs every phase on one validated bundle.
pub fn process_bundle(bundle: TrialBundle, config: &PipelineConfig, rules: &Rules) -> std::result::Result<TrialResult, TrialFailure> {
    let id = bundle.meta.trial_id.clone();
    let report = validate_trial_bundle(&bundle);
    if !report.is_valid() {
        let detail = report.violations.iter().map(|v| format!("{}: {}", v.code.as_str(), v.detail)).collect::<Vec<_>>().join("; ");
        let reason = if report.codes().contains(&ViolationCode::TrialDropped) { "trial_dropped" } else { "invalid_bundle" };
        return Err(TrialFailure::new(&id, reason, detail));
    }
    process_valid(bundle, config, rules).map_err(|e| TrialFailure::new(&id, "processing_error", e.to_string()))
}

fn process_valid(bundle: TrialBundle, config: &PipelineConfig, rules: &Rules) -> Result<TrialResult> {
    let TrialBundle { meta, screenshot, html, ad_rects, fixations, clicks, cursor } = bundle;
    let seg = segment(&screenshot, &ad_rects, &config.segmentation)?;
    let cards = parse_doc_cards(&html, rules);
    let labels = label_sequence(&cards, rules);
    let bound = bind_trial(&meta.trial_id, &seg.spans, &labels, seg.column, &ad_rects, config.ad_iou_threshold)?;

    let typed_aois = bound.aois;
    let mut gap_aois = gapfill(&typed_aois)?;
    for a in &mut gap_aois {
        a.flavor = Flavor::TypedGapfill;
    }
    let hybrid_aois = pool_to_hybrid(&typed_aois);

    let p = &config.attribution;
    let click_status = is_main_axis_click(&typed_aois, &clicks, &ad_rects, &meta, p)?;
    let registration = gaze_cursor_registration(&meta.trial_id, &fixations, &clicks, &config.registration);
    let content_features = content_features(&typed_aois, &cards, &meta.query_text);

    let diagnostics = Diagnostics {
        bind_warnings: bound.warnings,
        tier_histogram: tier_histogram(&labels),
        n_doc_cards: cards.len(),
        n_spans: seg.spans.len(),
    };
    Ok(TrialResult {
        typed: FlavorOutput::compute(typed_aois, &meta, &fixations, &clicks, p)?,
        typed_gapfill: FlavorOutput::compute(gap_aois, &meta, &fixations, &clicks, p)?,
        organic_hybrid: FlavorOutput::compute(hybrid_aois, &meta, &fixations, &clicks, p)?,
        meta,
        column: seg.column,
        spans: seg.spans,
        ad_rects,
        click_status,
        registration,
        content_features,
        diagnostics,
        fixations,
        clicks,
        cursor,
    })
}

/// Reads and processes one trial directory.
pub fn process_trial_dir(dir: &Path, config: &PipelineConfig, rules: &Rules) -> std::result::Result<TrialResult, TrialFailure> {
    let fallback_id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let bundle = read_trial_dir(dir).map_err(|e| {
        let reason = if matches!(e, Error::MissingMeta(_)) { "trial_dropped" } else { "ingest_error" };
        TrialFailure::new(&fallback_id, reason, e.to_string())
    })?;
    process_bundle(bundle, config, rules)
}

/// Outcome of a corpus run, sorted by trial id.
#[derive(Debug, Clone, Default)]
pub struct CorpusRun {
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    /// Number of trials attempted.
    pub n_inputs: usize,
    /// Input directory of each processed trial, when read from disk.
    pub sources: BTreeMap<String, PathBuf>,
}

/// Sorted subdirectories of the input directory; each one is a trial.
pub fn trial_dirs(input_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(input_dir).map_err(|e| Error::io(input_dir, e))? {
        let entry = entry.map_err(|e| Error::io(input_dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn load_rules(config: &PipelineConfig) -> Result<Rules> {
    match &config.rules {
        Some(p) => Rules::load(p),
        None => Ok(Rules::default()),
    }
}

type Outcome = (Option<PathBuf>, std::result::Result<TrialResult, TrialFailure>);

fn sort_and_dedupe(results: Vec<Outcome>) -> CorpusRun {
    let mut run = CorpusRun { n_inputs: results.len(), ..Default::default() };
    for (src, r) in results {
        match r {
            Ok(t) => {
                if let Some(src) = src {
                    run.sources.entry(t.meta.trial_id.clone()).or_insert(src);
                }
                run.trials.push(t)
            }
            Err(f) => run.failures.push(f),
        }
    }
    run.trials.sort_by(|a, b| a.meta.trial_id.cmp(&b.meta.trial_id));
    let mut kept: Vec<TrialResult> = Vec::with_capacity(run.trials.len());
    for t in std::mem::take(&mut run.trials) {
        if kept.last().is_some_and(|k| k.meta.trial_id == t.meta.trial_id) {
            run.failures.push(TrialFailure::new(&t.meta.trial_id, "processing_error", "duplicate trial_id"));
        } else {
            kept.push(t);
        }
    }
    run.trials = kept;
    run.failures.sort_by(|a, b| (&a.trial_id, &a.reason, &a.detail).cmp(&(&b.trial_id, &b.reason, &b.detail)));
    run
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Processes every trial directory under `input_dir` on `config.jobs`
/// workers. The result does not depend on the worker count.
pub fn run_corpus(input_dir: &Path, config: &PipelineConfig) -> Result<CorpusRun> {
    let rules = load_rules(config)?;
    let dirs = trial_dirs(input_dir)?;
    if dirs.is_empty() {
        log::warn!("no trial directories under {}", input_dir.display());
    }
    let results = pool(config.jobs)?.install(|| {
        dirs.par_iter().map(|d| (Some(d.clone()), process_trial_dir(d, config, &rules))).collect::<Vec<_>>()
    });
    Ok(sort_and_dedupe(results))
}

/// Same as [`run_corpus`] for bundles already in memory.
pub fn run_bundles(bundles: Vec<TrialBundle>, config: &PipelineConfig, rules: &Rules) -> Result<CorpusRun> {
    let results = pool(config.jobs)?.install(|| {
        bundles.into_par_iter().map(|b| (None, process_bundle(b, config, rules))).collect::<Vec<_>>()
    });
    Ok(sort_and_dedupe(results))
}
