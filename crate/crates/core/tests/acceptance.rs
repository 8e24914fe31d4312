//! Acceptance suite. Prints one `[PASS]`, `[FAIL]` or `[SKIP]` line per
//! criterion and exits non-zero when any criterion fails.
//!
//! The corpus replication tier reads a trial-directory corpus from
//! `ALLSERP_ADSERP_DIR` and is skipped when the variable is unset.

mod common;

use std::path::Path;
use std::time::Instant;

use allserp_core::attribution::{attribute_point, AttributionParams, ClickReason};
use allserp_core::config::PipelineConfig;
use allserp_core::emit::{aoi_rows, run_summary, write_build_outputs, Provenance};
use allserp_core::gapfill::gapfill;
use allserp_core::inventory::{
    ad_consistency_audit, aggregate_registration, audit_trials, etype_inventory, gaze_cursor_registration,
    position_click_rates, spearman, AuditInput, PositionConvention, RegistrationParams,
};
use allserp_core::model::{ClickEvent, Etype, FixationEvent, Flavor, TypedAoi};
use allserp_core::pipeline::{process_bundle, run_bundles, run_corpus, CorpusRun};
use allserp_core::rules::Rules;
use allserp_core::synth::{synth_corpus, write_synth_corpus, GroundTruth};

use common::*;

// Pinned tolerances.
const NOISY_EDGE_PX: i64 = 3;
const NOISY_ETYPE_ACCURACY: f64 = 0.99;
const E2E_BUDGET_SECS: f64 = 60.0;
const REGISTRATION_EXAMPLE_TOL: f64 = 1e-9;
const SPEARMAN_TOL: f64 = 1e-12;
const AUDIT_IOU_TOL: f64 = 1e-12;
const N_LAYOUTS: u64 = 10_000;
const N_POINT_PAIRS: u64 = 10_000;

// Corpus replication targets.
const ADSERP_TRIALS: usize = 2_775;
const ADSERP_GAPFILL_ROWS: usize = 37_142;
const ADSERP_FLAGGED: (usize, usize, usize) = (67, 91, 73);
const ADSERP_ATTRIBUTION_PCT: f64 = 91.7;
const ADSERP_PCT_TOL: f64 = 0.5;
/// n_aois, fixated %, n_clicks, click %, regressive %, above-fold %.
const ADSERP_ORGANIC_ROW: (usize, f64, usize, f64, f64, f64) = (22_346, 55.6, 2_084, 79.1, 57.8, 97.3);
const ADSERP_REG_MEDIAN: f64 = 128.8;
const ADSERP_REG_TOL: f64 = 2.0;
const ADSERP_RHO: (f64, f64) = (-0.624, -0.939);
const ADSERP_RHO_TOL: f64 = 0.02;

type Criterion = (&'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn run_synth(n: usize, seed: u64, sigma: f64) -> (CorpusRun, Vec<GroundTruth>) {
    let (bundles, truths): (Vec<_>, Vec<_>) = synth_corpus(n, seed, sigma).unwrap().into_iter().unzip();
    let run = run_bundles(bundles, &PipelineConfig::default(), &Rules::default()).unwrap();
    (run, truths)
}

fn end_to_end_noise_free() -> Outcome {
    let corpus = synth_corpus(200, 2024, 0.0).unwrap();
    let config = PipelineConfig { jobs: 1, ..Default::default() };
    let rules = Rules::default();
    let start = Instant::now();
    let (mut rows, mut etype_ok, mut pos_ok, mut exact, mut failed) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (bundle, gt) in corpus {
        let Ok(t) = process_bundle(bundle, &config, &rules) else {
            failed += 1;
            continue;
        };
        for f in Flavor::ALL {
            let got = aoi_rows(&t, f);
            let exp = &gt.flavors[&f];
            rows += exp.len();
            if got.len() != exp.len() {
                continue;
            }
            for (g, r) in exp.iter().zip(&got) {
                etype_ok += (g.etype == r.etype) as usize;
                pos_ok += (g.position == r.position) as usize;
                let same_box = (g.x, g.y, g.w, g.h) == (r.x, r.y, r.w, r.h);
                let same_behavior = (g.n_fixations, g.regressive, g.above_fold, g.n_clicks_attributed)
                    == (r.n_fixations, r.regressive, r.above_fold, r.n_clicks_attributed);
                exact += (same_box && same_behavior && g.source == r.source) as usize;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failed == 0 && etype_ok == rows && pos_ok == rows && exact == rows && secs <= E2E_BUDGET_SECS,
        format!("{rows} rows over 200 trials x 3 flavors; etype {etype_ok}, position {pos_ok}, exact box+behavior {exact}; {secs:.1}s single-threaded"),
    )
}

fn end_to_end_noisy() -> Outcome {
    let (run, truths) = run_synth(200, 4040, 4.0);
    let (mut rows, mut etype_ok, mut max_edge) = (0usize, 0usize, 0i64);
    let mut missing = 0usize;
    for (t, gt) in run.trials.iter().zip(&truths) {
        assert_eq!(t.meta.trial_id, gt.trial_id);
        let got = aoi_rows(t, Flavor::Typed);
        let exp = &gt.flavors[&Flavor::Typed];
        rows += exp.len();
        if got.len() != exp.len() {
            missing += exp.len();
            continue;
        }
        for (g, r) in exp.iter().zip(&got) {
            etype_ok += (g.etype == r.etype) as usize;
            let edge = [(g.x - r.x).abs(), (g.y - r.y).abs(), (g.x + g.w - r.x - r.w).abs(), (g.y + g.h - r.y - r.h).abs()];
            max_edge = max_edge.max(edge.into_iter().max().unwrap());
        }
    }
    let acc = etype_ok as f64 / rows.max(1) as f64;
    check(
        run.failures.is_empty() && missing == 0 && max_edge <= NOISY_EDGE_PX && acc >= NOISY_ETYPE_ACCURACY,
        format!("sigma=4: {rows} rows, max edge error {max_edge}px (<= {NOISY_EDGE_PX}), etype accuracy {:.2}% (>= {}%), {missing} rows unmatched", acc * 100.0, NOISY_ETYPE_ACCURACY * 100.0),
    )
}

fn ad_consistency() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (seed, sigma) in [(11u64, 0.0), (12, 4.0)] {
        let (run, _) = run_synth(100, seed, sigma);
        let a = audit_trials(&run.trials, 0.5);
        let mean = a.mean_iou.unwrap_or(0.0);
        ok &= a.n_disagreements == 0 && (mean - 1.0).abs() <= AUDIT_IOU_TOL && a.n_organic_overlapping_ads == 0;
        details.push(format!(
            "sigma={sigma}: {} rects, {} disagreements, mean IoU {mean:.3}, {} organic overlaps",
            a.n_classifications, a.n_disagreements, a.n_organic_overlapping_ads
        ));
    }
    // Shift one shipped native_ad rect (h = 80) down by 30 px.
    let (run, _) = run_synth(200, 13, 0.0);
    let t = run
        .trials
        .iter()
        .find(|t| t.ad_rects.iter().any(|r| r.etype == Etype::NativeAd))
        .expect("a native ad in 200 trials");
    let mut rects = t.ad_rects.clone();
    let k = rects.iter().position(|r| r.etype == Etype::NativeAd).unwrap();
    rects[k].y += 30;
    let perturbed = ad_consistency_audit(
        [AuditInput { trial_id: &t.meta.trial_id, aois: &t.typed.aois, ad_rects: &rects }],
        0.5,
    );
    ok &= perturbed.n_disagreements == 1 && rects[k].h == 80;
    details.push(format!("+30px native_ad: {} disagreement", perturbed.n_disagreements));
    check(ok, details.join("; "))
}

fn gapfill_tiling() -> Outcome {
    let (mut violations, mut mismatches) = (0usize, 0usize);
    let mut first = None;
    for seed in 0..N_LAYOUTS {
        let blockers = seed % 2 == 1;
        let layout = random_layout(&mut seeded(seed), blockers);
        let out = gapfill(&layout).unwrap();
        let again = gapfill(&layout).unwrap();
        let mut back = out.clone();
        for a in &mut back {
            a.flavor = Flavor::Typed;
        }
        let twice: Vec<(i64, i64)> = gapfill(&back).unwrap().iter().map(|a| (a.y, a.h)).collect();
        let v = gapfill_violations(&layout, &out, &again, !blockers);
        let stable = twice == out.iter().map(|a| (a.y, a.h)).collect::<Vec<_>>();
        let brute: Vec<_> = brute_gapfill(&layout).iter().map(|a| (a.y, a.h, a.source)).collect();
        let got: Vec<_> = out.iter().map(|a| (a.y, a.h, a.source)).collect();
        violations += v.len() + (!stable) as usize;
        mismatches += (brute != got) as usize;
        if first.is_none() && (!v.is_empty() || !stable) {
            first = Some(format!("seed {seed}: {v:?}"));
        }
    }
    check(
        violations == 0 && mismatches == 0,
        format!("{N_LAYOUTS} layouts: {violations} violations, {mismatches} reference mismatches{}", first.map(|f| format!(", first {f}")).unwrap_or_default()),
    )
}

fn attribution_oracle() -> Outcome {
    let params = AttributionParams::default();
    let mut rng = seeded(0xA77);
    let (mut pairs, mut mismatches) = (0u64, 0u64);
    while pairs < N_POINT_PAIRS {
        let layout: Vec<TypedAoi> =
            random_layout(&mut rng, false).into_iter().filter(|a| a.etype.is_main_axis()).collect();
        for _ in 0..4 {
            let (x, y) = random_point(&mut rng, &layout);
            let got = attribute_point(&layout, x, y, &params).unwrap();
            mismatches += ((got.aoi_id, got.mode) != brute_attribute(&layout, x, y, TOL_X, TOL_Y)) as u64;
            pairs += 1;
        }
    }
    let mut partition_ok = true;
    let mut sizes = Vec::new();
    for (seed, sigma) in [(21u64, 0.0), (22, 4.0)] {
        let (run, _) = run_synth(100, seed, sigma);
        let s = run_summary(&run, Provenance::new(&PipelineConfig::default(), &Rules::default()));
        let total: usize = ClickReason::ALL.iter().map(|r| s.click_status[r]).sum();
        partition_ok &= total == run.trials.len();
        sizes.push(format!(
            "{}+{}+{}+{}={}",
            s.click_status[&ClickReason::Attributed],
            s.click_status[&ClickReason::DdRight],
            s.click_status[&ClickReason::ChromeOrFar],
            s.click_status[&ClickReason::NoClick],
            run.trials.len()
        ));
    }
    check(
        mismatches == 0 && partition_ok,
        format!("{pairs} (layout, point) pairs, {mismatches} mismatches; trial partition {}", sizes.join(", ")),
    )
}

fn registration_probe() -> Outcome {
    let fix = |x: f64, y: f64, start: i64, end: i64| FixationEvent { x, y, start, end };
    // Click at (400, 300) at t = 5000. The (410, 305) fixation has its
    // midpoint at 4600, inside the lead window; the closer one at 6000 and
    // the one ending at 3000 fall outside it.
    let fixations = [
        fix(410.0, 305.0, 4500, 4700),
        fix(460.0, 380.0, 4800, 4900),
        fix(400.0, 301.0, 5900, 6100),
        fix(401.0, 300.0, 2800, 3000),
    ];
    let clicks = [ClickEvent { t: 5000, x: 400.0, y: 300.0, is_final: true }];
    let rec = gaze_cursor_registration("example", &fixations, &clicks, &RegistrationParams::default()).unwrap();
    let d = rec.min_lead_distance.unwrap();
    let example_ok = (d - 125f64.sqrt()).abs() <= REGISTRATION_EXAMPLE_TOL && rec.n_in_window == 2;

    let (run, _) = run_synth(100, 31, 0.0);
    let params = RegistrationParams::default();
    let records: Vec<_> = run.trials.iter().filter_map(|t| t.registration.clone()).collect();
    let stats = aggregate_registration(&records, run.trials.len(), params.threshold_px);
    let mut mins = Vec::new();
    for t in &run.trials {
        if let Some(Some(m)) = brute_min_lead(&t.fixations, &t.clicks, params.window_ms) {
            mins.push(m);
        }
    }
    let same = |got: Option<f64>, p: f64| match (got, brute_nearest_rank(&mins, p)) {
        (Some(a), Some(b)) => (a - b).abs() <= REGISTRATION_EXAMPLE_TOL,
        (a, b) => a == b,
    };
    let flagged = mins.iter().filter(|&&m| m > params.threshold_px).count();
    let share = (!mins.is_empty()).then(|| flagged as f64 / mins.len() as f64);
    let agg_ok = same(stats.median, 50.0)
        && same(stats.p25, 25.0)
        && same(stats.p75, 75.0)
        && same(stats.p95, 95.0)
        && stats.n_flagged == flagged
        && stats.flagged_share == share
        && stats.n_included == mins.len();
    check(
        example_ok && agg_ok,
        format!(
            "example {d:.10} vs sqrt(125) {:.10}; 100 trials: median {:?}, IQR {:?}..{:?}, p95 {:?}, flagged {}/{}",
            125f64.sqrt(),
            stats.median,
            stats.p25,
            stats.p75,
            stats.p95,
            stats.n_flagged,
            stats.n_included
        ),
    )
}

fn spearman_checks() -> Outcome {
    let xs: Vec<f64> = (0..10).map(f64::from).collect();
    let up: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let down: Vec<f64> = xs.iter().map(|x| -x.powi(3)).collect();
    let extremes_ok = spearman(&xs, &up) == Some(1.0) && spearman(&xs, &down) == Some(-1.0);
    let mut rng = seeded(0x5EA);
    let mut worst: f64 = 0.0;
    let mut n_compared = 0;
    for i in 0..100 {
        let n = 3 + i % 30;
        let a = tied_vector(&mut rng, n);
        let b = tied_vector(&mut rng, n);
        if let Some(r) = spearman(&a, &b) {
            worst = worst.max((r - brute_spearman(&a, &b)).abs());
            n_compared += 1;
        }
    }
    check(
        extremes_ok && worst <= SPEARMAN_TOL && n_compared >= 90,
        format!("monotone +1/-1 {extremes_ok}; {n_compared} tied vector pairs, max deviation {worst:.2e}"),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_synth_corpus(&input, 40, 77, 3.0).unwrap();
    let emit = |jobs: usize, out: &Path| {
        let config = PipelineConfig { jobs, ..Default::default() };
        let run = run_corpus(&input, &config).unwrap();
        write_build_outputs(out, &run, &config, &Rules::default()).unwrap();
    };
    emit(1, &tmp.path().join("j1"));
    emit(8, &tmp.path().join("j8"));
    let a = read_tree(&tmp.path().join("j1"));
    let b = read_tree(&tmp.path().join("j8"));
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    check(
        a.len() == b.len() && differing.is_empty() && !a.is_empty(),
        format!("{} artifacts each, {} differ", a.len(), differing.len()),
    )
}

fn adserp_tier() -> Outcome {
    let Some(dir) = std::env::var_os("ALLSERP_ADSERP_DIR") else {
        return Outcome::Skip("ALLSERP_ADSERP_DIR not set".into());
    };
    let dir = Path::new(&dir);
    if !dir.is_dir() {
        return Outcome::Skip(format!("{} is not a directory", dir.display()));
    }
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let config = PipelineConfig { jobs, ..Default::default() };
    let run = match run_corpus(dir, &config) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("corpus run failed: {e}")),
    };
    let mut misses = Vec::new();
    let n = run.trials.len();
    if n != ADSERP_TRIALS {
        misses.push(format!("processed {n} != {ADSERP_TRIALS}"));
    }
    let rows: usize = run.trials.iter().map(|t| t.typed_gapfill.aois.len()).sum();
    if rows != ADSERP_GAPFILL_ROWS {
        misses.push(format!("typed_gapfill rows {rows} != {ADSERP_GAPFILL_ROWS}"));
    }
    let s = run_summary(&run, Provenance::new(&config, &Rules::default()));
    let split = (
        s.click_status[&ClickReason::DdRight],
        s.click_status[&ClickReason::ChromeOrFar],
        s.click_status[&ClickReason::NoClick],
    );
    if split != ADSERP_FLAGGED {
        misses.push(format!("flagged split {split:?} != {ADSERP_FLAGGED:?}"));
    }
    let attr = 100.0 * s.main_axis_click_share.unwrap_or(0.0);
    if (attr - ADSERP_ATTRIBUTION_PCT).abs() > ADSERP_PCT_TOL {
        misses.push(format!("attribution {attr:.2}% vs {ADSERP_ATTRIBUTION_PCT}%"));
    }
    let inv = etype_inventory(&run.trials, run.n_inputs);
    match inv.iter().find(|r| r.etype == Etype::Organic) {
        Some(o) => {
            let (n_aois, fix, n_clicks, click, reg, fold) = ADSERP_ORGANIC_ROW;
            let pct_ok = [(o.fixated_pct, fix), (o.click_pct, click), (o.regressive_pct, reg), (o.above_fold_pct, fold)]
                .iter()
                .all(|(a, b)| (a - b).abs() <= ADSERP_PCT_TOL);
            if o.n_aois != n_aois || o.n_clicks != n_clicks || !pct_ok {
                misses.push(format!(
                    "organic row ({}, {:.1}, {}, {:.1}, {:.1}, {:.1}) vs {ADSERP_ORGANIC_ROW:?}",
                    o.n_aois, o.fixated_pct, o.n_clicks, o.click_pct, o.regressive_pct, o.above_fold_pct
                ));
            }
        }
        None => misses.push("no organic row".into()),
    }
    let records: Vec<_> = run.trials.iter().filter_map(|t| t.registration.clone()).collect();
    let reg = aggregate_registration(&records, n, config.registration.threshold_px);
    match reg.median {
        Some(m) if (m - ADSERP_REG_MEDIAN).abs() <= ADSERP_REG_TOL => {}
        m => misses.push(format!("registration median {m:?} vs {ADSERP_REG_MEDIAN}")),
    }
    for (conv, want) in [(PositionConvention::OrganicOnly, ADSERP_RHO.0), (PositionConvention::AllMainAxis, ADSERP_RHO.1)] {
        let rho = position_click_rates(&run.trials, conv).rho;
        if !rho.is_some_and(|r| (r - want).abs() <= ADSERP_RHO_TOL) {
            misses.push(format!("{conv:?} rho {rho:?} vs {want}"));
        }
    }
    for f in &run.failures {
        eprintln!("    failed trial {}: {} ({})", f.trial_id, f.reason, f.detail);
    }
    check(misses.is_empty(), if misses.is_empty() { format!("{n} trials, {rows} rows") } else { misses.join("; ") })
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("end_to_end_noise_free", end_to_end_noise_free),
        ("end_to_end_sigma4", end_to_end_noisy),
        ("ad_consistency", ad_consistency),
        ("gapfill_tiling", gapfill_tiling),
        ("attribution_oracle", attribution_oracle),
        ("registration_probe", registration_probe),
        ("spearman", spearman_checks),
        ("determinism_jobs_1_vs_8", determinism),
        ("adserp_replication", adserp_tier),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Outcome::Pass(d) => println!("[PASS] {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("[FAIL] {name}: {d}");
            }
            Outcome::Skip(d) => println!("[SKIP] {name}: {d}"),
        }
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
