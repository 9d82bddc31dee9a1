//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measured runtime and budget, then asserts. Criteria hold a global lock so
//! runtimes are not inflated by each other on small machines.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use chrono::{Duration as Hours, TimeZone, Utc};
use debris_ews::baselines::ThresholdTable;
use debris_ews::dataset::{split_windows, Dataset, FeatureSpec, LabelingConfig, WindowConfig};
use debris_ews::explain::{background_sample, brute_shap, explain_rows, tree_shap};
use debris_ews::metrics::{
    auc, auprc, auroc, block_bootstrap_ci, capture_thresholds, event_capture, point_metrics,
    pr_curve, roc_curve, BootstrapConfig, ConfusionCounts, ScoredWindow, Statistic,
};
use debris_ews::models::{
    fit_forest, fit_forest_weighted, fit_gbt, fit_logistic, fit_model, grid_search_cv,
    predict_proba, ForestParams, GbtParams, GridSpec, LogisticParams, Model, ModelDocument,
    ModelSpec, Penalty,
};
use debris_ews::pipeline::{
    corpus_windows, etm_sweep_curves, hm_sweep_curves, model_scores, pooled, CorpusWindows,
};
use debris_ews::rainfall::{
    ear_trace, segment_events, DailyWindowMode, EarParams, EventParams, RainSeries,
};
use debris_ews::synth::{generate_corpus, SynthConfig};
use debris_ews::FeatureMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

static LOCK: Mutex<()> = Mutex::new(());

/// Runs one criterion: `body` returns whether it passed and a one-line summary.
fn criterion(id: u32, title: &str, budget_s: u64, body: impl FnOnce() -> (bool, String)) {
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (ok, detail) = body();
    let took = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    let pass = ok && took <= budget;
    // Straight to stderr so the line shows even when the harness captures output.
    let _ = writeln!(
        std::io::stderr(),
        "acceptance {id:>2} {} {title}: {detail} [{:.1} s of {budget_s} s]",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(took <= budget, "criterion {id} over budget: {took:?}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The default seed-42 corpus, windowed and split once.
struct Corpus {
    windows: CorpusWindows,
    train: Vec<usize>,
    test: Vec<usize>,
    table: ThresholdTable,
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let cfg = SynthConfig {
            seed: 42,
            ..SynthConfig::default()
        };
        let c = generate_corpus(&cfg).unwrap();
        let windows = corpus_windows(&c.series, &c.events, &WindowConfig::default()).unwrap();
        let (train, test) = split_windows(&windows.windows, 0.15, 42).unwrap();
        Corpus {
            windows,
            train,
            test,
            table: c.thresholds,
        }
    })
}

/// A small forest on the corpus at 12 hourly lags, shared by the SHAP and
/// event-capture criteria.
fn small_forest() -> &'static (Model, FeatureSpec) {
    static M: OnceLock<(Model, FeatureSpec)> = OnceLock::new();
    M.get_or_init(|| {
        let c = corpus();
        let spec = FeatureSpec::hourly(12);
        let data = Dataset::build(
            &c.windows.select(&c.train),
            &spec,
            &LabelingConfig::default(),
        )
        .unwrap();
        let params = ModelSpec::RandomForest(ForestParams {
            n_trees: 20,
            min_samples_leaf: 4,
            ..ForestParams::default()
        });
        let model = fit_model(&params, &data.matrix(), &data.labels(), 42).unwrap();
        (model, spec)
    })
}

/// EAR by direct summation: accumulated event rain plus each earlier hour
/// weighted by alpha to the number of days between it and the event start.
fn ear_oracle(
    values: &[f64],
    start: chrono::DateTime<Utc>,
    ev_start: usize,
    t: usize,
    mode: DailyWindowMode,
) -> f64 {
    let alpha: f64 = 0.7;
    let current: f64 = values[ev_start..=t].iter().sum();
    let mut antecedent = 0.0;
    for (j, v) in values.iter().enumerate().take(ev_start) {
        let day = match mode {
            DailyWindowMode::CalendarDay => {
                let a = (start + Hours::hours(ev_start as i64)).date_naive();
                let b = (start + Hours::hours(j as i64)).date_naive();
                (a - b).num_days()
            }
            DailyWindowMode::Rolling24h => (ev_start - j - 1) as i64 / 24 + 1,
        };
        if (1..=7).contains(&day) {
            antecedent += alpha.powi(day as i32) * v;
        }
    }
    current + antecedent
}

fn random_rain(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    let mut i = 0;
    while i < len {
        if r.random_bool(0.06) {
            let dur = r.random_range(1..30);
            for x in v.iter_mut().skip(i).take(dur) {
                *x = (r.random_range(0.0..18.0_f64) * 2.0).round() / 2.0;
            }
            i += dur;
        } else {
            i += 1;
        }
    }
    v
}

#[test]
fn c01_ear_matches_direct_summation() {
    criterion(1, "EAR oracle", 5, || {
        let mut r = rng(1);
        let mut worst: f64 = 0.0;
        let mut traces = 0;
        for _ in 0..200 {
            let len = r.random_range(24 * 8..24 * 30);
            let start = Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()
                + Hours::hours(r.random_range(0..24));
            let values = random_rain(&mut r, len);
            let s = RainSeries::new("S", start, values.clone()).unwrap();
            for mode in [DailyWindowMode::CalendarDay, DailyWindowMode::Rolling24h] {
                let params = EarParams { alpha: 0.7, mode };
                for ev in segment_events(&s, EventParams::default()) {
                    let tr = ear_trace(&s, ev, params).unwrap();
                    for (k, e) in tr.ear.iter().enumerate() {
                        let o = ear_oracle(&values, start, ev.start_idx, ev.start_idx + k, mode);
                        worst = worst.max((e - o).abs());
                    }
                    traces += 1;
                }
            }
        }
        // 10 mm on the previous calendar day, then a 20 mm event.
        let mut v = vec![0.0; 48];
        v[5] = 10.0;
        v[30] = 12.0;
        v[31] = 8.0;
        let s =
            RainSeries::new("W", Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap(), v).unwrap();
        let ev = *segment_events(&s, EventParams::default()).last().unwrap();
        let worked = ear_trace(&s, ev, EarParams::default()).unwrap().max_ear();
        let ok = traces > 500 && worst <= 1e-9 && (worked - 27.0).abs() <= 1e-9;
        (ok, format!("{traces} traces, max |ear - oracle| = {worst:.1e}, worked example {worked} mm (want 27)"))
    });
}

#[test]
fn c02_segmentation_properties() {
    criterion(2, "segmentation properties", 10, || {
        let mut r = rng(2);
        let p = EventParams::default();
        let mut failures = Vec::new();
        let mut total = 0;
        for case in 0..1000 {
            let len = r.random_range(1..400);
            // Values cluster around the 4 mm threshold, including exactly 4.
            let values: Vec<f64> = (0..len)
                .map(|_| match r.random_range(0..5) {
                    0 => 4.0,
                    1 => r.random_range(4.0..20.0),
                    _ => r.random_range(0.0..4.0),
                })
                .collect();
            let s = RainSeries::new(
                "S",
                Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
                values.clone(),
            )
            .unwrap();
            let ev = segment_events(&s, p);
            total += ev.len();
            let mut bad = |m: &str| failures.push(format!("case {case}: {m}"));
            if ev != segment_events(&s, p) {
                bad("not deterministic");
            }
            for e in &ev {
                if values[e.start_idx] <= 4.0 || values[e.end_idx] <= 4.0 {
                    bad("endpoint not above 4 mm");
                }
                let mut run = 0;
                for &v in &values[e.start_idx..=e.end_idx] {
                    run = if v <= 4.0 { run + 1 } else { 0 };
                    if run >= 6 {
                        bad("6-h quiet run inside an event");
                        break;
                    }
                }
            }
            for w in ev.windows(2) {
                if w[1].start_idx <= w[0].end_idx {
                    bad("events overlap or are out of order");
                } else if w[1].start_idx - w[0].end_idx - 1 < 6 {
                    bad("gap shorter than 6 h");
                }
            }
            for (i, &v) in values.iter().enumerate() {
                if v > 4.0 && !ev.iter().any(|e| e.contains(i)) {
                    bad("wet hour outside every event");
                    break;
                }
            }
        }
        (
            failures.is_empty(),
            format!(
                "1000 series, {total} events, {} violations {:?}",
                failures.len(),
                failures.first()
            ),
        )
    });
}

/// `(threshold, tp, fp)` at every distinct score, by brute force.
fn enumerate_thresholds(scores: &[f64], labels: &[u8]) -> Vec<(f64, u64, u64)> {
    let mut thr: Vec<f64> = scores.to_vec();
    thr.sort_by(|a, b| b.total_cmp(a));
    thr.dedup();
    thr.iter()
        .map(|&t| {
            let tp = scores
                .iter()
                .zip(labels)
                .filter(|(s, &y)| **s >= t && y == 1)
                .count() as u64;
            let fp = scores
                .iter()
                .zip(labels)
                .filter(|(s, &y)| **s >= t && y == 0)
                .count() as u64;
            (t, tp, fp)
        })
        .collect()
}

#[test]
fn c03_metrics_match_oracles() {
    criterion(3, "metrics oracle", 30, || {
        let mut r = rng(3);
        let mut failures = Vec::new();
        let mut identities = 0;
        for case in 0..500 {
            let n = r.random_range(2..300);
            let tied = r.random_bool(0.5);
            let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.3))).collect();
            labels[0] = 1;
            labels[1] = 0;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    if tied {
                        r.random_range(0..6) as f64 / 5.0
                    } else {
                        r.random::<f64>()
                    }
                })
                .collect();
            let (p, m) = (
                labels.iter().filter(|&&y| y == 1).count(),
                labels.iter().filter(|&&y| y == 0).count(),
            );
            let mut twice = 0u64;
            for (si, yi) in scores.iter().zip(&labels) {
                for (sj, yj) in scores.iter().zip(&labels) {
                    if *yi == 1 && *yj == 0 {
                        twice += if si > sj {
                            2
                        } else if si == sj {
                            1
                        } else {
                            0
                        };
                    }
                }
            }
            let mw = twice as f64 / (2 * p * m) as f64;
            let a = auroc(&scores, &labels).unwrap();
            if a.to_bits() != mw.to_bits() {
                failures.push(format!("case {case}: auroc {a} vs {mw}"));
            }
            let brute = enumerate_thresholds(&scores, &labels);
            let roc = roc_curve(&scores, &labels).unwrap();
            let got: Vec<(f64, u64, u64)> = roc
                .points
                .iter()
                .filter(|q| q.threshold.is_finite())
                .map(|q| (q.threshold, q.tp, q.fp))
                .collect();
            if got != brute {
                failures.push(format!("case {case}: ROC points differ"));
            }
            let pr = pr_curve(&scores, &labels).unwrap();
            let want: Vec<(f64, f64)> = brute
                .iter()
                .map(|&(_, tp, fp)| (tp as f64 / p as f64, tp as f64 / (tp + fp) as f64))
                .collect();
            let got: Vec<(f64, f64)> = pr.points.iter().map(|q| (q.x, q.y)).collect();
            if got != want {
                failures.push(format!("case {case}: PR points differ"));
            }
            for &(_, tp, fp) in &brute {
                let c = ConfusionCounts::from_totals(tp, fp, p as u64, m as u64);
                let pm = point_metrics(&c);
                let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(a), Some(b)) => (a - (1.0 - b)).abs() <= 1e-12,
                    (None, None) => true,
                    _ => false,
                };
                if !(close(pm.fnr, pm.recall)
                    && close(pm.fdr, pm.precision)
                    && close(pm.specificity, pm.fpr))
                {
                    failures.push(format!(
                        "case {case}: rate identity broken at tp={tp} fp={fp}"
                    ));
                }
                identities += 1;
            }
        }
        (
            failures.is_empty(),
            format!(
                "500 sets, {identities} confusion matrices, {} failures {:?}",
                failures.len(),
                failures.first()
            ),
        )
    });
}

#[test]
fn c04_no_skill_calibration() {
    criterion(4, "no-skill calibration", 10, || {
        let mut r = rng(4);
        let n = 50_000;
        let scores: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        // Labels that tracked the scores, then shuffled away from them.
        let mut labels: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.9)).collect();
        labels.shuffle(&mut r);
        let prevalence = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
        let a = auroc(&scores, &labels).unwrap();
        let p = auprc(&scores, &labels).unwrap();
        let ok = (a - 0.5).abs() <= 0.02 && (p - prevalence).abs() <= 0.02;
        (
            ok,
            format!(
                "AUROC {a:.4} (0.5 +- 0.02), AUPRC {p:.4} vs prevalence {prevalence:.4} (+- 0.02)"
            ),
        )
    });
}

#[test]
fn c05_shap_exactness() {
    criterion(5, "SHAP exactness", 120, || {
        let mut r = rng(5);
        let mut worst: f64 = 0.0;
        for case in 0..100u64 {
            let d = r.random_range(1..=5);
            let n = r.random_range(10..80);
            let levels = r.random_range(2..8);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| r.random_range(0..levels) as f64).collect())
                .collect();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.4))).collect();
            y[0] = 1;
            y[1] = 0;
            let x = FeatureMatrix::from_rows(&rows).unwrap();
            let params = ForestParams {
                n_trees: r.random_range(1..6),
                max_depth: [Some(2), Some(3), Some(5), None][r.random_range(0..4)],
                max_features: Some(r.random_range(1..=d)),
                ..ForestParams::default()
            };
            let forest = fit_forest(&x, &y, &params, case).unwrap();
            let (bg, _) = background_sample(&x, r.random_range(1..=64), case);
            let model = Model::RandomForest(forest.clone());
            for i in 0..3 {
                let row = x.row((i * 7) % n);
                let fast = tree_shap(&forest, row, &bg).unwrap();
                let slow = brute_shap(&model, row, &bg).unwrap();
                worst = worst.max((fast.base - slow.base).abs());
                for (a, b) in fast.values.iter().zip(&slow.values) {
                    worst = worst.max((a - b).abs());
                }
            }
        }

        let c = corpus();
        let (model, spec) = small_forest();
        let Model::RandomForest(forest) = model else {
            unreachable!()
        };
        let lab = LabelingConfig::default();
        let train = Dataset::build(&c.windows.select(&c.train), spec, &lab).unwrap();
        let test = Dataset::build(&c.windows.select(&c.test), spec, &lab).unwrap();
        let (bg, _) = background_sample(&train.matrix(), 64, 42);
        let x = test.matrix();
        let attr = explain_rows(forest, &x, &bg).unwrap();
        let preds = predict_proba(model, &x).unwrap();
        let local = attr
            .iter()
            .zip(&preds)
            .map(|(a, p)| (a.total() - p).abs())
            .fold(0.0, f64::max);
        let ok = worst <= 1e-9 && local <= 1e-9;
        (
            ok,
            format!(
                "100 forests max |tree - brute| = {worst:.1e}; local accuracy over {} test rows max err {local:.1e}",
                x.n_rows()
            ),
        )
    });
}

fn random_dataset(r: &mut ChaCha8Rng, n: usize, d: usize) -> (FeatureMatrix, Vec<u8>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect())
        .collect();
    let y: Vec<u8> = rows
        .iter()
        .map(|row| {
            let z: f64 = r.sample(StandardNormal);
            u8::from(row[0] + 0.5 * row[d - 1] + z > 0.0)
        })
        .collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn c06_determinism_and_invariances() {
    criterion(6, "model determinism and invariances", 60, || {
        let mut r = rng(6);
        let mut failures = Vec::new();
        let specs = [
            ModelSpec::RandomForest(ForestParams {
                n_trees: 10,
                ..ForestParams::default()
            }),
            ModelSpec::GradientBoosting(GbtParams {
                n_rounds: 10,
                ..GbtParams::default()
            }),
            ModelSpec::Logistic(LogisticParams::default()),
        ];
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        for case in 0..50u64 {
            let n = r.random_range(40..200);
            let d = r.random_range(2..8);
            let (x, y) = random_dataset(&mut r, n, d);
            for spec in &specs {
                let a =
                    ModelDocument::new(fit_model(spec, &x, &y, case).unwrap(), case, None, vec![]);
                let b = pool.install(|| fit_model(spec, &x, &y, case).unwrap());
                let b = ModelDocument::new(b, case, None, vec![]);
                if a.to_json().unwrap() != b.to_json().unwrap() {
                    failures.push(format!("case {case}: {spec:?} not reproducible"));
                }
            }

            // Scaling every weight by a power of two leaves trees unchanged;
            // the unpenalized logistic fit changes only within solver tolerance.
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
            let k = [0.25, 8.0, 1024.0][case as usize % 3];
            let wk: Vec<f64> = w.iter().map(|v| v * k).collect();
            let fp = ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            };
            let f1 = Model::RandomForest(fit_forest_weighted(&x, &y, &w, &fp, case).unwrap());
            let f2 = Model::RandomForest(fit_forest_weighted(&x, &y, &wk, &fp, case).unwrap());
            let gp = GbtParams {
                n_rounds: 5,
                lambda: 0.0,
                min_child_weight: 0.0,
                ..GbtParams::default()
            };
            let g1 = Model::GradientBoosting(fit_gbt(&x, &y, &w, &gp).unwrap());
            let g2 = Model::GradientBoosting(fit_gbt(&x, &y, &wk, &gp).unwrap());
            for (name, m1, m2) in [("forest", &f1, &f2), ("boosting", &g1, &g2)] {
                if predict_proba(m1, &x).unwrap() != predict_proba(m2, &x).unwrap() {
                    failures.push(format!("case {case}: {name} changed under weight scaling"));
                }
            }
            let lp = LogisticParams {
                penalty: Penalty::None,
                ..LogisticParams::default()
            };
            let l1 = Model::Logistic(fit_logistic(&x, &y, &w, &lp).unwrap());
            let l2 = Model::Logistic(fit_logistic(&x, &y, &wk, &lp).unwrap());
            let gap = predict_proba(&l1, &x)
                .unwrap()
                .iter()
                .zip(predict_proba(&l2, &x).unwrap())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > 1e-6 {
                failures.push(format!(
                    "case {case}: logistic moved {gap:.1e} under weight scaling"
                ));
            }

            // Rescaling features by positive factors leaves tree predictions unchanged.
            let factors: Vec<f64> = (0..d)
                .map(|_| 10f64.powf(r.random_range(-2.0..2.0)))
                .collect();
            let mut xs = x.clone();
            for i in 0..n {
                for (j, f) in factors.iter().enumerate() {
                    xs.set(i, j, x.get(i, j) * f);
                }
            }
            for spec in &specs[..2] {
                let m1 = fit_model(spec, &x, &y, case).unwrap();
                let m2 = fit_model(spec, &xs, &y, case).unwrap();
                if predict_proba(&m1, &x).unwrap() != predict_proba(&m2, &xs).unwrap() {
                    failures.push(format!(
                        "case {case}: {spec:?} changed under feature scaling"
                    ));
                }
            }
        }
        (
            failures.is_empty(),
            format!(
                "50 datasets x 3 model kinds, {} failures {:?}",
                failures.len(),
                failures.first()
            ),
        )
    });
}

#[test]
fn c07_forest_beats_threshold_baselines() {
    criterion(7, "forest beats threshold baselines", 300, || {
        let c = corpus();
        let lab = LabelingConfig::default();
        let spec = FeatureSpec::hourly(48);
        let train = c.windows.select(&c.train);
        let test = c.windows.select(&c.test);
        let grid = GridSpec::forest(
            &[10, 40],
            &[Some(6), Some(15), None],
            &[1, 4],
            ForestParams::default(),
        );
        let cv = grid_search_cv(&train, &spec, &lab, &grid, 3, 42).unwrap();
        let best = cv.best_cell().spec;
        let data = Dataset::build(&train, &spec, &lab).unwrap();
        let model = fit_model(&best, &data.matrix(), &data.labels(), 42).unwrap();
        let (s, y) = pooled(&model_scores(&model, &test, &spec, &lab).unwrap());
        let rf = auprc(&s, &y).unwrap();
        let policy = Default::default();
        let (_, hm_pr) = hm_sweep_curves(&test, &lab, 2000, policy).unwrap();
        let (_, etm_pr) = etm_sweep_curves(&c.table, &test, &lab, 0.001, policy).unwrap();
        let (hm, etm) = (auc(&hm_pr), auc(&etm_pr));
        let (pos, neg) = c.windows.count();
        let ok = rf >= hm + 0.05 && rf >= etm + 0.05;
        (
            ok,
            format!(
                "{pos}+{neg} windows; RF AUPRC {rf:.3} vs HM {hm:.3}, ETM {etm:.3} (margin 0.05); selected {best:?}"
            ),
        )
    });
}

#[test]
fn c08_cv_score_grows_with_record_length() {
    criterion(8, "CV AUPRC across record lengths", 600, || {
        let c = corpus();
        let lab = LabelingConfig::default();
        let train = c.windows.select(&c.train);
        let grid = GridSpec {
            cells: vec![ModelSpec::RandomForest(ForestParams {
                n_trees: 40,
                min_samples_leaf: 4,
                ..ForestParams::default()
            })],
        };
        let mut rows = Vec::new();
        for h in [6, 12, 24, 48] {
            let res = grid_search_cv(&train, &FeatureSpec::hourly(h), &lab, &grid, 10, 42).unwrap();
            let cell = res.best_cell();
            let k = cell.fold_auprc.iter().flatten().count() as f64;
            rows.push((h, cell.mean_auprc, cell.std_auprc, k));
        }
        let mut ok = true;
        let mut parts = Vec::new();
        for w in rows.windows(2) {
            let (_, m0, s0, k0) = w[0];
            let (h1, m1, s1, k1) = w[1];
            // Standard error of a mean of fold scores, pooled over the two lengths.
            let se = ((s0 * s0 + s1 * s1) / 2.0).sqrt() / ((k0 + k1) / 2.0).sqrt();
            ok &= m1 >= m0 - se;
            parts.push(format!("H{h1} {m1:.3} (prev - SE {:.3})", m0 - se));
        }
        (ok, format!("H6 {:.3}; {}", rows[0].1, parts.join(", ")))
    });
}

/// `Phi(x)` by Simpson integration of the standard normal density.
fn normal_cdf(x: f64) -> f64 {
    let (a, n) = (-12.0, 200_000);
    let h = (x - a) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(a) + pdf(x);
    for i in 1..n {
        s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn c09_bootstrap_ci() {
    criterion(9, "bootstrap CI", 300, || {
        let mut r = rng(9);
        let make = |r: &mut ChaCha8Rng| -> Vec<ScoredWindow> {
            (0..30)
                .map(|_| {
                    let labels: Vec<u8> = (0..40).map(|_| u8::from(r.random_bool(0.3))).collect();
                    let scores = labels
                        .iter()
                        .map(|&y| y as f64 + r.sample::<f64, _>(StandardNormal))
                        .collect();
                    ScoredWindow { scores, labels }
                })
                .collect()
        };
        let cfg = BootstrapConfig {
            statistic: Statistic::Auroc,
            block_hours: 6,
            replicates: 1000,
            level: 0.95,
            seed: 9,
        };
        let sample = make(&mut r);
        let a = block_bootstrap_ci(&sample, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| block_bootstrap_ci(&sample, &cfg).unwrap());
        let deterministic = a == b;

        // Every hour of a window is identical, so every resample is the sample.
        let flat = vec![
            ScoredWindow {
                scores: vec![0.9; 12],
                labels: vec![1; 12],
            },
            ScoredWindow {
                scores: vec![0.2; 12],
                labels: vec![0; 12],
            },
            ScoredWindow {
                scores: vec![0.4; 7],
                labels: vec![0; 7],
            },
        ];
        let z = block_bootstrap_ci(&flat, &cfg).unwrap();
        let zero_width = z.lower == z.upper;

        let truth = normal_cdf(std::f64::consts::FRAC_1_SQRT_2);
        let mut covered = 0;
        for _ in 0..100 {
            let ci = block_bootstrap_ci(&make(&mut r), &cfg).unwrap();
            covered += usize::from(ci.lower <= truth && truth <= ci.upper);
        }
        let ok = deterministic && zero_width && covered >= 85;
        (
            ok,
            format!(
                "deterministic {deterministic}, degenerate width {}, coverage {covered}/100 of AUROC {truth:.4}",
                z.upper - z.lower
            ),
        )
    });
}

#[test]
fn c10_event_capture_monotone() {
    criterion(10, "event capture", 60, || {
        let c = corpus();
        let (model, spec) = small_forest();
        let test = c.windows.select(&c.test);
        let scores = model_scores(model, &test, spec, &LabelingConfig::default()).unwrap();
        let windows: Vec<(Option<usize>, &[f64])> = scores
            .iter()
            .map(|w| (w.flow, w.scores.as_slice()))
            .collect();
        let flows = windows.iter().filter(|w| w.0.is_some()).count();
        let rows = event_capture(&windows, &capture_thresholds(), 12).unwrap();
        let monotone = rows.windows(2).all(|w| w[1].captured <= w[0].captured);
        let top = scores
            .iter()
            .flat_map(|w| w.scores.iter().copied())
            .fold(0.0, f64::max);
        let last = rows.last().unwrap().captured;
        let ok =
            rows.len() == 101 && monotone && rows[0].captured == flows && (top >= 1.0 || last == 0);
        (
            ok,
            format!(
                "{flows} flows; captured {} at 0.00, {} at 0.50, {last} at 1.00 (max score {top:.3}); non-increasing {monotone}",
                rows[0].captured, rows[50].captured
            ),
        )
    });
}

#[test]
fn c11_repro_script_operating_points() {
    criterion(11, "reproduction script and operating points", 600, || {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
        let out = tempfile::tempdir().unwrap();
        let status = Command::new("bash")
            .arg(root.join("repro.sh"))
            .arg(out.path())
            .env("DEBRIS_EWS_BIN", env!("CARGO_BIN_EXE_debris-ews"))
            .env("DEBRIS_EWS_LOG", "warn")
            .status()
            .unwrap();
        if !status.success() {
            return (false, format!("repro.sh exited with {status}"));
        }
        let table =
            std::fs::read_to_string(out.path().join("table2_operating_points.csv")).unwrap();
        let scorers = ["random_forest,", "hm,", "etm,", "etm_official,"];
        let has_all = scorers
            .iter()
            .all(|s| table.lines().any(|l| l.starts_with(s)));
        let infeasible = table.lines().filter(|l| l.contains(",infeasible,")).count();
        let hm_infeasible = table
            .lines()
            .filter(|l| l.starts_with("hm,precision,") && l.contains(",infeasible,"))
            .count();
        let files = [
            "fig2_curves.csv",
            "fig3_importance.csv",
            "fig4_training_weight.csv",
            "fig5_event_capture.csv",
            "table1_cv_by_hours.csv",
            "bootstrap_ci.csv",
        ];
        let missing: Vec<&str> = files
            .iter()
            .copied()
            .filter(|f| !out.path().join(f).is_file())
            .collect();
        let ok = has_all && infeasible > 0 && missing.is_empty();
        (
            ok,
            format!(
                "{} operating points, {infeasible} infeasible ({hm_infeasible} HM precision targets); missing {missing:?}",
                table.lines().count() - 1
            ),
        )
    });
}
