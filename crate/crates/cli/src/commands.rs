use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use debris_ews::baselines::{
    alert_window, for_each_etm_scale, for_each_hm_threshold, max_ear, pooled_confusion,
    sweep_curve, window_thresholds, TableKind, ThresholdTable,
};
use debris_ews::dataset::{
    label_hours, split_windows, Dataset, DatasetWindow, FeatureSpec, WindowManifestEntry,
};
use debris_ews::explain::{
    background_sample, explain_rows, importance_ranking, write_attributions, ImportanceMethod,
};
use debris_ews::io::{
    format_timestamp, read_events_csv, read_rainfall_csv, write_events, write_rainfall,
};
use debris_ews::metrics::{
    auc, block_bootstrap_ci, capture_thresholds, confusion, event_capture, operating_points,
    point_metrics, pr_curve, roc_curve, write_capture, write_operating_points, BootstrapConfig,
    ConfusionCounts, CurveKind, OperatingPoint, ScoredWindow, TargetKind,
};
use debris_ews::models::Model;
use debris_ews::models::{fit_model, grid_search_cv, ModelDocument};
use debris_ews::pipeline::{
    corpus_windows, etm_window_scores, hm_window_scores, model_scores, pooled, CorpusWindows,
    WindowScores,
};
use debris_ews::rainfall::{segment_events, EarProfile, RainSeries};
use debris_ews::synth::generate_corpus;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// `(threshold or scale, pooled confusion)` per sweep setting.
type Sweep = Vec<(f64, ConfusionCounts)>;

pub struct ScoreTarget {
    pub model_file: Option<PathBuf>,
    pub tag: Option<String>,
}

pub struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

/// Windows with the train/test split applied.
struct SplitCorpus {
    windows: CorpusWindows,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl SplitCorpus {
    fn train(&self) -> Vec<&DatasetWindow> {
        self.windows.select(&self.train)
    }

    fn test(&self) -> Vec<&DatasetWindow> {
        self.windows.select(&self.test)
    }
}

fn suffixed(stem: &str, tag: Option<&str>, ext: &str) -> String {
    match tag {
        Some(t) => format!("{stem}_{t}.{ext}"),
        None => format!("{stem}.{ext}"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", path.display())))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{what} not found at {}",
            path.display()
        )))
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn counts_json(c: &ConfusionCounts) -> serde_json::Value {
    json!({ "tp": c.tp, "fp": c.fp, "fn": c.fn_, "tn": c.tn })
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        let out = cfg.out_dir();
        Self { cfg, out }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = create(&self.path(name))?;
        serde_json::to_writer_pretty(&mut w, value)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn read_series(&self) -> Result<Vec<RainSeries>> {
        let p = self.cfg.rainfall_path();
        require(&p, "rainfall CSV")?;
        Ok(read_rainfall_csv(&p, self.cfg.inputs.impute_missing)?)
    }

    fn read_thresholds(&self) -> Result<ThresholdTable> {
        let p = self.cfg.thresholds_path();
        require(&p, "threshold table")?;
        Ok(ThresholdTable::read_csv(&p, TableKind::Official)?)
    }

    fn corpus(&self) -> Result<SplitCorpus> {
        let series = self.read_series()?;
        let ep = self.cfg.events_path();
        require(&ep, "debris-flow events CSV")?;
        let events = read_events_csv(&ep)?;
        let windows = corpus_windows(&series, &events, &self.cfg.windows)?;
        let (train, test) = split_windows(
            &windows.windows,
            self.cfg.split.test_fraction,
            self.cfg.seed(),
        )?;
        Ok(SplitCorpus {
            windows,
            train,
            test,
        })
    }

    fn load_model(&self, target: &ScoreTarget) -> Result<ModelDocument> {
        let path = target
            .model_file
            .clone()
            .unwrap_or_else(|| match &target.tag {
                Some(t) => self.path(&suffixed("model", Some(t), "json")),
                None => self.cfg.model_path(),
            });
        require(&path, "model file")?;
        Ok(ModelDocument::load(&path)?)
    }

    fn feature_spec(&self, doc: &ModelDocument) -> FeatureSpec {
        doc.feature_spec.unwrap_or(self.cfg.features)
    }

    /// Model scores over the test windows.
    fn test_scores(
        &self,
        target: &ScoreTarget,
    ) -> Result<(ModelDocument, SplitCorpus, Vec<WindowScores>)> {
        let doc = self.load_model(target)?;
        let corpus = self.corpus()?;
        let scores = model_scores(
            &doc.model,
            &corpus.test(),
            &self.feature_spec(&doc),
            &self.cfg.labeling,
        )?;
        Ok((doc, corpus, scores))
    }

    pub fn synth(&self) -> Result<()> {
        let corpus = generate_corpus(&self.cfg.synth)?;
        write_rainfall(create(&self.path("rainfall.csv"))?, &corpus.series)?;
        write_events(create(&self.path("events.csv"))?, &corpus.events)?;
        corpus
            .thresholds
            .write_csv(create(&self.path("thresholds.csv"))?)?;
        let mut w = csv_writer(&self.path("synth_stations.csv"))?;
        for t in &corpus.truth {
            w.serialize(t).map_err(csv_err)?;
        }
        w.flush()?;
        let hours: usize = corpus.series.iter().map(RainSeries::len).sum();
        log::info!(
            "{} stations, {hours} station-hours, {} debris flows",
            corpus.series.len(),
            corpus.events.len()
        );
        println!(
            "stations={} hours={hours} debris_flows={}",
            corpus.series.len(),
            corpus.events.len()
        );
        Ok(())
    }

    pub fn segment(&self) -> Result<()> {
        let series = self.read_series()?;
        let mut w = csv_writer(&self.path("events_segmented.csv"))?;
        w.write_record([
            "station_id",
            "event_id",
            "start",
            "end",
            "hours",
            "total_mm",
            "peak_mm",
        ])
        .map_err(csv_err)?;
        let mut n = 0;
        for s in &series {
            for (i, ev) in segment_events(s, self.cfg.windows.events)
                .iter()
                .enumerate()
            {
                let v = &s.values()[ev.start_idx..=ev.end_idx];
                w.write_record([
                    s.station_id().to_string(),
                    i.to_string(),
                    format_timestamp(s.timestamp(ev.start_idx)),
                    format_timestamp(s.timestamp(ev.end_idx)),
                    ev.len().to_string(),
                    v.iter().sum::<f64>().to_string(),
                    v.iter().copied().fold(0.0, f64::max).to_string(),
                ])
                .map_err(csv_err)?;
                n += 1;
            }
        }
        w.flush()?;
        println!("main_events={n}");
        Ok(())
    }

    pub fn ear(&self) -> Result<()> {
        let series = self.read_series()?;
        let mut w = csv_writer(&self.path("ear_traces.csv"))?;
        w.write_record([
            "station_id",
            "event_id",
            "timestamp",
            "rainfall_mm",
            "antecedent_mm",
            "ear_mm",
        ])
        .map_err(csv_err)?;
        for s in &series {
            let profile = EarProfile::compute(s, self.cfg.windows.events, self.cfg.windows.ear)?;
            for (i, tr) in profile.traces.iter().enumerate() {
                for (t, e) in tr.ear.iter().enumerate() {
                    let idx = tr.event.start_idx + t;
                    w.write_record([
                        s.station_id().to_string(),
                        i.to_string(),
                        format_timestamp(s.timestamp(idx)),
                        s.values()[idx].to_string(),
                        tr.antecedent_index.to_string(),
                        e.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn build_dataset(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let mut w = csv_writer(&self.path("windows.csv"))?;
        w.write_record([
            "id",
            "station_id",
            "kind",
            "start",
            "end",
            "hours",
            "debris_flow_idx",
            "year",
            "split",
        ])
        .map_err(csv_err)?;
        let mut split = vec!["train"; corpus.windows.windows.len()];
        for &i in &corpus.test {
            split[i] = "test";
        }
        for (win, part) in corpus.windows.windows.iter().zip(&split) {
            let m = WindowManifestEntry::from(win);
            let kind = if win.is_positive() {
                "positive"
            } else {
                "negative"
            };
            w.write_record([
                m.id,
                m.station_id,
                kind.to_string(),
                m.start,
                m.end,
                win.len().to_string(),
                m.debris_flow_idx
                    .map_or_else(String::new, |d| d.to_string()),
                win.year.to_string(),
                part.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;

        let spec = &self.cfg.features;
        let train = Dataset::build(&corpus.train(), spec, &self.cfg.labeling)?;
        let test = Dataset::build(&corpus.test(), spec, &self.cfg.labeling)?;
        train.write_csv(create(&self.path("features_train.csv"))?)?;
        test.write_csv(create(&self.path("features_test.csv"))?)?;

        let count = |idx: &[usize]| {
            let p = idx
                .iter()
                .filter(|&&i| corpus.windows.windows[i].is_positive())
                .count();
            (p, idx.len() - p)
        };
        let (pos, neg) = corpus.windows.count();
        let (trp, trn) = count(&corpus.train);
        let (tep, ten) = count(&corpus.test);
        let hours = |d: &Dataset| (d.len(), d.labels().iter().filter(|&&y| y == 1).count());
        let summary = json!({
            "windows": { "positive": pos, "negative": neg },
            "train_windows": { "positive": trp, "negative": trn },
            "test_windows": { "positive": tep, "negative": ten },
            "train_hours": { "total": hours(&train).0, "positive": hours(&train).1 },
            "test_hours": { "total": hours(&test).0, "positive": hours(&test).1 },
            "feature_names": spec.feature_names(),
            "skipped_debris_flows": corpus.windows.skipped,
        });
        self.write_json("dataset.json", &summary)?;
        println!(
            "positive_windows={pos} negative_windows={neg} train={}/{} test={}/{} skipped_flows={}",
            trp,
            trn,
            tep,
            ten,
            corpus.windows.skipped.len()
        );
        Ok(())
    }

    pub fn train(&self, tag: Option<&str>) -> Result<()> {
        let corpus = self.corpus()?;
        let spec = self.cfg.features;
        let data = Dataset::build(&corpus.train(), &spec, &self.cfg.labeling)?;
        log::info!("training {:?} on {} hours", self.cfg.model, data.len());
        let model = fit_model(
            &self.cfg.model,
            &data.matrix(),
            &data.labels(),
            self.cfg.seed(),
        )?;
        let doc = ModelDocument::new(
            model,
            self.cfg.seed(),
            Some(spec),
            data.feature_names.clone(),
        );
        let path = self.path(&suffixed("model", tag, "json"));
        doc.save(&path)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn cv(&self, hours: &[usize], tag: Option<&str>) -> Result<()> {
        let corpus = self.corpus()?;
        let train = corpus.train();
        let grid = self.cfg.grid.spec(&self.cfg.model);
        let hours = if hours.is_empty() {
            vec![self.cfg.features.hourly_hours]
        } else {
            hours.to_vec()
        };
        let mut w = csv_writer(&self.path(&suffixed("cv_results", tag, "csv")))?;
        w.write_record([
            "hours",
            "cell",
            "params",
            "mean_auprc",
            "std_auprc",
            "folds_scored",
            "best",
        ])
        .map_err(csv_err)?;
        let mut best = Vec::new();
        for &h in &hours {
            let spec = FeatureSpec {
                hourly_hours: h,
                ..self.cfg.features
            };
            spec.validate()?;
            log::info!(
                "cv: {} cells x {} folds, {h} h",
                grid.cells.len(),
                self.cfg.grid.folds
            );
            let res = grid_search_cv(
                &train,
                &spec,
                &self.cfg.labeling,
                &grid,
                self.cfg.grid.folds,
                self.cfg.seed(),
            )?;
            for (i, c) in res.cells.iter().enumerate() {
                w.write_record([
                    h.to_string(),
                    i.to_string(),
                    serde_json::to_string(&c.spec)
                        .map_err(|e| CliError::Internal(e.to_string()))?,
                    c.mean_auprc.to_string(),
                    c.std_auprc.to_string(),
                    c.fold_auprc.iter().flatten().count().to_string(),
                    (i == res.best).to_string(),
                ])
                .map_err(csv_err)?;
            }
            let b = res.best_cell();
            println!(
                "hours={h} best_mean_auprc={:.4} std={:.4}",
                b.mean_auprc, b.std_auprc
            );
            best.push(json!({
                "hours": h,
                "spec": b.spec,
                "mean_auprc": b.mean_auprc,
                "std_auprc": b.std_auprc,
                "fold_auprc": b.fold_auprc,
            }));
        }
        w.flush()?;
        self.write_json(
            &suffixed("cv_best", tag, "json"),
            &json!({ "folds": self.cfg.grid.folds, "best": best }),
        )
    }

    pub fn eval(&self, target: &ScoreTarget) -> Result<()> {
        let tag = target.tag.as_deref();
        let (doc, _, scores) = self.test_scores(target)?;
        let (s, y) = pooled(&scores);
        let roc = roc_curve(&s, &y)?;
        let pr = pr_curve(&s, &y)?;
        roc.write_csv(create(&self.path(&suffixed("roc_curve", tag, "csv")))?)?;
        pr.write_csv(create(&self.path(&suffixed("pr_curve", tag, "csv")))?)?;
        let rates: Sweep = roc
            .points
            .iter()
            .filter(|p| p.threshold.is_finite())
            .map(|p| (p.threshold, roc.confusion_at(p)))
            .collect();
        self.write_sweep(&suffixed("error_rates", tag, "csv"), "threshold", &rates)?;
        let thr = self.cfg.eval.alert_threshold;
        let c = confusion(&y, &debris_ews::metrics::classify(&s, thr))?;
        let (auroc, auprc) = (auc(&roc), auc(&pr));
        self.write_json(
            &suffixed("metrics", tag, "json"),
            &json!({
                "model": doc.model.kind_name(),
                "hours": s.len(),
                "positive_hours": roc.positives,
                "auroc": auroc,
                "auprc": auprc,
                "alert_threshold": thr,
                "confusion": counts_json(&c),
                "point_metrics": point_metrics(&c),
            }),
        )?;
        let mut w = csv_writer(&self.path(&suffixed("scores", tag, "csv")))?;
        w.write_record(["window_id", "hour", "label", "score"])
            .map_err(csv_err)?;
        for ws in &scores {
            for (i, (sc, l)) in ws.scores.iter().zip(&ws.labels).enumerate() {
                w.write_record([
                    ws.window_id.clone(),
                    (ws.first_hour + i).to_string(),
                    l.to_string(),
                    sc.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        println!("auroc={auroc:.4} auprc={auprc:.4}");
        Ok(())
    }

    pub fn sweep_baselines(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let table = self.read_thresholds()?;
        let (hm, etm) = self.baseline_sweeps(&corpus, &table)?;
        self.write_sweep("hm_sweep.csv", "threshold_mm", &hm)?;
        self.write_sweep("etm_sweep.csv", "scale", &etm)?;

        let mut summary = serde_json::Map::new();
        for (name, counts) in [("hm", &hm), ("etm", &etm)] {
            let roc = sweep_curve(CurveKind::Roc, counts)?;
            let pr = sweep_curve(CurveKind::Pr, counts)?;
            roc.write_csv(create(&self.path(&format!("{name}_roc_curve.csv")))?)?;
            pr.write_csv(create(&self.path(&format!("{name}_pr_curve.csv")))?)?;
            println!("{name}: auroc={:.4} auprc={:.4}", auc(&roc), auc(&pr));
            summary.insert(
                name.into(),
                json!({ "auroc": auc(&roc), "auprc": auc(&pr), "sweep_points": counts.len() }),
            );
        }
        let c = self.official_etm(&corpus, &table);
        summary.insert(
            "etm_official".into(),
            json!({ "confusion": counts_json(&c), "point_metrics": point_metrics(&c) }),
        );
        self.write_json("baselines.json", &summary)
    }

    /// Pooled confusion counts of the HM and ETM sweeps over the test windows.
    fn baseline_sweeps(
        &self,
        corpus: &SplitCorpus,
        table: &ThresholdTable,
    ) -> Result<(Sweep, Sweep)> {
        let test = corpus.test();
        let labels: Vec<Vec<u8>> = test
            .iter()
            .map(|w| label_hours(w, &self.cfg.labeling))
            .collect();
        let b = &self.cfg.baselines;
        let mut hm = Vec::new();
        for_each_hm_threshold(&test, max_ear(&test), b.hm_steps, b.policy, |v, p| {
            hm.push((v, pooled_confusion(&labels, p)));
        })?;
        let mut etm = Vec::new();
        for_each_etm_scale(table, &test, b.scale_step, b.policy, |v, p| {
            etm.push((v, pooled_confusion(&labels, p)));
        })?;
        Ok((hm, etm))
    }

    fn write_sweep(&self, name: &str, value: &str, rows: &[(f64, ConfusionCounts)]) -> Result<()> {
        let mut w = csv_writer(&self.path(name))?;
        w.write_record([
            value,
            "tp",
            "fp",
            "fn",
            "tn",
            "precision",
            "recall",
            "fpr",
            "fnr",
            "fdr",
            "for",
        ])
        .map_err(csv_err)?;
        for (v, c) in rows {
            let m = point_metrics(c);
            w.write_record([
                v.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                opt(m.precision),
                opt(m.recall),
                opt(m.fpr),
                opt(m.fnr),
                opt(m.fdr),
                opt(m.for_),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pooled confusion of ETM at the official thresholds over the test windows.
    fn official_etm(&self, corpus: &SplitCorpus, table: &ThresholdTable) -> ConfusionCounts {
        let test = corpus.test();
        let labels: Vec<Vec<u8>> = test
            .iter()
            .map(|w| label_hours(w, &self.cfg.labeling))
            .collect();
        let preds: Vec<Vec<bool>> = test
            .iter()
            .zip(window_thresholds(table, &test))
            .map(|(w, t)| alert_window(w, t, self.cfg.baselines.policy))
            .collect();
        pooled_confusion(&labels, &preds)
    }

    pub fn bootstrap_ci(&self, target: &ScoreTarget) -> Result<()> {
        let (doc, corpus, scores) = self.test_scores(target)?;
        let table = self.read_thresholds()?;
        let test = corpus.test();
        let b = &self.cfg.bootstrap;
        let bc = BootstrapConfig {
            statistic: b.statistic,
            block_hours: b.block_hours,
            replicates: b.replicates,
            level: b.level,
            seed: self.cfg.seed(),
        };
        let scorers: [(&str, Vec<WindowScores>); 3] = [
            (doc.model.kind_name(), scores),
            ("hm", hm_window_scores(&test, &self.cfg.labeling)),
            ("etm", etm_window_scores(&table, &test, &self.cfg.labeling)),
        ];
        let tag = target.tag.as_deref();
        let mut w = csv_writer(&self.path(&suffixed("bootstrap_ci", tag, "csv")))?;
        w.write_record([
            "scorer",
            "statistic",
            "point",
            "lower",
            "upper",
            "level",
            "block_hours",
            "replicates",
            "skipped_replicates",
            "seed",
        ])
        .map_err(csv_err)?;
        for (name, ws) in &scorers {
            let sw: Vec<ScoredWindow> = ws.iter().map(WindowScores::scored).collect();
            let ci = block_bootstrap_ci(&sw, &bc)?;
            if ci.low_replicate_warning {
                log::warn!("{name}: only {} bootstrap replicates", ci.replicates);
            }
            println!("{name}: {:.4} [{:.4}, {:.4}]", ci.point, ci.lower, ci.upper);
            let stat = serde_json::to_value(ci.statistic)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            w.write_record([
                name.to_string(),
                stat.as_str().unwrap_or_default().to_string(),
                ci.point.to_string(),
                ci.lower.to_string(),
                ci.upper.to_string(),
                ci.level.to_string(),
                ci.block_hours.to_string(),
                ci.replicates.to_string(),
                ci.skipped_replicates.to_string(),
                ci.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn operating_points(&self, target: &ScoreTarget) -> Result<()> {
        let (doc, corpus, scores) = self.test_scores(target)?;
        let table = self.read_thresholds()?;
        let (s, y) = pooled(&scores);
        let (hm, etm) = self.baseline_sweeps(&corpus, &table)?;
        let name = doc.model.kind_name().to_string();
        // HM thresholds are in mm, ETM thresholds are scales of the official table.
        let curves = [
            (name.clone(), roc_curve(&s, &y)?),
            ("hm".to_string(), sweep_curve(CurveKind::Roc, &hm)?),
            ("etm".to_string(), sweep_curve(CurveKind::Roc, &etm)?),
        ];
        let op = &self.cfg.operating_points;
        let mut rows: Vec<(String, OperatingPoint)> = Vec::new();
        for (label, curve) in &curves {
            for (kind, targets) in [
                (TargetKind::Recall, &op.recall_targets),
                (TargetKind::Precision, &op.precision_targets),
            ] {
                rows.extend(
                    operating_points(curve, kind, targets)?
                        .into_iter()
                        .map(|p| (label.clone(), p)),
                );
            }
        }
        if op.include_current {
            let m = point_metrics(&self.official_etm(&corpus, &table));
            rows.push((
                "etm_official".into(),
                OperatingPoint {
                    target_kind: TargetKind::Recall,
                    target: m.recall.unwrap_or(0.0),
                    feasible: true,
                    threshold: Some(1.0),
                    precision: m.precision,
                    recall: m.recall,
                    specificity: m.specificity,
                },
            ));
            // The other scorers at what the official thresholds achieve.
            for (kind, v) in [
                (TargetKind::Recall, m.recall),
                (TargetKind::Precision, m.precision),
            ] {
                let Some(v) = v.filter(|v| *v > 0.0) else {
                    log::warn!("official ETM {kind:?} is undefined or zero; no matching point");
                    continue;
                };
                for (label, curve) in &curves[..2] {
                    rows.extend(
                        operating_points(curve, kind, &[v])?
                            .into_iter()
                            .map(|p| (format!("{label}@etm_official"), p)),
                    );
                }
            }
        }
        let path = self.path(&suffixed("operating_points", target.tag.as_deref(), "csv"));
        write_operating_points(create(&path)?, &rows)?;
        let infeasible = rows.iter().filter(|(_, p)| !p.feasible).count();
        println!("operating_points={} infeasible={infeasible}", rows.len());
        Ok(())
    }

    pub fn event_capture(&self, target: &ScoreTarget) -> Result<()> {
        let (_, _, scores) = self.test_scores(target)?;
        let windows: Vec<(Option<usize>, &[f64])> = scores
            .iter()
            .map(|w| (w.flow, w.scores.as_slice()))
            .collect();
        let rows = event_capture(
            &windows,
            &capture_thresholds(),
            self.cfg.labeling.lead_time_h,
        )?;
        write_capture(
            create(&self.path(&suffixed("event_capture", target.tag.as_deref(), "csv")))?,
            &rows,
        )?;
        if let Some(r) = rows
            .iter()
            .find(|r| (r.threshold - self.cfg.eval.alert_threshold).abs() < 1e-9)
        {
            println!(
                "threshold={:.2} captured={} missed={}",
                r.threshold, r.captured, r.missed
            );
        }
        Ok(())
    }

    pub fn explain(&self, target: &ScoreTarget) -> Result<()> {
        let doc = self.load_model(target)?;
        let Model::RandomForest(forest) = &doc.model else {
            return Err(CliError::Input(format!(
                "explain needs a random forest, the model file holds {}",
                doc.model.kind_name()
            )));
        };
        let corpus = self.corpus()?;
        let spec = self.feature_spec(&doc);
        let train = Dataset::build(&corpus.train(), &spec, &self.cfg.labeling)?;
        let test = Dataset::build(&corpus.test(), &spec, &self.cfg.labeling)?;
        if test.is_empty() {
            return Err(CliError::Input("no test hours to explain".into()));
        }
        let ex = &self.cfg.explain;
        let (bg, _) = background_sample(&train.matrix(), ex.background_rows, self.cfg.seed());
        let n = test.len();
        let picks: Vec<usize> = if ex.rows == 0 || ex.rows >= n {
            (0..n).collect()
        } else {
            (0..ex.rows).map(|i| i * n / ex.rows).collect()
        };
        let x = test.matrix().select_rows(&picks);
        let ids: Vec<String> = picks
            .iter()
            .map(|&i| format!("{}:{}", test.examples[i].window_id, test.examples[i].hour))
            .collect();
        log::info!(
            "explaining {} rows against {} background rows",
            x.n_rows(),
            bg.n_rows()
        );
        let attr = explain_rows(forest, &x, &bg)?;
        let tag = target.tag.as_deref();
        write_attributions(
            create(&self.path(&suffixed("shap_values", tag, "csv")))?,
            &ids,
            &x,
            &test.feature_names,
            &attr,
        )?;

        let ranking = match ex.importance {
            ImportanceMethod::MeanAbsShap => {
                let mut s = vec![0.0; x.n_cols()];
                for a in &attr {
                    for (acc, v) in s.iter_mut().zip(&a.values) {
                        *acc += v.abs();
                    }
                }
                let mut r: Vec<(usize, f64)> = s
                    .into_iter()
                    .map(|v| v / attr.len() as f64)
                    .enumerate()
                    .collect();
                r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                r
            }
            ImportanceMethod::Permutation => importance_ranking(
                &doc.model,
                &test.matrix(),
                &test.labels(),
                &test.feature_names,
                ImportanceMethod::Permutation,
                self.cfg.seed(),
            )?
            .into_iter()
            .map(|f| (f.feature, f.score))
            .collect(),
        };
        let mut w = csv_writer(&self.path(&suffixed("importance", tag, "csv")))?;
        w.write_record(["rank", "feature", "score"])
            .map_err(csv_err)?;
        for (rank, (f, score)) in ranking.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                test.feature_names[*f].clone(),
                score.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}
