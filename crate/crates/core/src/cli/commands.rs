use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::{Cli, Command, ComplexityArgs, ModelArg, OUTPUT_ROOT_ENV};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_report, cardiac_intervals, classify_intervals, evaluate_recording, histogram_svg, EvaluationReport,
    IntervalKind, RecordingEval,
};
use crate::events::{EventAnnotation, EventSet, EventType};
use crate::infer::{decode, FramePredictions};
use crate::labels::MASK;
use crate::models::{estimate_flops, ModelConfig};
use crate::synth::{
    generate_dataset, load_annotation_file, load_manifest, manifest_digest, resolve, save_annotation_file,
    DatasetMode, Manifest,
};
use crate::train::{
    ensemble_average, load_samples, make_cv_splits, make_targets, predict_samples, train_fold, write_history_csv,
    write_json, Checkpoint, FoldPlan, Role, Sample, Task,
};

pub(super) fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Complexity(a) => {
            cfg.validate()?;
            complexity(&cfg, a)
        }
        Command::Synth(a) => {
            if let Some(m) = a.mode {
                cfg.synth.mode = m.into();
            }
            if let Some(n) = a.n_patients {
                cfg.synth.n_patients = n;
            }
            let run = Run::create(cli, "synth", &cfg)?;
            let manifest = generate_dataset(&cfg.dataset_spec(), &run.dir, cfg.synth.threads)?;
            println!("manifest {}", run.dir.join("manifest.json").display());
            println!("digest {}", manifest_digest(&manifest));
            Ok(())
        }
        Command::Labels(a) => {
            let (run, manifest) = Run::with_manifest(cli, "labels", &cfg, &a.manifest)?;
            labels(&run, &cfg, &a.manifest, &manifest)
        }
        Command::Train(a) => {
            if let Some(k) = a.k {
                cfg.crossval.k = k;
            }
            let (run, manifest) = Run::with_manifest(cli, "train", &cfg, &a.manifest)?;
            let plan = run.fold_plan(&manifest, &cfg)?;
            if a.fold >= plan.k {
                return Err(Error::InvalidArgument(format!("fold {} out of range for k = {}", a.fold, plan.k)));
            }
            let model = cfg.model_config();
            let samples = load_samples(&a.manifest, &manifest, &all(&manifest), model.input_size(), model.input_channels())?;
            let records = run_fold(&run, &cfg, &model, &plan, a.fold, &manifest, &samples)?;
            let report = aggregate_report(&records, cfg.eval.std)?;
            run.write_report(&report)
        }
        Command::Crossval(a) => {
            if let Some(k) = a.k {
                cfg.crossval.k = k;
            }
            if let Some(p) = a.parallel {
                cfg.crossval.parallel = p;
            }
            let (run, manifest) = Run::with_manifest(cli, "crossval", &cfg, &a.manifest)?;
            crossval(&run, &cfg, &a.manifest, &manifest)
        }
        Command::Infer(a) => {
            let (run, manifest) = Run::with_manifest(cli, "infer", &cfg, &a.manifest)?;
            let headers = match (&a.weights.checkpoint, &a.weights.ensemble) {
                (Some(c), _) => vec![c.clone()],
                (None, Some(dir)) => ensemble_members(dir)?,
                (None, None) => unreachable!("clap requires one weight source"),
            };
            infer(&run, &cfg, &a.manifest, &manifest, &headers)
        }
        Command::Eval(a) => {
            let (run, manifest) = Run::with_manifest(cli, "eval", &cfg, &a.manifest)?;
            let dataset = a.dataset.clone().unwrap_or_else(|| mode_name(manifest.mode).to_string());
            let records = evaluate_dir(&cfg, &a.manifest, &manifest, &a.predictions, &dataset)?;
            let report = aggregate_report(&records, cfg.eval.std)?;
            run.write_report(&report)
        }
        Command::Intervals(a) => {
            let (run, manifest) = Run::with_manifest(cli, "intervals", &cfg, &a.manifest)?;
            intervals(&run, &a.manifest, &manifest, a.predictions.as_deref())
        }
        Command::Report(a) => {
            let text = fs::read(&a.report).map_err(|e| Error::io(&a.report, e))?;
            let report: EvaluationReport =
                serde_json::from_slice(&text).map_err(|e| Error::format(&a.report, "report", e.to_string()))?;
            let run = Run::create(cli, "report", &cfg)?;
            render_report(&run, &report)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::preset(cli.preset);
    if let Some(path) = &cli.config {
        cfg = cfg.merge_file(path)?;
    }
    cfg = cfg.apply_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn all(manifest: &Manifest) -> Vec<usize> {
    (0..manifest.entries.len()).collect()
}

fn mode_name(mode: DatasetMode) -> &'static str {
    match mode {
        DatasetMode::Triplane => "triplane",
        DatasetMode::External => "external",
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestRef {
    path: PathBuf,
    digest: String,
    n_recordings: usize,
}

/// A fresh run directory holding a config snapshot.
struct Run {
    dir: PathBuf,
}

impl Run {
    fn create(cli: &Cli, command: &str, cfg: &RunConfig) -> Result<Run> {
        cfg.validate()?;
        let dir = match &cli.run_dir {
            Some(dir) => {
                if dir.join("config.json").exists() {
                    return Err(Error::InvalidArgument(format!("{} already holds a run", dir.display())));
                }
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                dir.clone()
            }
            None => {
                let root = cli
                    .out
                    .clone()
                    .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
                    .unwrap_or_else(|| PathBuf::from("runs"));
                fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
                next_free_dir(&root, command)?
            }
        };
        write_json(&dir.join("config.json"), cfg)?;
        log::info!("run directory {}", dir.display());
        Ok(Run { dir })
    }

    fn sub(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Loads the input manifest before creating the run, so a bad input leaves no directory behind.
    fn with_manifest(cli: &Cli, command: &str, cfg: &RunConfig, path: &Path) -> Result<(Self, Manifest)> {
        let manifest = load_manifest(path)?;
        let run = Self::create(cli, command, cfg)?;
        let reference = ManifestRef {
            path: fs::canonicalize(path).map_err(|e| Error::io(path, e))?,
            digest: manifest_digest(&manifest),
            n_recordings: manifest.entries.len(),
        };
        write_json(&run.dir.join("manifest.ref.json"), &reference)?;
        Ok((run, manifest))
    }

    fn fold_plan(&self, manifest: &Manifest, cfg: &RunConfig) -> Result<FoldPlan> {
        let plan = make_cv_splits(manifest, cfg.crossval.k, cfg.seed)?;
        write_json(&self.dir.join("foldplan.json"), &plan)?;
        Ok(plan)
    }

    fn write_report(&self, report: &EvaluationReport) -> Result<()> {
        let dir = self.sub("reports")?;
        report.write_csv(&dir.join("report.csv"))?;
        write_json(&dir.join("report.json"), report)?;
        print!("{}", report_table(report));
        Ok(())
    }
}

fn next_free_dir(root: &Path, command: &str) -> Result<PathBuf> {
    for i in 1.. {
        let dir = root.join(format!("{command}-{i:03}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!("unbounded search")
}

fn fold_name(fold: usize) -> String {
    format!("fold-{fold:02}")
}

#[derive(Serialize)]
struct LabelFile<'a> {
    id: &'a str,
    task: Task,
    event_set: EventSet,
    n_frames: usize,
    channels: usize,
    mask: f32,
    /// Frame-major `[frame][channel]`.
    values: &'a [f32],
}

fn labels(run: &Run, cfg: &RunConfig, manifest_path: &Path, manifest: &Manifest) -> Result<()> {
    let dir = run.sub("labels")?;
    let set = cfg.train.ablation.events;
    for e in &manifest.entries {
        let file = load_annotation_file(&resolve(manifest_path, &e.annotation_path))?;
        let track = make_targets(&file.annotation(), e.n_frames, cfg.train.task, set, cfg.train.soft_label_width)?;
        let out = LabelFile {
            id: &e.id,
            task: cfg.train.task,
            event_set: set,
            n_frames: e.n_frames,
            channels: track.channels,
            mask: MASK,
            values: &track.values,
        };
        write_json(&dir.join(format!("{}.json", e.id)), &out)?;
    }
    println!("wrote {} label files to {}", manifest.entries.len(), dir.display());
    Ok(())
}

/// Trains one fold, writes its checkpoint, history and test predictions, and
/// evaluates the test recordings.
fn run_fold(
    run: &Run,
    cfg: &RunConfig,
    model: &ModelConfig,
    plan: &FoldPlan,
    fold: usize,
    manifest: &Manifest,
    samples: &[Sample],
) -> Result<Vec<RecordingEval>> {
    let name = fold_name(fold);
    let tcfg = cfg.train_config();
    let views = tcfg.ablation.views;
    let pick = |role: Role| -> Vec<&Sample> {
        plan.folds[fold]
            .entries(manifest, role)
            .into_iter()
            .map(|i| &samples[i])
            .filter(|s| views.admits(s.view))
            .collect()
    };
    let (train, val, test) = (pick(Role::Train), pick(Role::Val), pick(Role::Test));
    log::info!("{name}: {} train, {} val, {} test recordings", train.len(), val.len(), test.len());
    let outcome = train_fold(model, &tcfg, &train, &val, &name)?;
    outcome.checkpoint.save(&run.sub("checkpoints")?.join(format!("{name}.json")))?;
    write_history_csv(&run.sub("history")?.join(format!("{name}.csv")), &outcome.history)?;

    let mut net = outcome.checkpoint.build::<f32>()?;
    let meta = &outcome.checkpoint.meta;
    let preds = predict_samples(
        &mut net,
        Task::of(&meta.model).prediction_kind(),
        meta.event_set,
        &test,
        tcfg.batch_size(),
    )?;
    let dataset = mode_name(manifest.mode);
    let pred_dir = run.sub("predictions")?;
    preds
        .iter()
        .zip(&test)
        .map(|(p, s)| {
            let decoded = decode(p, &cfg.infer)?;
            save_annotation_file(&decoded.to_file(p, Some(s.view)), &pred_dir.join(format!("{}.json", s.id)))?;
            let reference = meta.event_set.project(&s.annotation);
            Ok(evaluate_recording(
                &s.id,
                dataset,
                Some(s.view),
                s.fps,
                s.n_frames(),
                &restrict(&decoded.annotation, &reference),
                &reference,
                &cfg.eval,
            ))
        })
        .collect()
}

#[derive(Serialize)]
struct Coverage {
    n_recordings: usize,
    n_patients: usize,
    folds: usize,
}

fn crossval(run: &Run, cfg: &RunConfig, manifest_path: &Path, manifest: &Manifest) -> Result<()> {
    let plan = run.fold_plan(manifest, cfg)?;
    let model = cfg.model_config();
    let samples = load_samples(manifest_path, manifest, &all(manifest), model.input_size(), model.input_channels())?;

    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Result<Vec<RecordingEval>>>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|s| {
        for _ in 0..cfg.crossval.parallel.min(plan.k) {
            s.spawn(|| loop {
                let fold = next.fetch_add(1, Ordering::Relaxed);
                if fold >= plan.k {
                    break;
                }
                let r = run_fold(run, cfg, &model, &plan, fold, manifest, &samples);
                results.lock().expect("poisoned").insert(fold, r);
            });
        }
    });
    let mut records = Vec::new();
    for (_, r) in results.into_inner().expect("poisoned") {
        records.extend(r?);
    }

    let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let patients: BTreeSet<&str> = manifest
        .entries
        .iter()
        .filter(|e| ids.contains(e.id.as_str()))
        .map(|e| e.patient.as_str())
        .collect();
    if ids.len() != records.len() {
        return Err(Error::InvalidArgument("a recording was tested in more than one fold".into()));
    }
    let coverage = Coverage {
        n_recordings: records.len(),
        n_patients: patients.len(),
        folds: plan.k,
    };
    write_json(&run.sub("reports")?.join("coverage.json"), &coverage)?;
    println!(
        "{} folds; test predictions for {} recordings of {} patients",
        coverage.folds, coverage.n_recordings, coverage.n_patients
    );
    let report = aggregate_report(&records, cfg.eval.std)?;
    run.write_report(&report)
}

fn ensemble_members(dir: &Path) -> Result<Vec<PathBuf>> {
    let ck = dir.join("checkpoints");
    let mut headers: Vec<PathBuf> = fs::read_dir(&ck)
        .map_err(|e| Error::io(&ck, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    headers.sort();
    if headers.is_empty() {
        return Err(Error::InvalidArgument(format!("no checkpoints in {}", ck.display())));
    }
    Ok(headers)
}

fn infer(run: &Run, cfg: &RunConfig, manifest_path: &Path, manifest: &Manifest, headers: &[PathBuf]) -> Result<()> {
    let checkpoints = headers.iter().map(|h| Checkpoint::load(h)).collect::<Result<Vec<_>>>()?;
    let first = &checkpoints[0].meta;
    for c in &checkpoints {
        if c.meta.model.input_size() != first.model.input_size()
            || Task::of(&c.meta.model) != Task::of(&first.model)
            || c.meta.event_set != first.event_set
        {
            return Err(Error::InvalidArgument("ensemble members have different inputs or outputs".into()));
        }
    }
    let samples = load_samples(
        manifest_path,
        manifest,
        &all(manifest),
        first.model.input_size(),
        first.model.input_channels(),
    )?;
    let kind = Task::of(&first.model).prediction_kind();
    let mut per_model: Vec<Vec<FramePredictions>> = Vec::with_capacity(checkpoints.len());
    for c in &checkpoints {
        let mut net = c.build::<f32>()?;
        per_model.push(predict_samples(&mut net, kind, first.event_set, &samples, cfg.train_config().batch_size())?);
    }
    let dir = run.sub("predictions")?;
    for (i, s) in samples.iter().enumerate() {
        let members: Vec<FramePredictions> = per_model.iter().map(|p| p[i].clone()).collect();
        let pred = ensemble_average(&members)?;
        let decoded = decode(&pred, &cfg.infer)?;
        save_annotation_file(&decoded.to_file(&pred, Some(s.view)), &dir.join(format!("{}.json", s.id)))?;
    }
    println!(
        "wrote {} predictions from {} model(s) to {}",
        samples.len(),
        checkpoints.len(),
        dir.display()
    );
    Ok(())
}

/// Drops predicted event types that the reference never annotates, so a
/// dataset without diastasis labels does not count DSS/ASS detections as
/// false.
fn restrict(pred: &EventAnnotation, reference: &EventAnnotation) -> EventAnnotation {
    let mut out = pred.clone();
    for e in EventType::ALL {
        if !reference.contains(e) {
            for c in &mut out.cycles {
                c.set(e, None);
            }
        }
    }
    out
}

fn evaluate_dir(
    cfg: &RunConfig,
    manifest_path: &Path,
    manifest: &Manifest,
    pred_dir: &Path,
    dataset: &str,
) -> Result<Vec<RecordingEval>> {
    let set = cfg.train.ablation.events;
    let mut records = Vec::new();
    for e in &manifest.entries {
        let path = pred_dir.join(format!("{}.json", e.id));
        if !path.exists() {
            continue;
        }
        let pred = load_annotation_file(&path)?;
        if pred.n_frames != e.n_frames {
            return Err(Error::format(&path, "n_frames", format!("expected {} frames", e.n_frames)));
        }
        let reference = set.project(&load_annotation_file(&resolve(manifest_path, &e.annotation_path))?.annotation());
        records.push(evaluate_recording(
            &e.id,
            dataset,
            Some(e.view),
            e.fps,
            e.n_frames,
            &restrict(&pred.annotation(), &reference),
            &reference,
            &cfg.eval,
        ));
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} holds no predictions for manifest entries",
            pred_dir.display()
        )));
    }
    Ok(records)
}

fn intervals(run: &Run, manifest_path: &Path, manifest: &Manifest, predictions: Option<&Path>) -> Result<()> {
    // Reference annotations are shared by a patient's views; count each once.
    let mut sources: Vec<(String, f64, PathBuf)> = Vec::new();
    let mut seen = BTreeSet::new();
    for e in &manifest.entries {
        match predictions {
            Some(dir) => {
                let p = dir.join(format!("{}.json", e.id));
                if p.exists() {
                    sources.push((e.id.clone(), e.fps, p));
                }
            }
            None => {
                if seen.insert(e.annotation_path.clone()) {
                    sources.push((e.patient.clone(), e.fps, resolve(manifest_path, &e.annotation_path)));
                }
            }
        }
    }
    let dir = run.sub("reports")?;
    let path = dir.join("intervals.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| crate::train::csv_error(&path, e))?;
    let header = ["id", "cycle"].into_iter().chain(IntervalKind::ALL.iter().map(|k| k.name()));
    w.write_record(header).map_err(|e| crate::train::csv_error(&path, e))?;
    let mut values: BTreeMap<IntervalKind, Vec<f64>> = BTreeMap::new();
    for (id, fps, file) in &sources {
        let ann = load_annotation_file(file)?.annotation();
        for c in cardiac_intervals(&ann, *fps)? {
            let mut row = vec![id.clone(), c.cycle.to_string()];
            for k in IntervalKind::ALL {
                row.push(c.get(k).map_or(String::new(), |v| format!("{v:.3}")));
                if let Some(v) = c.get(k) {
                    values.entry(k).or_default().push(v);
                }
            }
            w.write_record(&row).map_err(|e| crate::train::csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let summary = dir.join("intervals_summary.csv");
    let mut s = csv::Writer::from_path(&summary).map_err(|e| crate::train::csv_error(&summary, e))?;
    s.write_record(["interval", "n", "mean_ms", "below", "normal", "above"])
        .map_err(|e| crate::train::csv_error(&summary, e))?;
    println!("interval      n   mean ms   below  normal   above");
    for k in IntervalKind::ALL {
        let v = values.get(&k).map_or(&[][..], Vec::as_slice);
        let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let table = k.normal_range().map(|r| classify_intervals(v, r));
        let cell = |f: fn(&crate::eval::IntervalTable) -> f64| table.as_ref().map_or(String::new(), |t| format!("{:.6}", f(t)));
        s.write_record([
            k.name().to_string(),
            v.len().to_string(),
            if v.is_empty() { String::new() } else { format!("{mean:.6}") },
            cell(|t| t.below),
            cell(|t| t.normal),
            cell(|t| t.above),
        ])
        .map_err(|e| crate::train::csv_error(&summary, e))?;
        let pct = |f: fn(&crate::eval::IntervalTable) -> f64| {
            table.as_ref().map_or("      -".to_string(), |t| format!("{:6.1}%", 100.0 * f(t)))
        };
        println!(
            "{:<9} {:>5} {:>9.1} {} {} {}",
            k.name(),
            v.len(),
            mean,
            pct(|t| t.below),
            pct(|t| t.normal),
            pct(|t| t.above)
        );
    }
    s.flush().map_err(|e| Error::io(&summary, e))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.digits$}"))
}

fn report_table(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", report.fd_convention);
    let _ = writeln!(
        s,
        "{:<10} {:<6} {:<4} {:>6} {:>6} {:>6} {:>8} {:>7} {:>7} {:>8}",
        "dataset", "view", "evt", "pairs", "miss", "fdet", "FD", "std", "aFD", "aFD ms"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<10} {:<6} {:<4} {:>6} {:>6} {:>6} {:>8} {:>7} {:>7} {:>8}",
            r.dataset,
            r.view,
            r.event.name(),
            r.n_pairs,
            r.misses,
            r.false_detections,
            fmt_opt(r.fd_mean, 2),
            fmt_opt(r.fd_std, 2),
            fmt_opt(r.afd, 2),
            fmt_opt(r.afd_ms, 1)
        );
    }
    s
}

fn render_report(run: &Run, report: &EvaluationReport) -> Result<()> {
    let dir = run.sub("reports")?;
    let mut md = String::new();
    let _ = writeln!(md, "# Evaluation report\n\n{}. Standard deviation: {:?}.\n", report.fd_convention, report.std);
    let _ = writeln!(md, "| dataset | view | event | pairs | misses | false det. | FD mean ± std | aFD | aFD (ms) |");
    let _ = writeln!(md, "|---|---|---|---:|---:|---:|---:|---:|---:|");
    for r in &report.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} ± {} | {} | {} |",
            r.dataset,
            r.view,
            r.event.name(),
            r.n_pairs,
            r.misses,
            r.false_detections,
            fmt_opt(r.fd_mean, 2),
            fmt_opt(r.fd_std, 2),
            fmt_opt(r.afd, 2),
            fmt_opt(r.afd_ms, 1)
        );
    }
    let _ = writeln!(md);
    for (event, hist) in &report.histograms {
        let file = format!("histogram_{}.svg", event.name());
        let svg = histogram_svg(&format!("{} frame error", event.name()), hist);
        fs::write(dir.join(&file), svg).map_err(|e| Error::io(dir.join(&file), e))?;
        let _ = writeln!(md, "![{} error histogram]({file})", event.name());
    }
    let path = dir.join("report.md");
    fs::write(&path, md).map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct ComplexitySummary {
    model: ModelConfig,
    parameters: u64,
    non_trainable: u64,
    receptive_field: [usize; 3],
    conv_macs_per_frame: u64,
    macs_per_frame: u64,
    flops_per_frame: u64,
    frames: usize,
    flops: u64,
}

fn complexity(cfg: &RunConfig, a: &ComplexityArgs) -> Result<()> {
    let model = match a.model {
        ModelArg::Classification => ModelConfig::Classification(cfg.model.classification.clone()),
        ModelArg::Regression => ModelConfig::Regression(cfg.model.regression.clone()),
    };
    let model = cfg.train.ablation.apply(&model);
    if a.frames == 0 {
        return Err(Error::InvalidArgument("--frames must be >= 1".into()));
    }
    let arch = model.arch()?;
    let cx = arch.complexity()?;
    let size = model.input_size();
    let est = estimate_flops(&arch, [a.frames, size, size, model.input_channels()])?;
    let summary = ComplexitySummary {
        parameters: cx.params,
        non_trainable: cx.non_trainable,
        receptive_field: cx.receptive_field,
        conv_macs_per_frame: cx.conv_macs_per_frame,
        macs_per_frame: est.macs_per_frame,
        flops_per_frame: est.flops_per_frame,
        frames: a.frames,
        flops: est.flops,
        model,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    let [rt, rh, rw] = summary.receptive_field;
    println!("parameters          {} ({:.2}M)", summary.parameters, summary.parameters as f64 / 1e6);
    println!("non-trainable       {}", summary.non_trainable);
    println!("receptive field     {rt} x {rh} x {rw} (frames x rows x cols)");
    println!("conv MACs / frame   {} ({:.1}M)", summary.conv_macs_per_frame, summary.conv_macs_per_frame as f64 / 1e6);
    println!("MACs / frame        {}", summary.macs_per_frame);
    println!("FLOPs / frame       {} (2 per MAC + 1 per bias add)", summary.flops_per_frame);
    println!("FLOPs, {} frame(s)   {}", summary.frames, summary.flops);
    Ok(())
}
