use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use decoyforge::curation::{curate_corpus, list_structure_files, rejections_csv, EntryManifest, FilterConfig};
use decoyforge::decoys::{generate_all, ingest_poses, pose_files_for, DecoyError, DecoyGenConfig};
use decoyforge::encoder::{EncoderConfig, Model};
use decoyforge::gradcheck;
use decoyforge::objective::ObjectiveConfig;
use decoyforge::store::labels::load_labels;
use decoyforge::store::stats::{corpus_stats, StatsConfig};
use decoyforge::store::{write_dataset, Dataset, StoredComplex, WriteOptions};
use decoyforge::trainer::{self, finetune_curve_csv, loss_curve_csv, labeled_splits, Example, TrainConfig, TrainError};

use crate::run::{echo, emit, overlay, parent_dir, print, require_dir, require_file, write_json};
use crate::{
    BuildArgs, EvalArgs, ExportArgs, FinetuneArgs, GenerateArgs, Globals, GradcheckArgs, IngestArgs, PretrainArgs,
    SplitChoice, StatsArgs, UsageError,
};

fn write_options(ds: &Dataset) -> WriteOptions {
    WriteOptions { graph_cutoff: ds.graph_cutoff(), ..WriteOptions::default() }
}

pub fn build(a: &BuildArgs, g: Globals) -> Result<()> {
    require_dir(&a.input, "input")?;
    if let Some(p) = &a.filters {
        require_file(p, "filters")?;
    }
    if let Some(p) = &a.manifest {
        require_file(p, "manifest")?;
    }
    let filters = match &a.filters {
        Some(p) => FilterConfig::from_json(&std::fs::read_to_string(p)?).with_context(|| format!("filters {}", p.display()))?,
        None => FilterConfig::default(),
    };
    let manifest = match &a.manifest {
        Some(p) => EntryManifest::load(p)?,
        None => EntryManifest::default(),
    };
    let files = list_structure_files(&a.input)?;
    let out = curate_corpus(&files, &filters, g.workers, &manifest)?;
    let stored: Vec<StoredComplex> =
        out.records.into_iter().map(|r| StoredComplex::cropped(r, Vec::new(), WriteOptions::default().graph_cutoff)).collect();
    write_dataset(&a.out, &stored, WriteOptions::default())?;
    write_json(&a.out.join("curation_summary.json"), &out.summary)?;
    std::fs::write(a.out.join("rejections.csv"), rejections_csv(&out.reports))?;
    echo(&a.out, "build", g, json!({ "filters": filters, "input": a.input }), json!({ "summary": out.summary }))?;
    let s = &out.summary;
    print(g, s, || {
        let mut t = format!("{} entries, {} ligands examined, {} retained\n", s.entries, s.ligands_examined, s.retained);
        for (rule, n) in s.rejections.iter().filter(|(_, n)| **n > 0) {
            let _ = writeln!(t, "  rejected by {rule}: {n}");
        }
        for f in &s.failures {
            let _ = writeln!(t, "  unreadable {}: {}", f.path, f.message);
        }
        t
    })
}

fn open(path: &Path) -> Result<Dataset> {
    require_dir(path, "dataset")?;
    Ok(Dataset::open(path)?)
}

pub fn decoys_generate(a: &GenerateArgs, g: Globals) -> Result<()> {
    if let Some(p) = &a.config {
        require_file(p, "config")?;
    }
    let ds = open(&a.dataset)?;
    let mut cfg = DecoyGenConfig { rng_seed: g.seed, ..DecoyGenConfig::default() };
    if let Some(n) = a.poses {
        cfg.poses_per_complex = n;
    }
    let cfg = overlay(cfg, a.config.as_deref())?;
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let records: Vec<_> = ds.complexes.iter().map(|c| c.record.clone()).collect();
    let outcomes = generate_all(&records, &cfg, g.workers)?;
    let (mut generated, mut short, mut failed) = (0, 0, Vec::new());
    let mut stored = Vec::with_capacity(records.len());
    for (record, outcome) in records.into_iter().zip(outcomes) {
        let decoys = match outcome {
            Ok(o) => {
                short += usize::from(o.shortfall() > 0);
                o.poses
            }
            Err(DecoyError::NoValidPose(id)) => {
                failed.push(id);
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        };
        generated += decoys.len();
        stored.push(StoredComplex { record, decoys });
    }
    let index = write_dataset(&a.dataset, &stored, write_options(&ds))?;
    let summary = json!({
        "complexes": stored.len(),
        "requested": cfg.poses_per_complex * stored.len(),
        "generated": generated,
        "complexes_short": short,
        "complexes_without_pose": failed,
        "d_max": index.d_max,
    });
    echo(&a.dataset, "decoys generate", g, json!({ "decoys": cfg }), summary.clone())?;
    print(g, &summary, || {
        format!(
            "{generated} decoys for {} complexes ({short} short of {} requested, {} without any pose)\n",
            stored.len(),
            cfg.poses_per_complex,
            failed.len()
        )
    })
}

pub fn decoys_ingest(a: &IngestArgs, g: Globals) -> Result<()> {
    require_dir(&a.poses, "poses")?;
    let ds = open(&a.dataset)?;
    let mut stored = ds.complexes.clone();
    let mut added = 0;
    for c in &mut stored {
        let files = pose_files_for(&a.poses, c.complex_id())?;
        if files.is_empty() {
            continue;
        }
        let first = c.decoys.iter().map(|d| d.pose_index + 1).max().unwrap_or(0);
        let poses = ingest_poses(&c.record, &files, first)?;
        added += poses.len();
        c.decoys.extend(poses);
    }
    let index = write_dataset(&a.dataset, &stored, write_options(&ds))?;
    let summary = json!({ "ingested": added, "d_max": index.d_max });
    echo(&a.dataset, "decoys ingest", g, json!({ "poses": a.poses }), summary.clone())?;
    print(g, &summary, || format!("ingested {added} poses\n"))
}

pub fn stats(a: &StatsArgs, g: Globals) -> Result<()> {
    if let Some(p) = &a.config {
        require_file(p, "config")?;
    }
    let cfg = overlay(StatsConfig::default(), a.config.as_deref())?;
    let ds = open(&a.dataset)?;
    let s = corpus_stats(&ds, &cfg)?;
    if let Some(out) = &a.out {
        std::fs::create_dir_all(parent_dir(out))?;
        std::fs::write(out, s.to_csv()).with_context(|| format!("writing {}", out.display()))?;
        echo(&parent_dir(out), "stats", g, json!({ "stats": cfg, "dataset": a.dataset }), json!({}))?;
    }
    print(g, &s, || {
        let mut t = format!(
            "{} complexes, {} decoys ({} positive, {} negative), d_max {}\n",
            s.complexes,
            s.decoys,
            s.positives,
            s.negatives,
            s.d_max.map_or("n/a".into(), |d| format!("{d:.3}"))
        );
        for p in &s.panels {
            let _ = writeln!(t, "{}:", p.name);
            for b in &p.bins {
                let _ = writeln!(t, "  [{}, {}) {}", b.start, b.end, b.value);
            }
        }
        t
    })
}

fn train_config(g: Globals, path: Option<&Path>, tweak: impl FnOnce(&mut TrainConfig)) -> Result<TrainConfig> {
    if let Some(p) = path {
        require_file(p, "config")?;
    }
    let mut cfg = TrainConfig { seed: g.seed, ..TrainConfig::default() };
    tweak(&mut cfg);
    let cfg = overlay(cfg, path)?;
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(cfg)
}

fn encoder_config(g: Globals, path: Option<&Path>) -> Result<EncoderConfig> {
    if let Some(p) = path {
        require_file(p, "encoder config")?;
    }
    overlay(EncoderConfig { init_seed: g.seed, ..EncoderConfig::default() }, path)
}

/// Saves the last good parameters before reporting a divergence.
fn save_on_divergence(err: TrainError, out: &Path) -> anyhow::Error {
    if let TrainError::DivergedLoss { last_good, .. } = &err {
        if let Err(e) = last_good.save(out) {
            return anyhow::Error::from(err).context(format!("also failed to save last good checkpoint: {e}"));
        }
    }
    err.into()
}

pub fn pretrain(a: &PretrainArgs, g: Globals) -> Result<()> {
    if let Some(p) = &a.objective {
        require_file(p, "objective")?;
    }
    let cfg = train_config(g, a.config.as_deref(), |c| {
        if let Some(e) = a.epochs {
            c.pretrain_epochs = e;
        }
        if let Some(f) = a.val_fraction {
            c.pretrain_val_fraction = f;
        }
    })?;
    let obj = overlay(ObjectiveConfig::default(), a.objective.as_deref())?;
    obj.validate().map_err(|e| UsageError(e.to_string()))?;
    let enc = encoder_config(g, a.encoder.as_deref())?;
    let model = Model::new(enc.clone()).map_err(|e| UsageError(e.to_string()))?;
    let ds = open(&a.dataset)?;
    if ds.d_max().is_none() {
        bail!("dataset {} has no decoys; run `decoyforge decoys generate` first", a.dataset.display());
    }
    let dir = parent_dir(&a.out);
    std::fs::create_dir_all(&dir)?;
    let out = trainer::pretrain(&ds, model, &obj, &cfg, |e| {
        if !g.json {
            let val = e.val_loss.map_or(String::new(), |v| format!(", val {v:.6}"));
            eprintln!("epoch {:>3}: loss {:.6}{val}", e.epoch, e.train_loss);
        }
    })
    .map_err(|e| save_on_divergence(e, &a.out))?;
    out.model.save(&a.out)?;
    std::fs::write(dir.join("losscurve.csv"), loss_curve_csv(&out.curve))?;
    let config = json!({ "train": cfg, "objective": obj, "encoder": enc, "dataset": a.dataset });
    let results = json!({ "curve": out.curve, "validation_ids": out.validation_ids });
    echo(&dir, "pretrain", g, config, results.clone())?;
    print(g, &results, || {
        let last = out.curve.last().map_or(f64::NAN, |e| e.train_loss);
        format!("pretrained {} epochs, final loss {last:.6}; wrote {}\n", out.curve.len(), a.out.display())
    })
}

fn initial_model(init: &str, g: Globals, encoder: Option<&Path>) -> Result<Model> {
    if init == "none" {
        return Model::new(encoder_config(g, encoder)?).map_err(|e| UsageError(e.to_string()).into());
    }
    let path = Path::new(init);
    require_file(path, "checkpoint")?;
    Ok(Model::load(path)?)
}

pub fn finetune(a: &FinetuneArgs, g: Globals) -> Result<()> {
    require_file(&a.labels, "labels")?;
    let cfg = train_config(g, a.config.as_deref(), |c| {
        if let Some(e) = a.max_epochs {
            c.finetune_max_epochs = e;
        }
    })?;
    let model = initial_model(&a.init, g, a.encoder.as_deref())?;
    let ds = open(&a.dataset)?;
    let labels = load_labels(&a.labels)?;
    let splits = labeled_splits(&ds, &labels, g.seed)?;
    let dir = parent_dir(&a.out);
    std::fs::create_dir_all(&dir)?;
    let out = trainer::finetune(model, &splits, &cfg, |e| {
        if !g.json {
            eprintln!("epoch {:>3}: mse {:.6}, val rmse {:.6}, lr {:e}", e.epoch, e.train_loss, e.val_rmse, e.lr);
        }
    })
    .map_err(|e| save_on_divergence(e, &a.out))?;
    out.model.save(&a.out)?;
    let reported = out.test.clone().unwrap_or_else(|| out.validation.clone());
    write_json(&dir.join("metrics.json"), &reported)?;
    std::fs::write(dir.join("finetune_curve.csv"), finetune_curve_csv(&out.curve))?;
    let results = json!({
        "best_epoch": out.best_epoch,
        "epochs_run": out.curve.len(),
        "validation": out.validation,
        "test": out.test,
        "split_sizes": { "train": splits.train.len(), "val": splits.val.len(), "test": splits.test.len() },
    });
    let config = json!({ "train": cfg, "init": a.init, "encoder": out.model.config, "dataset": a.dataset, "labels": a.labels });
    echo(&dir, "finetune", g, config, results.clone())?;
    print(g, &results, || {
        let r = reported.pearson_r.map_or("n/a".into(), |r| format!("{r:.4}"));
        format!("best epoch {}; rmse {:.4}, pearson r {r} over {} complexes\n", out.best_epoch, reported.rmse, reported.n)
    })
}

pub fn eval(a: &EvalArgs, g: Globals) -> Result<()> {
    require_file(&a.labels, "labels")?;
    require_file(&a.checkpoint, "checkpoint")?;
    let model = Model::load(&a.checkpoint)?;
    let ds = open(&a.dataset)?;
    let labels = load_labels(&a.labels)?;
    let splits = labeled_splits(&ds, &labels, g.seed)?;
    let examples: Vec<Example> = match a.split {
        SplitChoice::Train => splits.train,
        SplitChoice::Val => splits.val,
        SplitChoice::Test => splits.test,
        SplitChoice::All => [splits.train, splits.val, splits.test].concat(),
    };
    if examples.is_empty() {
        return Err(TrainError::EmptySplit("requested").into());
    }
    let report = trainer::evaluate(&model, &examples)?;
    if let Some(out) = &a.out {
        let dir = parent_dir(out);
        std::fs::create_dir_all(&dir)?;
        write_json(out, &report)?;
        let config = json!({ "checkpoint": a.checkpoint, "split": a.split, "dataset": a.dataset, "labels": a.labels });
        echo(&dir, "eval", g, config, json!(report))?;
    }
    print(g, &report, || {
        let r = report.pearson_r.map_or("n/a".into(), |r| format!("{r:.4}"));
        format!("rmse {:.4}, pearson r {r}, n {}\n", report.rmse, report.n)
    })
}

pub fn gradcheck(a: &GradcheckArgs, g: Globals) -> Result<()> {
    let start = std::time::Instant::now();
    let results = gradcheck::run_suite(g.seed..g.seed + a.seeds).map_err(anyhow::Error::msg)?;
    let failures: Vec<_> = results.iter().filter(|r| !r.passed).collect();
    let names: BTreeSet<&str> = results.iter().map(|r| r.name.as_str()).collect();
    let worst = results.iter().map(|r| r.max_violation).fold(0.0, f64::max);
    let summary = json!({
        "checks": results.len(),
        "cases": names.len(),
        "seeds": a.seeds,
        "failures": failures,
        "worst_violation": worst,
        "seconds": start.elapsed().as_secs_f64(),
    });
    print(g, &summary, || {
        let mut t = format!(
            "{} checks ({} cases x {} seeds), {} failed, worst error ratio {worst:.3e}\n",
            results.len(),
            names.len(),
            a.seeds,
            failures.len()
        );
        for f in &failures {
            let _ = writeln!(t, "  FAIL {} seed {}: ratio {:.3e}", f.name, f.seed, f.max_violation);
        }
        t
    })?;
    if failures.is_empty() {
        Ok(())
    } else {
        bail!("{} gradient checks failed", failures.len())
    }
}

pub fn graph_export(a: &ExportArgs, _g: Globals) -> Result<()> {
    let ds = open(&a.dataset)?;
    let c = ds.get(&a.id)?;
    let graph = c.graph(a.pose, ds.graph_cutoff())?;
    let text = serde_json::to_string(&graph.to_json())?;
    match &a.out {
        Some(out) => std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?,
        None => emit(&(text + "\n"))?,
    }
    Ok(())
}
