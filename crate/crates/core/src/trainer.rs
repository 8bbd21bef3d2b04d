//! Contrastive pretraining, affinity fine-tuning and evaluation.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::encoder::{self, EncoderError, GraphBatch, Head, Model};
use crate::graph::ComplexGraph;
use crate::objective::{self, AnchorTerms, ObjectiveConfig, ObjectiveError};
use crate::rng::{permutation, stream_rng};
use crate::store::labels::{Label, Split};
use crate::store::sampler::{sample_pretrain_batch, steps_per_epoch, PretrainBatch, SamplerConfig};
use crate::store::{Dataset, StoreError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("loss diverged at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize, last_good: Box<Model> },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("{targets} targets but {predictions} predictions")]
    LengthMismatch { targets: usize, predictions: usize },
}

type Result<T> = std::result::Result<T, TrainError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub pretrain_epochs: usize,
    pub finetune_max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr_reduce_factor: f64,
    pub lr_reduce_patience: usize,
    pub pretrain_batch: usize,
    pub finetune_batch: usize,
    pub decoys_per_anchor: usize,
    pub perturbed_per_anchor: usize,
    /// Fraction of complexes held out to report a pretraining validation
    /// loss. Zero disables it.
    pub pretrain_val_fraction: f64,
    /// Stop pretraining when the validation loss has not improved for this
    /// many epochs. Needs a validation split.
    pub pretrain_early_stop_patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 1e-6,
            pretrain_epochs: 20,
            finetune_max_epochs: 300,
            early_stop_patience: 40,
            lr_reduce_factor: 0.1,
            lr_reduce_patience: 10,
            pretrain_batch: 8,
            finetune_batch: 128,
            decoys_per_anchor: 10,
            perturbed_per_anchor: 10,
            pretrain_val_fraction: 0.0,
            pretrain_early_stop_patience: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be non-negative, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative".into());
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor <= 1.0) {
            return bad("lr_reduce_factor must lie in (0, 1]".into());
        }
        if self.pretrain_batch == 0 || self.finetune_batch == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.pretrain_epochs == 0 || self.finetune_max_epochs == 0 {
            return bad("epoch counts must be positive".into());
        }
        if self.early_stop_patience == 0 || self.lr_reduce_patience == 0 {
            return bad("patience values must be positive".into());
        }
        if !(0.0..0.5).contains(&self.pretrain_val_fraction) {
            return bad("pretrain_val_fraction must lie in [0, 0.5)".into());
        }
        if self.pretrain_early_stop_patience.is_some() && self.pretrain_val_fraction == 0.0 {
            return bad("pretrain early stopping needs pretrain_val_fraction > 0".into());
        }
        Ok(())
    }

    pub fn sampler(&self, sigma: f64) -> SamplerConfig {
        SamplerConfig {
            batch_size: self.pretrain_batch,
            decoys_per_anchor: self.decoys_per_anchor,
            perturbed_per_anchor: self.perturbed_per_anchor,
            sigma,
            allow_replacement: true,
        }
    }
}

/// Adam with decoupled weight decay:
/// `θ ← θ - lr·(m̂/(√v̂ + ε) + wd·θ)`.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, shapes: &[Array2<f64>]) -> Self {
        let zeros = || shapes.iter().map(|p| Array2::zeros(p.dim())).collect::<Vec<_>>();
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + eps) + wd * *p;
                *p -= lr * update;
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLoss {
    /// Contrastive term, absent when no anchor had a positive pair.
    pub l1: Option<f64>,
    pub l2: f64,
    pub total: f64,
}

/// Builds `L = L1 + μ·L2` for one batch on `tape`. `local_d_max` holds the
/// largest stored decoy RMSD of each sample's complex.
pub fn batch_objective(
    tape: &mut Tape,
    model: &Model,
    bound: &encoder::Bound,
    batch: &PretrainBatch,
    obj: &ObjectiveConfig,
    d_max: Option<f64>,
    local_d_max: &[Option<f64>],
) -> Result<(Var, StepLoss)> {
    let b = batch.samples.len();
    let mut graphs: Vec<&ComplexGraph> = batch.samples.iter().map(|s| &s.anchor).collect();
    let mut anchors = Vec::with_capacity(b);
    for (k, s) in batch.samples.iter().enumerate() {
        let first = graphs.len();
        graphs.extend(s.decoys.iter().map(|d| &d.graph));
        anchors.push(AnchorTerms {
            anchor_row: k,
            decoys: s.decoys.iter().enumerate().map(|(j, d)| (first + j, d.rmsd)).collect(),
            local_d_max: local_d_max.get(k).copied().flatten(),
        });
    }
    let gb = GraphBatch::new(&graphs)?;
    let pos = tape.constant(gb.positions.clone());
    let enc = encoder::encode(tape, model, bound, &gb, pos)?;
    let proj = encoder::head(tape, bound, Head::Projection, enc.z)?;
    let l1 = match objective::contrastive_loss(tape, proj, &anchors, obj, d_max) {
        Ok(v) => Some(v),
        Err(ObjectiveError::NoPositivePairsInBatch) => None,
        Err(e) => return Err(e.into()),
    };

    let copies: Vec<_> = batch.samples.iter().flat_map(|s| &s.perturbed).collect();
    let l2 = if copies.is_empty() {
        tape.scalar(0.0)
    } else {
        let pgraphs: Vec<&ComplexGraph> = copies.iter().map(|c| &c.graph).collect();
        let pb = GraphBatch::new(&pgraphs)?;
        let ppos = tape.constant(pb.positions.clone());
        let penc = encoder::encode(tape, model, bound, &pb, ppos)?;
        let score = encoder::score_head(tape, bound, &pb, &penc)?;
        let target: Vec<f64> = copies.iter().flat_map(|c| objective::dsm_target(&c.noise, c.sigma)).flatten().collect();
        let target = Array2::from_shape_vec((target.len() / 3, 3), target).expect("three columns");
        objective::dsm_loss(tape, score, &target, copies.len())?
    };
    let total = objective::total_loss_var(tape, l1, l2, obj.mu)?;
    let loss = StepLoss {
        l1: l1.map(|v| tape.scalar_value(v)).transpose()?,
        l2: tape.scalar_value(l2)?,
        total: tape.scalar_value(total)?,
    };
    Ok((total, loss))
}

fn local_d_max(ds: &Dataset, batch: &PretrainBatch) -> Vec<Option<f64>> {
    batch.samples.iter().map(|s| ds.get(&s.complex_id).ok().and_then(|c| c.max_rmsd())).collect()
}

/// Loss and parameter gradients for one batch.
pub fn pretrain_step(
    model: &Model,
    ds: &Dataset,
    batch: &PretrainBatch,
    obj: &ObjectiveConfig,
) -> Result<(StepLoss, Vec<Array2<f64>>)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true);
    let (total, loss) = batch_objective(&mut tape, model, &bound, batch, obj, ds.d_max(), &local_d_max(ds, batch))?;
    let grads = tape.grad(total, &bound.vars)?;
    Ok((loss, grads))
}

fn batch_loss(model: &Model, ds: &Dataset, batch: &PretrainBatch, obj: &ObjectiveConfig) -> Result<StepLoss> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    Ok(batch_objective(&mut tape, model, &bound, batch, obj, ds.d_max(), &local_d_max(ds, batch))?.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Rows of `losscurve.csv`: `epoch,train_loss,val_loss`.
pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in curve {
        w.serialize(row).expect("serialize loss row");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub struct PretrainOutcome {
    pub model: Model,
    pub curve: Vec<EpochLoss>,
    /// Complexes held out for the validation loss.
    pub validation_ids: Vec<String>,
}

/// Deterministic validation subset: the first `round(fraction·n)` ids of a
/// seeded permutation, at least two whenever the fraction is positive.
pub fn holdout_ids(ds: &Dataset, fraction: f64, seed: u64) -> BTreeSet<String> {
    if fraction <= 0.0 {
        return BTreeSet::new();
    }
    let n = ds.len();
    let k = ((fraction * n as f64).round() as usize).max(2).min(n.saturating_sub(2));
    let ids: Vec<&str> = ds.ids().collect();
    permutation(&mut stream_rng(seed, 0x5641_4C00), n).into_iter().take(k).map(|i| ids[i].to_string()).collect()
}

fn is_divergence(e: &TrainError) -> bool {
    matches!(e, TrainError::Encoder(EncoderError::NonFiniteActivation(_)) | TrainError::Objective(ObjectiveError::NonFiniteScore))
}

/// Runs the pretraining schedule. `on_epoch` sees each finished epoch.
pub fn pretrain(
    ds: &Dataset,
    mut model: Model,
    obj: &ObjectiveConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    obj.validate()?;
    let held = holdout_ids(ds, cfg.pretrain_val_fraction, cfg.seed);
    let train = ds.exclude(&held);
    let val = (!held.is_empty()).then(|| ds.retain(|id| held.contains(id)));
    let sampler = cfg.sampler(obj.sigma);
    sampler.validate()?;
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay, model.params.values());
    let mut curve = Vec::with_capacity(cfg.pretrain_epochs);
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    for epoch in 0..cfg.pretrain_epochs {
        let steps = steps_per_epoch(train.len(), sampler.batch_size);
        let mut sum = 0.0;
        for step in 0..steps {
            let diverged = |model: &Model| TrainError::DivergedLoss { epoch: epoch + 1, step, last_good: Box::new(model.clone()) };
            let batch = sample_pretrain_batch(&train, &sampler, cfg.seed, epoch, step)?;
            let (loss, grads) = match pretrain_step(&model, &train, &batch, obj) {
                Ok(r) => r,
                Err(e) if is_divergence(&e) => return Err(diverged(&model)),
                Err(e) => return Err(e),
            };
            if !loss.total.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(diverged(&model));
            }
            let before = model.clone();
            opt.step(model.params.values_mut(), &grads);
            if !model.params.all_finite() {
                return Err(diverged(&before));
            }
            sum += loss.total;
        }
        let val_loss = match &val {
            Some(v) => Some(validation_loss(&model, v, &sampler, obj, cfg.seed, epoch)?),
            None => None,
        };
        let row = EpochLoss { epoch: epoch + 1, train_loss: sum / steps as f64, val_loss };
        on_epoch(&row);
        curve.push(row);
        if let (Some(p), Some(vl)) = (cfg.pretrain_early_stop_patience, val_loss) {
            if vl < best_val {
                best_val = vl;
                best_epoch = epoch;
            } else if epoch - best_epoch >= p {
                break;
            }
        }
    }
    Ok(PretrainOutcome { model, curve, validation_ids: held.into_iter().collect() })
}

fn validation_loss(model: &Model, val: &Dataset, sampler: &SamplerConfig, obj: &ObjectiveConfig, seed: u64, epoch: usize) -> Result<f64> {
    let steps = steps_per_epoch(val.len(), sampler.batch_size);
    let mut sum = 0.0;
    for step in 0..steps {
        let batch = sample_pretrain_batch(val, sampler, seed, epoch, step)?;
        sum += batch_loss(model, val, &batch, obj)?.total;
    }
    Ok(sum / steps as f64)
}

/// RMSE and Pearson correlation of predictions against targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    /// Absent when fewer than two points or either side has zero variance.
    pub pearson_r: Option<f64>,
    pub n: usize,
}

pub fn metrics(y: &[f64], y_hat: &[f64]) -> Result<MetricReport> {
    if y.len() != y_hat.len() {
        return Err(TrainError::LengthMismatch { targets: y.len(), predictions: y_hat.len() });
    }
    let n = y.len();
    if n == 0 {
        return Err(TrainError::EmptySplit("evaluation"));
    }
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    let pearson_r = if n < 2 {
        None
    } else {
        let my = y.iter().sum::<f64>() / n as f64;
        let mp = y_hat.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in y.iter().zip(y_hat) {
            sxy += (a - my) * (b - mp);
            sxx += (a - my).powi(2);
            syy += (b - mp).powi(2);
        }
        (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
    };
    Ok(MetricReport { rmse: mse.sqrt(), pearson_r, n })
}

/// One labeled complex ready for regression.
#[derive(Clone, Debug)]
pub struct Example {
    pub complex_id: String,
    pub graph: ComplexGraph,
    pub affinity: f64,
}

pub fn predict(model: &Model, examples: &[Example], batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let graphs: Vec<&ComplexGraph> = chunk.iter().map(|e| &e.graph).collect();
        out.extend(model.predict_affinity(&graphs)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Model, examples: &[Example]) -> Result<MetricReport> {
    let y: Vec<f64> = examples.iter().map(|e| e.affinity).collect();
    metrics(&y, &predict(model, examples, 128)?)
}

#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

/// Native graphs for every labeled complex in `ds`. Labels without a split
/// are assigned 80/10/10 by a seeded permutation of their ids.
pub fn labeled_splits(ds: &Dataset, labels: &[Label], seed: u64) -> Result<Splits> {
    let cutoff = ds.graph_cutoff();
    let mut unassigned = Vec::new();
    let mut splits = Splits::default();
    let mut sorted: Vec<&Label> = labels.iter().collect();
    sorted.sort_by(|a, b| a.complex_id.cmp(&b.complex_id));
    for l in sorted {
        let graph = ds.get(&l.complex_id)?.graph(None, cutoff)?;
        let ex = Example { complex_id: l.complex_id.clone(), graph, affinity: l.affinity };
        match l.split {
            Some(Split::Train) => splits.train.push(ex),
            Some(Split::Val) => splits.val.push(ex),
            Some(Split::Test) => splits.test.push(ex),
            None => unassigned.push(ex),
        }
    }
    let n = unassigned.len();
    let n_val = (n as f64 * 0.1).round() as usize;
    let n_test = n_val;
    let order = permutation(&mut stream_rng(seed, 0x5350_4C54), n);
    let mut slots: Vec<Option<Example>> = unassigned.into_iter().map(Some).collect();
    for (rank, i) in order.into_iter().enumerate() {
        let ex = slots[i].take().expect("each index once");
        if rank < n_val {
            splits.val.push(ex);
        } else if rank < n_val + n_test {
            splits.test.push(ex);
        } else {
            splits.train.push(ex);
        }
    }
    for part in [&mut splits.train, &mut splits.val, &mut splits.test] {
        part.sort_by(|a, b| a.complex_id.cmp(&b.complex_id));
    }
    Ok(splits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse: f64,
    pub lr: f64,
}

pub fn finetune_curve_csv(curve: &[FinetuneEpoch]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in curve {
        w.serialize(row).expect("serialize finetune row");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub struct FinetuneOutcome {
    /// Parameters from the epoch with the lowest validation RMSE.
    pub model: Model,
    pub best_epoch: usize,
    pub curve: Vec<FinetuneEpoch>,
    pub validation: MetricReport,
    pub test: Option<MetricReport>,
}

/// Replaces the regression head (output bias set to the mean training
/// label), then trains the whole model on MSE with early stopping on
/// validation RMSE and a plateau learning-rate schedule.
pub fn finetune(mut model: Model, splits: &Splits, cfg: &TrainConfig, mut on_epoch: impl FnMut(&FinetuneEpoch)) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if splits.val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let mean = splits.train.iter().map(|e| e.affinity).sum::<f64>() / splits.train.len() as f64;
    model.reset_head(Head::Regression, cfg.seed, mean);
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay, model.params.values());
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut plateau = Plateau::new(cfg);
    let mut curve = Vec::new();
    for epoch in 1..=cfg.finetune_max_epochs {
        let order = permutation(&mut stream_rng(cfg.seed, 0x4654_0000_0000 | epoch as u64), splits.train.len());
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.finetune_batch) {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, true);
            let graphs: Vec<&ComplexGraph> = chunk.iter().map(|&i| &splits.train[i].graph).collect();
            let y = Array2::from_shape_fn((chunk.len(), 1), |(r, _)| splits.train[chunk[r]].affinity);
            let gb = GraphBatch::new(&graphs)?;
            let pos = tape.constant(gb.positions.clone());
            let diverged = |model: &Model| TrainError::DivergedLoss { epoch, step: 0, last_good: Box::new(model.clone()) };
            let enc = match encoder::encode(&mut tape, &model, &bound, &gb, pos) {
                Ok(e) => e,
                Err(EncoderError::NonFiniteActivation(_)) => return Err(diverged(&best.2)),
                Err(e) => return Err(e.into()),
            };
            let pred = encoder::head(&mut tape, &bound, Head::Regression, enc.z)?;
            let yv = tape.constant(y);
            let diff = tape.sub(pred, yv)?;
            let sq = tape.mul(diff, diff)?;
            let mse = tape.mean(sq)?;
            let loss = tape.scalar_value(mse)?;
            let grads = tape.grad(mse, &bound.vars)?;
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(diverged(&best.2));
            }
            opt.step(model.params.values_mut(), &grads);
            sum += loss * chunk.len() as f64;
        }
        let val = evaluate(&model, &splits.val)?;
        let row = FinetuneEpoch { epoch, train_loss: sum / splits.train.len() as f64, val_rmse: val.rmse, lr: opt.lr };
        on_epoch(&row);
        curve.push(row);
        match plateau.observe(epoch, val.rmse) {
            Verdict::Improved => best = (val.rmse, epoch, model.clone()),
            Verdict::ReduceLr => opt.lr *= cfg.lr_reduce_factor,
            Verdict::Stop => break,
            Verdict::Wait => {}
        }
    }
    let (_, best_epoch, model) = best;
    let validation = evaluate(&model, &splits.val)?;
    let test = if splits.test.is_empty() { None } else { Some(evaluate(&model, &splits.test)?) };
    Ok(FinetuneOutcome { model, best_epoch, curve, validation, test })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Wait,
    ReduceLr,
    Stop,
}

/// Early stopping and learning-rate plateau bookkeeping on a validation
/// metric where lower is better. Training stops `early_stop_patience`
/// epochs after the best one; every `lr_reduce_patience` consecutive
/// epochs without improvement ask for a learning-rate cut.
#[derive(Clone, Debug)]
pub struct Plateau {
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
    stop_patience: usize,
    reduce_patience: usize,
}

impl Plateau {
    pub fn new(cfg: &TrainConfig) -> Self {
        Plateau {
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
            stop_patience: cfg.early_stop_patience,
            reduce_patience: cfg.lr_reduce_patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> Verdict {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            return Verdict::Improved;
        }
        self.bad_epochs += 1;
        if epoch - self.best_epoch >= self.stop_patience {
            Verdict::Stop
        } else if self.bad_epochs.is_multiple_of(self.reduce_patience) {
            Verdict::ReduceLr
        } else {
            Verdict::Wait
        }
    }
}
