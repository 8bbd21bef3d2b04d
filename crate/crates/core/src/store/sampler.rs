//! Deterministic pretraining batches: each sample is one real complex, a
//! draw of its decoys and a set of noisy copies of its ligand.
//!
//! Randomness comes from three ChaCha8 streams per `(seed, epoch, step)`,
//! numbered `kind << 62 | epoch << 32 | step`: kind 0 orders anchors for an
//! epoch (step field 0), kind 1 picks decoys, kind 2 draws coordinate noise.
//! Anchor and decoy choices use only [`crate::rng::uniform_below`].

use serde::{Deserialize, Serialize};

use super::{Dataset, StoreError};
use crate::decoys::is_positive;
use crate::geometry::Vec3;
use crate::graph::{perturb_ligand, ComplexGraph};
use crate::rng::{permutation, sample_distinct, stream_rng, uniform_below, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub decoys_per_anchor: usize,
    pub perturbed_per_anchor: usize,
    /// Noise scale (Å) of the perturbed copies.
    pub sigma: f64,
    /// Draw decoys with replacement when a complex has too few.
    pub allow_replacement: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { batch_size: 8, decoys_per_anchor: 10, perturbed_per_anchor: 10, sigma: 0.5, allow_replacement: true }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.batch_size == 0 {
            return Err(StoreError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(StoreError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StreamKind {
    Order = 0,
    Decoys = 1,
    Noise = 2,
}

fn stream(seed: u64, kind: StreamKind, epoch: usize, step: usize) -> Rng {
    let id = (kind as u64) << 62 | ((epoch as u64) & 0x3FFF_FFFF) << 32 | (step as u64 & 0xFFFF_FFFF);
    stream_rng(seed, id)
}

pub fn steps_per_epoch(n_complexes: usize, batch_size: usize) -> usize {
    n_complexes.div_ceil(batch_size)
}

/// Anchor visiting order for one epoch: a permutation of `0..n`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    permutation(&mut stream(seed, StreamKind::Order, epoch, 0), n)
}

/// Index-level content of one sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleIds {
    /// Position of the anchor in the dataset.
    pub anchor: usize,
    /// Positions into the anchor's decoy list, in draw order.
    pub decoys: Vec<usize>,
    pub with_replacement: bool,
}

/// Which complexes and decoys a step uses, without building any graphs.
pub fn sample_ids(ds: &Dataset, cfg: &SamplerConfig, seed: u64, epoch: usize, step: usize) -> Result<Vec<SampleIds>, StoreError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(StoreError::EmptyDataset("nothing to sample".into()));
    }
    let steps = steps_per_epoch(ds.len(), cfg.batch_size);
    if step >= steps {
        return Err(StoreError::InvalidConfig(format!("step {step} out of range, epoch has {steps} steps")));
    }
    let order = epoch_order(seed, epoch, ds.len());
    let end = ((step + 1) * cfg.batch_size).min(ds.len());
    let mut rng = stream(seed, StreamKind::Decoys, epoch, step);
    let mut out = Vec::new();
    for &anchor in &order[step * cfg.batch_size..end] {
        let c = &ds.complexes[anchor];
        let available = c.decoys.len();
        let k = cfg.decoys_per_anchor;
        let (decoys, with_replacement) = if available >= k {
            (sample_distinct(&mut rng, available, k), false)
        } else if !cfg.allow_replacement {
            return Err(StoreError::InsufficientDecoys { complex_id: c.complex_id().into(), available, needed: k });
        } else if available == 0 {
            (Vec::new(), true)
        } else {
            ((0..k).map(|_| uniform_below(&mut rng, available as u64) as usize).collect(), true)
        };
        out.push(SampleIds { anchor, decoys, with_replacement });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledDecoy {
    pub decoy: usize,
    pub rmsd: f64,
    pub is_positive: bool,
    pub graph: ComplexGraph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedCopy {
    pub graph: ComplexGraph,
    /// Noise added to each ligand node, in ligand node order.
    pub noise: Vec<Vec3>,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainSample {
    pub complex_id: String,
    pub anchor: ComplexGraph,
    pub decoys: Vec<SampledDecoy>,
    pub perturbed: Vec<PerturbedCopy>,
    pub with_replacement: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainBatch {
    pub epoch: usize,
    pub step: usize,
    pub samples: Vec<PretrainSample>,
}

pub fn sample_pretrain_batch(
    ds: &Dataset,
    cfg: &SamplerConfig,
    seed: u64,
    epoch: usize,
    step: usize,
) -> Result<PretrainBatch, StoreError> {
    let ids = sample_ids(ds, cfg, seed, epoch, step)?;
    let cutoff = ds.graph_cutoff();
    let threshold = ds.index.positive_rmsd_max;
    let mut noise_rng = stream(seed, StreamKind::Noise, epoch, step);
    let mut samples = Vec::with_capacity(ids.len());
    for s in ids {
        let c = &ds.complexes[s.anchor];
        let anchor = c.graph(None, cutoff)?;
        let decoys = s
            .decoys
            .iter()
            .map(|&d| {
                let rmsd = c.decoys[d].rmsd;
                Ok(SampledDecoy { decoy: d, rmsd, is_positive: is_positive(rmsd, threshold), graph: c.graph(Some(d), cutoff)? })
            })
            .collect::<Result<Vec<_>, StoreError>>()?;
        let perturbed = (0..cfg.perturbed_per_anchor)
            .map(|_| {
                let (graph, noise) = perturb_ligand(&anchor, cfg.sigma, &mut noise_rng)?;
                Ok(PerturbedCopy { graph, noise, sigma: cfg.sigma })
            })
            .collect::<Result<Vec<_>, StoreError>>()?;
        samples.push(PretrainSample {
            complex_id: c.complex_id().into(),
            anchor,
            decoys,
            perturbed,
            with_replacement: s.with_replacement,
        });
    }
    Ok(PretrainBatch { epoch, step, samples })
}
