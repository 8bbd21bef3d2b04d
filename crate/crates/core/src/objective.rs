//! Pretraining objective: a two-category InfoNCE loss whose decoy negatives
//! are weighted by normalized RMSD, a denoising score-matching term, and
//! their weighted sum.
//!
//! For anchor `k` with positive `i`,
//!
//! ```text
//! l(k,i) = -( s(k,i)/τ - log Σ_j β(k,j) exp(s(k,j)/τ) )
//! ```
//!
//! where `s` is cosine similarity, `j` runs over negatives only (decoys
//! above the RMSD threshold and the other anchors of the batch), and
//! `β = α·rmsd/d_max` for decoy negatives and 1 for other complexes. The
//! log-sum is evaluated as a max-shifted logsumexp over `log β + s/τ`.
//! L1 averages `l(k,i)` over all anchor/positive pairs in the batch.
//!
//! The score-matching term is the squared distance between a predicted
//! score and the denoising target `(x - x')/σ²`, summed over ligand
//! coordinates and averaged over noisy copies.

use std::rc::Rc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::decoys::POSITIVE_RMSD_MAX;
use crate::geometry::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("decoy weighting needs d_max, but the dataset has no decoys")]
    DmaxUnavailable,
    #[error("anchor {0} has no negatives")]
    NoNegatives(usize),
    #[error("no anchor in the batch has a positive pair")]
    NoPositivePairsInBatch,
    #[error("score is not finite")]
    NonFiniteScore,
    #[error("invalid objective configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

type Result<T> = std::result::Result<T, ObjectiveError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Negatives only, as the loss is written.
    NegativesOnly,
    /// Conventional InfoNCE: the positive also appears in the log-sum.
    WithPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmaxMode {
    /// One maximum over the whole dataset view.
    Global,
    /// The largest decoy RMSD of each anchor's own complex.
    PerAnchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Dedicated equivariant score head; used for training.
    Head,
    /// Coordinate gradient of the energy head; evaluation only.
    Autograd,
}

/// Contents of `objective.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub tau: f64,
    pub alpha: f64,
    pub positive_rmsd_max: f64,
    pub include_cross_complex_negatives: bool,
    pub include_decoy_negatives: bool,
    pub denominator: Denominator,
    pub d_max_mode: DmaxMode,
    pub sigma: f64,
    pub mu: f64,
    pub score_mode: ScoreMode,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            tau: 0.5,
            alpha: 1.0,
            positive_rmsd_max: POSITIVE_RMSD_MAX,
            include_cross_complex_negatives: true,
            include_decoy_negatives: true,
            denominator: Denominator::NegativesOnly,
            d_max_mode: DmaxMode::Global,
            sigma: 0.5,
            mu: 1.0,
            score_mode: ScoreMode::Head,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ObjectiveError::InvalidConfig(m.into()));
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be non-negative");
        }
        if !(self.positive_rmsd_max >= 0.0) {
            return bad("positive_rmsd_max must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeKind {
    DecoyNegative,
    CrossComplex,
}

/// Weight of one negative: `α·rmsd/d_max` for decoys, 1 otherwise.
pub fn beta(rmsd: f64, d_max: Option<f64>, kind: NegativeKind, alpha: f64) -> Result<f64> {
    match kind {
        NegativeKind::CrossComplex => Ok(1.0),
        NegativeKind::DecoyNegative => match d_max {
            Some(d) if d > 0.0 => Ok(alpha * rmsd / d),
            _ => Err(ObjectiveError::DmaxUnavailable),
        },
    }
}

/// Rows of an embedding matrix that take part in one anchor's terms.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorTerms {
    pub anchor_row: usize,
    /// Sampled decoys as `(row, rmsd)`.
    pub decoys: Vec<(usize, f64)>,
    /// Largest decoy RMSD stored for this complex, for per-anchor d_max.
    pub local_d_max: Option<f64>,
}

/// One anchor's positives and weighted negatives after applying the
/// configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedAnchor {
    pub anchor_row: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<(usize, f64)>,
}

/// Splits decoys into positives and negatives and attaches weights. With
/// `d_max` unavailable every weight is 1.
pub fn resolve_terms(anchors: &[AnchorTerms], cfg: &ObjectiveConfig, global_d_max: Option<f64>) -> Result<Vec<ResolvedAnchor>> {
    let mut out = Vec::with_capacity(anchors.len());
    for a in anchors {
        let d_max = match cfg.d_max_mode {
            DmaxMode::Global => global_d_max,
            DmaxMode::PerAnchor => a.local_d_max,
        }
        .filter(|d| *d > 0.0);
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for &(row, rmsd) in &a.decoys {
            if rmsd <= cfg.positive_rmsd_max {
                positives.push(row);
            } else if cfg.include_decoy_negatives {
                let w = match d_max {
                    Some(_) => beta(rmsd, d_max, NegativeKind::DecoyNegative, cfg.alpha)?,
                    None => 1.0,
                };
                negatives.push((row, w));
            }
        }
        if cfg.include_cross_complex_negatives {
            for b in anchors.iter().filter(|b| b.anchor_row != a.anchor_row) {
                negatives.push((b.anchor_row, beta(0.0, None, NegativeKind::CrossComplex, cfg.alpha)?));
            }
        }
        out.push(ResolvedAnchor { anchor_row: a.anchor_row, positives, negatives });
    }
    Ok(out)
}

/// Per-anchor sum of `l(k,i)` over its positives, on `tape`.
fn anchor_loss_sum(tape: &mut Tape, z: Var, a: &ResolvedAnchor, tau: f64, denominator: Denominator) -> Result<Var> {
    if a.negatives.is_empty() {
        return Err(ObjectiveError::NoNegatives(a.anchor_row));
    }
    let candidates: Vec<usize> = a.positives.iter().copied().chain(a.negatives.iter().map(|n| n.0)).collect();
    let anchors: Rc<[usize]> = vec![a.anchor_row; candidates.len()].into();
    let za = tape.gather_rows(z, &anchors)?;
    let zc = tape.gather_rows(z, &candidates.into())?;
    let sim = tape.cosine_similarity(za, zc)?;
    let logits = tape.scale(sim, 1.0 / tau)?;
    let p = a.positives.len();
    let pos_idx: Rc<[usize]> = (0..p).collect::<Vec<_>>().into();
    let neg_idx: Rc<[usize]> = (p..p + a.negatives.len()).collect::<Vec<_>>().into();
    let pos = tape.gather_rows(logits, &pos_idx)?;
    let neg = tape.gather_rows(logits, &neg_idx)?;
    let log_beta = tape.constant(Array2::from_shape_fn((a.negatives.len(), 1), |(j, _)| a.negatives[j].1.ln()));
    let weighted = tape.add(neg, log_beta)?;
    let neg_row = tape.transpose(weighted)?;
    let per_pair = match denominator {
        Denominator::NegativesOnly => {
            let lse = tape.logsumexp(neg_row)?;
            tape.sub(lse, pos)?
        }
        Denominator::WithPositive => {
            // One row per positive: [s_i/τ, log β_j + s_j/τ ...].
            let ones = tape.constant(Array2::ones((p, 1)));
            let negs = tape.mul(ones, neg_row)?;
            let rows = tape.concat_cols(&[pos, negs])?;
            let lse = tape.logsumexp(rows)?;
            tape.sub(lse, pos)?
        }
    };
    Ok(tape.sum(per_pair)?)
}

/// L1 over the whole batch. `z` holds one embedding per row; rows named in
/// `anchors` must exist. Anchors lacking positives or negatives contribute
/// nothing; if no anchor has both, [`ObjectiveError::NoPositivePairsInBatch`].
pub fn contrastive_loss(
    tape: &mut Tape,
    z: Var,
    anchors: &[AnchorTerms],
    cfg: &ObjectiveConfig,
    global_d_max: Option<f64>,
) -> Result<Var> {
    cfg.validate()?;
    let resolved = resolve_terms(anchors, cfg, global_d_max)?;
    let usable = || resolved.iter().filter(|a| !a.positives.is_empty() && !a.negatives.is_empty());
    let pairs: usize = usable().map(|a| a.positives.len()).sum();
    if pairs == 0 {
        return Err(ObjectiveError::NoPositivePairsInBatch);
    }
    let mut total: Option<Var> = None;
    for a in usable() {
        let s = anchor_loss_sum(tape, z, a, cfg.tau, cfg.denominator)?;
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    Ok(tape.scale(total.expect("at least one pair"), 1.0 / pairs as f64)?)
}

/// `l(k,i)` for a single anchor/positive pair with explicit weighted
/// negatives.
pub fn info_nce_pair(z_k: &[f64], z_i: &[f64], negatives: &[(Vec<f64>, f64)], tau: f64) -> Result<f64> {
    let dim = z_k.len();
    if z_i.len() != dim || negatives.iter().any(|(z, _)| z.len() != dim) {
        return Err(ObjectiveError::Shape("embeddings differ in dimension".into()));
    }
    if negatives.is_empty() {
        return Err(ObjectiveError::NoNegatives(0));
    }
    let mut rows = Vec::with_capacity((negatives.len() + 2) * dim);
    rows.extend_from_slice(z_k);
    rows.extend_from_slice(z_i);
    for (z, _) in negatives {
        rows.extend_from_slice(z);
    }
    let mut tape = Tape::new();
    let z = tape.constant(Array2::from_shape_vec((negatives.len() + 2, dim), rows).expect("sized"));
    let resolved = ResolvedAnchor {
        anchor_row: 0,
        positives: vec![1],
        negatives: negatives.iter().enumerate().map(|(j, (_, b))| (j + 2, *b)).collect(),
    };
    let l = anchor_loss_sum(&mut tape, z, &resolved, tau, Denominator::NegativesOnly)?;
    Ok(tape.scalar_value(l)?)
}

/// Denoising target `(x - x')/σ² = -ε/σ²` for noise `ε`.
pub fn dsm_target(noise: &[Vec3], sigma: f64) -> Vec<Vec3> {
    let s2 = sigma * sigma;
    noise.iter().map(|e| [-e[0] / s2, -e[1] / s2, -e[2] / s2]).collect()
}

/// L2 on `tape`: `predicted` stacks the scores of `copies` noisy copies
/// (`L × 3`) and `targets` the matching denoising targets.
pub fn dsm_loss(tape: &mut Tape, predicted: Var, targets: &Array2<f64>, copies: usize) -> Result<Var> {
    if tape.shape(predicted)? != targets.dim() {
        return Err(ObjectiveError::Shape(format!("score {:?} vs target {:?}", tape.shape(predicted)?, targets.dim())));
    }
    if copies == 0 {
        return Err(ObjectiveError::Shape("no perturbed copies".into()));
    }
    if !tape.value(predicted)?.iter().all(|v| v.is_finite()) {
        return Err(ObjectiveError::NonFiniteScore);
    }
    let t = tape.constant(targets.clone());
    let diff = tape.sub(predicted, t)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum(sq)?;
    Ok(tape.scale(total, 1.0 / copies as f64)?)
}

/// L2 from explicit per-copy scores and noise, without a tape.
pub fn dsm_loss_values(scores: &[Vec<Vec3>], noises: &[Vec<Vec3>], sigma: f64) -> Result<f64> {
    if scores.len() != noises.len() || scores.is_empty() {
        return Err(ObjectiveError::Shape("need one score per noisy copy".into()));
    }
    let mut total = 0.0;
    for (s, e) in scores.iter().zip(noises) {
        if s.len() != e.len() {
            return Err(ObjectiveError::Shape("score and noise differ in atom count".into()));
        }
        for (sv, tv) in s.iter().zip(dsm_target(e, sigma)) {
            if sv.iter().any(|v| !v.is_finite()) {
                return Err(ObjectiveError::NonFiniteScore);
            }
            total += (0..3).map(|d| (sv[d] - tv[d]).powi(2)).sum::<f64>();
        }
    }
    Ok(total / scores.len() as f64)
}

/// Coordinate gradient of an energy written on the tape, i.e. the score
/// `∂E/∂x'` at `x`.
pub fn score_from_energy(x: &[Vec3], energy: impl FnOnce(&mut Tape, Var) -> std::result::Result<Var, AutodiffError>) -> Result<Vec<Vec3>> {
    let mut tape = Tape::new();
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let pos = tape.var(Array2::from_shape_vec((x.len(), 3), flat).expect("sized"));
    let e = energy(&mut tape, pos)?;
    let g = tape.grad(e, &[pos])?.remove(0);
    Ok(g.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

/// `L1 + μ·L2`.
pub fn total_loss(l1: f64, l2: f64, mu: f64) -> f64 {
    l1 + mu * l2
}

/// `L1 + μ·L2` on the tape; a missing L1 (no positive pairs) counts as 0.
pub fn total_loss_var(tape: &mut Tape, l1: Option<Var>, l2: Var, mu: f64) -> Result<Var> {
    let weighted = tape.scale(l2, mu)?;
    Ok(match l1 {
        Some(l1) => tape.add(l1, weighted)?,
        None => weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert_eq!(beta(7.0, Some(7.0), NegativeKind::DecoyNegative, 1.0).unwrap(), 1.0);
        assert_eq!(beta(3.5, Some(7.0), NegativeKind::DecoyNegative, 0.5).unwrap(), 0.25);
        assert_eq!(beta(123.0, None, NegativeKind::CrossComplex, 0.3).unwrap(), 1.0);
        assert_eq!(beta(1.0, None, NegativeKind::DecoyNegative, 1.0), Err(ObjectiveError::DmaxUnavailable));
    }

    #[test]
    fn pair_examples() {
        let l = info_nce_pair(&[1.0, 0.0], &[1.0, 0.0], &[(vec![0.0, 1.0], 1.0)], 1.0).unwrap();
        assert!((l + 1.0).abs() < 1e-15);
        let l = info_nce_pair(&[1.0, 0.0], &[0.6, 0.8], &[(vec![0.6, -0.8], 1.0)], 0.37).unwrap();
        assert!(l.abs() < 1e-12);
        let l = info_nce_pair(&[1.0, 0.0], &[1.0, 0.0], &[(vec![0.0, 1.0], 1.0), (vec![-1.0, 0.0], 1.0)], 1.0).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln() - 1.0;
        assert!((l - expected).abs() < 1e-15);
        assert!((l + 0.686738).abs() < 1e-6);
        assert_eq!(info_nce_pair(&[1.0], &[1.0], &[], 1.0), Err(ObjectiveError::NoNegatives(0)));
        assert!(matches!(info_nce_pair(&[0.0, 0.0], &[1.0, 0.0], &[(vec![0.0, 1.0], 1.0)], 1.0), Err(ObjectiveError::Autodiff(AutodiffError::ZeroVector(_)))));
    }

    #[test]
    fn increasing_a_weight_increases_the_loss() {
        let neg = |b: f64| vec![(vec![0.2, 1.0], b), (vec![-0.5, 0.3], 0.7)];
        let mut last = f64::NEG_INFINITY;
        for b in [0.1, 0.4, 0.9, 1.6] {
            let l = info_nce_pair(&[1.0, 0.1], &[0.9, 0.2], &neg(b), 0.5).unwrap();
            assert!(l > last);
            last = l;
        }
    }

    #[test]
    fn l1_zero_when_positive_matches_negative() {
        let z = Array2::from_shape_vec((4, 2), vec![1.0, 0.0, 0.6, 0.8, 0.0, 1.0, 0.6, -0.8]).unwrap();
        let mut tape = Tape::new();
        let zv = tape.constant(z);
        let anchors = [AnchorTerms { anchor_row: 0, decoys: vec![(1, 0.5), (3, 4.0)], local_d_max: None }];
        let cfg = ObjectiveConfig { include_cross_complex_negatives: false, ..Default::default() };
        let l1 = contrastive_loss(&mut tape, zv, &anchors, &cfg, None).unwrap();
        assert!(tape.scalar_value(l1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn batch_without_positives() {
        let mut tape = Tape::new();
        let z = tape.constant(Array2::ones((3, 2)));
        let anchors = [
            AnchorTerms { anchor_row: 0, decoys: vec![(2, 5.0)], local_d_max: Some(5.0) },
            AnchorTerms { anchor_row: 1, decoys: vec![], local_d_max: None },
        ];
        let cfg = ObjectiveConfig::default();
        assert_eq!(contrastive_loss(&mut tape, z, &anchors, &cfg, Some(5.0)).unwrap_err(), ObjectiveError::NoPositivePairsInBatch);
    }

    #[test]
    fn dsm_examples() {
        let sigma = 0.5;
        let copies: Vec<Vec<Vec3>> = vec![vec![[0.3, -0.2, 0.1], [1.0, 0.5, -0.4]], vec![[-0.7, 0.2, 0.9], [0.0, 0.1, 0.2]]];
        let native = [[0.0; 3], [0.0; 3]];
        // E = -|x'|²/(2σ²) with the native at the origin: score equals target exactly.
        let scores = copies
            .iter()
            .map(|xp| {
                score_from_energy(xp, |t, x| {
                    let sq = t.mul(x, x)?;
                    let s = t.sum(sq)?;
                    t.scale(s, -1.0 / (2.0 * sigma * sigma))
                })
                .unwrap()
            })
            .collect::<Vec<_>>();
        let noises: Vec<Vec<Vec3>> = copies.iter().map(|xp| xp.iter().zip(&native).map(|(p, n)| [p[0] - n[0], p[1] - n[1], p[2] - n[2]]).collect()).collect();
        assert!(dsm_loss_values(&scores, &noises, sigma).unwrap().abs() < 1e-12);

        let flat = |x: &[Vec3]| score_from_energy(x, |t, _| Ok(t.scalar(3.0))).unwrap();
        let eps = vec![vec![[sigma, 0.0, 0.0]]];
        let l = dsm_loss_values(&[flat(&eps[0])], &eps, sigma).unwrap();
        assert!((l - 4.0).abs() < 1e-12);
        let eps2 = vec![vec![[2.0 * sigma, 0.0, 0.0]]];
        assert!((dsm_loss_values(&[flat(&eps2[0])], &eps2, sigma).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn dsm_tape_matches_values() {
        let noise = vec![vec![[0.1, -0.3, 0.2], [0.05, 0.0, -0.4]], vec![[0.2, 0.2, 0.2], [-0.1, 0.3, 0.0]]];
        let scores = vec![vec![[1.0, 2.0, 0.0], [0.0, -1.0, 0.5]], vec![[0.3, 0.0, 0.1], [0.0, 0.0, 0.0]]];
        let sigma = 0.5;
        let mut tape = Tape::new();
        let pred = tape.var(Array2::from_shape_vec((4, 3), scores.iter().flatten().flatten().copied().collect()).unwrap());
        let targets: Vec<f64> = noise.iter().flat_map(|n| dsm_target(n, sigma)).flatten().collect();
        let l = dsm_loss(&mut tape, pred, &Array2::from_shape_vec((4, 3), targets).unwrap(), 2).unwrap();
        let expected = dsm_loss_values(&scores, &noise, sigma).unwrap();
        assert!((tape.scalar_value(l).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn total_loss_arithmetic() {
        assert_eq!(total_loss(-0.5, 4.0, 0.5), 1.5);
        assert_eq!(total_loss(0.7, 9.0, 0.0), 0.7);
        assert_eq!(total_loss(0.0, 2.0, 1.5), 3.0);
    }

    #[test]
    fn config_validation_and_json() {
        assert!(ObjectiveConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(ObjectiveConfig { mu: -1.0, ..Default::default() }.validate().is_err());
        let json = r#"{"tau": 0.2, "denominator": "with_positive", "d_max_mode": "per_anchor"}"#;
        let cfg: ObjectiveConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.denominator, Denominator::WithPositive);
        assert_eq!(cfg.alpha, 1.0);
        assert!(serde_json::from_str::<ObjectiveConfig>(r#"{"temperature": 1}"#).is_err());
    }

    /// Random batch: `n` anchor rows followed by `per` decoy rows per anchor.
    fn random_batch(seed: u64, n: usize, per: usize, dim: usize) -> (Array2<f64>, Vec<AnchorTerms>) {
        use rand::Rng as _;
        let mut rng = crate::rng::stream_rng(seed, 1);
        let z = Array2::from_shape_simple_fn((n * (1 + per), dim), || rng.random_range(-1.0..1.0));
        let anchors = (0..n)
            .map(|k| AnchorTerms {
                anchor_row: k,
                decoys: (0..per).map(|j| (n + k * per + j, if j == 0 { 0.7 } else { rng.random_range(0.0..9.0) })).collect(),
                local_d_max: Some(9.0),
            })
            .collect();
        (z, anchors)
    }

    fn l1(z: &Array2<f64>, anchors: &[AnchorTerms], cfg: &ObjectiveConfig, d_max: Option<f64>) -> f64 {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let l = contrastive_loss(&mut tape, zv, anchors, cfg, d_max).unwrap();
        tape.scalar_value(l).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn order_of_rows_and_terms_does_not_matter(seed: u64, n in 2usize..5, per in 1usize..6, shuffle: u64) {
            let (z, anchors) = random_batch(seed, n, per, 6);
            let cfg = ObjectiveConfig::default();
            let base = l1(&z, &anchors, &cfg, Some(9.0));
            let mut rng = crate::rng::stream_rng(shuffle, 2);
            let perm = crate::rng::permutation(&mut rng, z.nrows());
            let mut zp = z.clone();
            for (old, &new) in perm.iter().enumerate() {
                zp.row_mut(new).assign(&z.row(old));
            }
            let mut moved: Vec<AnchorTerms> = anchors
                .iter()
                .map(|a| AnchorTerms {
                    anchor_row: perm[a.anchor_row],
                    decoys: a.decoys.iter().rev().map(|&(r, d)| (perm[r], d)).collect(),
                    local_d_max: a.local_d_max,
                })
                .collect();
            moved.reverse();
            let other = l1(&zp, &moved, &cfg, Some(9.0));
            proptest::prop_assert!((base - other).abs() <= 1e-12 * base.abs().max(1.0), "{base} vs {other}");
        }

        #[test]
        fn single_negative_loss_scales_inversely_with_tau(seed: u64, tau in 0.05f64..3.0, c in 0.1f64..10.0) {
            use rand::Rng as _;
            let mut rng = crate::rng::stream_rng(seed, 3);
            let mut v = || (0..5).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (zk, zi, zn) = (v(), v(), v());
            let a = info_nce_pair(&zk, &zi, &[(zn.clone(), 1.0)], tau).unwrap();
            let b = info_nce_pair(&zk, &zi, &[(zn, 1.0)], c * tau).unwrap();
            proptest::prop_assert!((a - c * b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {}", c * b);
        }

        #[test]
        fn rmsd_at_d_max_matches_the_unweighted_loss(seed: u64, n in 2usize..5, per in 1usize..6) {
            let (z, mut anchors) = random_batch(seed, n, per, 6);
            let cfg = ObjectiveConfig { alpha: 1.0, ..Default::default() };
            for a in &mut anchors {
                for d in a.decoys.iter_mut().skip(1) {
                    d.1 = 9.0;
                }
            }
            let weighted = l1(&z, &anchors, &cfg, Some(9.0));
            let unweighted = l1(&z, &anchors, &cfg, None);
            proptest::prop_assert_eq!(weighted.to_bits(), unweighted.to_bits());
        }
    }
}
