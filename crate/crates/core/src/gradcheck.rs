//! Central finite-difference checks of reverse-mode gradients, for every
//! tape operation and for the full pretraining objective.
//!
//! A coordinate passes when `|analytic - numeric| ≤ max(REL_TOL·max(|a|,|n|), ABS_FLOOR)`.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng as _;
use serde::Serialize;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::curation::{curate_entry, FilterConfig};
use crate::encoder::{EncoderConfig, GraphBatch, Head, Model};
use crate::graph::DEFAULT_CUTOFF;
use crate::objective::{self, AnchorTerms, ObjectiveConfig};
use crate::rng::{keyed_rng, Rng};
use crate::store::sampler::{sample_pretrain_batch, SamplerConfig};
use crate::store::Dataset;
use crate::synthetic;
use crate::trainer::batch_objective;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub seed: u64,
    pub checked: usize,
    pub max_abs_err: f64,
    /// Largest `|a - n| / max(REL_TOL·max(|a|,|n|), ABS_FLOOR)`; at most 1
    /// when the check passes.
    pub max_violation: f64,
    pub passed: bool,
}

/// Boxed scalar function of several matrix inputs, built on a fresh tape.
pub type ScalarFn<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, String> + 'a;

/// Compares reverse-mode gradients with central differences at the listed
/// `(input, row, col)` coordinates, or at every coordinate when `None`.
pub fn check(
    name: &str,
    seed: u64,
    inputs: &[Array2<f64>],
    f: &ScalarFn,
    coords: Option<&[(usize, usize, usize)]>,
) -> Result<CheckResult, String> {
    let eval = |xs: &[Array2<f64>]| -> Result<f64, String> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.scalar_value(out).map_err(|e| e.to_string())
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.var(x.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.grad(out, &vars).map_err(|e| e.to_string())?;

    let all: Vec<(usize, usize, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = inputs
                .iter()
                .enumerate()
                .flat_map(|(k, x)| (0..x.nrows()).flat_map(move |r| (0..x.ncols()).map(move |c| (k, r, c))))
                .collect();
            &all
        }
    };
    let mut xs = inputs.to_vec();
    let (mut max_abs, mut max_violation) = (0.0f64, 0.0f64);
    for &(k, r, c) in coords {
        let orig = xs[k][[r, c]];
        xs[k][[r, c]] = orig + STEP;
        let plus = eval(&xs)?;
        xs[k][[r, c]] = orig - STEP;
        let minus = eval(&xs)?;
        xs[k][[r, c]] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let analytic = grads[k][[r, c]];
        let err = (analytic - numeric).abs();
        let allowed = (REL_TOL * analytic.abs().max(numeric.abs())).max(ABS_FLOOR);
        max_abs = max_abs.max(err);
        max_violation = max_violation.max(if err.is_finite() { err / allowed } else { f64::INFINITY });
    }
    Ok(CheckResult {
        name: name.into(),
        seed,
        checked: coords.len(),
        max_abs_err: max_abs,
        max_violation,
        passed: max_violation <= 1.0,
    })
}

fn rand_matrix(rng: &mut Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(lo..hi))
}

/// Contracts an output with fixed random weights so that every output
/// entry carries a distinct upstream gradient.
fn contract(tape: &mut Tape, out: Var, seed: u64) -> Result<Var, AutodiffError> {
    let (r, c) = tape.shape(out)?;
    let mut rng = keyed_rng(seed, "contract");
    let w = tape.constant(rand_matrix(&mut rng, r, c, -1.0, 1.0));
    let prod = tape.mul(out, w)?;
    tape.sum(prod)
}

type OpCase = (&'static str, fn(&mut Rng) -> Vec<Array2<f64>>, fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>);

fn dims(rng: &mut Rng) -> (usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5))
}

fn two_same(rng: &mut Rng) -> Vec<Array2<f64>> {
    let (r, c) = dims(rng);
    vec![rand_matrix(rng, r, c, -2.0, 2.0), rand_matrix(rng, r, c, -2.0, 2.0)]
}

fn one(rng: &mut Rng) -> Vec<Array2<f64>> {
    let (r, c) = dims(rng);
    vec![rand_matrix(rng, r, c, -2.0, 2.0)]
}

fn one_positive(rng: &mut Rng) -> Vec<Array2<f64>> {
    let (r, c) = dims(rng);
    vec![rand_matrix(rng, r, c, 0.3, 3.0)]
}

fn row_broadcast(rng: &mut Rng) -> Vec<Array2<f64>> {
    let (r, c) = dims(rng);
    vec![rand_matrix(rng, r, c, -2.0, 2.0), rand_matrix(rng, 1, c, -2.0, 2.0)]
}

fn col_broadcast(rng: &mut Rng) -> Vec<Array2<f64>> {
    let (r, c) = dims(rng);
    vec![rand_matrix(rng, r, c, -2.0, 2.0), rand_matrix(rng, r, 1, 0.5, 2.0)]
}

fn op_cases() -> Vec<OpCase> {
    vec![
        ("add", two_same, |t, v| t.add(v[0], v[1])),
        ("add_row_broadcast", row_broadcast, |t, v| t.add(v[0], v[1])),
        ("sub", two_same, |t, v| t.sub(v[0], v[1])),
        ("sub_scalar_left", |rng| vec![rand_matrix(rng, 1, 1, -2.0, 2.0), one(rng).remove(0)], |t, v| t.sub(v[0], v[1])),
        ("mul", two_same, |t, v| t.mul(v[0], v[1])),
        ("mul_col_broadcast", col_broadcast, |t, v| t.mul(v[0], v[1])),
        ("div", |rng| {
            let (r, c) = dims(rng);
            vec![rand_matrix(rng, r, c, -2.0, 2.0), rand_matrix(rng, r, c, 0.5, 2.0)]
        }, |t, v| t.div(v[0], v[1])),
        ("div_col_broadcast", col_broadcast, |t, v| t.div(v[0], v[1])),
        ("matmul", |rng| {
            let (r, k, c) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
            vec![rand_matrix(rng, r, k, -2.0, 2.0), rand_matrix(rng, k, c, -2.0, 2.0)]
        }, |t, v| t.matmul(v[0], v[1])),
        ("sum", one, |t, v| {
            let s = t.sum(v[0])?;
            t.mul(s, s)
        }),
        ("mean", one, |t, v| {
            let s = t.mean(v[0])?;
            t.mul(s, s)
        }),
        ("sum_rows", one, |t, v| t.sum_rows(v[0])),
        ("sum_cols", one, |t, v| t.sum_cols(v[0])),
        ("exp", one, |t, v| t.exp(v[0])),
        ("log", one_positive, |t, v| t.log(v[0])),
        ("sqrt", one_positive, |t, v| t.sqrt(v[0])),
        ("pow", one_positive, |t, v| t.pow(v[0], 1.7)),
        ("scale", one, |t, v| t.scale(v[0], -2.5)),
        ("neg", one, |t, v| t.neg(v[0])),
        ("sigmoid", one, |t, v| t.sigmoid(v[0])),
        ("silu", one, |t, v| t.silu(v[0])),
        ("cosine_cutoff", |rng| {
            let (r, c) = dims(rng);
            // Spans both sides of the cutoff while staying clear of it.
            vec![Array2::from_shape_simple_fn((r, c), || {
                let x: f64 = rng.random_range(0.1..6.5);
                if (x - 5.0).abs() < 0.05 { 4.9 } else { x }
            })]
        }, |t, v| t.cosine_cutoff(v[0], 5.0)),
        ("transpose", one, |t, v| t.transpose(v[0])),
        ("concat_cols", |rng| {
            let r = rng.random_range(1..5);
            let (c1, c2) = (rng.random_range(1..4), rng.random_range(1..4));
            vec![rand_matrix(rng, r, c1, -2.0, 2.0), rand_matrix(rng, r, c2, -2.0, 2.0)]
        }, |t, v| t.concat_cols(&[v[0], v[1]])),
        ("concat_rows", |rng| {
            let c = rng.random_range(1..5);
            let (r1, r2) = (rng.random_range(1..4), rng.random_range(1..4));
            vec![rand_matrix(rng, r1, c, -2.0, 2.0), rand_matrix(rng, r2, c, -2.0, 2.0)]
        }, |t, v| t.concat_rows(&[v[0], v[1]])),
        ("gather_rows", one, |t, v| {
            let n = t.shape(v[0])?.0;
            let idx: Rc<[usize]> = (0..2 * n + 1).map(|i| (i * 7 + 3) % n).collect::<Vec<_>>().into();
            t.gather_rows(v[0], &idx)
        }),
        ("scatter_add_rows", one, |t, v| {
            let n = t.shape(v[0])?.0;
            let idx: Rc<[usize]> = (0..n).map(|i| (i * 5 + 1) % 3).collect::<Vec<_>>().into();
            t.scatter_add_rows(v[0], &idx, 3)
        }),
        ("cosine_similarity", |rng| {
            let (r, c) = (rng.random_range(1..5), rng.random_range(2..6));
            vec![rand_matrix(rng, r, c, -2.0, 2.0), rand_matrix(rng, r, c, -2.0, 2.0)]
        }, |t, v| t.cosine_similarity(v[0], v[1])),
        ("logsumexp", one, |t, v| t.logsumexp(v[0])),
    ]
}

pub fn op_names() -> Vec<&'static str> {
    op_cases().into_iter().map(|c| c.0).collect()
}

/// Every tape operation at one seed.
pub fn check_ops(seed: u64) -> Result<Vec<CheckResult>, String> {
    op_cases()
        .into_iter()
        .map(|(name, make, op)| {
            let mut rng = keyed_rng(seed, name);
            let inputs = make(&mut rng);
            let f = move |t: &mut Tape, v: &[Var]| -> Result<Var, String> {
                let out = op(t, v).map_err(|e| e.to_string())?;
                contract(t, out, seed).map_err(|e| e.to_string())
            };
            check(name, seed, &inputs, &f, None)
        })
        .collect()
}

/// L1 with respect to the embedding matrix for a random anchor layout.
pub fn check_contrastive(seed: u64) -> Result<CheckResult, String> {
    let mut rng = keyed_rng(seed, "contrastive");
    let n_anchor = rng.random_range(2..5);
    let per = rng.random_range(2..5);
    let dim = rng.random_range(3..7);
    let rows = n_anchor * (1 + per);
    let z = rand_matrix(&mut rng, rows, dim, -1.0, 1.0);
    let anchors: Vec<AnchorTerms> = (0..n_anchor)
        .map(|k| AnchorTerms {
            anchor_row: k,
            decoys: (0..per).map(|j| (n_anchor + k * per + j, if j == 0 { 1.0 } else { rng.random_range(0.5..8.0) })).collect(),
            local_d_max: Some(8.0),
        })
        .collect();
    let cfg = ObjectiveConfig::default();
    let f = |t: &mut Tape, v: &[Var]| objective::contrastive_loss(t, v[0], &anchors, &cfg, Some(8.0)).map_err(|e| e.to_string());
    check("contrastive_loss", seed, &[z], &f, None)
}

/// L2 with respect to the predicted scores.
pub fn check_dsm(seed: u64) -> Result<CheckResult, String> {
    let mut rng = keyed_rng(seed, "dsm");
    let rows = rng.random_range(2..8);
    let pred = rand_matrix(&mut rng, rows, 3, -3.0, 3.0);
    let target = rand_matrix(&mut rng, rows, 3, -3.0, 3.0);
    let f = |t: &mut Tape, v: &[Var]| objective::dsm_loss(t, v[0], &target, 2).map_err(|e| e.to_string());
    check("dsm_loss", seed, &[pred], &f, None)
}

/// Small pretraining dataset shared by the model-level checks.
pub fn fixture_dataset() -> Dataset {
    let records: Vec<_> = (0..3)
        .map(|i| {
            let s = synthetic::structure(synthetic::DEFAULT_SEED, i);
            curate_entry(&s, &FilterConfig::default()).0.pop().expect("synthetic entries pass curation")
        })
        .collect();
    let cfg = crate::decoys::DecoyGenConfig { poses_per_complex: 6, ..synthetic::decoy_config(synthetic::DEFAULT_SEED) };
    let stored = synthetic::with_decoys(records, &cfg, 1).expect("decoys");
    Dataset::from_memory(stored, DEFAULT_CUTOFF).expect("dataset")
}

fn small_model(seed: u64) -> Model {
    Model::new(EncoderConfig { layers: 2, hidden_dim: 6, rbf_bins: 4, projection_dim: 5, init_seed: seed, ..Default::default() })
        .expect("valid config")
}

/// Energy head with respect to all node coordinates of one graph.
pub fn check_energy_positions(ds: &Dataset, seed: u64) -> Result<CheckResult, String> {
    let model = small_model(seed);
    let c = &ds.complexes[seed as usize % ds.len()];
    let g = c.graph(None, ds.graph_cutoff()).map_err(|e| e.to_string())?;
    let batch = GraphBatch::new(&[&g]).map_err(|e| e.to_string())?;
    let f = |t: &mut Tape, v: &[Var]| -> Result<Var, String> {
        let bound = model.bind(t, false);
        let enc = crate::encoder::encode(t, &model, &bound, &batch, v[0]).map_err(|e| e.to_string())?;
        crate::encoder::head(t, &bound, Head::Energy, enc.z).map_err(|e| e.to_string())
    };
    check("energy_positions", seed, std::slice::from_ref(&batch.positions), &f, None)
}

/// `L = L1 + μ·L2` with respect to the model parameters, at one random
/// coordinate of every parameter tensor.
pub fn check_full_objective(ds: &Dataset, seed: u64) -> Result<CheckResult, String> {
    let model = small_model(seed);
    let sampler = SamplerConfig { batch_size: 3, decoys_per_anchor: 4, perturbed_per_anchor: 2, ..Default::default() };
    let batch = sample_pretrain_batch(ds, &sampler, seed, 0, 0).map_err(|e| e.to_string())?;
    let obj = ObjectiveConfig::default();
    let local: Vec<Option<f64>> = batch.samples.iter().map(|s| ds.get(&s.complex_id).ok().and_then(|c| c.max_rmsd())).collect();
    let params = model.params.values().to_vec();
    let mut rng = keyed_rng(seed, "full-objective");
    let coords: Vec<(usize, usize, usize)> =
        params.iter().enumerate().map(|(k, p)| (k, rng.random_range(0..p.nrows()), rng.random_range(0..p.ncols()))).collect();
    let f = |t: &mut Tape, v: &[Var]| -> Result<Var, String> {
        let bound = crate::encoder::Bound::from_vars(&model, v.to_vec());
        batch_objective(t, &model, &bound, &batch, &obj, ds.d_max(), &local).map(|r| r.0).map_err(|e| e.to_string())
    };
    check("full_objective", seed, &params, &f, Some(&coords))
}

/// The complete suite over `seeds`: every op, both loss terms, the energy
/// coordinate gradient and the full objective.
pub fn run_suite(seeds: impl IntoIterator<Item = u64>) -> Result<Vec<CheckResult>, String> {
    let ds = fixture_dataset();
    let mut out = Vec::new();
    for seed in seeds {
        out.extend(check_ops(seed)?);
        out.push(check_contrastive(seed)?);
        out.push(check_dsm(seed)?);
        out.push(check_energy_positions(&ds, seed)?);
        out.push(check_full_objective(&ds, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        // d/dx of x·x is 2x; a function whose tape disagrees with its values
        // must fail. Forward x·x, but route the gradient through 3x.
        let f = |t: &mut Tape, v: &[Var]| -> Result<Var, String> {
            let sq = t.mul(v[0], v[0]).map_err(|e| e.to_string())?;
            let value = t.value(sq).map_err(|e| e.to_string())?.clone();
            let lin = t.scale(v[0], 3.0).map_err(|e| e.to_string())?;
            let lin_val = t.value(lin).map_err(|e| e.to_string())?.clone();
            let offset = t.constant(value - lin_val);
            let out = t.add(lin, offset).map_err(|e| e.to_string())?;
            t.sum(out).map_err(|e| e.to_string())
        };
        let r = check("bad", 0, &[Array2::from_elem((1, 1), 0.5)], &f, None).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn one_seed_passes() {
        let results = run_suite([3]).unwrap();
        for r in &results {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(results.len(), op_names().len() + 4);
    }
}
