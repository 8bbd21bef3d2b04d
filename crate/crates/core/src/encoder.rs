//! Invariant message-passing encoder with projection, energy, regression and
//! score heads.
//!
//! Messages see only node states, edge type and a Gaussian radial-basis
//! expansion of interatomic distance, smoothly switched off at the cutoff,
//! so every scalar output is invariant to rigid motions, reflections and
//! node relabelling. The score head predicts a 3-vector per ligand atom as
//! a learned weighted sum of unit bond directions, which rotates with the
//! input.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::rc::Rc;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::geometry::Vec3;
use crate::graph::{ComplexGraph, EdgeType, FEATURE_DIM};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),
    #[error("cannot encode an empty graph")]
    EmptyGraph,
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type Result<T> = std::result::Result<T, EncoderError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub rbf_bins: usize,
    /// Distance (Å) where messages vanish; matches the graph cutoff.
    pub cutoff: f64,
    pub projection_dim: usize,
    pub init_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { layers: 3, hidden_dim: 64, rbf_bins: 16, cutoff: 5.0, projection_dim: 64, init_seed: 0 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.rbf_bins == 0 || self.projection_dim == 0 {
            return Err(EncoderError::InvalidConfig("layers and dimensions must be positive".into()));
        }
        if !(self.cutoff > 0.0) {
            return Err(EncoderError::InvalidConfig("cutoff must be positive".into()));
        }
        Ok(())
    }

    fn message_fan_in(&self) -> usize {
        2 * self.hidden_dim + self.rbf_bins + EdgeType::ALL.len()
    }
}

/// Named parameter matrices in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    lookup: BTreeMap<String, usize>,
}

impl Params {
    fn new() -> Self {
        Params { names: Vec::new(), values: Vec::new(), lookup: BTreeMap::new() }
    }

    fn insert(&mut self, name: String, value: Array2<f64>) {
        self.lookup.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.index_of(name).map(move |i| &mut self.values[i])
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// The three dense heads over the pooled embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Projection,
    Energy,
    Regression,
}

impl Head {
    pub fn prefix(self) -> &'static str {
        match self {
            Head::Projection => "proj",
            Head::Energy => "energy",
            Head::Regression => "regress",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: EncoderConfig,
    pub params: Params,
}

fn uniform(rng: &mut crate::rng::Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl Model {
    /// Weights drawn from `U(-1/√fan_in, 1/√fan_in)`, biases zero.
    pub fn new(config: EncoderConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = stream_rng(config.init_seed, 0);
        let (h, k, t) = (config.hidden_dim, config.rbf_bins, EdgeType::ALL.len());
        let fan = config.message_fan_in();
        let mut p = Params::new();
        p.insert("embed.w".into(), uniform(&mut rng, FEATURE_DIM, h, FEATURE_DIM));
        p.insert("embed.b".into(), Array2::zeros((1, h)));
        let message_blocks = |p: &mut Params, rng: &mut crate::rng::Rng, prefix: &str, out: usize| {
            p.insert(format!("{prefix}.w_src"), uniform(rng, h, out, fan));
            p.insert(format!("{prefix}.w_dst"), uniform(rng, h, out, fan));
            p.insert(format!("{prefix}.w_rbf"), uniform(rng, k, out, fan));
            p.insert(format!("{prefix}.w_type"), uniform(rng, t, out, fan));
            p.insert(format!("{prefix}.b_msg"), Array2::zeros((1, out)));
        };
        for l in 0..config.layers {
            let prefix = format!("layer{l}");
            message_blocks(&mut p, &mut rng, &prefix, h);
            p.insert(format!("{prefix}.w_upd"), uniform(&mut rng, 2 * h, h, 2 * h));
            p.insert(format!("{prefix}.b_upd"), Array2::zeros((1, h)));
            p.insert(format!("{prefix}.w_gate"), uniform(&mut rng, 2 * h, h, 2 * h));
            p.insert(format!("{prefix}.b_gate"), Array2::zeros((1, h)));
        }
        for head in [Head::Projection, Head::Energy, Head::Regression] {
            let out = if head == Head::Projection { config.projection_dim } else { 1 };
            let prefix = head.prefix();
            p.insert(format!("{prefix}.w1"), uniform(&mut rng, h, h, h));
            p.insert(format!("{prefix}.b1"), Array2::zeros((1, h)));
            p.insert(format!("{prefix}.w2"), uniform(&mut rng, h, out, h));
            p.insert(format!("{prefix}.b2"), Array2::zeros((1, out)));
        }
        message_blocks(&mut p, &mut rng, "score", h);
        p.insert("score.w2".into(), uniform(&mut rng, h, 1, h));
        p.insert("score.b2".into(), Array2::zeros((1, 1)));
        Ok(Model { config, params: p })
    }

    /// Redraws one head's weights from `seed` and sets its output bias.
    pub fn reset_head(&mut self, head: Head, seed: u64, output_bias: f64) {
        let mut rng = stream_rng(seed, 1);
        let h = self.config.hidden_dim;
        let prefix = head.prefix();
        let out = if head == Head::Projection { self.config.projection_dim } else { 1 };
        *self.params.get_mut(&format!("{prefix}.w1")).expect("head") = uniform(&mut rng, h, h, h);
        self.params.get_mut(&format!("{prefix}.b1")).expect("head").fill(0.0);
        *self.params.get_mut(&format!("{prefix}.w2")).expect("head") = uniform(&mut rng, h, out, h);
        self.params.get_mut(&format!("{prefix}.b2")).expect("head").fill(output_bias);
    }

    /// Puts every parameter on `tape`, as variables when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .params
            .values()
            .iter()
            .map(|v| if trainable { tape.var(v.clone()) } else { tape.constant(v.clone()) })
            .collect();
        Bound { vars, lookup: self.params.lookup.clone() }
    }
}

/// Parameter handles on one tape.
pub struct Bound {
    pub vars: Vec<Var>,
    lookup: BTreeMap<String, usize>,
}

impl Bound {
    /// Handles for parameters already placed on a tape, in parameter order.
    pub fn from_vars(model: &Model, vars: Vec<Var>) -> Bound {
        assert_eq!(vars.len(), model.params.len(), "one variable per parameter");
        Bound { vars, lookup: model.params.lookup.clone() }
    }

    fn p(&self, name: &str) -> Var {
        self.vars[*self.lookup.get(name).unwrap_or_else(|| panic!("missing parameter {name}"))]
    }
}

/// Several graphs packed as one disjoint union.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub n_graphs: usize,
    pub n_nodes: usize,
    pub positions: Array2<f64>,
    pub features: Array2<f64>,
    /// Directed edges: each undirected edge appears in both directions.
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub edge_types: Array2<f64>,
    pub node_graph: Rc<[usize]>,
    pub inv_counts: Array2<f64>,
    /// Global indices of ligand nodes, graph by graph.
    pub ligand_nodes: Rc<[usize]>,
    pub ligand_counts: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&ComplexGraph]) -> Result<GraphBatch> {
        if graphs.is_empty() || graphs.iter().any(|g| g.num_nodes() == 0) {
            return Err(EncoderError::EmptyGraph);
        }
        let n_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut positions = Array2::zeros((n_nodes, 3));
        let mut features = Array2::zeros((n_nodes, FEATURE_DIM));
        let (mut src, mut dst, mut types) = (Vec::new(), Vec::new(), Vec::new());
        let mut node_graph = Vec::with_capacity(n_nodes);
        let mut inv_counts = Array2::zeros((graphs.len(), 1));
        let mut ligand_nodes = Vec::new();
        let mut ligand_counts = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            for (k, (p, f)) in g.positions.iter().zip(g.features()).enumerate() {
                for d in 0..3 {
                    positions[[offset + k, d]] = p[d];
                }
                for (d, v) in f.iter().enumerate() {
                    features[[offset + k, d]] = *v;
                }
                node_graph.push(gi);
            }
            for e in &g.edges {
                for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                    src.push(offset + a);
                    dst.push(offset + b);
                    types.push(e.kind.code() as usize);
                }
            }
            let lig = g.ligand_nodes();
            ligand_counts.push(lig.len());
            ligand_nodes.extend(lig.into_iter().map(|i| offset + i));
            inv_counts[[gi, 0]] = 1.0 / g.num_nodes() as f64;
            offset += g.num_nodes();
        }
        let mut edge_types = Array2::zeros((types.len(), EdgeType::ALL.len()));
        for (e, t) in types.iter().enumerate() {
            edge_types[[e, *t]] = 1.0;
        }
        Ok(GraphBatch {
            n_graphs: graphs.len(),
            n_nodes,
            positions,
            features,
            src: src.into(),
            dst: dst.into(),
            edge_types,
            node_graph: node_graph.into(),
            inv_counts,
            ligand_nodes: ligand_nodes.into(),
            ligand_counts,
        })
    }

    /// Ligand coordinates in `ligand_nodes` order.
    pub fn ligand_positions(&self) -> Array2<f64> {
        self.positions.select(ndarray::Axis(0), &self.ligand_nodes)
    }
}

/// Per-edge geometric inputs shared by all layers.
struct EdgeGeometry {
    rbf: Var,
    envelope: Var,
    types: Var,
    /// Unit vectors from source to destination, `e × 3`.
    direction: Var,
}

/// Tape handles produced by [`encode`].
pub struct Encoded {
    /// Graph embeddings, `n_graphs × hidden_dim`.
    pub z: Var,
    /// Final node states.
    pub h: Var,
    geometry: EdgeGeometry,
}

fn edge_geometry(tape: &mut Tape, cfg: &EncoderConfig, batch: &GraphBatch, positions: Var) -> Result<EdgeGeometry> {
    let ps = tape.gather_rows(positions, &batch.src)?;
    let pd = tape.gather_rows(positions, &batch.dst)?;
    let diff = tape.sub(pd, ps)?;
    let sq = tape.mul(diff, diff)?;
    let d2 = tape.sum_cols(sq)?;
    let d = tape.sqrt(d2)?;
    let k = cfg.rbf_bins;
    let width = if k > 1 { cfg.cutoff / (k - 1) as f64 } else { cfg.cutoff };
    let centers = tape.constant(Array2::from_shape_fn((1, k), |(_, i)| i as f64 * width));
    let off = tape.sub(d, centers)?;
    let off2 = tape.mul(off, off)?;
    let arg = tape.scale(off2, -1.0 / (2.0 * width * width))?;
    let rbf = tape.exp(arg)?;
    let envelope = tape.cosine_cutoff(d, cfg.cutoff)?;
    let types = tape.constant(batch.edge_types.clone());
    let direction = tape.div(diff, d)?;
    Ok(EdgeGeometry { rbf, envelope, types, direction })
}

fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    Ok(tape.add(xw, b)?)
}

/// Pre-activation of a message MLP: `[h_src, h_dst, rbf, type] W + b`,
/// computed with the node projections done before the gather.
fn message_preactivation(tape: &mut Tape, bound: &Bound, prefix: &str, h: Var, batch: &GraphBatch, geo: &EdgeGeometry) -> Result<Var> {
    let hs = tape.matmul(h, bound.p(&format!("{prefix}.w_src")))?;
    let hd = tape.matmul(h, bound.p(&format!("{prefix}.w_dst")))?;
    let ms = tape.gather_rows(hs, &batch.src)?;
    let md = tape.gather_rows(hd, &batch.dst)?;
    let mr = tape.matmul(geo.rbf, bound.p(&format!("{prefix}.w_rbf")))?;
    let mt = tape.matmul(geo.types, bound.p(&format!("{prefix}.w_type")))?;
    let a = tape.add(ms, md)?;
    let b = tape.add(mr, mt)?;
    let c = tape.add(a, b)?;
    Ok(tape.add(c, bound.p(&format!("{prefix}.b_msg")))?)
}

fn check_finite(tape: &Tape, v: Var, what: &'static str) -> Result<()> {
    if tape.value(v)?.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EncoderError::NonFiniteActivation(what))
    }
}

/// Runs the message-passing stack and mean pooling. `positions` must be
/// `n_nodes × 3` on `tape`.
pub fn encode(tape: &mut Tape, model: &Model, bound: &Bound, batch: &GraphBatch, positions: Var) -> Result<Encoded> {
    let cfg = &model.config;
    let geometry = edge_geometry(tape, cfg, batch, positions)?;
    let x = tape.constant(batch.features.clone());
    let pre = affine(tape, x, bound.p("embed.w"), bound.p("embed.b"))?;
    let mut h = tape.silu(pre)?;
    for l in 0..cfg.layers {
        let prefix = format!("layer{l}");
        let m_pre = message_preactivation(tape, bound, &prefix, h, batch, &geometry)?;
        let m_act = tape.silu(m_pre)?;
        let m = tape.mul(m_act, geometry.envelope)?;
        let agg = tape.scatter_add_rows(m, &batch.dst, batch.n_nodes)?;
        let hin = tape.concat_cols(&[h, agg])?;
        let u_pre = affine(tape, hin, bound.p(&format!("{prefix}.w_upd")), bound.p(&format!("{prefix}.b_upd")))?;
        let g_pre = affine(tape, hin, bound.p(&format!("{prefix}.w_gate")), bound.p(&format!("{prefix}.b_gate")))?;
        let u = tape.silu(u_pre)?;
        let gate = tape.sigmoid(g_pre)?;
        let upd = tape.mul(gate, u)?;
        h = tape.add(h, upd)?;
    }
    let pooled = tape.scatter_add_rows(h, &batch.node_graph, batch.n_graphs)?;
    let inv = tape.constant(batch.inv_counts.clone());
    let z = tape.mul(pooled, inv)?;
    check_finite(tape, z, "embedding")?;
    Ok(Encoded { z, h, geometry })
}

/// Two-layer head over the pooled embedding.
pub fn head(tape: &mut Tape, bound: &Bound, which: Head, z: Var) -> Result<Var> {
    let p = which.prefix();
    let a = affine(tape, z, bound.p(&format!("{p}.w1")), bound.p(&format!("{p}.b1")))?;
    let a = tape.silu(a)?;
    let out = affine(tape, a, bound.p(&format!("{p}.w2")), bound.p(&format!("{p}.b2")))?;
    check_finite(tape, out, "head output")?;
    Ok(out)
}

/// Score-head prediction, one 3-vector per ligand node in
/// `batch.ligand_nodes` order.
pub fn score_head(tape: &mut Tape, bound: &Bound, batch: &GraphBatch, enc: &Encoded) -> Result<Var> {
    let geo = &enc.geometry;
    let pre = message_preactivation(tape, bound, "score", enc.h, batch, geo)?;
    let act = tape.silu(pre)?;
    let phi = affine(tape, act, bound.p("score.w2"), bound.p("score.b2"))?;
    let phi = tape.mul(phi, geo.envelope)?;
    let contrib = tape.mul(phi, geo.direction)?;
    let per_node = tape.scatter_add_rows(contrib, &batch.dst, batch.n_nodes)?;
    let out = tape.gather_rows(per_node, &batch.ligand_nodes)?;
    check_finite(tape, out, "score")?;
    Ok(out)
}

/// Inference helpers that build and discard their own tape.
impl Model {
    fn run<T>(&self, graphs: &[&ComplexGraph], f: impl FnOnce(&mut Tape, &Bound, &GraphBatch, Encoded) -> Result<T>) -> Result<T> {
        let batch = GraphBatch::new(graphs)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let pos = tape.constant(batch.positions.clone());
        let enc = encode(&mut tape, self, &bound, &batch, pos)?;
        f(&mut tape, &bound, &batch, enc)
    }

    /// Graph embeddings, one row per graph.
    pub fn embed(&self, graphs: &[&ComplexGraph]) -> Result<Array2<f64>> {
        self.run(graphs, |tape, _, _, enc| Ok(tape.value(enc.z)?.clone()))
    }

    pub fn head_output(&self, graphs: &[&ComplexGraph], which: Head) -> Result<Array2<f64>> {
        self.run(graphs, |tape, bound, _, enc| {
            let out = head(tape, bound, which, enc.z)?;
            Ok(tape.value(out)?.clone())
        })
    }

    pub fn energy(&self, g: &ComplexGraph) -> Result<f64> {
        Ok(self.head_output(&[g], Head::Energy)?[[0, 0]])
    }

    pub fn predict_affinity(&self, graphs: &[&ComplexGraph]) -> Result<Array1<f64>> {
        Ok(self.head_output(graphs, Head::Regression)?.column(0).to_owned())
    }

    pub fn score(&self, g: &ComplexGraph) -> Result<Vec<Vec3>> {
        self.run(&[g], |tape, bound, batch, enc| {
            let s = score_head(tape, bound, batch, &enc)?;
            Ok(tape.value(s)?.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect())
        })
    }

    /// `∂ energy / ∂ x` for each ligand atom, by reverse-mode
    /// differentiation through the distance features.
    pub fn energy_coordinate_grad(&self, g: &ComplexGraph) -> Result<Vec<Vec3>> {
        let batch = GraphBatch::new(&[g])?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let pos = tape.var(batch.positions.clone());
        let enc = encode(&mut tape, self, &bound, &batch, pos)?;
        let e = head(&mut tape, &bound, Head::Energy, enc.z)?;
        let grad = tape.grad(e, &[pos])?.remove(0);
        Ok(batch.ligand_nodes.iter().map(|&i| [grad[[i, 0]], grad[[i, 1]], grad[[i, 2]]]).collect())
    }
}

const CKPT_MAGIC: [u8; 8] = *b"DFCKPT\0\0";
const CKPT_VERSION: u32 = 1;

impl Model {
    /// Checkpoint bytes: magic, version, the configuration as JSON, then
    /// each parameter as name, shape and row-major `f64` values, all
    /// little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        let cfg = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, v) in self.params.names.iter().zip(&self.params.values) {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(v.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(v.ncols() as u32).to_le_bytes());
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let bad = |m: &str| EncoderError::Checkpoint(m.to_string());
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = r.split_at(n);
            r = tail;
            Ok(head)
        };
        if take(8)? != CKPT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != CKPT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let cfg_len = u32_at(take(4)?) as usize;
        let config: EncoderConfig = serde_json::from_slice(take(cfg_len)?).map_err(|e| bad(&e.to_string()))?;
        let mut model = Model::new(config)?;
        let n = u32_at(take(4)?) as usize;
        if n != model.params.len() {
            return Err(bad("parameter count does not match configuration"));
        }
        for i in 0..n {
            let name_len = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
            let name = std::str::from_utf8(take(name_len)?).map_err(|_| bad("non-UTF-8 name"))?.to_string();
            let rows = u32_at(take(4)?) as usize;
            let cols = u32_at(take(4)?) as usize;
            if model.params.names[i] != name || model.params.values[i].dim() != (rows, cols) {
                return Err(bad(&format!("unexpected parameter {name} ({rows}×{cols})")));
            }
            let data = take(rows * cols * 8)?;
            let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            model.params.values[i] = Array2::from_shape_vec((rows, cols), values).expect("shape checked");
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| EncoderError::Io { path: path.display().to_string(), source };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let io = |source| EncoderError::Io { path: path.display().to_string(), source };
        let mut bytes = Vec::new();
        std::fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
        Model::from_bytes(&bytes)
    }
}
