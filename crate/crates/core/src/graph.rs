//! Typed 3D interaction graphs over a binding pocket and its ligand.
//!
//! Nodes are pocket protein atoms (protein atoms within the cutoff of any
//! ligand atom, in input order) followed by all ligand atoms. Edges are
//! undirected, stored once with `i < j`, sorted, and typed as
//! protein-protein contacts, ligand covalent bonds, or protein-ligand
//! interactions.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::ComplexRecord;
use crate::decoys::DecoyPose;
use crate::element::Element;
use crate::geometry::{distance_sq, Vec3};
use crate::rng::Rng;

pub const DEFAULT_CUTOFF: f64 = 5.0;

/// Element slots of the one-hot block, followed by "other metal" and
/// "other" buckets.
pub const ELEMENT_VOCAB: [Element; 10] = [
    Element::H,
    Element::C,
    Element::N,
    Element::O,
    Element::F,
    Element::P,
    Element::S,
    Element::CL,
    Element::BR,
    Element::I,
];
const METAL_SLOT: usize = ELEMENT_VOCAB.len();
const OTHER_SLOT: usize = ELEMENT_VOCAB.len() + 1;
const LIGAND_FLAG: usize = ELEMENT_VOCAB.len() + 2;
/// Width of a node feature row: element one-hot plus the is-ligand flag.
pub const FEATURE_DIM: usize = ELEMENT_VOCAB.len() + 3;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("no protein atom within {cutoff} Å of the ligand")]
    EmptyPocket { cutoff: f64 },
    #[error("pose has {pose} atoms but the ligand has {ligand}")]
    PoseMismatch { ligand: usize, pose: usize },
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    ProteinProtein,
    LigandCovalent,
    Interactive,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::ProteinProtein, EdgeType::LigandCovalent, EdgeType::Interactive];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<EdgeType> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub kind: EdgeType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGraph {
    pub positions: Vec<Vec3>,
    pub elements: Vec<Element>,
    pub ligand_mask: Vec<bool>,
    pub edges: Vec<Edge>,
}

/// Index of `e` in the one-hot block.
pub fn element_slot(e: Element) -> usize {
    match ELEMENT_VOCAB.iter().position(|v| *v == e) {
        Some(i) => i,
        None if e.is_metal() => METAL_SLOT,
        None => OTHER_SLOT,
    }
}

pub fn feature_row(e: Element, is_ligand: bool) -> [f64; FEATURE_DIM] {
    let mut row = [0.0; FEATURE_DIM];
    row[element_slot(e)] = 1.0;
    if is_ligand {
        row[LIGAND_FLAG] = 1.0;
    }
    row
}

impl ComplexGraph {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn features(&self) -> Vec<[f64; FEATURE_DIM]> {
        self.elements.iter().zip(&self.ligand_mask).map(|(e, l)| feature_row(*e, *l)).collect()
    }

    pub fn ligand_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.ligand_mask[i]).collect()
    }

    pub fn count_edges(&self, kind: EdgeType) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            positions: self.positions.clone(),
            features: self.features().iter().map(|r| r.to_vec()).collect(),
            edges: self.edges.iter().map(|e| [e.i, e.j, e.kind.code() as usize]).collect(),
            ligand_mask: self.ligand_mask.clone(),
            elements: self.elements.clone(),
        }
    }
}

/// Export layout: `edges` rows are `[i, j, type]` with type codes
/// 0 = protein-protein, 1 = ligand covalent, 2 = interactive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub positions: Vec<Vec3>,
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 3]>,
    pub ligand_mask: Vec<bool>,
    pub elements: Vec<Element>,
}

impl TryFrom<GraphJson> for ComplexGraph {
    type Error = GraphError;

    fn try_from(j: GraphJson) -> Result<Self, GraphError> {
        let n = j.positions.len();
        if j.elements.len() != n || j.ligand_mask.len() != n || j.features.len() != n {
            return Err(GraphError::Malformed("per-node arrays differ in length".into()));
        }
        let mut edges = Vec::with_capacity(j.edges.len());
        for [i, jj, t] in j.edges {
            let kind = u8::try_from(t)
                .ok()
                .and_then(EdgeType::from_code)
                .ok_or_else(|| GraphError::Malformed(format!("unknown edge type {t}")))?;
            if i >= jj || jj >= n {
                return Err(GraphError::Malformed(format!("bad edge ({i}, {jj})")));
            }
            edges.push(Edge { i, j: jj, kind });
        }
        let g = ComplexGraph { positions: j.positions, elements: j.elements, ligand_mask: j.ligand_mask, edges };
        let expected: Vec<Vec<f64>> = g.features().iter().map(|r| r.to_vec()).collect();
        if expected != j.features {
            return Err(GraphError::Malformed("features disagree with elements".into()));
        }
        Ok(g)
    }
}

/// Borrowed complex geometry, independent of where it was loaded from.
#[derive(Clone, Copy, Debug)]
pub struct GraphInput<'a> {
    pub protein_positions: &'a [Vec3],
    pub protein_elements: &'a [Element],
    pub ligand_positions: &'a [Vec3],
    pub ligand_elements: &'a [Element],
    pub ligand_bonds: &'a [(usize, usize)],
}

/// Builds the graph. With `allow_empty_pocket` a pose that has drifted out
/// of the pocket yields a ligand-only graph instead of an error.
pub fn assemble(input: GraphInput<'_>, cutoff: f64, allow_empty_pocket: bool) -> Result<ComplexGraph, GraphError> {
    let cut_sq = cutoff * cutoff;
    let lig = input.ligand_positions;
    let pocket: Vec<usize> = (0..input.protein_positions.len())
        .filter(|&p| lig.iter().any(|l| distance_sq(input.protein_positions[p], *l) <= cut_sq))
        .collect();
    if pocket.is_empty() && !allow_empty_pocket {
        return Err(GraphError::EmptyPocket { cutoff });
    }
    let np = pocket.len();
    let mut positions: Vec<Vec3> = pocket.iter().map(|&p| input.protein_positions[p]).collect();
    let mut elements: Vec<Element> = pocket.iter().map(|&p| input.protein_elements[p]).collect();
    positions.extend_from_slice(lig);
    elements.extend_from_slice(input.ligand_elements);
    let mut ligand_mask = vec![false; np];
    ligand_mask.resize(np + lig.len(), true);

    let mut edges = Vec::new();
    for a in 0..np {
        for b in a + 1..np {
            if distance_sq(positions[a], positions[b]) <= cut_sq {
                edges.push(Edge { i: a, j: b, kind: EdgeType::ProteinProtein });
            }
        }
        for (l, lp) in lig.iter().enumerate() {
            if distance_sq(positions[a], *lp) <= cut_sq {
                edges.push(Edge { i: a, j: np + l, kind: EdgeType::Interactive });
            }
        }
    }
    for &(a, b) in input.ligand_bonds {
        let (a, b) = (a.min(b), a.max(b));
        if a != b {
            edges.push(Edge { i: np + a, j: np + b, kind: EdgeType::LigandCovalent });
        }
    }
    edges.sort();
    edges.dedup();
    Ok(ComplexGraph { positions, elements, ligand_mask, edges })
}

/// Graph for `rec` with the ligand at its native coordinates or at `pose`.
pub fn build_graph(rec: &ComplexRecord, pose: Option<&DecoyPose>, cutoff: f64) -> Result<ComplexGraph, GraphError> {
    let protein_positions = rec.protein_positions();
    let protein_elements: Vec<Element> = rec.protein_atoms.iter().map(|a| a.element).collect();
    let ligand_elements: Vec<Element> = rec.ligand.atoms.iter().map(|a| a.element).collect();
    let native = rec.ligand_positions();
    let ligand_positions = match pose {
        Some(p) if p.ligand_coords.len() != native.len() => {
            return Err(GraphError::PoseMismatch { ligand: native.len(), pose: p.ligand_coords.len() })
        }
        Some(p) => p.ligand_coords.clone(),
        None => native,
    };
    assemble(
        GraphInput {
            protein_positions: &protein_positions,
            protein_elements: &protein_elements,
            ligand_positions: &ligand_positions,
            ligand_elements: &ligand_elements,
            ligand_bonds: &rec.ligand.bonds,
        },
        cutoff,
        false,
    )
}

/// Adds i.i.d. Gaussian noise to ligand coordinates only. Edges keep the
/// pre-noise topology. Returns the noisy graph and the noise, one row per
/// ligand node in node order.
pub fn perturb_ligand(g: &ComplexGraph, sigma: f64, rng: &mut Rng) -> Result<(ComplexGraph, Vec<Vec3>), GraphError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GraphError::InvalidSigma(sigma));
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| GraphError::InvalidSigma(sigma))?;
    let mut out = g.clone();
    let mut noise = Vec::new();
    for (i, p) in out.positions.iter_mut().enumerate() {
        if !g.ligand_mask[i] {
            continue;
        }
        let eps: Vec3 = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        for k in 0..3 {
            p[k] += eps[k];
        }
        noise.push(eps);
    }
    Ok((out, noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn input<'a>(
        pp: &'a [Vec3],
        pe: &'a [Element],
        lp: &'a [Vec3],
        le: &'a [Element],
        bonds: &'a [(usize, usize)],
    ) -> GraphInput<'a> {
        GraphInput { protein_positions: pp, protein_elements: pe, ligand_positions: lp, ligand_elements: le, ligand_bonds: bonds }
    }

    #[test]
    fn three_node_example() {
        let pp = [[0.0, 0.0, 0.0], [20.0, 0.0, 0.0]];
        let pe = [Element::N, Element::C];
        let lp = [[3.0, 0.0, 0.0], [9.0, 0.0, 0.0]];
        let le = [Element::C, Element::O];
        let g = assemble(input(&pp, &pe, &lp, &le, &[(0, 1)]), DEFAULT_CUTOFF, false).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.ligand_mask, vec![false, true, true]);
        assert_eq!(
            g.edges,
            vec![
                Edge { i: 0, j: 1, kind: EdgeType::Interactive },
                Edge { i: 1, j: 2, kind: EdgeType::LigandCovalent },
            ]
        );
    }

    #[test]
    fn cutoff_is_inclusive_and_empty_pocket_errors() {
        let pe = [Element::C];
        let le = [Element::C];
        let lp = [[0.0, 0.0, 0.0]];
        let g = assemble(input(&[[5.0, 0.0, 0.0]], &pe, &lp, &le, &[]), 5.0, false).unwrap();
        assert_eq!(g.count_edges(EdgeType::Interactive), 1);
        let far = [[5.0 + 1e-9, 0.0, 0.0]];
        assert_eq!(assemble(input(&far, &pe, &lp, &le, &[]), 5.0, false), Err(GraphError::EmptyPocket { cutoff: 5.0 }));
        let lone = assemble(input(&far, &pe, &lp, &le, &[]), 5.0, true).unwrap();
        assert_eq!(lone.num_nodes(), 1);
        assert!(lone.edges.is_empty());
    }

    #[test]
    fn features_are_one_hot_plus_flag() {
        assert_eq!(feature_row(Element::C, false)[1], 1.0);
        assert_eq!(feature_row(Element::C, true).iter().sum::<f64>(), 2.0);
        assert_eq!(element_slot(Element::ZN), METAL_SLOT);
        assert_eq!(element_slot(Element::SE), OTHER_SLOT);
        assert_eq!(feature_row(Element::SE, true)[LIGAND_FLAG], 1.0);
    }

    #[test]
    fn json_round_trip() {
        let pp = [[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]];
        let pe = [Element::N, Element::ZN];
        let lp = [[3.0, 0.0, 0.0], [4.4, 0.2, 0.0]];
        let le = [Element::C, Element::CL];
        let g = assemble(input(&pp, &pe, &lp, &le, &[(1, 0)]), 5.0, false).unwrap();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let back: GraphJson = serde_json::from_str(&text).unwrap();
        assert_eq!(ComplexGraph::try_from(back).unwrap(), g);
        let mut bad = g.to_json();
        bad.edges.push([1, 0, 0]);
        assert!(ComplexGraph::try_from(bad).is_err());
    }

    #[test]
    fn perturbation_moves_only_ligand() {
        let pp = [[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]];
        let pe = [Element::N, Element::C];
        let lp = [[3.0, 0.0, 0.0], [4.4, 0.2, 0.0], [5.0, 1.0, 0.0]];
        let le = [Element::C; 3];
        let g = assemble(input(&pp, &pe, &lp, &le, &[(0, 1), (1, 2)]), 5.0, false).unwrap();
        let mut rng = stream_rng(7, 0);
        let (h, noise) = perturb_ligand(&g, 0.5, &mut rng).unwrap();
        assert_eq!(h.edges, g.edges);
        assert_eq!(noise.len(), 3);
        assert_eq!(&h.positions[..2], &g.positions[..2]);
        for (k, l) in g.ligand_nodes().into_iter().enumerate() {
            for (d, e) in noise[k].iter().enumerate() {
                assert_eq!(h.positions[l][d], g.positions[l][d] + e);
            }
        }
        assert_eq!(perturb_ligand(&g, 0.0, &mut rng), Err(GraphError::InvalidSigma(0.0)));
    }

    #[test]
    fn perturbation_std_matches_sigma() {
        let lp = [[0.0; 3]; 3];
        let le = [Element::C; 3];
        let g = assemble(input(&[[1.0, 0.0, 0.0]], &[Element::C], &lp, &le, &[]), 5.0, false).unwrap();
        let mut rng = stream_rng(11, 0);
        let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..100_000 {
            let (_, noise) = perturb_ligand(&g, 0.5, &mut rng).unwrap();
            for e in noise.iter().flatten() {
                sum += e;
                sum_sq += e * e;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let std = (sum_sq / n - mean * mean).sqrt();
        assert!((std - 0.5).abs() / 0.5 < 0.01, "std = {std}");
    }

    fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-8.0f64..8.0), n)
    }

    proptest! {
        #[test]
        fn pocket_soundness_and_edge_laws(pp in points(1..40), lp in points(1..10)) {
            let pe = vec![Element::C; pp.len()];
            let le = vec![Element::O; lp.len()];
            let bonds: Vec<(usize, usize)> = (1..lp.len()).map(|i| (i - 1, i)).collect();
            let Ok(g) = assemble(input(&pp, &pe, &lp, &le, &bonds), 5.0, false) else {
                prop_assert!(pp.iter().all(|p| lp.iter().all(|l| distance_sq(*p, *l) > 25.0)));
                return Ok(());
            };
            let kept: Vec<Vec3> = pp.iter().copied().filter(|p| lp.iter().any(|l| distance_sq(*p, *l) <= 25.0)).collect();
            let np = kept.len();
            prop_assert_eq!(&g.positions[..np], &kept[..]);
            let nl = lp.len();
            prop_assert!(g.count_edges(EdgeType::Interactive) <= np * nl);
            for w in g.edges.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for e in &g.edges {
                prop_assert!(e.i < e.j);
                let (li, lj) = (g.ligand_mask[e.i], g.ligand_mask[e.j]);
                match e.kind {
                    EdgeType::ProteinProtein => prop_assert!(!li && !lj),
                    EdgeType::LigandCovalent => prop_assert!(li && lj),
                    EdgeType::Interactive => prop_assert!(!li && lj),
                }
                if e.kind != EdgeType::LigandCovalent {
                    prop_assert!(distance_sq(g.positions[e.i], g.positions[e.j]) <= 25.0);
                }
            }
            let mut expected = 0;
            for a in 0..np {
                for b in a + 1..np {
                    expected += usize::from(distance_sq(kept[a], kept[b]) <= 25.0);
                }
                for l in &lp {
                    expected += usize::from(distance_sq(kept[a], *l) <= 25.0);
                }
            }
            prop_assert_eq!(g.edges.len() - bonds.len(), expected);
        }

        #[test]
        fn protein_order_only_relabels(pp in points(2..30), lp in points(1..6), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let pe: Vec<Element> = (0..pp.len()).map(|i| ELEMENT_VOCAB[i % 4]).collect();
            let le = vec![Element::C; lp.len()];
            let mut order: Vec<usize> = (0..pp.len()).collect();
            order.shuffle(&mut stream_rng(seed, 0));
            let pp2: Vec<Vec3> = order.iter().map(|&i| pp[i]).collect();
            let pe2: Vec<Element> = order.iter().map(|&i| pe[i]).collect();
            let a = assemble(input(&pp, &pe, &lp, &le, &[]), 5.0, true).unwrap();
            let b = assemble(input(&pp2, &pe2, &lp, &le, &[]), 5.0, true).unwrap();
            let canon = |g: &ComplexGraph| {
                let key = |i: usize| (g.positions[i].map(f64::to_bits), g.elements[i]);
                let mut e: Vec<_> = g.edges.iter().map(|e| {
                    let (x, y) = (key(e.i), key(e.j));
                    (x.min(y), x.max(y), e.kind)
                }).collect();
                e.sort();
                e
            };
            prop_assert_eq!(a.num_nodes(), b.num_nodes());
            prop_assert_eq!(canon(&a), canon(&b));
        }
    }
}
