//! Deterministic synthetic corpus: small branched ligands sitting in shells
//! of protein atoms, written as PDB text. Affinity labels are a linear
//! function of the native graph's interactive-edge count, which gives
//! fine-tuning a learnable target.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::curation::ComplexRecord;
use crate::decoys::{generate_all, DecoyError, DecoyGenConfig};
use crate::element::Element;
use crate::geometry::{add, centroid, distance, sub, Vec3};
use crate::graph::{build_graph, EdgeType, GraphError, DEFAULT_CUTOFF};
use crate::rng::{stream_rng, Rng};
use crate::store::labels::{Label, Split};
use crate::store::StoredComplex;
use crate::structure::{write_structure, Atom, ResidueId, Structure};

pub const DEFAULT_SEED: u64 = 7;
pub const N_COMPLEXES: usize = 32;
pub const DECOYS_PER_COMPLEX: usize = 16;
pub const LABEL_INTERCEPT: f64 = 4.0;
pub const LABEL_SLOPE: f64 = 0.05;

const BOND: f64 = 1.5;
const RESIDUES: [&str; 5] = ["ALA", "GLY", "SER", "LEU", "VAL"];
const BACKBONE: [(&str, &str); 4] = [("N", "N"), ("CA", "C"), ("C", "C"), ("O", "O")];

pub fn entry_id(i: usize) -> String {
    format!("syn{i:03}")
}

fn unit(rng: &mut Rng) -> Vec3 {
    loop {
        let v: Vec3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn scaled(v: Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    let d = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (distance(a, [0.0; 3]) * distance(b, [0.0; 3]));
    d.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Tree-shaped heavy-atom skeleton with 1.5 Å bonds, ~110° angles and no
/// non-bonded pair closer than 2.4 Å.
fn ligand_skeleton(rng: &mut Rng, n: usize) -> (Vec<Vec3>, Vec<Element>) {
    'restart: loop {
        let mut pos = vec![[0.0; 3]];
        let mut parent: Vec<Option<usize>> = vec![None];
        let mut degree = vec![0usize];
        while pos.len() < n {
            let at = if pos.len() > 2 && rng.random_bool(0.3) { rng.random_range(0..pos.len()) } else { pos.len() - 1 };
            if degree[at] >= 3 {
                continue;
            }
            let mut placed = false;
            for _ in 0..200 {
                let d = unit(rng);
                if let Some(p) = parent[at] {
                    let back = sub(pos[p], pos[at]);
                    let ang = angle_deg(back, d);
                    if !(100.0..=125.0).contains(&ang) {
                        continue;
                    }
                }
                let cand = add(pos[at], scaled(d, BOND));
                if pos.iter().enumerate().all(|(k, q)| k == at || distance(*q, cand) >= 2.4) {
                    pos.push(cand);
                    parent.push(Some(at));
                    degree.push(1);
                    degree[at] += 1;
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        let elements = (0..n)
            .map(|i| match (i, rng.random_range(0..20)) {
                (0, _) => Element::from_symbol("C"),
                (_, 0..=13) => Element::from_symbol("C"),
                (_, 14..=16) => Element::from_symbol("N"),
                _ => Element::from_symbol("O"),
            })
            .collect();
        return (pos, elements);
    }
}

/// Entry `i` of the corpus drawn from `seed`.
pub fn structure(seed: u64, i: usize) -> Structure {
    let mut rng = stream_rng(seed, i as u64);
    let n_lig = rng.random_range(6..=10);
    let (skeleton, lig_elements) = ligand_skeleton(&mut rng, n_lig);
    let shift = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
    let ligand: Vec<Vec3> = skeleton.iter().map(|p| add(*p, shift)).collect();
    let center = centroid(&ligand);

    let n_pocket = rng.random_range(10..=28);
    let mut protein: Vec<Vec3> = Vec::new();
    while protein.len() < n_pocket {
        let anchor = ligand[rng.random_range(0..ligand.len())];
        let cand = add(anchor, scaled(unit(&mut rng), rng.random_range(3.3..5.5)));
        if ligand.iter().all(|l| distance(*l, cand) >= 3.2) && protein.iter().all(|p| distance(*p, cand) >= 2.6) {
            protein.push(cand);
        }
    }
    let n_far = 12;
    while protein.len() < n_pocket + n_far {
        let cand = add(center, scaled(unit(&mut rng), rng.random_range(9.0..16.0)));
        if ligand.iter().all(|l| distance(*l, cand) >= 6.0) && protein.iter().all(|p| distance(*p, cand) >= 2.6) {
            protein.push(cand);
        }
    }

    let round = |p: Vec3| p.map(|c| (c * 1000.0).round() / 1000.0);
    let mut atoms = Vec::with_capacity(protein.len() + ligand.len());
    for (k, p) in protein.iter().enumerate() {
        let (name, sym) = BACKBONE[k % 4];
        let seq = (k / 4) as i32 + 1;
        atoms.push(Atom {
            serial: atoms.len() as u32 + 1,
            element: Element::from_symbol(sym),
            name: name.into(),
            position: round(*p),
            residue: ResidueId::new('A', seq, RESIDUES[(k / 4) % RESIDUES.len()]),
            is_hetero: false,
        });
    }
    for (k, (p, e)) in ligand.iter().zip(&lig_elements).enumerate() {
        atoms.push(Atom {
            serial: atoms.len() as u32 + 1,
            element: *e,
            name: format!("{}{}", e.symbol(), k + 1),
            position: round(*p),
            residue: ResidueId::new('A', 901, "LIG"),
            is_hetero: true,
        });
    }
    let resolution = [1.6, 1.8, 2.0, 2.2, 2.4][i % 5];
    Structure { entry_id: entry_id(i), atoms, resolution: Some(resolution), chains: BTreeSet::from(['A']) }
}

/// `(file name, PDB text)` for the first `n` entries.
pub fn corpus(seed: u64, n: usize) -> Vec<(String, String)> {
    (0..n).map(|i| (format!("{}.pdb", entry_id(i)), write_structure(&structure(seed, i)))).collect()
}

pub fn write_corpus(dir: &Path, seed: u64, n: usize) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    corpus(seed, n)
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}

pub fn decoy_config(seed: u64) -> DecoyGenConfig {
    DecoyGenConfig { poses_per_complex: DECOYS_PER_COMPLEX, rng_seed: seed, ..Default::default() }
}

/// Curated records plus generated decoys, cropped for storage.
pub fn with_decoys(records: Vec<ComplexRecord>, cfg: &DecoyGenConfig, workers: usize) -> Result<Vec<StoredComplex>, DecoyError> {
    let outcomes = generate_all(&records, cfg, workers)?;
    records.into_iter().zip(outcomes).map(|(r, o)| Ok(StoredComplex::cropped(r, o?.poses, DEFAULT_CUTOFF))).collect()
}

/// `LABEL_INTERCEPT + LABEL_SLOPE · (interactive edges of the native graph)`.
pub fn affinity(rec: &ComplexRecord) -> Result<f64, GraphError> {
    let g = build_graph(rec, None, DEFAULT_CUTOFF)?;
    Ok(LABEL_INTERCEPT + LABEL_SLOPE * g.count_edges(EdgeType::Interactive) as f64)
}

/// Labels in complex-id order. Every eighth complex (starting at the
/// first) is validation and every eighth starting at the second is test.
pub fn labels(records: &[ComplexRecord]) -> Result<Vec<Label>, GraphError> {
    let mut sorted: Vec<&ComplexRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.complex_id.cmp(&b.complex_id));
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let split = match i % 8 {
                0 => Split::Val,
                1 => Split::Test,
                _ => Split::Train,
            };
            Ok(Label { complex_id: r.complex_id.clone(), affinity: affinity(r)?, split: Some(split) })
        })
        .collect()
}
