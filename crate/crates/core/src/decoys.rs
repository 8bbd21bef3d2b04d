//! Alternative ligand poses with RMSD annotation.
//!
//! Poses either come from a seeded perturbation generator (torsional noise,
//! rigid rotation about the centroid, translation, with box and clash
//! rejection) or from external docking output matched by atom name. RMSD
//! uses fixed atom correspondence and no superposition.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::ComplexRecord;
use crate::geometry::{bounding_box, centroid, distance_sq, sub, Vec3};
use crate::rng::{keyed_rng, Rng};
use crate::structure::{parse_models, ParseError};

/// Poses at or below this RMSD (Å) are positives.
pub const POSITIVE_RMSD_MAX: f64 = 2.0;

/// Padding (Å) around the native ligand's bounding box that generated poses
/// must stay within.
pub const BOX_PADDING: f64 = 5.0;

#[derive(Debug, Error)]
pub enum DecoyError {
    #[error("coordinate count mismatch: native {native}, pose {pose}")]
    LengthMismatch { native: usize, pose: usize },
    #[error("no valid pose could be generated for {0}")]
    NoValidPose(String),
    #[error("pose atoms do not match the native ligand: {0}")]
    AtomNameMismatch(String),
    #[error("duplicate atom names prevent matching: {0}")]
    AmbiguousAtomNames(String),
    #[error("pose {pose_index} of {complex_id} leaves the search box around the native ligand")]
    OutsideSearchBox { complex_id: String, pose_index: u32 },
    #[error("invalid decoy configuration: {0}")]
    InvalidConfig(String),
    #[error("pose file {path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyPose {
    pub complex_id: String,
    pub pose_index: u32,
    /// Same atom order as the native ligand.
    pub ligand_coords: Vec<Vec3>,
    pub rmsd: f64,
}

impl DecoyPose {
    pub fn is_positive(&self) -> bool {
        is_positive(self.rmsd, POSITIVE_RMSD_MAX)
    }
}

pub fn is_positive(rmsd: f64, threshold: f64) -> bool {
    rmsd <= threshold
}

/// Root-mean-square deviation over index-aligned atoms.
pub fn rmsd(native: &[Vec3], pose: &[Vec3]) -> Result<f64, DecoyError> {
    if native.len() != pose.len() || native.is_empty() {
        return Err(DecoyError::LengthMismatch { native: native.len(), pose: pose.len() });
    }
    let sum: f64 = native.iter().zip(pose).map(|(a, b)| distance_sq(*a, *b)).sum();
    Ok((sum / native.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoyGenConfig {
    pub poses_per_complex: usize,
    /// Standard deviation of the per-axis rigid translation, Å.
    pub translation_sigma: f64,
    /// Rotation angle is drawn uniformly from `[-rotation_max, rotation_max]`.
    pub rotation_max: f64,
    /// Standard deviation of each rotatable-bond torsion change, radians.
    pub torsion_sigma: f64,
    /// Minimum allowed distance between pose atoms and protein atoms, Å.
    pub clash_min_distance: f64,
    pub rng_seed: u64,
    /// Candidate draws allowed per requested pose before giving up.
    pub max_attempts_per_pose: usize,
}

impl Default for DecoyGenConfig {
    fn default() -> Self {
        DecoyGenConfig {
            poses_per_complex: 100,
            translation_sigma: 1.5,
            rotation_max: std::f64::consts::FRAC_PI_2,
            torsion_sigma: 0.6,
            clash_min_distance: 2.2,
            rng_seed: 0,
            max_attempts_per_pose: 50,
        }
    }
}

impl DecoyGenConfig {
    pub fn validate(&self) -> Result<(), DecoyError> {
        let bad = |m: &str| Err(DecoyError::InvalidConfig(m.to_string()));
        if self.poses_per_complex == 0 {
            return bad("poses_per_complex must be at least 1");
        }
        if !(self.translation_sigma > 0.0) || !(self.torsion_sigma > 0.0) {
            return bad("sigmas must be positive");
        }
        if !(self.rotation_max >= 0.0) || !(self.clash_min_distance >= 0.0) {
            return bad("rotation_max and clash_min_distance must be non-negative");
        }
        if self.max_attempts_per_pose == 0 {
            return bad("max_attempts_per_pose must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationOutcome {
    pub poses: Vec<DecoyPose>,
    pub requested: usize,
}

impl GenerationOutcome {
    pub fn shortfall(&self) -> usize {
        self.requested - self.poses.len()
    }
}

/// Non-ring single bonds between heavy atoms that each have at least two
/// heavy neighbours. All inferred bonds are treated as single bonds.
pub fn rotatable_bonds(heavy: &[bool], bonds: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let n = heavy.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in bonds {
        adj[a].push(b);
        adj[b].push(a);
    }
    let heavy_degree = |i: usize| adj[i].iter().filter(|&&j| heavy[j]).count();
    bonds
        .iter()
        .copied()
        .filter(|&(a, b)| heavy[a] && heavy[b] && heavy_degree(a) >= 2 && heavy_degree(b) >= 2)
        .filter(|&(a, b)| side_of(&adj, a, b).is_some())
        .collect()
}

/// Atoms reachable from `b` without crossing the edge `(a, b)`, or `None`
/// when `a` is reachable too (the bond lies on a ring).
fn side_of(adj: &[Vec<usize>], a: usize, b: usize) -> Option<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![b];
    seen[b] = true;
    let mut out = Vec::new();
    while let Some(v) = stack.pop() {
        out.push(v);
        for &w in &adj[v] {
            if v == b && w == a {
                continue;
            }
            if w == a {
                return None;
            }
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    out.sort_unstable();
    Some(out)
}

fn to_vector(p: Vec3) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

fn rotate_about(points: &mut [Vec3], indices: &[usize], origin: Vec3, rot: &Rotation3<f64>) {
    let o = to_vector(origin);
    for &i in indices {
        let v = rot * (to_vector(points[i]) - o) + o;
        points[i] = [v.x, v.y, v.z];
    }
}

fn random_axis(rng: &mut Rng) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if v.norm() > 1e-9 {
            return Unit::new_normalize(v);
        }
    }
}

struct PoseSampler<'a> {
    native: Vec<Vec3>,
    adjacency: Vec<Vec<usize>>,
    torsions: Vec<(usize, usize, Vec<usize>)>,
    box_lo: Vec3,
    box_hi: Vec3,
    pocket: Vec<Vec3>,
    cfg: &'a DecoyGenConfig,
}

impl<'a> PoseSampler<'a> {
    fn new(rec: &ComplexRecord, cfg: &'a DecoyGenConfig) -> Self {
        let native = rec.ligand_positions();
        let heavy: Vec<bool> = rec.ligand.atoms.iter().map(|a| !a.element.is_hydrogen()).collect();
        let mut adjacency = vec![Vec::new(); native.len()];
        for &(a, b) in &rec.ligand.bonds {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let torsions = rotatable_bonds(&heavy, &rec.ligand.bonds)
            .into_iter()
            .filter_map(|(a, b)| side_of(&adjacency, a, b).map(|side| (a, b, side)))
            .collect();
        let (mut box_lo, mut box_hi) = bounding_box(&native);
        for k in 0..3 {
            box_lo[k] -= BOX_PADDING;
            box_hi[k] += BOX_PADDING;
        }
        let reach = cfg.clash_min_distance;
        let pocket = rec
            .protein_atoms
            .iter()
            .map(|a| a.position)
            .filter(|p| (0..3).all(|k| p[k] >= box_lo[k] - reach && p[k] <= box_hi[k] + reach))
            .collect();
        PoseSampler { native, adjacency, torsions, box_lo, box_hi, pocket, cfg }
    }

    fn draw(&self, rng: &mut Rng) -> Vec<Vec3> {
        let mut pose = self.native.clone();
        let torsion = Normal::new(0.0, self.cfg.torsion_sigma).expect("validated sigma");
        for (a, b, side) in &self.torsions {
            let angle: f64 = torsion.sample(rng);
            let axis = sub(pose[*b], pose[*a]);
            if let Some(axis) = Unit::try_new(to_vector(axis), 1e-12) {
                let rot = Rotation3::from_axis_angle(&axis, angle);
                let origin = pose[*a];
                rotate_about(&mut pose, side, origin, &rot);
            }
        }
        let axis = random_axis(rng);
        let angle = if self.cfg.rotation_max > 0.0 {
            rng.random_range(-self.cfg.rotation_max..=self.cfg.rotation_max)
        } else {
            0.0
        };
        let rot = Rotation3::from_axis_angle(&axis, angle);
        let all: Vec<usize> = (0..pose.len()).collect();
        let c = centroid(&pose);
        rotate_about(&mut pose, &all, c, &rot);
        let shift = Normal::new(0.0, self.cfg.translation_sigma).expect("validated sigma");
        let t: Vec3 = [shift.sample(rng), shift.sample(rng), shift.sample(rng)];
        for p in &mut pose {
            for k in 0..3 {
                p[k] += t[k];
            }
        }
        pose
    }

    fn acceptable(&self, pose: &[Vec3]) -> bool {
        let inside = pose.iter().all(|p| (0..3).all(|k| p[k] >= self.box_lo[k] && p[k] <= self.box_hi[k]));
        if !inside {
            return false;
        }
        let min_sq = self.cfg.clash_min_distance * self.cfg.clash_min_distance;
        pose.iter().all(|p| self.pocket.iter().all(|q| distance_sq(*p, *q) >= min_sq))
    }
}

/// Draws up to `poses_per_complex` perturbed poses for one complex. The
/// random stream is keyed by `(rng_seed, complex_id)`, so the result does
/// not depend on which other complexes are processed or in what order.
pub fn generate_decoys(rec: &ComplexRecord, cfg: &DecoyGenConfig) -> Result<GenerationOutcome, DecoyError> {
    cfg.validate()?;
    if rec.ligand.atoms.is_empty() {
        return Err(DecoyError::NoValidPose(rec.complex_id.clone()));
    }
    let sampler = PoseSampler::new(rec, cfg);
    debug_assert_eq!(sampler.adjacency.len(), sampler.native.len());
    let mut rng = keyed_rng(cfg.rng_seed, &rec.complex_id);
    let budget = cfg.poses_per_complex * cfg.max_attempts_per_pose;
    let mut poses = Vec::with_capacity(cfg.poses_per_complex);
    let mut attempts = 0;
    while poses.len() < cfg.poses_per_complex && attempts < budget {
        attempts += 1;
        let coords = sampler.draw(&mut rng);
        if !sampler.acceptable(&coords) {
            continue;
        }
        let rmsd = rmsd(&sampler.native, &coords)?;
        poses.push(DecoyPose {
            complex_id: rec.complex_id.clone(),
            pose_index: poses.len() as u32,
            ligand_coords: coords,
            rmsd,
        });
    }
    if poses.is_empty() {
        return Err(DecoyError::NoValidPose(rec.complex_id.clone()));
    }
    Ok(GenerationOutcome { poses, requested: cfg.poses_per_complex })
}

/// Generates decoys for many complexes on `workers` threads. Output order
/// matches `records`.
pub fn generate_all(
    records: &[ComplexRecord],
    cfg: &DecoyGenConfig,
    workers: usize,
) -> Result<Vec<Result<GenerationOutcome, DecoyError>>, DecoyError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DecoyError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| records.par_iter().map(|r| generate_decoys(r, cfg)).collect()))
}

fn name_index<'a>(names: impl Iterator<Item = &'a str>, what: &str) -> Result<HashMap<&'a str, usize>, DecoyError> {
    let mut map = HashMap::new();
    for (i, name) in names.enumerate() {
        if map.insert(name, i).is_some() {
            return Err(DecoyError::AmbiguousAtomNames(format!("{what} has duplicate atom name {name:?}")));
        }
    }
    Ok(map)
}

/// Whether every point lies in the native ligand's bounding box padded by
/// [`BOX_PADDING`].
pub fn within_search_box(native: &[Vec3], pose: &[Vec3]) -> bool {
    let (lo, hi) = bounding_box(native);
    pose.iter()
        .all(|p| (0..3).all(|k| p[k] >= lo[k] - BOX_PADDING && p[k] <= hi[k] + BOX_PADDING))
}

/// Matches every MODEL in `text` to the native ligand by atom name.
/// Indices are assigned from `first_index` upward. Poses outside the
/// search box are rejected, as a docking run over that box cannot emit them.
pub fn ingest_pose_text(rec: &ComplexRecord, text: &str, first_index: u32) -> Result<Vec<DecoyPose>, DecoyError> {
    let native_names = name_index(rec.ligand.atoms.iter().map(|a| a.name.as_str()), "native ligand")?;
    let native = rec.ligand_positions();
    let models = parse_models(text).map_err(|source| DecoyError::Parse { path: String::new(), source })?;
    let mut poses = Vec::new();
    for atoms in models.into_iter().filter(|m| !m.is_empty()) {
        let pose_names = name_index(atoms.iter().map(|a| a.name.as_str()), "pose")?;
        if pose_names.len() != native_names.len() {
            return Err(DecoyError::AtomNameMismatch(format!(
                "pose has {} atoms, native ligand has {}",
                pose_names.len(),
                native_names.len()
            )));
        }
        let mut coords = vec![[0.0; 3]; native.len()];
        for atom in &atoms {
            let &slot = native_names
                .get(atom.name.as_str())
                .ok_or_else(|| DecoyError::AtomNameMismatch(format!("no native atom named {:?}", atom.name)))?;
            coords[slot] = atom.position;
        }
        let pose_index = first_index + poses.len() as u32;
        if !within_search_box(&native, &coords) {
            return Err(DecoyError::OutsideSearchBox { complex_id: rec.complex_id.clone(), pose_index });
        }
        let rmsd = rmsd(&native, &coords)?;
        poses.push(DecoyPose {
            complex_id: rec.complex_id.clone(),
            pose_index,
            ligand_coords: coords,
            rmsd,
        });
    }
    Ok(poses)
}

pub fn ingest_poses(rec: &ComplexRecord, pose_files: &[PathBuf], first_index: u32) -> Result<Vec<DecoyPose>, DecoyError> {
    let mut out = Vec::new();
    for path in pose_files {
        let text = std::fs::read_to_string(path).map_err(|source| DecoyError::Io { path: path.clone(), source })?;
        let next = first_index + out.len() as u32;
        let poses = ingest_pose_text(rec, &text, next).map_err(|e| match e {
            DecoyError::Parse { source, .. } => DecoyError::Parse { path: path.display().to_string(), source },
            other => other,
        })?;
        out.extend(poses);
    }
    Ok(out)
}

/// Pose files for `complex_id` in `dir`: `<id>.pdb` or `<id>.<tag>.pdb`,
/// sorted by name.
pub fn pose_files_for(dir: &Path, complex_id: &str) -> Result<Vec<PathBuf>, DecoyError> {
    let entries = std::fs::read_dir(dir).map_err(|source| DecoyError::Io { path: dir.into(), source })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| DecoyError::Io { path: dir.into(), source })?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_suffix(".pdb") else { continue };
        if stem == complex_id || stem.strip_prefix(complex_id).is_some_and(|rest| rest.starts_with('.')) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;
    use crate::structure::{write_models, Atom, BondTable, LigandCandidate, ResidueId};
    use proptest::prelude::*;

    fn lig_atom(i: usize, pos: Vec3) -> Atom {
        Atom {
            serial: i as u32 + 1,
            element: Element::C,
            name: format!("C{}", i + 1),
            position: pos,
            residue: ResidueId::new('L', 1, "LIG"),
            is_hetero: true,
        }
    }

    /// Ten-atom zigzag chain with 8 rotatable bonds, protein atoms 4 Å away.
    fn chain_complex(n: usize) -> ComplexRecord {
        let atoms: Vec<Atom> = (0..n)
            .map(|i| lig_atom(i, [i as f64 * 1.25, if i % 2 == 0 { 0.0 } else { 0.85 }, 0.0]))
            .collect();
        let bonds = BondTable::default().infer_bonds(&atoms);
        let protein_atoms = (0..n)
            .map(|i| Atom {
                serial: 100 + i as u32,
                element: Element::C,
                name: "CA".into(),
                position: [i as f64 * 1.25, -4.0, 0.0],
                residue: ResidueId::new('A', i as i32, "ALA"),
                is_hetero: false,
            })
            .collect();
        ComplexRecord {
            complex_id: format!("T_L_LIG_{n}"),
            protein_atoms,
            ligand: LigandCandidate { residue: ResidueId::new('L', 1, "LIG"), atoms, bonds },
            resolution: 2.0,
            rejection: None,
        }
    }

    #[test]
    fn rmsd_examples() {
        let a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(rmsd(&a, &a).unwrap(), 0.0);
        let shifted: Vec<Vec3> = a.iter().map(|p| [p[0] + 3.0, p[1] + 4.0, p[2]]).collect();
        assert!((rmsd(&a, &shifted).unwrap() - 5.0).abs() < 1e-12);
        let b = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        // (0 + 1) / 2 = 0.5
        assert!((rmsd(&a, &b).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(rmsd(&a, &b[..1]), Err(DecoyError::LengthMismatch { native: 2, pose: 1 })));
        assert!(rmsd(&[], &[]).is_err());
    }

    #[test]
    fn positive_threshold_is_inclusive() {
        assert!(is_positive(2.0, POSITIVE_RMSD_MAX));
        assert!(!is_positive(2.0 + 1e-12, POSITIVE_RMSD_MAX));
    }

    #[test]
    fn ring_bonds_are_not_rotatable() {
        // Hexagon with a two-atom tail on atom 0: only the 0-6 bond qualifies.
        let heavy = vec![true; 8];
        let mut bonds: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        bonds.push((0, 6));
        bonds.push((6, 7));
        assert_eq!(rotatable_bonds(&heavy, &bonds), vec![(0, 6)]);
        let chain = chain_complex(10);
        let heavy = vec![true; 10];
        assert_eq!(rotatable_bonds(&heavy, &chain.ligand.bonds).len(), 7);
    }

    #[test]
    fn vanishing_noise_reproduces_native() {
        let rec = chain_complex(10);
        let cfg = DecoyGenConfig {
            poses_per_complex: 10,
            translation_sigma: 1e-12,
            rotation_max: 0.0,
            torsion_sigma: 1e-12,
            ..DecoyGenConfig::default()
        };
        let out = generate_decoys(&rec, &cfg).unwrap();
        assert_eq!(out.poses.len(), 10);
        assert!(out.poses.iter().all(|p| p.rmsd < 1e-6));
    }

    #[test]
    fn single_atom_rotation_is_identity() {
        let mut rec = chain_complex(1);
        rec.ligand.bonds.clear();
        let cfg = DecoyGenConfig {
            poses_per_complex: 20,
            translation_sigma: 1e-300,
            rotation_max: std::f64::consts::PI,
            ..DecoyGenConfig::default()
        };
        let out = generate_decoys(&rec, &cfg).unwrap();
        assert!(out.poses.iter().all(|p| p.rmsd == 0.0));
    }

    #[test]
    fn moderate_noise_spans_both_bins() {
        let rec = chain_complex(10);
        let cfg = DecoyGenConfig { poses_per_complex: 100, rng_seed: 0, ..DecoyGenConfig::default() };
        let out = generate_decoys(&rec, &cfg).unwrap();
        assert_eq!(out.poses.len(), 100);
        assert_eq!(out.shortfall(), 0);
        let positives = out.poses.iter().filter(|p| p.is_positive()).count();
        assert!(positives > 0 && positives < 100, "positives = {positives}");
        let (lo, hi) = bounding_box(&rec.ligand_positions());
        for p in &out.poses {
            assert_eq!(p.ligand_coords.len(), 10);
            assert!((rmsd(&rec.ligand_positions(), &p.ligand_coords).unwrap() - p.rmsd).abs() < 1e-9);
            for q in &p.ligand_coords {
                for k in 0..3 {
                    assert!(q[k] >= lo[k] - BOX_PADDING && q[k] <= hi[k] + BOX_PADDING);
                }
                for a in &rec.protein_atoms {
                    assert!(distance_sq(*q, a.position).sqrt() >= cfg.clash_min_distance);
                }
            }
        }
        assert_eq!(generate_decoys(&rec, &cfg).unwrap(), out);
    }

    #[test]
    fn torsions_preserve_bond_lengths() {
        let rec = chain_complex(10);
        let cfg = DecoyGenConfig { poses_per_complex: 20, ..DecoyGenConfig::default() };
        let out = generate_decoys(&rec, &cfg).unwrap();
        for p in &out.poses {
            for &(a, b) in &rec.ligand.bonds {
                let d0 = distance_sq(rec.ligand.atoms[a].position, rec.ligand.atoms[b].position).sqrt();
                let d1 = distance_sq(p.ligand_coords[a], p.ligand_coords[b]).sqrt();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn all_clashing_gives_no_valid_pose() {
        let mut rec = chain_complex(4);
        let cfg = DecoyGenConfig { poses_per_complex: 3, clash_min_distance: 50.0, max_attempts_per_pose: 5, ..Default::default() };
        assert!(matches!(generate_decoys(&rec, &cfg), Err(DecoyError::NoValidPose(_))));
        rec.ligand.atoms.clear();
        assert!(matches!(generate_decoys(&rec, &DecoyGenConfig::default()), Err(DecoyError::NoValidPose(_))));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let records: Vec<ComplexRecord> = (3..9).map(chain_complex).collect();
        let cfg = DecoyGenConfig { poses_per_complex: 15, ..Default::default() };
        let one: Vec<_> = generate_all(&records, &cfg, 1).unwrap().into_iter().map(Result::unwrap).collect();
        let four: Vec<_> = generate_all(&records, &cfg, 4).unwrap().into_iter().map(Result::unwrap).collect();
        assert_eq!(one, four);
    }

    fn models_text(rec: &ComplexRecord, poses: &[Vec<(usize, Vec3)>]) -> String {
        let models: Vec<Vec<Atom>> = poses
            .iter()
            .map(|p| {
                p.iter()
                    .map(|(i, pos)| Atom { position: *pos, ..rec.ligand.atoms[*i].clone() })
                    .collect()
            })
            .collect();
        write_models(&models)
    }

    #[test]
    fn ingest_remaps_by_name() {
        let rec = chain_complex(6);
        let native = rec.ligand_positions();
        let shuffled: Vec<(usize, Vec3)> = [3, 1, 5, 0, 2, 4].iter().map(|&i| (i, native[i])).collect();
        let shifted: Vec<(usize, Vec3)> = (0..6).map(|i| (i, [native[i][0] + 1.0, native[i][1], native[i][2]])).collect();
        let text = models_text(&rec, &[shuffled, shifted]);
        let poses = ingest_pose_text(&rec, &text, 7).unwrap();
        assert_eq!(poses.len(), 2);
        assert_eq!(poses[0].rmsd, 0.0);
        assert_eq!(poses[0].pose_index, 7);
        assert!((poses[1].rmsd - 1.0).abs() < 1e-12);
        assert_eq!(poses[1].pose_index, 8);
    }

    #[test]
    fn ingest_rejects_missing_and_duplicate_names() {
        let rec = chain_complex(6);
        let native = rec.ligand_positions();
        let missing: Vec<(usize, Vec3)> = (0..5).map(|i| (i, native[i])).collect();
        let text = models_text(&rec, &[missing]);
        assert!(matches!(ingest_pose_text(&rec, &text, 0), Err(DecoyError::AtomNameMismatch(_))));
        let mut dup = rec.clone();
        dup.ligand.atoms[1].name = dup.ligand.atoms[0].name.clone();
        let full: Vec<(usize, Vec3)> = (0..6).map(|i| (i, native[i])).collect();
        let text = models_text(&rec, &[full]);
        assert!(matches!(ingest_pose_text(&dup, &text, 0), Err(DecoyError::AmbiguousAtomNames(_))));
        let far: Vec<(usize, Vec3)> = (0..6).map(|i| (i, [native[i][0] + 30.0, native[i][1], native[i][2]])).collect();
        let text = models_text(&rec, &[far]);
        assert!(matches!(ingest_pose_text(&rec, &text, 0), Err(DecoyError::OutsideSearchBox { pose_index: 0, .. })));
    }

    #[test]
    fn pose_file_discovery() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["X_A_LIG_1.pdb", "X_A_LIG_1.vina.pdb", "X_A_LIG_10.pdb", "other.pdb", "X_A_LIG_1.txt"] {
            std::fs::write(dir.path().join(name), "").unwrap();
        }
        let found: Vec<String> = pose_files_for(dir.path(), "X_A_LIG_1")
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(found, vec!["X_A_LIG_1.pdb", "X_A_LIG_1.vina.pdb"]);
    }

    proptest! {
        #[test]
        fn rmsd_laws(
            pts in prop::collection::vec(prop::array::uniform3(-20.0f64..20.0), 1..20),
            other in prop::collection::vec(prop::array::uniform3(-20.0f64..20.0), 20),
            dir in prop::array::uniform3(-1.0f64..1.0),
            t in -10.0f64..10.0,
        ) {
            let b: Vec<Vec3> = other[..pts.len()].to_vec();
            prop_assert_eq!(rmsd(&pts, &pts).unwrap(), 0.0);
            prop_assert!((rmsd(&pts, &b).unwrap() - rmsd(&b, &pts).unwrap()).abs() < 1e-12);
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            prop_assume!(norm > 1e-3);
            let u = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
            let moved: Vec<Vec3> = pts.iter().map(|p| [p[0] + t * u[0], p[1] + t * u[1], p[2] + t * u[2]]).collect();
            prop_assert!((rmsd(&pts, &moved).unwrap() - t.abs()).abs() < 1e-9);
        }
    }
}
