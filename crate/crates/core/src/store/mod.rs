//! On-disk corpus of curated complexes and their decoys.
//!
//! A dataset directory holds `index.json` plus binary `shard-NNNN.bin`
//! files; see `docs/dataset-format.md`. [`Dataset`] is the in-memory view
//! used by the sampler, the trainer and the CLI.

pub mod labels;
pub mod sampler;
pub mod shard;
pub mod stats;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::ComplexRecord;
use crate::decoys::{DecoyPose, BOX_PADDING, POSITIVE_RMSD_MAX};
use crate::element::Element;
use crate::geometry::{bounding_box, Vec3};
use crate::graph::{assemble, ComplexGraph, GraphError, GraphInput, DEFAULT_CUTOFF};

pub const INDEX_FILE: &str = "index.json";
pub const FORMAT_VERSION: u32 = 1;
pub const PRNG_NAME: &str = "chacha8";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid index.json: {0}")]
    Index(#[from] serde_json::Error),
    #[error("corrupt shard: {0}")]
    Corrupt(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("duplicate complex id {0}")]
    DuplicateId(String),
    #[error("cannot encode: {0}")]
    Unencodable(String),
    #[error("unknown complex {0}")]
    UnknownComplex(String),
    #[error("{complex_id} has no pose {pose_index}")]
    PoseOutOfRange { complex_id: String, pose_index: usize },
    #[error("{complex_id} has {available} decoys, {needed} requested and replacement is disabled")]
    InsufficientDecoys { complex_id: String, available: usize, needed: usize },
    #[error("invalid decoy annotation for {complex_id}: {reason}")]
    InvalidDecoy { complex_id: String, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("labels: {0}")]
    Labels(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// One complex with its cropped protein environment and decoy poses.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredComplex {
    pub record: ComplexRecord,
    pub decoys: Vec<DecoyPose>,
}

impl StoredComplex {
    /// Keeps only protein atoms that any pose inside the search box could
    /// contact within `cutoff`: those in the native ligand's bounding box
    /// padded by the search padding plus `cutoff`.
    pub fn cropped(record: ComplexRecord, decoys: Vec<DecoyPose>, cutoff: f64) -> Self {
        let mut record = record;
        let (lo, hi) = bounding_box(&record.ligand_positions());
        let pad = BOX_PADDING + cutoff;
        record
            .protein_atoms
            .retain(|a| (0..3).all(|k| a.position[k] >= lo[k] - pad && a.position[k] <= hi[k] + pad));
        record.rejection = None;
        StoredComplex { record, decoys }
    }

    pub fn complex_id(&self) -> &str {
        &self.record.complex_id
    }

    pub fn n_atoms(&self) -> usize {
        self.record.protein_atoms.len() + self.record.ligand.atoms.len()
    }

    pub fn max_rmsd(&self) -> Option<f64> {
        self.decoys.iter().map(|d| d.rmsd).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    /// Graph of the native pose, or of decoy `pose` (an index into
    /// `decoys`). A pose with no protein atom in range gives a ligand-only
    /// graph rather than an error.
    pub fn graph(&self, pose: Option<usize>, cutoff: f64) -> Result<ComplexGraph, StoreError> {
        let ligand_positions: Vec<Vec3> = match pose {
            None => self.record.ligand_positions(),
            Some(k) => self
                .decoys
                .get(k)
                .ok_or_else(|| StoreError::PoseOutOfRange { complex_id: self.complex_id().into(), pose_index: k })?
                .ligand_coords
                .clone(),
        };
        let protein_positions = self.record.protein_positions();
        let protein_elements: Vec<Element> = self.record.protein_atoms.iter().map(|a| a.element).collect();
        let ligand_elements: Vec<Element> = self.record.ligand.atoms.iter().map(|a| a.element).collect();
        Ok(assemble(
            GraphInput {
                protein_positions: &protein_positions,
                protein_elements: &protein_elements,
                ligand_positions: &ligand_positions,
                ligand_elements: &ligand_elements,
                ligand_bonds: &self.record.ligand.bonds,
            },
            cutoff,
            true,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub complex_id: String,
    pub shard: usize,
    /// Byte offset of the block's length prefix within the shard.
    pub offset: u64,
    /// Block length in bytes, including the 8-byte prefix.
    pub length: u64,
    pub n_atoms: usize,
    pub n_protein: usize,
    pub n_ligand: usize,
    pub n_decoys: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub format_version: u32,
    pub prng: String,
    pub positive_rmsd_max: f64,
    pub graph_cutoff: f64,
    /// Largest decoy RMSD in the view; `null` when there are no decoys.
    pub d_max: Option<f64>,
    pub shards: Vec<String>,
    /// Sorted by `complex_id`.
    pub complexes: Vec<IndexEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WriteOptions {
    pub complexes_per_shard: usize,
    pub graph_cutoff: f64,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions { complexes_per_shard: 256, graph_cutoff: DEFAULT_CUTOFF }
    }
}

fn d_max_of(complexes: &[StoredComplex]) -> Option<f64> {
    complexes.iter().filter_map(StoredComplex::max_rmsd).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
}

fn shard_name(i: usize) -> String {
    format!("shard-{i:04}.bin")
}

fn validate_decoys(c: &StoredComplex) -> Result<(), StoreError> {
    let n = c.record.ligand.atoms.len();
    for d in &c.decoys {
        let reason = if !(d.rmsd >= 0.0 && d.rmsd.is_finite()) {
            format!("pose {} has rmsd {}", d.pose_index, d.rmsd)
        } else if d.ligand_coords.len() != n {
            format!("pose {} has {} atoms, ligand has {n}", d.pose_index, d.ligand_coords.len())
        } else {
            continue;
        };
        return Err(StoreError::InvalidDecoy { complex_id: c.complex_id().into(), reason });
    }
    Ok(())
}

/// Writes `complexes` to `dir`, replacing any dataset already there.
/// Output bytes depend only on the input set, not its order.
pub fn write_dataset(dir: &Path, complexes: &[StoredComplex], opts: WriteOptions) -> Result<DatasetIndex, StoreError> {
    if opts.complexes_per_shard == 0 {
        return Err(StoreError::InvalidConfig("complexes_per_shard must be positive".into()));
    }
    let mut order: Vec<&StoredComplex> = complexes.iter().collect();
    order.sort_by(|a, b| a.complex_id().cmp(b.complex_id()));
    for w in order.windows(2) {
        if w[0].complex_id() == w[1].complex_id() {
            return Err(StoreError::DuplicateId(w[0].complex_id().into()));
        }
    }
    for c in &order {
        validate_decoys(c)?;
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    remove_stale_shards(dir)?;
    let mut shards = Vec::new();
    let mut entries = Vec::with_capacity(order.len());
    for (s, chunk) in order.chunks(opts.complexes_per_shard).enumerate() {
        let (bytes, spans) = shard::encode_shard(chunk)?;
        let name = shard_name(s);
        let path = dir.join(&name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        shards.push(name);
        for (c, (offset, length)) in chunk.iter().zip(spans) {
            entries.push(IndexEntry {
                complex_id: c.complex_id().into(),
                shard: s,
                offset,
                length,
                n_atoms: c.n_atoms(),
                n_protein: c.record.protein_atoms.len(),
                n_ligand: c.record.ligand.atoms.len(),
                n_decoys: c.decoys.len(),
            });
        }
    }
    let index = DatasetIndex {
        format_version: FORMAT_VERSION,
        prng: PRNG_NAME.into(),
        positive_rmsd_max: POSITIVE_RMSD_MAX,
        graph_cutoff: opts.graph_cutoff,
        d_max: d_max_of(complexes),
        shards,
        complexes: entries,
    };
    let path = dir.join(INDEX_FILE);
    let mut text = serde_json::to_string_pretty(&index)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(index)
}

fn remove_stale_shards(dir: &Path) -> Result<(), StoreError> {
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("shard-") && name.ends_with(".bin") {
            std::fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// A dataset loaded into memory, possibly narrowed by [`Dataset::exclude`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub index: DatasetIndex,
    pub complexes: Vec<StoredComplex>,
}

impl Dataset {
    /// Loads `dir`. A directory without `index.json`, or an index listing
    /// no complexes, is reported as [`StoreError::EmptyDataset`].
    pub fn open(dir: &Path) -> Result<Dataset, StoreError> {
        let index_path = dir.join(INDEX_FILE);
        if !dir.is_dir() {
            return Err(StoreError::Io {
                path: dir.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            });
        }
        if !index_path.exists() {
            return Err(StoreError::EmptyDataset(format!("no {INDEX_FILE} in {}", dir.display())));
        }
        let text = std::fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
        let index: DatasetIndex = serde_json::from_str(&text)?;
        if index.format_version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(index.format_version));
        }
        if index.complexes.is_empty() {
            return Err(StoreError::EmptyDataset(format!("{} lists no complexes", index_path.display())));
        }
        let mut shard_bytes = Vec::with_capacity(index.shards.len());
        for name in &index.shards {
            let path = dir.join(name);
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            shard::check_header(&bytes)?;
            shard_bytes.push(bytes);
        }
        let mut complexes = Vec::with_capacity(index.complexes.len());
        for e in &index.complexes {
            let bytes = shard_bytes
                .get(e.shard)
                .ok_or_else(|| StoreError::Corrupt(format!("{} refers to missing shard {}", e.complex_id, e.shard)))?;
            let (c, len) = shard::decode_at(bytes, e.offset)?;
            if c.complex_id() != e.complex_id || len != e.length || c.decoys.len() != e.n_decoys {
                return Err(StoreError::Corrupt(format!("block at offset {} does not match index entry {}", e.offset, e.complex_id)));
            }
            complexes.push(c);
        }
        let ds = Dataset { index, complexes };
        if ds.index.d_max != d_max_of(&ds.complexes) {
            return Err(StoreError::Corrupt("index d_max disagrees with stored decoys".into()));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.complexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complexes.is_empty()
    }

    pub fn d_max(&self) -> Option<f64> {
        self.index.d_max
    }

    pub fn graph_cutoff(&self) -> f64 {
        self.index.graph_cutoff
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.complexes.iter().map(StoredComplex::complex_id)
    }

    pub fn position(&self, complex_id: &str) -> Option<usize> {
        self.complexes.binary_search_by(|c| c.complex_id().cmp(complex_id)).ok()
    }

    pub fn get(&self, complex_id: &str) -> Result<&StoredComplex, StoreError> {
        self.position(complex_id)
            .map(|i| &self.complexes[i])
            .ok_or_else(|| StoreError::UnknownComplex(complex_id.into()))
    }

    /// View without the listed complexes; `d_max` is recomputed over the
    /// remainder.
    pub fn exclude(&self, ids: &BTreeSet<String>) -> Dataset {
        self.retain(|id| !ids.contains(id))
    }

    pub fn retain(&self, keep: impl Fn(&str) -> bool) -> Dataset {
        let complexes: Vec<StoredComplex> = self.complexes.iter().filter(|c| keep(c.complex_id())).cloned().collect();
        let mut index = self.index.clone();
        index.complexes.retain(|e| keep(&e.complex_id));
        index.d_max = d_max_of(&complexes);
        Dataset { index, complexes }
    }

    /// Wraps records held in memory, as `write_dataset` followed by `open`
    /// would, minus the shard offsets.
    pub fn from_memory(mut complexes: Vec<StoredComplex>, graph_cutoff: f64) -> Result<Dataset, StoreError> {
        complexes.sort_by(|a, b| a.complex_id().cmp(b.complex_id()));
        for w in complexes.windows(2) {
            if w[0].complex_id() == w[1].complex_id() {
                return Err(StoreError::DuplicateId(w[0].complex_id().into()));
            }
        }
        for c in &complexes {
            validate_decoys(c)?;
        }
        let entries = complexes
            .iter()
            .map(|c| IndexEntry {
                complex_id: c.complex_id().into(),
                shard: 0,
                offset: 0,
                length: 0,
                n_atoms: c.n_atoms(),
                n_protein: c.record.protein_atoms.len(),
                n_ligand: c.record.ligand.atoms.len(),
                n_decoys: c.decoys.len(),
            })
            .collect();
        let index = DatasetIndex {
            format_version: FORMAT_VERSION,
            prng: PRNG_NAME.into(),
            positive_rmsd_max: POSITIVE_RMSD_MAX,
            graph_cutoff,
            d_max: d_max_of(&complexes),
            shards: Vec::new(),
            complexes: entries,
        };
        Ok(Dataset { index, complexes })
    }

    /// Replaces the decoys of every complex listed in `decoys`, keyed by
    /// complex id. Others keep theirs.
    pub fn with_decoys(&self, decoys: impl IntoIterator<Item = (String, Vec<DecoyPose>)>) -> Result<Vec<StoredComplex>, StoreError> {
        let mut out = self.complexes.clone();
        for (id, poses) in decoys {
            let i = self.position(&id).ok_or(StoreError::UnknownComplex(id))?;
            out[i].decoys = poses;
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::structure::{Atom, LigandCandidate, ResidueId};
    use proptest::prelude::*;

    pub(crate) fn toy_complex(id: &str, rmsds: &[f64]) -> StoredComplex {
        let atom = |serial: u32, el: Element, name: &str, pos: Vec3, res: ResidueId, het: bool| Atom {
            serial,
            element: el,
            name: name.into(),
            position: pos,
            residue: res,
            is_hetero: het,
        };
        let lig_res = ResidueId::new('B', 301, "LIG");
        let ligand_atoms = vec![
            atom(10, Element::C, "C1", [0.0, 0.0, 0.0], lig_res.clone(), true),
            atom(11, Element::O, "O1", [1.2, 0.1, -0.3], lig_res.clone(), true),
            atom(12, Element::N, "N1", [-1.1, 0.7, 0.2], lig_res.clone(), true),
        ];
        let protein_atoms = vec![
            atom(1, Element::N, "N", [3.5, 0.0, 0.0], ResidueId::new('A', 5, "GLY"), false),
            atom(2, Element::C, "CA", [4.0, 1.3, 0.1], ResidueId::new('A', 5, "GLY"), false),
            atom(3, Element::ZN, "ZN", [0.0, -3.9, 0.0], ResidueId::new('A', 401, "ZN"), true),
            atom(4, Element::C, "CB", [40.0, 0.0, 0.0], ResidueId::new('A', 9, "ALA"), false),
        ];
        let decoys = rmsds
            .iter()
            .enumerate()
            .map(|(k, &r)| DecoyPose {
                complex_id: id.into(),
                pose_index: k as u32,
                ligand_coords: ligand_atoms.iter().map(|a| [a.position[0] + r, a.position[1], a.position[2]]).collect(),
                rmsd: r,
            })
            .collect();
        StoredComplex {
            record: ComplexRecord {
                complex_id: id.into(),
                protein_atoms,
                ligand: LigandCandidate { residue: lig_res, atoms: ligand_atoms, bonds: vec![(0, 1), (0, 2)] },
                resolution: 1.85,
                rejection: None,
            },
            decoys,
        }
    }

    #[test]
    fn write_then_open_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let items = vec![toy_complex("b", &[0.5, 3.2, 7.9]), toy_complex("a", &[]), toy_complex("c", &[1.0])];
        let index = write_dataset(dir.path(), &items, WriteOptions { complexes_per_shard: 2, ..Default::default() }).unwrap();
        assert_eq!(index.d_max, Some(7.9));
        assert_eq!(index.shards, vec!["shard-0000.bin", "shard-0001.bin"]);
        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.index, index);
        let ids: Vec<&str> = ds.ids().collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert_eq!(ds.get("b").unwrap(), &items[0]);
        assert_eq!(ds.get("a").unwrap(), &items[1]);
        assert_eq!(ds.get("c").unwrap(), &items[2]);
        let first = std::fs::read(dir.path().join("shard-0000.bin")).unwrap();
        write_dataset(dir.path(), &[items[2].clone(), items[0].clone(), items[1].clone()], WriteOptions { complexes_per_shard: 2, ..Default::default() }).unwrap();
        assert_eq!(std::fs::read(dir.path().join("shard-0000.bin")).unwrap(), first);
    }

    #[test]
    fn no_decoys_means_null_d_max() {
        let dir = tempfile::tempdir().unwrap();
        let index = write_dataset(dir.path(), &[toy_complex("a", &[])], WriteOptions::default()).unwrap();
        assert_eq!(index.d_max, None);
        let text = std::fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert!(text.contains("\"d_max\": null"));
    }

    #[test]
    fn exclusion_recomputes_d_max() {
        let ds = Dataset::from_memory(
            vec![toy_complex("a", &[0.5, 3.2]), toy_complex("b", &[0.5, 7.9]), toy_complex("c", &[4.4])],
            DEFAULT_CUTOFF,
        )
        .unwrap();
        assert_eq!(ds.d_max(), Some(7.9));
        let none = ds.exclude(&BTreeSet::new());
        assert_eq!(none, ds);
        let without_b = ds.exclude(&["b".to_string()].into());
        assert_eq!(without_b.d_max(), Some(4.4));
        assert_eq!(without_b.len(), 2);
        let all: BTreeSet<String> = ds.ids().map(String::from).collect();
        let empty = ds.exclude(&all);
        assert!(empty.is_empty());
        assert_eq!(empty.d_max(), None);
    }

    #[test]
    fn open_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Dataset::open(dir.path()), Err(StoreError::EmptyDataset(_))));
        assert!(matches!(Dataset::open(&dir.path().join("missing")), Err(StoreError::Io { .. })));
        write_dataset(dir.path(), &[], WriteOptions::default()).unwrap();
        assert!(matches!(Dataset::open(dir.path()), Err(StoreError::EmptyDataset(_))));
        write_dataset(dir.path(), &[toy_complex("a", &[1.0])], WriteOptions::default()).unwrap();
        let shard = dir.path().join("shard-0000.bin");
        let mut bytes = std::fs::read(&shard).unwrap();
        bytes[8] = 9;
        std::fs::write(&shard, &bytes).unwrap();
        assert!(matches!(Dataset::open(dir.path()), Err(StoreError::UnsupportedVersion(9))));
        bytes[8] = 1;
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&shard, &bytes).unwrap();
        assert!(matches!(Dataset::open(dir.path()), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let dup = [toy_complex("a", &[]), toy_complex("a", &[])];
        assert!(matches!(write_dataset(dir.path(), &dup, WriteOptions::default()), Err(StoreError::DuplicateId(_))));
        let mut bad = toy_complex("a", &[1.0]);
        bad.decoys[0].rmsd = f64::NAN;
        assert!(matches!(write_dataset(dir.path(), &[bad], WriteOptions::default()), Err(StoreError::InvalidDecoy { .. })));
        let mut long = toy_complex("a", &[]);
        long.record.ligand.atoms[0].name = "C1234".into();
        assert!(matches!(write_dataset(dir.path(), &[long], WriteOptions::default()), Err(StoreError::Unencodable(_))));
    }

    #[test]
    fn crop_keeps_everything_a_pose_can_touch() {
        let c = StoredComplex::cropped(toy_complex("a", &[]).record, Vec::new(), DEFAULT_CUTOFF);
        assert_eq!(c.record.protein_atoms.len(), 3);
        let g = c.graph(None, DEFAULT_CUTOFF).unwrap();
        assert_eq!(g.num_nodes(), 6);
        assert!(matches!(c.graph(Some(0), DEFAULT_CUTOFF), Err(StoreError::PoseOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn block_round_trip_is_bit_exact(
            coords in prop::collection::vec(prop::array::uniform3(any::<f64>()), 3),
            rmsds in prop::collection::vec(0.0f64..1e6, 0..5),
            resolution in any::<f64>(),
        ) {
            let mut c = toy_complex("p", &rmsds);
            c.record.resolution = resolution;
            for (a, p) in c.record.ligand.atoms.iter_mut().zip(&coords) {
                a.position = *p;
            }
            let mut buf = Vec::new();
            shard::encode_complex(&c, &mut buf).unwrap();
            let back = shard::decode_complex(&buf).unwrap();
            let bits = |v: &[Vec3]| v.iter().flat_map(|p| p.map(f64::to_bits)).collect::<Vec<u64>>();
            prop_assert_eq!(bits(&back.record.ligand_positions()), bits(&c.record.ligand_positions()));
            prop_assert_eq!(back.record.resolution.to_bits(), c.record.resolution.to_bits());
            prop_assert_eq!(back.decoys.len(), c.decoys.len());
            let mut again = Vec::new();
            shard::encode_complex(&back, &mut again).unwrap();
            prop_assert_eq!(again, buf);
        }
    }
}
