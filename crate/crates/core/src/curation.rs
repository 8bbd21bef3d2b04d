//! Filter cascade turning raw structures into protein-pocket/ligand
//! complexes.
//!
//! Per entry the order is: resolution, then for each hetero group:
//! monoatomic ion, excluded residue name, element whitelist, metal
//! cluster, molecular weight, and finally chain isolation. The first rule
//! that fails is the only one reported for that ligand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::Element;
use crate::geometry::{min_distance, Vec3};
use crate::structure::{extract_ligands, parse_structure_named, Atom, BondTable, LigandCandidate, Structure};

/// Default configuration, also shipped as `config/filters.json`.
pub const DEFAULT_FILTERS_JSON: &str = include_str!("../config/filters.json");

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("ligand contains an unrecognised element")]
    UnknownElement,
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Maximum accepted resolution, Å (inclusive).
    pub max_resolution: f64,
    /// Open molecular-weight interval in Daltons.
    pub mw_range: (f64, f64),
    pub allowed_elements: BTreeSet<Element>,
    /// Crystallisation additives and buffer molecules.
    pub excluded_residues: BTreeSet<String>,
    pub pocket_radius: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_resolution: 2.5,
            mw_range: (50.0, 700.0),
            allowed_elements: ["C", "N", "O", "H", "S", "P", "F", "Cl", "Br", "I"]
                .into_iter()
                .map(Element::from_symbol)
                .collect(),
            excluded_residues: [
                "HOH", "DOD", "SO4", "PO4", "GOL", "PEG", "EDO", "ACT", "DMS", "FMT", "MES", "TRS", "EPE", "CIT", "NO3",
                "BME",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            pocket_radius: 10.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let (lo, hi) = self.mw_range;
        if !(lo < hi) {
            return Err(CurationError::InvalidConfig(format!("mw_range ({lo}, {hi}) is empty")));
        }
        if !(self.pocket_radius > 0.0) {
            return Err(CurationError::InvalidConfig("pocket_radius must be positive".into()));
        }
        if !(self.max_resolution > 0.0) {
            return Err(CurationError::InvalidConfig("max_resolution must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CurationError> {
        let cfg: FilterConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectionRule {
    Resolution,
    MolecularWeight,
    Element,
    ExcludedResidue,
    MonoatomicIon,
    MetalCluster,
    NoPocketChain,
}

impl RejectionRule {
    pub const ALL: [RejectionRule; 7] = [
        RejectionRule::Resolution,
        RejectionRule::MolecularWeight,
        RejectionRule::Element,
        RejectionRule::ExcludedResidue,
        RejectionRule::MonoatomicIon,
        RejectionRule::MetalCluster,
        RejectionRule::NoPocketChain,
    ];
}

impl fmt::Display for RejectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub complex_id: String,
    pub rule: RejectionRule,
    pub detail: String,
}

/// A retained protein/ligand pair. `protein_atoms` holds only chains with an
/// atom within the pocket radius of the ligand.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexRecord {
    pub complex_id: String,
    pub protein_atoms: Vec<Atom>,
    pub ligand: LigandCandidate,
    pub resolution: f64,
    pub rejection: Option<RejectionRule>,
}

impl ComplexRecord {
    pub fn ligand_positions(&self) -> Vec<Vec3> {
        self.ligand.positions()
    }

    pub fn protein_positions(&self) -> Vec<Vec3> {
        self.protein_atoms.iter().map(|a| a.position).collect()
    }
}

pub fn complex_id(entry_id: &str, ligand: &LigandCandidate) -> String {
    let chain = if ligand.residue.chain == ' ' { '_' } else { ligand.residue.chain };
    format!("{entry_id}_{chain}_{}_{}", ligand.residue.name, ligand.residue.seq)
}

/// Sum of standard atomic weights over the atoms present.
pub fn molecular_weight(ligand: &LigandCandidate) -> Result<f64, CurationError> {
    molecular_weight_with(ligand, Element::mass)
}

pub fn molecular_weight_with(
    ligand: &LigandCandidate,
    mass: impl Fn(Element) -> Option<f64>,
) -> Result<f64, CurationError> {
    ligand
        .atoms
        .iter()
        .map(|a| mass(a.element).ok_or(CurationError::UnknownElement))
        .sum()
}

fn check_ligand(ligand: &LigandCandidate, cfg: &FilterConfig) -> Result<(), (RejectionRule, String)> {
    let heavy = ligand.heavy_atom_count();
    if heavy <= 1 {
        return Err((RejectionRule::MonoatomicIon, format!("{heavy} heavy atom(s)")));
    }
    if cfg.excluded_residues.contains(&ligand.residue.name) {
        return Err((RejectionRule::ExcludedResidue, ligand.residue.name.clone()));
    }
    let foreign: BTreeSet<&str> = ligand
        .atoms
        .iter()
        .filter(|a| a.element.is_unknown() || !cfg.allowed_elements.contains(&a.element))
        .map(|a| if a.element.is_unknown() { "?" } else { a.element.symbol() })
        .collect();
    if !foreign.is_empty() {
        let list: Vec<&str> = foreign.into_iter().collect();
        return Err((RejectionRule::Element, format!("disallowed elements {}", list.join(" "))));
    }
    let metals = ligand.atoms.iter().filter(|a| a.element.is_metal()).count();
    if metals > 0 {
        return Err((RejectionRule::MetalCluster, format!("{metals} metal atom(s)")));
    }
    let mw = molecular_weight(ligand).map_err(|_| (RejectionRule::Element, "unknown element".to_string()))?;
    let (lo, hi) = cfg.mw_range;
    if !(mw > lo && mw < hi) {
        return Err((RejectionRule::MolecularWeight, format!("{mw:.3} Da outside ({lo}, {hi})")));
    }
    Ok(())
}

/// Runs the cascade over one parsed entry.
pub fn curate_entry(s: &Structure, cfg: &FilterConfig) -> (Vec<ComplexRecord>, Vec<RejectionReport>) {
    curate_entry_with(s, cfg, &BondTable::default())
}

pub fn curate_entry_with(
    s: &Structure,
    cfg: &FilterConfig,
    bond_table: &BondTable,
) -> (Vec<ComplexRecord>, Vec<RejectionReport>) {
    let mut records = Vec::new();
    let mut reports = Vec::new();
    let resolution = match s.resolution {
        Some(r) if r <= cfg.max_resolution => r,
        other => {
            let detail = match other {
                Some(r) => format!("{r} Å > {} Å", cfg.max_resolution),
                None => "resolution unavailable".to_string(),
            };
            reports.push(RejectionReport { complex_id: s.entry_id.clone(), rule: RejectionRule::Resolution, detail });
            return (records, reports);
        }
    };

    // Protein chains: ATOM records only, grouped per chain in file order.
    let mut chain_atoms: BTreeMap<char, Vec<&Atom>> = BTreeMap::new();
    for atom in s.atoms.iter().filter(|a| !a.is_hetero) {
        chain_atoms.entry(atom.residue.chain).or_default().push(atom);
    }

    for ligand in extract_ligands(s, bond_table) {
        let id = complex_id(&s.entry_id, &ligand);
        if let Err((rule, detail)) = check_ligand(&ligand, cfg) {
            reports.push(RejectionReport { complex_id: id, rule, detail });
            continue;
        }
        let ligand_heavy: Vec<Vec3> =
            ligand.atoms.iter().filter(|a| !a.element.is_hydrogen()).map(|a| a.position).collect();
        let kept: Vec<char> = chain_atoms
            .iter()
            .filter(|(_, atoms)| {
                let pos: Vec<Vec3> = atoms.iter().map(|a| a.position).collect();
                min_distance(&pos, &ligand_heavy) <= cfg.pocket_radius
            })
            .map(|(c, _)| *c)
            .collect();
        if kept.is_empty() {
            reports.push(RejectionReport {
                complex_id: id,
                rule: RejectionRule::NoPocketChain,
                detail: format!("no chain within {} Å", cfg.pocket_radius),
            });
            continue;
        }
        let protein_atoms = s
            .atoms
            .iter()
            .filter(|a| !a.is_hetero && kept.contains(&a.residue.chain))
            .cloned()
            .collect();
        records.push(ComplexRecord { complex_id: id, protein_atoms, ligand, resolution, rejection: None });
    }
    (records, reports)
}

/// Sidecar `entries.json`: entry id to metadata for files without a
/// REMARK 2 resolution.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EntryManifest(pub BTreeMap<String, EntryMeta>);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryMeta {
    pub resolution: f64,
}

impl EntryManifest {
    pub fn load(path: &Path) -> Result<Self, CurationError> {
        let text = std::fs::read_to_string(path).map_err(|source| CurationError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathFailure {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub entries: usize,
    pub ligands_examined: usize,
    pub retained: usize,
    pub rejections: BTreeMap<RejectionRule, usize>,
    pub failures: Vec<PathFailure>,
}

impl CurationSummary {
    fn empty() -> Self {
        CurationSummary {
            entries: 0,
            ligands_examined: 0,
            retained: 0,
            rejections: RejectionRule::ALL.iter().map(|r| (*r, 0)).collect(),
            failures: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct CurationOutput {
    pub summary: CurationSummary,
    pub records: Vec<ComplexRecord>,
    pub reports: Vec<RejectionReport>,
}

/// Entry id for a structure file: its file stem.
pub fn entry_id_for(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

enum EntryOutcome {
    Curated(Vec<ComplexRecord>, Vec<RejectionReport>),
    Failed(PathFailure),
}

fn curate_path(path: &Path, cfg: &FilterConfig, manifest: &EntryManifest) -> EntryOutcome {
    let display = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return EntryOutcome::Failed(PathFailure { path: display, message: e.to_string() }),
    };
    let entry_id = entry_id_for(path);
    let mut s = match parse_structure_named(&entry_id, &text) {
        Ok(s) => s,
        Err(e) => return EntryOutcome::Failed(PathFailure { path: display, message: e.to_string() }),
    };
    if s.resolution.is_none() {
        s.resolution = manifest.0.get(&entry_id).map(|m| m.resolution);
    }
    let (records, reports) = curate_entry(&s, cfg);
    EntryOutcome::Curated(records, reports)
}

/// Curates many files on `workers` threads. Output order follows the
/// sorted file paths, so results do not depend on the worker count.
pub fn curate_corpus(
    paths: &[PathBuf],
    cfg: &FilterConfig,
    workers: usize,
    manifest: &EntryManifest,
) -> Result<CurationOutput, CurationError> {
    cfg.validate()?;
    let mut sorted: Vec<&PathBuf> = paths.iter().collect();
    sorted.sort();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CurationError::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<EntryOutcome> =
        pool.install(|| sorted.par_iter().map(|p| curate_path(p, cfg, manifest)).collect());

    let mut summary = CurationSummary::empty();
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for outcome in outcomes {
        match outcome {
            EntryOutcome::Failed(f) => summary.failures.push(f),
            EntryOutcome::Curated(recs, reps) => {
                summary.entries += 1;
                for r in &reps {
                    *summary.rejections.entry(r.rule).or_default() += 1;
                    if r.rule != RejectionRule::Resolution {
                        summary.ligands_examined += 1;
                    }
                }
                summary.ligands_examined += recs.len();
                summary.retained += recs.len();
                records.extend(recs);
                reports.extend(reps);
            }
        }
    }
    Ok(CurationOutput { summary, records, reports })
}

/// Structure files (`.pdb`, `.ent`) directly inside `dir`, sorted.
pub fn list_structure_files(dir: &Path) -> Result<Vec<PathBuf>, CurationError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CurationError::Io { path: dir.into(), source })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| CurationError::Io { path: dir.into(), source })?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("pdb" | "ent")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `rejections.csv` body with header `complex_id,rule,detail`.
pub fn rejections_csv(reports: &[RejectionReport]) -> String {
    let mut out = String::from("complex_id,rule,detail\n");
    for r in reports {
        out.push_str(&csv_field(&r.complex_id));
        out.push(',');
        out.push_str(&r.rule.to_string());
        out.push(',');
        out.push_str(&csv_field(&r.detail));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
