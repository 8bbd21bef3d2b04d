//! Reading and writing the PDB text subset used by the pipeline (ATOM,
//! HETATM, MODEL/ENDMDL, TER, REMARK 2, HEADER), and extraction of
//! candidate ligands from hetero groups.
//!
//! Only the first model of multi-model files is kept. Alternate locations
//! other than blank or `A` are dropped.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::Element;
use crate::geometry::{distance, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("no atoms parsed")]
    EmptyStructure,
}

/// Residue a record belongs to: chain, sequence number and residue name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResidueId {
    pub chain: char,
    pub seq: i32,
    pub name: String,
}

impl ResidueId {
    pub fn new(chain: char, seq: i32, name: impl Into<String>) -> Self {
        ResidueId { chain, seq, name: name.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub serial: u32,
    pub element: Element,
    pub name: String,
    pub position: Vec3,
    pub residue: ResidueId,
    pub is_hetero: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub entry_id: String,
    pub atoms: Vec<Atom>,
    /// Crystallographic resolution in Å, when known.
    pub resolution: Option<f64>,
    pub chains: BTreeSet<char>,
}

/// One hetero group that may be a ligand, with covalent bonds inferred from
/// interatomic distances. Bond indices refer to `atoms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LigandCandidate {
    pub residue: ResidueId,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<(usize, usize)>,
}

impl LigandCandidate {
    pub fn positions(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.element.is_hydrogen()).count()
    }
}

/// Distance rule for covalent bonds: two atoms are bonded when their
/// separation is at most the sum of covalent radii plus `tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct BondTable {
    pub tolerance: f64,
}

impl Default for BondTable {
    fn default() -> Self {
        BondTable { tolerance: 0.4 }
    }
}

impl BondTable {
    /// Maximum bonded distance for an element pair, or `None` when either
    /// element has no radius.
    pub fn max_distance(&self, a: Element, b: Element) -> Option<f64> {
        Some(a.covalent_radius()? + b.covalent_radius()? + self.tolerance)
    }

    /// All bonded pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn infer_bonds(&self, atoms: &[Atom]) -> Vec<(usize, usize)> {
        let mut bonds = Vec::new();
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if let Some(max) = self.max_distance(atoms[i].element, atoms[j].element) {
                    if distance(atoms[i].position, atoms[j].position) <= max {
                        bonds.push((i, j));
                    }
                }
            }
        }
        bonds
    }
}

const WATER_NAMES: [&str; 5] = ["HOH", "WAT", "H2O", "DOD", "D2O"];

pub fn is_water(residue_name: &str) -> bool {
    WATER_NAMES.contains(&residue_name)
}

fn column(line: &str, start: usize, end: usize) -> Option<&str> {
    // 1-based inclusive PDB columns; short lines read as blank.
    let len = line.len();
    if start > len {
        return Some("");
    }
    line.get(start - 1..end.min(len))
}

fn malformed(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::MalformedRecord { line, reason: reason.into() }
}

fn element_from_name(name_field: &str) -> Element {
    // Columns 13-14 hold the right-justified element symbol by convention.
    let bytes = name_field.as_bytes();
    if bytes.len() >= 2 && bytes[0].is_ascii_alphabetic() && bytes[1].is_ascii_alphabetic() {
        // Four-character hydrogen names (HG21, HD11) also start in column 13.
        let hydrogen_name = bytes[0] == b'H' && name_field.trim().len() == 4;
        let two = Element::from_symbol(&name_field[..2]);
        if !hydrogen_name && !two.is_unknown() {
            return two;
        }
    }
    name_field
        .chars()
        .find(|c| c.is_ascii_alphabetic())
        .map_or(Element::UNKNOWN, |c| Element::from_symbol(&c.to_string()))
}

fn parse_atom_line(text: &str, line_no: usize) -> Result<Option<Atom>, ParseError> {
    if text.len() < 54 {
        return Err(malformed(line_no, "coordinate record shorter than 54 columns"));
    }
    let col = |a, b| column(text, a, b).ok_or_else(|| malformed(line_no, "non-ASCII column"));
    let altloc = col(17, 17)?;
    if !(altloc.is_empty() || altloc == " " || altloc == "A") {
        return Ok(None);
    }
    let is_hetero = text.starts_with("HETATM");
    let serial = col(7, 11)?
        .trim()
        .parse::<u32>()
        .map_err(|_| malformed(line_no, "bad serial number"))?;
    let name_field = col(13, 16)?;
    let res_name = col(18, 20)?.trim().to_string();
    let chain = col(22, 22)?.chars().next().unwrap_or(' ');
    let seq = col(23, 26)?
        .trim()
        .parse::<i32>()
        .map_err(|_| malformed(line_no, "bad residue sequence number"))?;
    let mut position = [0.0; 3];
    for (k, (a, b)) in [(31, 38), (39, 46), (47, 54)].into_iter().enumerate() {
        let v = col(a, b)?
            .trim()
            .parse::<f64>()
            .map_err(|_| malformed(line_no, format!("bad coordinate in columns {a}-{b}")))?;
        if !v.is_finite() {
            return Err(malformed(line_no, "non-finite coordinate"));
        }
        position[k] = v;
    }
    let element_field = col(77, 78)?.trim();
    let element = if element_field.is_empty() {
        element_from_name(name_field)
    } else {
        Element::from_symbol(element_field)
    };
    Ok(Some(Atom {
        serial,
        element,
        name: name_field.trim().to_string(),
        position,
        residue: ResidueId::new(chain, seq, res_name),
        is_hetero,
    }))
}

fn parse_resolution(text: &str) -> Option<f64> {
    let rest = text.split("RESOLUTION.").nth(1)?;
    let value = rest.split_whitespace().next()?.parse::<f64>().ok()?;
    (value.is_finite() && value > 0.0).then_some(value)
}

/// Parses PDB text. The entry id comes from the HEADER record when present,
/// otherwise it is left empty; see [`parse_structure_named`].
pub fn parse_structure(text: &str) -> Result<Structure, ParseError> {
    parse_structure_named("", text)
}

/// Parses PDB text under `entry_id`; an empty id falls back to the HEADER idcode.
pub fn parse_structure_named(entry_id: &str, text: &str) -> Result<Structure, ParseError> {
    let mut models = parse_models_inner(text, true)?;
    let (header_id, resolution) = scan_metadata(text);
    let atoms = models.pop().unwrap_or_default();
    if atoms.is_empty() {
        return Err(ParseError::EmptyStructure);
    }
    let chains = atoms.iter().map(|a| a.residue.chain).collect();
    let entry_id = if entry_id.is_empty() { header_id.unwrap_or_default() } else { entry_id.to_string() };
    Ok(Structure { entry_id, atoms, resolution, chains })
}

fn scan_metadata(text: &str) -> (Option<String>, Option<f64>) {
    let mut header = None;
    let mut resolution = None;
    for line in text.lines() {
        if line.starts_with("HEADER") {
            if let Some(id) = column(line, 63, 66).map(str::trim).filter(|s| !s.is_empty()) {
                header = Some(id.to_string());
            }
        } else if line.starts_with("REMARK   2") && resolution.is_none() {
            resolution = parse_resolution(line);
        }
    }
    (header, resolution)
}

/// Atoms of every MODEL block (or a single block when the file has no MODEL
/// records). Used for multi-pose files.
pub fn parse_models(text: &str) -> Result<Vec<Vec<Atom>>, ParseError> {
    parse_models_inner(text, false)
}

fn parse_models_inner(text: &str, first_only: bool) -> Result<Vec<Vec<Atom>>, ParseError> {
    let mut models: Vec<Vec<Atom>> = Vec::new();
    let mut current: Vec<Atom> = Vec::new();
    let mut serials: HashSet<u32> = HashSet::new();
    let mut in_model = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.starts_with("MODEL") {
            if in_model || !current.is_empty() {
                models.push(std::mem::take(&mut current));
                serials.clear();
                if first_only {
                    break;
                }
            }
            in_model = true;
        } else if line.starts_with("ENDMDL") {
            models.push(std::mem::take(&mut current));
            serials.clear();
            in_model = false;
            if first_only {
                break;
            }
        } else if line.starts_with("ATOM") || line.starts_with("HETATM") {
            if let Some(atom) = parse_atom_line(line, line_no)? {
                if !serials.insert(atom.serial) {
                    return Err(malformed(line_no, format!("duplicate serial {}", atom.serial)));
                }
                current.push(atom);
            }
        }
    }
    if !current.is_empty() || models.is_empty() {
        models.push(current);
    }
    if first_only {
        models.truncate(1);
    }
    Ok(models)
}

fn format_name(name: &str, element: Element) -> String {
    if name.len() < 4 && element.symbol().len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

/// Formats one ATOM/HETATM record in the fixed-width v3.3 layout.
pub fn format_atom_record(atom: &Atom) -> String {
    let record = if atom.is_hetero { "HETATM" } else { "ATOM" };
    let [x, y, z] = atom.position;
    format!(
        "{record:<6}{serial:>5} {name}{alt}{res:>3} {chain}{seq:>4}{icode}   {x:>8.3}{y:>8.3}{z:>8.3}{occ:>6.2}{b:>6.2}          {el:>2}",
        serial = atom.serial,
        name = format_name(&atom.name, atom.element),
        alt = ' ',
        res = atom.residue.name,
        chain = atom.residue.chain,
        seq = atom.residue.seq,
        icode = ' ',
        occ = 1.0,
        b = 0.0,
        el = atom.element.symbol().to_ascii_uppercase(),
    )
}

/// Serialises a structure back to PDB text (coordinates at 3 decimals).
pub fn write_structure(s: &Structure) -> String {
    let mut out = String::new();
    if let Some(r) = s.resolution {
        let _ = writeln!(out, "REMARK   2 RESOLUTION. {r:.2} ANGSTROMS.");
    }
    for atom in &s.atoms {
        out.push_str(&format_atom_record(atom));
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

/// Writes a sequence of poses as MODEL blocks.
pub fn write_models(models: &[Vec<Atom>]) -> String {
    let mut out = String::new();
    for (i, atoms) in models.iter().enumerate() {
        let _ = writeln!(out, "MODEL     {:>4}", i + 1);
        for atom in atoms {
            out.push_str(&format_atom_record(atom));
            out.push('\n');
        }
        out.push_str("ENDMDL\n");
    }
    out.push_str("END\n");
    out
}

/// One candidate per non-water hetero residue, in order of first appearance.
pub fn extract_ligands(s: &Structure, bond_table: &BondTable) -> Vec<LigandCandidate> {
    let mut order: Vec<ResidueId> = Vec::new();
    let mut groups: HashMap<ResidueId, Vec<Atom>> = HashMap::new();
    for atom in s.atoms.iter().filter(|a| a.is_hetero && !is_water(&a.residue.name)) {
        groups
            .entry(atom.residue.clone())
            .or_insert_with(|| {
                order.push(atom.residue.clone());
                Vec::new()
            })
            .push(atom.clone());
    }
    order
        .into_iter()
        .map(|residue| {
            let atoms = groups.remove(&residue).unwrap_or_default();
            let bonds = bond_table.infer_bonds(&atoms);
            LigandCandidate { residue, atoms, bonds }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atom(serial: u32, el: Element, name: &str, pos: Vec3, res: &str, seq: i32, het: bool) -> Atom {
        Atom {
            serial,
            element: el,
            name: name.into(),
            position: pos,
            residue: ResidueId::new('A', seq, res),
            is_hetero: het,
        }
    }

    #[test]
    fn single_atom_record() {
        let text = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000  1.00  0.00           C\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.atoms.len(), 1);
        assert_eq!(s.atoms[0].position, [1.0, 2.0, 3.0]);
        assert_eq!(s.atoms[0].element, Element::C);
        assert_eq!(s.atoms[0].name, "CA");
        assert_eq!(s.atoms[0].residue, ResidueId::new('A', 1, "ALA"));
        assert!(!s.atoms[0].is_hetero);
        assert_eq!(s.resolution, None);
    }

    #[test]
    fn resolution_remark() {
        let text = "HEADER    HYDROLASE                               01-JAN-00   1ABC              \n\
                    REMARK   2 RESOLUTION. 2.30 ANGSTROMS.\n\
                    ATOM      1  N   GLY A   1       0.000   0.000   0.000  1.00  0.00           N\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.resolution, Some(2.30));
        assert_eq!(s.entry_id, "1ABC");
        let s = parse_structure_named("xyz", text).unwrap();
        assert_eq!(s.entry_id, "xyz");
    }

    #[test]
    fn resolution_not_applicable() {
        let text = "REMARK   2 RESOLUTION. NOT APPLICABLE.\n\
                    ATOM      1  N   GLY A   1       0.000   0.000   0.000  1.00  0.00           N\n";
        assert_eq!(parse_structure(text).unwrap().resolution, None);
    }

    #[test]
    fn only_first_model_kept() {
        let mut text = String::new();
        text.push_str("MODEL        1\n");
        for i in 1..=3 {
            text.push_str(&format_atom_record(&atom(i, Element::C, "C", [i as f64, 0.0, 0.0], "ALA", 1, false)));
            text.push('\n');
        }
        text.push_str("ENDMDL\nMODEL        2\n");
        for i in 1..=5 {
            text.push_str(&format_atom_record(&atom(i, Element::C, "C", [0.0, i as f64, 0.0], "ALA", 1, false)));
            text.push('\n');
        }
        text.push_str("ENDMDL\n");
        let s = parse_structure(&text).unwrap();
        assert_eq!(s.atoms.len(), 3);
        let models = parse_models(&text).unwrap();
        assert_eq!(models.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 5]);
    }

    #[test]
    fn malformed_records_report_line() {
        let text = "REMARK   1\nATOM      1  CA  ALA A   1       1.000   2.0\n";
        assert_eq!(
            parse_structure(text).unwrap_err(),
            ParseError::MalformedRecord { line: 2, reason: "coordinate record shorter than 54 columns".into() }
        );
        let text = "ATOM      1  CA  ALA A   1       1.000   abcde   3.000  1.00  0.00           C\n";
        assert!(matches!(parse_structure(text), Err(ParseError::MalformedRecord { line: 1, .. })));
        let dup = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000\nATOM      1  CB  ALA A   1       1.000   2.000   3.000\n";
        assert!(matches!(parse_structure(dup), Err(ParseError::MalformedRecord { line: 2, .. })));
    }

    #[test]
    fn empty_structure() {
        assert_eq!(parse_structure("REMARK   2 RESOLUTION. 2.0 ANGSTROMS.\nEND\n"), Err(ParseError::EmptyStructure));
    }

    #[test]
    fn altloc_filter() {
        let text = "ATOM      1  CA AALA A   1       1.000   2.000   3.000  1.00  0.00           C\n\
                    ATOM      2  CA BALA A   1       1.100   2.000   3.000  1.00  0.00           C\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.atoms.len(), 1);
        assert_eq!(s.atoms[0].serial, 1);
    }

    #[test]
    fn element_fallback_from_name_columns() {
        let text = "HETATM    1 FE   HEM A   1       1.000   2.000   3.000\n\
                    HETATM    2  C1  HEM A   1       1.000   2.000   4.000\n\
                    HETATM    3 ZZ1  HEM A   1       1.000   2.000   5.000  1.00  0.00          QQ\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.atoms[0].element, Element::FE);
        assert_eq!(s.atoms[1].element, Element::C);
        assert!(s.atoms[2].element.is_unknown());
    }

    #[test]
    fn protein_only_has_no_ligands() {
        let text = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000  1.00  0.00           C\n";
        let s = parse_structure(text).unwrap();
        assert!(extract_ligands(&s, &BondTable::default()).is_empty());
    }

    #[test]
    fn water_is_not_a_ligand() {
        let mut atoms = Vec::new();
        for i in 0..3 {
            atoms.push(atom(i + 1, Element::O, "O", [i as f64 * 3.0, 0.0, 0.0], "HOH", 100 + i as i32, true));
        }
        let s = Structure { entry_id: "w".into(), atoms, resolution: Some(1.0), chains: ['A'].into() };
        assert!(extract_ligands(&s, &BondTable::default()).is_empty());
    }

    pub(crate) fn benzene() -> Vec<Atom> {
        (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                atom(k + 1, Element::C, &format!("C{}", k + 1), [1.39 * t.cos(), 1.39 * t.sin(), 0.0], "BNZ", 1, true)
            })
            .collect()
    }

    #[test]
    fn benzene_ring_bonds() {
        let atoms = benzene();
        // Brute force: every pair checked against the radius rule by hand.
        let limit = 0.76 + 0.76 + 0.4;
        let mut expected = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                if distance(atoms[i].position, atoms[j].position) <= limit {
                    expected.push((i, j));
                }
            }
        }
        assert_eq!(expected.len(), 6);
        let s = Structure { entry_id: "b".into(), atoms, resolution: None, chains: ['A'].into() };
        let ligands = extract_ligands(&s, &BondTable::default());
        assert_eq!(ligands.len(), 1);
        assert_eq!(ligands[0].bonds, expected);
        assert_eq!(ligands[0].residue.name, "BNZ");
    }

    fn arb_atom() -> impl Strategy<Value = Atom> {
        (
            1u32..99999,
            prop::sample::select(vec![Element::C, Element::N, Element::O, Element::S, Element::CL, Element::FE]),
            prop::sample::select(vec!["C1", "CA", "N", "O2", "CL1", "FE"]),
            prop::array::uniform3(-999_999i32..999_999),
            prop::sample::select(vec!['A', 'B', ' ']),
            -999i32..9999,
            prop::sample::select(vec!["ALA", "LIG", "HEM", "A"]),
            any::<bool>(),
        )
            .prop_map(|(serial, element, name, c, chain, seq, res, het)| Atom {
                serial,
                element,
                name: name.to_string(),
                position: [c[0] as f64 / 1000.0, c[1] as f64 / 1000.0, c[2] as f64 / 1000.0],
                residue: ResidueId::new(chain, seq, res),
                is_hetero: het,
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(atoms in prop::collection::vec(arb_atom(), 1..30)) {
            let mut seen = HashSet::new();
            let atoms: Vec<Atom> = atoms.into_iter().filter(|a| seen.insert(a.serial)).collect();
            let chains = atoms.iter().map(|a| a.residue.chain).collect();
            let s = Structure { entry_id: "rt".into(), atoms, resolution: Some(1.85), chains };
            let text = write_structure(&s);
            let back = parse_structure_named("rt", &text).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn bond_inference_is_permutation_invariant(seed in 0u64..1000, n in 2usize..14) {
            use rand::{Rng, SeedableRng, seq::SliceRandom};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<Atom> = (0..n)
                .map(|i| atom(i as u32 + 1, Element::C, "C", [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)], "LIG", 1, true))
                .collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<Atom> = perm.iter().map(|&i| atoms[i].clone()).collect();
            let table = BondTable::default();
            let canon = |atoms: &[Atom], bonds: Vec<(usize, usize)>| -> BTreeSet<(u32, u32)> {
                bonds.into_iter().map(|(i, j)| {
                    let (a, b) = (atoms[i].serial, atoms[j].serial);
                    (a.min(b), a.max(b))
                }).collect()
            };
            prop_assert_eq!(canon(&atoms, table.infer_bonds(&atoms)), canon(&shuffled, table.infer_bonds(&shuffled)));
        }
    }
}
