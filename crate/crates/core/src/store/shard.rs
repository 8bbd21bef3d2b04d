//! Binary shard codec. The layout is documented in `docs/dataset-format.md`
//! at the crate root; all integers and floats are little-endian.

use crate::curation::ComplexRecord;
use crate::decoys::DecoyPose;
use crate::element::Element;
use crate::geometry::Vec3;
use crate::structure::{Atom, LigandCandidate, ResidueId};

use super::{StoreError, StoredComplex};

pub const MAGIC: [u8; 8] = *b"DFSHARD\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

const FLAG_LIGAND: u8 = 1;
const FLAG_HETERO: u8 = 2;

fn unencodable(msg: String) -> StoreError {
    StoreError::Unencodable(msg)
}

fn fixed<const N: usize>(s: &str, what: &str) -> Result<[u8; N], StoreError> {
    let bytes = s.as_bytes();
    if bytes.len() > N || bytes.contains(&0) {
        return Err(unencodable(format!("{what} {s:?} does not fit in {N} bytes")));
    }
    let mut out = [0u8; N];
    out[..bytes.len()].copy_from_slice(bytes);
    Ok(out)
}

fn unfixed(bytes: &[u8]) -> Result<String, StoreError> {
    let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
    String::from_utf8(bytes[..end].to_vec()).map_err(|_| StoreError::Corrupt("non-UTF-8 text field".into()))
}

fn chain_byte(c: char) -> Result<u8, StoreError> {
    u8::try_from(c).ok().filter(u8::is_ascii).ok_or_else(|| unencodable(format!("chain id {c:?} is not ASCII")))
}

fn count(n: usize, what: &str) -> Result<u32, StoreError> {
    u32::try_from(n).map_err(|_| unencodable(format!("too many {what}")))
}

/// Appends one complex payload (without the length prefix).
pub fn encode_complex(c: &StoredComplex, out: &mut Vec<u8>) -> Result<(), StoreError> {
    let rec = &c.record;
    let id = rec.complex_id.as_bytes();
    let id_len = u16::try_from(id.len()).map_err(|_| unencodable("complex id too long".into()))?;
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&rec.resolution.to_le_bytes());
    let n_lig = rec.ligand.atoms.len();
    for n in [
        count(rec.protein_atoms.len(), "protein atoms")?,
        count(n_lig, "ligand atoms")?,
        count(rec.ligand.bonds.len(), "bonds")?,
        count(c.decoys.len(), "decoys")?,
    ] {
        out.extend_from_slice(&n.to_le_bytes());
    }
    let atoms = || rec.protein_atoms.iter().map(|a| (a, false)).chain(rec.ligand.atoms.iter().map(|a| (a, true)));
    for (a, _) in atoms() {
        if a.element.is_unknown() {
            return Err(unencodable(format!("atom {} has no element", a.serial)));
        }
        out.push(a.element.atomic_number());
    }
    for (a, lig) in atoms() {
        out.push(if lig { FLAG_LIGAND } else { 0 } | if a.is_hetero { FLAG_HETERO } else { 0 });
    }
    for (a, _) in atoms() {
        for v in a.position {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for (a, _) in atoms() {
        out.extend_from_slice(&a.serial.to_le_bytes());
        out.extend_from_slice(&fixed::<4>(&a.name, "atom name")?);
        out.push(chain_byte(a.residue.chain)?);
        out.extend_from_slice(&fixed::<3>(&a.residue.name, "residue name")?);
        out.extend_from_slice(&a.residue.seq.to_le_bytes());
    }
    for &(i, j) in &rec.ligand.bonds {
        if i >= n_lig || j >= n_lig {
            return Err(unencodable(format!("bond ({i}, {j}) out of range")));
        }
        out.extend_from_slice(&(i as u32).to_le_bytes());
        out.extend_from_slice(&(j as u32).to_le_bytes());
    }
    for d in &c.decoys {
        if d.ligand_coords.len() != n_lig {
            return Err(unencodable(format!("decoy {} has {} atoms, ligand has {n_lig}", d.pose_index, d.ligand_coords.len())));
        }
        out.extend_from_slice(&d.pose_index.to_le_bytes());
        out.extend_from_slice(&d.rmsd.to_le_bytes());
        for p in &d.ligand_coords {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| StoreError::Corrupt(format!("truncated block at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], StoreError> {
        Ok(self.take(N)?.try_into().expect("slice length"))
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32, StoreError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn vec3(&mut self) -> Result<Vec3, StoreError> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
}

pub fn decode_complex(payload: &[u8]) -> Result<StoredComplex, StoreError> {
    let mut r = Reader { bytes: payload, pos: 0 };
    let id_len = r.u16()? as usize;
    let complex_id = String::from_utf8(r.take(id_len)?.to_vec()).map_err(|_| StoreError::Corrupt("non-UTF-8 complex id".into()))?;
    let resolution = r.f64()?;
    let n_protein = r.u32()? as usize;
    let n_ligand = r.u32()? as usize;
    let n_bonds = r.u32()? as usize;
    let n_decoys = r.u32()? as usize;
    let n = n_protein + n_ligand;
    let elements = r.take(n)?.to_vec();
    let flags = r.take(n)?.to_vec();
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push(r.vec3()?);
    }
    let mut atoms = Vec::with_capacity(n);
    for k in 0..n {
        let serial = r.u32()?;
        let name = unfixed(&r.array::<4>()?)?;
        let chain = char::from(r.u8()?);
        let res_name = unfixed(&r.array::<3>()?)?;
        let seq = r.i32()?;
        let element = Element::from_atomic_number(elements[k]);
        if element.is_unknown() {
            return Err(StoreError::Corrupt(format!("bad element code {}", elements[k])));
        }
        if (flags[k] & FLAG_LIGAND != 0) != (k >= n_protein) {
            return Err(StoreError::Corrupt(format!("ligand flag of atom {k} disagrees with counts")));
        }
        atoms.push(Atom {
            serial,
            element,
            name,
            position: positions[k],
            residue: ResidueId::new(chain, seq, res_name),
            is_hetero: flags[k] & FLAG_HETERO != 0,
        });
    }
    let mut bonds = Vec::with_capacity(n_bonds);
    for _ in 0..n_bonds {
        let (i, j) = (r.u32()? as usize, r.u32()? as usize);
        if i >= n_ligand || j >= n_ligand {
            return Err(StoreError::Corrupt(format!("bond ({i}, {j}) out of range")));
        }
        bonds.push((i, j));
    }
    let mut decoys = Vec::with_capacity(n_decoys);
    for _ in 0..n_decoys {
        let pose_index = r.u32()?;
        let rmsd = r.f64()?;
        let mut coords = Vec::with_capacity(n_ligand);
        for _ in 0..n_ligand {
            coords.push(r.vec3()?);
        }
        decoys.push(DecoyPose { complex_id: complex_id.clone(), pose_index, ligand_coords: coords, rmsd });
    }
    if r.pos != payload.len() {
        return Err(StoreError::Corrupt(format!("{} trailing bytes in block {complex_id}", payload.len() - r.pos)));
    }
    let ligand_atoms = atoms.split_off(n_protein);
    let residue = ligand_atoms
        .first()
        .map(|a| a.residue.clone())
        .ok_or_else(|| StoreError::Corrupt(format!("{complex_id} has no ligand atoms")))?;
    Ok(StoredComplex {
        record: ComplexRecord {
            complex_id,
            protein_atoms: atoms,
            ligand: LigandCandidate { residue, atoms: ligand_atoms, bonds },
            resolution,
            rejection: None,
        },
        decoys,
    })
}

/// Shard bytes plus `(offset, length)` of each complex block.
pub type EncodedShard = (Vec<u8>, Vec<(u64, u64)>);

/// Serializes a whole shard. Returns the bytes and, per complex, the offset
/// of its length prefix and the full block length including the prefix.
pub fn encode_shard(complexes: &[&StoredComplex]) -> Result<EncodedShard, StoreError> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count(complexes.len(), "complexes")?.to_le_bytes());
    let mut spans = Vec::with_capacity(complexes.len());
    let mut payload = Vec::new();
    for c in complexes {
        payload.clear();
        encode_complex(c, &mut payload)?;
        let offset = out.len() as u64;
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        spans.push((offset, 8 + payload.len() as u64));
    }
    Ok((out, spans))
}

pub fn check_header(bytes: &[u8]) -> Result<u32, StoreError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.array::<8>()? != MAGIC {
        return Err(StoreError::Corrupt("bad shard magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    r.u32()
}

/// Decodes the block whose length prefix sits at `offset`.
pub fn decode_at(bytes: &[u8], offset: u64) -> Result<(StoredComplex, u64), StoreError> {
    let start = usize::try_from(offset).map_err(|_| StoreError::Corrupt("offset overflow".into()))?;
    if start < HEADER_LEN || start > bytes.len() {
        return Err(StoreError::Corrupt(format!("offset {offset} outside shard")));
    }
    let mut r = Reader { bytes, pos: start };
    let len = r.u64()? as usize;
    let payload = r.take(len)?;
    Ok((decode_complex(payload)?, 8 + len as u64))
}

/// Decodes every block in order.
pub fn decode_shard(bytes: &[u8]) -> Result<Vec<(u64, StoredComplex)>, StoreError> {
    let n = check_header(bytes)?;
    let mut offset = HEADER_LEN as u64;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let (c, len) = decode_at(bytes, offset)?;
        out.push((offset, c));
        offset += len;
    }
    if offset as usize != bytes.len() {
        return Err(StoreError::Corrupt("trailing bytes after last block".into()));
    }
    Ok(out)
}
