//! LERF binary field files.
//!
//! Layout (little-endian): `b"LERF"`, u32 version (= 1), u32 n, f64 L,
//! u32 component count (1 or 3), then count·n³ f64 samples, row-major with x₁
//! fastest, one component after another.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Grid3, ScalarField, VectorField3};

pub const MAGIC: &[u8; 4] = b"LERF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4;

#[derive(Debug, Error)]
pub enum LerfError {
    #[error("not a LERF file")]
    BadMagic,
    #[error("unsupported LERF version {0} (expected {VERSION})")]
    VersionMismatch(u32),
    #[error("unexpected end of payload")]
    Truncated,
    #[error("invalid component count {0} (expected 1 or 3)")]
    ComponentCount(u32),
    #[error("trailing bytes after payload")]
    TrailingData,
    #[error("invalid grid in header: {0}")]
    Grid(#[from] crate::error::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField3),
}

impl FieldData {
    pub fn grid(&self) -> &Grid3 {
        match self {
            FieldData::Scalar(s) => s.grid(),
            FieldData::Vector(v) => v.grid(),
        }
    }

    fn components(&self) -> Vec<&ScalarField> {
        match self {
            FieldData::Scalar(s) => vec![s],
            FieldData::Vector(v) => v.components().iter().collect(),
        }
    }
}

impl From<ScalarField> for FieldData {
    fn from(s: ScalarField) -> Self {
        FieldData::Scalar(s)
    }
}

impl From<VectorField3> for FieldData {
    fn from(v: VectorField3) -> Self {
        FieldData::Vector(v)
    }
}

pub fn encode(field: &FieldData) -> Vec<u8> {
    let g = field.grid();
    let comps = field.components();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * comps.len() * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&(comps.len() as u32).to_le_bytes());
    for c in comps {
        for v in c.samples() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FieldData, LerfError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(LerfError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(LerfError::Truncated);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(LerfError::VersionMismatch(version));
    }
    let n = u32_at(8) as usize;
    let half_width = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let count = u32_at(20);
    if count != 1 && count != 3 {
        return Err(LerfError::ComponentCount(count));
    }
    let grid = Grid3::new(n, half_width)?;
    let payload = &bytes[HEADER_LEN..];
    let need = 8 * count as usize * grid.len();
    if payload.len() < need {
        return Err(LerfError::Truncated);
    }
    if payload.len() > need {
        return Err(LerfError::TrailingData);
    }
    let mut comps: Vec<ScalarField> = payload
        .chunks_exact(8 * grid.len())
        .map(|chunk| {
            let data = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            ScalarField::from_raw(grid, data)
        })
        .collect();
    Ok(if count == 1 {
        FieldData::Scalar(comps.remove(0))
    } else {
        let w = comps.pop().expect("3");
        let v = comps.pop().expect("3");
        let u = comps.pop().expect("3");
        FieldData::Vector(VectorField3::from_components([u, v, w]))
    })
}

pub fn write_field(path: impl AsRef<Path>, field: &FieldData) -> Result<(), LerfError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode(field))?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<FieldData, LerfError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_vector() -> VectorField3 {
        let g = Grid3::new(8, 1.5).unwrap();
        VectorField3::from_fn(g, |x| [x[0], x[1] * x[2], (x[0] - x[2]).sin()])
    }

    #[test]
    fn header_layout() {
        let f = FieldData::Scalar(ScalarField::constant(Grid3::new(8, 2.0).unwrap(), 1.0));
        let b = encode(&f);
        assert_eq!(&b[..4], b"LERF");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &8u32.to_le_bytes());
        assert_eq!(&b[12..20], &2.0f64.to_le_bytes());
        assert_eq!(&b[20..24], &1u32.to_le_bytes());
        assert_eq!(b.len(), 24 + 8 * 512);
    }

    #[test]
    fn vector_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.lerf");
        let f = FieldData::Vector(sample_vector());
        write_field(&path, &f).unwrap();
        assert_eq!(read_field(&path).unwrap(), f);
    }

    #[test]
    fn distinct_errors() {
        let mut b = encode(&FieldData::Vector(sample_vector()));
        let mut bad = b.clone();
        bad[0] = b'X';
        let e = decode(&bad).unwrap_err();
        assert!(matches!(e, LerfError::BadMagic));
        assert_eq!(e.to_string(), "not a LERF file");

        let mut bad = b.clone();
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode(&bad), Err(LerfError::VersionMismatch(2))));

        let e = decode(&b[..b.len() - 3]).unwrap_err();
        assert_eq!(e.to_string(), "unexpected end of payload");
        assert!(matches!(decode(&b[..10]), Err(LerfError::Truncated)));

        let mut bad = b.clone();
        bad[20..24].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode(&bad), Err(LerfError::ComponentCount(2))));

        b.push(0);
        assert!(matches!(decode(&b), Err(LerfError::TrailingData)));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(values in proptest::collection::vec(proptest::num::f64::ANY, 512)) {
            let g = Grid3::new(8, 0.75).unwrap();
            // NaN payloads survive too: compare bit patterns
            let f = FieldData::Scalar(ScalarField::from_raw(g, values.clone()));
            let back = decode(&encode(&f)).unwrap();
            let FieldData::Scalar(s) = back else { panic!("scalar expected") };
            let bits: Vec<u64> = s.samples().iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, orig);
        }
    }
}
