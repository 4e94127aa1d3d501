//! Self-describing binary basis files.
//!
//! Layout: the 8-byte magic `NBBASIS1`, a little-endian `u64` header length,
//! a JSON header, then little-endian `f64` arrays in this order: eigenvalues
//! (K), weights (n), coordinates (n x 2), and eigenfunction samples (K x n,
//! row-major). Lattice cell indices follow as little-endian `u64` pairs.
//! Floats are stored as raw bits so a round trip is bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BasisKind, Domain, EigenBasis, Grid};
use crate::error::{Error, Result};

pub const BASIS_MAGIC: &[u8; 8] = b"NBBASIS1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisHeader {
    pub domain: Domain,
    pub kind: BasisKind,
    pub dim: usize,
    pub h: [f64; 2],
    pub origin: [f64; 2],
    pub lattice: [usize; 2],
    pub k: usize,
    pub n_points: usize,
    pub lambda_max: f64,
    pub grid_id: String,
    pub axis_modes: Option<Vec<[usize; 2]>>,
}

pub(crate) fn write_f64s(w: &mut impl Write, xs: impl IntoIterator<Item = f64>) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

pub(crate) fn write_header<T: Serialize>(w: &mut impl Write, magic: &[u8; 8], header: &T) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

pub(crate) fn read_header<T: for<'de> Deserialize<'de>>(r: &mut impl Read, magic: &[u8; 8]) -> Result<T> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(Error::Format("header length is implausible".into()));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    Ok(serde_json::from_slice(&json)?)
}

pub fn write_basis(w: &mut impl Write, basis: &EigenBasis) -> Result<()> {
    let grid = basis.grid();
    let header = BasisHeader {
        domain: basis.domain().clone(),
        kind: basis.kind(),
        dim: grid.dim(),
        h: grid.spacing(),
        origin: grid.origin(),
        lattice: grid.lattice(),
        k: basis.len(),
        n_points: grid.len(),
        lambda_max: basis.lambda_max(),
        grid_id: format!("{:016x}", grid.id()),
        axis_modes: basis.axis_modes().map(|m| m.to_vec()),
    };
    write_header(w, BASIS_MAGIC, &header)?;
    write_f64s(w, basis.eigenvalues().iter().copied())?;
    write_f64s(w, grid.weights().iter().copied())?;
    write_f64s(w, grid.coords().iter().flatten().copied())?;
    write_f64s(w, basis.dense_samples())?;
    for c in grid.cells() {
        w.write_all(&(c[0] as u64).to_le_bytes())?;
        w.write_all(&(c[1] as u64).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_basis(r: &mut impl Read) -> Result<EigenBasis> {
    let header: BasisHeader = read_header(r, BASIS_MAGIC)?;
    let (k, n) = (header.k, header.n_points);
    if k.checked_mul(n).is_none_or(|s| s > 1 << 32) {
        return Err(Error::Format("basis dimensions are implausible".into()));
    }
    let eigenvalues = read_f64s(r, k)?;
    let weights = read_f64s(r, n)?;
    let flat = read_f64s(r, 2 * n)?;
    let coords = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let samples = read_f64s(r, k * n)?;
    let mut buf = vec![0u8; 16 * n];
    r.read_exact(&mut buf)?;
    let cells = buf
        .chunks_exact(16)
        .map(|c| {
            [
                u64::from_le_bytes(c[..8].try_into().expect("8 bytes")) as usize,
                u64::from_le_bytes(c[8..].try_into().expect("8 bytes")) as usize,
            ]
        })
        .collect();
    let grid = Grid::from_parts(header.dim, header.origin, header.h, header.lattice, cells, coords, weights)?;
    if format!("{:016x}", grid.id()) != header.grid_id {
        return Err(Error::Format("grid fingerprint mismatch".into()));
    }
    EigenBasis::from_parts(
        header.domain,
        grid,
        eigenvalues,
        samples,
        header.kind,
        header.lambda_max,
        header.axis_modes,
    )
}

pub fn save_basis(path: impl AsRef<std::path::Path>, basis: &EigenBasis) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_basis(&mut w, basis)?;
    w.flush()?;
    Ok(())
}

pub fn load_basis(path: impl AsRef<std::path::Path>) -> Result<EigenBasis> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_basis(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_fd_basis, build_interval_basis, build_rectangle_basis};

    fn roundtrip(b: &EigenBasis) {
        let mut bytes = Vec::new();
        write_basis(&mut bytes, b).unwrap();
        let back = read_basis(&mut bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        write_basis(&mut again, &back).unwrap();
        assert_eq!(bytes, again);
        assert_eq!(back.grid().id(), b.grid().id());
        assert!(back.eigenvalues().iter().zip(b.eigenvalues()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn bit_exact_roundtrips() {
        roundtrip(&build_interval_basis(std::f64::consts::PI, 9, 40).unwrap());
        roundtrip(&build_rectangle_basis(1.0, 0.7, 12, 10, 8).unwrap());
        roundtrip(&build_fd_basis(&Domain::lshape(), 0.25, 5).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_basis(&mut &b"NOTABASISFILE..."[..]).is_err());
        let b = build_interval_basis(1.0, 3, 8).unwrap();
        let mut bytes = Vec::new();
        write_basis(&mut bytes, &b).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(read_basis(&mut bytes.as_slice()).is_err());
    }
}
