//! `BHC1` binary layout, little-endian:
//! magic `BHC1`, `u64` rows, handles, nnz, `u64` row pointers (rows + 1),
//! `u64` column indices (nnz), `f64` values (nnz), `u64` handle indices.

use std::path::Path;

use super::{BiharmonicMap, DeformError, HandleSet, Result};

const MAGIC: &[u8; 4] = b"BHC1";

pub fn write_bhc(map: &BiharmonicMap) -> Vec<u8> {
    let n = map.vertex_count();
    let c = map.handle_count();
    let nnz = map.nnz();
    let mut out = Vec::with_capacity(4 + 8 * (3 + n + 1 + 2 * nnz + c));
    out.extend_from_slice(MAGIC);
    for x in [n, c, nnz] {
        out.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for &x in map.row_ptr().iter().chain(map.col_idx()) {
        out.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for &v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &h in map.handles().indices() {
        out.extend_from_slice(&(h as u64).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn word(&mut self) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| DeformError::Format(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("8 bytes"))
    }

    fn index(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.word()?)).map_err(|_| DeformError::Format("index overflow".into()))
    }

    fn indices(&mut self, count: usize) -> Result<Vec<usize>> {
        self.check_remaining(count)?;
        (0..count).map(|_| self.index()).collect()
    }

    fn check_remaining(&self, count: usize) -> Result<()> {
        let need = count.checked_mul(8).ok_or_else(|| DeformError::Format("length overflow".into()))?;
        if self.bytes.len() - self.pos < need {
            return Err(DeformError::Format(format!("header promises {count} words past the end of the data")));
        }
        Ok(())
    }
}

pub fn read_bhc(bytes: &[u8]) -> Result<BiharmonicMap> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DeformError::Format("missing BHC1 magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let n = r.index()?;
    let c = r.index()?;
    let nnz = r.index()?;
    let row_ptr = r.indices(n.checked_add(1).ok_or_else(|| DeformError::Format("row count overflow".into()))?)?;
    let col_idx = r.indices(nnz)?;
    r.check_remaining(nnz)?;
    let values = (0..nnz).map(|_| Ok(f64::from_le_bytes(r.word()?))).collect::<Result<Vec<_>>>()?;
    let handles = r.indices(c)?;
    if r.pos != bytes.len() {
        return Err(DeformError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let handles = HandleSet::new(handles, usize::MAX).map_err(|e| DeformError::Format(e.to_string()))?;
    BiharmonicMap::from_csr(row_ptr, col_idx, values, handles)
}

pub fn write_bhc_file(map: &BiharmonicMap, path: &Path) -> Result<()> {
    std::fs::write(path, write_bhc(map)).map_err(|source| DeformError::Io { path: path.to_path_buf(), source })
}

pub fn read_bhc_file(path: &Path) -> Result<BiharmonicMap> {
    let bytes = std::fs::read(path).map_err(|source| DeformError::Io { path: path.to_path_buf(), source })?;
    read_bhc(&bytes)
}
