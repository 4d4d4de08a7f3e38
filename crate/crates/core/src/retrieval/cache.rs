//! Binary embedding cache.
//!
//! Layout, little-endian: magic `SSEMB001`, provider id (u32 length + UTF-8),
//! dims (u32), uuid-set fingerprint (32 bytes), entry count (u64), then per
//! entry the uuid (u16 length + UTF-8) followed by `dims` f64 values.

use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EmbeddingVector, RetrievalError, RetrievalIndex};

const MAGIC: &[u8; 8] = b"SSEMB001";

/// SHA-256 over the sorted uuid set, so any added or removed entry
/// invalidates the cache.
pub fn uuid_fingerprint<'a>(uuids: impl IntoIterator<Item = &'a str>) -> [u8; 32] {
    let mut sorted: Vec<&str> = uuids.into_iter().collect();
    sorted.sort_unstable();
    let mut hasher = Sha256::new();
    for u in sorted {
        hasher.update(u.as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().into()
}

pub fn save_index_cache(index: &RetrievalIndex, path: &Path) -> Result<(), RetrievalError> {
    let mut buf = Vec::with_capacity(64 + index.len() * (40 + 8 * index.dims));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(index.provider_id.len() as u32).to_le_bytes());
    buf.extend_from_slice(index.provider_id.as_bytes());
    buf.extend_from_slice(&(index.dims as u32).to_le_bytes());
    buf.extend_from_slice(&uuid_fingerprint(
        index.entries.iter().map(|(u, _)| u.as_str()),
    ));
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for (uuid, v) in &index.entries {
        buf.extend_from_slice(&(uuid.len() as u16).to_le_bytes());
        buf.extend_from_slice(uuid.as_bytes());
        for x in &v.0 {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let tmp = path.with_extension("bin.tmp");
    std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(&buf))
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|e| RetrievalError::io(path, e))
}

/// Loads the cache when it was written by `provider_id` for exactly the
/// uuid set `fingerprint`; `Ok(None)` when absent, stale or unreadable.
pub fn load_index_cache(
    path: &Path,
    provider_id: &str,
    fingerprint: &[u8; 32],
) -> Result<Option<RetrievalIndex>, RetrievalError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(RetrievalError::io(path, e)),
    };
    match decode(&bytes) {
        Ok((index, stored)) => {
            if index.provider_id != provider_id {
                log::info!(
                    "embedding cache {} was built by `{}`; rebuilding",
                    path.display(),
                    index.provider_id
                );
                return Ok(None);
            }
            if &stored != fingerprint {
                log::info!(
                    "embedding cache {} covers a different sample set; rebuilding",
                    path.display()
                );
                return Ok(None);
            }
            Ok(Some(index))
        }
        Err(e) => {
            log::warn!(
                "ignoring unreadable embedding cache {}: {e}",
                path.display()
            );
            Ok(None)
        }
    }
}

fn decode(mut bytes: &[u8]) -> io::Result<(RetrievalIndex, [u8; 32])> {
    fn take<const N: usize>(r: &mut &[u8]) -> io::Result<[u8; N]> {
        let mut out = [0u8; N];
        r.read_exact(&mut out)?;
        Ok(out)
    }
    fn text(r: &mut &[u8], len: usize) -> io::Result<String> {
        let mut out = vec![0u8; len];
        r.read_exact(&mut out)?;
        String::from_utf8(out).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    let r = &mut bytes;
    if &take::<8>(r)? != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let id_len = u32::from_le_bytes(take(r)?) as usize;
    let provider_id = text(r, id_len)?;
    let dims = u32::from_le_bytes(take(r)?) as usize;
    let fingerprint = take::<32>(r)?;
    let count = u64::from_le_bytes(take(r)?) as usize;
    if count.saturating_mul(dims.saturating_mul(8)) > r.len() {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "truncated entries",
        ));
    }
    let mut index = RetrievalIndex::new(provider_id, dims);
    for _ in 0..count {
        let len = u16::from_le_bytes(take(r)?) as usize;
        let uuid = text(r, len)?;
        let values = (0..dims)
            .map(|_| take(r).map(f64::from_le_bytes))
            .collect::<io::Result<Vec<_>>>()?;
        index.entries.push((uuid, EmbeddingVector(values)));
    }
    if !r.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "trailing bytes"));
    }
    Ok((index, fingerprint))
}
