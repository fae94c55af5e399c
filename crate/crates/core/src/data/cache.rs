//! Binary window cache, one file per split. All integers little-endian.
//!
//! ```text
//! magic        8 bytes  "HARWCACH"
//! version      u32      = 1
//! split        u8       0 = train, 1 = test
//! meta_len     u32      then meta_len bytes of UTF-8 (JSON provenance)
//! n_classes    u32      then per class: id u16, name_len u32, name bytes
//! n_windows    u64
//! window_len   u32
//! n_channels   u32      = 6
//! windows      n_windows x { label u16, subject u32, f32 x window_len x n_channels (time-major) }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{LabeledDataset, Split, Window, N_CHANNELS};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"HARWCACH";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache(path: &Path, ds: &LabeledDataset, meta: &str) -> Result<()> {
    let window_len = ds.windows.first().map_or(0, |w| w.len());
    if ds.windows.iter().any(|w| w.len() != window_len) {
        return Err(Error::Shape("cache requires windows of equal length".into()));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.push(match ds.split {
        Split::Train => 0,
        Split::Test => 1,
    });
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta.as_bytes());
    buf.extend_from_slice(&(ds.class_names.len() as u32).to_le_bytes());
    for (id, name) in &ds.class_names {
        buf.extend_from_slice(&id.to_le_bytes());
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    buf.extend_from_slice(&(ds.windows.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(window_len as u32).to_le_bytes());
    buf.extend_from_slice(&(N_CHANNELS as u32).to_le_bytes());
    out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    for w in &ds.windows {
        buf.clear();
        buf.extend_from_slice(&w.label.to_le_bytes());
        buf.extend_from_slice(&w.subject_id.to_le_bytes());
        for v in &w.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("cache truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 in cache".into()))
    }
}

/// Returns the dataset and the provenance string stored with it.
pub fn read_cache(path: &Path) -> Result<(LabeledDataset, String)> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CACHE_MAGIC {
        return Err(Error::Format(format!("{} is not a window cache", path.display())));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let split = match r.u8()? {
        0 => Split::Train,
        1 => Split::Test,
        s => return Err(Error::Format(format!("bad split tag {s}"))),
    };
    let meta_len = r.u32()? as usize;
    let meta = r.string(meta_len)?;
    let n_classes = r.u32()?;
    let mut class_names = BTreeMap::new();
    for _ in 0..n_classes {
        let id = r.u16()?;
        let len = r.u32()? as usize;
        class_names.insert(id, r.string(len)?);
    }
    let n_windows = r.u64()? as usize;
    let window_len = r.u32()? as usize;
    let n_channels = r.u32()? as usize;
    if n_channels != N_CHANNELS {
        return Err(Error::Format(format!("cache has {n_channels} channels, expected {N_CHANNELS}")));
    }
    let per_window = window_len * n_channels;
    let mut windows = Vec::with_capacity(n_windows);
    for _ in 0..n_windows {
        let label = r.u16()?;
        let subject_id = r.u32()?;
        let data = r
            .take(per_window * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        windows.push(Window { data, label, subject_id });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after cache payload".into()));
    }
    Ok((LabeledDataset::new(windows, class_names, split)?, meta))
}
