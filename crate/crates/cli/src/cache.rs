//! Content-addressed store of spectral decompositions.
//!
//! Entries are keyed by the SHA-256 of the version tag, the decomposition mode,
//! the operator label and its canonical bytes. On disk each entry is
//!
//! ```text
//! magic "CSPC" | u32 tag length | tag | sha256(payload) | payload
//! ```
//!
//! with the payload from [`SpectralData::to_bytes`]. A slot per key serializes
//! concurrent requests for the same operator, so each decomposition runs once.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use callias_core::ops::BoundaryOperator;
use callias_core::spectral::{eigendecompose, eigendecompose_window, Eigensolver, SpectralData};
use sha2::{Digest, Sha256};

use crate::config::hex;

const MAGIC: &[u8; 4] = b"CSPC";

/// Invalidates entries written by other versions.
pub const VERSION_TAG: &str = concat!("callias-spectral/", env!("CARGO_PKG_VERSION"), "/1");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dense,
    /// Certified window holding at least this many pairs.
    Window(usize),
}

impl Mode {
    fn tag(&self) -> String {
        match self {
            Mode::Dense => "dense".into(),
            Mode::Window(k) => format!("window:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    /// Decompositions actually computed.
    pub solver_invocations: usize,
    pub disk_hits: usize,
    pub memory_hits: usize,
    /// Disk entries rejected and recomputed.
    pub corrupt_entries: usize,
}

type Slot = Arc<Mutex<Option<Arc<SpectralData>>>>;

#[derive(Default)]
pub struct SpectralCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<String, Slot>>,
    invocations: AtomicUsize,
    disk_hits: AtomicUsize,
    memory_hits: AtomicUsize,
    corrupt: AtomicUsize,
    tmp_counter: AtomicUsize,
}

impl std::fmt::Debug for SpectralCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralCache").field("dir", &self.dir).field("stats", &self.stats()).finish()
    }
}

/// Cache key of `op` under `mode`.
pub fn cache_key(op: &BoundaryOperator, mode: Mode) -> String {
    let mut bytes = Vec::new();
    op.write_canonical_bytes(&mut bytes);
    let mut h = Sha256::new();
    for part in [VERSION_TAG.as_bytes(), mode.tag().as_bytes(), op.label().as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(&bytes);
    hex(&h.finalize())
}

fn encode(spec: &SpectralData) -> Vec<u8> {
    let payload = spec.to_bytes();
    let mut out = Vec::with_capacity(payload.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(VERSION_TAG.len() as u32).to_le_bytes());
    out.extend_from_slice(VERSION_TAG.as_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

fn decode(bytes: &[u8]) -> Result<SpectralData, String> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or("bad magic")?;
    let (len, rest) = rest.split_at_checked(4).ok_or("truncated header")?;
    let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
    let (tag, rest) = rest.split_at_checked(len).ok_or("truncated tag")?;
    if tag != VERSION_TAG.as_bytes() {
        return Err(format!("version tag '{}'", String::from_utf8_lossy(tag)));
    }
    let (digest, payload) = rest.split_at_checked(32).ok_or("truncated digest")?;
    if Sha256::digest(payload).as_slice() != digest {
        return Err("payload checksum mismatch".into());
    }
    SpectralData::from_bytes(payload).map_err(|e| e.to_string())
}

impl SpectralCache {
    /// In-memory cache only.
    pub fn memory() -> Self {
        Self::default()
    }

    /// Cache backed by `dir`, created if missing.
    pub fn on_disk(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            ..Self::default()
        })
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            solver_invocations: self.invocations.load(Ordering::Relaxed),
            disk_hits: self.disk_hits.load(Ordering::Relaxed),
            memory_hits: self.memory_hits.load(Ordering::Relaxed),
            corrupt_entries: self.corrupt.load(Ordering::Relaxed),
        }
    }

    fn entry_path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.spec")))
    }

    fn load(&self, key: &str) -> Option<SpectralData> {
        let path = self.entry_path(key)?;
        let bytes = std::fs::read(&path).ok()?;
        match decode(&bytes) {
            Ok(spec) => Some(spec),
            Err(why) => {
                log::warn!("discarding cache entry {}: {why}", path.display());
                self.corrupt.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    fn store(&self, key: &str, spec: &SpectralData) {
        let Some(path) = self.entry_path(key) else { return };
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp.{}.{n}", std::process::id()));
        let written = std::fs::write(&tmp, encode(spec)).and_then(|_| std::fs::rename(&tmp, &path));
        if let Err(e) = written {
            log::warn!("could not write cache entry {}: {e}", path.display());
            let _ = std::fs::remove_file(&tmp);
        }
    }

    /// Decomposition of `op` under `mode`, from memory, disk or the solver.
    pub fn get(&self, op: &BoundaryOperator, mode: Mode) -> callias_core::Result<Arc<SpectralData>> {
        let key = cache_key(op, mode);
        let slot = self.slots.lock().unwrap().entry(key.clone()).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(spec) = guard.as_ref() {
            self.memory_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(spec.clone());
        }
        let spec = match self.load(&key) {
            Some(spec) => {
                self.disk_hits.fetch_add(1, Ordering::Relaxed);
                spec
            }
            None => {
                self.invocations.fetch_add(1, Ordering::Relaxed);
                let spec = match mode {
                    Mode::Dense => eigendecompose(op)?,
                    Mode::Window(k) => eigendecompose_window(op, k, Default::default())?,
                };
                self.store(&key, &spec);
                spec
            }
        };
        let spec = Arc::new(spec);
        *guard = Some(spec.clone());
        Ok(spec)
    }
}

impl Eigensolver for SpectralCache {
    fn decompose(&self, op: &BoundaryOperator) -> callias_core::Result<Arc<SpectralData>> {
        self.get(op, Mode::Dense)
    }
}
