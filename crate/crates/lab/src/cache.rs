//! Binary spectrum cache.
//!
//! Record layout (all little-endian):
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `RMTSPEC\x01` |
//! | 8 | `n` (u64) |
//! | 8 | flags (u64); bit 0 set when eigenvectors follow |
//! | 8 | residual norm (f64) |
//! | 8·n | eigenvalues, ascending (f64) |
//! | 8·n² | eigenvectors, column-major (f64), only with flag bit 0 |
//!
//! A file may hold several records back to back. [`SpectrumStore`] keeps one
//! record per file, at `<root>/<fingerprint>/<trial>.bin` (values only) or
//! `<trial>.vec.bin` (with eigenvectors), where the fingerprint is a hash of
//! the ensemble spec (including `n` and the seed). The two modes are kept
//! apart because the solver's eigenvalues differ in the last bits between
//! them, and cached runs must reproduce uncached ones exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rmt_lab_core::ensemble::{sample_matrix, EnsembleSpec};
use rmt_lab_core::spectral::{decompose, SpectralError, Spectrum};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"RMTSPEC\x01";
pub const FLAG_VECTORS: u64 = 1;
const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("bad magic")]
    BadMagic,
    #[error("truncated record")]
    Truncated,
    #[error("unknown flags {0:#x}")]
    UnknownFlags(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(s: &Spectrum, out: &mut Vec<u8>) {
    let flags = if s.eigenvectors.is_some() { FLAG_VECTORS } else { 0 };
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(s.n as u64).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&s.residual_norm.to_le_bytes());
    for x in s.eigenvalues.iter().chain(s.eigenvectors.iter().flatten()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().expect("8 bytes"))
}

fn read_f64s(b: &[u8], count: usize) -> Vec<f64> {
    b[..8 * count].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
}

/// Decode one record; returns it with the number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(Spectrum, usize), CacheError> {
    if bytes.len() < HEADER_LEN {
        return Err(CacheError::Truncated);
    }
    if &bytes[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let n = usize::try_from(read_u64(&bytes[8..])).map_err(|_| CacheError::Truncated)?;
    let flags = read_u64(&bytes[16..]);
    if flags & !FLAG_VECTORS != 0 {
        return Err(CacheError::UnknownFlags(flags));
    }
    let residual_norm = f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    let vectors = flags & FLAG_VECTORS != 0;
    let count = n.checked_mul(if vectors { n + 1 } else { 1 }).ok_or(CacheError::Truncated)?;
    let len = count.checked_mul(8).and_then(|p| p.checked_add(HEADER_LEN)).ok_or(CacheError::Truncated)?;
    if bytes.len() < len {
        return Err(CacheError::Truncated);
    }
    let body = &bytes[HEADER_LEN..];
    let eigenvalues = read_f64s(body, n);
    let eigenvectors = vectors.then(|| read_f64s(&body[8 * n..], n * n));
    Ok((Spectrum { n, eigenvalues, eigenvectors, residual_norm }, len))
}

pub fn write_file(path: &Path, spectra: &[Spectrum]) -> io::Result<()> {
    let mut buf = Vec::new();
    for s in spectra {
        encode(s, &mut buf);
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)
}

pub fn read_file(path: &Path) -> Result<Vec<Spectrum>, CacheError> {
    let bytes = fs::read(path)?;
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let (s, used) = decode(&bytes[at..])?;
        out.push(s);
        at += used;
    }
    Ok(out)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".tmp{}", std::process::id()));
    PathBuf::from(s)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn fingerprint(spec: &EnsembleSpec) -> String {
    let json = serde_json::to_vec(spec).expect("spec serializes");
    format!("{:016x}", fnv1a(&json))
}

/// Directory of cached spectra. Unreadable or corrupt entries are treated as
/// misses and recomputed; failed writes are counted, never fatal.
#[derive(Debug)]
pub struct SpectrumStore {
    root: PathBuf,
    write_failures: AtomicU64,
}

impl SpectrumStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), write_failures: AtomicU64::new(0) }
    }

    pub fn path(&self, spec: &EnsembleSpec, trial: u64, vectors: bool) -> PathBuf {
        let name = if vectors { format!("{trial}.vec.bin") } else { format!("{trial}.bin") };
        self.root.join(fingerprint(spec)).join(name)
    }

    /// Cached spectrum computed in the requested mode, if present.
    pub fn get(&self, spec: &EnsembleSpec, trial: u64, vectors: bool) -> Option<Spectrum> {
        let bytes = fs::read(self.path(spec, trial, vectors)).ok()?;
        let (s, _) = decode(&bytes).ok()?;
        (s.n == spec.n && s.eigenvectors.is_some() == vectors).then_some(s)
    }

    pub fn put(&self, spec: &EnsembleSpec, trial: u64, s: &Spectrum) -> io::Result<()> {
        let path = self.path(spec, trial, s.eigenvectors.is_some());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        write_file(&path, std::slice::from_ref(s))
    }

    pub fn write_failures(&self) -> u64 {
        self.write_failures.load(Ordering::Relaxed)
    }

    /// Spectrum for `trial`, from the cache or freshly decomposed (and then
    /// cached).
    pub fn get_or_compute(&self, spec: &EnsembleSpec, trial: u64, want_vectors: bool) -> Result<Spectrum, SpectralError> {
        if let Some(s) = self.get(spec, trial, want_vectors) {
            return Ok(s);
        }
        let s = compute(spec, trial, want_vectors)?;
        if self.put(spec, trial, &s).is_err() {
            self.write_failures.fetch_add(1, Ordering::Relaxed);
        }
        Ok(s)
    }
}

pub fn compute(spec: &EnsembleSpec, trial: u64, want_vectors: bool) -> Result<Spectrum, SpectralError> {
    let m = sample_matrix(spec, trial).map_err(|_| SpectralError::InvalidInput("invalid ensemble"))?;
    decompose(&m, want_vectors)
}

/// Spectrum source shared by the experiments: cached when a store is
/// configured, computed otherwise.
pub fn spectrum(store: Option<&SpectrumStore>, spec: &EnsembleSpec, trial: u64, want_vectors: bool) -> Result<Spectrum, SpectralError> {
    match store {
        Some(s) => s.get_or_compute(spec, trial, want_vectors),
        None => compute(spec, trial, want_vectors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let s = Spectrum { n: 2, eigenvalues: vec![-1.0, 3.0], eigenvectors: None, residual_norm: 0.25 };
        let mut b = Vec::new();
        encode(&s, &mut b);
        assert_eq!(b.len(), 32 + 16);
        assert_eq!(&b[..8], b"RMTSPEC\x01");
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(&b[16..24], &0u64.to_le_bytes());
        assert_eq!(&b[24..32], &0.25f64.to_le_bytes());
        assert_eq!(&b[32..40], &(-1.0f64).to_le_bytes());
        assert_eq!(decode(&b).unwrap(), (s, 48));
    }

    #[test]
    fn rejects_damage() {
        let s = Spectrum { n: 3, eigenvalues: vec![0.0, 1.0, 2.0], eigenvectors: Some(vec![0.0; 9]), residual_norm: 0.0 };
        let mut b = Vec::new();
        encode(&s, &mut b);
        assert!(matches!(decode(&b[..b.len() - 1]), Err(CacheError::Truncated)));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CacheError::BadMagic)));
        let mut flags = b.clone();
        flags[16] = 3;
        assert!(matches!(decode(&flags), Err(CacheError::UnknownFlags(3))));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
