//! Binary recipe look-up table.
//!
//! Little-endian throughout.
//!
//! ```text
//! offset  size   field
//! 0       8      magic "PGMXLUT\0"
//! 8       4      u32 format version (1)
//! 12      8      u64 number of records present
//! 20      32     SHA-256 of the model file the table was built from
//! 52      4      u32 length C of the build config JSON
//! 56      C      LutBuildConfig as UTF-8 JSON
//! 56+C    21·n   records
//! ```
//!
//! Record (21 bytes): `u8 pigment_a, u8 pigment_b, u16 q_a_uL, u16 q_b_uL,
//! f32 L*, f32 a*, f32 b*, u8 r, u8 g, u8 b`.
//!
//! Records appear in build order: record `i` pairs primary `i / n` with
//! primary `i % n`, primaries ordered by the config's pigment list and then
//! its quantity list. A partially built file has a smaller count and can be
//! resumed.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use pigmix_core::colorimetry::{Colorimeter, Srgb8};
use pigmix_core::mixnet::ModelWeights;
use pigmix_core::palette::{lut_primaries, predict_entries, Lut, LutBuildConfig, LutEntry, LutProvenance};
use pigmix_core::spectrum::{PigmentId, PigmentRecord, Quantity, Spectrum};
use rayon::prelude::*;

use crate::error::{AppError, AppResult};
use crate::model_file::{sha256, Reader};

pub const LUT_MAGIC: &[u8; 8] = b"PGMXLUT\0";
pub const LUT_VERSION: u32 = 1;
pub const RECORD_BYTES: usize = 21;
const COUNT_OFFSET: u64 = 12;

pub fn encode_header(count: u64, provenance: &LutProvenance) -> Vec<u8> {
    let cfg = serde_json::to_vec(&provenance.config).expect("config serializes");
    let mut out = Vec::with_capacity(56 + cfg.len());
    out.extend_from_slice(LUT_MAGIC);
    out.extend_from_slice(&LUT_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&provenance.model_hash);
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out
}

pub fn encode_record(e: &LutEntry, out: &mut Vec<u8>) {
    out.push(e.pigment_a.index());
    out.push(e.pigment_b.index());
    out.extend_from_slice(&(e.q_a.microliters() as u16).to_le_bytes());
    out.extend_from_slice(&(e.q_b.microliters() as u16).to_le_bytes());
    for v in e.lab {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&e.rgb.to_array());
}

fn decode_record(b: &[u8], path: &Path, i: usize) -> AppResult<LutEntry> {
    let bad = |m: String| AppError::format(path, format!("record {i}: {m}"));
    let pid = |v: u8| PigmentId::new(v).map_err(|e| bad(e.to_string()));
    let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]) as u32;
    let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let e = LutEntry {
        pigment_a: pid(b[0])?,
        pigment_b: pid(b[1])?,
        q_a: Quantity::from_microliters(u16_at(2)),
        q_b: Quantity::from_microliters(u16_at(4)),
        lab: [f32_at(6), f32_at(10), f32_at(14)],
        rgb: Srgb8::new(b[18], b[19], b[20]),
    };
    e.validate().map_err(|err| bad(err.to_string()))?;
    Ok(e)
}

struct Header {
    count: u64,
    provenance: LutProvenance,
    len: usize,
}

fn decode_header(bytes: &[u8], path: &Path) -> AppResult<Header> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != LUT_MAGIC {
        return Err(AppError::format(path, "not a LUT file (bad magic)"));
    }
    let version = r.u32()?;
    if version != LUT_VERSION {
        return Err(AppError::format(path, format!("unsupported LUT version {version}")));
    }
    let count = r.u64()?;
    let model_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let clen = r.u32()? as usize;
    let config: LutBuildConfig = serde_json::from_slice(r.take(clen)?)
        .map_err(|e| AppError::format(path, format!("bad build config JSON: {e}")))?;
    config.validate().map_err(|e| AppError::format(path, e.to_string()))?;
    Ok(Header {
        count,
        provenance: LutProvenance { model_hash, config },
        len: r.pos,
    })
}

/// Parse a complete table and build its index.
pub fn decode_lut(bytes: &[u8], path: &Path) -> AppResult<Lut> {
    let h = decode_header(bytes, path)?;
    let body = &bytes[h.len..];
    let expected = h.provenance.config.entry_count() as u64;
    if h.count != expected {
        return Err(AppError::format(
            path,
            format!(
                "incomplete table: {} of {expected} records (resume with build-lut)",
                h.count
            ),
        ));
    }
    if body.len() as u64 != h.count * RECORD_BYTES as u64 {
        return Err(AppError::format(
            path,
            format!("{} record bytes for {} records", body.len(), h.count),
        ));
    }
    let entries = body
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, b)| decode_record(b, path, i))
        .collect::<AppResult<Vec<_>>>()?;
    Ok(Lut::new(entries, h.provenance)?)
}

/// A table and the SHA-256 of its file.
#[derive(Clone, Debug)]
pub struct LoadedLut {
    pub lut: Lut,
    pub hash: [u8; 32],
}

pub fn load_lut(path: &Path) -> AppResult<LoadedLut> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(LoadedLut {
        lut: decode_lut(&bytes, path)?,
        hash: sha256(&bytes),
    })
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Entries predicted per write; the file's count advances in these steps.
    pub group: usize,
    /// Stop once this many records are on disk (for interruption tests).
    pub stop_after: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            group: 64 * pigmix_core::palette::BUILD_CHUNK,
            stop_after: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOutcome {
    pub resumed_from: usize,
    pub written: usize,
    pub total: usize,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> AppError + '_ {
    move |e| AppError::io(path, e)
}

/// Existing record count if `path` holds a partial build of the same table.
fn resumable(path: &Path, provenance: &LutProvenance) -> AppResult<Option<(u64, usize)>> {
    let mut f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(AppError::io(path, e)),
    };
    let mut head = vec![0u8; 56 + 4096];
    let mut n = 0;
    loop {
        let k = f.read(&mut head[n..]).map_err(io_err(path))?;
        if k == 0 || n + k == head.len() {
            n += k;
            break;
        }
        n += k;
    }
    head.truncate(n);
    let Ok(h) = decode_header(&head, path) else {
        tracing::warn!(path = %path.display(), "existing file is not a LUT; rebuilding");
        return Ok(None);
    };
    if h.provenance != *provenance {
        tracing::warn!(path = %path.display(), "existing LUT is from another model or config; rebuilding");
        return Ok(None);
    }
    let on_disk = (f.metadata().map_err(io_err(path))?.len() as usize).saturating_sub(h.len) / RECORD_BYTES;
    Ok(Some((h.count.min(on_disk as u64), h.len)))
}

/// Build (or resume) the table at `path`. Prediction runs on the current
/// rayon pool; records are written in index order, so the finished file does
/// not depend on thread count or interruptions.
pub fn build_lut_file(
    path: &Path,
    w: &ModelWeights,
    records: &[PigmentRecord],
    substrate: &Spectrum,
    provenance: &LutProvenance,
    opts: &BuildOptions,
    mut progress: impl FnMut(usize, usize),
) -> AppResult<BuildOutcome> {
    let primaries = lut_primaries(records, &provenance.config)?;
    let total = primaries.len() * primaries.len();
    let colorimeter = Colorimeter::standard();

    let (mut file, mut done) = match resumable(path, provenance)? {
        Some((count, header_len)) => {
            let f = OpenOptions::new()
                .read(true)
                .write(true)
                .open(path)
                .map_err(io_err(path))?;
            f.set_len(header_len as u64 + count * RECORD_BYTES as u64)
                .map_err(io_err(path))?;
            (f, count as usize)
        }
        None => {
            let mut f = File::create(path).map_err(io_err(path))?;
            f.write_all(&encode_header(0, provenance)).map_err(io_err(path))?;
            (f, 0)
        }
    };
    let resumed_from = done;
    file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
    let limit = opts.stop_after.map_or(total, |s| s.min(total));
    let chunk = pigmix_core::palette::BUILD_CHUNK;
    let group = opts.group.max(chunk);
    let mut buf = Vec::with_capacity(group * RECORD_BYTES);
    while done < limit {
        let end = (done + group).min(limit);
        let starts: Vec<usize> = (done..end).step_by(chunk).collect();
        let parts = starts
            .par_iter()
            .map(|&s| predict_entries(w, &primaries, substrate, &colorimeter, s..(s + chunk).min(end)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                tracing::error!(error = %e, "LUT prediction failed");
                AppError::Core(e)
            })?;
        buf.clear();
        for e in parts.iter().flatten() {
            encode_record(e, &mut buf);
        }
        file.write_all(&buf).map_err(io_err(path))?;
        done = end;
        file.seek(SeekFrom::Start(COUNT_OFFSET)).map_err(io_err(path))?;
        file.write_all(&(done as u64).to_le_bytes()).map_err(io_err(path))?;
        file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        file.flush().map_err(io_err(path))?;
        progress(done, total);
    }
    file.sync_all().map_err(io_err(path))?;
    Ok(BuildOutcome {
        resumed_from,
        written: done - resumed_from,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(i: u32) -> LutEntry {
        LutEntry {
            pigment_a: PigmentId::new(1 + (i % 13) as u8).unwrap(),
            pigment_b: PigmentId::new(13 - (i % 13) as u8).unwrap(),
            q_a: Quantity::from_microliters(10 + 2 * (i % 76)),
            q_b: Quantity::from_microliters(160 - 2 * (i % 76)),
            lab: [i as f32 * 0.37, -(i as f32) * 1.1e-3, 1e-7 * i as f32],
            rgb: Srgb8::new(i as u8, (i * 7) as u8, 255),
        }
    }

    #[test]
    fn record_layout() {
        let mut b = Vec::new();
        let e = entry(5);
        encode_record(&e, &mut b);
        assert_eq!(b.len(), RECORD_BYTES);
        assert_eq!((b[0], b[1]), (6, 8));
        assert_eq!(u16::from_le_bytes([b[2], b[3]]), 20);
        assert_eq!(f32::from_le_bytes(b[6..10].try_into().unwrap()), e.lab[0]);
        assert_eq!(&b[18..], &[5, 35, 255]);
        assert_eq!(decode_record(&b, Path::new("x"), 0).unwrap(), e);
    }

    #[test]
    fn serialization_round_trip_bit_exact() {
        let cfg = LutBuildConfig {
            pigments: vec![PigmentId::new(2).unwrap(), PigmentId::new(9).unwrap()],
            quantities_ul: vec![10, 12, 14, 16, 18],
        };
        let prov = LutProvenance {
            model_hash: [7; 32],
            config: cfg,
        };
        let entries: Vec<LutEntry> = (0..100).map(entry).collect();
        let mut bytes = encode_header(100, &prov);
        for e in &entries {
            encode_record(e, &mut bytes);
        }
        let lut = decode_lut(&bytes, Path::new("x")).unwrap();
        assert_eq!(lut.entries(), &entries[..]);
        for (a, b) in lut.entries().iter().zip(&entries) {
            assert_eq!(a.lab.map(f32::to_bits), b.lab.map(f32::to_bits));
        }
        assert_eq!(lut.provenance(), &prov);
        let mut partial = encode_header(99, &prov);
        partial.extend_from_slice(&bytes[bytes.len() - 99 * RECORD_BYTES..]);
        assert!(decode_lut(&partial, Path::new("x")).is_err());
    }
}
