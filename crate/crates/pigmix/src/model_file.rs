//! Binary model container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       8         magic "PGMXMODL"
//! 8       4         u32 format version (1)
//! 12      4         u32 length C of the config JSON
//! 16      C         NetworkConfig as UTF-8 JSON
//! ..      4         u32 number of weight layers L
//! ..      8·L       per layer: u32 fan_in, u32 fan_out
//! ..      8         u64 Adam step counter
//! ..      8         u64 parameter count N
//! ..      8·N       f64 parameters
//! ..      8·N       f64 Adam first moments
//! ..      8·N       f64 Adam second moments
//! ```
//!
//! Parameters are stored layer by layer: the `fan_out × fan_in` weight
//! matrix in row-major order, then `fan_out` biases. The file hash used for
//! provenance is SHA-256 over the whole file.

use std::path::Path;

use pigmix_core::mixnet::{ModelWeights, NetworkConfig};
use sha2::{Digest, Sha256};

use crate::error::{read_bytes, write_atomic, AppError, AppResult};

pub const MODEL_MAGIC: &[u8; 8] = b"PGMXMODL";
pub const MODEL_VERSION: u32 = 1;

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn encode_model(w: &ModelWeights) -> Vec<u8> {
    let cfg = serde_json::to_vec(&w.config).expect("config serializes");
    let layers = w.layers();
    let n = w.params.len();
    let mut out = Vec::with_capacity(48 + cfg.len() + 8 * layers.len() + 24 * n);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in &layers {
        out.extend_from_slice(&(l.fan_in as u32).to_le_bytes());
        out.extend_from_slice(&(l.fan_out as u32).to_le_bytes());
    }
    out.extend_from_slice(&w.step.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in w.params.iter().chain(&w.adam_m).chain(&w.adam_v) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
    pub(crate) path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> AppResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AppError::format(self.path, format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    pub(crate) fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub(crate) fn u64(&mut self) -> AppResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> AppResult<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| AppError::format(self.path, "size overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8], path: &Path) -> AppResult<ModelWeights> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MODEL_MAGIC {
        return Err(AppError::format(path, "not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(AppError::format(path, format!("unsupported model version {version}")));
    }
    let clen = r.u32()? as usize;
    let config: NetworkConfig =
        serde_json::from_slice(r.take(clen)?).map_err(|e| AppError::format(path, format!("bad config JSON: {e}")))?;
    let nl = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(nl.min(1024));
    for _ in 0..nl {
        shapes.push((r.u32()? as usize, r.u32()? as usize));
    }
    let expected: Vec<(usize, usize)> = config.layer_sizes.windows(2).map(|w| (w[0], w[1])).collect();
    if shapes != expected {
        return Err(AppError::format(path, "layer shapes disagree with the config"));
    }
    let step = r.u64()?;
    let n = r.u64()? as usize;
    if n != config.parameter_count() {
        return Err(AppError::format(
            path,
            format!("{n} parameters, config needs {}", config.parameter_count()),
        ));
    }
    let params = r.f64s(n)?;
    let adam_m = r.f64s(n)?;
    let adam_v = r.f64s(n)?;
    if r.pos != bytes.len() {
        return Err(AppError::format(path, "trailing bytes after model payload"));
    }
    let w = ModelWeights {
        config,
        params,
        adam_m,
        adam_v,
        step,
    };
    w.validate().map_err(|e| AppError::format(path, e.to_string()))?;
    Ok(w)
}

/// A model together with the hash of the file it came from.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub weights: ModelWeights,
    pub hash: [u8; 32],
}

impl LoadedModel {
    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash)
    }
}

pub fn save_model(path: &Path, w: &ModelWeights) -> AppResult<[u8; 32]> {
    let bytes = encode_model(w);
    write_atomic(path, &bytes)?;
    Ok(sha256(&bytes))
}

pub fn load_model(path: &Path) -> AppResult<LoadedModel> {
    let bytes = read_bytes(path)?;
    Ok(LoadedModel {
        weights: decode_model(&bytes, path)?,
        hash: sha256(&bytes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pigmix_core::dataset::FEATURE_COUNT;

    fn small() -> ModelWeights {
        let mut w = ModelWeights::init(NetworkConfig {
            layer_sizes: vec![207, 5, 41],
            ..NetworkConfig::default()
        })
        .unwrap();
        w.step = 17;
        w.adam_m[3] = -1.5e-300;
        w.adam_v[7] = 0.25;
        w
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = small();
        let bytes = encode_model(&w);
        let back = decode_model(&bytes, Path::new("m.bin")).unwrap();
        assert_eq!(back, w);
        assert_eq!(encode_model(&back), bytes);
        let x = vec![0.3; FEATURE_COUNT];
        assert_eq!(
            back.forward(&x).unwrap().values().map(f64::to_bits),
            w.forward(&x).unwrap().values().map(f64::to_bits)
        );
    }

    #[test]
    fn layout_offsets() {
        let w = small();
        let bytes = encode_model(&w);
        assert_eq!(&bytes[..8], b"PGMXMODL");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let clen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let n = w.params.len();
        assert_eq!(bytes.len(), 16 + clen + 4 + 2 * 8 + 8 + 8 + 24 * n);
        let p0 = 16 + clen + 4 + 16 + 16;
        assert_eq!(f64::from_le_bytes(bytes[p0..p0 + 8].try_into().unwrap()), w.params[0]);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode_model(&small());
        let p = Path::new("m.bin");
        assert!(decode_model(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_model(&bad, p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra, p).is_err());
        let mut nan = bytes;
        let last = nan.len() - 8;
        nan[last..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_model(&nan, p).is_err());
    }
}
