//! Flat binary container for named `f32` tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic "FRNWTS01"
//! offset 8   u64       header length H in bytes
//! offset 16  H bytes   UTF-8 JSON header
//!            ...       zero padding up to the next multiple of 64
//! data       ...       tensor payloads, each little-endian f32, each
//!                      starting at a multiple of 64 from the data start
//! ```
//!
//! The header is `{"format_version": 1, "metadata": {..}, "tensors": [..]}`
//! where each tensor record is `{"name", "shape", "offset", "len"}` with
//! `offset` in bytes from the start of the data section and `len` in
//! elements. Metadata must carry `schema_version` and `arch`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"FRNWTS01";
pub const FORMAT_VERSION: u32 = 1;
pub const SCHEMA_VERSION: &str = "1";
pub const ARCH: &str = "frn-v1";
const ALIGN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("bad magic: not a weight archive")]
    BadMagic,
    #[error("version mismatch: {0}")]
    VersionMismatch(String),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-finite weights in tensor {0}")]
    NonFinite(String),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("missing metadata key {0}")]
    MissingMetadata(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, ArchiveError>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightArchive {
    pub entries: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    metadata: BTreeMap<String, String>,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

fn align_up(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

impl WeightArchive {
    pub fn new() -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("schema_version".into(), SCHEMA_VERSION.into());
        metadata.insert("arch".into(), ARCH.into());
        Self {
            entries: BTreeMap::new(),
            metadata,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| ArchiveError::MissingTensor(name.to_string()))
    }

    /// Fetches a tensor and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape() != shape {
            return Err(ArchiveError::TensorShape {
                name: name.to_string(),
                found: t.shape().to_vec(),
                expected: shape.to_vec(),
            });
        }
        Ok(t)
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ArchiveError::MissingMetadata(key.to_string()))
    }

    pub fn param_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let tensors: Vec<TensorRecord> = self
            .entries
            .iter()
            .map(|(name, t)| {
                let rec = TensorRecord {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    offset,
                    len: t.len(),
                };
                offset = align_up(offset + t.len() * 4);
                rec
            })
            .collect();
        let header = Header {
            format_version: FORMAT_VERSION,
            metadata: self.metadata.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let data_start = align_up(16 + json.len());

        let mut out = Vec::with_capacity(data_start + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.resize(data_start, 0);
        for (rec, t) in header.tensors.iter().zip(self.entries.values()) {
            out.resize(data_start + rec.offset, 0);
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.resize(data_start + offset, 0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(ArchiveError::Truncated("shorter than the magic".into()));
        }
        if &bytes[..8] != MAGIC {
            if bytes[..6] == MAGIC[..6] {
                return Err(ArchiveError::VersionMismatch(format!(
                    "container {:?}, expected {:?}",
                    String::from_utf8_lossy(&bytes[..8]),
                    String::from_utf8_lossy(MAGIC)
                )));
            }
            return Err(ArchiveError::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(ArchiveError::Truncated("missing header length".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| ArchiveError::Truncated("header extends past end of file".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| ArchiveError::MalformedHeader(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(ArchiveError::VersionMismatch(format!(
                "format_version {}, expected {FORMAT_VERSION}",
                header.format_version
            )));
        }
        let schema = header
            .metadata
            .get("schema_version")
            .ok_or_else(|| ArchiveError::MissingMetadata("schema_version".into()))?;
        if schema != SCHEMA_VERSION {
            return Err(ArchiveError::VersionMismatch(format!(
                "schema_version {schema}, expected {SCHEMA_VERSION}"
            )));
        }
        if !header.metadata.contains_key("arch") {
            return Err(ArchiveError::MissingMetadata("arch".into()));
        }

        let data_start = align_up(header_end);
        let mut entries = BTreeMap::new();
        for rec in header.tensors {
            if rec.shape.iter().product::<usize>() != rec.len {
                return Err(ArchiveError::MalformedHeader(format!(
                    "tensor {} shape {:?} disagrees with len {}",
                    rec.name, rec.shape, rec.len
                )));
            }
            let start = data_start + rec.offset;
            let end = start + rec.len * 4;
            if end > bytes.len() {
                return Err(ArchiveError::Truncated(format!(
                    "payload of {} ends at byte {end}, file has {}",
                    rec.name,
                    bytes.len()
                )));
            }
            let data: Vec<f32> = bytes[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(ArchiveError::NonFinite(rec.name));
            }
            let tensor = Tensor::new(rec.shape, data)
                .map_err(|e| ArchiveError::MalformedHeader(e.to_string()))?;
            if entries.insert(rec.name.clone(), tensor).is_some() {
                return Err(ArchiveError::MalformedHeader(format!(
                    "duplicate tensor name {}",
                    rec.name
                )));
            }
        }
        Ok(Self {
            entries,
            metadata: header.metadata,
        })
    }
}

pub fn save_weights(archive: &WeightArchive, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, archive.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightArchive> {
    WeightArchive::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> WeightArchive {
        let mut a = WeightArchive::new();
        a.insert(
            "a.weight",
            Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-30, -0.0]).unwrap(),
        );
        a.insert("b", Tensor::from_vec(vec![7.0; 17]));
        a.metadata.insert("note".into(), "hello".into());
        a
    }

    #[test]
    fn payloads_are_aligned() {
        let bytes = sample().to_bytes();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(&bytes[16..16 + header_len]).unwrap();
        let data_start = align_up(16 + header_len);
        assert_eq!(data_start % 64, 0);
        for rec in header.tensors {
            assert_eq!(rec.offset % 64, 0);
        }
        assert_eq!(bytes.len() % 64, 0);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let a = sample();
        save_weights(&a, &path).unwrap();
        assert_eq!(load_weights(&path).unwrap(), a);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let mut bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            WeightArchive::from_bytes(&bad),
            Err(ArchiveError::BadMagic)
        ));

        let mut v2 = bytes.clone();
        v2[7] = b'2';
        assert!(matches!(
            WeightArchive::from_bytes(&v2),
            Err(ArchiveError::VersionMismatch(_))
        ));

        let mut a = sample();
        a.metadata.insert("schema_version".into(), "9".into());
        assert!(matches!(
            WeightArchive::from_bytes(&a.to_bytes()),
            Err(ArchiveError::VersionMismatch(_))
        ));

        bytes.truncate(bytes.len() - 64);
        assert!(matches!(
            WeightArchive::from_bytes(&bytes),
            Err(ArchiveError::Truncated(_))
        ));
        assert!(matches!(
            WeightArchive::from_bytes(&bytes[..12]),
            Err(ArchiveError::Truncated(_))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = sample();
        a.insert("nan", Tensor::from_vec(vec![0.0, f32::NAN]));
        let err = WeightArchive::from_bytes(&a.to_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-finite weights"), "{err}");
    }

    #[test]
    fn missing_tensor_is_named() {
        let err = sample().get("encoder.proj_in.weight").unwrap_err();
        assert_eq!(err.to_string(), "missing tensor encoder.proj_in.weight");
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            tensors in prop::collection::btree_map(
                "[a-z][a-z0-9_.]{0,12}",
                prop::collection::vec(-1e6f32..1e6, 0..40),
                0..6,
            )
        ) {
            let mut a = WeightArchive::new();
            for (name, data) in tensors {
                a.insert(name, Tensor::from_vec(data));
            }
            let back = WeightArchive::from_bytes(&a.to_bytes()).unwrap();
            prop_assert_eq!(back.metadata, a.metadata);
            for (name, t) in &a.entries {
                let b = &back.entries[name];
                prop_assert_eq!(b.shape(), t.shape());
                let bits_a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }
}
