//! Binary feature cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "QNVF"  u32 version=1  u64 content hash  u32 count
//! count × { u16 label  u16 H  u16 W  u16 C  H·W·C × f32 }
//! ```
//!
//! The header hash covers the filter spec and every input (path, label and
//! file bytes) of the split, so a matching header means the records are
//! current.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::filter::{build_filter_circuits, quanv_image_with, FeatureMap, QuanvFilterSpec};
use crate::config::KeyValues;
use crate::data::{load_preprocessed, DatasetManifest, ManifestRecord, Split};
use crate::error::{Error, IoContext, Result};
use crate::hash::{from_hex, hash_bytes, to_hex, ContentHasher};

pub const CACHE_MAGIC: &[u8; 4] = b"QNVF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub label: u16,
    pub map: FeatureMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCache {
    pub content_hash: u64,
    pub records: Vec<FeatureRecord>,
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        kind: "QNVF cache",
        reason: reason.into(),
    }
}

fn dim_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| format_err(format!("{what} {v} exceeds u16")))
}

fn write_records<W: Write>(mut w: W, content_hash: u64, records: &[FeatureRecord]) -> std::io::Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&content_hash.to_le_bytes())?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for r in records {
        for v in [r.label, r.map.height as u16, r.map.width as u16, r.map.channels as u16] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &r.map.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Write a cache file. Data goes to `<path>.partial` first and is renamed on
/// success; a leftover `.partial` marks an interrupted write.
pub fn write_cache(path: &Path, content_hash: u64, records: &[FeatureRecord]) -> Result<()> {
    for r in records {
        dim_u16(r.map.height, "height")?;
        dim_u16(r.map.width, "width")?;
        dim_u16(r.map.channels, "channels")?;
    }
    let partial = partial_path(path);
    let file = File::create(&partial).at(&partial)?;
    write_records(BufWriter::new(file), content_hash, records).at(&partial)?;
    fs::rename(&partial, path).at(path)
}

pub(crate) fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_header(r: &mut impl Read) -> Result<(u64, u32)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| format_err("truncated header"))?;
    if &magic != CACHE_MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r).map_err(|_| format_err("truncated header"))?;
    if version != CACHE_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let mut h = [0u8; 8];
    r.read_exact(&mut h).map_err(|_| format_err("truncated header"))?;
    let count = read_u32(r).map_err(|_| format_err("truncated header"))?;
    Ok((u64::from_le_bytes(h), count))
}

pub fn read_cache(path: &Path) -> Result<FeatureCache> {
    let file = File::open(path).at(path)?;
    let mut r = BufReader::new(file);
    let (content_hash, count) = read_header(&mut r)?;
    let mut records = Vec::with_capacity((count as usize).min(1 << 16));
    for i in 0..count {
        let trunc = |_| format_err(format!("record {i} truncated"));
        let label = read_u16(&mut r).map_err(trunc)?;
        let h = read_u16(&mut r).map_err(trunc)? as usize;
        let w = read_u16(&mut r).map_err(trunc)? as usize;
        let c = read_u16(&mut r).map_err(trunc)? as usize;
        let mut raw = vec![0u8; h * w * c * 4];
        r.read_exact(&mut raw).map_err(trunc)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        records.push(FeatureRecord {
            label,
            map: FeatureMap {
                height: h,
                width: w,
                channels: c,
                values,
            },
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).at(path)? != 0 {
        return Err(format_err("trailing bytes after last record"));
    }
    Ok(FeatureCache {
        content_hash,
        records,
    })
}

/// Header hash and record count if the file exists and is structurally
/// complete.
fn existing_header(path: &Path) -> Option<(u64, u32)> {
    let cache = read_cache(path).ok()?;
    Some((cache.content_hash, cache.records.len() as u32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitCache {
    pub split: Split,
    pub path: PathBuf,
    pub records: usize,
    pub content_hash: u64,
    /// `false` when the existing file was already current.
    pub rewritten: bool,
}

/// Summary of a cache directory, also persisted as `index.cfg`.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheIndex {
    pub manifest_hash: u64,
    pub spec: QuanvFilterSpec,
    pub n_classes: usize,
    pub splits: Vec<SplitCache>,
    /// `(path, reason)` for inputs that could not be processed.
    pub skipped: Vec<(String, String)>,
}

impl CacheIndex {
    pub const FILE_NAME: &'static str = "index.cfg";

    pub fn split(&self, split: Split) -> Option<&SplitCache> {
        self.splits.iter().find(|s| s.split == split)
    }

    pub fn up_to_date(&self) -> bool {
        self.splits.iter().all(|s| !s.rewritten)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("manifest_hash", to_hex(self.manifest_hash))
            .set("spec_hash", to_hex(self.spec.hash()))
            .set("n_classes", self.n_classes)
            .set("channels", self.spec.channels())
            .set("seed", self.spec.seed)
            .set("layers", self.spec.n_random_layers)
            .set("n_filters", self.spec.n_filters)
            .set("embed_scale", self.spec.embed_scale)
            .set("patch_size", self.spec.patch_size)
            .set("stride", self.spec.stride);
        for s in &self.splits {
            kv.set(&format!("{}_records", s.split), s.records)
                .set(&format!("{}_hash", s.split), to_hex(s.content_hash));
        }
        kv.set("skipped", self.skipped.len());
        kv
    }

    pub fn load(cache_dir: &Path) -> Result<Self> {
        let kv = KeyValues::load(&cache_dir.join(Self::FILE_NAME))?;
        let hex = |key: &str| -> Result<u64> {
            kv.get(key)
                .and_then(from_hex)
                .ok_or_else(|| Error::Config(format!("cache index lacks a valid {key}")))
        };
        let spec = QuanvFilterSpec {
            patch_size: kv.require("patch_size")?,
            stride: kv.require("stride")?,
            n_qubits: kv.require::<usize>("patch_size")?.pow(2),
            n_random_layers: kv.require("layers")?,
            seed: kv.require("seed")?,
            embed_scale: kv.require("embed_scale")?,
            n_filters: kv.require("n_filters")?,
        };
        let splits = Split::ALL
            .iter()
            .map(|&split| {
                Ok(SplitCache {
                    split,
                    path: cache_dir.join(format!("{split}.qnvf")),
                    records: kv.require(&format!("{split}_records"))?,
                    content_hash: hex(&format!("{split}_hash"))?,
                    rewritten: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CacheIndex {
            manifest_hash: hex("manifest_hash")?,
            spec,
            n_classes: kv.require("n_classes")?,
            splits,
            skipped: Vec::new(),
        })
    }
}

fn split_content_hash(spec: &QuanvFilterSpec, records: &[&ManifestRecord]) -> u64 {
    let mut h = ContentHasher::new();
    h.field(spec.hash().to_le_bytes());
    for r in records {
        let digest = fs::read(&r.path).map(hash_bytes).unwrap_or(0);
        h.field(&r.path)
            .field((r.class_id as u64).to_le_bytes())
            .field(digest.to_le_bytes());
    }
    h.finish()
}

/// Quanvolve every record of `manifest` into `<cache_dir>/<split>.qnvf`,
/// preserving manifest order and labels, and write `index.cfg`.
///
/// Splits whose existing file already carries the matching content hash are
/// left untouched. Unreadable images are skipped and reported.
pub fn quanv_dataset(manifest: &DatasetManifest, spec: &QuanvFilterSpec, cache_dir: &Path) -> Result<CacheIndex> {
    spec.validate()?;
    manifest.validate()?;
    if manifest.n_classes > u16::MAX as usize + 1 {
        return Err(Error::Config(format!("{} classes exceed u16 labels", manifest.n_classes)));
    }
    fs::create_dir_all(cache_dir).at(cache_dir)?;
    let circuits = build_filter_circuits(spec);
    let mut splits = Vec::new();
    let mut skipped = Vec::new();
    for split in Split::ALL {
        let records: Vec<&ManifestRecord> = manifest.split_records(split).collect();
        let path = cache_dir.join(format!("{split}.qnvf"));
        let content_hash = split_content_hash(spec, &records);
        if let Some((h, count)) = existing_header(&path) {
            if h == content_hash {
                splits.push(SplitCache {
                    split,
                    path,
                    records: count as usize,
                    content_hash,
                    rewritten: false,
                });
                continue;
            }
        }
        let results: Vec<Result<FeatureMap>> = records
            .par_iter()
            .map(|r| {
                let img = load_preprocessed(Path::new(&r.path))?;
                quanv_image_with(&img, spec, &circuits)
            })
            .collect();
        let mut features = Vec::with_capacity(records.len());
        for (r, res) in records.iter().zip(results) {
            match res {
                Ok(map) => features.push(FeatureRecord {
                    label: r.class_id as u16,
                    map,
                }),
                Err(e) => skipped.push((r.path.clone(), e.to_string())),
            }
        }
        write_cache(&path, content_hash, &features)?;
        splits.push(SplitCache {
            split,
            path,
            records: features.len(),
            content_hash,
            rewritten: true,
        });
    }
    let index = CacheIndex {
        manifest_hash: manifest.content_hash()?,
        spec: spec.clone(),
        n_classes: manifest.n_classes,
        splits,
        skipped,
    };
    let index_path = cache_dir.join(CacheIndex::FILE_NAME);
    let text = index.to_kv().to_text();
    if fs::read_to_string(&index_path).ok().as_deref() != Some(text.as_str()) {
        fs::write(&index_path, text).at(&index_path)?;
    }
    Ok(index)
}
