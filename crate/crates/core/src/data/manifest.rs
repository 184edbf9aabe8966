use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::image::{resize_bilinear, to_grayscale, ImageTensor};
use super::ppm::{decode_ppm, read_ppm_dims};
use crate::error::{Error, IoContext, Result};
use crate::hash::hash_bytes;
use crate::rng::SeededRng;

/// Network input side length after preprocessing.
pub const INPUT_SIZE: usize = 64;

/// Fewest records a class may have and still be split.
pub const MIN_PER_CLASS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: String,
    pub class_id: usize,
    /// `None` until [`split_dataset`] assigns one.
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub n_classes: usize,
    /// Class directory names, indexed by class id.
    pub class_names: Vec<String>,
    pub seed: u64,
}

/// Split percentages; the test share is whatever remains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitRatios {
    pub train_pct: usize,
    pub val_pct: usize,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train_pct: 80,
            val_pct: 10,
        }
    }
}

impl DatasetManifest {
    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == Some(split))
    }

    /// Record counts per class, indexed `[class][train, val, test, unassigned]`.
    pub fn class_counts(&self) -> Vec<[usize; 4]> {
        let mut counts = vec![[0usize; 4]; self.n_classes];
        for r in &self.records {
            let slot = match r.split {
                Some(Split::Train) => 0,
                Some(Split::Val) => 1,
                Some(Split::Test) => 2,
                None => 3,
            };
            counts[r.class_id][slot] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() != self.n_classes {
            return Err(Error::Validation(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.n_classes
            )));
        }
        if let Some(r) = self.records.iter().find(|r| r.class_id >= self.n_classes) {
            return Err(Error::Validation(format!(
                "{}: class id {} >= {}",
                r.path, r.class_id, self.n_classes
            )));
        }
        Ok(())
    }

    /// CSV text: one comment line with seed and classes, then
    /// `path,class_id,split` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# seed={} n_classes={} classes={}\n",
            self.seed,
            self.n_classes,
            self.class_names.join(";")
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "class_id", "split"])?;
        for r in &self.records {
            let class = r.class_id.to_string();
            w.write_record([r.path.as_str(), class.as_str(), r.split.map_or("", Split::as_str)])?;
        }
        let body = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv of utf-8 fields"));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            kind: "manifest",
            reason,
        };
        let first = text.lines().next().unwrap_or_default();
        let meta = first
            .strip_prefix('#')
            .ok_or_else(|| bad("missing header comment line".into()))?;
        let (mut seed, mut n_classes, mut class_names) = (None, None, None);
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("seed", v)) => seed = v.parse().ok(),
                Some(("n_classes", v)) => n_classes = v.parse().ok(),
                Some(("classes", v)) => {
                    class_names = Some(if v.is_empty() {
                        vec![]
                    } else {
                        v.split(';').map(str::to_owned).collect()
                    })
                }
                _ => {}
            }
        }
        let seed = seed.ok_or_else(|| bad("header lacks seed".into()))?;
        let n_classes = n_classes.ok_or_else(|| bad("header lacks n_classes".into()))?;
        let class_names = class_names.unwrap_or_else(|| (0..n_classes).map(|c| c.to_string()).collect());
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(bad(format!("row has {} fields, expected 3", row.len())));
            }
            let class_id = row[1]
                .parse()
                .map_err(|_| bad(format!("bad class id {:?}", &row[1])))?;
            let split = match &row[2] {
                "" => None,
                s => Some(s.parse()?),
            };
            records.push(ManifestRecord {
                path: row[0].to_owned(),
                class_id,
                split,
            });
        }
        let m = DatasetManifest {
            records,
            n_classes,
            class_names,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path).at(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).at(path)
    }

    /// Hash of the serialized manifest.
    pub fn content_hash(&self) -> Result<u64> {
        Ok(hash_bytes(self.to_csv()?))
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .at(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .at(dir)?;
    entries.sort();
    Ok(entries)
}

fn is_ppm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

/// One subdirectory per class under `root`; class ids follow lexicographic
/// directory order and files are listed lexicographically.
pub fn scan_dataset_dir(root: &Path) -> Result<DatasetManifest> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::Config(format!(
            "{} contains no class directories",
            root.display()
        )));
    }
    let mut records = Vec::new();
    let mut class_names = Vec::new();
    for (class_id, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && is_ppm(p))
            .collect();
        if files.is_empty() {
            return Err(Error::Config(format!(
                "class directory {} has no .ppm images",
                dir.display()
            )));
        }
        class_names.push(
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        records.extend(files.into_iter().map(|p| ManifestRecord {
            path: p.to_string_lossy().into_owned(),
            class_id,
            split: None,
        }));
    }
    Ok(DatasetManifest {
        records,
        n_classes: class_names.len(),
        class_names,
        seed: 0,
    })
}

/// Keep records whose native height and width are both strictly greater
/// than `min_size`.
pub fn filter_by_size<I>(records: I, min_size: usize) -> Vec<ManifestRecord>
where
    I: IntoIterator<Item = (ManifestRecord, (usize, usize))>,
{
    records
        .into_iter()
        .filter(|(_, (h, w))| *h > min_size && *w > min_size)
        .map(|(r, _)| r)
        .collect()
}

/// Native `(height, width)` of every record, read from the PPM headers.
pub fn native_dims(manifest: &DatasetManifest) -> Result<Vec<(ManifestRecord, (usize, usize))>> {
    manifest
        .records
        .iter()
        .map(|r| {
            let bytes = fs::read(&r.path).at(&r.path)?;
            let dims = read_ppm_dims(&bytes).map_err(|e| Error::Decode(format!("{}: {e}", r.path)))?;
            Ok((r.clone(), dims))
        })
        .collect()
}

/// Seeded stratified subsample down to at most `max_samples` records.
///
/// Class quotas are proportional (floor), leftover slots go to the classes
/// with the largest fractional remainder. Surviving records keep their
/// original order.
pub fn subsample_stratified(manifest: &DatasetManifest, max_samples: usize, seed: u64) -> DatasetManifest {
    let total = manifest.records.len();
    if total <= max_samples {
        return manifest.clone();
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        by_class.entry(r.class_id).or_default().push(i);
    }
    let mut quotas: Vec<(usize, usize, usize)> = by_class
        .iter()
        .map(|(&c, idx)| {
            let exact = idx.len() * max_samples;
            (c, exact / total, exact % total)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2).then(quotas[a].0.cmp(&quotas[b].0)));
    for &k in order.iter().take(max_samples - assigned) {
        quotas[k].1 += 1;
    }
    let mut rng = SeededRng::new(seed);
    let mut keep = vec![false; total];
    for (c, quota, _) in quotas {
        let mut idx = by_class[&c].clone();
        idx.shuffle(rng.inner());
        for &i in idx.iter().take(quota) {
            keep[i] = true;
        }
    }
    DatasetManifest {
        records: manifest
            .records
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(r, _)| r.clone())
            .collect(),
        ..manifest.clone()
    }
}

/// Per-class seeded shuffle, then `floor(train%·n)` train, `floor(val%·n)`
/// val and the remainder test. Record order is preserved.
pub fn split_dataset(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    if ratios.train_pct + ratios.val_pct > 100 {
        return Err(Error::Config(format!("split ratios {ratios:?} exceed 100%")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.n_classes];
    for (i, r) in manifest.records.iter().enumerate() {
        by_class
            .get_mut(r.class_id)
            .ok_or_else(|| Error::Validation(format!("class id {} out of range", r.class_id)))?
            .push(i);
    }
    let short: Vec<String> = by_class
        .iter()
        .enumerate()
        .filter(|(_, idx)| idx.len() < MIN_PER_CLASS)
        .map(|(c, idx)| {
            let name = manifest.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
            format!("{name} ({} records)", idx.len())
        })
        .collect();
    if !short.is_empty() {
        return Err(Error::Config(format!(
            "classes below {MIN_PER_CLASS} records: {}",
            short.join(", ")
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut out = manifest.clone();
    out.seed = seed;
    for idx in &mut by_class {
        idx.shuffle(rng.inner());
        let n = idx.len();
        let n_train = n * ratios.train_pct / 100;
        let n_val = n * ratios.val_pct / 100;
        for (k, &i) in idx.iter().enumerate() {
            out.records[i].split = Some(if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            });
        }
        if n_train == 0 {
            return Err(Error::Config("a class has no training records".into()));
        }
    }
    Ok(out)
}

/// Decode, convert to grayscale and resize to the network input size.
pub fn load_preprocessed(path: &Path) -> Result<ImageTensor> {
    let bytes = fs::read(path).at(path)?;
    let img = decode_ppm(&bytes).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    resize_bilinear(&to_grayscale(&img), INPUT_SIZE, INPUT_SIZE)
}
