//! Dataset ingestion, normalization, subsampling and synthetic tasks.
//!
//! Two on-disk formats are supported:
//!
//! * `qimg` binary: little-endian magic `QIMG`, `u32` count, `u32` H,
//!   `u32` W, `f32` declared range min and max, then per image `H*W` `f32`
//!   pixels, a `u8` label and a `u8` split tag (0 train, 1 val, 2 test).
//! * CSV with header `pixel_0,...,pixel_{HW-1},label,split` plus a sidecar
//!   `<stem>.meta.json` holding `{height, width, range_min, range_max}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Split::Train),
            1 => Ok(Split::Val),
            2 => Ok(Split::Test),
            t => Err(Error::Data(format!("split tag {t} outside {{0,1,2}}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" | "0" => Ok(Split::Train),
            "val" | "1" => Ok(Split::Val),
            "test" | "2" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub splits: Vec<Split>,
    /// Range the pixel values currently live in.
    pub range: (f64, f64),
}

impl Dataset {
    pub fn new(
        height: usize,
        width: usize,
        images: Vec<Image>,
        labels: Vec<u8>,
        splits: Vec<Split>,
        range: (f64, f64),
    ) -> Result<Self> {
        if images.len() != labels.len() || images.len() != splits.len() {
            return Err(Error::Data(format!(
                "length mismatch: {} images, {} labels, {} split tags",
                images.len(),
                labels.len(),
                splits.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {l} outside {{0,1}}")));
        }
        if range.1 <= range.0 {
            return Err(Error::Data("declared pixel range is empty".into()));
        }
        for (i, img) in images.iter().enumerate() {
            if (img.height, img.width) != (height, width) {
                return Err(Error::Data(format!("image {i} has mismatched dimensions")));
            }
            if let Some(p) = img.pixels.iter().find(|p| **p < range.0 || **p > range.1) {
                return Err(Error::Data(format!(
                    "image {i}: pixel value {p} outside declared range [{}, {}]",
                    range.0, range.1
                )));
            }
        }
        Ok(Dataset {
            height,
            width,
            images,
            labels,
            splits,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            height: self.height,
            width: self.width,
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            splits: idx.iter().map(|&i| self.splits[i]).collect(),
            range: self.range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    QimgBinary,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            _ => Format::QimgBinary,
        }
    }
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvMeta {
    pub height: usize,
    pub width: usize,
    pub range_min: f64,
    pub range_max: f64,
}

pub fn load(path: &Path, format: Format) -> Result<Dataset> {
    match format {
        Format::QimgBinary => {
            let f = File::open(path)
                .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
            read_qimg(BufReader::new(f))
        }
        Format::Csv => {
            let meta_file = meta_path(path);
            let meta: CsvMeta = serde_json::from_reader(BufReader::new(
                File::open(&meta_file).map_err(|e| {
                    Error::Data(format!("cannot open {}: {e}", meta_file.display()))
                })?,
            ))
            .map_err(|e| Error::Data(format!("malformed meta {}: {e}", meta_file.display())))?;
            let f = File::open(path)
                .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
            read_csv(BufReader::new(f), &meta)
        }
    }
}

const QIMG_MAGIC: &[u8; 4] = b"QIMG";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Data("truncated qimg header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    Ok(f32::from_bits(read_u32(r)?))
}

pub fn read_qimg<R: Read>(mut r: R) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Data("truncated qimg header".into()))?;
    if &magic != QIMG_MAGIC {
        return Err(Error::Data("malformed header: bad magic".into()));
    }
    let count = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    let range = (read_f32(&mut r)? as f64, read_f32(&mut r)? as f64);
    if count == 0 {
        return Err(Error::Data("dataset is empty".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::Data("malformed header: zero image dimension".into()));
    }
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut splits = Vec::with_capacity(count);
    let mut buf = vec![0u8; height * width * 4 + 2];
    for i in 0..count {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Data(format!("length mismatch: record {i} truncated")))?;
        let pixels = buf[..height * width * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        images.push(Image::new(height, width, pixels)?);
        labels.push(buf[height * width * 4]);
        splits.push(Split::from_tag(buf[height * width * 4 + 1])?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Data("length mismatch: trailing bytes".into()));
    }
    Dataset::new(height, width, images, labels, splits, range)
}

pub fn write_qimg<W: Write>(mut w: W, ds: &Dataset) -> Result<()> {
    w.write_all(QIMG_MAGIC)?;
    for v in [ds.len(), ds.height, ds.width] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(ds.range.0 as f32).to_le_bytes())?;
    w.write_all(&(ds.range.1 as f32).to_le_bytes())?;
    for i in 0..ds.len() {
        for p in &ds.images[i].pixels {
            w.write_all(&(*p as f32).to_le_bytes())?;
        }
        w.write_all(&[ds.labels[i], ds.splits[i].tag()])?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R, meta: &CsvMeta) -> Result<Dataset> {
    let hw = meta.height * meta.width;
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let expected: Vec<String> = (0..hw)
        .map(|i| format!("pixel_{i}"))
        .chain(["label".to_string(), "split".to_string()])
        .collect();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::Data(format!(
            "malformed header: expected {} columns pixel_0..pixel_{},label,split",
            hw + 2,
            hw - 1
        )));
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != hw + 2 {
            return Err(Error::Data(format!("length mismatch on data row {}", row + 1)));
        }
        let pixels = rec
            .iter()
            .take(hw)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad pixel `{s}` on data row {}", row + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let label: u8 = rec[hw]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad label `{}` on data row {}", &rec[hw], row + 1)))?;
        images.push(Image::new(meta.height, meta.width, pixels)?);
        labels.push(label);
        splits.push(rec[hw + 1].parse()?);
    }
    if images.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    Dataset::new(
        meta.height,
        meta.width,
        images,
        labels,
        splits,
        (meta.range_min, meta.range_max),
    )
}

/// Writes `path` and its sidecar meta file.
pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let meta = CsvMeta {
        height: ds.height,
        width: ds.width,
        range_min: ds.range.0,
        range_max: ds.range.1,
    };
    serde_json::to_writer_pretty(File::create(meta_path(path))?, &meta)?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let hw = ds.height * ds.width;
    wtr.write_record(
        (0..hw)
            .map(|i| format!("pixel_{i}"))
            .chain(["label".to_string(), "split".to_string()]),
    )?;
    for i in 0..ds.len() {
        wtr.write_record(
            ds.images[i]
                .pixels
                .iter()
                .map(|p| p.to_string())
                .chain([ds.labels[i].to_string(), ds.splits[i].name().to_string()]),
        )?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save(path: &Path, ds: &Dataset) -> Result<()> {
    match Format::from_path(path) {
        Format::Csv => write_csv(path, ds),
        Format::QimgBinary => write_qimg(BufWriter::new(File::create(path)?), ds),
    }
}

/// Affine map of `source` onto `[-1, 1]`.
pub fn normalize(ds: &Dataset, source: (f64, f64)) -> Result<Dataset> {
    let (lo, hi) = source;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Data(format!("degenerate source range [{lo}, {hi}]")));
    }
    let mut out = ds.clone();
    out.range = (-1.0, 1.0);
    if source == (-1.0, 1.0) {
        return Ok(out);
    }
    let span = hi - lo;
    for img in out.images.iter_mut() {
        for p in img.pixels.iter_mut() {
            *p = (2.0 * (*p - lo) / span - 1.0).clamp(-1.0, 1.0);
        }
    }
    Ok(out)
}

/// Draws `target` images keeping the class ratio (largest-remainder quotas).
pub fn stratified_subsample(ds: &Dataset, target: usize, seed: u64) -> Result<Dataset> {
    if target > ds.len() {
        return Err(Error::Data(format!(
            "cannot draw {target} images from a dataset of {}",
            ds.len()
        )));
    }
    let counts = ds.class_counts();
    let quotas = largest_remainder(&counts, target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(target);
    for (class, &quota) in quotas.iter().enumerate() {
        let mut idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.labels[i] as usize == class)
            .collect();
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..quota]);
    }
    chosen.sort_unstable();
    Ok(ds.select(&chosen))
}

/// Splits `total` proportionally to `counts`; leftovers go to the largest
/// remainders, then to the larger class, then to the lower label.
pub fn largest_remainder(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    // remainder numerators, compared exactly as integers
    let rems: Vec<usize> = counts.iter().map(|&c| (c * total) % n).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        rems[b]
            .cmp(&rems[a])
            .then(counts[b].cmp(&counts[a]))
            .then(a.cmp(&b))
    });
    let leftover = total - quotas.iter().sum::<usize>();
    for &c in order.iter().take(leftover) {
        quotas[c] += 1;
    }
    quotas
}

/// Picks `per_class` training images per class at evenly spaced brightness
/// quantiles: 1-based rank `ceil((i + 0.5) M / count)` for `i = 0..count`.
///
/// Returns dataset indices, class 0 first, each class in brightness order.
/// Equal brightness values are ordered by a seeded shuffle.
pub fn balanced_sample(ds: &Dataset, per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let pool: Vec<usize> = {
        let train = ds.indices(Split::Train);
        if train.is_empty() {
            (0..ds.len()).collect()
        } else {
            train
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for class in 0..2u8 {
        let mut members: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| ds.labels[i] == class)
            .collect();
        if members.len() < per_class || members.is_empty() {
            return Err(Error::Data(format!(
                "class {class} has {} images, {per_class} requested",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        members.sort_by(|&a, &b| {
            ds.images[a]
                .brightness()
                .total_cmp(&ds.images[b].brightness())
        });
        for rank in quantile_ranks(members.len(), per_class) {
            out.push(members[rank - 1]);
        }
    }
    Ok(out)
}

/// 1-based ranks `ceil((i + 0.5) m / count)`.
pub fn quantile_ranks(m: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|i| {
            // (2i + 1) m / (2 count), rounded up, in integers
            let num = (2 * i + 1) * m;
            let den = 2 * count;
            num.div_ceil(den).max(1)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTask {
    Blobs,
    XorPixels,
    Stripes,
}

impl FromStr for SynthTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SynthTask::Blobs),
            "xor_pixels" => Ok(SynthTask::XorPixels),
            "stripes" => Ok(SynthTask::Stripes),
            other => Err(Error::Config(format!("unknown synthetic task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthConfig {
    pub task: SynthTask,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(task: SynthTask, count: usize, seed: u64) -> Self {
        SynthConfig {
            task,
            count,
            height: 8,
            width: 8,
            seed,
        }
    }

    pub fn with_size(mut self, height: usize, width: usize) -> Self {
        self.height = height;
        self.width = width;
        self
    }
}

/// Fraction of 2x2 blocks in `xor_pixels` whose sign pattern follows the label.
const XOR_AGREEMENT: f64 = 0.75;

/// Generates a synthetic binary task with pixels in `[-1, 1]`.
///
/// Labels alternate `0, 1, 0, 1, ...`; within each class the split pattern
/// repeats train, train, train, val, test.
///
/// * `blobs`: per-pixel mean `+-0.25` by class plus Gaussian noise.
/// * `xor_pixels`: each 2x2 block gets a random sign `s` and random
///   magnitudes. Class 1 uses sign `s` on all four pixels; class 0 uses a
///   checkerboard of `s` and `-s`. Every pixel has zero class-conditional
///   mean; the class only shows in the signs of neighbour products.
/// * `stripes`: horizontal sinusoid with 1 (class 0) or 2 (class 1) periods
///   over the image height, random phase, plus noise.
pub fn synth(cfg: &SynthConfig) -> Result<Dataset> {
    let (h, w) = (cfg.height, cfg.width);
    if h == 0 || w == 0 {
        return Err(Error::Config("synthetic images need positive size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut images = Vec::with_capacity(cfg.count);
    let mut labels = Vec::with_capacity(cfg.count);
    let mut splits = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let label = (i % 2) as u8;
        let split = match (i / 2) % 5 {
            0..=2 => Split::Train,
            3 => Split::Val,
            _ => Split::Test,
        };
        let mut px = vec![0.0; h * w];
        match cfg.task {
            SynthTask::Blobs => {
                let mean = if label == 1 { 0.25 } else { -0.25 };
                for p in px.iter_mut() {
                    *p = mean + 0.35 * noise.sample(&mut rng);
                }
            }
            SynthTask::XorPixels => {
                for p in px.iter_mut() {
                    *p = rng.random_range(-1.0..=1.0);
                }
                for br in 0..h / 2 {
                    for bc in 0..w / 2 {
                        let s: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        let follows = rng.random_bool(XOR_AGREEMENT);
                        let uniform = (label == 1) == follows;
                        for dr in 0..2 {
                            for dc in 0..2 {
                                let sign = if uniform || dr == dc { s } else { -s };
                                let mag: f64 = rng.random_range(0.2..=1.0);
                                px[(2 * br + dr) * w + 2 * bc + dc] = sign * mag;
                            }
                        }
                    }
                }
            }
            SynthTask::Stripes => {
                let periods = if label == 1 { 2.0 } else { 1.0 };
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                for r in 0..h {
                    let base = 0.7
                        * (std::f64::consts::TAU * periods * r as f64 / h as f64 + phase).sin();
                    for c in 0..w {
                        px[r * w + c] = base + 0.15 * noise.sample(&mut rng);
                    }
                }
            }
        }
        for p in px.iter_mut() {
            *p = p.clamp(-1.0, 1.0);
        }
        images.push(Image::new(h, w, px)?);
        labels.push(label);
        splits.push(split);
    }
    Dataset::new(h, w, images, labels, splits, (-1.0, 1.0))
}
