//! Patch-wise quantum convolution.
//!
//! A `k x k` window slides over the image with stride `k`; each patch is
//! flattened row-major, encoded by the circuit, and the `k^2` Z-expectations
//! land in channels `0..k^2` at the patch's grid position. Trailing rows and
//! columns that do not fill a whole patch are dropped.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{EncodingCircuit, Gate};
use crate::error::{Error, Result};
use crate::simulator;

pub const SUPPORTED_PATCH_SIZES: [usize; 2] = [2, 3];

pub fn check_patch_size(k: usize) -> Result<()> {
    if SUPPORTED_PATCH_SIZES.contains(&k) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unsupported patch size {k} (expected 2 or 3)"
        )))
    }
}

/// Grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Data("image dimensions must be positive".into()));
        }
        if pixels.len() != height * width {
            return Err(Error::Data(format!(
                "expected {} pixels for a {height}x{width} image, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Image {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn brightness(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub values: Vec<f64>,
}

pub fn grid_dims(height: usize, width: usize, k: usize) -> (usize, usize) {
    (height / k, width / k)
}

pub fn patchify(image: &Image, k: usize) -> Result<Vec<Patch>> {
    check_patch_size(k)?;
    if image.height < k || image.width < k {
        return Err(Error::Data(format!(
            "{}x{} image is smaller than one {k}x{k} patch",
            image.height, image.width
        )));
    }
    let (rows, cols) = grid_dims(image.height, image.width, k);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut values = Vec::with_capacity(k * k);
            for dr in 0..k {
                for dc in 0..k {
                    values.push(image.get(r * k + dr, c * k + dc));
                }
            }
            out.push(Patch { row: r, col: c, values });
        }
    }
    Ok(out)
}

/// `C x H x W` tensor of Z-expectations, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMaps {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMaps {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.values[(channel * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, row: usize, col: usize, v: f64) {
        self.values[(channel * self.height + row) * self.width + col] = v;
    }

    /// Row `c` holds channel `c` flattened over the spatial grid.
    pub fn channel_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.channels, self.height * self.width, &self.values)
    }
}

pub fn extract(image: &Image, circuit: &EncodingCircuit, k: usize) -> Result<FeatureMaps> {
    if circuit.n_qubits != k * k {
        return Err(Error::Config(format!(
            "circuit has {} qubits but patch size {k} needs {}",
            circuit.n_qubits,
            k * k
        )));
    }
    let patches = patchify(image, k)?;
    let (rows, cols) = grid_dims(image.height, image.width, k);
    let mut maps = FeatureMaps::zeros(k * k, rows, cols);
    for p in patches {
        let z = simulator::run(circuit, &p.values)?.z_expectations();
        for (q, v) in z.into_iter().enumerate() {
            maps.set(q, p.row, p.col, v);
        }
    }
    Ok(maps)
}

/// Extracts every image, in parallel; the output order matches `images`.
pub fn extract_all(images: &[Image], circuit: &EncodingCircuit, k: usize) -> Result<Vec<FeatureMaps>> {
    images.par_iter().map(|img| extract(img, circuit, k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    AngleRx,
    AngleRy,
    HigherOrder,
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angle_rx" => Ok(BaselineKind::AngleRx),
            "angle_ry" => Ok(BaselineKind::AngleRy),
            "higher_order" => Ok(BaselineKind::HigherOrder),
            other => Err(Error::Config(format!("unknown baseline `{other}`"))),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::AngleRx => "angle_rx",
            BaselineKind::AngleRy => "angle_ry",
            BaselineKind::HigherOrder => "higher_order",
        })
    }
}

/// Fixed reference encodings, repeated `layers` times (data re-uploading).
///
/// `higher_order` uses per layer: `H` on all qubits, `RZ(x_q)` on all qubits,
/// then `RZZ(x_i x_j)` along the chain `(i, i + 1)`.
pub fn baseline_circuit(kind: BaselineKind, k: usize, layers: usize) -> Result<EncodingCircuit> {
    check_patch_size(k)?;
    if !(1..=3).contains(&layers) {
        return Err(Error::Config(format!("layers must be 1..=3, got {layers}")));
    }
    let n = k * k;
    let mut gates = Vec::new();
    for _ in 0..layers {
        match kind {
            BaselineKind::AngleRx => gates.extend((0..n).map(|q| Gate::rx(q, q))),
            BaselineKind::AngleRy => gates.extend((0..n).map(|q| Gate::ry(q, q))),
            BaselineKind::HigherOrder => {
                gates.extend((0..n).map(Gate::h));
                gates.extend((0..n).map(|q| Gate::rz(q, q)));
                gates.extend((0..n - 1).map(|q| Gate::rzz(q, q + 1, q, q + 1)));
            }
        }
    }
    Ok(EncodingCircuit::with_gates(n, gates))
}

const QFMP_MAGIC: &[u8; 4] = b"QFMP";

/// Writes the flat binary export: magic, `u32` C, H, W, count, then
/// `count * C * H * W` little-endian `f64` values.
pub fn write_qfmp<W: Write>(mut w: W, maps: &[FeatureMaps]) -> Result<()> {
    let (c, h, wd) = match maps.first() {
        Some(m) => (m.channels, m.height, m.width),
        None => (0, 0, 0),
    };
    if maps.iter().any(|m| (m.channels, m.height, m.width) != (c, h, wd)) {
        return Err(Error::Data("feature maps have mixed shapes".into()));
    }
    w.write_all(QFMP_MAGIC)?;
    for v in [c, h, wd, maps.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for m in maps {
        for v in &m.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_qfmp<R: Read>(mut r: R) -> Result<Vec<FeatureMaps>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != QFMP_MAGIC {
        return Err(Error::Data("bad QFMP magic".into()));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let [c, h, w, count] = dims;
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        let mut m = FeatureMaps::zeros(c, h, w);
        for v in m.values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        out.push(m);
    }
    Ok(out)
}

/// One row per image, values flattened channel-major, with a `f_<i>` header.
pub fn write_features_csv<W: Write>(w: W, maps: &[FeatureMaps]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let len = maps.first().map_or(0, |m| m.values.len());
    wtr.write_record((0..len).map(|i| format!("f_{i}")))?;
    for m in maps {
        wtr.write_record(m.values.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Memoizes flattened features per (circuit, dataset) fingerprint.
#[derive(Debug, Default)]
pub struct FeatureCache {
    entries: Mutex<HashMap<(u64, u64), Arc<Vec<Vec<f64>>>>>,
}

pub fn circuit_fingerprint(circuit: &EncodingCircuit) -> u64 {
    let mut h = DefaultHasher::new();
    circuit.n_qubits.hash(&mut h);
    circuit.scale.to_bits().hash(&mut h);
    circuit.gates.hash(&mut h);
    h.finish()
}

pub fn images_fingerprint(images: &[Image]) -> u64 {
    let mut h = DefaultHasher::new();
    images.len().hash(&mut h);
    for img in images {
        (img.height, img.width).hash(&mut h);
        for p in &img.pixels {
            p.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

impl FeatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened feature vectors for `images`, simulated at most once per key.
    pub fn get_or_extract(
        &self,
        images: &[Image],
        images_key: u64,
        circuit: &EncodingCircuit,
        k: usize,
    ) -> Result<Arc<Vec<Vec<f64>>>> {
        let key = (circuit_fingerprint(circuit), images_key);
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let flat: Vec<Vec<f64>> = extract_all(images, circuit, k)?
            .into_iter()
            .map(|m| m.values)
            .collect();
        let flat = Arc::new(flat);
        self.entries
            .lock()
            .unwrap()
            .insert(key, Arc::clone(&flat));
        Ok(flat)
    }
}
