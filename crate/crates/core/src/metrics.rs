//! Encoding-quality metrics and the correlation analyses built on them.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::EncodingCircuit;
use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::features;
use crate::simulator;

// ---------------------------------------------------------------------------
// Entanglement capability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub mean: f64,
    pub per_sample: Vec<f64>,
    pub sample_inputs: Vec<Vec<f64>>,
}

pub const DEFAULT_ENTANGLEMENT_SAMPLES: usize = 3;

/// Meyer-Wallach `Q = 2 (1 - mean_q Tr(rho_q^2))`.
pub fn meyer_wallach(state: &simulator::StateVector) -> f64 {
    let p = state.single_qubit_purities();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    (2.0 * (1.0 - mean)).clamp(0.0, 1.0)
}

pub fn entanglement_capability(circuit: &EncodingCircuit, inputs: &[Vec<f64>]) -> Result<EntanglementReport> {
    if inputs.is_empty() {
        return Err(Error::Config("entanglement capability needs at least one input".into()));
    }
    let per_sample = inputs
        .iter()
        .map(|x| simulator::run(circuit, x).map(|s| meyer_wallach(&s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntanglementReport {
        mean: per_sample.iter().sum::<f64>() / per_sample.len() as f64,
        per_sample,
        sample_inputs: inputs.to_vec(),
    })
}

/// `count` input vectors uniform in `[-1, 1]^n`.
pub fn sample_inputs(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Fourier spectrum
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
}

impl SweepRange {
    /// `[-1, 1)`, the normalized pixel domain.
    pub const DATA: SweepRange = SweepRange { lo: -1.0, hi: 1.0 };
    /// `[-pi, pi)`, one full period of a unit-frequency rotation.
    pub const PI: SweepRange = SweepRange {
        lo: -std::f64::consts::PI,
        hi: std::f64::consts::PI,
    };

    pub fn grid(&self, n: usize) -> Vec<f64> {
        let step = (self.hi - self.lo) / n as f64;
        (0..n).map(|t| self.lo + t as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    pub repetitions: usize,
    pub points: usize,
    pub coefficients: usize,
    pub range: SweepRange,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig {
            repetitions: 100,
            points: 50,
            coefficients: 6,
            range: SweepRange::DATA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSlice {
    pub qubit: usize,
    pub points: usize,
    pub range: SweepRange,
    /// `coefficients[rep][k]` for `k = 0..coefficients`.
    pub coefficients: Vec<Vec<Complex64>>,
}

/// Fourier coefficients of a signal sampled on `range.grid(N)`.
///
/// Returns `c_k` of `f(x) = sum_k c_k exp(i k w0 x)` with `w0 = 2 pi / L`
/// for `k = 0..count`: `c_k = (1/N) exp(-i k w0 lo) DFT_k`. A unit cosine at
/// the base frequency gives `c_1 = 0.5` and `c_{-k} = conj(c_k)`.
pub fn fourier_coefficients(signal: &[f64], range: SweepRange, count: usize) -> Vec<Complex64> {
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let w0 = std::f64::consts::TAU / (range.hi - range.lo);
    (0..count.min(n))
        .map(|k| {
            let shift = Complex64::from_polar(1.0, -(k as f64) * w0 * range.lo);
            let c = buf[k] * shift / n as f64;
            if k == 0 {
                Complex64::new(c.re, 0.0)
            } else {
                c
            }
        })
        .collect()
}

/// Sweeps the input of `qubit` with all other inputs fixed at random values
/// in `[-1, 1]`, once per repetition, and records `<Z_qubit>`'s coefficients.
pub fn fourier_spectrum(circuit: &EncodingCircuit, qubit: usize, seed: u64, cfg: &FourierConfig) -> Result<FourierSlice> {
    let n = circuit.n_qubits;
    if qubit >= n {
        return Err(Error::Config(format!("qubit {qubit} out of range for {n} qubits")));
    }
    if cfg.points < 2 * cfg.coefficients {
        return Err(Error::Config("too few sweep points for the requested coefficients".into()));
    }
    let grid = cfg.range.grid(cfg.points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let signal = grid
            .iter()
            .map(|&v| {
                x[qubit] = v;
                simulator::run(circuit, &x).map(|s| s.z_expectations()[qubit])
            })
            .collect::<Result<Vec<_>>>()?;
        coefficients.push(fourier_coefficients(&signal, cfg.range, cfg.coefficients));
    }
    Ok(FourierSlice {
        qubit,
        points: cfg.points,
        range: cfg.range,
        coefficients,
    })
}

// ---------------------------------------------------------------------------
// Effective rank
// ---------------------------------------------------------------------------

/// Singular values from the eigenvalues of the smaller Gram matrix.
///
/// Eigenvalues below `dim * eps * lambda_max` are rounding noise of a
/// rank-deficient Gram matrix and are set to zero.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let dim = gram.nrows();
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let cutoff = dim as f64 * f64::EPSILON * max;
    let mut s: Vec<f64> = eig
        .iter()
        .map(|&l| if l <= cutoff { 0.0 } else { l.sqrt() })
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `exp(H(p))` with `p_i = sigma_i / sum sigma`.
pub fn effective_rank(a: &DMatrix<f64>) -> Result<f64> {
    let s = singular_values(a);
    let total: f64 = s.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    // A flat spectrum has entropy ln(k); exp(ln k) is not exact in floating point.
    let nonzero: Vec<f64> = s.iter().cloned().filter(|&v| v > 0.0).collect();
    if nonzero.iter().all(|&v| v == nonzero[0]) {
        return Ok(nonzero.len() as f64);
    }
    let entropy: f64 = s
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    let max_rank = a.nrows().min(a.ncols()) as f64;
    Ok(entropy.exp().clamp(1.0, max_rank))
}

/// `(erank - 1) / (m - 1)`; an all-zero matrix maps to 0.
pub fn normalized_effective_rank(a: &DMatrix<f64>, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Config(format!("normalization needs m >= 2, got {m}")));
    }
    match effective_rank(a) {
        Ok(e) => Ok(((e - 1.0) / (m as f64 - 1.0)).clamp(0.0, 1.0)),
        Err(Error::ZeroMatrix) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErankReport {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Samples whose feature matrix was identically zero.
    pub zero_matrices: usize,
}

impl ErankReport {
    pub fn from_values(per_sample: Vec<f64>, zero_matrices: usize) -> Self {
        let (mean, std) = mean_std(&per_sample);
        ErankReport {
            per_sample,
            mean,
            std,
            zero_matrices,
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const DEFAULT_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub per_class: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            per_class: DEFAULT_PER_CLASS,
            seed: 0,
        }
    }
}

/// Normalized effective rank of each `C x (H W)` feature matrix.
pub fn erank_of_images(circuit: &EncodingCircuit, images: &[features::Image], k: usize) -> Result<ErankReport> {
    let maps = features::extract_all(images, circuit, k)?;
    let mut zero = 0;
    let values = maps
        .iter()
        .map(|m| {
            let a = m.channel_matrix();
            if a.iter().all(|&v| v == 0.0) {
                zero += 1;
            }
            normalized_effective_rank(&a, m.channels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErankReport::from_values(values, zero))
}

/// Average normalized effective rank over a brightness-balanced sample.
pub fn mean_erank(circuit: &EncodingCircuit, ds: &Dataset, k: usize, sampler: &SamplerConfig) -> Result<ErankReport> {
    let idx = data::balanced_sample(ds, sampler.per_class, sampler.seed)?;
    let images: Vec<_> = idx.iter().map(|&i| ds.images[i].clone()).collect();
    erank_of_images(circuit, &images, k)
}

// ---------------------------------------------------------------------------
// Correlation and filtering analyses
// ---------------------------------------------------------------------------

/// Product-moment correlation from centered sums.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Data("pearson needs two equal-length series of >= 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One row of the pair log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub circuit_id: u64,
    pub erank_mean: f64,
    pub erank_std: f64,
    pub val_auc: f64,
}

pub fn write_pairs_csv<W: Write>(w: W, rows: &[PairRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(["circuit_id", "erank_mean", "erank_std", "val_auc"])?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_pairs_csv<R: Read>(r: R) -> Result<Vec<PairRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["circuit_id", "erank_mean", "erank_std", "val_auc"] {
        return Err(Error::Data(
            "pair log header must be circuit_id,erank_mean,erank_std,val_auc".into(),
        ));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("bad pair log row: {e}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileCorrelation {
    pub quartile: usize,
    pub count: usize,
    pub auc_min: Option<f64>,
    pub auc_max: Option<f64>,
    /// `None` when the group has fewer than 3 points or zero variance.
    pub r: Option<f64>,
}

/// AUC cut points at 1-based sorted ranks `ceil(j N / 4)`, `j = 1, 2, 3`.
fn quartile_cuts(aucs: &[f64]) -> [f64; 3] {
    let mut sorted = aucs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    [1, 2, 3].map(|j| sorted[(j * n).div_ceil(4).max(1) - 1])
}

/// Splits `(erank, auc)` pairs into AUC quartiles (values equal to a cut
/// point fall in the lower group) and correlates within each.
pub fn quartile_correlations(pairs: &[(f64, f64)]) -> Result<[QuartileCorrelation; 4]> {
    if pairs.len() < 4 {
        return Err(Error::Data("quartile analysis needs at least 4 pairs".into()));
    }
    let aucs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let cuts = quartile_cuts(&aucs);
    let mut groups: [Vec<(f64, f64)>; 4] = Default::default();
    for &(e, a) in pairs {
        let q = cuts.iter().take_while(|&&c| a > c).count();
        groups[q].push((e, a));
    }
    Ok([0, 1, 2, 3].map(|q| {
        let g = &groups[q];
        let xs: Vec<f64> = g.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = g.iter().map(|p| p.1).collect();
        QuartileCorrelation {
            quartile: q + 1,
            count: g.len(),
            auc_min: ys.iter().cloned().reduce(f64::min),
            auc_max: ys.iter().cloned().reduce(f64::max),
            r: if g.len() >= 3 { pearson(&xs, &ys).ok() } else { None },
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallPoint {
    pub fraction: f64,
    pub dropped: usize,
    /// Highest erank among the dropped entries.
    pub threshold: Option<f64>,
    pub recall: f64,
}

/// For each fraction, drops the `floor(fraction N)` lowest-erank entries and
/// reports the share of the top 10% by AUC (`ceil(N / 10)` entries) that
/// survive. Ties in either ordering resolve by input position.
pub fn filter_recall_curve(pairs: &[(f64, f64)], fractions: &[f64]) -> Result<Vec<RecallPoint>> {
    let n = pairs.len();
    if n < 10 {
        return Err(Error::Data(format!("recall curve needs at least 10 pairs, got {n}")));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Config(format!("fraction {f} outside [0, 1]")));
    }
    let mut by_auc: Vec<usize> = (0..n).collect();
    by_auc.sort_by(|&a, &b| pairs[b].1.total_cmp(&pairs[a].1));
    let top_n = n.div_ceil(10);
    let mut is_top = vec![false; n];
    for &i in &by_auc[..top_n] {
        is_top[i] = true;
    }
    let mut by_erank: Vec<usize> = (0..n).collect();
    by_erank.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));

    Ok(fractions
        .iter()
        .map(|&f| {
            let dropped = ((f * n as f64) + 1e-9).floor() as usize;
            let dropped = dropped.min(n);
            let lost = by_erank[..dropped].iter().filter(|&&i| is_top[i]).count();
            RecallPoint {
                fraction: f,
                dropped,
                threshold: dropped.checked_sub(1).map(|j| pairs[by_erank[j]].0),
                recall: (top_n - lost) as f64 / top_n as f64,
            }
        })
        .collect())
}
