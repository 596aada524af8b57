//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the report is always printed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qenc_core::circuit::{EncodingCircuit, Gate, GateKind};
use qenc_core::data::{self, SynthConfig, SynthTask};
use qenc_core::mcts::{self, widening_limit, Search, SearchConfig, SearchOutcome};
use qenc_core::metrics::{self, FourierConfig, SweepRange};
use qenc_core::simulator;
use qenc_core::trainer::{self, ModelKind, SplitIndices, TrainConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Dense-matrix oracles

type M = DMatrix<Complex64>;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn m2(a: [[Complex64; 2]; 2]) -> M {
    M::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn kron_on(n: usize, ops: &[(usize, M)]) -> M {
    let mut out = M::identity(1, 1);
    for q in 0..n {
        let op = ops
            .iter()
            .find(|(i, _)| *i == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| M::identity(2, 2));
        out = out.kronecker(&op);
    }
    out
}

fn pauli_z() -> M {
    m2([[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(-1.0, 0.0)]])
}

fn gate_matrix(n: usize, g: &Gate, x: &[f64], scale: f64) -> M {
    let theta = scale * g.data.iter().map(|&d| x[d]).product::<f64>();
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let xm = m2([[cx(0.0, 0.0), cx(1.0, 0.0)], [cx(1.0, 0.0), cx(0.0, 0.0)]]);
    let p0 = m2([[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(0.0, 0.0)]]);
    let p1 = m2([[cx(0.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(1.0, 0.0)]]);
    let q = g.qubits[0];
    match g.kind {
        GateKind::RX => kron_on(n, &[(q, m2([[cx(co, 0.0), cx(0.0, -si)], [cx(0.0, -si), cx(co, 0.0)]]))]),
        GateKind::RY => kron_on(n, &[(q, m2([[cx(co, 0.0), cx(-si, 0.0)], [cx(si, 0.0), cx(co, 0.0)]]))]),
        GateKind::RZ => kron_on(n, &[(q, m2([[cx(co, -si), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(co, si)]]))]),
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            kron_on(n, &[(q, m2([[cx(h, 0.0), cx(h, 0.0)], [cx(h, 0.0), cx(-h, 0.0)]]))])
        }
        GateKind::CNOT => kron_on(n, &[(q, p0)]) + kron_on(n, &[(q, p1), (g.qubits[1], xm)]),
        GateKind::RZZ => {
            kron_on(n, &[]) * cx(co, 0.0)
                + kron_on(n, &[(q, pauli_z()), (g.qubits[1], pauli_z())]) * cx(0.0, -si)
        }
    }
}

fn oracle_state(c: &EncodingCircuit, x: &[f64]) -> DVector<Complex64> {
    let mut psi = DVector::from_element(1 << c.n_qubits, cx(0.0, 0.0));
    psi[0] = cx(1.0, 0.0);
    for g in &c.gates {
        psi = gate_matrix(c.n_qubits, g, x, c.scale) * psi;
    }
    psi
}

/// Meyer-Wallach from explicit reduced density matrices.
fn oracle_meyer_wallach(psi: &DVector<Complex64>, n: usize) -> f64 {
    let rho = psi * psi.adjoint();
    let dim = 1usize << n;
    let mut purity_sum = 0.0;
    for q in 0..n {
        let bit = 1usize << (n - 1 - q);
        let mut red = [[cx(0.0, 0.0); 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                if (i & !bit) == (j & !bit) {
                    let a = usize::from(i & bit != 0);
                    let b = usize::from(j & bit != 0);
                    red[a][b] += rho[(i, j)];
                }
            }
        }
        let r = m2(red);
        purity_sum += (&r * &r).trace().re;
    }
    2.0 * (1.0 - purity_sum / n as f64)
}

fn random_gate<R: Rng>(n: usize, rng: &mut R) -> Gate {
    let kind = GateKind::ALL[rng.random_range(0..GateKind::ALL.len())];
    if kind.num_qubits() == 2 && n >= 2 {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let data = if kind.is_parameterized() {
            vec![rng.random_range(0..n), rng.random_range(0..n)]
        } else {
            vec![]
        };
        Gate::new(kind, vec![a, b], data)
    } else {
        let kind = if kind.num_qubits() == 2 { GateKind::RY } else { kind };
        let data = if kind.is_parameterized() {
            vec![rng.random_range(0..n)]
        } else {
            vec![]
        };
        Gate::new(kind, vec![rng.random_range(0..n)], data)
    }
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_simulator_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let len = rng.random_range(0..=10);
        let gates = (0..len).map(|_| random_gate(n, &mut rng)).collect();
        let c = EncodingCircuit::with_gates(n, gates).with_scale(rng.random_range(0.5..2.0));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = simulator::run(&c, &x).map_err(|e| e.to_string())?;
        let want = oracle_state(&c, &x);
        for (a, b) in got.amplitudes().iter().zip(want.iter()) {
            worst = worst.max((a - b).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-10, format!("max amplitude error {worst:e}"))?;
    ensure(secs < 10.0, format!("took {secs:.2}s"))?;
    Ok(format!("200 circuits, max amplitude error {worst:.2e}, {secs:.2}s"))
}

fn c2_analytic_rotations() -> Outcome {
    let mut worst = 0.0f64;
    for kind in [GateKind::RX, GateKind::RY] {
        let c = EncodingCircuit::with_gates(1, vec![Gate::wired(kind, &[0])]);
        for i in 0..100 {
            let theta = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 99.0;
            let z = simulator::run(&c, &[theta]).map_err(|e| e.to_string())?.z_expectations()[0];
            worst = worst.max((z - theta.cos()).abs());
        }
    }
    ensure(worst < 1e-12, format!("max error {worst:e}"))?;
    Ok(format!("RX and RY over 100 angles, max error {worst:.2e}"))
}

fn c3_entanglement() -> Outcome {
    let check = |c: &EncodingCircuit, x: &[f64], want: f64, label: &str| -> Result<f64, String> {
        let state = simulator::run(c, x).map_err(|e| e.to_string())?;
        let q = metrics::meyer_wallach(&state);
        let oracle = oracle_meyer_wallach(&oracle_state(c, x), c.n_qubits);
        ensure((q - want).abs() < 1e-9, format!("{label}: Q = {q}, expected {want}"))?;
        ensure((q - oracle).abs() < 1e-9, format!("{label}: Q = {q}, density-matrix oracle {oracle}"))?;
        Ok(q)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = rng.random_range(1..=4);
        let gates = (0..8)
            .map(|_| {
                let kind = [GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::H][rng.random_range(0..4)];
                Gate::wired(kind, &[rng.random_range(0..n)])
            })
            .collect();
        let c = EncodingCircuit::with_gates(n, gates);
        let inputs = metrics::sample_inputs(n, metrics::DEFAULT_ENTANGLEMENT_SAMPLES, trial);
        let cap = metrics::entanglement_capability(&c, &inputs).map_err(|e| e.to_string())?;
        ensure(cap.mean.abs() < 1e-9, format!("product circuit has Q = {}", cap.mean))?;
        check(&c, &inputs[0], 0.0, "product")?;
    }
    let bell = EncodingCircuit::with_gates(2, vec![Gate::h(0), Gate::cnot(0, 1)]);
    check(&bell, &[0.0, 0.0], 1.0, "Bell")?;
    for n in [3, 4] {
        let mut gates = vec![Gate::h(0)];
        gates.extend((1..n).map(|q| Gate::cnot(q - 1, q)));
        check(&EncodingCircuit::with_gates(n, gates), &vec![0.0; n], 1.0, "GHZ")?;
    }
    // W state: RY sets |1> weight 1/3 on qubit 0, a CNOT-sandwiched RY pair
    // splits the rest evenly on qubit 1, and qubit 2 flips when both are 0.
    let theta = 2.0 * (1.0f64 / 3.0).sqrt().asin();
    let w = EncodingCircuit::with_gates(
        3,
        vec![
            Gate::ry(0, 0),
            Gate::ry(1, 1),
            Gate::cnot(0, 1),
            Gate::ry(1, 1),
            Gate::cnot(0, 1),
            Gate::rx(2, 2),
            Gate::cnot(0, 2),
            Gate::cnot(1, 2),
        ],
    );
    let x = [theta, std::f64::consts::FRAC_PI_4, std::f64::consts::PI];
    let probs: Vec<f64> = simulator::run(&w, &x)
        .map_err(|e| e.to_string())?
        .amplitudes()
        .iter()
        .map(|a| a.norm_sqr())
        .collect();
    for (i, p) in probs.iter().enumerate() {
        let want = if [1, 2, 4].contains(&i) { 1.0 / 3.0 } else { 0.0 };
        ensure((p - want).abs() < 1e-12, format!("W preparation: |amp {i}|^2 = {p}"))?;
    }
    let qw = check(&w, &x, 8.0 / 9.0, "W")?;
    Ok(format!("product 0, Bell/GHZ 1, W {qw:.12} (8/9), oracle agreement < 1e-9"))
}

fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

fn c4_effective_rank() -> Outcome {
    for m in 2..=8 {
        let e = metrics::effective_rank(&DMatrix::identity(m, m)).map_err(|e| e.to_string())?;
        ensure(e == m as f64, format!("identity_{m} gives {e}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = DMatrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0));
    let v = DMatrix::from_fn(1, 9, |_, _| rng.random_range(-1.0..1.0));
    let r1 = metrics::effective_rank(&(&u * &v)).map_err(|e| e.to_string())?;
    ensure((r1 - 1.0).abs() < 1e-9, format!("rank-1 gives {r1}"))?;

    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0]));
    let a = random_orthogonal(3, &mut rng) * sigma * random_orthogonal(3, &mut rng).transpose();
    let e = metrics::effective_rank(&a).map_err(|e| e.to_string())?;
    let want = 2.0 * 2f64.sqrt();
    ensure((e - want).abs() < 1e-9, format!("sigma=(2,1,1) gives {e}, expected {want}"))?;

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.random_range(2..=6), rng.random_range(2..=12));
        let a = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let base = metrics::effective_rank(&a).map_err(|e| e.to_string())?;
        let s = rng.random_range(0.01..100.0);
        let scaled = metrics::effective_rank(&(&a * s)).map_err(|e| e.to_string())?;
        let mut rows: Vec<usize> = (0..r).collect();
        let mut cols: Vec<usize> = (0..c).collect();
        rows.shuffle(&mut rng);
        cols.shuffle(&mut rng);
        let p = DMatrix::from_fn(r, c, |i, j| a[(rows[i], cols[j])]);
        let permuted = metrics::effective_rank(&p).map_err(|e| e.to_string())?;
        worst = worst.max((scaled - base).abs()).max((permuted - base).abs());
        let norm = metrics::normalized_effective_rank(&a, r).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&norm), format!("normalized erank {norm} outside [0, 1]"))?;
    }
    ensure(worst < 1e-9, format!("invariance error {worst:e}"))?;
    Ok(format!("identity/rank-1/2*sqrt(2) exact; 100 matrices, invariance error {worst:.1e}"))
}

fn c5_fourier() -> Outcome {
    let c = EncodingCircuit::with_gates(1, vec![Gate::rx(0, 0)]);
    let cfg = FourierConfig {
        repetitions: 3,
        points: 50,
        coefficients: 6,
        range: SweepRange::PI,
    };
    let slice = metrics::fourier_spectrum(&c, 0, 5, &cfg).map_err(|e| e.to_string())?;
    let grid = SweepRange::PI.grid(cfg.points);
    let signal: Vec<f64> = grid
        .iter()
        .map(|&v| simulator::run(&c, &[v]).map(|s| s.z_expectations()[0]))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let w0 = std::f64::consts::TAU / (SweepRange::PI.hi - SweepRange::PI.lo);
    let mut worst_oracle = 0.0f64;
    let mut worst_other = 0.0f64;
    let mut c1_err = 0.0f64;
    for coeffs in &slice.coefficients {
        for (k, ck) in coeffs.iter().enumerate() {
            let direct: Complex64 = grid
                .iter()
                .zip(&signal)
                .map(|(&x, &f)| Complex64::from_polar(f, -(k as f64) * w0 * x))
                .sum::<Complex64>()
                / cfg.points as f64;
            worst_oracle = worst_oracle.max((ck - direct).norm());
            if k == 1 {
                c1_err = c1_err.max((ck - cx(0.5, 0.0)).norm());
            } else {
                worst_other = worst_other.max(ck.norm());
            }
        }
    }
    ensure(c1_err < 1e-6, format!("|c_1 - 0.5| = {c1_err:e}"))?;
    ensure(worst_other < 1e-6, format!("largest other coefficient {worst_other:e}"))?;
    ensure(worst_oracle < 1e-10, format!("direct DFT disagreement {worst_oracle:e}"))?;
    Ok(format!(
        "|c_1 - 0.5| = {c1_err:.1e}, others <= {worst_other:.1e}, direct-sum gap {worst_oracle:.1e}"
    ))
}

fn auc_enumeration(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                twice_wins += if si > sj { 2 } else if si == sj { 1 } else { 0 };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn c6_auc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=30);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        let levels = rng.random_range(2..=12);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let a = trainer::auc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = auc_enumeration(&scores, &labels);
        ensure(a == want, format!("instance {done}: auc {a} vs enumeration {want}"))?;
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let both = trainer::auc(&negated, &flipped).map_err(|e| e.to_string())?;
        ensure(both == a, format!("instance {done}: negate+flip changed auc {a} -> {both}"))?;
        let comp = trainer::auc(&scores, &flipped).map_err(|e| e.to_string())?;
        ensure((a + comp - 1.0).abs() < 1e-15, format!("instance {done}: {a} + {comp} != 1"))?;
        done += 1;
    }
    Ok("1000 tied-score instances equal pairwise enumeration; complement symmetric".into())
}

fn c7_trainer() -> Outcome {
    let start = Instant::now();
    let mut aucs = Vec::new();
    for seed in 0..5 {
        let ds = data::synth(&SynthConfig::new(SynthTask::Blobs, 500, seed)).map_err(|e| e.to_string())?;
        let inputs = trainer::raw_inputs(&ds);
        let split = SplitIndices::from_dataset(&ds);
        let cfg = TrainConfig::default().with_seed(seed);
        ensure(cfg.lr == 5e-4 && cfg.batch == 32 && cfg.epochs == 30, "default hyperparameters changed")?;
        let a = trainer::train(&inputs, &ds.labels, &split, ModelKind::Dense, &cfg).map_err(|e| e.to_string())?;
        let b = trainer::train(&inputs, &ds.labels, &split, ModelKind::Dense, &cfg).map_err(|e| e.to_string())?;
        let (ja, jb) = (serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        ensure(ja == jb, format!("seed {seed}: reruns differ"))?;
        ensure(a.best_val_auc >= 0.99, format!("seed {seed}: best val AUC {}", a.best_val_auc))?;
        aucs.push(a.best_val_auc);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("5 seeds, min best val AUC {:.4}, bit-identical reruns, {secs:.2}s",
        aucs.iter().cloned().fold(1.0, f64::min)))
}

fn xor_dataset() -> Result<data::Dataset, String> {
    data::synth(&SynthConfig::new(SynthTask::XorPixels, 500, 1)).map_err(|e| e.to_string())
}

fn c8_search_invariants() -> Outcome {
    let ds = xor_dataset()?;
    let cfg = SearchConfig {
        max_iterations: 200,
        seed: 8,
        ..SearchConfig::default()
    };
    let evaluator = mcts::QccnnEvaluator::new(&ds, cfg.patch, cfg.train.clone(), &cfg.sampler)
        .map_err(|e| e.to_string())?;
    let mut s = Search::new(cfg.clone(), &evaluator).map_err(|e| e.to_string())?;
    for i in 1..=cfg.max_iterations {
        s.run_until(i).map_err(|e| e.to_string())?;
        ensure(s.root().unwrap().visits == i as u64, format!("root visits {} after {i}", s.root().unwrap().visits))?;
        for node in s.nodes() {
            let limit = widening_limit(node.visits, 1.0, 0.3);
            ensure(
                node.children.len() <= limit,
                format!("iteration {i}: node {} has {} children, limit {limit}", node.id, node.children.len()),
            )?;
        }
    }
    let best = s.log().best_so_far();
    ensure(best.windows(2).all(|w| w[1] >= w[0]), "best-so-far not monotone")?;

    let n = 4;
    let circuit = EncodingCircuit::with_gates(n, (0..10).map(|i| Gate::h(i % n)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let draws = 20_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        match mcts::sample_action(&circuit, &cfg, &mut rng) {
            qenc_core::Action::Add { .. } => counts[0] += 1,
            qenc_core::Action::Remove { .. } => counts[1] += 1,
            qenc_core::Action::Replace { .. } => counts[2] += 1,
        }
    }
    let mut detail = Vec::new();
    for (count, p) in counts.iter().zip([0.40, 0.15, 0.45]) {
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let z = (*count as f64 - draws as f64 * p) / sigma;
        ensure(z.abs() <= 3.0, format!("frequency {count}/{draws} is {z:.2} sigma from {p}"))?;
        detail.push(format!("{:.3}", *count as f64 / draws as f64));
    }
    Ok(format!(
        "200 iterations: widening, root visits and best-so-far hold; phase-2 mix ({}) over {draws} draws",
        detail.join(", ")
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const EFFICACY_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn xor_search(ds: &data::Dataset, seed: u64, filter: Option<f64>) -> Result<SearchOutcome, String> {
    let cfg = SearchConfig {
        max_iterations: 150,
        seed,
        erank_filter: filter,
        ..SearchConfig::default()
    };
    mcts::search(ds, &cfg).map_err(|e| e.to_string())
}

fn c9_search_efficacy(unfiltered: &mut Vec<SearchOutcome>) -> Outcome {
    let start = Instant::now();
    let ds = xor_dataset()?;
    let root = trainer::evaluate_circuit(&ds, &SearchConfig::default().root_circuit(), 2, &TrainConfig::default())
        .map_err(|e| e.to_string())?
        .best_val_auc;
    let mut bests = Vec::new();
    let mut entangling = 0;
    for seed in EFFICACY_SEEDS {
        let out = xor_search(&ds, seed, None)?;
        if out.best.count_kind(GateKind::RZZ) + out.best.count_kind(GateKind::CNOT) > 0 {
            entangling += 1;
        }
        bests.push(out.best_reward);
        unfiltered.push(out);
    }
    let med = median(bests.clone());
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "root {root:.4}, median best {med:.4} (per seed {:?}), entangling in {entangling}/5, {secs:.1}s",
        bests.iter().map(|b| (b * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    ensure(med >= root + 0.05, summary.clone())?;
    ensure(entangling >= 3, summary.clone())?;
    ensure(secs < 900.0, summary.clone())?;
    Ok(summary)
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    metrics::pearson(&rank(xs), &rank(ys)).unwrap()
}

fn c10_filter_harness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pairs: Vec<(f64, f64)> = (0..400)
        .map(|_| {
            let quality: f64 = rng.random_range(0.0..1.0);
            let erank = (quality + rng.random_range(-0.15..0.15)).clamp(0.0, 1.0);
            (erank, 0.5 + 0.45 * quality)
        })
        .collect();
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rho = spearman(&xs, &ys);
    ensure(rho >= 0.8, format!("synthetic log Spearman {rho:.3}"))?;
    let fractions: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let curve = metrics::filter_recall_curve(&pairs, &fractions).map_err(|e| e.to_string())?;
    ensure(curve[0].recall == 1.0, format!("recall at 0 is {}", curve[0].recall))?;
    ensure(curve.windows(2).all(|w| w[1].recall <= w[0].recall), "recall curve increases")?;
    let at35 = metrics::filter_recall_curve(&pairs, &[0.35]).map_err(|e| e.to_string())?[0].recall;
    ensure(at35 >= 0.9, format!("recall at 35% is {at35:.3}"))?;
    Ok(format!("N=400, Spearman {rho:.3}, recall at 35% = {at35:.3}, monotone, recall(0) = 1"))
}

fn c11_prefilter(unfiltered: &[SearchOutcome]) -> Outcome {
    let ds = xor_dataset()?;
    let mut filtered_first100 = 0;
    let mut candidates_first100 = 0;
    let mut bests = Vec::new();
    for seed in EFFICACY_SEEDS {
        let out = xor_search(&ds, seed, Some(mcts::DEFAULT_ERANK_THRESHOLD))?;
        // iteration 0 is the root, which is never filtered
        let window = &out.log.records[1..100.min(out.log.records.len())];
        candidates_first100 += window.len();
        filtered_first100 += window.iter().filter(|r| r.filtered).count();
        bests.push(out.best_reward);
    }
    let rate = filtered_first100 as f64 / candidates_first100 as f64;
    let med_filtered = median(bests.clone());
    let med_plain = median(unfiltered.iter().map(|o| o.best_reward).collect());
    let summary = format!(
        "rejected {filtered_first100}/{candidates_first100} ({:.1}%), median best {med_filtered:.4} vs unfiltered {med_plain:.4}",
        100.0 * rate
    );
    ensure(rate >= 0.10, summary.clone())?;
    ensure(med_filtered >= med_plain - 0.05, summary.clone())?;
    Ok(summary)
}

fn c12_round_trip_and_replay() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..1000 {
        let n = rng.random_range(1..=9);
        let len = rng.random_range(0..=5 * n);
        let gates = (0..len).map(|_| random_gate(n, &mut rng)).collect();
        let c = EncodingCircuit::with_gates(n, gates).with_scale(rng.random_range(-3.0..3.0));
        let back = EncodingCircuit::parse(&c.to_text()).map_err(|e| format!("circuit {i}: {e}"))?;
        ensure(back == c, format!("circuit {i} changed on round trip"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data_path = dir.path().join("xor.qimg");
    data::save(&data_path, &xor_dataset()?).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_qenc");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(
            out.status.success(),
            format!("qenc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
        )
    };
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run(&[
        "search", "--data", &s(&data_path), "--iters", "40", "--seed", "21", "--jobs", "1",
        "--erank-filter", "0.25", "--out", &s(&first),
    ])?;
    run(&["--config", &s(&first.join("config.json")), "--out", &s(&second)])?;
    let a = std::fs::read(first.join("search.jsonl")).map_err(|e| e.to_string())?;
    let b = std::fs::read(second.join("search.jsonl")).map_err(|e| e.to_string())?;
    ensure(!a.is_empty() && a == b, "replayed search.jsonl differs")?;
    Ok(format!("1000 circuits round-trip; replayed search.jsonl byte-identical ({} bytes)", a.len()))
}

fn main() {
    let mut unfiltered = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let r = f();
        let status = if r.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &r {
            Ok(s) | Err(s) => s.clone(),
        };
        println!("[{status}] {name}: {detail} ({:.1}s)", start.elapsed().as_secs_f64());
        results.push((name, r));
    };
    record(" 1 simulator oracle equivalence", &mut c1_simulator_oracle);
    record(" 2 analytic rotations", &mut c2_analytic_rotations);
    record(" 3 entanglement capability", &mut c3_entanglement);
    record(" 4 effective rank", &mut c4_effective_rank);
    record(" 5 fourier coefficients", &mut c5_fourier);
    record(" 6 auc", &mut c6_auc);
    record(" 7 trainer on blobs", &mut c7_trainer);
    record(" 8 search invariants", &mut c8_search_invariants);
    record(" 9 search efficacy on xor_pixels", &mut || c9_search_efficacy(&mut unfiltered));
    record("10 recall-curve harness", &mut c10_filter_harness);
    record("11 prefilter integration", &mut || c11_prefilter(&unfiltered));
    record("12 round trip and replay", &mut c12_round_trip_and_replay);
    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
