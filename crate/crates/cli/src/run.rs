use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qenc_core::circuit::EncodingCircuit;
use qenc_core::data::{self, Dataset, Format, SynthConfig, SynthTask};
use qenc_core::features;
use qenc_core::mcts::{Checkpoint, FilteredMode, QccnnEvaluator, Search, SearchConfig};
use qenc_core::metrics::{self, FourierConfig, SamplerConfig, SweepRange};
use qenc_core::trainer::{self, EvalReport, ModelKind, SplitIndices, SplitMetrics, TrainConfig};
use qenc_core::Error;

use crate::args::*;

pub fn run(mut cmd: Command) -> Result<()> {
    resolve_paths(&mut cmd);
    if let Some(dir) = cmd.out_dir() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let f = File::create(dir.join("config.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &cmd)?;
    }
    match &cmd {
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::Metrics(m) => match m {
            MetricsCommand::Erank(a) => erank(a),
            MetricsCommand::Entanglement(a) => entanglement(a),
            MetricsCommand::Fourier(a) => fourier(a),
            MetricsCommand::Correlate(a) => correlate(a),
            MetricsCommand::RecallCurve(a) => recall_curve(a),
        },
        Command::Synth(a) => synth(a),
    }
}

/// Makes input paths absolute so a saved config replays from any directory.
fn resolve_paths(cmd: &mut Command) {
    fn abs(p: &mut PathBuf) {
        if let Ok(c) = fs::canonicalize(&*p) {
            *p = c;
        }
    }
    match cmd {
        Command::Search(a) => {
            abs(&mut a.data);
            if let Some(r) = a.resume.as_mut() {
                abs(r);
            }
        }
        Command::Eval(a) => {
            abs(&mut a.data);
            if let Some(c) = a.circuit.as_mut() {
                abs(c);
            }
        }
        Command::Metrics(m) => match m {
            MetricsCommand::Erank(a) => {
                abs(&mut a.data);
                abs(&mut a.circuit);
            }
            MetricsCommand::Entanglement(a) => abs(&mut a.circuit),
            MetricsCommand::Fourier(a) => abs(&mut a.circuit),
            MetricsCommand::Correlate(a) => abs(&mut a.pairs),
            MetricsCommand::RecallCurve(a) => abs(&mut a.pairs),
        },
        Command::Synth(_) => {}
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let ds = data::load(path, Format::from_path(path))?;
    if ds.range == (-1.0, 1.0) {
        return Ok(ds);
    }
    Ok(data::normalize(&ds, ds.range)?)
}

fn read_circuit(path: &Path) -> Result<EncodingCircuit> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read circuit {}: {e}", path.display())))?;
    EncodingCircuit::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn check_qubits(circuit: &EncodingCircuit, patch: usize) -> Result<()> {
    features::check_patch_size(patch)?;
    if circuit.n_qubits != patch * patch {
        return Err(Error::Config(format!(
            "circuit has {} qubits but patch {patch} needs {}",
            circuit.n_qubits,
            patch * patch
        ))
        .into());
    }
    Ok(())
}

fn train_config(t: &TrainArgs, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        lr: t.lr,
        batch: t.batch,
        epochs: t.epochs,
        seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `content` to `dir/name`, or to stdout without an output directory.
fn emit(dir: Option<&PathBuf>, name: &str, content: &[u8]) -> Result<()> {
    match dir {
        Some(d) => fs::write(d.join(name), content).with_context(|| format!("writing {name}")),
        None => {
            io::stdout().write_all(content)?;
            Ok(())
        }
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Shortest round-trip float text.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn search_config(a: &SearchArgs) -> Result<SearchConfig> {
    let cfg = SearchConfig {
        patch: a.patch,
        max_iterations: a.iters,
        max_gates: a.max_gates,
        scale: a.scale,
        erank_filter: a.erank_filter,
        filtered_mode: if a.discard_filtered {
            FilteredMode::Discard
        } else {
            FilteredMode::ChanceReward
        },
        log_erank: a.log_erank,
        sampler: SamplerConfig {
            per_class: a.per_class,
            seed: a.seed,
        },
        train: train_config(&a.train, a.seed)?,
        seed: a.seed,
        jobs: a.jobs,
        ..SearchConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn search(a: &SearchArgs) -> Result<()> {
    let checkpoint: Option<Checkpoint> = match &a.resume {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            Some(serde_json::from_reader(BufReader::new(f)).map_err(Error::from)?)
        }
        None => None,
    };
    let cfg = match &checkpoint {
        Some(cp) => cp.config.clone(),
        None => search_config(a)?,
    };
    let ds = load_dataset(&a.data)?;
    let evaluator = QccnnEvaluator::new(&ds, cfg.patch, cfg.train.clone(), &cfg.sampler)?;
    let mut s = match checkpoint {
        Some(cp) => Search::resume(cp, &evaluator)?,
        None => Search::new(cfg.clone(), &evaluator)?,
    };
    let total = cfg.max_iterations;
    let every = a.checkpoint_every.filter(|&n| n > 0).unwrap_or(total.max(1));
    while s.iterations() < total {
        let next = (s.iterations() + every).min(total);
        s.run_until(next)?;
        if a.checkpoint_every.is_some() {
            let f = File::create(a.out.join("checkpoint.json"))?;
            serde_json::to_writer(BufWriter::new(f), &s.checkpoint())?;
        }
        eprintln!("iteration {}/{total}", s.iterations());
    }
    let outcome = s
        .outcome()
        .ok_or_else(|| Error::Config("search ran zero iterations".into()))?;
    fs::write(a.out.join("best.qc"), outcome.best.to_text())?;
    let log = &outcome.log;
    log.write_jsonl(BufWriter::new(File::create(a.out.join("search.jsonl"))?))?;
    metrics::write_pairs_csv(BufWriter::new(File::create(a.out.join("pairs.csv"))?), &log.pairs())?;
    log.write_timings_csv(BufWriter::new(File::create(a.out.join("timings.csv"))?))?;
    let evaluated = log.records.len() - log.filtered_count();
    println!(
        "best reward {:.6} with {} gates; {} candidates, {} filtered, {evaluated} trained",
        outcome.best_reward,
        outcome.best.len(),
        log.records.len(),
        log.filtered_count(),
    );
    Ok(())
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("scale sweep `{spec}` is not LO:HI:STEP")))?;
    match parts[..] {
        [lo, hi, step] => Ok(trainer::scale_grid(lo, hi, step)?),
        [f] => Ok(vec![f]),
        _ => Err(Error::Config(format!("scale sweep `{spec}` is not LO:HI:STEP")).into()),
    }
}

fn mean_std_of(values: &[Option<f64>]) -> (String, String) {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    match v {
        Some(v) if !v.is_empty() => {
            let (m, s) = metrics::mean_std(&v);
            (num(m), num(s))
        }
        _ => (String::new(), String::new()),
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    if a.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()).into());
    }
    let base_cfg = train_config(&a.train, a.seeds[0])?;
    let circuit = match a.model {
        ModelSpec::Qccnn => {
            let path = a
                .circuit
                .as_ref()
                .ok_or_else(|| Error::Config("--model qccnn needs --circuit".into()))?;
            let c = read_circuit(path)?;
            check_qubits(&c, a.patch)?;
            Some(c)
        }
        ModelSpec::Baseline(kind) => Some(features::baseline_circuit(kind, a.patch, a.layers)?),
        ModelSpec::Fc | ModelSpec::Cnn => None,
    };
    if a.scale_sweep.is_some() && circuit.is_none() {
        return Err(Error::Config("--scale-sweep needs a circuit model".into()).into());
    }
    let ds = load_dataset(&a.data)?;
    let split = SplitIndices::from_dataset(&ds);

    let circuit = match (circuit, &a.scale_sweep) {
        (Some(c), Some(spec)) => {
            let grid = parse_sweep(spec)?;
            let sweep = trainer::sweep_scale(&c, &ds, a.patch, &grid, &base_cfg)?;
            let rows = sweep.table.iter().map(|(f, r)| {
                vec![num(*f), num(r.best_val_auc), r.best_epoch.to_string()]
            });
            fs::write(a.out.join("sweep.csv"), csv_bytes(&["scale", "best_val_auc", "best_epoch"], rows)?)?;
            println!("best scale {}", sweep.best_scale);
            Some(c.with_scale(sweep.best_scale))
        }
        (c, _) => c,
    };

    let (inputs, model) = match &circuit {
        Some(c) => (trainer::circuit_inputs(&ds, c, a.patch, None)?, ModelKind::Dense),
        None => {
            let model = if a.model == ModelSpec::Cnn {
                ModelKind::Conv {
                    height: ds.height,
                    width: ds.width,
                }
            } else {
                ModelKind::Dense
            };
            (std::sync::Arc::new(trainer::raw_inputs(&ds)), model)
        }
    };
    let reports: Vec<EvalReport> = a
        .seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base_cfg.clone() };
            trainer::train(&inputs, &ds.labels, &split, model, &cfg)
        })
        .collect::<qenc_core::Result<_>>()?;

    write_epoch_table(&a.out.join("eval.csv"), &reports)?;

    let mut rows = Vec::new();
    for (seed, r) in a.seeds.iter().zip(&reports) {
        let t = r.test.as_ref();
        rows.push(vec![
            seed.to_string(),
            num(r.best_val_auc),
            r.best_epoch.to_string(),
            opt(t.map(|m| m.loss)),
            opt(t.map(|m| m.accuracy)),
            opt(t.and_then(|m| m.auc)),
        ]);
    }
    let column = |f: &dyn Fn(&EvalReport) -> Option<f64>| reports.iter().map(f).collect::<Vec<_>>();
    let cols: [Vec<Option<f64>>; 4] = [
        column(&|r| Some(r.best_val_auc)),
        column(&|r| r.test.as_ref().map(|m| m.loss)),
        column(&|r| r.test.as_ref().map(|m| m.accuracy)),
        column(&|r| r.test.as_ref().and_then(|m| m.auc)),
    ];
    let stats: Vec<(String, String)> = cols.iter().map(|c| mean_std_of(c)).collect();
    for (label, pick) in [("mean", 0), ("std", 1)] {
        let get = |i: usize| if pick == 0 { stats[i].0.clone() } else { stats[i].1.clone() };
        rows.push(vec![label.into(), get(0), String::new(), get(1), get(2), get(3)]);
    }
    let summary = csv_bytes(
        &["seed", "best_val_auc", "best_epoch", "test_loss", "test_accuracy", "test_auc"],
        rows,
    )?;
    fs::write(a.out.join("summary.csv"), &summary)?;
    io::stdout().write_all(&summary)?;
    Ok(())
}

/// Per-epoch mean and standard deviation across seeds.
fn write_epoch_table(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut header = vec!["epoch".to_string()];
    for split in ["train", "val"] {
        for m in ["loss", "accuracy", "auc"] {
            header.push(format!("{split}_{m}_mean"));
            header.push(format!("{split}_{m}_std"));
        }
    }
    let epochs = reports.iter().map(|r| r.epochs.len()).min().unwrap_or(0);
    let rows = (0..epochs).map(|e| {
        let mut row = vec![(e + 1).to_string()];
        let pickers: [fn(&SplitMetrics) -> Option<f64>; 3] = [|m| Some(m.loss), |m| Some(m.accuracy), |m| m.auc];
        for split in 0..2 {
            for pick in pickers {
                let vals: Vec<Option<f64>> = reports
                    .iter()
                    .map(|r| {
                        let em = &r.epochs[e];
                        pick(if split == 0 { &em.train } else { &em.val })
                    })
                    .collect();
                let (m, s) = mean_std_of(&vals);
                row.push(m);
                row.push(s);
            }
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    fs::write(path, csv_bytes(&header, rows)?)?;
    Ok(())
}

fn erank(a: &ErankArgs) -> Result<()> {
    let circuit = read_circuit(&a.circuit)?;
    check_qubits(&circuit, a.patch)?;
    let ds = load_dataset(&a.data)?;
    let sampler = SamplerConfig {
        per_class: a.per_class,
        seed: a.seed,
    };
    let report = metrics::mean_erank(&circuit, &ds, a.patch, &sampler)?;
    if let Some(dir) = &a.out {
        let rows = report
            .per_sample
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), num(*v)]);
        fs::write(dir.join("erank.csv"), csv_bytes(&["sample", "normalized_erank"], rows)?)?;
    }
    println!("{}", report.mean);
    eprintln!(
        "std {} over {} images ({} all-zero feature maps)",
        report.std,
        report.per_sample.len(),
        report.zero_matrices
    );
    Ok(())
}

fn entanglement(a: &EntanglementArgs) -> Result<()> {
    let circuit = read_circuit(&a.circuit)?;
    let inputs = metrics::sample_inputs(circuit.n_qubits, a.samples, a.seed);
    let report = metrics::entanglement_capability(&circuit, &inputs)?;
    if let Some(dir) = &a.out {
        let rows = report
            .per_sample
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), num(*v)]);
        fs::write(dir.join("entanglement.csv"), csv_bytes(&["sample", "meyer_wallach"], rows)?)?;
    }
    println!("{}", report.mean);
    Ok(())
}

fn fourier(a: &FourierArgs) -> Result<()> {
    let circuit = read_circuit(&a.circuit)?;
    let cfg = FourierConfig {
        repetitions: a.repetitions,
        points: a.points,
        coefficients: a.coefficients,
        range: match a.range {
            RangeArg::Data => SweepRange::DATA,
            RangeArg::Pi => SweepRange::PI,
        },
    };
    let slice = metrics::fourier_spectrum(&circuit, a.qubit, a.seed, &cfg)?;
    let mut rows = Vec::new();
    for (rep, coeffs) in slice.coefficients.iter().enumerate() {
        for (k, c) in coeffs.iter().enumerate() {
            rows.push(vec![
                rep.to_string(),
                k.to_string(),
                num(c.re),
                num(c.im),
                num(c.norm()),
            ]);
        }
    }
    emit(
        a.out.as_ref(),
        "fourier.csv",
        &csv_bytes(&["repetition", "k", "re", "im", "magnitude"], rows)?,
    )
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let f = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let rows = metrics::read_pairs_csv(BufReader::new(f))?;
    Ok(rows.iter().map(|r| (r.erank_mean, r.val_auc)).collect())
}

fn correlate(a: &PairsArgs) -> Result<()> {
    let pairs = read_pairs(&a.pairs)?;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let overall = metrics::pearson(&xs, &ys)?;
    let quartiles = metrics::quartile_correlations(&pairs)?;
    let mut rows = vec![vec![
        "all".to_string(),
        pairs.len().to_string(),
        opt(ys.iter().cloned().reduce(f64::min)),
        opt(ys.iter().cloned().reduce(f64::max)),
        num(overall),
    ]];
    for q in &quartiles {
        rows.push(vec![
            format!("Q{}", q.quartile),
            q.count.to_string(),
            opt(q.auc_min),
            opt(q.auc_max),
            opt(q.r),
        ]);
    }
    emit(
        a.out.as_ref(),
        "correlate.csv",
        &csv_bytes(&["group", "count", "auc_min", "auc_max", "pearson_r"], rows)?,
    )
}

fn recall_curve(a: &RecallArgs) -> Result<()> {
    let pairs = read_pairs(&a.pairs)?;
    let fractions: Vec<f64> = a.fractions.iter().map(|p| p / 100.0).collect();
    let curve = metrics::filter_recall_curve(&pairs, &fractions)?;
    let rows = a.fractions.iter().zip(&curve).map(|(pct, p)| {
        vec![num(*pct), p.dropped.to_string(), opt(p.threshold), num(p.recall)]
    });
    emit(
        a.out.as_ref(),
        "recall.csv",
        &csv_bytes(&["fraction_pct", "dropped", "erank_threshold", "recall"], rows)?,
    )
}

fn synth(a: &SynthArgs) -> Result<()> {
    let task: SynthTask = a.task.parse()?;
    let cfg = SynthConfig::new(task, a.count, a.seed).with_size(a.height, a.width);
    let ds = data::synth(&cfg)?;
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    data::save(&a.output, &ds)?;
    eprintln!("wrote {} images to {}", ds.len(), a.output.display());
    Ok(())
}
