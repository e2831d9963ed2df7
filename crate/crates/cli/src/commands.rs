//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qtomo_core::mle::{mle_reconstruct, MleConfig};
use qtomo_core::reconstruct::{analytic_1q, pinv_reconstruct};
use qtomo_core::{
    ComplexMatrix, DensityMatrix, Ensemble, Error, MeasurementRecord, SamplingMethod,
};
use qtomo_eval::errormap::error_maps_to_csv;
use qtomo_eval::report::{fmt_f64, sweeps_to_csv};
use qtomo_eval::svg::sweep_chart;
use qtomo_eval::{bures_sweep, error_map, psd_stats, reconstruct_sweep, Method, SweepSpec};
use qtomo_learn::models::{
    resume_corrector, resume_selector, train_corrector, train_selector_reconstructor,
    CorrectorModel, CorrectorSpec, CorrectorVariant, LstmArch, SelectionMode,
    SelectorReconstructor, SelectorSpec, StateTable,
};
use qtomo_learn::nn::checkpoint::{self, Checkpoint};
use qtomo_learn::nn::{TrainConfig, TrainingCurve};

use crate::args::*;
use crate::dataset;

/// Bad flag combination or config; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Errormap(a) => errormap(a),
        Command::Psdstats(a) => psdstats(a),
        Command::Inspect(a) => inspect(a),
    }
}

pub fn parse_ensemble(spec: &str, n_qubits: usize) -> Result<Ensemble> {
    if spec == "default" {
        return Ok(Ensemble::default_for(n_qubits));
    }
    let mut components = Vec::new();
    for part in spec.split(',') {
        let (name, w) = match part.split_once(':') {
            Some((n, w)) => (
                n,
                w.parse::<f64>()
                    .map_err(|_| usage(format!("bad ensemble weight '{w}'")))?,
            ),
            None => (part, 1.0),
        };
        let method = SamplingMethod::parse(name.trim()).map_err(|e| usage(e.to_string()))?;
        components.push((method, w));
    }
    let e = Ensemble { components };
    e.validate_for(n_qubits)
        .map_err(|err| usage(err.to_string()))?;
    Ok(e)
}

fn gen(a: &GenArgs) -> Result<()> {
    let ensemble = parse_ensemble(&a.ensemble, a.n_qubits)?;
    let states = ensemble.generate(a.n_qubits, a.count, a.seed)?;
    dataset::save(&a.out, a.n_qubits, &states)?;
    println!(
        "wrote {} {}-qubit states to {}",
        states.len(),
        a.n_qubits,
        a.out.display()
    );
    Ok(())
}

struct Data {
    header: dataset::DatasetHeader,
    table: StateTable,
    states: Vec<DensityMatrix>,
}

fn load_data(path: &Path) -> Result<Data> {
    let (header, states) = dataset::load(path)?;
    if states.is_empty() {
        return Err(Error::InvalidConfig(format!("{} holds no states", path.display())).into());
    }
    let table = StateTable::new(&states)?;
    Ok(Data {
        header,
        table,
        states,
    })
}

fn corrector_variant(kind: ModelKind) -> Option<CorrectorVariant> {
    match kind {
        ModelKind::CorrectorFullM => Some(CorrectorVariant::FullM),
        ModelKind::CorrectorPiOnly => Some(CorrectorVariant::PiOnly),
        ModelKind::CorrectorQuadratic => Some(CorrectorVariant::Quadratic),
        _ => None,
    }
}

fn selection_mode(kind: ModelKind) -> Option<SelectionMode> {
    match kind {
        ModelKind::LstmRandom => Some(SelectionMode::Random),
        ModelKind::LstmPredefined => Some(SelectionMode::Predefined),
        ModelKind::LstmCustom => Some(SelectionMode::Custom),
        _ => None,
    }
}

fn meta_or<T: std::str::FromStr>(ck: &Checkpoint, key: &str, default: T) -> T {
    ck.meta
        .get(key)
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let n = data.header.n_qubits;
    if let Some(want) = a.n_qubits {
        if want != n {
            return Err(Error::ShapeMismatch(format!(
                "--n-qubits {want} but the dataset holds {n}-qubit states"
            ))
            .into());
        }
    }
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        seed: a.seed,
        ortho_weight: a.ortho_weight,
        grad_clip: a.grad_clip,
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let resume = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    let (steps0, epochs0) = match &resume {
        Some(ck) => (
            meta_or(ck, "train.steps_total", 0u64),
            meta_or(ck, "train.epochs_total", 0usize),
        ),
        None => (0, 0),
    };
    let check_n = |model_n: usize| -> Result<()> {
        if model_n != n {
            return Err(Error::ShapeMismatch(format!(
                "{model_n}-qubit checkpoint, {n}-qubit dataset"
            ))
            .into());
        }
        Ok(())
    };

    let (mut ck, curve, is_corrector) = if let Some(variant) = corrector_variant(a.model) {
        let (model, curve) = match &resume {
            Some(ck) => {
                let mut model = CorrectorModel::from_checkpoint(ck)?;
                if model.variant != variant {
                    return Err(usage(format!(
                        "checkpoint holds a {} corrector",
                        model.variant.name()
                    )));
                }
                check_n(model.n_qubits)?;
                let curve = resume_corrector(&mut model, &data.table, &cfg, steps0)?;
                (model, curve)
            }
            None => {
                let mut spec = match (&a.subset, a.m) {
                    (Some(s), m) => {
                        if m.is_some_and(|m| m != s.0.len()) {
                            return Err(usage("--m disagrees with the size of --subset"));
                        }
                        CorrectorSpec::per_collection(variant, s.0.clone())
                    }
                    (None, Some(m)) => CorrectorSpec::new(variant, m),
                    (None, None) => return Err(usage("corrector training needs --m or --subset")),
                };
                spec.hidden = a.hidden.0.clone();
                spec.collections = a.collections;
                train_corrector(&data.table, &spec, &cfg)?
            }
        };
        (model.to_checkpoint(Some(&cfg)), curve, true)
    } else {
        let mode = selection_mode(a.model).expect("LSTM model kind");
        let size = 1usize << (2 * n);
        let (model, curve, episode_len) = match &resume {
            Some(ck) => {
                let mut model = SelectorReconstructor::from_checkpoint(ck)?;
                if model.mode != mode {
                    return Err(usage(format!(
                        "checkpoint holds a {} LSTM",
                        model.mode.name()
                    )));
                }
                check_n(model.n_qubits)?;
                let episode_len = a
                    .episode_len
                    .unwrap_or_else(|| meta_or(ck, "episode_len", size));
                let curve = resume_selector(&mut model, &data.table, episode_len, &cfg, steps0)?;
                (model, curve, episode_len)
            }
            None => {
                let mut arch = LstmArch::default_for(n);
                if let Some(h) = a.lstm_hidden {
                    arch.hidden = h;
                }
                if let Some(l) = a.lstm_layers {
                    arch.layers = l;
                }
                let spec = SelectorSpec {
                    mode,
                    arch,
                    episode_len: a.episode_len.unwrap_or(size),
                };
                let (model, curve) = train_selector_reconstructor(&data.table, &spec, &cfg)?;
                (model, curve, spec.episode_len)
            }
        };
        (
            model.to_checkpoint(Some(&cfg), Some(episode_len)),
            curve,
            false,
        )
    };

    let steps_total = steps0 + curve.steps;
    let epochs_total = epochs0 + curve.epoch_loss.len();
    ck.meta
        .insert("train.steps_total".into(), steps_total.to_string());
    ck.meta
        .insert("train.epochs_total".into(), epochs_total.to_string());
    ck.meta
        .insert("data.crc32".into(), format!("{:08x}", data.header.crc));
    ck.meta
        .insert("data.count".into(), data.header.count.to_string());
    ck.save(&a.out)?;

    let log = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    write_log(
        &log,
        resume.is_some(),
        &curve,
        is_corrector,
        steps0,
        epochs0,
        data.table.len().div_ceil(a.batch_size),
    )?;
    match curve.last() {
        Some(l) => println!(
            "trained {} epochs ({} steps total), final loss {l:.6}",
            curve.epoch_loss.len(),
            steps_total
        ),
        None => println!("no epochs run"),
    }
    Ok(())
}

fn write_log(
    path: &Path,
    append: bool,
    curve: &TrainingCurve,
    with_ortho: bool,
    steps0: u64,
    epochs0: usize,
    steps_per_epoch: usize,
) -> Result<()> {
    let append = append && path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = String::new();
    if !append {
        out.push_str("epoch,step,loss,ortho_residual\n");
    }
    for (e, loss) in curve.epoch_loss.iter().enumerate() {
        let step = steps0 + ((e + 1) * steps_per_epoch) as u64;
        let ortho = if with_ortho {
            fmt_f64(curve.epoch_aux[e])
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{step},{},{ortho}\n",
            epochs0 + e + 1,
            fmt_f64(*loss)
        ));
    }
    f.write_all(out.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

#[derive(Default)]
struct Models {
    correctors: Vec<CorrectorModel>,
    lstm: Option<SelectorReconstructor>,
    /// (path, crc32) of every checkpoint file.
    ids: Vec<(String, u32)>,
}

fn load_models(list: Option<&PathList>, n_qubits: usize) -> Result<Models> {
    let mut out = Models::default();
    for path in list.map(|l| l.0.as_slice()).unwrap_or(&[]) {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let ck = Checkpoint::from_bytes(&bytes)
            .with_context(|| format!("loading {}", path.display()))?;
        out.ids
            .push((path.display().to_string(), crc32fast::hash(&bytes)));
        if CorrectorVariant::from_tag(&ck.kind).is_some() {
            let m = CorrectorModel::from_checkpoint(&ck)?;
            if m.n_qubits != n_qubits {
                return Err(Error::ShapeMismatch(format!(
                    "{} is a {}-qubit model",
                    path.display(),
                    m.n_qubits
                ))
                .into());
            }
            out.correctors.push(m);
        } else {
            let m = SelectorReconstructor::from_checkpoint(&ck)?;
            if m.n_qubits != n_qubits {
                return Err(Error::ShapeMismatch(format!(
                    "{} is a {}-qubit model",
                    path.display(),
                    m.n_qubits
                ))
                .into());
            }
            if out.lstm.replace(m).is_some() {
                return Err(usage("at most one LSTM checkpoint per run"));
            }
        }
    }
    Ok(out)
}

fn mle_config(a: &MleArgs) -> Result<MleConfig> {
    let cfg = MleConfig {
        max_iters: a.mle_max_iters,
        tol: a.mle_tol,
        dilution: a.mle_dilution,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn build_methods<'a>(
    names: &[MethodName],
    models: &'a Models,
    mle: &MleConfig,
) -> Result<Vec<Method<'a>>> {
    let mut out = Vec::new();
    for name in names {
        match name {
            MethodName::Pinv => out.push(Method::Pseudoinverse),
            MethodName::Mle => out.push(Method::Mle(*mle)),
            MethodName::Analytic => out.push(Method::Analytic1q),
            MethodName::Corrector => {
                if models.correctors.is_empty() {
                    return Err(Error::UnsupportedCombination(
                        "the corrector method needs --checkpoint".into(),
                    )
                    .into());
                }
                for v in [
                    CorrectorVariant::FullM,
                    CorrectorVariant::PiOnly,
                    CorrectorVariant::Quadratic,
                ] {
                    let group: Vec<&CorrectorModel> = models
                        .correctors
                        .iter()
                        .filter(|c| c.variant == v)
                        .collect();
                    if !group.is_empty() {
                        out.push(Method::Corrector(group));
                    }
                }
            }
            MethodName::Lstm => match &models.lstm {
                Some(m) => out.push(Method::Lstm(m)),
                None => {
                    return Err(Error::UnsupportedCombination(
                        "the lstm method needs an LSTM --checkpoint".into(),
                    )
                    .into())
                }
            },
        }
    }
    Ok(out)
}

fn default_m(n_qubits: usize) -> Vec<usize> {
    (1..=1usize << (2 * n_qubits)).collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run metadata shared by the report commands; `canonical` feeds the config hash.
fn run_meta(data: &Data, models: &Models, canonical: &str) -> Vec<(String, String)> {
    let mut meta = vec![
        ("data.crc32".to_string(), format!("{:08x}", data.header.crc)),
        ("data.count".to_string(), data.header.count.to_string()),
    ];
    for (path, crc) in &models.ids {
        meta.push(("checkpoint".into(), format!("{path}:{crc:08x}")));
    }
    let ids: String = models
        .ids
        .iter()
        .map(|(_, c)| format!("{c:08x};"))
        .collect();
    let hash = crc32fast::hash(format!("{canonical}|{:08x}|{ids}", data.header.crc).as_bytes());
    meta.push(("config_hash".into(), format!("{hash:08x}")));
    meta
}

fn sweep_spec(
    m: Option<&MList>,
    n: usize,
    collections: usize,
    seed: u64,
    jobs: usize,
) -> Result<SweepSpec> {
    if collections == 0 || jobs == 0 {
        return Err(usage("--collections and --jobs must be at least 1"));
    }
    let mut spec = SweepSpec::new(m.map(|l| l.0.clone()).unwrap_or_else(|| default_m(n)), seed);
    spec.collections = collections;
    spec.jobs = jobs;
    Ok(spec)
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let n = data.header.n_qubits;
    let models = load_models(a.checkpoint.as_ref(), n)?;
    let mle = mle_config(&a.mle)?;
    let methods = build_methods(&a.method.0, &models, &mle)?;
    let spec = sweep_spec(a.m.as_ref(), n, a.collections, a.seed, a.jobs)?;
    let results = methods
        .iter()
        .map(|m| bures_sweep(&data.table, m, &spec))
        .collect::<qtomo_core::Result<Vec<_>>>()?;
    let canonical = format!(
        "sweep|{:?}|{:?}|{}|{}|{:?}",
        a.method.0, spec.m_values, a.collections, a.seed, mle
    );
    let mut meta = vec![("seed".to_string(), a.seed.to_string())];
    meta.extend(run_meta(&data, &models, &canonical));
    write_file(&a.out, &sweeps_to_csv(&results, &meta))?;
    if let Some(svg) = &a.svg {
        write_file(
            svg,
            &sweep_chart(&results, &format!("{n}-qubit mean Bures distance")),
        )?;
    }
    for r in &results {
        if let (Some(first), Some(last)) = (r.rows.first(), r.rows.last()) {
            println!(
                "{}: M={} {:.4} ... M={} {:.4}",
                r.method, first.m, first.mean_bures, last.m, last.mean_bures
            );
        }
    }
    Ok(())
}

fn psdstats(a: &PsdArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let n = data.header.n_qubits;
    let models = load_models(a.checkpoint.as_ref(), n)?;
    let mle = mle_config(&a.mle)?;
    let methods = build_methods(&a.method.0, &models, &mle)?;
    let spec = sweep_spec(a.m.as_ref(), n, a.collections, a.seed, a.jobs)?;
    let canonical = format!(
        "psdstats|{:?}|{:?}|{}|{}|{:?}",
        a.method.0, spec.m_values, a.collections, a.seed, mle
    );
    let mut out = String::new();
    out.push_str(&format!("# seed={}\n", a.seed));
    for (k, v) in run_meta(&data, &models, &canonical) {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(
        "method,n_qubits,M,lowest_mean,lowest_std,second_mean,second_std,n_samples,seed\n",
    );
    for method in &methods {
        for (m, recs) in reconstruct_sweep(&data.table, method, &spec)? {
            let s = psd_stats(&recs)?;
            out.push_str(&format!(
                "{},{n},{m},{},{},{},{},{},{}\n",
                method.label(),
                fmt_f64(s.lowest_mean),
                fmt_f64(s.lowest_std),
                fmt_f64(s.second_mean),
                fmt_f64(s.second_std),
                s.n,
                a.seed
            ));
        }
    }
    write_file(&a.out, &out)
}

fn errormap(a: &ErrorMapArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let n = data.header.n_qubits;
    let models = load_models(a.checkpoint.as_ref(), n)?;
    let mle = mle_config(&a.mle)?;
    let subsets = match &a.subsets {
        Some(s) => s.0.clone(),
        None if n == 1 => (1..=4)
            .flat_map(|i| (i + 1..=4).map(move |j| vec![i, j]))
            .collect(),
        None => return Err(usage("--subsets is required beyond one qubit")),
    };
    let reconstruct = |rec: &MeasurementRecord| -> qtomo_core::Result<ComplexMatrix> {
        match a.method {
            MethodName::Pinv => pinv_reconstruct(rec, n),
            MethodName::Mle => Ok(mle_reconstruct(rec, n, &mle)?.into_matrix()),
            MethodName::Analytic => {
                if n != 1 || rec.len() != 2 {
                    return Err(Error::UnsupportedCombination(
                        "the analytic reconstruction covers one qubit with two measurements".into(),
                    ));
                }
                analytic_1q(
                    (rec.subset[0], rec.subset[1]),
                    [rec.outcomes[0], rec.outcomes[1]],
                )
            }
            MethodName::Corrector => {
                let fitting = models.correctors.iter().filter(|c| c.m == rec.len());
                let model = fitting
                    .clone()
                    .find(|c| c.pool.contains(&rec.subset))
                    .or_else(|| fitting.clone().next())
                    .ok_or_else(|| {
                        Error::UnsupportedCombination(format!(
                            "no corrector checkpoint for M = {}",
                            rec.len()
                        ))
                    })?;
                model.reconstruct(rec)
            }
            MethodName::Lstm => Err(Error::UnsupportedCombination(
                "LSTM models choose their own measurements; error maps need fixed collections"
                    .into(),
            )),
        }
    };
    let maps = subsets
        .iter()
        .map(|s| error_map(&data.states, s, reconstruct))
        .collect::<qtomo_core::Result<Vec<_>>>()?;
    let canonical = format!("errormap|{:?}|{:?}|{:?}", a.method, subsets, mle);
    let mut out = String::new();
    out.push_str(&format!("# method={:?}\n", a.method).to_lowercase());
    for (k, v) in run_meta(&data, &models, &canonical) {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&error_maps_to_csv(&maps));
    write_file(&a.out, &out)?;
    println!("wrote {} error maps to {}", maps.len(), a.out.display());
    Ok(())
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let bytes = std::fs::read(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
    if bytes.starts_with(dataset::MAGIC) {
        let h = dataset::read_header(&bytes)?;
        println!("dataset {}", a.path.display());
        println!("  version   {}", h.version);
        println!("  n_qubits  {}", h.n_qubits);
        println!("  count     {}", h.count);
        println!("  crc32     {:08x}", h.crc);
    } else if bytes.starts_with(checkpoint::MAGIC) {
        let ck = Checkpoint::from_bytes(&bytes)?;
        println!("checkpoint {}", a.path.display());
        println!("  kind        {}", ck.kind);
        println!("  parameters  {}", ck.weights.len());
        let meta: BTreeMap<_, _> = ck.meta.iter().collect();
        for (k, v) in meta {
            println!("  {k} = {v}");
        }
        for s in ck.weights.specs() {
            println!("  tensor {} {}x{}", s.name, s.rows, s.cols);
        }
    } else {
        return Err(Error::Format(format!(
            "{} is neither a dataset nor a checkpoint",
            a.path.display()
        ))
        .into());
    }
    Ok(())
}
