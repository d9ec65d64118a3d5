use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nqst_core::io::{self, Checkpoint};
use nqst_core::observables::{
    abs_sigma_z_magnetization, renyi_s2, sigma_x_magnetization, sigma_z_magnetization, tfim_energy,
};
use nqst_core::oracle::{
    born_sample, random_complex_state, rotated_measurement_dataset, tfim_ground_state,
};
use nqst_core::training::{
    fit_complex, fit_positive, init_complex, init_positive, metric_callback,
};
use nqst_core::{
    default_gate_registry, fidelity, kl_divergence, kl_multibasis, rng, BasisAssignment, Callback,
    Error, HilbertSpace, MetricEvaluator, Region, SampleBatch, TfimSpec, TrainingConfig,
    TrainingDataset, Wavefunction,
};
use serde_json::{json, Value};

use crate::args::{
    Evaluate, GenQubits, GenTfim, ModelKind, ObservableKind, Observe, Sample, Train,
};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const OUT_DIR_ENV: &str = "NQST_OUT_DIR";

pub const SAMPLES_FILE: &str = "samples.txt";
pub const PSI_FILE: &str = "psi.txt";
pub const TRAIN_BASES_FILE: &str = "train_bases.txt";
pub const BASES_FILE: &str = "bases.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";

fn out_dir(flag: Option<&PathBuf>) -> Result<PathBuf> {
    let dir = match flag {
        Some(dir) => dir.clone(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "no output location: pass --out or set {OUT_DIR_ENV}"
                ))
                .into())
            }
        },
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn two_qubit_bases() -> Vec<BasisAssignment> {
    ["Z Z", "X Z", "Z X", "Y Z", "Z Y"]
        .iter()
        .map(|s| s.parse().expect("valid basis"))
        .collect()
}

fn print_json(value: &Value, out: Option<&PathBuf>) -> Result<()> {
    let line = serde_json::to_string(value)?;
    println!("{line}");
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, format!("{line}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Manifest path for a command whose output is a single file.
fn sidecar_manifest(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    file.with_file_name(name)
}

pub fn gen_tfim(args: &GenTfim) -> Result<()> {
    let dir = out_dir(args.out.as_ref())?;
    let spec = TfimSpec::new(args.n, args.j, args.h)?;
    let (energy, target) = tfim_ground_state(&spec)?;
    let samples = born_sample(&target, args.samples, &mut rng::seeded(args.seed))?;

    let samples_path = dir.join(SAMPLES_FILE);
    let psi_path = dir.join(PSI_FILE);
    io::save_samples(&samples_path, &samples)?;
    io::save_target_psi(&psi_path, &target)?;

    let mut manifest = RunManifest::new("gen-data tfim", Some(args.seed));
    manifest
        .flag("n", args.n)
        .flag("j", args.j)
        .flag("h", args.h)
        .flag("samples", args.samples)
        .flag("ground_state_energy", energy)
        .output(&samples_path)
        .output(&psi_path);
    manifest.write(&dir.join(MANIFEST_FILE))
}

pub fn gen_qubits(args: &GenQubits) -> Result<()> {
    let dir = out_dir(args.out.as_ref())?;
    let bases = match &args.bases_file {
        Some(path) => io::load_bases_list(path)?,
        None if args.n == 2 => two_qubit_bases(),
        None => bail!(Error::InvalidArgument(
            "--bases-file is required unless --n is 2".into()
        )),
    };
    if bases[0].len() != args.n {
        bail!(Error::InvalidArgument(format!(
            "bases have {} sites but --n is {}",
            bases[0].len(),
            args.n
        )));
    }
    let registry = default_gate_registry();
    for b in &bases {
        for label in b.labels() {
            registry.get(label)?;
        }
    }
    let mut r = rng::seeded(args.seed);
    let target = random_complex_state(args.n, &mut r)?;
    let data =
        rotated_measurement_dataset(&target, &registry, &bases, args.samples_per_basis, &mut r)?;

    let paths = [SAMPLES_FILE, PSI_FILE, TRAIN_BASES_FILE, BASES_FILE].map(|f| dir.join(f));
    io::save_samples(&paths[0], data.samples())?;
    io::save_target_psi(&paths[1], &target)?;
    let per_sample: Vec<BasisAssignment> = (0..data.len()).map(|i| data.basis(i)).collect();
    io::save_bases(&paths[2], &per_sample)?;
    io::save_bases(&paths[3], &bases)?;

    let mut manifest = RunManifest::new("gen-data qubits", Some(args.seed));
    manifest
        .flag("n", args.n)
        .flag("samples_per_basis", args.samples_per_basis)
        .flag(
            "bases",
            bases.iter().map(ToString::to_string).collect::<Vec<_>>(),
        );
    if let Some(path) = &args.bases_file {
        manifest.input(path);
    }
    for p in &paths {
        manifest.output(p);
    }
    manifest.write(&dir.join(MANIFEST_FILE))
}

fn training_config(args: &Train) -> TrainingConfig {
    let defaults = match args.kind {
        ModelKind::Positive => TrainingConfig::positive_defaults(),
        ModelKind::Complex => TrainingConfig::complex_defaults(),
    };
    TrainingConfig {
        epochs: args.epochs.unwrap_or(defaults.epochs),
        pos_batch_size: args.pos_batch.unwrap_or(defaults.pos_batch_size),
        neg_batch_size: args.neg_batch.unwrap_or(defaults.neg_batch_size),
        learning_rate: args.lr.unwrap_or(defaults.learning_rate),
        k: args.k.unwrap_or(defaults.k),
        seed: args.seed,
        log_every: args.log_every,
    }
}

pub fn train(args: &Train) -> Result<()> {
    let dir = out_dir(args.out.as_ref())?;
    let config = training_config(args);
    config.validate()?;
    let samples = io::load_samples(&args.data)?;
    let n = samples.width();
    let space = || HilbertSpace::new(n);
    let target = args
        .psi
        .as_ref()
        .map(|p| io::load_target_psi(p, n))
        .transpose()?;
    let registry = default_gate_registry();

    let mut manifest = RunManifest::new(
        match args.kind {
            ModelKind::Positive => "train positive",
            ModelKind::Complex => "train complex",
        },
        Some(args.seed),
    );
    manifest.input(&args.data);

    let (model, history) = match args.kind {
        ModelKind::Positive => {
            if args.bases.is_some() || args.bases_list.is_some() {
                bail!(Error::InvalidArgument(
                    "--bases and --bases-list apply to complex models only".into()
                ));
            }
            let hidden = args.hidden.unwrap_or(10);
            manifest.flag("hidden", hidden);
            let dataset = TrainingDataset::reference(samples);
            let mut model = init_positive(n, hidden, args.seed)?;
            let mut evaluator = target
                .clone()
                .map(|t| {
                    Ok::<_, Error>(
                        metric_callback(args.log_every, t, space()?, None)?.verbose(args.verbose),
                    )
                })
                .transpose()?;
            let mut callbacks: Vec<&mut dyn Callback> = Vec::new();
            if let Some(e) = evaluator.as_mut() {
                callbacks.push(e);
            }
            fit_positive(&mut model, &dataset, &config, &mut callbacks)?;
            (model, evaluator.map(MetricEvaluator::into_history))
        }
        ModelKind::Complex => {
            let Some(bases_path) = &args.bases else {
                bail!(Error::MissingBasis(0));
            };
            manifest.input(bases_path);
            let (per_sample, distinct) = match &args.bases_list {
                Some(list) => {
                    manifest.input(list);
                    io::load_bases(bases_path, list, samples.len())?
                }
                None => {
                    let per_sample = io::load_bases_list(bases_path)?;
                    if per_sample.len() != samples.len() {
                        bail!(Error::Parse {
                            path: bases_path.clone(),
                            line: 0,
                            message: format!(
                                "{} basis records for {} samples",
                                per_sample.len(),
                                samples.len()
                            ),
                        });
                    }
                    let distinct = TrainingDataset::new(samples.clone(), Some(per_sample.clone()))?
                        .distinct_bases();
                    (per_sample, distinct)
                }
            };
            let hidden = args.hidden.unwrap_or(n);
            manifest.flag("hidden", hidden);
            let dataset = TrainingDataset::new(samples, Some(per_sample))?;
            let mut model = init_complex(n, hidden, args.seed)?;
            let mut evaluator = target
                .clone()
                .map(|t| {
                    Ok::<_, Error>(
                        metric_callback(
                            args.log_every,
                            t,
                            space()?,
                            Some((registry.clone(), distinct.clone())),
                        )?
                        .verbose(args.verbose),
                    )
                })
                .transpose()?;
            let mut callbacks: Vec<&mut dyn Callback> = Vec::new();
            if let Some(e) = evaluator.as_mut() {
                callbacks.push(e);
            }
            fit_complex(&mut model, &dataset, &registry, &config, &mut callbacks)?;
            (model, evaluator.map(MetricEvaluator::into_history))
        }
    };

    let mut metadata = BTreeMap::new();
    metadata.insert(
        "training_config".to_string(),
        serde_json::to_value(&config)?,
    );
    metadata.insert("rng_algorithm".to_string(), json!(rng::RNG_ALGORITHM));
    metadata.insert("data".to_string(), json!(args.data));
    if let Some(history) = &history {
        metadata.insert("history".to_string(), serde_json::to_value(history)?);
    }
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    io::save_checkpoint(&checkpoint_path, &Checkpoint { model, metadata })?;
    manifest.output(&checkpoint_path);

    if let Some(history) = &history {
        let metrics_path = dir.join(METRICS_FILE);
        std::fs::write(&metrics_path, history.to_csv())
            .with_context(|| format!("writing {}", metrics_path.display()))?;
        manifest.output(&metrics_path);
    }
    if let Some(psi) = &args.psi {
        manifest.input(psi);
    }
    manifest
        .flag("epochs", config.epochs)
        .flag("pos_batch", config.pos_batch_size)
        .flag("neg_batch", config.neg_batch_size)
        .flag("lr", config.learning_rate)
        .flag("k", config.k)
        .flag("log_every", config.log_every);
    manifest.write(&dir.join(MANIFEST_FILE))
}

fn draw_samples(model: &Wavefunction, num: usize, k: usize, seed: u64) -> Result<SampleBatch> {
    Ok(model
        .amplitude()
        .sample(num, k, &mut rng::seeded(seed), None)?)
}

pub fn sample(args: &Sample) -> Result<()> {
    let out = match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            path.clone()
        }
        None => out_dir(None)?.join(SAMPLES_FILE),
    };
    let checkpoint = io::load_checkpoint(&args.model)?;
    let samples = draw_samples(&checkpoint.model, args.num, args.k, args.seed)?;
    io::save_samples(&out, &samples)?;

    let mut manifest = RunManifest::new("sample", Some(args.seed));
    manifest
        .flag("num", args.num)
        .flag("k", args.k)
        .input(&args.model)
        .output(&out);
    manifest.write(&sidecar_manifest(&out))
}

pub fn observe(args: &Observe) -> Result<()> {
    let checkpoint = io::load_checkpoint(&args.model)?;
    let model = &checkpoint.model;
    let n = model.n_visible();
    let region = match (args.obs, &args.region) {
        (ObservableKind::Renyi, None) => {
            bail!(Error::InvalidRegion("renyi needs --region".into()))
        }
        (_, Some(spec)) => Some(Region::parse(spec, n)?),
        (_, None) => None,
    };
    let coupling = match args.obs {
        ObservableKind::Energy => match (args.j, args.h) {
            (Some(j), Some(h)) => Some((j, h)),
            _ => bail!(Error::InvalidArgument("energy needs --j and --h".into())),
        },
        _ => None,
    };
    let samples = draw_samples(model, args.num, args.k, args.seed)?;
    let estimate = match args.obs {
        ObservableKind::Sigmaz => sigma_z_magnetization(&samples)?,
        ObservableKind::AbsSigmaz => abs_sigma_z_magnetization(&samples)?,
        ObservableKind::Sigmax => sigma_x_magnetization(model, &samples)?,
        ObservableKind::Energy => {
            let (j, h) = coupling.expect("checked above");
            tfim_energy(model, &samples, j, h)?
        }
        ObservableKind::Renyi => {
            let region = region.as_ref().expect("checked above");
            let r = renyi_s2(model, &samples, region)?;
            let record = json!({
                "observable": args.obs.name(),
                "region": region.sites(),
                "mean": r.swap.mean,
                "variance": r.swap.variance,
                "std_error": r.swap.std_error,
                "n": r.swap.num_samples,
                "s2": r.s2,
                "s2_error": r.s2_error,
            });
            return print_json(&record, args.out.as_ref());
        }
    };
    let record = json!({
        "observable": args.obs.name(),
        "mean": estimate.mean,
        "variance": estimate.variance,
        "std_error": estimate.std_error,
        "n": estimate.num_samples,
    });
    print_json(&record, args.out.as_ref())
}

pub fn evaluate(args: &Evaluate) -> Result<()> {
    let checkpoint = io::load_checkpoint(&args.model)?;
    let model = &checkpoint.model;
    let n = model.n_visible();
    let space = HilbertSpace::new(n)?;
    let target = io::load_target_psi(&args.psi, n)?;
    let fid = fidelity(model, &target, &space)?;
    let (kl, bases) = match &args.bases_list {
        Some(path) => {
            let bases = io::load_bases_list(path)?;
            let registry = default_gate_registry();
            let kl = kl_multibasis(model, &registry, &target, &bases, &space)?;
            (
                kl,
                Some(bases.iter().map(ToString::to_string).collect::<Vec<_>>()),
            )
        }
        None => (kl_divergence(model, &target, &space)?, None),
    };
    let record = json!({
        "fidelity": fid,
        "kl": kl,
        "kl_bases": bases,
    });
    print_json(&record, args.out.as_ref())
}
