//! Subcommand implementations behind the `eqeinv` binary.
//!
//! Each command validates its inputs, takes the output-directory lock,
//! writes its artifacts plus the effective config, and reports errors with
//! stable exit codes: 1 usage/config, 2 data, 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, ConfigMap};
use crate::dataset::{self, load_split, rasterize, DatasetError, DatasetManifest, GenerateConfig};
use crate::eval::{self, EvalError};
use crate::hyperopt::{self, HyperDim, HyperSpace, HyperoptError, Scale, Trial, TrialStatus};
use crate::materials::{load_materials_dir, MaterialError, SharedDispersion};
use crate::nn::{
    self, io as model_io, Architecture, NnError, RegressionData, Tensor4,
};
use crate::sampling::{SamplingError, ThicknessBox};
use crate::tmm::{self, EqeCurve, Layer, LayerStack, TmmError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Tmm(#[from] TmmError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Hyperopt(#[from] HyperoptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output directory {0} is locked by another run (remove the .eqeinv.lock file if stale)")]
    Locked(PathBuf),
}

impl CliError {
    /// 1 usage/config error, 2 data error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Locked(_) => 1,
            CliError::Sampling(SamplingError::BadRequest(_) | SamplingError::BadBox(_)) => 1,
            CliError::Dataset(DatasetError::BadConfig(_)) => 1,
            CliError::Nn(NnError::BadConfig(_)) => 1,
            CliError::Hyperopt(HyperoptError::BadSpace(_) | HyperoptError::BadRequest(_)) => 1,
            CliError::Tmm(TmmError::NonFinite { .. } | TmmError::EnergyViolation { .. }) => 3,
            CliError::Dataset(DatasetError::Simulation { .. }) => 3,
            CliError::Nn(
                NnError::Diverged { .. }
                | NnError::NonFiniteActivation { .. }
                | NnError::NonFiniteGradient { .. },
            ) => 3,
            CliError::Hyperopt(HyperoptError::Surrogate(_) | HyperoptError::AllTrialsFailed(_)) => 3,
            _ => 2,
        }
    }
}

/// Exclusive lock on an output directory, released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out_dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;
        let path = out_dir.join(".eqeinv.lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                use std::io::Write;
                let _ = writeln!(file, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Locked(out_dir.to_path_buf()))
            }
            Err(source) => Err(CliError::Io { path, source }),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub struct MaterialLibrary {
    by_name: BTreeMap<String, SharedDispersion>,
    dir: PathBuf,
}

impl MaterialLibrary {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        Ok(Self {
            by_name: load_materials_dir(dir)?,
            dir: dir.to_path_buf(),
        })
    }

    pub fn get(&self, name: &str) -> Result<SharedDispersion, CliError> {
        self.by_name.get(name).cloned().ok_or_else(|| {
            CliError::Usage(format!(
                "material \"{name}\" not found in {} (available: {})",
                self.dir.display(),
                self.by_name.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn lookup_fn(&self) -> impl Fn(&str) -> Option<SharedDispersion> + '_ {
        |name| self.by_name.get(name).cloned()
    }
}

/// Sampling box plus a midpoint-thickness template stack for a run.
pub struct StackSetup {
    pub box_: ThicknessBox,
    pub template: LayerStack,
}

/// Build the box and template stack for the configured preset.
///
/// `transparent`: air / ITO NiO PerovHMv2 C60HM SnO2 ITO LiF / air,
/// dual-side, active PerovHMv2. `opaque`: air / ITO SnO2 Perovskite
/// Spiro-OMeTAD Gold / air, single-side, active Perovskite. `custom` reads
/// `stack.file` and takes its box bounds from `stack.lower_nm` /
/// `stack.upper_nm`.
pub fn stack_setup(config: &ConfigMap, materials: &MaterialLibrary) -> Result<StackSetup, CliError> {
    let preset = config.get("stack.preset");
    let (box_, layer_materials, active, dual_side) = match preset {
        "transparent" => (
            ThicknessBox::transparent(),
            vec!["ito", "nio", "perovhmv2", "c60hm", "sno2", "ito", "lif"],
            2usize,
            true,
        ),
        "opaque" => (
            ThicknessBox::opaque(),
            vec!["ito", "sno2", "perovskite", "spiro_ometad", "gold"],
            2usize,
            false,
        ),
        "custom" => {
            let file = config.get("stack.file");
            if file.is_empty() {
                return Err(CliError::Usage(
                    "stack.preset = custom requires stack.file".into(),
                ));
            }
            let stack = tmm::load_stack_file(Path::new(file), &materials.lookup_fn())?;
            let lower = config.get_f64_list("stack.lower_nm")?;
            let upper = config.get_f64_list("stack.upper_nm")?;
            if lower.len() != stack.layers().len() || upper.len() != stack.layers().len() {
                return Err(CliError::Usage(format!(
                    "custom stacks need stack.lower_nm and stack.upper_nm with one value per layer ({} layers)",
                    stack.layers().len()
                )));
            }
            let mut names = Vec::new();
            let mut seen: BTreeMap<String, usize> = BTreeMap::new();
            for layer in stack.layers() {
                let base = layer.material.name().to_string();
                let n = seen.entry(base.clone()).or_insert(0);
                *n += 1;
                names.push(if *n == 1 { base } else { format!("{base}_{n}") });
            }
            let box_ = ThicknessBox::new(names, lower, upper)?;
            return Ok(StackSetup {
                template: stack,
                box_,
            });
        }
        other => {
            return Err(CliError::Usage(format!(
                "stack.preset must be transparent, opaque, or custom; got \"{other}\""
            )))
        }
    };
    let midpoint: Vec<f64> = box_
        .lower_nm()
        .iter()
        .zip(box_.upper_nm())
        .map(|(&lo, &hi)| 0.5 * (lo + hi))
        .collect();
    let air = materials.get("air")?;
    let layers = layer_materials
        .iter()
        .zip(&midpoint)
        .map(|(name, &d)| Ok(Layer::new(materials.get(name)?, d)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let template = LayerStack::new(layers, Arc::clone(&air), air, active, dual_side)?;
    Ok(StackSetup { box_, template })
}

/// `generate`: sample, simulate, rasterize, and persist a dataset.
pub fn cmd_generate(config: &ConfigMap, out_dir: &Path) -> Result<DatasetManifest, CliError> {
    let _lock = RunLock::acquire(out_dir)?;
    let materials = MaterialLibrary::load(Path::new(config.get("paths.materials_dir")))?;
    let setup = stack_setup(config, &materials)?;
    let gen = GenerateConfig {
        method: config.sampler_method()?,
        seed_or_skip: config.get_u64("sampler.seed_or_skip")?,
        n_total: config.get_usize("sampler.n_total")?,
        split_fractions: config.split_fractions()?,
        width: config.get_usize("image.width")?,
        height: config.get_usize("image.height")?,
        grid: config.wavelength_grid()?,
    };
    let manifest = dataset::generate(&setup.box_, &setup.template, &gen, out_dir)?;
    config.write_effective(out_dir)?;
    println!(
        "generated {} records ({}/{}/{}) into {}",
        gen.n_total,
        manifest.split_counts.0,
        manifest.split_counts.1,
        manifest.split_counts.2,
        out_dir.display()
    );
    Ok(manifest)
}

/// `train`: fit a model on a generated dataset, writing the model file and
/// a per-epoch history CSV.
pub fn cmd_train(config: &ConfigMap, dataset_dir: &Path, out_dir: &Path) -> Result<PathBuf, CliError> {
    let _lock = RunLock::acquire(out_dir)?;
    let manifest = DatasetManifest::load(dataset_dir)?;
    let train_split = load_split(dataset_dir, &manifest, "train")?;
    let val_split = load_split(dataset_dir, &manifest, "val")?;
    let train_data = RegressionData::from_split(&train_split)?;
    let val_data = RegressionData::from_split(&val_split)?;

    // Dataset geometry is authoritative for the input layer.
    let mut net = config.network_config(manifest.channels, manifest.box_.dim())?;
    net.input_height = manifest.height;
    net.input_width = manifest.width;
    let train_cfg = config.train_config()?;

    let model = nn::train(&net, &train_cfg, &train_data, &val_data, &manifest.box_)?;
    let model_path = out_dir.join("model.pscnn");
    model_io::save_model(&model_path, &model)?;
    write_history_csv(&out_dir.join("history.csv"), &model.history)?;
    config.write_effective(out_dir)?;
    let last = model.history.last().expect("history is nonempty");
    println!(
        "trained {} epochs; final val overall RMSE {:.3} nm ({:.5} normalized); model at {}",
        model.history.len(),
        last.val_overall_rmse_nm,
        last.val_overall_rmse_normalized,
        model_path.display()
    );
    Ok(model_path)
}

fn write_history_csv(path: &Path, history: &[nn::EpochStats]) -> Result<(), CliError> {
    let mut text =
        String::from("epoch,learning_rate,train_mse,val_overall_rmse_normalized,val_overall_rmse_nm\n");
    for e in history {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            e.epoch, e.learning_rate, e.train_mse, e.val_overall_rmse_normalized, e.val_overall_rmse_nm
        );
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const HYPER_NAMES: [&str; 7] = [
    "section_depth",
    "initial_learning_rate",
    "momentum",
    "mini_batch_size",
    "lr_drop_factor",
    "lr_drop_period",
    "l2_coefficient",
];

fn hyperspace_from_config(config: &ConfigMap, freeze: &[&str]) -> Result<HyperSpace, CliError> {
    let mut dims = Vec::new();
    for name in HYPER_NAMES {
        if freeze.contains(&name) {
            continue;
        }
        let (lo, hi) = config.get_range(&format!("hyperspace.{name}"))?;
        let dim = match name {
            "section_depth" | "mini_batch_size" | "lr_drop_period" => HyperDim::integer(name, lo, hi),
            "initial_learning_rate" | "l2_coefficient" => {
                HyperDim::continuous(name, lo, hi, Scale::Log)
            }
            _ => HyperDim::continuous(name, lo, hi, Scale::Linear),
        };
        dims.push(dim);
    }
    Ok(HyperSpace::new(dims)?)
}

/// `tune`: Bayesian optimization of the seven training hyperparameters on a
/// dataset, with an append-only trial log that supports resuming.
pub fn cmd_tune(
    config: &ConfigMap,
    dataset_dir: &Path,
    budget: usize,
    out_dir: &Path,
) -> Result<Option<Trial>, CliError> {
    let _lock = RunLock::acquire(out_dir)?;
    let manifest = DatasetManifest::load(dataset_dir)?;
    let train_split = load_split(dataset_dir, &manifest, "train")?;
    let val_split = load_split(dataset_dir, &manifest, "val")?;
    let train_data = RegressionData::from_split(&train_split)?;
    let val_data = RegressionData::from_split(&val_split)?;

    let freeze_raw = config.get("tune.freeze").to_string();
    let freeze: Vec<&str> = freeze_raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for f in &freeze {
        if !HYPER_NAMES.contains(f) {
            return Err(CliError::Usage(format!(
                "tune.freeze names unknown hyperparameter \"{f}\""
            )));
        }
    }
    let space = hyperspace_from_config(config, &freeze)?;
    let base_train = config.train_config()?;
    let epoch_cap = config.get_usize("tune.epoch_cap")?;
    let timeout = match config.get_f64("tune.timeout_secs")? {
        t if t > 0.0 => Some(t),
        _ => None,
    };
    let seed = config.get_u64("run.seed")?;

    let log_path = out_dir.join("trials.csv");
    let existing = if log_path.exists() {
        read_trial_log(&log_path, &space, &freeze, config)?
    } else {
        let mut header = String::from("trial");
        for name in HYPER_NAMES {
            header.push(',');
            header.push_str(name);
        }
        header.push_str(",objective_nm,status,seconds\n");
        std::fs::write(&log_path, header).map_err(|source| CliError::Io {
            path: log_path.clone(),
            source,
        })?;
        Vec::new()
    };
    if !existing.is_empty() {
        println!("resuming from {} completed trials", existing.len());
    }

    // Frozen dimensions take their [train] values.
    let full_vector = |proposal: &[f64]| -> Vec<f64> {
        let mut full = Vec::with_capacity(HYPER_NAMES.len());
        let mut it = proposal.iter();
        for name in HYPER_NAMES {
            if freeze.contains(&name) {
                full.push(match name {
                    "section_depth" => match config.network_config(1, 1) {
                        Ok(cfg) => match cfg.arch {
                            Architecture::Block { section_depth, .. } => section_depth as f64,
                            Architecture::First => 1.0,
                        },
                        Err(_) => 1.0,
                    },
                    "initial_learning_rate" => base_train.initial_learning_rate,
                    "momentum" => base_train.momentum,
                    "mini_batch_size" => base_train.mini_batch_size as f64,
                    "lr_drop_factor" => base_train.lr_drop_factor,
                    "lr_drop_period" => base_train.lr_drop_period as f64,
                    "l2_coefficient" => base_train.l2_coefficient,
                    _ => unreachable!(),
                });
            } else {
                full.push(*it.next().expect("proposal covers unfrozen dims"));
            }
        }
        full
    };

    let best_model_path = out_dir.join("best_model.pscnn");
    let mut best_objective = existing
        .iter()
        .filter_map(|t| t.objective)
        .fold(f64::INFINITY, f64::min);
    let net_template = {
        let mut net = config.network_config(manifest.channels, manifest.box_.dim())?;
        net.input_height = manifest.height;
        net.input_width = manifest.width;
        net
    };
    let box_ = manifest.box_.clone();
    let mut evaluator = |proposal: &[f64]| -> Result<f64, String> {
        let full = full_vector(proposal);
        let mut net = net_template.clone();
        net.arch = match net.arch {
            Architecture::Block { pools, filters, .. } => Architecture::Block {
                section_depth: full[0] as usize,
                pools,
                filters,
            },
            Architecture::First => Architecture::First,
        };
        let cfg = nn::TrainConfig {
            initial_learning_rate: full[1],
            momentum: full[2],
            mini_batch_size: (full[3] as usize).min(train_data.len()),
            lr_drop_factor: full[4],
            lr_drop_period: full[5] as usize,
            l2_coefficient: full[6],
            epochs: epoch_cap,
            seed,
        };
        let model = nn::train(&net, &cfg, &train_data, &val_data, &box_).map_err(|e| e.to_string())?;
        let objective = model.history.last().expect("history nonempty").val_overall_rmse_nm;
        if objective < best_objective {
            best_objective = objective;
            model_io::save_model(&best_model_path, &model).map_err(|e| e.to_string())?;
        }
        Ok(objective)
    };

    let log_for_cb = log_path.clone();
    let mut on_trial = |trial: &Trial| {
        let full = full_vector(&trial.params);
        let mut line = format!("{}", trial.index);
        for v in &full {
            let _ = write!(line, ",{v}");
        }
        let _ = writeln!(
            line,
            ",{},{},{:.3}",
            trial.objective.map_or(String::from("nan"), |v| format!("{v}")),
            trial.status,
            trial.wall_seconds
        );
        if let Ok(mut existing_text) = std::fs::read_to_string(&log_for_cb) {
            existing_text.push_str(&line);
            let _ = std::fs::write(&log_for_cb, existing_text);
        }
        println!(
            "trial {:>3}: {} objective {} ({:.1}s)",
            trial.index,
            trial.status,
            trial
                .objective
                .map_or(String::from("-"), |v| format!("{v:.3} nm")),
            trial.wall_seconds
        );
    };

    let result = hyperopt::tune(&space, budget, &mut evaluator, seed, existing, timeout, &mut on_trial)?;
    config.write_effective(out_dir)?;
    let best_text = format!(
        "best trial: {}\nobjective_nm = {}\nmodel = {}\n",
        result.best.index,
        result.best.objective.unwrap_or(f64::NAN),
        best_model_path.display()
    );
    std::fs::write(out_dir.join("best_trial.txt"), best_text).map_err(|source| CliError::Io {
        path: out_dir.join("best_trial.txt"),
        source,
    })?;
    println!(
        "best trial {} with validation overall RMSE {:.3} nm; best model at {}",
        result.best.index,
        result.best.objective.unwrap_or(f64::NAN),
        best_model_path.display()
    );
    Ok(Some(result.best))
}

fn read_trial_log(
    path: &Path,
    space: &HyperSpace,
    freeze: &[&str],
    _config: &ConfigMap,
) -> Result<Vec<Trial>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, message: String| {
        CliError::Usage(format!("{}:{line}: {message}", path.display()))
    };
    let mut trials = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + HYPER_NAMES.len() + 2 {
            return Err(bad(idx + 1, format!("expected {} fields", 4 + HYPER_NAMES.len())));
        }
        let index: usize = fields[0].parse().map_err(|e| bad(idx + 1, format!("{e}")))?;
        // Keep only the unfrozen dimensions, in space order.
        let mut params = Vec::new();
        for (i, name) in HYPER_NAMES.iter().enumerate() {
            if !freeze.contains(name) {
                params.push(
                    fields[1 + i]
                        .parse::<f64>()
                        .map_err(|e| bad(idx + 1, format!("{e}")))?,
                );
            }
        }
        if params.len() != space.len() {
            return Err(bad(idx + 1, "trial log does not match the frozen dimensions".into()));
        }
        let status = match fields[2 + HYPER_NAMES.len()] {
            "ok" => TrialStatus::Ok,
            "diverged" => TrialStatus::Diverged,
            "timeout" => TrialStatus::Timeout,
            other => return Err(bad(idx + 1, format!("unknown status \"{other}\""))),
        };
        let objective = match fields[1 + HYPER_NAMES.len()] {
            "nan" => None,
            v => Some(v.parse::<f64>().map_err(|e| bad(idx + 1, format!("{e}")))?),
        };
        trials.push(Trial {
            index,
            params,
            objective: if status == TrialStatus::Ok { objective } else { None },
            status,
            wall_seconds: fields[3 + HYPER_NAMES.len()].parse().unwrap_or(0.0),
        });
    }
    Ok(trials)
}

/// `eval`: metrics of a model against one dataset split, with scatter
/// exports.
pub fn cmd_eval(
    config: &ConfigMap,
    model_path: &Path,
    dataset_dir: &Path,
    split: &str,
    out_dir: &Path,
) -> Result<eval::MetricsReport, CliError> {
    let _lock = RunLock::acquire(out_dir)?;
    let manifest = DatasetManifest::load(dataset_dir)?;
    let mut model = model_io::load_model(model_path)?;
    let split_data = load_split(dataset_dir, &manifest, split)?;
    let train_split = load_split(dataset_dir, &manifest, "train")?;
    let data = RegressionData::from_split(&split_data)?;
    let preds_nm = model.predict_batched(&data.inputs, 256)?;
    let report = eval::compute_report(
        manifest.box_.names(),
        &preds_nm,
        &split_data.thicknesses_nm,
        &train_split.thicknesses_nm,
    )?;
    print!("{}", report.to_text());
    std::fs::write(out_dir.join("metrics.txt"), report.to_text()).map_err(|source| CliError::Io {
        path: out_dir.join("metrics.txt"),
        source,
    })?;
    write_predictions_csv(
        &out_dir.join("predictions.csv"),
        manifest.box_.names(),
        &preds_nm,
    )?;
    eval::export_scatter(
        &preds_nm,
        &split_data.thicknesses_nm,
        manifest.box_.names(),
        Some(&manifest.box_),
        out_dir,
    )?;
    config.write_effective(out_dir)?;
    Ok(report)
}

fn write_predictions_csv(path: &Path, names: &[String], preds: &[Vec<f64>]) -> Result<(), CliError> {
    let mut text = names.join(",");
    text.push('\n');
    for row in preds {
        let formatted: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&formatted.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Input source for `predict`.
pub enum PredictInput {
    EqeCsv(PathBuf),
    StackFile(PathBuf),
}

/// `predict`: thicknesses for a measured EQE curve or a described stack.
pub fn cmd_predict(
    config: &ConfigMap,
    model_path: &Path,
    input: PredictInput,
) -> Result<Vec<(String, f64)>, CliError> {
    let mut model = model_io::load_model(model_path)?;
    let curve = match input {
        PredictInput::EqeCsv(path) => load_eqe_csv(&path)?,
        PredictInput::StackFile(path) => {
            let materials = MaterialLibrary::load(Path::new(config.get("paths.materials_dir")))?;
            let stack = tmm::load_stack_file(&path, &materials.lookup_fn())?;
            tmm::compute_eqe(&stack, &config.wavelength_grid()?, stack.dual_side())?
        }
    };
    let net = &model.network.config;
    if curve.channel_count() != net.input_channels {
        return Err(CliError::Usage(format!(
            "model expects {} EQE channel(s) but the input carries {}",
            net.input_channels,
            curve.channel_count()
        )));
    }
    let image = rasterize(&curve, net.input_width, net.input_height)?;
    let tensor = Tensor4::from_data(
        1,
        image.channels,
        image.height,
        image.width,
        image.data.iter().map(|&v| v as f64).collect(),
    );
    let preds = model.predict(&tensor)?;
    let names = model.box_.names().to_vec();
    let result: Vec<(String, f64)> = names.into_iter().zip(preds[0].clone()).collect();
    for (name, value) in &result {
        println!("{name} {value}");
    }
    Ok(result)
}

/// Parse an EQE CSV: header `wavelength_nm,forward[,reverse]`, wavelengths
/// strictly increasing from 300 to 800 nm.
pub fn load_eqe_csv(path: &Path) -> Result<EqeCurve, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, message: String| {
        CliError::Usage(format!("{}:{line}: {message}", path.display()))
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let has_reverse = match header.trim() {
        "wavelength_nm,forward" => false,
        "wavelength_nm,forward,reverse" => true,
        other => {
            return Err(bad(
                1,
                format!(
                    "expected header \"wavelength_nm,forward[,reverse]\", got \"{other}\""
                ),
            ))
        }
    };
    let mut wavelengths = Vec::new();
    let mut forward = Vec::new();
    let mut reverse = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if has_reverse { 3 } else { 2 };
        if fields.len() != expected {
            return Err(bad(idx + 1, format!("expected {expected} fields")));
        }
        let parse = |f: &str| f.parse::<f64>().map_err(|e| bad(idx + 1, format!("{e}")));
        wavelengths.push(parse(fields[0])?);
        forward.push(parse(fields[1])?);
        if has_reverse {
            reverse.push(parse(fields[2])?);
        }
    }
    Ok(EqeCurve::new(
        wavelengths,
        forward,
        has_reverse.then_some(reverse),
    )?)
}

/// Write one record's simulated EQE back out in the `predict` CSV schema.
pub fn write_eqe_csv(path: &Path, curve: &EqeCurve) -> Result<(), CliError> {
    let mut text = String::from(match curve.reverse() {
        Some(_) => "wavelength_nm,forward,reverse\n",
        None => "wavelength_nm,forward\n",
    });
    for (i, &w) in curve.wavelengths_nm().iter().enumerate() {
        match curve.reverse() {
            Some(rev) => {
                let _ = writeln!(text, "{w},{},{}", curve.forward()[i], rev[i]);
            }
            None => {
                let _ = writeln!(text, "{w},{}", curve.forward()[i]);
            }
        }
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
