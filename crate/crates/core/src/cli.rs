//! The `stm` command-line tool.
//!
//! Every command prints a JSON report on stdout that embeds the fully resolved
//! configuration. Settings come from built-in defaults, then an optional TOML
//! file (`--config`), then flags.
//!
//! Exit status: 0 on success, 2 for usage errors, 3 for unreadable or
//! inconsistent inputs, 4 when training fails.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::FactorConfig;
use crate::data::{block_split, ingest_dataset, DataPaths, Dataset, FeatureScaling, SplitMasks};
use crate::error::{Error, Result};
use crate::eval::{
    cold_start_protocol, maps, profile_sparsity, topic_top_items, ColdStartConfig, RankingReport, SPARSITY_EPS,
};
use crate::hyper::Hyperparams;
use crate::persist::{ModelKind, SplitRecord, TrainedModel};
use crate::synth::{generate_planted, write_planted, SynthConfig};

pub const DATA_DIR_ENV: &str = "STM_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "stm", version, about = "Sparse topic models for recommendation")]
struct Cli {
    /// TOML file with [hyper], [factor], [split] and [cold_start] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a dataset, print its summary.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Generate a planted-model dataset.
    Synth {
        #[arg(long, default_value = "small")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write features in the binary format instead of CSV.
        #[arg(long)]
        binary_features: bool,
    },
    /// Fit a model and write the model file and its objective trace.
    Train {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Trace CSV (default: model path with `.trace.csv` appended).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Train on every rating instead of the split's training block.
        #[arg(long)]
        all_train: bool,
        #[command(flatten)]
        settings: SettingArgs,
    },
    /// Rank the held-out block with a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Also write the P-PS curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cold-start experiment over shrinking training item sets.
    Coldstart {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        unseen_fraction: Option<f64>,
        /// Comma-separated, e.g. 1.0,0.8,0.6
        #[arg(long, value_delimiter = ',')]
        train_fractions: Option<Vec<f64>>,
        #[command(flatten)]
        settings: SettingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several model kinds on one split and compare their mAPS.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated kinds (default: all five).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[command(flatten)]
        settings: SettingArgs,
        /// Directory for one P-PS curve CSV per model.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List each topic's top items from a saved topic model.
    InspectTopics {
        #[arg(long)]
        model: PathBuf,
        /// Dataset for item labels; indices are printed without it.
        #[arg(long, env = DATA_DIR_ENV)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long, env = DATA_DIR_ENV)]
    data: PathBuf,
    /// Keep feature values as read instead of standardizing each dimension.
    #[arg(long)]
    raw_features: bool,
}

#[derive(Args, Debug, Default)]
struct HyperArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda_r: Option<f64>,
    #[arg(long)]
    lambda_u: Option<f64>,
    #[arg(long)]
    lambda_v: Option<f64>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_z: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct FactorArgs {
    /// Latent dimension of PMF and SoRec.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda_social: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SplitArgs {
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    user_fraction: Option<f64>,
    #[arg(long)]
    item_fraction: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SettingArgs {
    /// Seeds initialization, the split and the cold-start permutation unless
    /// a more specific seed is set.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    factor: FactorArgs,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub seed: u64,
    pub user_fraction: f64,
    pub item_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings {
            seed: 0,
            user_fraction: 0.5,
            item_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartSettings {
    pub unseen_fraction: f64,
    pub train_fractions: Vec<f64>,
}

impl Default for ColdStartSettings {
    fn default() -> Self {
        let d = ColdStartConfig::default();
        ColdStartSettings {
            unseen_fraction: d.unseen_fraction,
            train_fractions: d.train_fractions,
        }
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub hyper: Hyperparams,
    pub factor: FactorConfig,
    pub split: SplitSettings,
    pub cold_start: ColdStartSettings,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    fn apply(&mut self, args: &SettingArgs) {
        if let Some(seed) = args.seed {
            self.hyper.seed = seed;
            self.factor.seed = seed;
            self.split.seed = seed;
        }
        let h = &args.hyper;
        set(&mut self.hyper.k, h.k);
        set(&mut self.hyper.lambda_r, h.lambda_r);
        set(&mut self.hyper.lambda_u, h.lambda_u);
        set(&mut self.hyper.lambda_v, h.lambda_v);
        set(&mut self.hyper.lambda_s, h.lambda_s);
        set(&mut self.hyper.lambda_z, h.lambda_z);
        set(&mut self.hyper.max_iters, h.max_iters);
        set(&mut self.hyper.tol, h.tol);
        let f = &args.factor;
        set(&mut self.factor.dim, f.dim);
        set(&mut self.factor.reg, f.reg);
        set(&mut self.factor.lr, f.lr);
        set(&mut self.factor.epochs, f.epochs);
        set(&mut self.factor.lambda_social, f.lambda_social);
        self.apply_split(&args.split);
    }

    fn apply_split(&mut self, s: &SplitArgs) {
        set(&mut self.split.seed, s.split_seed);
        set(&mut self.split.user_fraction, s.user_fraction);
        set(&mut self.split.item_fraction, s.item_fraction);
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// The resolved configuration echoed in every report.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_scaling: Option<FeatureScaling>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyper: Option<Hyperparams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<FactorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSettings>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<PathBuf>,
    pub threads: usize,
}

impl RunConfig {
    fn new(command: &'static str) -> Self {
        RunConfig {
            command,
            data: None,
            feature_scaling: None,
            models: Vec::new(),
            hyper: None,
            factor: None,
            split: None,
            outputs: Vec::new(),
            threads: rayon::current_num_threads(),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Reports go to stdout, diagnostics to stderr.
pub fn run_command(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(report) => {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Argument(_) => 2,
        e if e.is_training_failure() => 4,
        _ => 3,
    }
}

fn dispatch(cli: Cli) -> Result<serde_json::Value> {
    let mut file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Ingest { data } => ingest(&data),
        Command::Synth {
            preset,
            out,
            seed,
            binary_features,
        } => synth(&preset, &out, seed, binary_features),
        Command::Train {
            model,
            data,
            out,
            trace,
            all_train,
            settings,
        } => {
            file.apply(&settings);
            train(&model, &data, &out, trace, all_train, &file)
        }
        Command::Eval {
            model,
            data,
            split,
            curve,
            out,
        } => eval(&model, &data, &split, &mut file, curve, out),
        Command::Coldstart {
            data,
            unseen_fraction,
            train_fractions,
            settings,
            out,
        } => {
            file.apply(&settings);
            set(&mut file.cold_start.unseen_fraction, unseen_fraction);
            if let Some(t) = train_fractions {
                file.cold_start.train_fractions = t;
            }
            coldstart(&data, &file, out)
        }
        Command::Compare {
            data,
            models,
            settings,
            curves,
            out,
        } => {
            file.apply(&settings);
            compare(&data, models, &file, curves, out)
        }
        Command::InspectTopics { model, data, top, out } => inspect_topics(&model, data.as_deref(), top, out),
    }
}

fn scaling(args: &DataArgs) -> FeatureScaling {
    if args.raw_features {
        FeatureScaling::Raw
    } else {
        FeatureScaling::Standardize
    }
}

fn load_data(args: &DataArgs, config: &mut RunConfig) -> Result<Dataset> {
    let paths = DataPaths::from_dir(&args.data)?;
    let data = ingest_dataset(&paths, scaling(args))?;
    config.data = Some(paths);
    config.feature_scaling = Some(scaling(args));
    Ok(data)
}

fn write_report(path: Option<&Path>, report: &serde_json::Value) -> Result<()> {
    if let Some(path) = path {
        let json = serde_json::to_vec_pretty(report).expect("report serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn parse_kinds(names: Option<Vec<String>>) -> Result<Vec<ModelKind>> {
    match names {
        None => Ok(ModelKind::ALL.to_vec()),
        Some(names) => names.iter().map(|n| n.trim().parse()).collect(),
    }
}

fn ingest(args: &DataArgs) -> Result<serde_json::Value> {
    let mut config = RunConfig::new("ingest");
    let data = load_data(args, &mut config)?;
    Ok(serde_json::json!({
        "config": config,
        "summary": {
            "users": data.n_users(),
            "items": data.n_items(),
            "ratings": data.ratings.n_observed(),
            "density": data.ratings.density(),
            "binary_ratings": data.ratings.is_binary(),
            "feature_dim": data.features.dim(),
            "social_pairs": data.social.as_ref().map(|s| s.n_pairs()),
            "groups": data.groups.as_ref().map(|g| g.universe().len()),
        }
    }))
}

fn synth(preset: &str, out: &Path, seed: Option<u64>, binary: bool) -> Result<serde_json::Value> {
    let mut synth = SynthConfig::preset(preset)?;
    set(&mut synth.seed, seed);
    let planted = generate_planted(&synth)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let paths = write_planted(out, &planted, binary)?;
    let mut config = RunConfig::new("synth");
    config.outputs = vec![out.to_path_buf()];
    Ok(serde_json::json!({
        "config": config,
        "synth": synth,
        "files": paths,
        "ratings": planted.data.ratings.n_observed(),
        "social_pairs": planted.data.social.as_ref().map(|s| s.n_pairs()),
        "oracle_maps": planted.oracle_maps,
    }))
}

fn split_for(data: &Dataset, s: &SplitSettings) -> Result<SplitMasks> {
    block_split(data, s.seed, s.user_fraction, s.item_fraction)
}

fn settings_used(kind: ModelKind, file: &FileConfig, config: &mut RunConfig) {
    config.models = vec![kind];
    if kind.is_topic_model() {
        config.hyper = Some(file.hyper.clone());
    } else {
        config.factor = Some(file.factor.clone());
    }
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MissingInput(format!("{}: {other:?}", path.display())),
    })?;
    let io = |e: csv::Error| Error::MissingInput(format!("{}: {e}", path.display()));
    w.write_record(["iteration", "objective"]).map_err(io)?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn train(
    model: &str,
    args: &DataArgs,
    out: &Path,
    trace: Option<PathBuf>,
    all_train: bool,
    file: &FileConfig,
) -> Result<serde_json::Value> {
    let kind: ModelKind = model.parse()?;
    let mut config = RunConfig::new("train");
    settings_used(kind, file, &mut config);
    let data = load_data(args, &mut config)?;
    let (masks, record) = if all_train {
        (SplitMasks::all_train(&data.ratings), None)
    } else {
        let masks = split_for(&data, &file.split)?;
        config.split = Some(file.split.clone());
        let record = SplitRecord {
            seed: file.split.seed,
            user_fraction: file.split.user_fraction,
            item_fraction: file.split.item_fraction,
            fingerprint: Some(masks.fingerprint()),
        };
        (masks, Some(record))
    };

    let fitted = TrainedModel::fit(kind, &data, &masks, &file.hyper, &file.factor)?;
    let trace_path = trace.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".trace.csv");
        PathBuf::from(p)
    });
    fitted.save(out, record.as_ref())?;
    write_trace(&trace_path, fitted.trace())?;
    config.outputs = vec![out.to_path_buf(), trace_path];

    Ok(serde_json::json!({
        "config": config,
        "model": kind,
        "split_fingerprint": record.and_then(|r| r.fingerprint),
        "training_ratings": masks.train().len(),
        "iterations": fitted.trace().len() - 1,
        "final_objective": fitted.trace().last(),
    }))
}

fn check_shape(model: &TrainedModel, data: &Dataset) -> Result<()> {
    if model.n_users() != data.n_users() || model.n_items() != data.n_items() {
        return Err(Error::Schema(format!(
            "model covers {} users and {} items, dataset has {} and {}",
            model.n_users(),
            model.n_items(),
            data.n_users(),
            data.n_items()
        )));
    }
    Ok(())
}

fn eval(
    model_path: &Path,
    args: &DataArgs,
    split: &SplitArgs,
    file: &mut FileConfig,
    curve: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<serde_json::Value> {
    let (model, record) = TrainedModel::load(model_path)?;
    let mut config = RunConfig::new("eval");
    settings_used(model.kind(), file, &mut config);
    config.hyper = model.hyper().cloned();
    let data = load_data(args, &mut config)?;
    check_shape(&model, &data)?;

    // default to the split the model was trained on
    if let Some(r) = &record {
        file.split = SplitSettings {
            seed: r.seed,
            user_fraction: r.user_fraction,
            item_fraction: r.item_fraction,
        };
    }
    file.apply_split(split);
    let masks = split_for(&data, &file.split)?;
    let fingerprint = masks.fingerprint();
    let trained_on_split = record.as_ref().and_then(|r| r.fingerprint.as_deref()) == Some(fingerprint.as_str());
    if !trained_on_split {
        eprintln!("warning: the model was not trained on this split; held-out ratings may have been seen");
    }
    config.split = Some(file.split.clone());

    let report = maps(&model, &data, &masks)?;
    if let Some(path) = &curve {
        report.write_curve_csv(path)?;
        config.outputs.push(path.clone());
    }
    if let Some(path) = &out {
        config.outputs.push(path.clone());
    }
    let json = serde_json::json!({
        "config": config,
        "model_file": model_path,
        "model": model.kind(),
        "split_fingerprint": fingerprint,
        "trained_on_split": trained_on_split,
        "report": report,
    });
    write_report(out.as_deref(), &json)?;
    Ok(json)
}

fn coldstart(args: &DataArgs, file: &FileConfig, out: Option<PathBuf>) -> Result<serde_json::Value> {
    let mut config = RunConfig::new("coldstart");
    settings_used(ModelKind::Stm, file, &mut config);
    let data = load_data(args, &mut config)?;
    let cs = ColdStartConfig {
        seed: file.split.seed,
        unseen_fraction: file.cold_start.unseen_fraction,
        train_fractions: file.cold_start.train_fractions.clone(),
        hyper: file.hyper.clone(),
    };
    let report = cold_start_protocol(&data, &cs)?;
    config.outputs.extend(out.clone());
    let json = serde_json::json!({ "config": config, "report": report });
    write_report(out.as_deref(), &json)?;
    Ok(json)
}

#[derive(Serialize)]
struct CompareRow {
    model: ModelKind,
    maps: f64,
    n_evaluated_users: usize,
    iterations: usize,
    final_objective: f64,
    /// Fingerprint of the split this row was trained and ranked on.
    split_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<PathBuf>,
}

fn compare(
    args: &DataArgs,
    models: Option<Vec<String>>,
    file: &FileConfig,
    curves: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<serde_json::Value> {
    let kinds = parse_kinds(models)?;
    if kinds.is_empty() {
        return Err(Error::Argument("no models to compare".into()));
    }
    let mut config = RunConfig::new("compare");
    config.models = kinds.clone();
    config.hyper = Some(file.hyper.clone());
    config.factor = Some(file.factor.clone());
    config.split = Some(file.split.clone());
    let data = load_data(args, &mut config)?;
    if kinds.iter().any(|k| k.is_social()) && data.social_graph().is_none() {
        return Err(Error::MissingInput(
            "SoSTM and SoRec need a social graph (social.csv) or group memberships (groups.csv)".into(),
        ));
    }
    let masks = split_for(&data, &file.split)?;
    let fingerprint = masks.fingerprint();
    if let Some(dir) = &curves {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut rows = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let model = TrainedModel::fit(kind, &data, &masks, &file.hyper, &file.factor)?;
        let report: RankingReport = maps(&model, &data, &masks)?;
        let curve = match &curves {
            Some(dir) => {
                let path = dir.join(format!("{kind}.csv"));
                report.write_curve_csv(&path)?;
                Some(path)
            }
            None => None,
        };
        rows.push(CompareRow {
            model: kind,
            maps: report.maps,
            n_evaluated_users: report.n_evaluated_users,
            iterations: model.trace().len() - 1,
            final_objective: *model.trace().last().expect("trace starts at initialization"),
            split_fingerprint: fingerprint.clone(),
            curve,
        });
    }
    config.outputs.extend(curves);
    config.outputs.extend(out.clone());
    let json = serde_json::json!({
        "config": config,
        "split": {
            "fingerprint": fingerprint,
            "training_ratings": masks.train().len(),
            "test_ratings": masks.test().len(),
            "test_users": masks.test_users().len(),
            "test_items": masks.test_items().len(),
        },
        "results": rows,
    });
    write_report(out.as_deref(), &json)?;
    Ok(json)
}

#[derive(Serialize)]
struct TopicSummary {
    topic: usize,
    /// Items with a nonzero weight on the topic.
    items_using: usize,
    users_using: usize,
    atom_norm: f64,
    top_items: Vec<String>,
}

fn inspect_topics(
    model_path: &Path,
    data_dir: Option<&Path>,
    top: usize,
    out: Option<PathBuf>,
) -> Result<serde_json::Value> {
    let (model, _) = TrainedModel::load(model_path)?;
    let dictionary = model
        .dictionary()
        .ok_or_else(|| Error::Argument(format!("{} models have no topics", model.kind())))?;
    let mut config = RunConfig::new("inspect-topics");
    config.hyper = model.hyper().cloned();
    config.models = vec![model.kind()];
    let labels: Option<Vec<String>> = match data_dir {
        Some(dir) => {
            let args = DataArgs {
                data: dir.to_path_buf(),
                raw_features: false,
            };
            let data = load_data(&args, &mut config)?;
            check_shape(&model, &data)?;
            Some(data.item_labels)
        }
        None => None,
    };
    let items = model.item_profiles();
    let users = model.user_profiles();
    let used = |m: &nalgebra::DMatrix<f64>, k: usize| m.row(k).iter().filter(|v| v.abs() > SPARSITY_EPS).count();
    let topics = (0..dictionary.n_topics())
        .map(|k| {
            let top_items = topic_top_items(items, k, top)?
                .into_iter()
                .map(|j| labels.as_ref().map_or_else(|| j.to_string(), |l| l[j].clone()))
                .collect();
            Ok(TopicSummary {
                topic: k,
                items_using: used(items, k),
                users_using: used(users, k),
                atom_norm: dictionary.atoms().column(k).norm(),
                top_items,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    config.outputs.extend(out.clone());
    let json = serde_json::json!({
        "config": config,
        "model": model.kind(),
        "user_density": profile_sparsity(users, SPARSITY_EPS),
        "item_density": profile_sparsity(items, SPARSITY_EPS),
        "topics": topics,
    });
    write_report(out.as_deref(), &json)?;
    Ok(json)
}
