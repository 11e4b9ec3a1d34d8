use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lesion_risk::bundle::{BundleMetadata, ModelBundle, PredictResponse};
use lesion_risk::dataset::{
    parse_csv, split, synthesize, write_csv, Birads, Dataset, GeneratorConfig, Provenance, RecordInput, SplitSpec,
    SplitStrategy,
};
use lesion_risk::locart::{CalibrationOptions, QuantileLevel, DEFAULT_ALPHA, DEFAULT_K_MIN, DEFAULT_SPLIT_FRACTION};
use lesion_risk::model::{Feature, DEFAULT_CS, DEFAULT_FOLDS};
use lesion_risk::pipeline::{
    calibrate, evaluate, train, CalibrateConfig, EvaluateConfig, ThresholdConfig, TrainConfig, TreeSelection,
};
use lesion_risk::tree::{TreeParams, DEFAULT_DEPTHS, DEFAULT_MIN_LEAVES};
use sha2::{Digest, Sha256};

use crate::server::{self, ADDR_ENV, DEFAULT_ADDR};

#[derive(Debug, Parser)]
#[command(name = "lesion-risk", version, about = "Lesion malignancy risk with subgroup-local prediction sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset with known true risk.
    Synth(SynthArgs),
    /// Fit the risk model by cross-validated grid search and write a bundle.
    Train(TrainArgs),
    /// Grow the residual tree and per-leaf cutoffs; updates the bundle.
    Calibrate(CalibrateArgs),
    /// Write metric, curve, coverage and leaf-profile reports.
    Evaluate(EvaluateArgs),
    /// Print the prediction for one record (or an array of records) as JSON.
    Predict(PredictArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator configuration (JSON); overrides --n and --seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the four-band planted-subgroup generator.
    #[arg(long)]
    pub planted: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth file; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    ByCohort,
    Random,
}

impl From<SplitArg> for SplitStrategy {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::ByCohort => SplitStrategy::ByCohort,
            SplitArg::Random => SplitStrategy::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "by-cohort")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Split sizes; default to a 513/1059/364 proportion of the data.
    #[arg(long, requires_all = ["n_cal", "n_test"])]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_cal: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Inverse-regularization grid (comma separated).
    #[arg(long = "c", value_delimiter = ',', default_values_t = DEFAULT_CS)]
    pub cs: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = Feature::DEFAULT)]
    pub features: Vec<Feature>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Uses the calibration split when this is the training file, else every record.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SPLIT_FRACTION)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use m = ⌈(k+1)(1−α)⌉ instead of the adjusted level.
    #[arg(long)]
    pub conservative_level: bool,
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    pub k_min: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DEPTHS)]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MIN_LEAVES)]
    pub min_leaves: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Skip the tree grid search and fit these parameters directly.
    #[arg(long, requires = "min_leaf")]
    pub depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = Feature::DEFAULT)]
    pub tree_features: Vec<Feature>,
    /// Output bundle; defaults to updating --bundle in place.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Uses the test split when this is the training file, else every record.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub optimize_threshold: bool,
    /// Defaults to the BI-RADS 4b malignancy rate of the evaluated subset.
    #[arg(long, requires = "optimize_threshold")]
    pub ppv_floor: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4a,4b", requires = "optimize_threshold")]
    pub birads: Vec<Birads>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// JSON record or array of records; `-` reads stdin.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, env = ADDR_ENV, default_value = DEFAULT_ADDR)]
    pub addr: SocketAddr,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of the fitted parts of a bundle (metadata excluded).
pub fn model_version(b: &ModelBundle) -> anyhow::Result<String> {
    let body = serde_json::to_vec(&(&b.model, &b.subgroups))?;
    Ok(sha256_hex(&body)[..12].to_string())
}

fn read_dataset(path: &Path) -> anyhow::Result<(Dataset, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let ds = parse_csv(bytes.as_slice(), Provenance::File(path.display().to_string()))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((ds, sha256_hex(&bytes)))
}

pub fn load_bundle(path: &Path) -> anyhow::Result<ModelBundle> {
    let f = File::open(path).with_context(|| format!("opening bundle {}", path.display()))?;
    ModelBundle::load(BufReader::new(f)).with_context(|| format!("loading bundle {}", path.display()))
}

pub fn save_bundle(b: &ModelBundle, path: &Path) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    b.save(&mut w)?;
    w.flush()?;
    Ok(())
}

/// The named part of the training split when `hash` matches the bundle's
/// dataset, otherwise all of `ds`.
fn split_part(b: &ModelBundle, ds: Dataset, hash: &str, part: usize) -> anyhow::Result<Dataset> {
    match (&b.metadata.dataset_sha256, &b.metadata.split) {
        (Some(h), Some(spec)) if h == hash => {
            let (tr, cal, te) = split(&ds, spec)?;
            Ok([tr, cal, te].into_iter().nth(part).expect("three parts"))
        }
        _ => Ok(ds),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let cfg = match &a.config {
        Some(p) => serde_json::from_reader(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
            .with_context(|| format!("parsing {}", p.display()))?,
        None if a.planted => GeneratorConfig::planted_subgroups(a.n, a.seed),
        None => GeneratorConfig::new(a.n, a.seed),
    };
    let (ds, truth) = synthesize(&cfg)?;
    let mut w = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    write_csv(&ds, &mut w)?;
    w.flush()?;
    let truth_path = a.truth.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth.json");
        p.into()
    });
    let mut w = BufWriter::new(File::create(&truth_path)?);
    serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "config": cfg, "truth": truth }))?;
    writeln!(w)?;
    eprintln!("wrote {} records to {}", ds.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<()> {
    let (ds, hash) = read_dataset(&a.data)?;
    let strategy = a.split.into();
    let spec = match (a.n_train, a.n_cal, a.n_test) {
        (Some(n_train), Some(n_cal), Some(n_test)) => SplitSpec { n_train, n_cal, n_test, strategy, seed: a.seed },
        _ => SplitSpec::proportional(ds.len(), strategy, a.seed),
    };
    let (tr, _, _) = split(&ds, &spec)?;
    let cfg = TrainConfig { features: a.features, cs: a.cs, folds: a.folds, seed: a.seed };
    let (model, report) = train(&tr, &cfg)?;
    let mut b = ModelBundle::new(
        model,
        BundleMetadata {
            dataset_sha256: Some(hash),
            split: Some(spec),
            grid: Some(report.clone()),
            created_at: Some(chrono::Utc::now().to_rfc3339()),
            model_version: String::new(),
        },
    );
    b.metadata.model_version = model_version(&b)?;
    save_bundle(&b, &a.out)?;
    print_json(&report)
}

fn calibrate_cmd(a: CalibrateArgs) -> anyhow::Result<()> {
    let mut b = load_bundle(&a.bundle)?;
    let (ds, hash) = read_dataset(&a.data)?;
    let cal = split_part(&b, ds, &hash, 1)?;
    let selection = match (a.depth, a.min_leaf) {
        (Some(max_depth), Some(min_samples_leaf)) => TreeSelection::Fixed(TreeParams { max_depth, min_samples_leaf }),
        _ => TreeSelection::Grid { depths: a.depths, min_leaves: a.min_leaves, folds: a.folds },
    };
    let cfg = CalibrateConfig {
        alpha: a.alpha,
        fraction: a.fraction,
        seed: a.seed,
        tree_features: a.tree_features,
        selection,
        options: CalibrationOptions {
            k_min: a.k_min,
            level: if a.conservative_level { QuantileLevel::Conservative } else { QuantileLevel::Adjusted },
        },
    };
    let sub = calibrate(&b.model, &cal, &cfg)?;
    eprint!("{}", sub.tree.rules_text());
    b.subgroups = Some(sub);
    b.metadata.created_at = Some(chrono::Utc::now().to_rfc3339());
    b.metadata.model_version = model_version(&b)?;
    save_bundle(&b, a.out.as_deref().unwrap_or(&a.bundle))?;
    let s = b.calibrated()?;
    print_json(&serde_json::json!({
        "tree_grid": s.tree_grid,
        "pooled": s.calibration.pooled,
        "leaves": s.calibration.leaves,
    }))
}

fn evaluate_cmd(a: EvaluateArgs) -> anyhow::Result<()> {
    let b = load_bundle(&a.bundle)?;
    let (ds, hash) = read_dataset(&a.data)?;
    let test = split_part(&b, ds, &hash, 2)?;
    let cfg = EvaluateConfig {
        calibration_bins: a.bins,
        threshold: a.optimize_threshold.then(|| ThresholdConfig { ppv_floor: a.ppv_floor, birads: a.birads }),
        ..EvaluateConfig::default()
    };
    let report = evaluate(&b, &test, &cfg)?;
    for p in report.write_dir(&a.out_dir)? {
        eprintln!("wrote {}", p.display());
    }
    print_json(&report.metrics)
}

fn predict_cmd(a: PredictArgs) -> anyhow::Result<()> {
    let b = load_bundle(&a.bundle)?;
    let mut text = String::new();
    if a.input.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    }
    let value: serde_json::Value = serde_json::from_str(&text).context("input is not valid JSON")?;
    let predict_one = |v: serde_json::Value| -> anyhow::Result<PredictResponse> {
        let input: RecordInput = serde_json::from_value(v).context("input is not a lesion record")?;
        Ok(b.predict(&input.into_record()?)?)
    };
    match value {
        serde_json::Value::Array(items) => {
            let out = items.into_iter().map(predict_one).collect::<anyhow::Result<Vec<_>>>()?;
            print_json(&out)
        }
        v => print_json(&predict_one(v)?),
    }
}

fn serve_cmd(a: ServeArgs) -> anyhow::Result<()> {
    let b = load_bundle(&a.bundle)?;
    if b.subgroups.is_none() {
        bail!("bundle {} has not been calibrated", a.bundle.display());
    }
    tokio::runtime::Runtime::new()?.block_on(server::serve(b, a.addr))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

/// JSON error document for stderr; includes per-field messages when the
/// failure was record validation.
pub fn error_document(e: &anyhow::Error) -> serde_json::Value {
    let fields = e
        .chain()
        .find_map(|c| c.downcast_ref::<lesion_risk::Error>())
        .and_then(|c| c.field_errors())
        .map(<[lesion_risk::FieldError]>::to_vec)
        .unwrap_or_default();
    serde_json::json!({
        "error": format!("{e:#}"),
        "fields": fields,
    })
}
