//! Command-line front end: `gen-data`, `train`, `infer`, `eval` and
//! `ablate-tmo`. Settings come from an optional TOML file (`--config`);
//! flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::imaging::{tmo_mu_law, ReferenceChoice, TmoOperator, DEFAULT_MU};
use crate::metrics::Metric;
use crate::models::{Architecture, ModelWeights, PcfConfig, PreDnConfig, RaNetConfig};
use crate::pipeline::{evaluate, load_pipeline, run_sjhdr, save_pipeline, TrainedPipeline, Variant};
use crate::sim::{read_dataset, read_manifest, write_dataset_split, write_image_set, DatasetSample, DatasetSpec, SimError};
use crate::training::{
    ablate_tmo, denoise_pairs, label_paths, pcf_items, ranet_examples, train_pcf, train_predn, train_ranet,
    LogRecord, TrainConfig, TrainError, TrainOutcome,
};

/// Default split sizes of `gen-data`.
pub const DEFAULT_TRAIN_COUNT: usize = 192;
pub const DEFAULT_TEST_COUNT: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Divergence(TrainError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Config(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } => CliError::Divergence(e),
            TrainError::Config(m) => CliError::Config(m),
            TrainError::Data(m) => CliError::Data(m),
            TrainError::Sim(s) => s.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::pipeline::PipelineError> for CliError {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        use crate::pipeline::PipelineError as P;
        match e {
            P::Config(m) => CliError::Config(m),
            P::MissingPath(_) | P::Inconsistent(_) | P::Version { .. } | P::Model(_) => CliError::Data(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Toy,
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RefArg {
    Under,
    Medium,
    Over,
    Auto,
}

impl RefArg {
    pub fn choice(self) -> Option<ReferenceChoice> {
        match self {
            RefArg::Under => Some(ReferenceChoice::Under),
            RefArg::Medium => Some(ReferenceChoice::Medium),
            RefArg::Over => Some(ReferenceChoice::Over),
            RefArg::Auto => None,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "jointhdr", version, about = "Selective joint HDR fusion and denoising")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Synthesize a dataset with a train/test split.
    GenData,
    /// Train denoiser, fusion paths, path labels and selector into a bundle.
    Train,
    /// Run the pipeline on dataset samples and write the outputs.
    Infer,
    /// Compare fixed, selective and oracle path choices on the test split.
    Eval,
    /// Equal-budget comparison of tone-mapping operators.
    AblateTmo,
}

/// Settings shared by the file and the flags; every field is optional so
/// the two layers can be merged.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// TOML file with any of the options below.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub pipeline: Option<PathBuf>,
    /// Output directory (infer, eval, ablate-tmo).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long = "ref", global = true, value_enum)]
    #[serde(rename = "ref")]
    pub reference: Option<RefArg>,
    /// linear, gamma22, reinhard, hable or mu_law.
    #[arg(long, global = true)]
    pub tmo: Option<String>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// psnr_mu, psnr_l, ssim_mu or ssim_l.
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Training samples (gen-data).
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Test samples (gen-data).
    #[arg(long, global = true)]
    pub test_count: Option<usize>,
    /// Scene side in pixels (gen-data).
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// Override every stage's epoch count (train, ablate-tmo).
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Stop each training stage after this many epochs, leaving a resumable
    /// checkpoint.
    #[arg(long, global = true)]
    pub stop_after_epoch: Option<usize>,
}

impl Options {
    /// Fills unset fields from `file`.
    fn or(self, file: Options) -> Options {
        Options {
            config: self.config,
            dataset: self.dataset.or(file.dataset),
            pipeline: self.pipeline.or(file.pipeline),
            out: self.out.or(file.out),
            seed: self.seed.or(file.seed),
            preset: self.preset.or(file.preset),
            reference: self.reference.or(file.reference),
            tmo: self.tmo.or(file.tmo),
            mu: self.mu.or(file.mu),
            lambda: self.lambda.or(file.lambda),
            metric: self.metric.or(file.metric),
            count: self.count.or(file.count),
            test_count: self.test_count.or(file.test_count),
            size: self.size.or(file.size),
            epochs: self.epochs.or(file.epochs),
            stop_after_epoch: self.stop_after_epoch.or(file.stop_after_epoch),
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub dataset: Option<PathBuf>,
    pub pipeline: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub preset: Preset,
    pub reference: RefArg,
    pub tmo: TmoOperator,
    pub lambda: f64,
    pub metric: Metric,
    pub count: usize,
    pub test_count: usize,
    pub size: usize,
    pub epochs: Option<usize>,
    pub stop_after_epoch: Option<usize>,
}

impl CliConfig {
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.opts.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Options::default(),
        };
        let o = cli.opts.or(file);
        let preset = o.preset.unwrap_or(Preset::Toy);
        let mu = o.mu.unwrap_or(DEFAULT_MU);
        let tmo = TmoOperator::from_kind(o.tmo.as_deref().unwrap_or("mu_law"), mu)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let metric = match o.metric.as_deref() {
            None => Metric::PsnrMu,
            Some(name) => Metric::from_name(name).ok_or_else(|| CliError::Config(format!("unknown metric '{name}'")))?,
        };
        let lambda = o.lambda.unwrap_or(crate::loss::DEFAULT_LAMBDA);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CliError::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        let cfg = CliConfig {
            command: cli.command,
            dataset: o.dataset,
            pipeline: o.pipeline,
            out: o.out,
            seed: o.seed.unwrap_or(0),
            preset,
            reference: o.reference.unwrap_or(RefArg::Auto),
            tmo,
            lambda,
            metric,
            count: o.count.unwrap_or(DEFAULT_TRAIN_COUNT),
            test_count: o.test_count.unwrap_or(DEFAULT_TEST_COUNT),
            size: o.size.unwrap_or(match preset {
                Preset::Toy => 64,
                Preset::Default => 256,
            }),
            epochs: o.epochs,
            stop_after_epoch: o.stop_after_epoch,
        };
        cfg.validate_paths()?;
        Ok(cfg)
    }

    /// Checks every path the command needs before any work starts.
    fn validate_paths(&self) -> Result<(), CliError> {
        let need = |p: &Option<PathBuf>, flag: &str| {
            p.clone().ok_or_else(|| CliError::Config(format!("--{flag} is required")))
        };
        let existing_dataset = || -> Result<(), CliError> {
            let d = need(&self.dataset, "dataset")?;
            read_manifest(&d).map_err(|e| CliError::Data(format!("dataset {}: {e}", d.display())))?;
            Ok(())
        };
        let existing_bundle = || -> Result<(), CliError> {
            let p = need(&self.pipeline, "pipeline")?;
            if !p.join("manifest.json").exists() {
                return Err(CliError::Data(format!("no pipeline bundle at {}", p.display())));
            }
            Ok(())
        };
        match self.command {
            Command::GenData => {
                need(&self.dataset, "dataset")?;
            }
            Command::Train => {
                existing_dataset()?;
                need(&self.pipeline, "pipeline")?;
            }
            Command::Infer | Command::Eval => {
                existing_dataset()?;
                existing_bundle()?;
                need(&self.out, "out")?;
            }
            Command::AblateTmo => {
                existing_dataset()?;
                need(&self.out, "out")?;
            }
        }
        Ok(())
    }

    fn arches(&self) -> (PreDnConfig, PcfConfig, RaNetConfig) {
        match self.preset {
            Preset::Toy => (PreDnConfig::toy(), PcfConfig::toy(ReferenceChoice::Medium), RaNetConfig::toy()),
            Preset::Default => (
                PreDnConfig::default_size(),
                PcfConfig::default_size(ReferenceChoice::Medium),
                RaNetConfig::default_size(),
            ),
        }
    }

    /// Stage schedules, with the invocation's seed, λ, TMO and overrides.
    pub fn schedules(&self) -> [TrainConfig; 3] {
        let base = match self.preset {
            Preset::Toy => [TrainConfig::toy_predn(), TrainConfig::toy_pcf(), TrainConfig::toy_ranet()],
            Preset::Default => [TrainConfig::full_fusion(), TrainConfig::full_fusion(), TrainConfig::full_selector()],
        };
        base.map(|c| TrainConfig {
            epochs: self.epochs.unwrap_or(c.epochs),
            seed: self.seed,
            lambda: self.lambda,
            tmo: self.tmo,
            stop_after_epoch: self.stop_after_epoch,
            ..c
        })
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// a human-readable summary.
pub fn run<I, S>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            return Ok(e.to_string());
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    execute(&CliConfig::resolve(cli)?)
}

pub fn execute(cfg: &CliConfig) -> Result<String, CliError> {
    match cfg.command {
        Command::GenData => cmd_gen_data(cfg),
        Command::Train => cmd_train(cfg),
        Command::Infer => cmd_infer(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::AblateTmo => cmd_ablate_tmo(cfg),
    }
}

fn dataset_spec(cfg: &CliConfig) -> DatasetSpec {
    DatasetSpec::new(cfg.seed, cfg.count, cfg.test_count, cfg.size)
}

pub fn cmd_gen_data(cfg: &CliConfig) -> Result<String, CliError> {
    let dir = cfg.dataset.as_ref().expect("validated");
    let samples = dataset_spec(cfg).generate()?;
    write_dataset_split(&samples, dir, cfg.count)?;
    Ok(format!("wrote {} train + {} test samples to {}", cfg.count, cfg.test_count, dir.display()))
}

/// Samples of the dataset split by the manifest.
fn load_split(dir: &Path) -> Result<(Vec<DatasetSample>, Vec<DatasetSample>), CliError> {
    let manifest = read_manifest(dir)?;
    let all = read_dataset(dir)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
    Ok((pick(&manifest.train), pick(&manifest.test)))
}

fn write_log(path: &Path, log: &[LogRecord]) -> Result<(), CliError> {
    let text: String = log.iter().map(|r| serde_json::to_string(r).expect("record") + "\n").collect();
    fs::write(path, text).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    fs::write(path, serde_json::to_vec_pretty(value).expect("serializable")).map_err(io_err(path))
}

fn stage(
    name: &str,
    root: &Path,
    cfg: &TrainConfig,
    run: impl FnOnce(&TrainConfig) -> Result<TrainOutcome, TrainError>,
) -> Result<Option<ModelWeights>, CliError> {
    let cfg = TrainConfig { checkpoint_dir: Some(root.join("checkpoints").join(name)), checkpoint_every: 1, ..cfg.clone() };
    let out = run(&cfg)?;
    write_log(&root.join("logs").join(format!("{name}.jsonl")), &out.log)?;
    eprintln!("{name}: {} steps, final loss {:.5}", out.log.len(), out.log.last().map_or(f64::NAN, |r| r.loss));
    Ok(out.completed.then_some(out.weights))
}

/// Fraction of the training split reserved for selector labels.
pub const LABEL_FRACTION: f64 = 0.25;

/// `(fusion-path samples, selector-label samples)`; a single sample serves both.
fn split_for_labels(train: &[DatasetSample]) -> (&[DatasetSample], &[DatasetSample]) {
    if train.len() < 2 {
        return (train, train);
    }
    let n_labels = ((train.len() as f64 * LABEL_FRACTION).ceil() as usize).clamp(1, train.len() - 1);
    train.split_at(train.len() - n_labels)
}

pub fn cmd_train(cfg: &CliConfig) -> Result<String, CliError> {
    let (train, test) = load_split(cfg.dataset.as_ref().expect("validated"))?;
    if train.is_empty() {
        return Err(CliError::Data("dataset has no training samples".into()));
    }
    let root = cfg.pipeline.as_ref().expect("validated");
    fs::create_dir_all(root.join("logs")).map_err(io_err(root))?;
    let [s_predn, s_pcf, s_ranet] = cfg.schedules();
    let (a_predn, a_pcf, a_ranet) = cfg.arches();
    let interrupted = |stage: &str| Ok(format!("stopped during {stage}; rerun to resume from {}", root.display()));

    let pairs = denoise_pairs(&train, cfg.tmo)?;
    let init = ModelWeights::init(Architecture::PreDn(a_predn), cfg.seed);
    let Some(predn) = stage("predn", root, &s_predn, |c| train_predn(c, init, &pairs))? else {
        return interrupted("predn");
    };

    // paths never see the selector's samples, else labels favour memorization
    let (path_set, label_set) = split_for_labels(&train);
    let mut paths = Vec::with_capacity(3);
    for r in ReferenceChoice::ALL {
        let items = pcf_items(path_set, Some(&predn), r, cfg.tmo)?;
        let init = ModelWeights::init(Architecture::Pcf(a_pcf.for_reference(r)), cfg.seed + 1 + r.index() as u64);
        let name = format!("pcf_{}", r.name());
        let Some(w) = stage(&name, root, &s_pcf, |c| train_pcf(c, init, &items))? else {
            return interrupted(&name);
        };
        paths.push(w);
    }
    let paths: [ModelWeights; 3] = paths.try_into().expect("three paths");
    let pipe = TrainedPipeline::new(Some(predn), paths, None, cfg.tmo)?;

    let train_labels = label_paths(&pipe, label_set, cfg.metric)?;
    let test_labels = label_paths(&pipe, &test, cfg.metric)?;
    let labels_text: String = train_labels
        .iter()
        .chain(&test_labels)
        .map(|l| serde_json::to_string(l).expect("label") + "\n")
        .collect();
    fs::write(root.join("labels.jsonl"), labels_text).map_err(io_err(root))?;
    let winners = |ls: &[crate::training::PathLabel]| ls.iter().map(|l| l.winner).collect::<Vec<_>>();
    let ex_train = ranet_examples(label_set, &winners(&train_labels), cfg.tmo)?;
    let ex_test = ranet_examples(&test, &winners(&test_labels), cfg.tmo)?;
    let init = ModelWeights::init(Architecture::RaNet(a_ranet), cfg.seed + 10);
    let mut report = None;
    let ranet = stage("ranet", root, &s_ranet, |c| {
        let (out, rep) = train_ranet(c, init, &ex_train, &ex_test)?;
        report = Some(rep);
        Ok(out)
    })?;
    let Some(ranet) = ranet else { return interrupted("ranet") };
    let report = report.expect("ranet trained");
    let pipe = pipe.with_ranet(ranet)?;
    save_pipeline(&pipe, root)?;
    write_json(
        &root.join("selector_report.json"),
        &serde_json::json!({
            "train_accuracy": report.train_accuracy,
            "heldout_accuracy": report.heldout_accuracy,
            "degenerate": report.degenerate,
            "heldout_predictions": report.heldout_predictions,
        }),
    )?;
    Ok(format!(
        "trained pipeline at {} (selector held-out accuracy {:.1}%{})",
        root.display(),
        100.0 * report.heldout_accuracy,
        if report.degenerate { ", single-class labels" } else { "" }
    ))
}

/// 8-bit μ-law preview of a normalized linear image, as RGB PNG.
pub fn write_preview(path: &Path, linear: &Image) -> Result<(), CliError> {
    let tm = tmo_mu_law(&linear.map(|v| v.clamp(0.0, 1.0)), DEFAULT_MU).map_err(|e| CliError::Runtime(e.to_string()))?;
    let (h, w) = (tm.pixels.height(), tm.pixels.width());
    let c = tm.pixels.channels().min(3);
    let mut rgb = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                let v = tm.pixels.get(ch.min(c - 1), y, x);
                rgb.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| CliError::Runtime(e.to_string()))?;
    writer.write_image_data(&rgb).map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct InferEntry {
    id: String,
    chosen: ReferenceChoice,
    ranet_logits: Option<[f64; 3]>,
    timing: crate::pipeline::StageTiming,
}

pub fn cmd_infer(cfg: &CliConfig) -> Result<String, CliError> {
    let pipe = load_pipeline(cfg.pipeline.as_ref().expect("validated"))?;
    let (_, test) = load_split(cfg.dataset.as_ref().expect("validated"))?;
    let out = cfg.out.as_ref().expect("validated");
    let mut entries = Vec::with_capacity(test.len());
    for (i, s) in test.iter().enumerate() {
        let id = format!("sample_{i:04}");
        let res = run_sjhdr(&pipe, &s.bracket(), cfg.reference.choice())?;
        let dir = out.join(&id);
        let info = serde_json::json!({
            "chosen": res.chosen,
            "ranet_logits": res.ranet_logits,
            "tmo": pipe.tmo,
        });
        write_image_set(&dir, &[("hdr_linear", &res.hdr_linear.0), ("hdr_tm", &res.hdr_tm.pixels)], info)?;
        write_preview(&dir.join("preview.png"), &res.hdr_linear.0)?;
        entries.push(InferEntry { id, chosen: res.chosen, ranet_logits: res.ranet_logits, timing: res.timing });
    }
    write_json(&out.join("manifest.json"), &entries)?;
    Ok(format!("wrote {} outputs to {}", entries.len(), out.display()))
}

pub fn cmd_eval(cfg: &CliConfig) -> Result<String, CliError> {
    let pipe = load_pipeline(cfg.pipeline.as_ref().expect("validated"))?;
    pipe.load_all()?;
    let (_, test) = load_split(cfg.dataset.as_ref().expect("validated"))?;
    if test.is_empty() {
        return Err(CliError::Data("dataset has no test samples".into()));
    }
    let ev = evaluate(&pipe, &test, &Variant::TABLE, cfg.metric)?;
    let out = cfg.out.as_ref().expect("validated");
    fs::create_dir_all(out).map_err(io_err(out))?;
    for (v, rep) in &ev.reports {
        let name = v.label().replace(' ', "_").replace(['(', ')'], "");
        let p = out.join(format!("{name}.jsonl"));
        fs::write(&p, rep.to_jsonl()).map_err(io_err(&p))?;
    }
    let table = ev.table();
    let p = out.join("table.txt");
    fs::write(&p, &table).map_err(io_err(&p))?;
    Ok(table)
}

pub fn cmd_ablate_tmo(cfg: &CliConfig) -> Result<String, CliError> {
    let (train, test) = load_split(cfg.dataset.as_ref().expect("validated"))?;
    if train.is_empty() || test.is_empty() {
        return Err(CliError::Data("ablation needs both train and test samples".into()));
    }
    let mu = match cfg.tmo {
        TmoOperator::MuLaw { mu } => mu,
        _ => DEFAULT_MU,
    };
    let ops: Vec<TmoOperator> = TmoOperator::KINDS
        .iter()
        .map(|k| TmoOperator::from_kind(k, mu).expect("known kind"))
        .collect();
    let (_, arch, _) = cfg.arches();
    let [_, sched, _] = cfg.schedules();
    let r = cfg.reference.choice().unwrap_or(ReferenceChoice::Medium);
    let rows = ablate_tmo(&sched, &arch, r, &ops, &train, &test)?;
    let out = cfg.out.as_ref().expect("validated");
    fs::create_dir_all(out).map_err(io_err(out))?;
    let table_rows: Vec<(String, [f64; 4])> = rows.iter().map(|r| (r.tmo.clone(), r.means)).collect();
    let table = crate::metrics::render_table("tmo", &table_rows);
    let p = out.join("tmo_ablation.txt");
    fs::write(&p, &table).map_err(io_err(&p))?;
    write_json(&out.join("tmo_ablation.json"), &rows)?;
    Ok(table)
}
