//! Command-line orchestration: run configuration, the `hbf` commands and
//! their artifact layout.
//!
//! Every command writes into the run directory given by `--out`:
//! `<command>.config.json` (the resolved configuration), plus checkpoints
//! (`*.bswt` with a `*.json` sidecar describing the architecture), CSV
//! traces and a `<command>_summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind};
use crate::channel::{perturb_csi, read_dataset, write_dataset, CsiDataset, ErrorLevel, Split, SystemConfig};
use crate::dsn::{train_dsn, DebertConfig, DebertModel};
use crate::error::{Error, Result};
use crate::hmgat::{train_hmgat, HbfSolution, HmgatConfig, HmgatModel};
use crate::metrics::{evaluate_sum_rates, nre};
use crate::ncsn::{generate, train_ncsn, NcsnConfig, NcsnModel, ScheduleConfig};
use crate::numerics::checkpoint::{load_store, save_store};
use crate::numerics::{ComplexMatrix, ParamStore};
use crate::train::TrainOptions;

/// Beamforming solver used by `eval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Hmgat,
    Pzf,
    EqualPowerRandom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub solver: Option<Solver>,
    /// Error level applied to the test channels before solving.
    pub error_db: Option<f64>,
    /// Refine the imperfect channels with the trained denoiser first.
    pub denoise: bool,
}

/// File locations. Unset entries default to fixed names in the run
/// directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub hmgat: Option<PathBuf>,
    pub ncsn: Option<PathBuf>,
    pub dsn: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Dataset size for `gen-data`.
    pub samples: usize,
    pub system: SystemConfig,
    pub hmgat: HmgatConfig,
    pub ncsn: NcsnConfig,
    pub schedule: ScheduleConfig,
    pub dsn: DebertConfig,
    pub hmgat_training: TrainOptions,
    pub ncsn_training: TrainOptions,
    pub dsn_training: TrainOptions,
    /// Error levels in dB used by `train-dsn`.
    pub error_db: Vec<f64>,
    /// Weight of the reconstruction term in the denoiser loss.
    pub lambda: f64,
    /// Samples drawn by `sample-csi`.
    pub generated: usize,
    /// Langevin chains run together.
    pub sample_chunk: usize,
    pub baseline: BaselineKind,
    pub eval: EvalConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 10_000,
            system: SystemConfig::default(),
            hmgat: HmgatConfig::default(),
            ncsn: NcsnConfig::default(),
            schedule: ScheduleConfig::default(),
            dsn: DebertConfig::default(),
            hmgat_training: TrainOptions::default(),
            ncsn_training: TrainOptions::default(),
            dsn_training: TrainOptions::default(),
            error_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            lambda: 1.0,
            generated: 1000,
            sample_chunk: 256,
            baseline: BaselineKind::Pzf,
            eval: EvalConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.hmgat.validate()?;
        self.ncsn.block_shape().validate()?;
        self.dsn.block_shape().validate()?;
        self.schedule.build()?;
        for t in [&self.hmgat_training, &self.ncsn_training, &self.dsn_training] {
            t.validate()?;
        }
        if self.error_db.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("error levels must be finite".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {} must be nonnegative", self.lambda)));
        }
        if self.sample_chunk == 0 {
            return Err(Error::InvalidArgument("sample chunk must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic CSI dataset with its split manifest.
    GenData,
    /// Train the graph-attention beamformer.
    TrainHmgat,
    /// Train the noise-conditional score network.
    TrainNcsn,
    /// Draw CSI samples by annealed Langevin dynamics.
    SampleCsi,
    /// Train the denoising score network.
    TrainDsn,
    /// Refine an imperfect CSI dataset.
    Denoise,
    /// Evaluate a classical baseline on the test split.
    Baseline,
    /// Evaluate a solver on the test split, optionally under imperfect CSI.
    Eval,
    /// Append generated samples to the training split.
    Augment,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::TrainHmgat => "train-hmgat",
            Command::TrainNcsn => "train-ncsn",
            Command::SampleCsi => "sample-csi",
            Command::TrainDsn => "train-dsn",
            Command::Denoise => "denoise",
            Command::Baseline => "baseline",
            Command::Eval => "eval",
            Command::Augment => "augment",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Error level in dB (`denoise`, `eval`).
    #[arg(long = "error-db", global = true, allow_hyphen_values = true)]
    pub error_db: Option<f64>,
    /// Sample count (`gen-data`, `sample-csi`, `augment`).
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Training epochs for the `train-*` commands.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Dataset path, overriding the configured one.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Solver for `eval`: hmgat, pzf or equal_power_random.
    #[arg(long, global = true)]
    pub solver: Option<String>,
    /// Denoise imperfect channels before `eval`.
    #[arg(long, global = true)]
    pub denoise: bool,
}

#[derive(Debug, Parser)]
#[command(name = "hbf", version, about = "Hybrid beamforming and score-based CSI tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(Error),
    #[error(transparent)]
    Run(#[from] Error),
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(e) => match e {
                Error::Divergence(_) | Error::NonFinite(_) => EXIT_DIVERGENCE,
                Error::Io(_) | Error::BadMagic { .. } | Error::Version(_) | Error::Truncated(_) | Error::MissingParam(_) => {
                    EXIT_IO
                }
                Error::Json(_) | Error::ConfigMismatch(_) | Error::InvalidArgument(_) | Error::Shape { .. } => EXIT_CONFIG,
            },
        }
    }
}

/// What a command produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub artifacts: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Loads the configuration file (if any) and applies flag overrides.
pub fn resolve_config(over: &Overrides) -> std::result::Result<RunConfig, CliError> {
    let mut cfg = match &over.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(e.into()))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.into()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = over.seed {
        cfg.seed = seed;
        cfg.system.seed = seed;
    }
    if let Some(db) = over.error_db {
        cfg.eval.error_db = Some(db);
    }
    if let Some(e) = over.epochs {
        cfg.hmgat_training.epochs = e;
        cfg.ncsn_training.epochs = e;
        cfg.dsn_training.epochs = e;
    }
    if let Some(p) = &over.data {
        cfg.paths.data = Some(p.clone());
    }
    if let Some(s) = &over.solver {
        cfg.eval.solver = Some(match s.as_str() {
            "hmgat" => Solver::Hmgat,
            other => match other.parse::<BaselineKind>().map_err(CliError::Config)? {
                BaselineKind::Pzf => Solver::Pzf,
                BaselineKind::EqualPowerRandom => Solver::EqualPowerRandom,
            },
        });
    }
    if over.denoise {
        cfg.eval.denoise = true;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Results go to stdout, errors to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve_config(&cli.overrides).and_then(|cfg| {
        let out = cli.overrides.out.clone().unwrap_or_else(|| PathBuf::from("."));
        run(cli.command, &cfg, &out, cli.overrides.count)
    });
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("hbf {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn split_manifest_path(data: &Path) -> PathBuf {
    data.with_extension("split.json")
}

/// Writes a dataset together with its split manifest.
pub fn save_dataset(path: &Path, ds: &CsiDataset) -> Result<PathBuf> {
    write_dataset(path, ds)?;
    let manifest = split_manifest_path(path);
    fs::write(&manifest, serde_json::to_string_pretty(&ds.split)?)?;
    Ok(manifest)
}

/// Reads a dataset, restoring its split from the manifest when present.
pub fn load_dataset(path: &Path, system: &SystemConfig) -> Result<CsiDataset> {
    let mut ds = read_dataset(path, Some(system))?;
    let manifest = split_manifest_path(path);
    if manifest.exists() {
        let split: Split = serde_json::from_str(&fs::read_to_string(&manifest)?)?;
        if split.test.end != ds.len() || split.train.start != 0 {
            return Err(Error::ConfigMismatch(format!(
                "split manifest covers {} samples, dataset has {}",
                split.test.end,
                ds.len()
            )));
        }
        ds.split = split;
    }
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct HmgatMeta {
    n_t: usize,
    config: HmgatConfig,
}

#[derive(Serialize, Deserialize)]
struct NcsnMeta {
    n_t: usize,
    config: NcsnConfig,
    schedule: ScheduleConfig,
}

#[derive(Serialize, Deserialize)]
struct DsnMeta {
    n_t: usize,
    config: DebertConfig,
}

fn save_checkpoint(path: &Path, store: &ParamStore, meta: &impl Serialize) -> Result<Vec<PathBuf>> {
    save_store(path, store)?;
    let side = path.with_extension("json");
    fs::write(&side, serde_json::to_string_pretty(meta)?)?;
    Ok(vec![path.to_path_buf(), side])
}

fn read_meta<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?)
}

pub fn load_hmgat(path: &Path) -> Result<HmgatModel> {
    let meta: HmgatMeta = read_meta(path)?;
    let mut model = HmgatModel::new(meta.config, meta.n_t, &mut ChaCha8Rng::seed_from_u64(0))?;
    model.store.load_from(&load_store(path)?)?;
    Ok(model)
}

pub fn load_ncsn(path: &Path) -> Result<(NcsnModel, ScheduleConfig)> {
    let meta: NcsnMeta = read_meta(path)?;
    let mut model = NcsnModel::new(meta.config, meta.n_t, meta.schedule.levels, &mut ChaCha8Rng::seed_from_u64(0))?;
    model.store.load_from(&load_store(path)?)?;
    Ok((model, meta.schedule))
}

pub fn load_dsn(path: &Path) -> Result<DebertModel> {
    let meta: DsnMeta = read_meta(path)?;
    let mut model = DebertModel::new(meta.config, meta.n_t, &mut ChaCha8Rng::seed_from_u64(0))?;
    model.store.load_from(&load_store(path)?)?;
    Ok(model)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    count: Option<usize>,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&self, set: &Option<PathBuf>, default: &str) -> PathBuf {
        set.clone().unwrap_or_else(|| self.out.join(default))
    }

    fn data_path(&self) -> PathBuf {
        self.path(&self.cfg.paths.data, "data.csid")
    }

    fn dataset(&self) -> Result<CsiDataset> {
        load_dataset(&self.data_path(), &self.cfg.system)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.out.join(name);
        fs::write(&p, contents)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }
}

/// Runs one command with a resolved configuration, writing artifacts
/// under `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path, count: Option<usize>) -> std::result::Result<Outcome, CliError> {
    fs::create_dir_all(out).map_err(Error::from)?;
    let mut ctx = Ctx { cfg, out, count, artifacts: Vec::new() };
    let snapshot = serde_json::to_string_pretty(cfg).map_err(Error::from)?;
    ctx.write(&format!("{}.config.json", command.name()), &snapshot)?;
    let summary = match command {
        Command::GenData => gen_data(&mut ctx),
        Command::TrainHmgat => train_hmgat_cmd(&mut ctx),
        Command::TrainNcsn => train_ncsn_cmd(&mut ctx),
        Command::SampleCsi => sample_csi(&mut ctx),
        Command::TrainDsn => train_dsn_cmd(&mut ctx),
        Command::Denoise => denoise_cmd(&mut ctx),
        Command::Baseline => {
            let solver = match cfg.baseline {
                BaselineKind::Pzf => Solver::Pzf,
                BaselineKind::EqualPowerRandom => Solver::EqualPowerRandom,
            };
            evaluate(&mut ctx, "baseline", solver)
        }
        Command::Eval => {
            let solver = cfg.eval.solver.unwrap_or(Solver::Hmgat);
            evaluate(&mut ctx, "eval", solver)
        }
        Command::Augment => augment(&mut ctx),
    }?;
    ctx.write(
        &format!("{}_summary.json", command.name().replace('-', "_")),
        &serde_json::to_string_pretty(&summary).map_err(Error::from)?,
    )?;
    Ok(Outcome { command: command.name(), artifacts: ctx.artifacts, summary })
}

fn gen_data(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let n = ctx.count.unwrap_or(ctx.cfg.samples);
    let ds = CsiDataset::generate(&ctx.cfg.system, n)?;
    let path = ctx.data_path();
    let manifest = save_dataset(&path, &ds)?;
    ctx.artifacts.extend([path.clone(), manifest]);
    Ok(serde_json::json!({
        "dataset": path,
        "samples": n,
        "train": ds.train().len(),
        "val": ds.val().len(),
        "test": ds.test().len(),
    }))
}

fn train_hmgat_cmd(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let ds = ctx.dataset()?;
    let mut rng = ctx.rng();
    let model = HmgatModel::new(ctx.cfg.hmgat.clone(), ds.config.n_t, &mut rng)?;
    let run = train_hmgat(model, &ds, &ctx.cfg.hmgat_training, &mut rng)?;
    ctx.write("hmgat_trace.csv", &run.trace.to_csv())?;
    let ckpt = ctx.path(&ctx.cfg.paths.hmgat, "hmgat.bswt");
    let meta = HmgatMeta { n_t: run.model.n_t, config: run.model.config.clone() };
    ctx.artifacts.extend(save_checkpoint(&ckpt, &run.model.store, &meta)?);
    let test_rate = if ds.test().is_empty() { None } else { Some(run.model.mean_sum_rate(ds.test(), None, &ds.config)?) };
    Ok(serde_json::json!({ "checkpoint": ckpt, "epochs": run.trace.records.len(), "test_sum_rate": test_rate }))
}

fn train_ncsn_cmd(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let ds = ctx.dataset()?;
    let schedule = ctx.cfg.schedule.build()?;
    let mut rng = ctx.rng();
    let model = NcsnModel::new(ctx.cfg.ncsn.clone(), ds.config.n_t, schedule.levels(), &mut rng)?;
    let run = train_ncsn(model, ds.train(), ds.val(), &schedule, &ctx.cfg.ncsn_training, &mut rng)?;
    ctx.write("ncsn_trace.csv", &run.trace.to_csv())?;
    let ckpt = ctx.path(&ctx.cfg.paths.ncsn, "ncsn.bswt");
    let meta = NcsnMeta { n_t: ds.config.n_t, config: ctx.cfg.ncsn.clone(), schedule: ctx.cfg.schedule };
    ctx.artifacts.extend(save_checkpoint(&ckpt, &run.model.store, &meta)?);
    let best = run.trace.records.iter().map(|r| r.val_metric).fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.min(v))));
    Ok(serde_json::json!({ "checkpoint": ckpt, "epochs": run.trace.records.len(), "best_val_loss": best }))
}

fn sample_csi(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let ckpt = ctx.path(&ctx.cfg.paths.ncsn, "ncsn.bswt");
    let (model, sched_cfg) = load_ncsn(&ckpt)?;
    let schedule = sched_cfg.build()?;
    let n = ctx.count.unwrap_or(ctx.cfg.generated);
    let sys = &ctx.cfg.system;
    if model.n_t != sys.n_t {
        return Err(Error::ConfigMismatch(format!("checkpoint N_T={} but system N_T={}", model.n_t, sys.n_t)));
    }
    let samples = generate(&model, &schedule, n, sys.n_t, sys.k, ctx.cfg.sample_chunk, &mut ctx.rng())?;
    let ds = CsiDataset::new(sys.clone(), samples)?;
    let path = ctx.path(&ctx.cfg.paths.generated, "generated.csid");
    write_dataset(&path, &ds)?;
    ctx.artifacts.push(path.clone());
    Ok(serde_json::json!({ "generated": path, "samples": n }))
}

fn levels(dbs: &[f64]) -> Vec<ErrorLevel> {
    dbs.iter().map(|&d| ErrorLevel::from_db(d)).collect()
}

fn train_dsn_cmd(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let ds = ctx.dataset()?;
    let mut rng = ctx.rng();
    let model = DebertModel::new(ctx.cfg.dsn.clone(), ds.config.n_t, &mut rng)?;
    let run = train_dsn(
        model,
        ds.train(),
        ds.val(),
        &levels(&ctx.cfg.error_db),
        ctx.cfg.lambda,
        &ctx.cfg.dsn_training,
        &mut rng,
    )?;
    ctx.write("dsn_trace.csv", &run.trace.to_csv())?;
    let ckpt = ctx.path(&ctx.cfg.paths.dsn, "dsn.bswt");
    let meta = DsnMeta { n_t: ds.config.n_t, config: ctx.cfg.dsn.clone() };
    ctx.artifacts.extend(save_checkpoint(&ckpt, &run.model.store, &meta)?);
    Ok(serde_json::json!({ "checkpoint": ckpt, "epochs": run.trace.records.len() }))
}

fn error_level(ctx: &Ctx<'_>) -> Result<ErrorLevel> {
    ctx.cfg
        .eval
        .error_db
        .map(ErrorLevel::from_db)
        .ok_or_else(|| Error::InvalidArgument("an error level (--error-db) is required".into()))
}

fn denoise_cmd(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let level = error_level(ctx)?;
    let model = load_dsn(&ctx.path(&ctx.cfg.paths.dsn, "dsn.bswt"))?;
    let input = ctx.data_path();
    let ds = read_dataset(&input, Some(&ctx.cfg.system))?;
    let refined = model.denoise_batch(&ds.samples, level.std_dev())?;
    let out = CsiDataset { samples: refined, ..ds };
    let path = ctx.out.join("denoised.csid");
    let manifest = save_dataset(&path, &out)?;
    ctx.artifacts.extend([path.clone(), manifest]);
    Ok(serde_json::json!({ "input": input, "output": path, "error_db": level.db(), "samples": out.len() }))
}

fn evaluate(ctx: &mut Ctx<'_>, name: &str, solver: Solver) -> Result<serde_json::Value> {
    let ds = ctx.dataset()?;
    let truth = ds.test();
    if truth.is_empty() {
        return Err(Error::InvalidArgument("dataset has no test samples".into()));
    }
    let mut rng = ctx.rng();
    let level = ctx.cfg.eval.error_db.map(ErrorLevel::from_db);
    let mut observed: Option<Vec<ComplexMatrix>> =
        level.map(|l| truth.iter().map(|h| perturb_csi(h, l, &mut rng)).collect());
    let mut input_nre = None;
    let mut output_nre = None;
    if let (Some(obs), Some(l)) = (&observed, level) {
        input_nre = Some(mean_nre(truth, obs)?);
        if ctx.cfg.eval.denoise {
            let model = load_dsn(&ctx.path(&ctx.cfg.paths.dsn, "dsn.bswt"))?;
            let refined = model.denoise_batch(obs, l.std_dev())?;
            output_nre = Some(mean_nre(truth, &refined)?);
            observed = Some(refined);
        }
    }
    let inputs = observed.as_deref().unwrap_or(truth);
    let p_max = ds.config.p_max;
    let solutions: Vec<HbfSolution> = match solver {
        Solver::Hmgat => load_hmgat(&ctx.path(&ctx.cfg.paths.hmgat, "hmgat.bswt"))?.solve_batch(inputs, p_max)?,
        Solver::Pzf => inputs.iter().map(|h| baselines::pzf(h, p_max)).collect::<Result<_>>()?,
        Solver::EqualPowerRandom => inputs
            .iter()
            .map(|h| baselines::equal_power_random(h, p_max, &mut rng))
            .collect::<Result<_>>()?,
    };
    let mut it = solutions.into_iter();
    let summary = evaluate_sum_rates(truth, observed.as_deref(), ds.config.sigma2, |_| {
        it.next().ok_or_else(|| Error::InvalidArgument("solution count".into()))
    })?;
    ctx.write(&format!("{name}.csv"), &summary.to_csv())?;
    Ok(serde_json::json!({
        "solver": solver,
        "mean_sum_rate": summary.mean,
        "samples": truth.len(),
        "error_db": level.map(|l| l.db()),
        "denoised": ctx.cfg.eval.denoise && level.is_some(),
        "input_nre": input_nre,
        "output_nre": output_nre,
    }))
}

fn mean_nre(truth: &[ComplexMatrix], est: &[ComplexMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for (h, e) in truth.iter().zip(est) {
        total += nre(h, e)?;
    }
    Ok(total / truth.len() as f64)
}

fn augment(ctx: &mut Ctx<'_>) -> Result<serde_json::Value> {
    let ds = ctx.dataset()?;
    let gen_path = ctx.path(&ctx.cfg.paths.generated, "generated.csid");
    let generated = read_dataset(&gen_path, Some(&ctx.cfg.system))?.samples;
    let n = ctx.count.unwrap_or(generated.len());
    if n > generated.len() {
        return Err(Error::InvalidArgument(format!("requested {n} generated samples, file holds {}", generated.len())));
    }
    let out = ds.augment_train(&generated[..n])?;
    let path = ctx.out.join("augmented.csid");
    let manifest = save_dataset(&path, &out)?;
    ctx.artifacts.extend([path.clone(), manifest]);
    Ok(serde_json::json!({
        "output": path,
        "added": n,
        "train": out.train().len(),
        "val": out.val().len(),
        "test": out.test().len(),
    }))
}
