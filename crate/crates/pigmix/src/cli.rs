//! Command-line front end.

use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pigmix_core::colorimetry::{Colorimeter, Srgb8};
use pigmix_core::dataset::{LabelType, Normalization, SyntheticConfig};
use pigmix_core::eval::{compare_km, evaluate, KmComparisonConfig};
use pigmix_core::mixnet::{train, ModelWeights, NetworkConfig, TrainError, TrainObserver};
use pigmix_core::palette::{LutBuildConfig, LutProvenance};
use pigmix_core::spectrum::PigmentId;
use serde_json::json;

use crate::corpus;
use crate::error::{read_to_string, write_atomic, AppError, AppResult};
use crate::lut_file::{build_lut_file, load_lut, BuildOptions};
use crate::model_file::{load_model, save_model, sha256};
use crate::service::{self, ServiceConfig};
use crate::wire::{self, MixRequest};

#[derive(Debug, Parser)]
#[command(
    name = "pigmix",
    version,
    about = "Watercolor pigment mixture prediction and recipe lookup"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate measured pigment and mixture files into a corpus directory.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus with the Kubelka-Munk model.
    Synth(SynthArgs),
    /// Train the mixture network on a corpus' training split.
    Train(TrainArgs),
    /// Error distribution and symmetry audit on the test split.
    Eval(EvalArgs),
    /// Ground truth vs model vs three-channel Kubelka-Munk.
    CompareKm(CompareKmArgs),
    /// Predict every two-pigment recipe into a lookup table.
    BuildLut(BuildLutArgs),
    /// Closest recipes for a color.
    Match(MatchArgs),
    /// Predicted color of one recipe.
    Mix(MixArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct NormArgs {
    /// Quantities are divided by this many mL in the feature vector.
    #[arg(long, default_value_t = 0.16)]
    pub quantity_scale_ml: f64,
}

impl NormArgs {
    fn get(&self) -> AppResult<Normalization> {
        if !self.quantity_scale_ml.is_finite() || self.quantity_scale_ml <= 0.0 {
            return Err(AppError::Usage("--quantity-scale-ml must be positive".into()));
        }
        Ok(Normalization {
            quantity_scale_ml: self.quantity_scale_ml,
        })
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub pigments: PathBuf,
    #[arg(long)]
    pub mixtures: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
    #[command(flatten)]
    pub norm: NormArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Seeds the palette, the noise and the train/test split.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub strength_jitter: f64,
    /// Standard deviation of additive measurement noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[command(flatten)]
    pub norm: NormArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Network config JSON; absent fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training report path [default: <out>.report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also save the model every N epochs.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareKmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub cases: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildLutArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus directory or pigment CSV providing the primary spectra.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated pigment indices [default: all 13].
    #[arg(long, value_delimiter = ',')]
    pub pigments_subset: Option<Vec<u8>>,
    /// Comma-separated quantities in µL [default: 10, 12, ..., 160].
    #[arg(long, value_delimiter = ',')]
    pub quantities_ul: Option<Vec<u32>>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub lut: PathBuf,
    /// Target color as R,G,B.
    #[arg(long, value_parser = parse_rgb)]
    pub rgb: Srgb8,
    #[arg(long, default_value_t = wire::DEFAULT_TOP_K)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus directory or pigment CSV providing the primary spectra.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub pa: u8,
    /// mL, on the 0.002 mL grid within [0.01, 0.16].
    #[arg(long)]
    pub qa: f64,
    #[arg(long)]
    pub pb: u8,
    #[arg(long)]
    pub qb: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

pub fn parse_rgb(s: &str) -> Result<Srgb8, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, g, b] = parts[..] else {
        return Err(format!("expected R,G,B, got {s:?}"));
    };
    let c = |v: &str| v.parse::<u8>().map_err(|_| format!("{v:?} is not in 0..=255"));
    Ok(Srgb8::new(c(r)?, c(g)?, c(b)?))
}

fn print_json(v: &impl serde::Serialize) -> AppResult<()> {
    print_text(&wire::to_json(v))
}

fn print_text(s: &str) -> AppResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| AppError::io("<stdout>", e))
}

pub fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::CompareKm(a) => compare_km_cmd(a),
        Command::BuildLut(a) => build_lut(a),
        Command::Match(a) => match_cmd(a),
        Command::Mix(a) => mix_cmd(a),
        Command::Serve(a) => serve(a),
    }
}

fn corpus_summary(c: &corpus::LoadedCorpus) -> serde_json::Value {
    json!({
        "schema_version": wire::SCHEMA_VERSION,
        "corpus": c.dir,
        "counts": c.manifest.counts,
    })
}

fn ingest(a: IngestArgs) -> AppResult<()> {
    let c = corpus::ingest(&a.pigments, &a.mixtures, &a.out, a.split_seed, a.norm.get()?)?;
    print_json(&corpus_summary(&c))
}

fn synth(a: SynthArgs) -> AppResult<()> {
    let cfg = SyntheticConfig {
        seed: a.seed,
        strength_jitter: a.strength_jitter,
        noise_sigma: a.noise_sigma,
    };
    let c = corpus::synth(&a.out, &cfg, a.norm.get()?)?;
    print_json(&corpus_summary(&c))
}

fn load_config(path: Option<&Path>) -> AppResult<NetworkConfig> {
    let Some(p) = path else {
        return Ok(NetworkConfig::default());
    };
    serde_json::from_str(&read_to_string(p)?).map_err(|e| AppError::format(p, e.to_string()))
}

struct Progress<'a> {
    every: Option<u64>,
    out: &'a Path,
    log_every: u64,
    failed: Option<AppError>,
}

impl TrainObserver for Progress<'_> {
    fn epoch_end(&mut self, epoch: u64, loss: f64, weights: &ModelWeights) -> ControlFlow<()> {
        if (epoch + 1) % self.log_every == 0 {
            tracing::info!(epoch = epoch + 1, loss, "training");
        }
        if self.every.is_some_and(|n| n > 0 && (epoch + 1) % n == 0) {
            if let Err(e) = save_model(self.out, weights) {
                self.failed = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }
}

fn default_report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn train_cmd(a: TrainArgs) -> AppResult<()> {
    let c = corpus::load(&a.corpus)?;
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.normalization != c.manifest.normalization {
        tracing::warn!("config normalization differs from the corpus manifest; using the corpus value");
        cfg.normalization = c.manifest.normalization;
    }
    let w = ModelWeights::init(cfg)?;
    let mut obs = Progress {
        every: a.checkpoint_every,
        out: &a.out,
        log_every: 100,
        failed: None,
    };
    let t0 = Instant::now();
    let result = train(w, &c.split.train, &mut obs);
    let wall = t0.elapsed().as_secs_f64();
    if let Some(e) = obs.failed {
        return Err(e);
    }
    let report_path = a.report.unwrap_or_else(|| default_report_path(&a.out));
    match result {
        Ok(mut t) => {
            t.report.wall_time_s = Some(wall);
            let hash = save_model(&a.out, &t.weights)?;
            let doc = json!({
                "schema_version": wire::SCHEMA_VERSION,
                "model": a.out,
                "model_hash": hex::encode(hash),
                "train_samples": c.split.train.len(),
                "report": t.report,
            });
            write_atomic(&report_path, wire::to_json(&doc).as_bytes())?;
            print_json(&json!({
                "schema_version": wire::SCHEMA_VERSION,
                "model": a.out,
                "model_hash": hex::encode(hash),
                "report": report_path,
                "epochs_run": t.report.epochs_run,
                "final_loss": t.report.final_loss,
                "wall_time_s": wall,
            }))
        }
        Err(TrainError::Diverged {
            epoch,
            last_good,
            mut report,
        }) => {
            report.wall_time_s = Some(wall);
            save_model(&a.out, &last_good)?;
            let doc = json!({
                "schema_version": wire::SCHEMA_VERSION,
                "model": a.out,
                "diverged_at_epoch": epoch,
                "report": report,
            });
            write_atomic(&report_path, wire::to_json(&doc).as_bytes())?;
            Err(AppError::Diverged { epoch, saved: a.out })
        }
        Err(TrainError::Core(e)) => Err(e.into()),
    }
}

fn eval_cmd(a: EvalArgs) -> AppResult<()> {
    let c = corpus::load(&a.corpus)?;
    let m = load_model(&a.model)?;
    check_normalization(&c, &m.weights)?;
    let r = evaluate(&m.weights, &c.split.test, &Colorimeter::standard())?;
    let files = crate::report::write_eval(&a.out, &r, &m.hash_hex())?;
    let per_type = |l: LabelType| {
        let d: Vec<f64> = r.samples.iter().filter(|s| s.label == l).map(|s| s.delta_e).collect();
        pigmix_core::eval::fraction_below(&d, 5.0)
    };
    print_json(&json!({
        "schema_version": wire::SCHEMA_VERSION,
        "model_hash": m.hash_hex(),
        "test_samples": r.samples.len(),
        "fraction_below_5": r.fraction_below_5,
        "fraction_below_5_type_i": per_type(LabelType::TypeI),
        "fraction_below_5_type_m": per_type(LabelType::TypeM),
        "summary": r.summary,
        "symmetry_max_delta_e": r.symmetry.max_delta_e,
        "files": files,
    }))
}

fn check_normalization(c: &corpus::LoadedCorpus, w: &ModelWeights) -> AppResult<()> {
    if w.config.normalization != c.manifest.normalization {
        return Err(AppError::Usage(
            "model and corpus use different feature normalization".into(),
        ));
    }
    Ok(())
}

fn compare_km_cmd(a: CompareKmArgs) -> AppResult<()> {
    let c = corpus::load(&a.corpus)?;
    let m = load_model(&a.model)?;
    check_normalization(&c, &m.weights)?;
    let cfg = KmComparisonConfig {
        cases: a.cases,
        ..KmComparisonConfig::default()
    };
    let k = compare_km(&m.weights, &c.corpus, &c.split.test, &cfg, &Colorimeter::standard())?;
    let files = crate::report::write_km(&a.out, &k, &m.hash_hex())?;
    print_json(&json!({
        "schema_version": wire::SCHEMA_VERSION,
        "cases": k.cases.len(),
        "model_wins": k.model_wins,
        "skipped": k.skipped.len(),
        "files": files,
    }))
}

fn build_lut(a: BuildLutArgs) -> AppResult<()> {
    let m = load_model(&a.model)?;
    let p = service::load_pigments(&a.corpus)?;
    let mut config = LutBuildConfig::default();
    if let Some(ids) = a.pigments_subset {
        config.pigments = ids.into_iter().map(PigmentId::new).collect::<Result<_, _>>()?;
    }
    if let Some(q) = a.quantities_ul {
        config.quantities_ul = q;
    }
    config.validate()?;
    let provenance = LutProvenance {
        model_hash: m.hash,
        config,
    };
    let run = || {
        build_lut_file(
            &a.out,
            &m.weights,
            &p.records,
            &p.substrate,
            &provenance,
            &BuildOptions::default(),
            |done, total| tracing::info!(done, total, "building LUT"),
        )
    };
    let t0 = Instant::now();
    let outcome = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AppError::Internal(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let bytes = crate::error::read_bytes(&a.out)?;
    print_json(&json!({
        "schema_version": wire::SCHEMA_VERSION,
        "lut": a.out,
        "entries": outcome.total,
        "resumed_from": outcome.resumed_from,
        "lut_hash": hex::encode(sha256(&bytes)),
        "model_hash": m.hash_hex(),
        "wall_time_s": t0.elapsed().as_secs_f64(),
    }))
}

fn match_cmd(a: MatchArgs) -> AppResult<()> {
    if !a.lut.exists() {
        return Err(AppError::NotReady(format!("no LUT at {}", a.lut.display())));
    }
    let lut = load_lut(&a.lut)?;
    let r = wire::match_response(&lut, &Colorimeter::standard(), a.rgb, a.top)?;
    print_json(&r)
}

fn mix_cmd(a: MixArgs) -> AppResult<()> {
    let req = MixRequest {
        pa: a.pa,
        qa: a.qa,
        pb: a.pb,
        qb: a.qb,
    };
    req.resolve()?;
    if !a.model.exists() {
        return Err(AppError::NotReady(format!("no model at {}", a.model.display())));
    }
    let m = load_model(&a.model)?;
    let p = service::load_pigments(&a.corpus)?;
    let r = wire::mix_response(&m, &p.records, &p.substrate, &Colorimeter::standard(), &req)?;
    print_json(&r)
}

fn serve(a: ServeArgs) -> AppResult<()> {
    let cfg = ServiceConfig::load(&a.config)?;
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::Internal(e.to_string()))?
        .block_on(service::serve(cfg))
}
