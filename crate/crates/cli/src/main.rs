//! `reloc`: run relocalization experiments on 7-Scenes style datasets.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use reloc::eval::{
    run_pipeline, run_viewpoint_experiment, write_summary_csv, write_viewpoint_csv, RelposeSource, RetrievalSource,
    ViewpointConfig,
};
use reloc::fusion::FusionConfig;
use reloc::relpose::{load_predictions, NoiseConfig, PredictionSet};
use reloc::retrieval::{load_features, FeatureStore};
use reloc::scene::{
    generate_pairs, load_dataset, write_pairs_jsonl, write_scene, ImageRecord, SceneDatabase, SplitSpec,
    DEFAULT_PAIR_MAX_ANGLE_DEG, DEFAULT_PAIR_MAX_DIST_M,
};
use reloc::synth::{generate_scene, SynthSceneConfig};

#[derive(Parser)]
#[command(
    name = "reloc",
    version,
    about = "Camera relocalization from relative pose estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize every test image and report per-scene median errors.
    Evaluate(EvaluateArgs),
    /// Localize with ground-truth neighbor sets taken at increasing rank offsets.
    Viewpoint(ViewpointArgs),
    /// Build training pairs from the train split.
    Pairs(PairsArgs),
    /// Write a seeded synthetic dataset in 7-Scenes layout.
    SynthScene(SynthArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset root holding one directory per scene.
    #[arg(long)]
    root: PathBuf,
    /// Scenes to load (comma separated); all scenes under the root by default.
    #[arg(long, value_delimiter = ',')]
    scenes: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RetrievalMode {
    Features,
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RelposeMode {
    Predictions,
    Synth,
}

#[derive(Args)]
struct RelposeArgs {
    #[arg(long, value_enum, default_value = "synth")]
    relpose: RelposeMode,
    /// JSONL file of relative pose predictions.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    sigma_rot_deg: Option<f64>,
    #[arg(long)]
    sigma_dir_deg: Option<f64>,
    #[arg(long)]
    outlier_prob: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FusionArgs {
    /// Inlier threshold in degrees, shared by translation and rotation.
    #[arg(long, default_value_t = 20.0)]
    thresh_deg: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, value_enum, default_value = "oracle")]
    retrieval: RetrievalMode,
    /// Feature matrix file (features retrieval).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Row ids of the feature matrix, one per line.
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Neighbors per query.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Rotation weight of the oracle ranking metric.
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    relpose: RelposeArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Output directory for report.json and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ViewpointArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Images per viewpoint set.
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    interval: usize,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[command(flatten)]
    relpose: RelposeArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Output directory for viewpoint.json and viewpoint.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PairsArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, default_value_t = DEFAULT_PAIR_MAX_DIST_M)]
    max_dist: f64,
    #[arg(long, default_value_t = DEFAULT_PAIR_MAX_ANGLE_DEG)]
    max_angle: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for pairs.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene names (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "synth")]
    scenes: Vec<String>,
    #[arg(long, default_value_t = 2)]
    train_sequences: usize,
    #[arg(long, default_value_t = 1)]
    test_sequences: usize,
    #[arg(long, default_value_t = 250)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset root to create.
    #[arg(long)]
    out: PathBuf,
}

enum Relpose {
    Predictions(PredictionSet),
    Synth(NoiseConfig),
}

impl Relpose {
    fn source(&self) -> RelposeSource<'_> {
        match self {
            Relpose::Predictions(set) => RelposeSource::Predictions(set),
            Relpose::Synth(cfg) => RelposeSource::Synth(*cfg),
        }
    }
}

impl RelposeArgs {
    fn check(&self) -> Result<()> {
        let noise_flags = self.sigma_rot_deg.is_some() || self.sigma_dir_deg.is_some() || self.outlier_prob.is_some();
        match self.relpose {
            RelposeMode::Predictions if self.predictions.is_none() => {
                bail!("--relpose predictions requires --predictions")
            }
            RelposeMode::Predictions if noise_flags => {
                bail!("--sigma-rot-deg/--sigma-dir-deg/--outlier-prob only apply to --relpose synth")
            }
            RelposeMode::Synth if self.predictions.is_some() => bail!("--predictions requires --relpose predictions"),
            RelposeMode::Synth => {
                self.noise().validate()?;
                Ok(())
            }
            RelposeMode::Predictions => Ok(()),
        }
    }

    fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            sigma_rot_deg: self.sigma_rot_deg.unwrap_or(0.0),
            sigma_dir_deg: self.sigma_dir_deg.unwrap_or(0.0),
            outlier_prob: self.outlier_prob.unwrap_or(0.0),
            seed: self.seed,
        }
    }

    fn load(&self) -> Result<Relpose> {
        Ok(match (&self.relpose, &self.predictions) {
            (RelposeMode::Predictions, Some(path)) => Relpose::Predictions(
                load_predictions(path).with_context(|| format!("reading predictions {}", path.display()))?,
            ),
            _ => Relpose::Synth(self.noise()),
        })
    }
}

impl FusionArgs {
    fn config(&self, n_neighbors: usize) -> Result<FusionConfig> {
        let cfg = FusionConfig {
            n_neighbors,
            angle_thresh_deg: self.thresh_deg,
            ..FusionConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(dataset: &DatasetArgs) -> Result<SceneDatabase> {
    let db = load_dataset(&dataset.root, &dataset.scenes, &SplitSpec::default())
        .with_context(|| format!("loading dataset {}", dataset.root.display()))?;
    log::info!("loaded {} images from {} scene(s)", db.len(), db.scenes().len());
    Ok(db)
}

/// Creates `dir` and writes `name` inside it through `fill`.
fn write_output(dir: &Path, name: &str, fill: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).with_context(|| format!("writing {}", path.display()))?;
    std::io::Write::flush(&mut w)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: serde::Serialize>(w: &mut BufWriter<fs::File>, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    std::io::Write::write_all(w, b"\n")?;
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    args.relpose.check()?;
    let cfg = args.fusion.config(args.n)?;
    match args.retrieval {
        RetrievalMode::Features if args.features.is_none() || args.ids.is_none() => {
            bail!("--retrieval features requires --features and --ids")
        }
        RetrievalMode::Oracle if args.features.is_some() || args.ids.is_some() => {
            bail!("--features/--ids require --retrieval features")
        }
        RetrievalMode::Features if args.beta.is_some() => bail!("--beta only applies to --retrieval oracle"),
        _ => {}
    }
    let beta = args.beta.unwrap_or(1.0);
    if !(beta.is_finite() && beta >= 0.0) {
        bail!("--beta must be a non-negative number");
    }

    let db = load(&args.dataset)?;
    let store: Option<FeatureStore> = match (&args.features, &args.ids) {
        (Some(matrix), Some(ids)) => {
            Some(load_features(matrix, ids).with_context(|| format!("reading features {}", matrix.display()))?)
        }
        _ => None,
    };
    let retrieval = match &store {
        Some(s) => RetrievalSource::Features(s),
        None => RetrievalSource::PoseOracle { beta },
    };
    let relpose = args.relpose.load()?;
    let queries: Vec<&ImageRecord> = db.test_records();
    let reports = run_pipeline(&db, &queries, &retrieval, &relpose.source(), &cfg, args.fusion.jobs)?;
    for r in &reports {
        log::info!(
            "{}: {} queries, {} failed, median {:?} m / {:?} deg",
            r.scene,
            r.n_queries,
            r.n_failures,
            r.median_position_m,
            r.median_orientation_deg
        );
    }

    write_output(&args.out, "report.json", |w| write_json(w, &reports))?;
    write_output(&args.out, "summary.csv", |w| Ok(write_summary_csv(w, &reports)?))
}

fn viewpoint(args: &ViewpointArgs) -> Result<()> {
    args.relpose.check()?;
    let cfg = args.fusion.config(args.n)?;
    if !(args.beta.is_finite() && args.beta >= 0.0) {
        bail!("--beta must be a non-negative number");
    }
    if args.count == 0 {
        bail!("--count must be positive");
    }
    let vp = ViewpointConfig {
        set_size: args.n,
        interval: args.interval,
        count: args.count,
        beta: args.beta,
    };

    let db = load(&args.dataset)?;
    let relpose = args.relpose.load()?;
    let queries: Vec<&ImageRecord> = db.test_records();
    let report = run_viewpoint_experiment(&db, &queries, &relpose.source(), &cfg, &vp, args.fusion.jobs)?;
    for s in &report.scenes {
        if let Some(reason) = &s.skipped {
            eprintln!("warning: scene {} skipped: {reason}", s.scene);
        }
    }

    write_output(&args.out, "viewpoint.json", |w| write_json(w, &report))?;
    write_output(&args.out, "viewpoint.csv", |w| Ok(write_viewpoint_csv(w, &report)?))
}

fn pairs(args: &PairsArgs) -> Result<()> {
    if !(args.max_dist.is_finite() && args.max_dist >= 0.0) || !(0.0..=180.0).contains(&args.max_angle) {
        bail!("--max-dist must be non-negative and --max-angle within [0, 180]");
    }
    let db = load(&args.dataset)?;
    let pairs = generate_pairs(&db, args.max_dist, args.max_angle, args.seed)?;
    log::info!("{} training pairs", pairs.len());
    write_output(&args.out, "pairs.jsonl", |w| Ok(write_pairs_jsonl(w, &pairs)?))
}

fn synth_scene(args: &SynthArgs) -> Result<()> {
    if args.scenes.is_empty() || args.scenes.iter().any(|s| s.is_empty() || s.contains(['/', '\\'])) {
        bail!("--scenes needs plain, non-empty scene names");
    }
    if args.frames == 0 || args.train_sequences + args.test_sequences == 0 {
        bail!("--frames and the sequence counts must produce at least one image");
    }
    let cfg = SynthSceneConfig {
        scenes: args.scenes.clone(),
        train_sequences: args.train_sequences,
        test_sequences: args.test_sequences,
        frames_per_sequence: args.frames,
        seed: args.seed,
        ..SynthSceneConfig::default()
    };
    let db = generate_scene(&cfg)?;
    write_scene(&db, &args.out, &SplitSpec::default())
        .with_context(|| format!("writing dataset to {}", args.out.display()))?;
    log::info!("wrote {} images to {}", db.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RPF_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Viewpoint(a) => viewpoint(a),
        Command::Pairs(a) => pairs(a),
        Command::SynthScene(a) => synth_scene(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
