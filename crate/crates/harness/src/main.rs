use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use trajspace::dataset::{make_split, Task, TaskSpec};
use trajspace_harness::ablation::{ablate, ablation_markdown, AblationPlan, Sweep};
use trajspace_harness::corpus::Corpus;
use trajspace_harness::manifest::{Manifest, RunConfig};
use trajspace_harness::model::{build_space, AnchorDiffusion};
use trajspace_harness::protocol::{
    run_protocol, run_task, task_specs, Checkpoints, EvalResult, PredictorHandle, RunOptions,
};
use trajspace_harness::report::{plot_predictions, report, Format};
use trajspace_harness::synthetic;

#[derive(Parser)]
#[command(
    name = "trajspace",
    version,
    about = "Pedestrian trajectory forecasting in a shared motion space"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scene registry; overrides the one in the config. Without either the
    /// synthetic corpus is generated in memory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Small network and epoch budget for a single CPU core.
    #[arg(long, global = true)]
    desk_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic scenes, maps and registry to the output directory.
    GenerateSynthetic,
    /// Fit the motion space on one split's training windows.
    BuildSpace {
        #[arg(long, default_value = "stochastic")]
        task: String,
        #[arg(long)]
        scene: String,
    },
    /// Train the predictor for one split.
    Train {
        #[arg(long, default_value = "stochastic")]
        task: String,
        #[arg(long)]
        scene: String,
        /// Output model file (default: <out-dir>/model.json).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a predictor on a task (every split, or one scene).
    Evaluate {
        #[arg(long, default_value = "stochastic")]
        task: String,
        #[arg(long)]
        scene: Option<String>,
        #[arg(long, value_enum, default_value_t = Predictor::Model)]
        predictor: Predictor,
        /// Directory of per-split models to load instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Keep the models trained during evaluation.
        #[arg(long)]
        save_models: bool,
    },
    /// Sample futures for one test scene from a trained model.
    Predict {
        #[arg(long, default_value = "stochastic")]
        task: String,
        #[arg(long)]
        scene: String,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Agents drawn in the PNG.
        #[arg(long, default_value_t = 12)]
        plot_agents: usize,
    },
    /// Turn a results JSON file into tables.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "all")]
        format: String,
    },
    /// Sweep K, M, denoising mode or coupling.
    Ablate {
        #[arg(long, value_enum, default_value_t = SweepKind::All)]
        sweep: SweepKind,
        /// Use every split instead of one per task.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Predictor {
    Model,
    ConstantVelocity,
    NearestAnchor,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    K,
    Steps,
    Mode,
    Coupling,
    All,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.data.is_some() {
        config.registry = cli.data.clone();
    }
    config.desk_scale |= cli.desk_scale;
    let config = config.resolved();
    std::fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.as_path();

    let verb = match &cli.command {
        Command::GenerateSynthetic => "generate-synthetic",
        Command::BuildSpace { .. } => "build-space",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Predict { .. } => "predict",
        Command::Report { .. } => "report",
        Command::Ablate { .. } => "ablate",
    };
    Manifest::new(verb, &config).save(out.join(format!("manifest-{verb}.json")))?;

    match cli.command {
        Command::GenerateSynthetic => {
            let scenes = synthetic::generate(&config.synthetic);
            let reg = synthetic::write(&scenes, out)?;
            println!("{}", reg.display());
        }
        Command::BuildSpace { task, scene } => {
            let corpus = load_corpus(&config)?;
            let spec = split_spec(&task, &scene, &corpus, config.seed)?;
            let (train, _) = make_split(&spec, &corpus.windows(&spec))?;
            let space = build_space(&train, config.model.k, config.model.t_win)?;
            let path = out.join("space.json");
            space.save(&path)?;
            println!("{}", path.display());
        }
        Command::Train {
            task,
            scene,
            checkpoint,
        } => {
            let corpus = load_corpus(&config)?;
            let spec = split_spec(&task, &scene, &corpus, config.seed)?;
            let (train, _) = make_split(&spec, &corpus.windows(&spec))?;
            let fields = corpus.fields(&spec.train_scenes)?;
            let (model, rep) =
                AnchorDiffusion::fit(&train, &fields, spec.samples, &config.model, &config.hash())?;
            let path = checkpoint.unwrap_or_else(|| out.join("model.json"));
            model.save(&path)?;
            std::fs::write(out.join("train_loss.json"), serde_json::to_string(&rep)?)?;
            println!("{}", path.display());
        }
        Command::Evaluate {
            task,
            scene,
            predictor,
            checkpoint,
            save_models,
        } => {
            let corpus = load_corpus(&config)?;
            let task: Task = task.parse()?;
            let checkpoints = match (checkpoint, save_models) {
                (Some(dir), _) => Checkpoints::Load(dir),
                (None, true) => Checkpoints::TrainAndSave(out.join("models")),
                (None, false) => Checkpoints::Train,
            };
            let handle = match predictor {
                Predictor::Model => PredictorHandle::AnchorDiffusion {
                    config: config.model.clone(),
                    checkpoints,
                },
                Predictor::ConstantVelocity => PredictorHandle::ConstantVelocity,
                Predictor::NearestAnchor => PredictorHandle::NearestAnchor {
                    config: config.model.clone(),
                },
            };
            let opts = RunOptions {
                split_seed: config.seed,
                sample_seed: config.seed,
                config_hash: config.hash(),
            };
            let results = match scene {
                Some(scene) => {
                    let spec = split_spec(task.label(), &scene, &corpus, config.seed)?;
                    run_protocol(&spec, &handle, &corpus, &opts)?
                }
                None => run_task(task, &handle, &corpus, &opts)?,
            };
            for p in report(&results, Format::All, out)? {
                println!("{}", p.display());
            }
        }
        Command::Predict {
            task,
            scene,
            checkpoint,
            plot_agents,
        } => {
            let corpus = load_corpus(&config)?;
            let spec = split_spec(&task, &scene, &corpus, config.seed)?;
            let model = AnchorDiffusion::load(&checkpoint)?;
            let (_, test) = make_split(&spec, &corpus.windows(&spec))?;
            let test: Vec<_> = test.into_iter().filter(|w| w.scene_id == scene).collect();
            let fields = corpus.fields([&scene])?;
            let pred = model.predict(&test, &fields, spec.t_fut, config.seed)?;
            let json = out.join("predictions.json");
            std::fs::write(&json, serde_json::to_string(&pred)?)?;
            let png = out.join(format!("{scene}.png"));
            plot_predictions(&png, corpus.maps.get(&scene), &test, &pred, plot_agents)?;
            println!("{}\n{}", json.display(), png.display());
        }
        Command::Report { results, format } => {
            let format: Format = format.parse()?;
            let rows: Vec<EvalResult> = serde_json::from_str(&std::fs::read_to_string(&results)?)?;
            for p in report(&rows, format, out)? {
                println!("{}", p.display());
            }
        }
        Command::Ablate { sweep, full } => {
            let corpus = load_corpus(&config)?;
            let sweeps = match sweep {
                SweepKind::K => vec![Sweep::k_default()],
                SweepKind::Steps => vec![Sweep::steps_default()],
                SweepKind::Mode => vec![Sweep::mode_default()],
                SweepKind::Coupling => vec![Sweep::coupling_default()],
                SweepKind::All => vec![
                    Sweep::k_default(),
                    Sweep::mode_default(),
                    Sweep::coupling_default(),
                    Sweep::steps_default(),
                ],
            };
            let plan = AblationPlan {
                full,
                ..AblationPlan::default()
            };
            let opts = RunOptions {
                split_seed: config.seed,
                sample_seed: config.seed,
                config_hash: config.hash(),
            };
            for s in sweeps {
                let rows = ablate(&corpus, &config.model, &s, &plan, &opts)?;
                let name = format!("ablation_{}", s.title().to_lowercase());
                std::fs::write(
                    out.join(format!("{name}.json")),
                    serde_json::to_string_pretty(&rows)?,
                )?;
                let md = out.join(format!("{name}.md"));
                std::fs::write(&md, ablation_markdown(s.title(), &rows)?)?;
                println!("{}", md.display());
            }
        }
    }
    Ok(())
}

fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    match &config.registry {
        Some(reg) => {
            Corpus::load(reg).with_context(|| format!("loading registry {}", reg.display()))
        }
        None => {
            log::info!("no registry given, using the synthetic corpus");
            Ok(synthetic::corpus(&config.synthetic)?)
        }
    }
}

/// The split of `task` that tests on `scene` (or, for domain adaptation,
/// trains on it).
fn split_spec(task: &str, scene: &str, corpus: &Corpus, split_seed: u64) -> Result<TaskSpec> {
    let task: Task = task.parse()?;
    let specs = task_specs(task, &corpus.order, split_seed)?;
    let found = specs.into_iter().find(|s| {
        if task == Task::DomainAdaptation {
            s.train_scenes[0] == scene
        } else {
            s.test_scenes[0] == scene
        }
    });
    match found {
        Some(s) => Ok(s),
        None => bail!(
            "scene {scene:?} not in corpus ({})",
            corpus.order.join(", ")
        ),
    }
}
