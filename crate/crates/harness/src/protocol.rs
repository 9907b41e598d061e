use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array4;
use serde::{Deserialize, Serialize};
use trajspace::dataset::{make_split, Task, TaskSpec};

use crate::baseline::{constant_velocity, NearestAnchor};
use crate::corpus::{futures, histories, Corpus, Fields, Window};
use crate::metrics::{ade_fde, Metrics};
use crate::model::{traversable_fraction, AnchorDiffusion, ModelConfig};
use crate::{HarnessError, Result};

/// What a result row stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// One test scene or one ordered scene pair.
    Split,
    /// Mean over the pairs that share a source scene.
    SourceAverage,
    /// Mean over all splits of the task.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: String,
    pub task: Task,
    /// Scene name, pair label such as `A2B`, `A2*` or `AVG`.
    pub scene: String,
    pub kind: RowKind,
    pub ade: f64,
    pub fde: f64,
    /// Samples per agent (S).
    pub samples: usize,
    /// Windows scored.
    pub count: usize,
    /// Share of predicted points on walkable cells, where a map exists.
    pub traversable: Option<f64>,
    pub config_hash: String,
}

impl EvalResult {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            ade: self.ade,
            fde: self.fde,
        }
    }
}

/// Where trained models come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// Train per split, keep nothing.
    Train,
    /// Train per split and write each model under this directory.
    TrainAndSave(PathBuf),
    /// Evaluate only, loading models from this directory.
    Load(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorHandle {
    AnchorDiffusion {
        config: ModelConfig,
        checkpoints: Checkpoints,
    },
    ConstantVelocity,
    NearestAnchor {
        config: ModelConfig,
    },
}

impl PredictorHandle {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorHandle::AnchorDiffusion { .. } => "AnchorDiffusion",
            PredictorHandle::ConstantVelocity => "ConstantVelocity",
            PredictorHandle::NearestAnchor { .. } => "NearestAnchor",
        }
    }
}

/// Options shared by every split of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Few-shot subsample seed.
    pub split_seed: u64,
    /// Sampling seed at evaluation time.
    pub sample_seed: u64,
    pub config_hash: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            split_seed: 0,
            sample_seed: 0,
            config_hash: String::new(),
        }
    }
}

/// Checkpoint file name for one split.
pub fn checkpoint_name(spec: &TaskSpec, order: &[String]) -> String {
    let train = spec.train_scenes.join("-");
    let test = if spec.task == Task::DomainAdaptation {
        "all".to_string()
    } else {
        spec.label(order)
    };
    format!("{:?}_{train}_to_{test}.json", spec.task).to_lowercase()
}

/// Trains (or loads) the predictor for `spec` and scores every test scene.
///
/// One row per test scene; for domain adaptation the row label is the
/// letter pair.
pub fn run_protocol(
    spec: &TaskSpec,
    predictor: &PredictorHandle,
    corpus: &Corpus,
    opts: &RunOptions,
) -> Result<Vec<EvalResult>> {
    let windows = corpus.windows(spec);
    let (train, test) = make_split(spec, &windows)?;
    let fields = corpus.fields(spec.train_scenes.iter().chain(&spec.test_scenes))?;
    log::info!(
        "{:?} {} train / {} test windows",
        spec.task,
        train.len(),
        test.len()
    );

    let scorer: Box<dyn Fn(&[Window]) -> Result<Array4<f64>>> = match predictor {
        PredictorHandle::ConstantVelocity => {
            Box::new(|w: &[Window]| constant_velocity(&histories(w), spec.t_fut, spec.samples))
        }
        PredictorHandle::NearestAnchor { config } => {
            let model = NearestAnchor::fit(&train, spec.samples, config)?;
            let fields = fields.clone();
            Box::new(move |w: &[Window]| model.predict(w, &fields, spec.t_fut, spec.samples))
        }
        PredictorHandle::AnchorDiffusion {
            config,
            checkpoints,
        } => {
            let model = obtain_model(spec, &train, &fields, config, checkpoints, corpus, opts)?;
            let fields = fields.clone();
            let seed = opts.sample_seed;
            Box::new(move |w: &[Window]| model.predict(w, &fields, spec.t_fut, seed))
        }
    };

    let mut rows = Vec::new();
    for scene in &spec.test_scenes {
        let scene_windows: Vec<Window> = test
            .iter()
            .filter(|w| &w.scene_id == scene)
            .cloned()
            .collect();
        if scene_windows.is_empty() {
            return Err(HarnessError::Config(format!(
                "scene {scene} has no test windows"
            )));
        }
        let pred = scorer(&scene_windows)?;
        let m = ade_fde(pred.view(), futures(&scene_windows).view())?;
        let label = if spec.task == Task::DomainAdaptation {
            pair_label(&spec.train_scenes[0], scene, &corpus.order)
        } else {
            scene.clone()
        };
        rows.push(EvalResult {
            method: predictor.name().into(),
            task: spec.task,
            scene: label,
            kind: RowKind::Split,
            ade: m.ade,
            fde: m.fde,
            samples: pred.dim().1,
            count: scene_windows.len(),
            traversable: traversable_fraction(&pred, &scene_windows, &fields),
            config_hash: opts.config_hash.clone(),
        });
    }
    Ok(rows)
}

fn obtain_model(
    spec: &TaskSpec,
    train: &[Window],
    fields: &Fields,
    config: &ModelConfig,
    checkpoints: &Checkpoints,
    corpus: &Corpus,
    opts: &RunOptions,
) -> Result<AnchorDiffusion> {
    let name = checkpoint_name(spec, &corpus.order);
    match checkpoints {
        Checkpoints::Load(dir) => {
            let model = AnchorDiffusion::load(dir.join(&name))?;
            if model.samples() != spec.samples {
                return Err(HarnessError::Config(format!(
                    "checkpoint {name} has {} anchors, task needs {}",
                    model.samples(),
                    spec.samples
                )));
            }
            Ok(model)
        }
        Checkpoints::Train | Checkpoints::TrainAndSave(_) => {
            let (model, _) =
                AnchorDiffusion::fit(train, fields, spec.samples, config, &opts.config_hash)?;
            if let Checkpoints::TrainAndSave(dir) = checkpoints {
                std::fs::create_dir_all(dir)?;
                model.save(dir.join(&name))?;
            }
            Ok(model)
        }
    }
}

fn letter(name: &str, order: &[String]) -> String {
    order
        .iter()
        .position(|s| s == name)
        .map(|i| ((b'A' + i as u8) as char).to_string())
        .unwrap_or_else(|| name.to_string())
}

pub fn pair_label(source: &str, target: &str, order: &[String]) -> String {
    format!("{}2{}", letter(source, order), letter(target, order))
}

/// Splits of `task` over the corpus scenes. Domain adaptation gets one
/// spec per source scene that tests on every other scene.
pub fn task_specs(task: Task, order: &[String], split_seed: u64) -> Result<Vec<TaskSpec>> {
    if task == Task::DomainAdaptation {
        order
            .iter()
            .map(|src| {
                let first_target = order
                    .iter()
                    .find(|s| *s != src)
                    .ok_or_else(|| HarnessError::Config("need two scenes".into()))?;
                let mut spec = TaskSpec::domain_adaptation(src, first_target)?;
                spec.test_scenes = order.iter().filter(|s| *s != src).cloned().collect();
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    } else {
        order
            .iter()
            .map(|scene| {
                Ok(TaskSpec::leave_one_out(task, scene, order)?.with_split_seed(split_seed))
            })
            .collect()
    }
}

/// Runs every split of `task` and appends the average rows.
///
/// Leave-one-out tasks give one row per scene plus `AVG`. Domain
/// adaptation gives, per source, its pair rows and an `X2*` mean, then the
/// global `AVG` over all pairs.
pub fn run_task(
    task: Task,
    predictor: &PredictorHandle,
    corpus: &Corpus,
    opts: &RunOptions,
) -> Result<Vec<EvalResult>> {
    let mut rows = Vec::new();
    let mut splits = Vec::new();
    for spec in task_specs(task, &corpus.order, opts.split_seed)? {
        let part = run_protocol(&spec, predictor, corpus, opts)?;
        if task == Task::DomainAdaptation {
            let source = letter(&spec.train_scenes[0], &corpus.order);
            rows.extend(part.iter().cloned());
            rows.push(average(
                &part,
                format!("{source}2*"),
                RowKind::SourceAverage,
            ));
        } else {
            rows.extend(part.iter().cloned());
        }
        splits.extend(part);
    }
    rows.push(average(&splits, "AVG".into(), RowKind::Average));
    Ok(rows)
}

fn average(rows: &[EvalResult], label: String, kind: RowKind) -> EvalResult {
    let m = Metrics::mean(&rows.iter().map(EvalResult::metrics).collect::<Vec<_>>());
    let trav: Vec<f64> = rows.iter().filter_map(|r| r.traversable).collect();
    EvalResult {
        method: rows.first().map(|r| r.method.clone()).unwrap_or_default(),
        task: rows.first().map(|r| r.task).unwrap_or(Task::Stochastic),
        scene: label,
        kind,
        ade: m.ade,
        fde: m.fde,
        samples: rows.first().map_or(0, |r| r.samples),
        count: rows.iter().map(|r| r.count).sum(),
        traversable: (!trav.is_empty()).then(|| trav.iter().sum::<f64>() / trav.len() as f64),
        config_hash: rows
            .first()
            .map(|r| r.config_hash.clone())
            .unwrap_or_default(),
    }
}

/// Results grouped by task, in task order.
pub fn by_task(results: &[EvalResult]) -> BTreeMap<Task, Vec<&EvalResult>> {
    let mut out: BTreeMap<Task, Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        out.entry(r.task).or_default().push(r);
    }
    out
}
