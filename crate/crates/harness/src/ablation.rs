use serde::{Deserialize, Serialize};
use trajspace::dataset::{Task, TaskSpec};
use trajspace::diffusion::{Coupling, DenoisingMode};

use crate::corpus::Corpus;
use crate::metrics::Metrics;
use crate::model::ModelConfig;
use crate::protocol::{
    run_protocol, run_task, task_specs, Checkpoints, PredictorHandle, RowKind, RunOptions,
};
use crate::{HarnessError, Result};

/// One swept setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    K(Vec<usize>),
    Steps(Vec<usize>),
    Mode(Vec<DenoisingMode>),
    Coupling(Vec<Coupling>),
}

impl Sweep {
    pub fn k_default() -> Self {
        Sweep::K((1..=6).collect())
    }

    pub fn steps_default() -> Self {
        Sweep::Steps(vec![1, 2, 5, 10, 25])
    }

    pub fn mode_default() -> Self {
        Sweep::Mode(DenoisingMode::ALL.to_vec())
    }

    pub fn coupling_default() -> Self {
        Sweep::Coupling(vec![Coupling::Independent, Coupling::Joint])
    }

    pub fn title(&self) -> &'static str {
        match self {
            Sweep::K(_) => "K",
            Sweep::Steps(_) => "M",
            Sweep::Mode(_) => "Adoption",
            Sweep::Coupling(_) => "Refinement",
        }
    }

    fn variants(&self, base: &ModelConfig) -> Vec<(String, ModelConfig)> {
        let with = |f: &dyn Fn(&mut ModelConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            Sweep::K(ks) => ks
                .iter()
                .map(|&k| (k.to_string(), with(&|c| c.k = k)))
                .collect(),
            Sweep::Steps(ms) => ms
                .iter()
                .map(|&m| (m.to_string(), with(&|c| c.steps = m)))
                .collect(),
            Sweep::Mode(ms) => ms
                .iter()
                .map(|&m| (m.label().to_string(), with(&|c| c.train.mode = m)))
                .collect(),
            Sweep::Coupling(cs) => cs
                .iter()
                .map(|&cp| {
                    let label = match cp {
                        Coupling::Joint => "Jointly",
                        Coupling::Independent => "Independently",
                    };
                    (label.to_string(), with(&|c| c.coupling = cp))
                })
                .collect(),
        }
    }
}

/// Which splits fill each table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub tasks: Vec<Task>,
    /// Every split of every task; otherwise one split per task.
    pub full: bool,
    /// Test scene of the single leave-one-out split (first scene if unset).
    pub scene: Option<String>,
    /// Source scene of the single domain-adaptation run (first scene if unset).
    pub source: Option<String>,
}

impl Default for AblationPlan {
    fn default() -> Self {
        Self {
            tasks: Task::ALL.to_vec(),
            full: false,
            scene: None,
            source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub cells: Vec<(Task, Metrics)>,
    pub average: Metrics,
}

impl AblationRow {
    pub fn cell(&self, task: Task) -> Option<Metrics> {
        self.cells.iter().find(|(t, _)| *t == task).map(|(_, m)| *m)
    }
}

/// Trains and scores one model per swept value and task.
pub fn ablate(
    corpus: &Corpus,
    base: &ModelConfig,
    sweep: &Sweep,
    plan: &AblationPlan,
    opts: &RunOptions,
) -> Result<Vec<AblationRow>> {
    let first = corpus
        .order
        .first()
        .ok_or_else(|| HarnessError::Config("empty corpus".into()))?;
    let mut rows = Vec::new();
    for (label, config) in sweep.variants(base) {
        let predictor = PredictorHandle::AnchorDiffusion {
            config,
            checkpoints: Checkpoints::Train,
        };
        let mut cells = Vec::new();
        for &task in &plan.tasks {
            let results = if plan.full {
                run_task(task, &predictor, corpus, opts)?
            } else {
                let spec = single_split(task, corpus, plan, first, opts)?;
                run_protocol(&spec, &predictor, corpus, opts)?
            };
            let splits: Vec<Metrics> = if plan.full {
                results
                    .iter()
                    .filter(|r| r.kind == RowKind::Average)
                    .map(|r| r.metrics())
                    .collect()
            } else {
                results.iter().map(|r| r.metrics()).collect()
            };
            let m = Metrics::mean(&splits);
            log::info!(
                "ablation {} = {label}, {}: {:.3} / {:.3}",
                sweep.title(),
                task.label(),
                m.ade,
                m.fde
            );
            cells.push((task, m));
        }
        let average = Metrics::mean(&cells.iter().map(|c| c.1).collect::<Vec<_>>());
        rows.push(AblationRow {
            label,
            cells,
            average,
        });
    }
    Ok(rows)
}

fn single_split(
    task: Task,
    corpus: &Corpus,
    plan: &AblationPlan,
    first: &str,
    opts: &RunOptions,
) -> Result<TaskSpec> {
    let pick = |name: &Option<String>| name.clone().unwrap_or_else(|| first.to_string());
    let specs = task_specs(task, &corpus.order, opts.split_seed)?;
    let wanted = if task == Task::DomainAdaptation {
        pick(&plan.source)
    } else {
        pick(&plan.scene)
    };
    specs
        .into_iter()
        .find(|s| {
            if task == Task::DomainAdaptation {
                s.train_scenes[0] == wanted
            } else {
                s.test_scenes[0] == wanted
            }
        })
        .ok_or_else(|| HarnessError::Config(format!("no split for scene {wanted}")))
}

/// Table with one row per swept value and one "ADE / FDE" column per task,
/// then the average.
pub fn ablation_markdown(title: &str, rows: &[AblationRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let tasks: Vec<Task> = rows[0].cells.iter().map(|c| c.0).collect();
    let mut out = format!(
        "| {title} | {} | Average |\n",
        tasks
            .iter()
            .map(|t| t.label())
            .collect::<Vec<_>>()
            .join(" | ")
    );
    out.push_str(&format!("|---|{}---|\n", "---|".repeat(tasks.len())));
    for r in rows {
        let cells: Vec<String> = r
            .cells
            .iter()
            .map(|(_, m)| format!("{:.2} / {:.2}", m.ade, m.fde))
            .collect();
        out.push_str(&format!(
            "| {} | {} | {:.2} / {:.2} |\n",
            r.label,
            cells.join(" | "),
            r.average.ade,
            r.average.fde
        ));
    }
    Ok(out)
}
