use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Canonical scene order; domain-adaptation names use letters A–E in this order.
pub const ETH_UCY_SCENES: [&str; 5] = ["ETH", "HOTEL", "UNIV", "ZARA1", "ZARA2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Stochastic,
    Deterministic,
    Momentary,
    DomainAdaptation,
    FewShot,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Deterministic,
        Task::Stochastic,
        Task::Momentary,
        Task::DomainAdaptation,
        Task::FewShot,
    ];

    pub fn samples(self) -> usize {
        match self {
            Task::Stochastic | Task::FewShot | Task::Momentary => 20,
            Task::Deterministic | Task::DomainAdaptation => 1,
        }
    }

    pub fn t_hist(self) -> usize {
        match self {
            Task::Momentary => 2,
            _ => 8,
        }
    }

    pub fn train_fraction(self) -> f64 {
        match self {
            Task::FewShot => 0.1,
            _ => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Task::Stochastic => "Stochastic",
            Task::Deterministic => "Deterministic",
            Task::Momentary => "Momentary",
            Task::DomainAdaptation => "Domain",
            Task::FewShot => "Few-shot",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "stochastic" => Ok(Task::Stochastic),
            "deterministic" => Ok(Task::Deterministic),
            "momentary" => Ok(Task::Momentary),
            "domain_adaptation" | "domain" => Ok(Task::DomainAdaptation),
            "few_shot" | "fewshot" => Ok(Task::FewShot),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Window lengths, sample count and scene split of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub t_hist: usize,
    pub t_fut: usize,
    pub samples: usize,
    pub train_scenes: Vec<String>,
    pub test_scenes: Vec<String>,
    pub train_fraction: f64,
    /// Seed of the few-shot subsample.
    pub split_seed: u64,
}

pub const T_FUT: usize = 12;

impl TaskSpec {
    /// Leave-one-out spec: test on `test_scene`, train on every other scene.
    /// Not valid for [`Task::DomainAdaptation`]; see [`TaskSpec::domain_adaptation`].
    pub fn leave_one_out(task: Task, test_scene: &str, scenes: &[impl AsRef<str>]) -> Result<Self> {
        if task == Task::DomainAdaptation {
            return Err(Error::Config(
                "domain adaptation uses a (source, target) pair, not leave-one-out".into(),
            ));
        }
        let names: Vec<&str> = scenes.iter().map(|s| s.as_ref()).collect();
        if !names.contains(&test_scene) {
            return Err(Error::Config(format!("unknown scene {test_scene:?}")));
        }
        let spec = TaskSpec {
            task,
            t_hist: task.t_hist(),
            t_fut: T_FUT,
            samples: task.samples(),
            train_scenes: names
                .iter()
                .filter(|&&n| n != test_scene)
                .map(|n| n.to_string())
                .collect(),
            test_scenes: vec![test_scene.to_string()],
            train_fraction: task.train_fraction(),
            split_seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn domain_adaptation(source: &str, target: &str) -> Result<Self> {
        let spec = TaskSpec {
            task: Task::DomainAdaptation,
            t_hist: 8,
            t_fut: T_FUT,
            samples: 1,
            train_scenes: vec![source.to_string()],
            test_scenes: vec![target.to_string()],
            train_fraction: 1.0,
            split_seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_split_seed(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self
    }

    /// Checks the per-task constants and the split shape.
    pub fn validate(&self) -> Result<()> {
        let t = self.task;
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "{what} inconsistent with task {t:?}"
            )))
        };
        if self.samples != t.samples() {
            return bad("sample count");
        }
        if self.t_hist != t.t_hist() {
            return bad("history length");
        }
        if self.t_fut != T_FUT {
            return bad("future length");
        }
        if (self.train_fraction - t.train_fraction()).abs() > 0.0 {
            return bad("train fraction");
        }
        if self.train_scenes.is_empty() || self.test_scenes.is_empty() {
            return Err(Error::Config("empty train or test scene list".into()));
        }
        if self
            .train_scenes
            .iter()
            .any(|s| self.test_scenes.contains(s))
        {
            return Err(Error::Config("train and test scenes overlap".into()));
        }
        Ok(())
    }

    /// Short label such as `ZARA1` or `A2B`.
    pub fn label(&self, scene_order: &[impl AsRef<str>]) -> String {
        if self.task == Task::DomainAdaptation {
            let letter = |name: &str| {
                scene_order
                    .iter()
                    .position(|s| s.as_ref() == name)
                    .map(|i| ((b'A' + i as u8) as char).to_string())
                    .unwrap_or_else(|| name.to_string())
            };
            format!(
                "{}2{}",
                letter(&self.train_scenes[0]),
                letter(&self.test_scenes[0])
            )
        } else {
            self.test_scenes.join("+")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_task_constants() {
        for task in Task::ALL {
            let expected_s = match task {
                Task::Deterministic | Task::DomainAdaptation => 1,
                _ => 20,
            };
            assert_eq!(task.samples(), expected_s);
            assert_eq!(task.t_hist(), if task == Task::Momentary { 2 } else { 8 });
        }
        assert_eq!(Task::FewShot.train_fraction(), 0.1);
        assert_eq!(Task::Stochastic.train_fraction(), 1.0);
    }

    #[test]
    fn leave_one_out_eth() {
        let spec = TaskSpec::leave_one_out(Task::Stochastic, "ETH", &ETH_UCY_SCENES).unwrap();
        assert_eq!(spec.train_scenes, vec!["HOTEL", "UNIV", "ZARA1", "ZARA2"]);
        assert_eq!(spec.test_scenes, vec!["ETH"]);
    }

    #[test]
    fn a2b_label() {
        let spec = TaskSpec::domain_adaptation("ETH", "HOTEL").unwrap();
        assert_eq!(spec.train_scenes, vec!["ETH"]);
        assert_eq!(spec.test_scenes, vec!["HOTEL"]);
        assert_eq!(spec.label(&ETH_UCY_SCENES), "A2B");
    }

    #[test]
    fn unknown_scene_is_config_error() {
        let err = TaskSpec::leave_one_out(Task::Stochastic, "SDD", &ETH_UCY_SCENES).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn parses_task_names() {
        assert_eq!("few-shot".parse::<Task>().unwrap(), Task::FewShot);
        assert_eq!(
            "domain_adaptation".parse::<Task>().unwrap(),
            Task::DomainAdaptation
        );
        assert!("nope".parse::<Task>().is_err());
    }
}
