//! VAS score to class label mapping.
//!
//! | strategy | task    | no pain | moderate | high  | pain |
//! |----------|---------|---------|----------|-------|------|
//! | S1       | ternary | 0-3     | 4-6      | 7-10  |      |
//! | S1       | binary  | 0-3     |          |       | 4-10 |
//! | S2       | binary  | 0-6     |          |       | 7-10 |
//! | S3       | binary  | 0-3     | excluded |       | 7-10 |

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Ternary,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Ternary => 3,
        }
    }

    /// Classes in class-id order.
    pub fn classes(self) -> &'static [PainClass] {
        match self {
            Task::Binary => &[PainClass::NoPain, PainClass::Pain],
            Task::Ternary => &[PainClass::NoPain, PainClass::ModeratePain, PainClass::HighPain],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PainClass {
    NoPain,
    ModeratePain,
    HighPain,
    Pain,
    Excluded,
}

impl PainClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PainClass::NoPain => "no_pain",
            PainClass::ModeratePain => "moderate_pain",
            PainClass::HighPain => "high_pain",
            PainClass::Pain => "pain",
            PainClass::Excluded => "excluded",
        }
    }

    /// Dense class id for `task`, `None` for excluded or foreign classes.
    pub fn class_id(self, task: Task) -> Option<usize> {
        task.classes().iter().position(|&c| c == self)
    }
}

impl fmt::Display for PainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PainClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "no_pain" => PainClass::NoPain,
            "moderate_pain" | "moderate" => PainClass::ModeratePain,
            "high_pain" | "high" => PainClass::HighPain,
            "pain" => PainClass::Pain,
            "excluded" => PainClass::Excluded,
            _ => return Err(Error::invalid(format!("unknown pain class `{s}`"))),
        })
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(StrategyId::S1),
            "s2" => Ok(StrategyId::S2),
            "s3" => Ok(StrategyId::S3),
            _ => Err(Error::invalid(format!("unknown strategy `{s}`"))),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "ternary" => Ok(Task::Ternary),
            _ => Err(Error::invalid(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelStrategy {
    pub id: StrategyId,
    pub task: Task,
}

impl LabelStrategy {
    /// Strategies 2 and 3 only define a binary split.
    pub fn new(id: StrategyId, task: Task) -> Result<Self> {
        if task == Task::Ternary && id != StrategyId::S1 {
            return Err(Error::invalid(format!("{id:?} is defined for the binary task only")));
        }
        Ok(LabelStrategy { id, task })
    }
}

pub fn label(vas: u8, strategy: LabelStrategy) -> Result<PainClass> {
    if vas > 10 {
        return Err(Error::invalid(format!("VAS {vas} outside 0..=10")));
    }
    Ok(match (strategy.id, strategy.task) {
        (StrategyId::S1, Task::Ternary) => match vas {
            0..=3 => PainClass::NoPain,
            4..=6 => PainClass::ModeratePain,
            _ => PainClass::HighPain,
        },
        (StrategyId::S1, Task::Binary) => {
            if vas <= 3 {
                PainClass::NoPain
            } else {
                PainClass::Pain
            }
        }
        (StrategyId::S2, Task::Binary) => {
            if vas < 7 {
                PainClass::NoPain
            } else {
                PainClass::Pain
            }
        }
        (StrategyId::S3, Task::Binary) => match vas {
            0..=3 => PainClass::NoPain,
            4..=6 => PainClass::Excluded,
            _ => PainClass::Pain,
        },
        (id, Task::Ternary) => {
            return Err(Error::invalid(format!("{id:?} is defined for the binary task only")));
        }
    })
}

/// Trial identity and score, independent of the signal payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialInfo {
    pub trial_id: usize,
    pub vas: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialLabel {
    pub trial_id: usize,
    pub vas: u8,
    pub class: PainClass,
    pub class_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub trial_id: usize,
    pub window_index: usize,
    pub class_id: usize,
}

/// Window-level labels for every non-excluded trial, rows ordered by
/// (trial order, window index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub strategy: LabelStrategy,
    pub trials: Vec<TrialLabel>,
    pub rows: Vec<LabeledRow>,
    /// Window counts per class, indexed by class id.
    pub class_counts: Vec<usize>,
    pub excluded_trials: usize,
}

impl LabeledDataset {
    pub fn n_classes(&self) -> usize {
        self.strategy.task.n_classes()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.class_id).collect()
    }

    pub fn class_name(&self, id: usize) -> PainClass {
        self.strategy.task.classes()[id]
    }

    pub fn row_label_names(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| self.class_name(r.class_id).to_string())
            .collect()
    }

    /// Per-class window counts keyed by class.
    pub fn class_count_map(&self) -> BTreeMap<PainClass, usize> {
        self.class_counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (self.class_name(i), n))
            .collect()
    }

    /// Same windows, trial labels permuted (a label-shuffle null).
    pub fn with_permuted_trial_labels(&self, perm: &[usize]) -> Result<LabeledDataset> {
        if perm.len() != self.trials.len() {
            return Err(Error::invalid("permutation length does not match trial count"));
        }
        let infos: Vec<TrialInfo> = self
            .trials
            .iter()
            .zip(perm)
            .map(|(t, &p)| TrialInfo {
                trial_id: t.trial_id,
                vas: self.trials[p].vas,
            })
            .collect();
        let windows = self
            .rows
            .iter()
            .filter(|r| r.trial_id == self.trials[0].trial_id)
            .count();
        label_dataset(&infos, windows, self.strategy)
    }
}

/// Labels every window of every trial with its trial's class, dropping
/// excluded trials.
pub fn label_dataset(
    trials: &[TrialInfo],
    windows_per_trial: usize,
    strategy: LabelStrategy,
) -> Result<LabeledDataset> {
    if trials.is_empty() {
        return Err(Error::EmptyDataset("no trials to label".into()));
    }
    let task = strategy.task;
    let mut out_trials = Vec::new();
    let mut rows = Vec::new();
    let mut class_counts = vec![0; task.n_classes()];
    let mut excluded = 0;
    for t in trials {
        let class = label(t.vas, strategy)?;
        let Some(class_id) = class.class_id(task) else {
            excluded += 1;
            continue;
        };
        out_trials.push(TrialLabel {
            trial_id: t.trial_id,
            vas: t.vas,
            class,
            class_id,
        });
        for w in 0..windows_per_trial {
            rows.push(LabeledRow {
                trial_id: t.trial_id,
                window_index: w,
                class_id,
            });
        }
        class_counts[class_id] += windows_per_trial;
    }
    if out_trials.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "all {} trials excluded under {:?}",
            trials.len(),
            strategy.id
        )));
    }
    Ok(LabeledDataset {
        strategy,
        trials: out_trials,
        rows,
        class_counts,
        excluded_trials: excluded,
    })
}

/// Trial counts per class (excluded included when present).
pub fn label_histogram(vas_scores: &[u8], strategy: LabelStrategy) -> Result<BTreeMap<PainClass, usize>> {
    let mut h = BTreeMap::new();
    for &v in vas_scores {
        *h.entry(label(v, strategy)?).or_insert(0) += 1;
    }
    Ok(h)
}

/// Writes `vas,count,class` rows for scores 0..=10.
pub fn write_vas_histogram_csv<W: Write>(vas_scores: &[u8], strategy: LabelStrategy, w: W) -> Result<()> {
    let mut counts = [0usize; 11];
    for &v in vas_scores {
        if v > 10 {
            return Err(Error::invalid(format!("VAS {v} outside 0..=10")));
        }
        counts[v as usize] += 1;
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["vas", "count", "class"])
        .map_err(|e| Error::Format(e.to_string()))?;
    for (v, n) in counts.iter().enumerate() {
        wr.write_record([v.to_string(), n.to_string(), label(v as u8, strategy)?.to_string()])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    wr.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn save_histograms(vas_scores: &[u8], strategy: LabelStrategy, class_path: &Path, vas_path: &Path) -> Result<()> {
    let hist = label_histogram(vas_scores, strategy)?;
    let mut w = csv::Writer::from_path(class_path).map_err(|e| Error::csv(class_path, e))?;
    w.write_record(["class", "count"])
        .map_err(|e| Error::csv(class_path, e))?;
    for (c, n) in &hist {
        w.write_record([c.to_string(), n.to_string()])
            .map_err(|e| Error::csv(class_path, e))?;
    }
    w.flush().map_err(|e| Error::io(class_path, e))?;
    let f = std::fs::File::create(vas_path).map_err(|e| Error::io(vas_path, e))?;
    write_vas_histogram_csv(vas_scores, strategy, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: StrategyId, task: Task) -> LabelStrategy {
        LabelStrategy::new(id, task).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(label(3, s(StrategyId::S1, Task::Ternary)).unwrap(), PainClass::NoPain);
        assert_eq!(
            label(4, s(StrategyId::S1, Task::Ternary)).unwrap(),
            PainClass::ModeratePain
        );
        assert_eq!(label(7, s(StrategyId::S1, Task::Ternary)).unwrap(), PainClass::HighPain);
        assert_eq!(label(4, s(StrategyId::S1, Task::Binary)).unwrap(), PainClass::Pain);
        assert_eq!(label(6, s(StrategyId::S2, Task::Binary)).unwrap(), PainClass::NoPain);
        assert_eq!(label(7, s(StrategyId::S2, Task::Binary)).unwrap(), PainClass::Pain);
        assert_eq!(label(5, s(StrategyId::S3, Task::Binary)).unwrap(), PainClass::Excluded);
        for st in [
            s(StrategyId::S1, Task::Ternary),
            s(StrategyId::S1, Task::Binary),
            s(StrategyId::S2, Task::Binary),
            s(StrategyId::S3, Task::Binary),
        ] {
            assert_eq!(label(0, st).unwrap(), PainClass::NoPain);
            assert!(label(11, st).is_err());
        }
    }

    #[test]
    fn ternary_only_under_s1() {
        assert!(LabelStrategy::new(StrategyId::S2, Task::Ternary).is_err());
        assert!(LabelStrategy::new(StrategyId::S3, Task::Ternary).is_err());
    }

    #[test]
    fn binary_and_ternary_s1_agree() {
        for v in 0..=10 {
            let b = label(v, s(StrategyId::S1, Task::Binary)).unwrap();
            let t = label(v, s(StrategyId::S1, Task::Ternary)).unwrap();
            assert_eq!(
                b == PainClass::Pain,
                matches!(t, PainClass::ModeratePain | PainClass::HighPain)
            );
            assert_ne!(
                label(v, s(StrategyId::S3, Task::Binary)).unwrap(),
                PainClass::ModeratePain
            );
        }
    }

    #[test]
    fn dataset_inherits_trial_labels() {
        let trials = [
            TrialInfo { trial_id: 0, vas: 2 },
            TrialInfo { trial_id: 1, vas: 5 },
            TrialInfo { trial_id: 2, vas: 8 },
        ];
        let ds = label_dataset(&trials, 30, s(StrategyId::S3, Task::Binary)).unwrap();
        assert_eq!(ds.rows.len(), 60);
        assert_eq!(ds.excluded_trials, 1);
        assert_eq!(ds.class_counts, vec![30, 30]);
        assert!(ds.rows[30..].iter().all(|r| r.trial_id == 2 && r.class_id == 1));

        let s1 = label_dataset(&trials[2..], 30, s(StrategyId::S1, Task::Binary)).unwrap();
        assert!(s1.rows.iter().all(|r| s1.class_name(r.class_id) == PainClass::Pain));

        let err = label_dataset(&trials[1..2], 30, s(StrategyId::S3, Task::Binary));
        assert!(matches!(err, Err(Error::EmptyDataset(_))));
        assert!(matches!(
            label_dataset(&[], 30, s(StrategyId::S1, Task::Binary)),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn histogram_counts_trials() {
        let h = label_histogram(&[2, 2, 5, 8], s(StrategyId::S1, Task::Ternary)).unwrap();
        assert_eq!(h[&PainClass::NoPain], 2);
        assert_eq!(h[&PainClass::ModeratePain], 1);
        assert_eq!(h[&PainClass::HighPain], 1);
        let mut buf = Vec::new();
        write_vas_histogram_csv(&[2, 2, 5, 8], s(StrategyId::S1, Task::Ternary), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("2,2,no_pain"));
        assert!(text.contains("5,1,moderate_pain"));
    }

    #[test]
    fn permuted_labels_keep_windows() {
        let trials = [TrialInfo { trial_id: 0, vas: 1 }, TrialInfo { trial_id: 1, vas: 9 }];
        let ds = label_dataset(&trials, 3, s(StrategyId::S1, Task::Binary)).unwrap();
        let p = ds.with_permuted_trial_labels(&[1, 0]).unwrap();
        assert_eq!(p.trials[0].class, PainClass::Pain);
        assert_eq!(p.rows[0].trial_id, 0);
        assert_eq!(p.rows[0].class_id, 1);
    }
}
