//! Per-task and joint user-level accuracy.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::corpus::{Task, UserProfile};
use crate::error::{Error, Result};
use crate::predictions::UserPredictionSet;

/// An exact `correct / total` count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn new(correct: usize, total: usize) -> Self {
        assert!(correct <= total, "{correct} correct out of {total}");
        Accuracy { correct, total }
    }

    /// 0.0 for an empty evaluation.
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

impl PartialOrd for Accuracy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Accuracy {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.correct as u128 * other.total.max(1) as u128;
        let rhs = other.correct as u128 * self.total.max(1) as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.value())
    }
}

pub fn task_accuracy(
    pred: &UserPredictionSet,
    gold: &BTreeMap<String, String>,
) -> Result<Accuracy> {
    let mut correct = 0;
    for (user, label) in pred.labels() {
        let g = gold.get(user).ok_or_else(|| Error::MissingGold {
            user_id: user.clone(),
            task: pred.task().to_string(),
        })?;
        if g == label {
            correct += 1;
        }
    }
    Ok(Accuracy::new(correct, pred.len()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_users: usize,
    pub per_task: BTreeMap<Task, Accuracy>,
    /// Present only when all three tasks were evaluated.
    pub joint: Option<Accuracy>,
    pub condition: String,
}

#[derive(Serialize)]
struct EvalJson {
    n_users: usize,
    accuracy: BTreeMap<Task, f64>,
    joint: Option<f64>,
}

impl EvalReport {
    /// `{"n_users": n, "accuracy": {"age": a, …}, "joint": j}`
    pub fn to_json(&self) -> String {
        let doc = EvalJson {
            n_users: self.n_users,
            accuracy: self.per_task.iter().map(|(t, a)| (*t, a.value())).collect(),
            joint: self.joint.map(|j| j.value()),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    /// Plain-text table: one row, columns condition / age / dialect / gender / joint.
    pub fn to_table(&self) -> String {
        let cell = |a: Option<&Accuracy>| a.map_or_else(|| "-".to_string(), |a| a.to_string());
        let mut out = format!(
            "{:<24} {:>8} {:>8} {:>8} {:>8}\n",
            "condition", "age", "dialect", "gender", "joint"
        );
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>8} {:>8}\n",
            self.condition,
            cell(self.per_task.get(&Task::Age)),
            cell(self.per_task.get(&Task::Dialect)),
            cell(self.per_task.get(&Task::Gender)),
            cell(self.joint.as_ref()),
        ));
        out
    }
}

/// Evaluates any non-empty subset of tasks over a shared user set. The joint
/// score (all three labels right) is computed when every task is present.
pub fn evaluate(
    preds: &BTreeMap<Task, UserPredictionSet>,
    gold: &BTreeMap<String, UserProfile>,
    condition: &str,
) -> Result<EvalReport> {
    let mut iter = preds.values();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("no prediction sets to evaluate".into()))?;
    let users: Vec<&String> = first.labels().keys().collect();
    for other in iter {
        if !other.labels().keys().eq(users.iter().copied()) {
            return Err(Error::InvalidArgument(format!(
                "user sets of {} and {} predictions differ",
                first.task(),
                other.task()
            )));
        }
    }
    for (task, set) in preds {
        if set.task() != *task {
            return Err(Error::InvalidArgument(format!(
                "{} predictions supplied as {task}",
                set.task()
            )));
        }
    }

    let mut per_task = BTreeMap::new();
    let mut all_right = vec![true; users.len()];
    for (task, set) in preds {
        let mut correct = 0;
        for (i, user) in users.iter().enumerate() {
            let g = gold
                .get(*user)
                .and_then(|p| p.label(*task))
                .ok_or_else(|| Error::MissingGold {
                    user_id: user.to_string(),
                    task: task.to_string(),
                })?;
            if set.label(user) == Some(g) {
                correct += 1;
            } else {
                all_right[i] = false;
            }
        }
        per_task.insert(*task, Accuracy::new(correct, users.len()));
    }
    let joint = (preds.len() == Task::ALL.len())
        .then(|| Accuracy::new(all_right.iter().filter(|b| **b).count(), users.len()));
    Ok(EvalReport {
        n_users: users.len(),
        per_task,
        joint,
        condition: condition.to_string(),
    })
}

/// Joint evaluation; requires all three tasks.
pub fn joint_accuracy(
    preds: &BTreeMap<Task, UserPredictionSet>,
    gold: &BTreeMap<String, UserProfile>,
) -> Result<EvalReport> {
    if preds.len() != Task::ALL.len() {
        return Err(Error::InvalidArgument(
            "joint accuracy needs age, dialect and gender predictions".into(),
        ));
    }
    evaluate(preds, gold, "joint")
}
