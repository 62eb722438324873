//! Tweet-to-user label aggregation with a softmax confidence threshold.
//!
//! For a threshold `t`, a user's label is the most frequent argmax label
//! among their tweets whose top probability is at least `t`. When no tweet
//! clears `t`, all of the user's tweets vote. Vote ties go to the label with
//! more total probability mass among the voting tweets, then to the earlier
//! label in canonical order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Accuracy;
use crate::predictions::{argmax, PredictionSet, TweetPrediction, UserPredictionSet};

/// The 100 thresholds 0.00, 0.01, …, 0.99.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid {
            values: (0..100).map(|i| i as f64 / 100.0).collect(),
        }
    }
}

impl ThresholdGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Label index chosen for one user's probability rows at threshold `t`.
pub fn majority_of_rows<P: AsRef<[f64]>>(rows: &[P], threshold: f64) -> Option<usize> {
    let first = rows.first()?;
    let n_labels = first.as_ref().len();
    let confident = |r: &&P| {
        let r = r.as_ref();
        r[argmax(r)] >= threshold
    };
    let mut selected: Vec<&P> = rows.iter().filter(confident).collect();
    if selected.is_empty() {
        selected = rows.iter().collect();
    }

    let mut votes = vec![0usize; n_labels];
    for row in &selected {
        votes[argmax(row.as_ref())] += 1;
    }
    // summed in sorted order so the result does not depend on tweet order
    let mass = |label: usize| {
        let mut v: Vec<f64> = selected.iter().map(|r| r.as_ref()[label]).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>()
    };
    let mut best = 0;
    for label in 1..n_labels {
        let better =
            votes[label] > votes[best] || (votes[label] == votes[best] && mass(label) > mass(best));
        if better {
            best = label;
        }
    }
    Some(best)
}

/// Label index for one user's tweets.
pub fn user_majority(preds: &[&TweetPrediction], threshold: f64) -> Result<usize> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidArgument("user_majority over zero tweets".into()))?;
    if let Some(other) = preds.iter().find(|p| p.user_id != first.user_id) {
        return Err(Error::InvalidArgument(format!(
            "user_majority mixes users {:?} and {:?}",
            first.user_id, other.user_id
        )));
    }
    let rows: Vec<&[f64]> = preds.iter().map(|p| p.probs()).collect();
    Ok(majority_of_rows(&rows, threshold).expect("non-empty"))
}

/// One label per user in `set`.
pub fn aggregate_users(set: &PredictionSet, threshold: f64) -> Result<UserPredictionSet> {
    let space = set.task().label_space();
    let labels = set
        .by_user()
        .into_iter()
        .map(|(user, preds)| {
            user_majority(&preds, threshold).map(|i| (user.to_string(), space.label(i).to_string()))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    UserPredictionSet::new(set.task(), set.source_tag(), labels)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub best_threshold: f64,
    /// One entry per grid value, in grid order.
    pub accuracy_by_threshold: Vec<(f64, Accuracy)>,
}

#[derive(Serialize, Deserialize)]
struct CalibrationJson {
    best_threshold: f64,
    accuracy_by_threshold: BTreeMap<String, f64>,
}

impl CalibrationResult {
    pub fn best_accuracy(&self) -> Accuracy {
        self.accuracy_at(self.best_threshold)
            .expect("best threshold is on the grid")
    }

    pub fn accuracy_at(&self, threshold: f64) -> Option<Accuracy> {
        self.accuracy_by_threshold
            .iter()
            .find(|(t, _)| *t == threshold)
            .map(|(_, a)| *a)
    }

    /// `{"best_threshold": x, "accuracy_by_threshold": {"0.00": a0, …}}`
    pub fn to_json(&self) -> String {
        let doc = CalibrationJson {
            best_threshold: self.best_threshold,
            accuracy_by_threshold: self
                .accuracy_by_threshold
                .iter()
                .map(|(t, a)| (format!("{t:.2}"), a.value()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    /// The best threshold stored in a calibration JSON document.
    pub fn best_threshold_from_json(text: &str) -> Result<f64> {
        let doc: CalibrationJson = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if !(0.0..1.0).contains(&doc.best_threshold) {
            return Err(Error::InvalidArgument(format!(
                "best_threshold {} outside [0, 1)",
                doc.best_threshold
            )));
        }
        Ok(doc.best_threshold)
    }
}

/// Sweeps the threshold grid on DEV predictions and picks the threshold with
/// the highest user-level accuracy; the smallest threshold wins ties.
pub fn calibrate_threshold(
    set: &PredictionSet,
    gold: &BTreeMap<String, String>,
) -> Result<CalibrationResult> {
    let space = set.task().label_space();
    let users = set.by_user();
    let mut gold_idx = Vec::with_capacity(users.len());
    let mut rows = Vec::with_capacity(users.len());
    for (user, preds) in &users {
        let label = gold.get(*user).ok_or_else(|| Error::MissingGold {
            user_id: user.to_string(),
            task: set.task().to_string(),
        })?;
        gold_idx.push(space.require(label)?);
        rows.push(preds.iter().map(|p| p.probs()).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("calibration over zero users".into()));
    }

    let grid = ThresholdGrid::default();
    let accuracy_by_threshold: Vec<(f64, Accuracy)> = grid
        .values()
        .par_iter()
        .map(|&t| {
            let correct = rows
                .iter()
                .zip(&gold_idx)
                .filter(|(r, &g)| majority_of_rows(r, t) == Some(g))
                .count();
            (t, Accuracy::new(correct, rows.len()))
        })
        .collect();

    let mut best = 0;
    for (i, (_, acc)) in accuracy_by_threshold.iter().enumerate() {
        if *acc > accuracy_by_threshold[best].1 {
            best = i;
        }
    }
    Ok(CalibrationResult {
        best_threshold: accuracy_by_threshold[best].0,
        accuracy_by_threshold,
    })
}
