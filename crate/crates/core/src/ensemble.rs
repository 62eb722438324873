//! Majority vote over user-level prediction sets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::predictions::UserPredictionSet;

/// Per user, the label with the most votes across `systems`.
///
/// `systems` is in priority order, highest first. When several labels share
/// the top vote count, the label of the highest-priority system among those
/// tied labels wins.
pub fn majority_vote(systems: &[UserPredictionSet]) -> Result<UserPredictionSet> {
    if systems.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "majority vote needs at least 2 systems, got {}",
            systems.len()
        )));
    }
    let first = &systems[0];
    for other in &systems[1..] {
        if other.task() != first.task() {
            return Err(Error::InvalidArgument(format!(
                "task mismatch: {} vs {}",
                first.task(),
                other.task()
            )));
        }
        if !other.labels().keys().eq(first.labels().keys()) {
            return Err(Error::InvalidArgument(format!(
                "user sets of {:?} and {:?} differ",
                first.source_tag(),
                other.source_tag()
            )));
        }
    }

    let mut out = BTreeMap::new();
    for user in first.labels().keys() {
        let votes: Vec<&str> = systems
            .iter()
            .map(|s| s.label(user).expect("user sets checked"))
            .collect();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in &votes {
            *counts.entry(v).or_insert(0) += 1;
        }
        let top = *counts.values().max().expect("at least two votes");
        let winner = votes
            .iter()
            .find(|v| counts[**v] == top)
            .expect("some label has the top count");
        out.insert(user.clone(), winner.to_string());
    }
    let tag = format!(
        "majority({})",
        systems
            .iter()
            .map(|s| s.source_tag())
            .collect::<Vec<_>>()
            .join(",")
    );
    UserPredictionSet::new(first.task(), tag, out)
}
