//! User-grouped tweet corpora with per-user gold labels.
//!
//! Gold labels belong to users; a tweet inherits its author's label when a
//! tweet-level model is trained. Corpora are immutable once built and are
//! read from / written to a line-oriented JSON format:
//!
//! ```text
//! {"user_id":"u1","tweet_id":"t1","text":"...","labels":{"age":"under-25","gender":"male"}}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Age,
    Dialect,
    Gender,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Age, Task::Dialect, Task::Gender];

    pub fn name(self) -> &'static str {
        match self {
            Task::Age => "age",
            Task::Dialect => "dialect",
            Task::Gender => "gender",
        }
    }

    pub fn label_space(self) -> LabelSpace {
        label_space(self)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "age" => Ok(Task::Age),
            "dialect" => Ok(Task::Dialect),
            "gender" => Ok(Task::Gender),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

const AGE_LABELS: [&str; 3] = ["under-25", "between-25-and-34", "above-35"];

const DIALECT_LABELS: [&str; 15] = [
    "Algeria",
    "Egypt",
    "Iraq",
    "Kuwait",
    "Lebanon-Syria",
    "Lybia",
    "Morocco",
    "Oman",
    "Palestine-Jordan",
    "Qatar",
    "Saudi Arabia",
    "Sudan",
    "Tunisia",
    "UAE",
    "Yemen",
];

const GENDER_LABELS: [&str; 2] = ["male", "female"];

/// Canonical, ordered label set of a task. The position of a label here is
/// its index in every probability vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSpace {
    task: Task,
    labels: &'static [&'static str],
}

impl LabelSpace {
    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &'static [&'static str] {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn label(&self, index: usize) -> &'static str {
        self.labels[index]
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Index of `label`, or an `UnknownLabel` error.
    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::UnknownLabel {
            task: self.task.to_string(),
            label: label.to_string(),
        })
    }
}

pub fn label_space(task: Task) -> LabelSpace {
    let labels: &'static [&'static str] = match task {
        Task::Age => &AGE_LABELS,
        Task::Dialect => &DIALECT_LABELS,
        Task::Gender => &GENDER_LABELS,
    };
    LabelSpace { task, labels }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TweetRecord {
    pub user_id: String,
    pub tweet_id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub gold: BTreeMap<Task, String>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserProfile {
            user_id: user_id.into(),
            gold: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, task: Task, label: impl Into<String>) -> Self {
        self.gold.insert(task, label.into());
        self
    }

    pub fn label(&self, task: Task) -> Option<&str> {
        self.gold.get(&task).map(String::as_str)
    }

    fn validate(&self) -> Result<()> {
        for (task, label) in &self.gold {
            task.label_space().require(label)?;
        }
        Ok(())
    }

    /// Adds labels from `other`, failing on a conflicting value for any task.
    fn absorb(&mut self, other: &UserProfile) -> Result<()> {
        for (task, label) in &other.gold {
            match self.gold.get(task) {
                Some(existing) if existing != label => {
                    return Err(Error::ConflictingLabels {
                        user_id: self.user_id.clone(),
                        task: task.to_string(),
                        first: existing.clone(),
                        second: label.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    self.gold.insert(*task, label.clone());
                }
            }
        }
        Ok(())
    }
}

/// Tweets in file order plus the users who wrote them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    tweets: Vec<TweetRecord>,
    users: BTreeMap<String, UserProfile>,
}

impl LabeledCorpus {
    pub fn new(tweets: Vec<TweetRecord>, users: BTreeMap<String, UserProfile>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(tweets.len());
        let mut authors = HashSet::new();
        for tweet in &tweets {
            if tweet.text.trim().is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "tweet {:?} has empty text",
                    tweet.tweet_id
                )));
            }
            if !seen.insert(tweet.tweet_id.as_str()) {
                return Err(Error::DuplicateTweet(tweet.tweet_id.clone()));
            }
            if !users.contains_key(&tweet.user_id) {
                return Err(Error::MissingUser {
                    tweet_id: tweet.tweet_id.clone(),
                    user_id: tweet.user_id.clone(),
                });
            }
            authors.insert(tweet.user_id.as_str());
        }
        for (id, profile) in &users {
            if id != &profile.user_id {
                return Err(Error::InvalidArgument(format!(
                    "user record keyed {id:?} carries id {:?}",
                    profile.user_id
                )));
            }
            if !authors.contains(id.as_str()) {
                return Err(Error::UserWithoutTweets(id.clone()));
            }
            profile.validate()?;
        }
        Ok(LabeledCorpus { tweets, users })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn users(&self) -> &BTreeMap<String, UserProfile> {
        &self.users
    }

    pub fn user(&self, user_id: &str) -> Option<&UserProfile> {
        self.users.get(user_id)
    }

    pub fn n_tweets(&self) -> usize {
        self.tweets.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweet_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.tweets {
            *counts.entry(t.user_id.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Gold labels for `task`, requiring every user to carry one.
    pub fn gold(&self, task: Task) -> Result<BTreeMap<String, String>> {
        self.users
            .values()
            .map(|u| {
                u.label(task)
                    .map(|l| (u.user_id.clone(), l.to_string()))
                    .ok_or_else(|| Error::MissingGold {
                        user_id: u.user_id.clone(),
                        task: task.to_string(),
                    })
            })
            .collect()
    }

    /// Whether every user has a gold label for `task`.
    pub fn is_labeled_for(&self, task: Task) -> bool {
        !self.users.is_empty() && self.users.values().all(|u| u.label(task).is_some())
    }

    /// Per-tweet label index inherited from the author, in tweet order.
    pub fn tweet_labels(&self, task: Task) -> Result<Vec<usize>> {
        let space = task.label_space();
        self.tweets
            .iter()
            .map(|t| {
                let user = &self.users[&t.user_id];
                let label = user.label(task).ok_or_else(|| Error::MissingGold {
                    user_id: user.user_id.clone(),
                    task: task.to_string(),
                })?;
                space.require(label)
            })
            .collect()
    }

    /// The sub-corpus made of the given users and all of their tweets.
    pub fn restrict_to(&self, user_ids: &BTreeSet<String>) -> LabeledCorpus {
        LabeledCorpus {
            tweets: self
                .tweets
                .iter()
                .filter(|t| user_ids.contains(&t.user_id))
                .cloned()
                .collect(),
            users: self
                .users
                .iter()
                .filter(|(id, _)| user_ids.contains(*id))
                .map(|(id, u)| (id.clone(), u.clone()))
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    user_id: String,
    tweet_id: String,
    text: String,
    #[serde(default)]
    labels: LineLabels,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    age: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dialect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gender: Option<String>,
}

impl LineLabels {
    fn from_profile(profile: &UserProfile) -> Self {
        LineLabels {
            age: profile.label(Task::Age).map(str::to_string),
            dialect: profile.label(Task::Dialect).map(str::to_string),
            gender: profile.label(Task::Gender).map(str::to_string),
        }
    }

    fn into_profile(self, user_id: &str) -> Result<UserProfile> {
        let mut profile = UserProfile::new(user_id);
        for (task, label) in [
            (Task::Age, self.age),
            (Task::Dialect, self.dialect),
            (Task::Gender, self.gender),
        ] {
            if let Some(label) = label {
                task.label_space().require(&label)?;
                profile.gold.insert(task, label);
            }
        }
        Ok(profile)
    }
}

/// Reads a corpus from JSONL. Errors carry the 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<LabeledCorpus> {
    let mut tweets = Vec::new();
    let mut users: BTreeMap<String, UserProfile> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if parsed.text.trim().is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("tweet {:?} has empty text", parsed.tweet_id),
            });
        }
        if !seen.insert(parsed.tweet_id.clone()) {
            return Err(Error::at_line(
                lineno,
                Error::DuplicateTweet(parsed.tweet_id),
            ));
        }
        let profile = parsed
            .labels
            .into_profile(&parsed.user_id)
            .map_err(|e| Error::at_line(lineno, e))?;
        match users.get_mut(&parsed.user_id) {
            Some(existing) => existing
                .absorb(&profile)
                .map_err(|e| Error::at_line(lineno, e))?,
            None => {
                users.insert(parsed.user_id.clone(), profile);
            }
        }
        tweets.push(TweetRecord {
            user_id: parsed.user_id,
            tweet_id: parsed.tweet_id,
            text: parsed.text,
        });
    }
    LabeledCorpus::new(tweets, users)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

/// Writes one line per tweet, in corpus order, repeating the author's labels.
pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, mut writer: W) -> std::io::Result<()> {
    for tweet in &corpus.tweets {
        let line = CorpusLine {
            user_id: tweet.user_id.clone(),
            tweet_id: tweet.tweet_id.clone(),
            text: tweet.text.clone(),
            labels: LineLabels::from_profile(&corpus.users[&tweet.user_id]),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &LabeledCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Splits users (never tweets) into train and dev sides.
///
/// User ids are shuffled with a generator seeded by `seed`, and the first
/// `round(train_fraction * n_users)` become train. The count is clamped so
/// that neither side is empty.
pub fn split_by_user(
    corpus: &LabeledCorpus,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = corpus.n_users();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 users to split, got {n}"
        )));
    }
    let mut ids: Vec<&String> = corpus.users.keys().collect();
    ids.shuffle(&mut rng::seeded(seed));
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let train_ids: BTreeSet<String> = ids[..n_train].iter().map(|s| (*s).clone()).collect();
    let dev_ids: BTreeSet<String> = ids[n_train..].iter().map(|s| (*s).clone()).collect();
    Ok((corpus.restrict_to(&train_ids), corpus.restrict_to(&dev_ids)))
}

const MERGE_PREFIX: &str = "ext:";

/// Union of two corpora. No rebalancing is done.
///
/// A tweet id from `extension` that is already taken is re-namespaced with
/// an `ext:` prefix. A shared user keeps one profile; conflicting gold labels
/// for that user are an error.
pub fn merge_corpora(base: &LabeledCorpus, extension: &LabeledCorpus) -> Result<LabeledCorpus> {
    let mut users = base.users.clone();
    for (id, profile) in &extension.users {
        match users.get_mut(id) {
            Some(existing) => existing.absorb(profile)?,
            None => {
                users.insert(id.clone(), profile.clone());
            }
        }
    }

    let mut taken: HashSet<String> = base
        .tweets
        .iter()
        .chain(&extension.tweets)
        .map(|t| t.tweet_id.clone())
        .collect();
    let base_ids: HashSet<&str> = base.tweets.iter().map(|t| t.tweet_id.as_str()).collect();

    let mut tweets = base.tweets.clone();
    tweets.reserve(extension.tweets.len());
    for tweet in &extension.tweets {
        let mut tweet = tweet.clone();
        if base_ids.contains(tweet.tweet_id.as_str()) {
            let mut renamed = format!("{MERGE_PREFIX}{}", tweet.tweet_id);
            while taken.contains(&renamed) {
                renamed.insert_str(0, MERGE_PREFIX);
            }
            taken.insert(renamed.clone());
            tweet.tweet_id = renamed;
        }
        tweets.push(tweet);
    }
    LabeledCorpus::new(tweets, users)
}
