//! Tweet- and user-level prediction files.
//!
//! Every producer (the GRU baseline, external transformer adapters, test
//! fixtures) hands predictions to the rest of the pipeline through this
//! module. A file is a meta line followed by one JSON object per record:
//!
//! ```text
//! {"task":"gender","label_order":["male","female"],"source_tag":"gru","schema_version":1}
//! {"user_id":"u1","tweet_id":"t1","probs":[0.25,0.75]}
//! ```
//!
//! User-level files use the same meta line and `{"user_id","label"}` records.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, Task};
use crate::error::{Error, Result};

pub const PROB_SUM_TOLERANCE: f64 = 1e-6;
pub const SCHEMA_VERSION: u32 = 1;

/// Softmax output for one tweet, in the task's canonical label order.
#[derive(Clone, Debug, PartialEq)]
pub struct TweetPrediction {
    pub user_id: String,
    pub tweet_id: String,
    probs: Vec<f64>,
}

impl AsRef<[f64]> for TweetPrediction {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

impl TweetPrediction {
    /// Validates `probs` for a label space of `n_labels` and renormalizes it.
    pub fn new(
        user_id: impl Into<String>,
        tweet_id: impl Into<String>,
        probs: Vec<f64>,
        n_labels: usize,
    ) -> Result<Self> {
        let tweet_id = tweet_id.into();
        if probs.len() != n_labels {
            return Err(Error::InvalidPrediction(format!(
                "tweet {tweet_id:?}: {} probabilities for {n_labels} labels",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPrediction(format!(
                "tweet {tweet_id:?}: invalid probability {p}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidPrediction(format!(
                "tweet {tweet_id:?}: sum {sum} exceeds tolerance {PROB_SUM_TOLERANCE}"
            )));
        }
        Ok(TweetPrediction {
            user_id: user_id.into(),
            tweet_id,
            probs: renormalize(probs),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the most probable label; the earliest label wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

pub(crate) fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Rows whose sum is this close to 1 are left untouched by renormalization.
const RENORM_SLACK: f64 = 1e-12;

/// Divides a row by its sum unless it already sums to 1 within
/// `RENORM_SLACK`. The result always lies within that slack, so applying the
/// operation again is a no-op.
fn renormalize(mut probs: Vec<f64>) -> Vec<f64> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > RENORM_SLACK && sum > 0.0 {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    probs
}

/// All tweet-level predictions of one model for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    task: Task,
    label_order: Vec<String>,
    source_tag: String,
    records: Vec<TweetPrediction>,
}

impl PredictionSet {
    pub fn new(
        task: Task,
        source_tag: impl Into<String>,
        records: Vec<TweetPrediction>,
    ) -> Result<Self> {
        let order = task
            .label_space()
            .labels()
            .iter()
            .map(|s| s.to_string())
            .collect();
        Self::with_label_order(task, order, source_tag, records)
    }

    /// Like `new`, but checks a producer-declared label order against the
    /// canonical one.
    pub fn with_label_order(
        task: Task,
        label_order: Vec<String>,
        source_tag: impl Into<String>,
        records: Vec<TweetPrediction>,
    ) -> Result<Self> {
        check_label_order(task, &label_order)?;
        let n = label_order.len();
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.probs.len() != n {
                return Err(Error::InvalidPrediction(format!(
                    "tweet {:?}: {} probabilities for {n} labels",
                    r.tweet_id,
                    r.probs.len()
                )));
            }
            if !seen.insert(r.tweet_id.as_str()) {
                return Err(Error::DuplicateTweet(r.tweet_id.clone()));
            }
        }
        Ok(PredictionSet {
            task,
            label_order,
            source_tag: source_tag.into(),
            records,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn label_order(&self) -> &[String] {
        &self.label_order
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn records(&self) -> &[TweetPrediction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by user, users in sorted order, tweets in file order.
    pub fn by_user(&self) -> BTreeMap<&str, Vec<&TweetPrediction>> {
        let mut out: BTreeMap<&str, Vec<&TweetPrediction>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.user_id.as_str()).or_default().push(r);
        }
        out
    }
}

fn check_label_order(task: Task, order: &[String]) -> Result<()> {
    let canonical = task.label_space().labels();
    if order.len() != canonical.len() || order.iter().zip(canonical).any(|(a, b)| a != b) {
        return Err(Error::InvalidPrediction(format!(
            "label_order {order:?} differs from the canonical {task} order {canonical:?}"
        )));
    }
    Ok(())
}

/// One label per user for one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserPredictionSet {
    task: Task,
    source_tag: String,
    labels: BTreeMap<String, String>,
}

impl UserPredictionSet {
    pub fn new(
        task: Task,
        source_tag: impl Into<String>,
        labels: BTreeMap<String, String>,
    ) -> Result<Self> {
        let space = task.label_space();
        for label in labels.values() {
            space.require(label)?;
        }
        Ok(UserPredictionSet {
            task,
            source_tag: source_tag.into(),
            labels,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn labels(&self) -> &BTreeMap<String, String> {
        &self.labels
    }

    pub fn label(&self, user_id: &str) -> Option<&str> {
        self.labels.get(user_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    task: Task,
    label_order: Vec<String>,
    source_tag: String,
    schema_version: u32,
}

impl Meta {
    fn new(task: Task, source_tag: &str) -> Self {
        Meta {
            task,
            label_order: task
                .label_space()
                .labels()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            source_tag: source_tag.to_string(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TweetLine {
    user_id: String,
    tweet_id: String,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserLine {
    user_id: String,
    label: String,
}

fn write_line<W: Write, S: Serialize>(writer: &mut W, value: &S) -> std::io::Result<()> {
    serde_json::to_writer(&mut *writer, value)?;
    writer.write_all(b"\n")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_predictions_to<W: Write>(set: &PredictionSet, mut writer: W) -> std::io::Result<()> {
    write_line(&mut writer, &Meta::new(set.task, &set.source_tag))?;
    for r in &set.records {
        write_line(
            &mut writer,
            &TweetLine {
                user_id: r.user_id.clone(),
                tweet_id: r.tweet_id.clone(),
                probs: r.probs.clone(),
            },
        )?;
    }
    writer.flush()
}

/// Writes a prediction file. Probabilities use shortest round-trip decimal
/// formatting, so reading the file back yields bit-identical values.
pub fn write_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    check_label_order(set.task, &set.label_order)?;
    let path = path.as_ref();
    write_predictions_to(set, create(path)?).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with 1-based line numbers.
fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.map(|l| (i + 1, l)).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn parse<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn read_meta(lines: &mut impl Iterator<Item = Result<(usize, String)>>) -> Result<Meta> {
    let (lineno, text) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing meta line".into(),
    })??;
    let meta: Meta = parse(lineno, &text)?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            line: lineno,
            message: format!("unsupported schema_version {}", meta.schema_version),
        });
    }
    check_label_order(meta.task, &meta.label_order).map_err(|e| Error::at_line(lineno, e))?;
    Ok(meta)
}

pub fn read_predictions_from<R: BufRead>(reader: R) -> Result<PredictionSet> {
    let mut lines = numbered_lines(reader);
    let meta = read_meta(&mut lines)?;
    let n = meta.label_order.len();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for line in lines {
        let (lineno, text) = line?;
        let rec: TweetLine = parse(lineno, &text)?;
        if !seen.insert(rec.tweet_id.clone()) {
            return Err(Error::at_line(lineno, Error::DuplicateTweet(rec.tweet_id)));
        }
        let pred = TweetPrediction::new(rec.user_id, rec.tweet_id, rec.probs, n)
            .map_err(|e| Error::at_line(lineno, e))?;
        records.push(pred);
    }
    PredictionSet::with_label_order(meta.task, meta.label_order, meta.source_tag, records)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    read_predictions_from(open(path.as_ref())?)
}

pub fn write_user_predictions_to<W: Write>(
    set: &UserPredictionSet,
    mut writer: W,
) -> std::io::Result<()> {
    write_line(&mut writer, &Meta::new(set.task, &set.source_tag))?;
    for (user_id, label) in &set.labels {
        write_line(
            &mut writer,
            &UserLine {
                user_id: user_id.clone(),
                label: label.clone(),
            },
        )?;
    }
    writer.flush()
}

pub fn write_user_predictions(set: &UserPredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_user_predictions_to(set, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn read_user_predictions_from<R: BufRead>(reader: R) -> Result<UserPredictionSet> {
    let mut lines = numbered_lines(reader);
    let meta = read_meta(&mut lines)?;
    let space = meta.task.label_space();
    let mut labels = BTreeMap::new();
    for line in lines {
        let (lineno, text) = line?;
        let rec: UserLine = parse(lineno, &text)?;
        space
            .require(&rec.label)
            .map_err(|e| Error::at_line(lineno, e))?;
        if labels.insert(rec.user_id.clone(), rec.label).is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate user_id {:?}", rec.user_id),
            });
        }
    }
    UserPredictionSet::new(meta.task, meta.source_tag, labels)
}

pub fn read_user_predictions(path: impl AsRef<Path>) -> Result<UserPredictionSet> {
    read_user_predictions_from(open(path.as_ref())?)
}

/// Coverage of a prediction set against a corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    /// Corpus tweets with no prediction.
    pub missing: Vec<String>,
    /// Predictions whose tweet is not in the corpus.
    pub unknown: Vec<String>,
}

impl CoverageReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.unknown.is_empty()
    }

    pub fn len(&self) -> usize {
        self.missing.len() + self.unknown.len()
    }
}

pub fn validate(set: &PredictionSet, corpus: &LabeledCorpus) -> CoverageReport {
    let predicted: HashSet<&str> = set.records.iter().map(|r| r.tweet_id.as_str()).collect();
    let known: HashSet<&str> = corpus
        .tweets()
        .iter()
        .map(|t| t.tweet_id.as_str())
        .collect();
    CoverageReport {
        missing: corpus
            .tweets()
            .iter()
            .filter(|t| !predicted.contains(t.tweet_id.as_str()))
            .map(|t| t.tweet_id.clone())
            .collect(),
        unknown: set
            .records
            .iter()
            .filter(|r| !known.contains(r.tweet_id.as_str()))
            .map(|r| r.tweet_id.clone())
            .collect(),
    }
}
