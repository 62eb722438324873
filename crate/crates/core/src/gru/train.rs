use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::{LabeledCorpus, Task};
use crate::error::{Error, Result};
use crate::predictions::{argmax, PredictionSet, TweetPrediction};
use crate::rng;
use crate::scalar::Scalar;
use crate::textprep::{encode_text, EncodedSequence, Vocabulary};

use super::adam::adam_step;
use super::network::{forward, loss_and_grads, Dropout};
use super::params::{init_params, GruParams};
use super::GruConfig;

const EVAL_CHUNK: usize = 256;

/// Parameters saved at the end of an epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    /// 1-based.
    pub epoch: usize,
    pub params: GruParams<T>,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub history: Vec<EpochRecord>,
    pub best: Checkpoint<T>,
}

impl<T> TrainOutcome<T> {
    pub fn dev_accuracies(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.dev_accuracy).collect()
    }
}

/// Index of the highest accuracy; the earliest wins ties.
pub fn select_best(accuracies: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &a) in accuracies.iter().enumerate() {
        match best {
            Some(b) if accuracies[b] >= a => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn encode_corpus(
    corpus: &LabeledCorpus,
    vocab: &Vocabulary,
    max_len: usize,
) -> Vec<EncodedSequence> {
    corpus
        .tweets()
        .par_iter()
        .map(|t| encode_text(&t.text, vocab, max_len))
        .collect()
}

fn probabilities<T: Scalar>(
    params: &GruParams<T>,
    seqs: &[EncodedSequence],
) -> Result<Vec<Vec<T>>> {
    let chunks: Vec<Result<Vec<Vec<T>>>> = seqs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| forward(params, chunk, None).map(|(p, _)| p))
        .collect();
    let mut out = Vec::with_capacity(seqs.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Fraction of sequences whose argmax matches the label.
pub fn tweet_accuracy<T: Scalar>(
    params: &GruParams<T>,
    seqs: &[EncodedSequence],
    labels: &[usize],
) -> Result<f64> {
    if seqs.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy over zero sequences".into(),
        ));
    }
    let probs = probabilities(params, seqs)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| {
            let row: Vec<f64> = p.iter().map(|x| x.as_f64()).collect();
            argmax(&row) == y
        })
        .count();
    Ok(correct as f64 / seqs.len() as f64)
}

/// Trains one model for `task`, evaluating DEV tweet accuracy after every
/// epoch.
///
/// Each epoch's checkpoint is handed to `on_checkpoint` (e.g. to write it to
/// disk) and only the best one is retained in memory. Batches are reshuffled
/// every epoch; the trailing partial batch is trained on.
pub fn train<T, F>(
    task: Task,
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    vocab: &Vocabulary,
    config: &GruConfig,
    mut on_checkpoint: F,
) -> Result<TrainOutcome<T>>
where
    T: Scalar,
    F: FnMut(&Checkpoint<T>) -> Result<()>,
{
    config.validate()?;
    if dev.is_empty() {
        return Err(Error::InvalidArgument("DEV corpus is empty".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument("TRAIN corpus is empty".into()));
    }
    let train_labels = train.tweet_labels(task)?;
    let dev_labels = dev.tweet_labels(task)?;
    let train_seqs = encode_corpus(train, vocab, config.max_len);
    let dev_seqs = encode_corpus(dev, vocab, config.max_len);

    let (mut params, mut state) = init_params::<T>(config, vocab.len(), task.label_space().len())?;
    let mut order_rng = rng::seeded(rng::derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..train_seqs.len()).collect();

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<Checkpoint<T>> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<EncodedSequence> = idx.iter().map(|&i| train_seqs[i].clone()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train_labels[i]).collect();
            let dropout = (config.dropout_rate > 0.0).then(|| Dropout {
                rate: config.dropout_rate,
                seed: order_rng.random(),
            });
            let (loss, grads) = loss_and_grads(&params, &batch, &labels, dropout)?;
            adam_step(&mut params, &grads, &mut state, &config.adam)?;
            loss_sum += loss.as_f64();
            n_batches += 1;
        }
        let dev_accuracy = tweet_accuracy(&params, &dev_seqs, &dev_labels)?;
        let mean_loss = loss_sum / n_batches as f64;
        log::info!(
            "{task} epoch {epoch}/{}: mean loss {mean_loss:.4}, dev accuracy {dev_accuracy:.4}",
            config.epochs
        );
        let checkpoint = Checkpoint {
            epoch,
            params: params.clone(),
            dev_accuracy,
        };
        on_checkpoint(&checkpoint)?;
        history.push(EpochRecord {
            epoch,
            mean_loss,
            dev_accuracy,
        });
        if best.as_ref().is_none_or(|b| dev_accuracy > b.dev_accuracy) {
            best = Some(checkpoint);
        }
    }
    Ok(TrainOutcome {
        history,
        best: best.expect("at least one epoch"),
    })
}

/// Tweet-level softmax outputs for every tweet of `corpus`, dropout off.
pub fn predict<T: Scalar>(
    params: &GruParams<T>,
    corpus: &LabeledCorpus,
    vocab: &Vocabulary,
    task: Task,
    max_len: usize,
    source_tag: &str,
) -> Result<PredictionSet> {
    let n_labels = task.label_space().len();
    if params.n_classes() != n_labels {
        return Err(Error::Shape(format!(
            "model has {} classes but {task} has {n_labels} labels",
            params.n_classes()
        )));
    }
    if corpus.is_empty() {
        return PredictionSet::new(task, source_tag, Vec::new());
    }
    let seqs = encode_corpus(corpus, vocab, max_len);
    let probs = probabilities(params, &seqs)?;
    let records = corpus
        .tweets()
        .iter()
        .zip(probs)
        .map(|(tweet, row)| {
            let row: Vec<f64> = row.into_iter().map(Scalar::as_f64).collect();
            let total: f64 = row.iter().sum();
            let row = row.into_iter().map(|p| p / total).collect();
            TweetPrediction::new(&tweet.user_id, &tweet.tweet_id, row, n_labels)
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new(task, source_tag, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_epoch_is_earliest_max() {
        assert_eq!(select_best(&[0.3, 0.5, 0.5, 0.4]), Some(1));
        assert_eq!(select_best(&[0.9]), Some(0));
        assert_eq!(select_best(&[]), None);
    }
}
