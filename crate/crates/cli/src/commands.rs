use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use profiling_core::aggregation::CalibrationResult;
use profiling_core::corpus::split_by_user;
use profiling_core::gru::{self, Checkpoint, EpochRecord, GruConfig};
use profiling_core::predictions::{validate, write_user_predictions_to};
use profiling_core::{
    aggregate_users, build_vocab as make_vocab, calibrate_threshold, evaluate as evaluate_sets,
    load_corpus, majority_vote, merge_corpora, read_predictions, read_user_predictions,
    save_corpus, write_predictions, write_user_predictions, LabeledCorpus, Task, UserPredictionSet,
    Vocabulary,
};
use serde::Serialize;

use crate::args::{
    AggregateArgs, BuildVocabArgs, CalibrateArgs, EnsembleArgs, EvaluateArgs, MergeArgs,
    PredictArgs, SplitArgs, TrainArgs, ValidateArgs,
};
use crate::config::{apply_gru_overrides, read_json, PipelineConfig};
use crate::CliError;

pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Name of an output file, which must stay inside the output directory.
fn output_path(out_dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    let p = Path::new(name);
    if p.components().count() != 1 || p.file_name().is_none() {
        return Err(CliError::Usage(format!(
            "output name {name:?} must be a plain file name"
        )));
    }
    Ok(out_dir.join(p))
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Data(format!("cannot write to standard output: {e}"))
}

pub fn split(a: SplitArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&a.corpus)?;
    let (train, dev) = split_by_user(&corpus, a.train_fraction, a.seed.seed.unwrap_or(0))?;
    prepare_out_dir(&a.out_dir)?;
    save_corpus(&train, a.out_dir.join("train.jsonl"))?;
    save_corpus(&dev, a.out_dir.join("dev.jsonl"))?;
    log::info!(
        "split {} users into {} TRAIN / {} DEV",
        corpus.n_users(),
        train.n_users(),
        dev.n_users()
    );
    Ok(())
}

pub fn merge(a: MergeArgs) -> Result<(), CliError> {
    let mut merged = load_corpus(&a.base)?;
    for ext in &a.extension {
        merged = merge_corpora(&merged, &load_corpus(ext)?)?;
    }
    prepare_out_dir(&a.out_dir)?;
    save_corpus(&merged, a.out_dir.join("merged.jsonl"))?;
    log::info!(
        "merged corpus has {} users, {} tweets",
        merged.n_users(),
        merged.n_tweets()
    );
    Ok(())
}

pub fn write_vocab(
    train: &LabeledCorpus,
    cap: usize,
    out_dir: &Path,
) -> Result<Vocabulary, CliError> {
    let vocab = make_vocab(train, cap)?;
    vocab.save(out_dir.join("vocab.txt"))?;
    log::info!("vocabulary: {} entries", vocab.len());
    Ok(vocab)
}

pub fn build_vocab(a: BuildVocabArgs) -> Result<(), CliError> {
    let train = load_corpus(&a.train)?;
    prepare_out_dir(&a.out_dir)?;
    write_vocab(&train, a.cap, &a.out_dir)?;
    Ok(())
}

#[derive(Serialize)]
struct History<'a> {
    task: Task,
    best_epoch: usize,
    best_dev_accuracy: f64,
    epochs: &'a [EpochRecord],
}

/// Trains one task and writes `best.ckpt` and `history.json` to `out_dir`.
pub fn train_task(
    task: Task,
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    vocab: &Vocabulary,
    config: &GruConfig,
    out_dir: &Path,
    keep_checkpoints: bool,
) -> Result<Checkpoint<f64>, CliError> {
    let outcome = gru::train::<f64, _>(task, train, dev, vocab, config, |ck| {
        if keep_checkpoints {
            gru::write_checkpoint(
                out_dir.join(format!("epoch-{:02}.ckpt", ck.epoch)),
                task,
                config,
                ck,
            )?;
        }
        Ok(())
    })?;
    gru::write_checkpoint(out_dir.join("best.ckpt"), task, config, &outcome.best)?;
    let history = History {
        task,
        best_epoch: outcome.best.epoch,
        best_dev_accuracy: outcome.best.dev_accuracy,
        epochs: &outcome.history,
    };
    let json = serde_json::to_string_pretty(&history).expect("serializable");
    write_text(&out_dir.join("history.json"), &(json + "\n"))?;
    log::info!(
        "{task}: best epoch {} with DEV tweet accuracy {:.4}",
        outcome.best.epoch,
        outcome.best.dev_accuracy
    );
    Ok(outcome.best)
}

pub fn train_gru(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg: PipelineConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = a.seed.seed {
        cfg.seed = seed;
    }
    apply_gru_overrides(&mut cfg.gru, &a.gru);
    cfg.gru.seed = cfg.seed;
    cfg.gru.validate()?;

    let train = load_corpus(&a.train)?;
    let dev = load_corpus(&a.dev)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    prepare_out_dir(&a.out_dir)?;
    train_task(
        a.task,
        &train,
        &dev,
        &vocab,
        &cfg.gru,
        &a.out_dir,
        a.keep_checkpoints,
    )?;
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let (header, checkpoint) = gru::read_checkpoint::<f64>(&a.checkpoint)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    if vocab.len() != header.vocab_size {
        return Err(CliError::Data(format!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            header.vocab_size
        )));
    }
    let corpus = load_corpus(&a.corpus)?;
    let out = output_path(&a.out_dir, &a.name)?;
    let set = gru::predict(
        &checkpoint.params,
        &corpus,
        &vocab,
        header.task,
        header.config.max_len,
        &a.source_tag,
    )?;
    prepare_out_dir(&a.out_dir)?;
    write_predictions(&set, out)?;
    log::info!("wrote {} {} predictions", set.len(), header.task);
    Ok(())
}

pub fn validate_preds(a: ValidateArgs) -> Result<(), CliError> {
    let set = read_predictions(&a.preds)?;
    let corpus = load_corpus(&a.corpus)?;
    let report = validate(&set, &corpus);
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{json}");
    if report.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} corpus tweets lack a prediction, {} predictions name unknown tweets",
            report.missing.len(),
            report.unknown.len()
        )))
    }
}

fn emit_user_predictions(
    set: &UserPredictionSet,
    out_dir: Option<&Path>,
    name: &str,
) -> Result<(), CliError> {
    match out_dir {
        Some(dir) => {
            let out = output_path(dir, name)?;
            prepare_out_dir(dir)?;
            write_user_predictions(set, out)?;
        }
        None => {
            let stdout = io::stdout();
            write_user_predictions_to(set, stdout.lock()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

pub fn aggregate(a: AggregateArgs) -> Result<(), CliError> {
    let threshold = match (a.threshold, &a.calibration) {
        (Some(t), None) => t,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            CalibrationResult::best_threshold_from_json(&text)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --threshold and --calibration".into(),
            ))
        }
    };
    if !(0.0..1.0).contains(&threshold) {
        return Err(CliError::Usage(format!(
            "threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let set = read_predictions(&a.preds)?;
    let users = aggregate_users(&set, threshold)?;
    log::info!(
        "aggregated {} users at threshold {threshold:.2}",
        users.len()
    );
    emit_user_predictions(&users, a.out_dir.as_deref(), &a.name)
}

pub fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let set = read_predictions(&a.preds)?;
    let gold = load_corpus(&a.gold)?.gold(set.task())?;
    let result = calibrate_threshold(&set, &gold)?;
    prepare_out_dir(&a.out_dir)?;
    write_text(
        &a.out_dir.join("calibration.json"),
        &(result.to_json() + "\n"),
    )?;
    println!("{:.2}", result.best_threshold);
    log::info!(
        "best threshold {:.2}: user accuracy {}",
        result.best_threshold,
        result.best_accuracy()
    );
    Ok(())
}

pub fn ensemble(a: EnsembleArgs) -> Result<(), CliError> {
    let systems = a
        .inputs
        .iter()
        .map(read_user_predictions)
        .collect::<Result<Vec<_>, _>>()?;
    let voted = majority_vote(&systems)?;
    emit_user_predictions(&voted, a.out_dir.as_deref(), &a.name)
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let files = [
        (Task::Age, &a.pred_age),
        (Task::Dialect, &a.pred_dialect),
        (Task::Gender, &a.pred_gender),
    ];
    let mut preds = BTreeMap::new();
    for (task, path) in files {
        if let Some(path) = path {
            let set = read_user_predictions(path)?;
            if set.task() != task {
                return Err(CliError::Data(format!(
                    "{} holds {} predictions, expected {task}",
                    path.display(),
                    set.task()
                )));
            }
            preds.insert(task, set);
        }
    }
    if preds.is_empty() {
        return Err(CliError::Usage(
            "give at least one of --pred-age, --pred-dialect, --pred-gender".into(),
        ));
    }
    let gold = load_corpus(&a.gold)?;
    let report = evaluate_sets(&preds, gold.users(), &a.condition)?;
    if let Some(dir) = &a.out_dir {
        prepare_out_dir(dir)?;
        write_text(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    }
    let text = if a.json {
        report.to_json()
    } else {
        report.to_table()
    };
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", text.trim_end()).map_err(stdout_err)
}
