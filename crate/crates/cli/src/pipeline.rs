use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use profiling_core::corpus::split_by_user;
use profiling_core::gru;
use profiling_core::{
    aggregate_users, calibrate_threshold, evaluate, load_corpus, merge_corpora, save_corpus,
    write_predictions, write_user_predictions, Task,
};

use crate::args::PipelineArgs;
use crate::commands::{prepare_out_dir, train_task, write_text, write_vocab};
use crate::config::PipelineConfig;
use crate::CliError;

const SOURCE_TAG: &str = "gru";

/// Layout under the output directory:
///
/// ```text
/// pipeline_config.json
/// split/{train,dev}.jsonl
/// vocab.txt
/// <task>/best.ckpt, history.json, dev_predictions.jsonl, calibration.json,
///        [target_predictions.jsonl,] user_predictions.jsonl
/// report.json
/// ```
pub fn run(args: PipelineArgs) -> Result<(), CliError> {
    let resolved = PipelineConfig::from_args(&args)?.resolve()?;
    let cfg = &resolved.inner;
    let out = &resolved.out_dir;
    prepare_out_dir(out)?;
    let cfg_json = serde_json::to_string_pretty(cfg).expect("serializable");
    write_text(&out.join("pipeline_config.json"), &(cfg_json + "\n"))?;

    let corpus = load_corpus(&resolved.corpus)?;
    let (mut train, dev) = split_by_user(&corpus, cfg.train_fraction, cfg.seed)?;
    for ext in &cfg.extensions {
        train = merge_corpora(&train, &load_corpus(ext)?)?;
    }
    let split_dir = out.join("split");
    prepare_out_dir(&split_dir)?;
    save_corpus(&train, split_dir.join("train.jsonl"))?;
    save_corpus(&dev, split_dir.join("dev.jsonl"))?;
    log::info!(
        "TRAIN: {} users / {} tweets, DEV: {} users / {} tweets",
        train.n_users(),
        train.n_tweets(),
        dev.n_users(),
        dev.n_tweets()
    );

    let vocab = write_vocab(&train, cfg.vocab_cap, out)?;
    let target = match &cfg.target {
        Some(path) => Some(load_corpus(path)?),
        None => None,
    };
    let eval_corpus = target.as_ref().unwrap_or(&dev);

    let tasks: BTreeSet<Task> = cfg.tasks.iter().copied().collect();
    let mut user_preds = BTreeMap::new();
    for &task in &tasks {
        let dir = out.join(task.name());
        prepare_out_dir(&dir)?;
        let best = train_task(task, &train, &dev, &vocab, &cfg.gru, &dir, false)?;

        let dev_preds = gru::predict(
            &best.params,
            &dev,
            &vocab,
            task,
            cfg.gru.max_len,
            SOURCE_TAG,
        )?;
        write_predictions(&dev_preds, dir.join("dev_predictions.jsonl"))?;

        let threshold = if cfg.calibrate {
            let result = calibrate_threshold(&dev_preds, &dev.gold(task)?)?;
            write_text(&dir.join("calibration.json"), &(result.to_json() + "\n"))?;
            log::info!(
                "{task}: threshold {:.2}, DEV user accuracy {} (t=0: {})",
                result.best_threshold,
                result.best_accuracy(),
                result.accuracy_at(0.0).expect("grid starts at 0")
            );
            result.best_threshold
        } else {
            cfg.threshold
        };

        let target_preds = match &target {
            Some(t) => {
                let p = gru::predict(&best.params, t, &vocab, task, cfg.gru.max_len, SOURCE_TAG)?;
                write_predictions(&p, dir.join("target_predictions.jsonl"))?;
                p
            }
            None => dev_preds,
        };
        let users = aggregate_users(&target_preds, threshold)?;
        write_user_predictions(&users, dir.join("user_predictions.jsonl"))?;
        user_preds.insert(task, users);
    }

    if tasks.iter().all(|t| eval_corpus.is_labeled_for(*t)) {
        let report = evaluate(&user_preds, eval_corpus.users(), SOURCE_TAG)?;
        write_text(&out.join("report.json"), &(report.to_json() + "\n"))?;
        println!("{}", report.to_table().trim_end());
    } else {
        let _ = fs::remove_file(out.join("report.json"));
        log::warn!("target corpus lacks gold labels; skipping evaluation");
    }
    Ok(())
}
