use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use profiling_core::aggregation::{
    aggregate_users, calibrate_threshold, majority_of_rows, ThresholdGrid,
};
use profiling_core::corpus::{merge_corpora, read_corpus, split_by_user, write_corpus};
use profiling_core::ensemble::majority_vote;
use profiling_core::gru::softmax;
use profiling_core::metrics::evaluate;
use profiling_core::predictions::{
    read_predictions_from, write_predictions_to, PredictionSet, TweetPrediction,
};
use profiling_core::textprep::{decode, encode, tokenize, TokenCounts, Vocabulary};
use profiling_core::{LabeledCorpus, Task, TweetRecord, UserPredictionSet, UserProfile};

fn brute_force_majority(rows: &[Vec<f64>], t: f64) -> usize {
    let k = rows[0].len();
    let top = |r: &Vec<f64>| (0..k).fold(0, |b, i| if r[i] > r[b] { i } else { b });
    let mut s: Vec<&Vec<f64>> = rows.iter().filter(|r| r[top(r)] >= t).collect();
    if s.is_empty() {
        s = rows.iter().collect();
    }
    let count = |l: usize| s.iter().filter(|r| top(r) == l).count();
    let mass = |l: usize| s.iter().map(|r| r[l]).sum::<f64>();
    (0..k)
        .max_by(|&a, &b| {
            count(a)
                .cmp(&count(b))
                .then(mass(a).partial_cmp(&mass(b)).unwrap())
                .then(b.cmp(&a))
        })
        .unwrap()
}

fn prob_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn user_rows(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prob_row(k), 1..12)
}

fn corpus_strategy() -> impl Strategy<Value = LabeledCorpus> {
    // (user index, gender index, text) per tweet
    prop::collection::vec(
        (0usize..8, 0usize..2, "[a-z]{1,6}( [a-z]{1,6}){0,4}"),
        1..40,
    )
    .prop_map(|rows| {
        let mut tweets = Vec::new();
        let mut users = BTreeMap::new();
        for (i, (u, g, text)) in rows.into_iter().enumerate() {
            let uid = format!("u{u}");
            users.entry(uid.clone()).or_insert_with(|| {
                UserProfile::new(&uid).with_label(Task::Gender, ["male", "female"][g])
            });
            tweets.push(TweetRecord {
                user_id: uid,
                tweet_id: format!("t{i}"),
                text,
            });
        }
        LabeledCorpus::new(tweets, users).unwrap()
    })
}

fn prefixed(c: &LabeledCorpus, prefix: &str) -> LabeledCorpus {
    let tweets = c
        .tweets()
        .iter()
        .map(|t| TweetRecord {
            user_id: format!("{prefix}{}", t.user_id),
            tweet_id: format!("{prefix}{}", t.tweet_id),
            text: t.text.clone(),
        })
        .collect();
    let users = c
        .users()
        .values()
        .map(|u| {
            let id = format!("{prefix}{}", u.user_id);
            (
                id.clone(),
                UserProfile {
                    user_id: id,
                    gold: u.gold.clone(),
                },
            )
        })
        .collect();
    LabeledCorpus::new(tweets, users).unwrap()
}

fn sorted_tweets(c: &LabeledCorpus) -> Vec<TweetRecord> {
    let mut t = c.tweets().to_vec();
    t.sort_by(|a, b| a.tweet_id.cmp(&b.tweet_id));
    t
}

proptest! {
    #[test]
    fn majority_matches_brute_force(rows in user_rows(3), t_idx in 0usize..100) {
        let t = ThresholdGrid::default().values()[t_idx];
        prop_assert_eq!(majority_of_rows(&rows, t), Some(brute_force_majority(&rows, t)));
    }

    #[test]
    fn majority_is_order_invariant(rows in user_rows(15), t_idx in 0usize..100, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let t = t_idx as f64 / 100.0;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut profiling_core::rng::seeded(seed));
        prop_assert_eq!(majority_of_rows(&rows, t), majority_of_rows(&shuffled, t));
    }

    #[test]
    fn raising_threshold_never_adds_tweets(rows in user_rows(2)) {
        let kept = |t: f64| rows.iter().filter(|r| r.iter().cloned().fold(0.0, f64::max) >= t).count();
        let grid = ThresholdGrid::default();
        for w in grid.values().windows(2) {
            prop_assert!(kept(w[1]) <= kept(w[0]));
        }
        prop_assert_eq!(kept(0.0), rows.len());
    }

    #[test]
    fn calibration_best_dominates_grid(users in prop::collection::vec((user_rows(3), 0usize..3), 1..15)) {
        let mut records = Vec::new();
        let mut gold = BTreeMap::new();
        for (u, (rows, g)) in users.iter().enumerate() {
            for (i, r) in rows.iter().enumerate() {
                records.push(TweetPrediction::new(format!("u{u}"), format!("u{u}t{i}"), r.clone(), 3).unwrap());
            }
            gold.insert(format!("u{u}"), Task::Age.label_space().label(*g).to_string());
        }
        let set = PredictionSet::new(Task::Age, "p", records).unwrap();
        let cal = calibrate_threshold(&set, &gold).unwrap();
        prop_assert_eq!(cal.accuracy_by_threshold.len(), 100);
        let best = cal.best_accuracy();
        for (t, a) in &cal.accuracy_by_threshold {
            prop_assert!(best >= *a);
            if *a == best {
                prop_assert!(cal.best_threshold <= *t);
            }
        }
        // threshold 0 equals plain argmax majority
        let at_zero = aggregate_users(&set, 0.0).unwrap();
        for (u, label) in at_zero.labels() {
            let rows: Vec<Vec<f64>> = set.records().iter().filter(|r| &r.user_id == u).map(|r| r.probs().to_vec()).collect();
            prop_assert_eq!(label.as_str(), Task::Age.label_space().label(brute_force_majority(&rows, 0.0)));
        }
    }

    #[test]
    fn split_partitions_users(c in corpus_strategy(), f in 0.05f64..0.95, seed in any::<u64>()) {
        prop_assume!(c.n_users() >= 2);
        let (tr, dev) = split_by_user(&c, f, seed).unwrap();
        let a: BTreeSet<_> = tr.users().keys().collect();
        let b: BTreeSet<_> = dev.users().keys().collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.len() + b.len(), c.n_users());
        prop_assert_eq!(tr.n_tweets() + dev.n_tweets(), c.n_tweets());
    }

    #[test]
    fn merge_is_associative_on_disjoint(a in corpus_strategy(), b in corpus_strategy(), c in corpus_strategy()) {
        let (a, b, c) = (prefixed(&a, "a"), prefixed(&b, "b"), prefixed(&c, "c"));
        let left = merge_corpora(&merge_corpora(&a, &b).unwrap(), &c).unwrap();
        let right = merge_corpora(&a, &merge_corpora(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left.users(), right.users());
        prop_assert_eq!(sorted_tweets(&left), sorted_tweets(&right));
    }

    #[test]
    fn corpus_save_load_is_identity(c in corpus_strategy()) {
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf).unwrap();
        let back = read_corpus(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &c);
        let mut again = Vec::new();
        write_corpus(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn prediction_round_trip_is_exact(rows in prop::collection::vec(prob_row(15), 1..30)) {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| TweetPrediction::new(format!("u{}", i % 4), format!("t{i}"), r, 15).unwrap())
            .collect();
        let set = PredictionSet::new(Task::Dialect, "gru", records).unwrap();
        let mut buf = Vec::new();
        write_predictions_to(&set, &mut buf).unwrap();
        let back = read_predictions_from(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &set);
        let mut again = Vec::new();
        write_predictions_to(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn vocab_counting_is_chunking_invariant(texts in prop::collection::vec("[a-e]{1,2}( [a-e]{1,2}){0,6}", 1..30), split in 0usize..30) {
        let tokens: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let mut whole = TokenCounts::new();
        for (i, t) in tokens.iter().enumerate() {
            whole.add_tweet(i, t);
        }
        let split = split.min(tokens.len());
        let (mut first, mut second) = (TokenCounts::new(), TokenCounts::new());
        for (i, t) in tokens.iter().enumerate() {
            if i < split { first.add_tweet(i, t) } else { second.add_tweet(i, t) }
        }
        // merge in the "wrong" order on purpose
        let merged = second.merge(first);
        prop_assert_eq!(whole.into_vocabulary(5), merged.into_vocabulary(5));
    }

    #[test]
    fn decode_inverts_encode(words in prop::collection::vec(0usize..20, 0..50)) {
        let vocab = Vocabulary::from_content_tokens((0..20).map(|i| format!("w{i}")));
        let tokens: Vec<String> = words.iter().map(|i| format!("w{i}")).collect();
        let enc = encode(&tokens, &vocab, 50);
        prop_assert_eq!(enc.ids.len(), 50);
        prop_assert!(enc.ids[enc.true_length..].iter().all(|id| *id == 0));
        prop_assert_eq!(decode(&enc, &vocab), tokens);
    }

    #[test]
    fn softmax_rows_are_distributions(logits in prop::collection::vec(-30.0f64..30.0, 2..16), shift in -100.0f64..100.0) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let q = softmax(&shifted);
        let am = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        prop_assert_eq!(am(&p), am(&logits));
        prop_assert_eq!(am(&q), am(&logits));
    }

    #[test]
    fn identical_systems_vote_to_themselves(labels in prop::collection::vec(0usize..15, 1..20), k in 2usize..5) {
        let space = Task::Dialect.label_space();
        let set = UserPredictionSet::new(
            Task::Dialect,
            "s",
            labels.iter().enumerate().map(|(i, l)| (format!("u{i}"), space.label(*l).to_string())).collect(),
        ).unwrap();
        let systems = vec![set.clone(); k];
        let voted = majority_vote(&systems).unwrap();
        prop_assert_eq!(voted.labels(), set.labels());
    }

    #[test]
    fn joint_never_exceeds_task_accuracy(rows in prop::collection::vec((0usize..3, 0usize..15, 0usize..2, 0usize..3, 0usize..15, 0usize..2), 1..40)) {
        let mut gold = BTreeMap::new();
        let mut preds: BTreeMap<Task, BTreeMap<String, String>> = BTreeMap::new();
        for (i, (ga, gd, gg, pa, pd, pg)) in rows.iter().enumerate() {
            let u = format!("u{i}");
            gold.insert(u.clone(), UserProfile::new(&u)
                .with_label(Task::Age, Task::Age.label_space().label(*ga))
                .with_label(Task::Dialect, Task::Dialect.label_space().label(*gd))
                .with_label(Task::Gender, Task::Gender.label_space().label(*gg)));
            for (task, p) in [(Task::Age, pa), (Task::Dialect, pd), (Task::Gender, pg)] {
                preds.entry(task).or_default().insert(u.clone(), task.label_space().label(*p).to_string());
            }
        }
        let preds: BTreeMap<Task, UserPredictionSet> = preds
            .into_iter()
            .map(|(t, m)| (t, UserPredictionSet::new(t, "p", m).unwrap()))
            .collect();
        let report = evaluate(&preds, &gold, "x").unwrap();
        let joint = report.joint.unwrap();
        prop_assert!(report.per_task.values().all(|a| joint <= *a));
    }
}
