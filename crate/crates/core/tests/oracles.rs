use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use profiling_core::aggregation::{aggregate_users, calibrate_threshold, user_majority};
use profiling_core::ensemble::majority_vote;
use profiling_core::metrics::{joint_accuracy, task_accuracy};
use profiling_core::predictions::{read_predictions_from, validate, write_predictions_to};
use profiling_core::{
    LabeledCorpus, PredictionSet, Task, TweetPrediction, TweetRecord, UserPredictionSet,
    UserProfile,
};

fn random_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn random_set(rng: &mut ChaCha8Rng, task: Task, n_users: usize) -> PredictionSet {
    let k = task.label_space().len();
    let mut records = Vec::new();
    for u in 0..n_users {
        for t in 0..rng.random_range(1..=12) {
            records.push(
                TweetPrediction::new(
                    format!("u{u:03}"),
                    format!("u{u}t{t}"),
                    random_row(rng, k),
                    k,
                )
                .unwrap(),
            );
        }
    }
    PredictionSet::new(task, "fixture", records).unwrap()
}

#[test]
fn aggregation_counts_users() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let set = random_set(&mut rng, Task::Age, 225);
    assert_eq!(aggregate_users(&set, 0.3).unwrap().len(), 225);
}

#[test]
fn aggregation_equals_per_user_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for task in Task::ALL {
        let set = random_set(&mut rng, task, 40);
        for t in [0.0, 0.25, 0.5, 0.75, 0.99] {
            let agg = aggregate_users(&set, t).unwrap();
            let mut oracle = BTreeMap::new();
            for r in set.records() {
                oracle
                    .entry(r.user_id.clone())
                    .or_insert_with(Vec::new)
                    .push(r);
            }
            for (user, preds) in oracle {
                let label = task.label_space().label(user_majority(&preds, t).unwrap());
                assert_eq!(agg.label(&user), Some(label));
            }
        }
    }
}

#[test]
fn calibration_prefers_confident_tweets() {
    // two confident correct tweets, three unconfident wrong ones per user
    let mut records = Vec::new();
    let mut gold = BTreeMap::new();
    for u in 0..20 {
        let user = format!("u{u}");
        let g = u % 3;
        let wrong = (g + 1) % 3;
        for t in 0..5 {
            let mut p = vec![0.0; 3];
            if t < 2 {
                p[g] = 0.95;
                p[wrong] = 0.05;
            } else {
                p[wrong] = 0.5;
                p[g] = 0.3;
                p[(g + 2) % 3] = 0.2;
            }
            records.push(TweetPrediction::new(&user, format!("{user}-{t}"), p, 3).unwrap());
        }
        gold.insert(user, Task::Age.label_space().label(g).to_string());
    }
    let set = PredictionSet::new(Task::Age, "fixture", records).unwrap();
    let cal = calibrate_threshold(&set, &gold).unwrap();
    assert!(cal.best_threshold > 0.0);
    assert_eq!(cal.best_threshold, 0.51);
    assert_eq!(cal.accuracy_at(0.0).unwrap().value(), 0.0);
    assert_eq!(cal.best_accuracy().value(), 1.0);
}

#[test]
fn majority_vote_equals_vote_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let space = Task::Dialect.label_space();
    let systems: Vec<UserPredictionSet> = (0..3)
        .map(|s| {
            let labels = (0..50)
                .map(|u| {
                    (
                        format!("u{u}"),
                        space.label(rng.random_range(0..15)).to_string(),
                    )
                })
                .collect();
            UserPredictionSet::new(Task::Dialect, format!("s{s}"), labels).unwrap()
        })
        .collect();
    let voted = majority_vote(&systems).unwrap();
    for u in 0..50 {
        let user = format!("u{u}");
        let votes: Vec<&str> = systems.iter().map(|s| s.label(&user).unwrap()).collect();
        let count = |l: &str| votes.iter().filter(|v| **v == l).count();
        let top = votes.iter().map(|v| count(v)).max().unwrap();
        let expected = votes.iter().find(|v| count(v) == top).unwrap();
        assert_eq!(voted.label(&user), Some(*expected));
    }
}

#[test]
fn task_accuracy_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let space = Task::Age.label_space();
    let mut pred = BTreeMap::new();
    let mut gold = BTreeMap::new();
    for u in 0..225 {
        pred.insert(
            format!("u{u}"),
            space.label(rng.random_range(0..3)).to_string(),
        );
        gold.insert(
            format!("u{u}"),
            space.label(rng.random_range(0..3)).to_string(),
        );
    }
    let expected = pred.iter().filter(|(u, l)| gold[*u] == **l).count() as f64 / 225.0;
    let set = UserPredictionSet::new(Task::Age, "p", pred).unwrap();
    let acc = task_accuracy(&set, &gold).unwrap();
    assert_eq!(acc.value(), expected);
    assert_eq!(acc.total, 225);
}

/// 10 users; each task wrong for exactly one user, and those users differ,
/// so 7 users are right on all three.
pub fn ten_user_fixture() -> (
    BTreeMap<Task, UserPredictionSet>,
    BTreeMap<String, UserProfile>,
) {
    let mut gold = BTreeMap::new();
    let mut preds: BTreeMap<Task, BTreeMap<String, String>> = BTreeMap::new();
    let wrong_user = |task: Task| match task {
        Task::Age => 0,
        Task::Dialect => 1,
        Task::Gender => 2,
    };
    for u in 0..10 {
        let user = format!("u{u}");
        let mut profile = UserProfile::new(&user);
        for task in Task::ALL {
            let space = task.label_space();
            let g = u % space.len();
            profile = profile.with_label(task, space.label(g));
            let p = if u == wrong_user(task) {
                (g + 1) % space.len()
            } else {
                g
            };
            preds
                .entry(task)
                .or_default()
                .insert(user.clone(), space.label(p).to_string());
        }
        gold.insert(user, profile);
    }
    let preds = preds
        .into_iter()
        .map(|(t, m)| (t, UserPredictionSet::new(t, "fixture", m).unwrap()))
        .collect();
    (preds, gold)
}

#[test]
fn joint_accuracy_on_ten_users() {
    let (preds, gold) = ten_user_fixture();
    let report = joint_accuracy(&preds, &gold).unwrap();
    assert_eq!(report.n_users, 10);
    assert_eq!(report.joint.unwrap().value(), 0.7);
    for task in Task::ALL {
        assert_eq!(report.per_task[&task].value(), 0.9);
    }
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["joint"], 0.7);
    assert_eq!(json["accuracy"]["dialect"], 0.9);
    assert!(report.to_table().contains("0.7000"));
}

#[test]
fn coverage_report_counts_deletions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tweets = Vec::new();
    let mut users = BTreeMap::new();
    for u in 0..20 {
        let user = format!("u{u}");
        users.insert(user.clone(), UserProfile::new(&user));
        for t in 0..10 {
            tweets.push(TweetRecord {
                user_id: user.clone(),
                tweet_id: format!("{user}-{t}"),
                text: "x".into(),
            });
        }
    }
    let corpus = LabeledCorpus::new(tweets, users).unwrap();
    let mut records: Vec<TweetPrediction> = corpus
        .tweets()
        .iter()
        .map(|t| TweetPrediction::new(&t.user_id, &t.tweet_id, random_row(&mut rng, 2), 2).unwrap())
        .collect();
    records.shuffle(&mut rng);
    let deleted = records.len() / 20;
    records.truncate(records.len() - deleted);
    let set = PredictionSet::new(Task::Gender, "p", records).unwrap();
    let report = validate(&set, &corpus);
    assert_eq!(report.missing.len(), deleted);
    assert!(report.unknown.is_empty());
}

#[test]
fn dialect_file_of_hundred_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let records = (0..100)
        .map(|i| {
            TweetPrediction::new(
                format!("u{}", i % 7),
                format!("t{i}"),
                random_row(&mut rng, 15),
                15,
            )
            .unwrap()
        })
        .collect();
    let set = PredictionSet::new(Task::Dialect, "fixture", records).unwrap();
    let mut buf = Vec::new();
    write_predictions_to(&set, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 101);
    let back = read_predictions_from(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 100);
    assert_eq!(back, set);
}
