//! Seeded synthetic corpora for smoke tests and demos.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::corpus::{LabeledCorpus, Task, TweetRecord, UserProfile};
use crate::error::Result;
use crate::rng;

/// A corpus where every class draws its words from its own vocabulary, so
/// tweets are linearly separable by token identity.
#[derive(Clone, Debug)]
pub struct SeparableCorpus {
    pub task: Task,
    pub n_users: usize,
    pub tweets_per_user: usize,
    pub words_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SeparableCorpus {
    fn default() -> Self {
        SeparableCorpus {
            task: Task::Age,
            n_users: 60,
            tweets_per_user: 10,
            words_per_class: 12,
            min_len: 3,
            max_len: 8,
            seed: 0,
        }
    }
}

impl SeparableCorpus {
    /// Users cycle through the task's labels: user `i` gets label `i mod K`.
    pub fn build(&self) -> Result<LabeledCorpus> {
        let space = self.task.label_space();
        let mut rng = rng::seeded(self.seed);
        let mut tweets = Vec::with_capacity(self.n_users * self.tweets_per_user);
        let mut users = BTreeMap::new();
        for u in 0..self.n_users {
            let class = u % space.len();
            let user_id = format!("user{u:04}");
            users.insert(
                user_id.clone(),
                UserProfile::new(&user_id).with_label(self.task, space.label(class)),
            );
            for t in 0..self.tweets_per_user {
                let len = rng.random_range(self.min_len..=self.max_len);
                let words: Vec<String> = (0..len)
                    .map(|_| format!("c{class}w{}", rng.random_range(0..self.words_per_class)))
                    .collect();
                tweets.push(TweetRecord {
                    user_id: user_id.clone(),
                    tweet_id: format!("{user_id}-{t:03}"),
                    text: words.join(" "),
                });
            }
        }
        LabeledCorpus::new(tweets, users)
    }
}
