//! Tokenization, the frequency-capped vocabulary, and fixed-length encoding.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";
pub const URL_TOKEN: &str = "<URL>";
pub const USER_TOKEN: &str = "<USER>";

pub const DEFAULT_VOCAB_CAP: usize = 100_000;
pub const DEFAULT_MAX_LEN: usize = 50;

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_mark(c)
}

// Combining marks (Arabic harakat, Latin accents) stay attached to their base letter.
fn is_mark(c: char) -> bool {
    matches!(c,
        '\u{0300}'..='\u{036F}'
        | '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06ED}'
        | '\u{200C}'..='\u{200D}'
        | '\u{FE00}'..='\u{FE0F}')
}

/// Splits on Unicode whitespace, detaches every non-word character as its
/// own token, and replaces URLs and @-mentions with `<URL>` / `<USER>`.
/// Case and script are preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            tokens.push(URL_TOKEN.to_string());
            continue;
        }
        let mut rest = chunk;
        if let Some(after) = rest.strip_prefix('@') {
            let handle_len: usize = after
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .map(char::len_utf8)
                .sum();
            if handle_len > 0 {
                tokens.push(USER_TOKEN.to_string());
                rest = &after[handle_len..];
            }
        }
        let mut word = String::new();
        for c in rest.chars() {
            if is_word_char(c) {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Token frequencies with first-occurrence positions, mergeable across shards.
///
/// Positions are global (tweet index, token index) pairs, so counting shards
/// in any grouping and merging them yields the same ranking as one pass.
#[derive(Clone, Debug, Default)]
pub struct TokenCounts {
    counts: HashMap<String, (u64, (usize, usize))>,
}

impl TokenCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tweet(&mut self, tweet_index: usize, tokens: &[String]) {
        for (pos, tok) in tokens.iter().enumerate() {
            if tok == PAD_TOKEN || tok == UNK_TOKEN {
                continue;
            }
            let entry = self
                .counts
                .entry(tok.clone())
                .or_insert((0, (tweet_index, pos)));
            entry.0 += 1;
            entry.1 = entry.1.min((tweet_index, pos));
        }
    }

    pub fn merge(mut self, other: TokenCounts) -> TokenCounts {
        for (tok, (n, first)) in other.counts {
            let entry = self.counts.entry(tok).or_insert((0, first));
            entry.0 += n;
            entry.1 = entry.1.min(first);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).map_or(0, |e| e.0)
    }

    /// Keeps the `cap` most frequent tokens; ties go to the earlier first occurrence.
    pub fn into_vocabulary(self, cap: usize) -> Vocabulary {
        let mut ranked: Vec<_> = self.counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        ranked.truncate(cap);
        Vocabulary::from_content_tokens(ranked.into_iter().map(|(tok, _)| tok))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

impl Vocabulary {
    /// Specials first, then `tokens` in the given order.
    pub fn from_content_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            id_to_token,
            token_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_content(&self) -> usize {
        self.id_to_token.len() - 2
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for tok in &self.id_to_token {
            writer.write_all(tok.as_bytes())?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            tokens.push(line);
        }
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Parse {
                line: 1,
                message: format!("vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}"),
            });
        }
        let vocab = Vocabulary::from_content_tokens(tokens.into_iter().skip(2));
        if vocab.token_to_id.len() != vocab.id_to_token.len() {
            return Err(Error::Parse {
                line: 0,
                message: "vocabulary contains duplicate tokens".into(),
            });
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

/// Counts tokens over all tweets of `train` and keeps the `cap` most frequent.
pub fn build_vocab(train: &LabeledCorpus, cap: usize) -> Result<Vocabulary> {
    if cap == 0 {
        return Err(Error::InvalidArgument("vocabulary cap must be >= 1".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    let mut counts = TokenCounts::new();
    for (i, tweet) in train.tweets().iter().enumerate() {
        counts.add_tweet(i, &tokenize(&tweet.text));
    }
    Ok(counts.into_vocabulary(cap))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub true_length: usize,
}

impl EncodedSequence {
    pub fn content(&self) -> &[u32] {
        &self.ids[..self.true_length]
    }
}

/// Maps tokens to ids, keeping the head when longer than `max_len` and
/// padding the tail with `PAD`.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> EncodedSequence {
    let true_length = tokens.len().min(max_len);
    let mut ids: Vec<u32> = tokens[..true_length].iter().map(|t| vocab.id(t)).collect();
    ids.resize(max_len, PAD);
    EncodedSequence { ids, true_length }
}

pub fn encode_text(text: &str, vocab: &Vocabulary, max_len: usize) -> EncodedSequence {
    encode(&tokenize(text), vocab, max_len)
}

/// Inverse of `encode` over the unpadded prefix.
pub fn decode(seq: &EncodedSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.content()
        .iter()
        .map(|id| vocab.token(*id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_corpus;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn corpus(texts: &[&str]) -> LabeledCorpus {
        let body: Vec<String> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| format!(r#"{{"user_id":"u","tweet_id":"t{i}","text":"{t}"}}"#))
            .collect();
        read_corpus(body.join("\n").as_bytes()).unwrap()
    }

    #[test]
    fn punctuation_is_detached() {
        assert_eq!(tokenize("hello, world"), toks(&["hello", ",", "world"]));
        assert_eq!(tokenize("wow!!"), toks(&["wow", "!", "!"]));
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn urls_and_mentions_are_replaced() {
        assert_eq!(
            tokenize("see http://x.y now"),
            toks(&["see", "<URL>", "now"])
        );
        assert_eq!(tokenize("@bob_1, hi"), toks(&["<USER>", ",", "hi"]));
        assert_eq!(tokenize("@ alone"), toks(&["@", "alone"]));
    }

    #[test]
    fn arabic_text_keeps_script_and_diacritics() {
        assert_eq!(
            tokenize("مرحبا، كيفَ الحال؟"),
            toks(&["مرحبا", "،", "كيفَ", "الحال", "؟"])
        );
        assert_eq!(tokenize("Hello World"), toks(&["Hello", "World"]));
    }

    #[test]
    fn arabic_fixture_matches_hand_tokenized_listing() {
        let base = "صباح الخير يا @صديقي، كيف حالك اليوم";
        let text = vec![base; 25].join(" ");
        let tokens = tokenize(&text);
        // per repetition: صباح الخير يا <USER> ، كيف حالك اليوم = 8 tokens
        assert_eq!(tokens.len(), 200);
        assert_eq!(tokens.iter().filter(|t| *t == "<USER>").count(), 25);
        assert_eq!(tokens.iter().filter(|t| *t == "،").count(), 25);
        assert_eq!(tokens.iter().filter(|t| *t == "صباح").count(), 25);
        assert_eq!(
            &tokens[..8],
            &["صباح", "الخير", "يا", "<USER>", "،", "كيف", "حالك", "اليوم"]
        );
    }

    #[test]
    fn vocab_under_cap_keeps_everything() {
        let v = build_vocab(&corpus(&["a b c", "d e a"]), DEFAULT_VOCAB_CAP).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.id("a"), 2);
    }

    #[test]
    fn vocab_cap_keeps_most_frequent() {
        // token k (k = 0..12) appears k+1 times
        let mut texts = Vec::new();
        for k in 0..12 {
            for _ in 0..=k {
                texts.push(format!("w{k}"));
            }
        }
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let v = build_vocab(&corpus(&refs), 10).unwrap();
        assert_eq!(v.n_content(), 10);

        // brute-force: count each distinct token directly from the texts
        let mut distinct: Vec<&str> = refs.clone();
        distinct.sort();
        distinct.dedup();
        let mut by_count: Vec<(usize, &str)> = distinct
            .iter()
            .map(|d| (refs.iter().filter(|r| *r == d).count(), *d))
            .collect();
        by_count.sort_by_key(|c| std::cmp::Reverse(c.0));
        for (_, tok) in &by_count[..10] {
            assert!(v.get(tok).is_some(), "{tok} should be kept");
        }
        for (_, tok) in &by_count[10..] {
            assert!(v.get(tok).is_none(), "{tok} should be dropped");
        }
    }

    #[test]
    fn vocab_ties_go_to_first_occurrence() {
        let v = build_vocab(&corpus(&["zeta alpha", "alpha zeta"]), 10).unwrap();
        assert_eq!(v.id("zeta"), 2);
        assert_eq!(v.id("alpha"), 3);
    }

    #[test]
    fn vocab_rejects_empty_and_zero_cap() {
        assert!(build_vocab(&LabeledCorpus::empty(), 10).is_err());
        assert!(build_vocab(&corpus(&["a"]), 0).is_err());
    }

    #[test]
    fn encode_pads_truncates_and_maps_unknowns() {
        let v = Vocabulary::from_content_tokens(toks(&["a", "b"]));
        let empty = encode(&[], &v, DEFAULT_MAX_LEN);
        assert_eq!(empty.ids, vec![PAD; 50]);
        assert_eq!(empty.true_length, 0);

        let long: Vec<String> = (0..60)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.into())
            .collect();
        let enc = encode(&long, &v, DEFAULT_MAX_LEN);
        assert_eq!(enc.true_length, 50);
        assert_eq!(enc.ids.len(), 50);
        assert_eq!(decode(&enc, &v), long[..50].to_vec());

        let outside = toks(&["q", "a", "r", "s"]);
        let enc = encode(&outside, &v, DEFAULT_MAX_LEN);
        for (tok, id) in outside.iter().zip(enc.content()) {
            let member = v.tokens()[2..].contains(tok);
            assert_eq!(*id == UNK, !member);
        }
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(&corpus(&["x y", "y z", "مرحبا"]), 100).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next(), Some(PAD_TOKEN));
        assert_eq!(Vocabulary::read_from(buf.as_slice()).unwrap(), v);
        assert!(Vocabulary::read_from("a\nb\n".as_bytes()).is_err());
    }
}
