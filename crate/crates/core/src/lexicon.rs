//! The lexicon: one [`WordClassifier`] per token.

use alloc::borrow::Cow;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use unicode_normalization::UnicodeNormalization;

use crate::classifier::{fit, Example, TrainConfig, WordClassifier, BUFFER_CAPACITY};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng::{hash_str, rng_for};

pub const SCHEMA_VERSION: u32 = 1;

/// NFC-normalizes, lowercases and trims a word form.
pub fn normalize_token(raw: &str) -> String {
    let nfc: String = raw.trim().nfc().collect();
    nfc.to_lowercase().nfc().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    words: BTreeMap<String, WordClassifier>,
    schema_version: u32,
    rng_seed: u64,
    config: TrainConfig,
}

impl Lexicon {
    pub fn new(rng_seed: u64) -> Self {
        Self::with_config(rng_seed, TrainConfig::default())
    }

    pub fn with_config(rng_seed: u64, config: TrainConfig) -> Self {
        Lexicon { words: BTreeMap::new(), schema_version: SCHEMA_VERSION, rng_seed, config }
    }

    /// Assembles a lexicon from stored classifiers. Keys are normalized;
    /// empty keys and keys that collide after normalization are rejected.
    pub fn from_parts(
        schema_version: u32,
        rng_seed: u64,
        words: impl IntoIterator<Item = WordClassifier>,
    ) -> Result<Self> {
        if schema_version != SCHEMA_VERSION {
            return Err(Error::Version { expected: SCHEMA_VERSION, found: schema_version });
        }
        let mut map = BTreeMap::new();
        for c in words {
            let token = normalize_token(c.token());
            if token.is_empty() {
                return Err(Error::invalid("empty token"));
            }
            if token != c.token() {
                return Err(Error::invalid(alloc::format!("token {:?} is not normalized", c.token())));
            }
            if map.insert(token.clone(), c).is_some() {
                return Err(Error::invalid(alloc::format!("duplicate token {token:?}")));
            }
        }
        Ok(Lexicon { words: map, schema_version, rng_seed, config: TrainConfig::default() })
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: TrainConfig) {
        self.config = config;
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &WordClassifier> {
        self.words.values()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.words.keys().map(String::as_str)
    }

    pub fn get(&self, token: &str) -> Option<&WordClassifier> {
        self.words.get(token).or_else(|| self.words.get(normalize_token(token).as_str()))
    }

    /// Classifier for `token`; absent tokens yield an untrained classifier.
    pub fn lookup(&self, token: &str) -> Cow<'_, WordClassifier> {
        match self.get(token) {
            Some(c) => Cow::Borrowed(c),
            None => Cow::Owned(WordClassifier::untrained(normalize_token(token))),
        }
    }

    pub fn response(&self, token: &str, x: &FeatureVector) -> f64 {
        self.get(token).map_or(0.5, |c| c.response(x))
    }

    pub fn log_response(&self, token: &str, x: &FeatureVector) -> f64 {
        self.get(token).map_or(-core::f64::consts::LN_2, |c| c.log_response(x))
    }

    fn entry(&mut self, token: &str) -> Result<&mut WordClassifier> {
        let token = normalize_token(token);
        if token.is_empty() {
            return Err(Error::invalid("token normalizes to the empty string"));
        }
        Ok(self.words.entry(token.clone()).or_insert_with(|| WordClassifier::untrained(token)))
    }

    /// Batch-trains `token`.
    ///
    /// Negatives are drawn without replacement from `negative_pool`, up to
    /// `negative_ratio` per positive, using a stream derived from the
    /// lexicon seed, the token and the classifier's example count. All new
    /// examples enter the buffer, and the classifier is refit from zero on
    /// the full buffer.
    pub fn train_word(
        &mut self,
        token: &str,
        positives: &[FeatureVector],
        negative_pool: &[FeatureVector],
    ) -> Result<&WordClassifier> {
        if positives.is_empty() {
            return Err(Error::invalid("train_word needs at least one positive"));
        }
        let config = self.config;
        let seed = self.rng_seed;
        let classifier = self.entry(token)?;
        let seen = classifier.pos_count() + classifier.neg_count();
        let mut rng = rng_for(seed, &[hash_str(classifier.token()), seen]);
        let wanted = (positives.len() * config.negative_ratio).min(negative_pool.len());
        let picks = index::sample(&mut rng, negative_pool.len(), wanted);

        for x in positives {
            classifier.push_example(Example { x: *x, y: 1 });
        }
        for i in picks.iter() {
            classifier.push_example(Example { x: negative_pool[i], y: 0 });
        }
        let (w, b) = fit(classifier.buffer(), &config);
        classifier.set_params(w, b);
        Ok(classifier)
    }

    /// Refits `token` from zero on its buffer. Absent tokens are an error.
    pub fn retrain(&mut self, token: &str) -> Result<&WordClassifier> {
        let config = self.config;
        let classifier = self
            .words
            .get_mut(&normalize_token(token))
            .ok_or_else(|| Error::invalid(alloc::format!("unknown token {token:?}")))?;
        let (w, b) = fit(classifier.buffer(), &config);
        classifier.set_params(w, b);
        Ok(classifier)
    }

    /// One online logistic step on `(x, label)` with learning rate `lr`.
    pub fn update_online(&mut self, token: &str, x: &FeatureVector, label: u8, lr: f64) -> Result<&WordClassifier> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::invalid(alloc::format!("learning rate must be positive, got {lr}")));
        }
        let example = Example::new(*x, label)?;
        let classifier = self.entry(token)?;
        classifier.online_step(example, lr);
        Ok(classifier)
    }
}

/// Pools two lexicons.
///
/// Tokens known to only one side are copied as they are. Shared tokens pool
/// their buffers (`a`'s examples first, keeping the most recent
/// [`BUFFER_CAPACITY`]) and are refit on the pooled examples. The result
/// keeps `a`'s seed and training configuration.
pub fn merge_lexicons(a: &Lexicon, b: &Lexicon) -> Result<Lexicon> {
    if a.schema_version != b.schema_version {
        return Err(Error::Version { expected: a.schema_version, found: b.schema_version });
    }
    let mut out = a.clone();
    for (token, theirs) in &b.words {
        match out.words.get_mut(token) {
            None => {
                out.words.insert(token.clone(), theirs.clone());
            }
            Some(ours) => {
                let pooled: Vec<Example> = ours.buffer().iter().chain(theirs.buffer().iter()).copied().collect();
                let skip = pooled.len().saturating_sub(BUFFER_CAPACITY);
                let buffer: VecDeque<Example> = pooled.into_iter().skip(skip).collect();
                let (w, bias) = fit(&buffer, &a.config);
                let pos = ours.pos_count() + theirs.pos_count();
                let neg = ours.neg_count() + theirs.neg_count();
                ours.replace_buffer(buffer);
                ours.set_params(w, bias);
                ours.set_counts(pos, neg);
            }
        }
    }
    Ok(out)
}
