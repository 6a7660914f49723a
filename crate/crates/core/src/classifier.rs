//! A single word's classifier: logistic regression over [`FeatureVector`]s
//! with a bounded, oldest-first example buffer.

use alloc::collections::VecDeque;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};

pub const BUFFER_CAPACITY: usize = 500;

/// Largest representable value strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub batch_lr: f64,
    pub max_epochs: usize,
    /// Stop once the gradient's infinity norm drops below this.
    pub grad_tol: f64,
    /// Negatives sampled per positive in `train_word`.
    pub negative_ratio: usize,
    pub online_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { l2: 0.01, batch_lr: 0.5, max_epochs: 500, grad_tol: 1e-6, negative_ratio: 3, online_lr: 0.1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(alloc::format!("{name} must be positive, got {v}")))
            }
        };
        positive("batch_lr", self.batch_lr)?;
        positive("online_lr", self.online_lr)?;
        positive("grad_tol", self.grad_tol)?;
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(alloc::format!("l2 must be nonnegative, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExample")]
pub struct Example {
    pub x: FeatureVector,
    /// 1 if the word applies, 0 otherwise.
    pub y: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    x: FeatureVector,
    y: u8,
}

impl TryFrom<RawExample> for Example {
    type Error = Error;

    fn try_from(raw: RawExample) -> Result<Self> {
        Example::new(raw.x, raw.y)
    }
}

impl Example {
    pub fn new(x: FeatureVector, y: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::invalid(alloc::format!("label must be 0 or 1, got {y}")));
        }
        Ok(Example { x, y })
    }

    fn target(&self) -> f64 {
        f64::from(self.y)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(z))` without cancellation.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -libm::log1p(libm::exp(-z))
    } else {
        z - libm::log1p(libm::exp(z))
    }
}

/// `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    -log_sigmoid(-z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordClassifier {
    token: String,
    weights: [f64; FEATURE_DIM],
    bias: f64,
    pos_count: u64,
    neg_count: u64,
    buffer: VecDeque<Example>,
}

impl WordClassifier {
    /// An untrained classifier: zero weights and bias, so every response is 0.5.
    pub fn untrained(token: impl Into<String>) -> Self {
        WordClassifier {
            token: token.into(),
            weights: [0.0; FEATURE_DIM],
            bias: 0.0,
            pos_count: 0,
            neg_count: 0,
            buffer: VecDeque::new(),
        }
    }

    /// Rebuilds a classifier from stored parts, enforcing invariants.
    pub fn from_parts(
        token: impl Into<String>,
        weights: [f64; FEATURE_DIM],
        bias: f64,
        pos_count: u64,
        neg_count: u64,
        buffer: impl IntoIterator<Item = Example>,
    ) -> Result<Self> {
        if weights.iter().chain(core::iter::once(&bias)).any(|w| !w.is_finite()) {
            return Err(Error::invalid("classifier parameters must be finite"));
        }
        let buffer: VecDeque<Example> = buffer.into_iter().collect();
        if buffer.len() > BUFFER_CAPACITY {
            return Err(Error::invalid(alloc::format!(
                "buffer holds {} examples, capacity is {BUFFER_CAPACITY}",
                buffer.len()
            )));
        }
        Ok(WordClassifier { token: token.into(), weights, bias, pos_count, neg_count, buffer })
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn weights(&self) -> &[f64; FEATURE_DIM] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn pos_count(&self) -> u64 {
        self.pos_count
    }

    pub fn neg_count(&self) -> u64 {
        self.neg_count
    }

    pub fn buffer(&self) -> &VecDeque<Example> {
        &self.buffer
    }

    pub fn is_untrained(&self) -> bool {
        self.bias == 0.0 && self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// Probability that the word applies to `x`; always strictly inside (0, 1).
    pub fn response(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.logit(x)).clamp(f64::MIN_POSITIVE, BELOW_ONE)
    }

    /// Like [`response`](Self::response) but for raw, unvalidated components.
    pub fn response_checked(&self, x: &[f64; FEATURE_DIM]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature component"));
        }
        let z: f64 = x.iter().zip(self.weights.iter()).map(|(a, w)| a * w).sum::<f64>() + self.bias;
        Ok(sigmoid(z).clamp(f64::MIN_POSITIVE, BELOW_ONE))
    }

    /// `ln response(x)`, finite even when the response saturates.
    pub fn log_response(&self, x: &FeatureVector) -> f64 {
        log_sigmoid(self.logit(x))
    }

    /// Index of the largest-magnitude weight.
    pub fn dominant_feature(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if libm::fabs(*w) > libm::fabs(self.weights[best]) {
                best = i;
            }
        }
        best
    }

    pub(crate) fn push_example(&mut self, example: Example) {
        if self.buffer.len() == BUFFER_CAPACITY {
            self.buffer.pop_front();
        }
        if example.y == 1 {
            self.pos_count += 1;
        } else {
            self.neg_count += 1;
        }
        self.buffer.push_back(example);
    }

    pub(crate) fn set_params(&mut self, weights: [f64; FEATURE_DIM], bias: f64) {
        self.weights = weights;
        self.bias = bias;
    }

    pub(crate) fn set_counts(&mut self, pos: u64, neg: u64) {
        self.pos_count = pos;
        self.neg_count = neg;
    }

    pub(crate) fn replace_buffer(&mut self, buffer: VecDeque<Example>) {
        debug_assert!(buffer.len() <= BUFFER_CAPACITY);
        self.buffer = buffer;
    }

    /// One stochastic gradient step of the unregularized log loss on a
    /// single example. The example is appended to the buffer.
    pub(crate) fn online_step(&mut self, example: Example, lr: f64) {
        let residual = example.target() - sigmoid(self.logit(&example.x));
        for (w, x) in self.weights.iter_mut().zip(example.x.as_array()) {
            *w += lr * residual * x;
        }
        self.bias += lr * residual;
        self.push_example(example);
    }
}

/// Training objective over `examples`:
/// `(1/N) * (sum of log losses + (l2/2) * |w|^2)`.
///
/// Zero for an empty example set.
pub fn objective<'a>(
    weights: &[f64; FEATURE_DIM],
    bias: f64,
    examples: impl IntoIterator<Item = &'a Example>,
    l2: f64,
) -> f64 {
    let mut n = 0usize;
    let mut total = 0.0;
    for ex in examples {
        n += 1;
        let z = ex.x.dot(weights) + bias;
        total += if ex.y == 1 { softplus(-z) } else { softplus(z) };
    }
    if n == 0 {
        return 0.0;
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    (total + penalty) / n as f64
}

/// Analytic gradient of [`objective`] with respect to (weights, bias).
pub fn gradient<'a>(
    weights: &[f64; FEATURE_DIM],
    bias: f64,
    examples: impl IntoIterator<Item = &'a Example>,
    l2: f64,
) -> ([f64; FEATURE_DIM], f64) {
    let mut n = 0usize;
    let mut gw = [0.0; FEATURE_DIM];
    let mut gb = 0.0;
    for ex in examples {
        n += 1;
        let r = sigmoid(ex.x.dot(weights) + bias) - ex.target();
        for (g, x) in gw.iter_mut().zip(ex.x.as_array()) {
            *g += r * x;
        }
        gb += r;
    }
    if n == 0 {
        return ([0.0; FEATURE_DIM], 0.0);
    }
    let inv = 1.0 / n as f64;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = (*g + l2 * w) * inv;
    }
    (gw, gb * inv)
}

/// Full-batch gradient descent from zero.
pub fn fit(examples: &VecDeque<Example>, config: &TrainConfig) -> ([f64; FEATURE_DIM], f64) {
    let mut w = [0.0; FEATURE_DIM];
    let mut b = 0.0;
    for _ in 0..config.max_epochs {
        let (gw, gb) = gradient(&w, b, examples.iter(), config.l2);
        let norm = gw.iter().fold(libm::fabs(gb), |m, g| m.max(libm::fabs(*g)));
        if norm < config.grad_tol {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(gw.iter()) {
            *wi -= config.batch_lr * gi;
        }
        b -= config.batch_lr * gb;
    }
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(a: [f64; 6]) -> FeatureVector {
        FeatureVector::new(a).unwrap()
    }

    #[test]
    fn closed_form_responses() {
        let x = fv([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(WordClassifier::untrained("w").response(&x), 0.5);
        let c = WordClassifier::from_parts("w", [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0, 0, []).unwrap();
        assert!((c.response(&x) - 0.7310585786300049).abs() < 1e-15);
        let c = WordClassifier::from_parts("w", [-2.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0, 0, 0, []).unwrap();
        assert!((c.response(&x) - 0.2689414213699951).abs() < 1e-15);
    }

    #[test]
    fn response_stays_open_interval_under_saturation() {
        let x = fv([1.0; 6]);
        let hot = WordClassifier::from_parts("w", [1e6; 6], 0.0, 0, 0, []).unwrap();
        let cold = WordClassifier::from_parts("w", [-1e6; 6], 0.0, 0, 0, []).unwrap();
        assert!(hot.response(&x) < 1.0);
        assert!(cold.response(&x) > 0.0);
        assert!(cold.log_response(&x).is_finite());
    }

    #[test]
    fn response_checked_rejects_nan() {
        let c = WordClassifier::untrained("w");
        assert!(c.response_checked(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert_eq!(c.response_checked(&[0.2; 6]).unwrap(), 0.5);
    }

    #[test]
    fn buffer_evicts_oldest_first() {
        let mut c = WordClassifier::untrained("w");
        for i in 0..(BUFFER_CAPACITY + 10) {
            let v = (i % 100) as f64 / 100.0;
            c.push_example(Example::new(fv([v, 0.0, 0.0, 0.0, 0.0, 0.0]), (i % 2) as u8).unwrap());
        }
        assert_eq!(c.buffer().len(), BUFFER_CAPACITY);
        // Entries 0..10 are gone; the front is entry 10.
        assert_eq!(c.buffer().front().unwrap().x.as_array()[0], 0.10);
        assert_eq!(c.pos_count() + c.neg_count(), (BUFFER_CAPACITY + 10) as u64);
    }

    #[test]
    fn rejects_bad_label_and_params() {
        assert!(Example::new(FeatureVector::ZERO, 2).is_err());
        assert!(WordClassifier::from_parts("w", [f64::NAN; 6], 0.0, 0, 0, []).is_err());
    }

    #[test]
    fn fit_empty_is_untrained() {
        let (w, b) = fit(&VecDeque::new(), &TrainConfig::default());
        assert_eq!(w, [0.0; 6]);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn sigmoid_tails() {
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0) <= 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
