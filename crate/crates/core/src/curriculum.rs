//! Scripted curricula: many seeded fetch episodes with a synthetic speaker.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{build_arena, Arena, ArenaConfig};
use crate::compose::{tokenize, Thresholds};
use crate::episode::{run_episode, EpisodeLedger, EpisodeResult, EpisodeSettings, Mode, OracleFeedback};
use crate::error::{Error, Result};
use crate::features::{Frame, ObjectId};
use crate::lexicon::Lexicon;
use crate::rng::{derive_seed, rng_for};
use crate::speaker::{generate, GenerateOptions, GeneratedExpression, Grammar};

/// Episodes per learning-curve window.
pub const WINDOW: usize = 50;
/// Scenes tried per episode before the grammar is declared unusable.
pub const MAX_SCENE_ATTEMPTS: u64 = 1000;

const ARENA_STREAM: u64 = 1;
const TARGET_STREAM: u64 = 2;
const EXPRESSION_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurriculumPlan {
    /// Random target, any expression the speaker can produce.
    #[default]
    Random,
    /// Lexemes in grammar order, round robin; each episode's expression
    /// contains the scheduled lexeme.
    PerLexeme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSpec {
    pub episodes: usize,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub plan: CurriculumPlan,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Frame the agent perceives (and learns) in.
    #[serde(default)]
    pub frame: Frame,
    /// Only use expressions that single out the target.
    #[serde(default = "yes")]
    pub discriminating: bool,
}

fn yes() -> bool {
    true
}

impl CurriculumSpec {
    pub fn new(episodes: usize, seed: u64, mode: Mode) -> Self {
        CurriculumSpec {
            episodes,
            seed,
            mode,
            plan: CurriculumPlan::Random,
            thresholds: Thresholds::default(),
            frame: Frame::Speaker,
            discriminating: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowAccuracy {
    /// First episode in the window (0-based).
    pub start: usize,
    pub len: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCounts {
    pub positive: u64,
    pub negative: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordAccuracy {
    /// Episodes whose expression used the word.
    pub episodes: u64,
    pub correct: u64,
}

impl WordAccuracy {
    pub fn accuracy(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.correct as f64 / self.episodes as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub expression: String,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub accuracy: f64,
    pub mean_steps: f64,
    pub early_commit_rate: f64,
    pub learning_curve: Vec<WindowAccuracy>,
    /// Training examples held per word after the run.
    pub word_counts: BTreeMap<String, WordCounts>,
    /// Accuracy split by the attribute words each expression used.
    pub word_accuracy: BTreeMap<String, WordAccuracy>,
    pub results: Vec<EpisodeRecord>,
}

impl Metrics {
    /// Accuracy over the last `n` episodes (all of them if fewer).
    pub fn tail_accuracy(&self, n: usize) -> f64 {
        let tail = &self.results[self.results.len().saturating_sub(n)..];
        fraction(tail.iter().filter(|r| r.result.correct).count(), tail.len())
    }

    /// Accuracy over episodes `start..end`.
    pub fn range_accuracy(&self, start: usize, end: usize) -> f64 {
        let slice = &self.results[start.min(self.results.len())..end.min(self.results.len())];
        fraction(slice.iter().filter(|r| r.result.correct).count(), slice.len())
    }

    fn from_records(results: Vec<EpisodeRecord>, attributes: &[Vec<String>], lexicon: &Lexicon) -> Self {
        let n = results.len();
        let correct = results.iter().filter(|r| r.result.correct).count();
        let steps: u64 = results.iter().map(|r| u64::from(r.result.steps)).sum();
        let early = results.iter().filter(|r| r.result.early).count();
        let learning_curve = results
            .chunks(WINDOW)
            .enumerate()
            .map(|(i, w)| WindowAccuracy {
                start: i * WINDOW,
                len: w.len(),
                accuracy: fraction(w.iter().filter(|r| r.result.correct).count(), w.len()),
            })
            .collect();
        let word_counts = lexicon
            .words()
            .map(|w| (String::from(w.token()), WordCounts { positive: w.pos_count(), negative: w.neg_count() }))
            .collect();
        let mut word_accuracy: BTreeMap<String, WordAccuracy> = BTreeMap::new();
        for (record, attrs) in results.iter().zip(attributes) {
            for a in attrs {
                let entry = word_accuracy.entry(a.clone()).or_default();
                entry.episodes += 1;
                entry.correct += u64::from(record.result.correct);
            }
        }
        Metrics {
            episodes: n,
            accuracy: fraction(correct, n),
            mean_steps: if n == 0 { 0.0 } else { steps as f64 / n as f64 },
            early_commit_rate: fraction(early, n),
            learning_curve,
            word_counts,
            word_accuracy,
            results,
        }
    }
}

fn fraction(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Scene and expression for episode `episode` of a run seeded with `seed`.
///
/// Scenes where the speaker cannot produce a suitable expression are redrawn
/// from the next attempt's streams.
pub fn draw_scene(
    grammar: &Grammar,
    arena_config: &ArenaConfig,
    seed: u64,
    episode: u64,
    options: &GenerateOptions,
) -> Result<(Arena, GeneratedExpression)> {
    for attempt in 0..MAX_SCENE_ATTEMPTS {
        let arena = build_arena(arena_config, derive_seed(seed, &[ARENA_STREAM, episode, attempt]))?;
        let ids: Vec<ObjectId> = arena.objects().iter().map(|o| o.object_id).collect();
        let target = ids[rng_for(seed, &[TARGET_STREAM, episode, attempt]).random_range(0..ids.len())];
        let expr_seed = derive_seed(seed, &[EXPRESSION_STREAM, episode, attempt]);
        match generate(grammar, &arena, target, expr_seed, options) {
            Ok(expr) => return Ok((arena, expr)),
            Err(Error::NoDistinguishingExpression(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Config(format!(
        "no usable scene for episode {episode} after {MAX_SCENE_ATTEMPTS} attempts; grammar does not fit the arena attributes"
    )))
}

/// Runs `spec.episodes` seeded episodes against `lexicon`.
///
/// In learning mode the feedback is oracle-correct and updates the lexicon
/// after each episode. Returns the metrics and the full ledger.
pub fn run_curriculum(
    lexicon: &mut Lexicon,
    grammar: &Grammar,
    arena_config: &ArenaConfig,
    spec: &CurriculumSpec,
) -> Result<(Metrics, EpisodeLedger)> {
    if spec.episodes == 0 {
        return Err(Error::Config(String::from("episodes must be at least 1")));
    }
    arena_config.validate()?;
    grammar.validate()?;
    let lexemes: Vec<&String> = grammar.lexemes.keys().collect();
    if spec.plan == CurriculumPlan::PerLexeme && lexemes.is_empty() {
        return Err(Error::Config(String::from("per-lexeme plan needs a grammar with lexemes")));
    }
    let settings = EpisodeSettings { thresholds: spec.thresholds, frame: spec.frame, mode: spec.mode, seed: spec.seed };
    let mut ledger = EpisodeLedger::new();
    let mut records = Vec::with_capacity(spec.episodes);
    let mut attributes = Vec::with_capacity(spec.episodes);
    for i in 0..spec.episodes {
        let options = GenerateOptions {
            require_discriminating: spec.discriminating,
            must_include: match spec.plan {
                CurriculumPlan::Random => None,
                CurriculumPlan::PerLexeme => Some(lexemes[i % lexemes.len()].clone()),
            },
        };
        let (arena, expr) = draw_scene(grammar, arena_config, spec.seed, i as u64, &options)?;
        let utterance = tokenize(&expr.text);
        let mut oracle = OracleFeedback { target: expr.target_id };
        let result = run_episode(lexicon, &arena, &utterance, expr.target_id, &settings, &mut oracle, &mut ledger)?;
        records.push(EpisodeRecord { expression: expr.text, result });
        attributes.push(expr.attributes);
    }
    Ok((Metrics::from_records(records, &attributes, lexicon), ledger))
}
