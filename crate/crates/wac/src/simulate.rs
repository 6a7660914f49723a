//! Scripted curriculum runs and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use wac_core::curriculum::WordCounts;
use wac_core::speaker::Grammar;
use wac_core::{
    run_curriculum, ArenaConfig, CurriculumPlan, CurriculumSpec, EpisodeLedger, EpisodeRecord, Frame, Lexicon, Metrics,
    Mode, Thresholds, TrainConfig, WindowAccuracy, WordAccuracy,
};

/// Everything a simulation needs besides seed, episode count and mode.
/// Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub arena: ArenaConfig,
    pub grammar: Grammar,
    pub thresholds: Thresholds,
    pub frame: Frame,
    pub plan: CurriculumPlan,
    pub discriminating: bool,
    pub training: TrainConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            arena: ArenaConfig::default(),
            grammar: Grammar::default(),
            thresholds: Thresholds::default(),
            frame: Frame::Speaker,
            plan: CurriculumPlan::Random,
            discriminating: true,
            training: TrainConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> wac_core::Result<()> {
        self.arena.validate()?;
        self.grammar.validate()?;
        self.training.validate()?;
        Thresholds::new(self.thresholds.commit, self.thresholds.raw)?;
        Ok(())
    }

    pub fn spec(&self, episodes: usize, seed: u64, mode: Mode) -> CurriculumSpec {
        CurriculumSpec {
            episodes,
            seed,
            mode,
            plan: self.plan,
            thresholds: self.thresholds,
            frame: self.frame,
            discriminating: self.discriminating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub mode: Mode,
    pub episodes: usize,
    pub accuracy: f64,
    pub mean_steps: f64,
    pub early_commit_rate: f64,
    /// Accuracy of the last learning-curve window.
    pub final_window_accuracy: f64,
    pub learning_curve: Vec<WindowAccuracy>,
    pub word_counts: BTreeMap<String, WordCounts>,
    pub word_accuracy: BTreeMap<String, WordAccuracy>,
    pub config: SimulationConfig,
    pub results: Vec<EpisodeRecord>,
}

impl MetricsReport {
    pub fn new(metrics: Metrics, config: &SimulationConfig, seed: u64, mode: Mode) -> Self {
        MetricsReport {
            seed,
            mode,
            episodes: metrics.episodes,
            accuracy: metrics.accuracy,
            mean_steps: metrics.mean_steps,
            early_commit_rate: metrics.early_commit_rate,
            final_window_accuracy: metrics.learning_curve.last().map_or(0.0, |w| w.accuracy),
            learning_curve: metrics.learning_curve,
            word_counts: metrics.word_counts,
            word_accuracy: metrics.word_accuracy,
            config: config.clone(),
            results: metrics.results,
        }
    }

    /// Human-readable summary for the terminal.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            Mode::Frozen => "frozen",
            Mode::Learning => "learning",
        };
        let _ = writeln!(out, "episodes {}  seed {}  mode {mode}", self.episodes, self.seed);
        let _ = writeln!(out, "accuracy          {:.3}", self.accuracy);
        let _ = writeln!(out, "mean steps        {:.3}", self.mean_steps);
        let _ = writeln!(out, "early commit rate {:.3}", self.early_commit_rate);
        let _ = writeln!(out, "\nwindow        accuracy");
        for w in &self.learning_curve {
            let _ = writeln!(out, "{:>5}-{:<5}  {:.3}", w.start + 1, w.start + w.len, w.accuracy);
        }
        let _ = writeln!(out, "\nword      pos    neg   used  correct");
        let words: std::collections::BTreeSet<&String> =
            self.word_counts.keys().chain(self.word_accuracy.keys()).collect();
        for word in words {
            let c = self.word_counts.get(word).copied().unwrap_or_default();
            let a = self.word_accuracy.get(word).copied().unwrap_or_default();
            let _ = writeln!(out, "{word:<8} {:>5} {:>6} {:>6} {:>8}", c.positive, c.negative, a.episodes, a.correct);
        }
        out
    }
}

pub struct Simulation {
    pub report: MetricsReport,
    pub lexicon: Lexicon,
    pub ledger: EpisodeLedger,
}

/// Runs a curriculum from `lexicon` (a fresh one seeded with `seed` when
/// absent).
pub fn simulate(
    config: &SimulationConfig,
    episodes: usize,
    seed: u64,
    mode: Mode,
    lexicon: Option<Lexicon>,
) -> wac_core::Result<Simulation> {
    config.validate()?;
    let mut lexicon = lexicon.unwrap_or_else(|| Lexicon::new(seed));
    lexicon.set_config(config.training);
    let (metrics, ledger) = run_curriculum(&mut lexicon, &config.grammar, &config.arena, &config.spec(episodes, seed, mode))?;
    Ok(Simulation { report: MetricsReport::new(metrics, config, seed, mode), lexicon, ledger })
}
