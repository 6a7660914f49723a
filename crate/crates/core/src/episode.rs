//! The fetch game and its ledger.
//!
//! An [`Episode`] is a small state machine: it hears an utterance, then each
//! [`step`](Episode::step) moves the agent to the next station, folds the
//! newly seen objects into the candidate set and either commits (both
//! thresholds met, or no stations left) or keeps searching. After the commit
//! a single ± feedback signal trains every utterance token on the committed
//! object's features.
//!
//! Everything that happens is appended to an [`EpisodeLedger`], which is
//! enough to replay the learning that took place.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{Advance, AgentState, Arena, Percept, SeenObject};
use crate::compose::{resolve, score_candidates, CandidateDistribution, Decision, Resolution, Thresholds, Utterance};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Frame, ObjectId};
use crate::lexicon::Lexicon;
use crate::rng::{rng_for, SimRng};

/// Raw scores closer than this count as tied in the fallback commit.
pub const TIE_EPSILON: f64 = 1e-12;
const TIE_STREAM: u64 = 0x0074_6965;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No feedback, no lexicon updates.
    #[default]
    Frozen,
    Learning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Positive,
    Negative,
}

impl Feedback {
    pub fn sign(self) -> i8 {
        match self {
            Feedback::Positive => 1,
            Feedback::Negative => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Feedback::Positive),
            -1 => Ok(Feedback::Negative),
            other => Err(Error::invalid(format!("feedback sign must be +1 or -1, got {other}"))),
        }
    }

    fn label(self) -> u8 {
        match self {
            Feedback::Positive => 1,
            Feedback::Negative => 0,
        }
    }
}

/// Judges a commit. Only the committed id is revealed, never the target.
pub trait FeedbackSource {
    fn judge(&mut self, committed: ObjectId) -> Feedback;
}

impl<F: FnMut(ObjectId) -> Feedback> FeedbackSource for F {
    fn judge(&mut self, committed: ObjectId) -> Feedback {
        self(committed)
    }
}

/// Positive iff the commit hit the speaker's target.
#[derive(Debug, Clone, Copy)]
pub struct OracleFeedback {
    pub target: ObjectId,
}

impl FeedbackSource for OracleFeedback {
    fn judge(&mut self, committed: ObjectId) -> Feedback {
        if committed == self.target {
            Feedback::Positive
        } else {
            Feedback::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSettings {
    pub thresholds: Thresholds,
    pub frame: Frame,
    pub mode: Mode,
    /// Seeds the fallback tie-break stream.
    pub seed: u64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings { thresholds: Thresholds::default(), frame: Frame::Speaker, mode: Mode::Frozen, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDelta {
    pub token: String,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LedgerEvent {
    UtteranceReceived { index: u64, episode: u64, text: String, tokens: Vec<String> },
    PerceptObserved { index: u64, episode: u64, station: usize, visible: Vec<SeenObject> },
    Committed { index: u64, episode: u64, object_id: ObjectId, confidence: f64, raw: f64, step_count: u32, early: bool },
    FeedbackGiven { index: u64, episode: u64, sign: i8, applied_tokens: Vec<String> },
    LexiconUpdated { index: u64, episode: u64, deltas: Vec<TokenDelta> },
}

impl LedgerEvent {
    pub fn index(&self) -> u64 {
        match self {
            LedgerEvent::UtteranceReceived { index, .. }
            | LedgerEvent::PerceptObserved { index, .. }
            | LedgerEvent::Committed { index, .. }
            | LedgerEvent::FeedbackGiven { index, .. }
            | LedgerEvent::LexiconUpdated { index, .. } => *index,
        }
    }

    pub fn episode(&self) -> u64 {
        match self {
            LedgerEvent::UtteranceReceived { episode, .. }
            | LedgerEvent::PerceptObserved { episode, .. }
            | LedgerEvent::Committed { episode, .. }
            | LedgerEvent::FeedbackGiven { episode, .. }
            | LedgerEvent::LexiconUpdated { episode, .. } => *episode,
        }
    }
}

/// Append-only event log with consecutive indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LedgerEvent>", into = "Vec<LedgerEvent>")]
pub struct EpisodeLedger {
    events: Vec<LedgerEvent>,
}

impl TryFrom<Vec<LedgerEvent>> for EpisodeLedger {
    type Error = Error;

    fn try_from(events: Vec<LedgerEvent>) -> Result<Self> {
        Self::from_events(events)
    }
}

impl From<EpisodeLedger> for Vec<LedgerEvent> {
    fn from(ledger: EpisodeLedger) -> Self {
        ledger.events
    }
}

impl EpisodeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps decoded events after checking index order.
    pub fn from_events(events: Vec<LedgerEvent>) -> Result<Self> {
        for pair in events.windows(2) {
            if pair[1].index() != pair[0].index() + 1 {
                return Err(Error::CorruptLedger { index: pair[1].index(), reason: String::from("indices not consecutive") });
            }
        }
        Ok(EpisodeLedger { events })
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn next_index(&self) -> u64 {
        self.events.last().map_or(0, |e| e.index() + 1)
    }

    pub fn episode_count(&self) -> u64 {
        self.events.iter().filter(|e| matches!(e, LedgerEvent::UtteranceReceived { .. })).count() as u64
    }

    pub fn tail(&self, n: usize) -> &[LedgerEvent] {
        &self.events[self.events.len().saturating_sub(n)..]
    }

    fn push(&mut self, event: LedgerEvent) {
        debug_assert!(self.events.last().is_none_or(|last| last.index() < event.index()));
        self.events.push(event);
    }

    /// Appends another ledger that starts where this one ends.
    pub fn append(&mut self, other: EpisodeLedger) -> Result<()> {
        if let Some(first) = other.events.first() {
            if !self.is_empty() && first.index() != self.next_index() {
                return Err(Error::CorruptLedger { index: first.index(), reason: String::from("appended events do not follow on") });
            }
        }
        self.events.extend(other.events);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub object_id: ObjectId,
    pub confidence: f64,
    pub raw: f64,
    pub step_count: u32,
    /// Committed through the thresholds rather than after a full sweep.
    pub early: bool,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum StepOutcome {
    Searching { percept: Percept, distribution: CandidateDistribution, resolution: Resolution },
    Committed { percept: Option<Percept>, distribution: CandidateDistribution, commit: CommitRecord },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub target_id: ObjectId,
    pub committed_id: ObjectId,
    pub correct: bool,
    pub steps: u32,
    pub saw_all: bool,
    pub early: bool,
}

#[derive(Debug, Clone)]
pub struct Episode {
    episode: u64,
    settings: EpisodeSettings,
    tokens: Vec<String>,
    agent: AgentState,
    seen: Vec<SeenObject>,
    distribution: CandidateDistribution,
    rng: SimRng,
    ledger: EpisodeLedger,
    commit: Option<CommitRecord>,
    feedback: Option<Feedback>,
}

impl Episode {
    /// Starts episode number `episode`, numbering events from `first_index`.
    pub fn start(arena: &Arena, utterance: &Utterance, settings: EpisodeSettings, episode: u64, first_index: u64) -> Self {
        let mut ledger = EpisodeLedger::new();
        ledger.push(LedgerEvent::UtteranceReceived {
            index: first_index,
            episode,
            text: utterance.raw.clone(),
            tokens: utterance.tokens.clone(),
        });
        Episode {
            episode,
            settings,
            tokens: utterance.tokens.clone(),
            agent: AgentState::new(arena),
            seen: Vec::new(),
            distribution: CandidateDistribution::uniform(&[]).expect("empty candidate set is unique"),
            rng: rng_for(settings.seed, &[TIE_STREAM, episode]),
            ledger,
            commit: None,
            feedback: None,
        }
    }

    pub fn settings(&self) -> &EpisodeSettings {
        &self.settings
    }

    pub fn number(&self) -> u64 {
        self.episode
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn seen(&self) -> &[SeenObject] {
        &self.seen
    }

    pub fn distribution(&self) -> &CandidateDistribution {
        &self.distribution
    }

    pub fn commit(&self) -> Option<&CommitRecord> {
        self.commit.as_ref()
    }

    pub fn feedback(&self) -> Option<Feedback> {
        self.feedback
    }

    pub fn ledger(&self) -> &EpisodeLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> EpisodeLedger {
        self.ledger
    }

    fn next_index(&self) -> u64 {
        self.ledger.next_index()
    }

    fn candidates(&self) -> Vec<(ObjectId, FeatureVector)> {
        self.seen.iter().map(|s| (s.object_id, s.features)).collect()
    }

    /// Advances one station and decides whether to commit.
    pub fn step(&mut self, arena: &Arena, lexicon: &Lexicon) -> Result<StepOutcome> {
        if self.commit.is_some() {
            return Err(Error::InvalidState(String::from("episode already committed")));
        }
        let percept = match self.agent.advance(arena) {
            Advance::Exhausted => None,
            Advance::Moved(station) => {
                let percept = arena.percept_at(station, self.settings.frame)?;
                let index = self.next_index();
                self.ledger.push(LedgerEvent::PerceptObserved {
                    index,
                    episode: self.episode,
                    station,
                    visible: percept.visible.clone(),
                });
                for v in &percept.visible {
                    if !self.seen.iter().any(|s| s.object_id == v.object_id) {
                        self.seen.push(*v);
                    }
                }
                self.distribution = score_candidates(lexicon, &self.tokens, &self.candidates())?;
                Some(percept)
            }
        };

        let resolution = resolve(&self.distribution, &self.settings.thresholds);
        let commit = match (resolution.decision, &percept) {
            (Decision::Commit(id), Some(_)) => Some(self.record_commit(id, true)?),
            _ if !self.agent.has_unvisited() => {
                let id = self.fallback_choice()?;
                Some(self.record_commit(id, false)?)
            }
            _ => None,
        };
        let distribution = self.distribution.clone();
        Ok(match commit {
            Some(commit) => StepOutcome::Committed { percept, distribution, commit },
            None => StepOutcome::Searching {
                percept: percept.expect("searching implies a percept was taken"),
                distribution,
                resolution,
            },
        })
    }

    /// Highest raw score among seen objects; near-ties drawn from the
    /// episode's stream.
    fn fallback_choice(&mut self) -> Result<ObjectId> {
        let entries = self.distribution.entries();
        let best = entries.iter().map(|e| e.raw).fold(f64::NEG_INFINITY, f64::max);
        let mut tied: Vec<ObjectId> = entries.iter().filter(|e| best - e.raw < TIE_EPSILON).map(|e| e.object_id).collect();
        tied.sort();
        match tied.len() {
            0 => Err(Error::InvalidState(String::from("no object was seen before stations ran out"))),
            1 => Ok(tied[0]),
            n => Ok(tied[self.rng.random_range(0..n)]),
        }
    }

    fn record_commit(&mut self, id: ObjectId, early: bool) -> Result<CommitRecord> {
        let entry = self.distribution.get(id).copied().ok_or_else(|| Error::InvalidState(format!("{id} not among seen")))?;
        let features = self.seen.iter().find(|s| s.object_id == id).map(|s| s.features).expect("distribution covers seen");
        let record = CommitRecord {
            object_id: id,
            confidence: entry.probability,
            raw: entry.raw,
            step_count: self.agent.steps,
            early,
            features,
        };
        let index = self.next_index();
        self.ledger.push(LedgerEvent::Committed {
            index,
            episode: self.episode,
            object_id: id,
            confidence: record.confidence,
            raw: record.raw,
            step_count: record.step_count,
            early,
        });
        self.commit = Some(record);
        Ok(record)
    }

    /// Applies one ± signal to every utterance token on the committed
    /// object's features, with the lexicon's online learning rate.
    pub fn give_feedback(&mut self, lexicon: &mut Lexicon, feedback: Feedback) -> Result<Vec<TokenDelta>> {
        let commit = self.commit.ok_or_else(|| Error::InvalidState(String::from("feedback before commit")))?;
        if self.feedback.is_some() {
            return Err(Error::InvalidState(String::from("feedback already given")));
        }
        let index = self.next_index();
        self.ledger.push(LedgerEvent::FeedbackGiven {
            index,
            episode: self.episode,
            sign: feedback.sign(),
            applied_tokens: self.tokens.clone(),
        });
        let deltas = apply_feedback(lexicon, &self.tokens, &commit.features, feedback)?;
        let index = self.next_index();
        self.ledger.push(LedgerEvent::LexiconUpdated { index, episode: self.episode, deltas: deltas.clone() });
        self.feedback = Some(feedback);
        Ok(deltas)
    }

    pub fn result(&self, arena: &Arena, target: ObjectId) -> Option<EpisodeResult> {
        self.commit.map(|c| EpisodeResult {
            target_id: target,
            committed_id: c.object_id,
            correct: c.object_id == target,
            steps: c.step_count,
            saw_all: self.seen.len() == arena.objects().len(),
            early: c.early,
        })
    }
}

fn apply_feedback(
    lexicon: &mut Lexicon,
    tokens: &[String],
    features: &FeatureVector,
    feedback: Feedback,
) -> Result<Vec<TokenDelta>> {
    let lr = lexicon.config().online_lr;
    tokens
        .iter()
        .map(|token| {
            let before = lexicon.response(token, features);
            let after = lexicon.update_online(token, features, feedback.label(), lr)?.response(features);
            Ok(TokenDelta { token: token.clone(), before, after })
        })
        .collect()
}

/// Plays one fetch episode to its commit, then (in learning mode) asks
/// `feedback` for a judgement and trains on it. Events are appended to
/// `ledger`; the episode number is the ledger's episode count.
pub fn run_episode(
    lexicon: &mut Lexicon,
    arena: &Arena,
    utterance: &Utterance,
    target: ObjectId,
    settings: &EpisodeSettings,
    feedback: &mut dyn FeedbackSource,
    ledger: &mut EpisodeLedger,
) -> Result<EpisodeResult> {
    let mut episode = Episode::start(arena, utterance, *settings, ledger.episode_count(), ledger.next_index());
    while episode.commit.is_none() {
        episode.step(arena, lexicon)?;
    }
    if settings.mode == Mode::Learning {
        let committed = episode.commit.expect("loop ends on commit").object_id;
        episode.give_feedback(lexicon, feedback.judge(committed))?;
    }
    let result = episode.result(arena, target).expect("committed");
    ledger.append(episode.into_ledger())?;
    Ok(result)
}

#[derive(Default)]
struct OpenEpisode {
    features: Vec<SeenObject>,
    committed: Option<ObjectId>,
    feedback: bool,
}

/// Re-applies every feedback-driven update in `ledger` to `lexicon`.
///
/// The ledger must be well formed: consecutive indices, and each
/// episode opens with its utterance, commits exactly once after its
/// percepts, and only then receives feedback.
pub fn replay(ledger: &EpisodeLedger, mut lexicon: Lexicon) -> Result<Lexicon> {
    let corrupt = |index: u64, reason: &str| Error::CorruptLedger { index, reason: String::from(reason) };
    let mut open: Option<OpenEpisode> = None;
    let mut last_index: Option<u64> = None;
    for event in ledger.events() {
        let index = event.index();
        if last_index.is_some_and(|l| index != l + 1) {
            return Err(corrupt(index, "indices not consecutive"));
        }
        last_index = Some(index);
        match event {
            LedgerEvent::UtteranceReceived { .. } => {
                if open.as_ref().is_some_and(|o| o.committed.is_none()) {
                    return Err(corrupt(index, "previous episode never committed"));
                }
                open = Some(OpenEpisode::default());
            }
            LedgerEvent::PerceptObserved { visible, .. } => {
                let ep = open.as_mut().ok_or_else(|| corrupt(index, "percept before utterance"))?;
                if ep.committed.is_some() {
                    return Err(corrupt(index, "percept after commit"));
                }
                for v in visible {
                    if !ep.features.iter().any(|s| s.object_id == v.object_id) {
                        ep.features.push(*v);
                    }
                }
            }
            LedgerEvent::Committed { object_id, .. } => {
                let ep = open.as_mut().ok_or_else(|| corrupt(index, "commit before utterance"))?;
                if ep.committed.is_some() {
                    return Err(corrupt(index, "second commit in one episode"));
                }
                if !ep.features.iter().any(|s| s.object_id == *object_id) {
                    return Err(corrupt(index, "committed object was never perceived"));
                }
                ep.committed = Some(*object_id);
            }
            LedgerEvent::FeedbackGiven { sign, applied_tokens, .. } => {
                let ep = open.as_mut().ok_or_else(|| corrupt(index, "feedback before utterance"))?;
                let committed = ep.committed.ok_or_else(|| corrupt(index, "feedback before commit"))?;
                if ep.feedback {
                    return Err(corrupt(index, "second feedback in one episode"));
                }
                ep.feedback = true;
                let feedback = Feedback::from_sign(i64::from(*sign)).map_err(|_| corrupt(index, "bad feedback sign"))?;
                let features = ep.features.iter().find(|s| s.object_id == committed).expect("checked at commit").features;
                apply_feedback(&mut lexicon, applied_tokens, &features, feedback)?;
            }
            LedgerEvent::LexiconUpdated { .. } => {
                if !open.as_ref().is_some_and(|o| o.feedback) {
                    return Err(corrupt(index, "lexicon update without feedback"));
                }
            }
        }
    }
    if let (Some(ep), Some(index)) = (open, last_index) {
        if ep.committed.is_none() {
            return Err(corrupt(index, "last episode never committed"));
        }
    }
    Ok(lexicon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{build_arena, ArenaConfig, SimObject, Shape};
    use crate::compose::tokenize;
    use crate::features::Pose;
    use alloc::vec;
    use core::f64::consts::PI;

    fn lone_ball() -> Arena {
        let o = SimObject {
            object_id: ObjectId(3),
            shape: Shape::Ball,
            footprint_area: 1.0,
            major: 1.0,
            minor: 1.0,
            corner_count: 0,
            albedo: 0.5,
            position: [3.0, 0.0],
        };
        Arena::from_parts(vec![o], vec![Pose::new(1.0, 0.0, 0.0)], Pose::new(4.5, 0.0, PI), [10.0, 10.0], 4.0, 0.0, 2, 1)
            .unwrap()
    }

    #[test]
    fn single_object_commits_in_one_step() {
        let arena = lone_ball();
        let mut lex = Lexicon::new(0);
        let mut ledger = EpisodeLedger::new();
        let mut fb = OracleFeedback { target: ObjectId(3) };
        let settings = EpisodeSettings::default();
        let r = run_episode(&mut lex, &arena, &tokenize("the dark one"), ObjectId(3), &settings, &mut fb, &mut ledger)
            .unwrap();
        assert!(r.correct);
        assert_eq!(r.steps, 1);
        assert!(r.saw_all);
    }

    #[test]
    fn degenerate_thresholds_commit_at_first_percept() {
        let arena = build_arena(&ArenaConfig::default(), 4).unwrap();
        let mut lex = Lexicon::new(0);
        let mut ledger = EpisodeLedger::new();
        let settings = EpisodeSettings { thresholds: Thresholds::new(0.0, 0.0).unwrap(), ..EpisodeSettings::default() };
        let mut fb = OracleFeedback { target: ObjectId(0) };
        let r = run_episode(&mut lex, &arena, &tokenize("the one"), ObjectId(0), &settings, &mut fb, &mut ledger).unwrap();
        assert_eq!(r.steps, 1);
        assert!(r.early);
        let first = arena.percept_at(0, Frame::Speaker).unwrap();
        // Untrained scores tie, so resolve picks the lowest id of the first percept.
        let lowest = first.visible.iter().map(|v| v.object_id).min().unwrap();
        assert_eq!(r.committed_id, lowest);
    }

    #[test]
    fn feedback_requires_commit_and_happens_once() {
        let arena = lone_ball();
        let mut lex = Lexicon::new(0);
        let mut ep = Episode::start(&arena, &tokenize("big"), EpisodeSettings::default(), 0, 0);
        assert!(matches!(ep.give_feedback(&mut lex, Feedback::Positive), Err(Error::InvalidState(_))));
        ep.step(&arena, &lex).unwrap();
        ep.give_feedback(&mut lex, Feedback::Positive).unwrap();
        assert!(ep.give_feedback(&mut lex, Feedback::Positive).is_err());
        assert!(ep.step(&arena, &lex).is_err());
        assert!(lex.response("big", &ep.commit().unwrap().features) > 0.5);
    }

    #[test]
    fn empty_ledger_replay_is_identity() {
        let mut lex = Lexicon::new(3);
        lex.update_online("w", &FeatureVector::ZERO, 1, 0.1).unwrap();
        assert_eq!(replay(&EpisodeLedger::new(), lex.clone()).unwrap(), lex);
    }

    #[test]
    fn commit_before_utterance_is_corrupt() {
        let ledger = EpisodeLedger::from_events(vec![
            LedgerEvent::Committed {
                index: 0,
                episode: 0,
                object_id: ObjectId(0),
                confidence: 1.0,
                raw: 0.5,
                step_count: 1,
                early: true,
            },
            LedgerEvent::UtteranceReceived { index: 1, episode: 0, text: String::from("x"), tokens: vec![] },
        ])
        .unwrap();
        assert!(matches!(replay(&ledger, Lexicon::new(0)), Err(Error::CorruptLedger { index: 0, .. })));
    }

    #[test]
    fn out_of_order_indices_rejected() {
        let events = vec![
            LedgerEvent::UtteranceReceived { index: 5, episode: 0, text: String::new(), tokens: vec![] },
            LedgerEvent::UtteranceReceived { index: 5, episode: 1, text: String::new(), tokens: vec![] },
        ];
        assert!(EpisodeLedger::from_events(events).is_err());
    }

    #[test]
    fn feedback_sign_parsing() {
        assert_eq!(Feedback::from_sign(1).unwrap(), Feedback::Positive);
        assert_eq!(Feedback::from_sign(-1).unwrap(), Feedback::Negative);
        assert!(Feedback::from_sign(0).is_err());
    }
}
