//! Interactive teaching sessions: one arena, a sequence of episodes driven
//! one request at a time.

use serde::{Deserialize, Serialize};
use wac_core::episode::CommitRecord;
use wac_core::{
    tokenize, AgentState, Arena, CandidateDistribution, Episode, EpisodeLedger, EpisodeSettings, Feedback, LedgerEvent,
    Lexicon, SeenObject, StepOutcome, TokenDelta, Utterance,
};

/// Events returned in a state view.
pub const LEDGER_TAIL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingUtterance,
    Searching,
    AwaitingFeedback,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::AwaitingUtterance => "awaiting_utterance",
            Phase::Searching => "searching",
            Phase::AwaitingFeedback => "awaiting_feedback",
            Phase::Done => "done",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{action} is not allowed while {}", phase.name())]
    Phase { action: &'static str, phase: Phase },
    #[error(transparent)]
    Core(#[from] wac_core::Error),
}

#[derive(Debug, Clone)]
pub struct Session {
    id: u64,
    arena: Arena,
    settings: EpisodeSettings,
    /// Completed episodes.
    ledger: EpisodeLedger,
    episode: Option<Episode>,
    phase: Phase,
    max_episodes: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView<'a> {
    pub session_id: u64,
    pub phase: Phase,
    pub settings: &'a EpisodeSettings,
    pub arena: &'a Arena,
    pub agent: Option<&'a AgentState>,
    pub utterance: Option<&'a [String]>,
    pub seen: &'a [SeenObject],
    pub distribution: Option<&'a CandidateDistribution>,
    pub commit: Option<&'a CommitRecord>,
    pub episodes_completed: u64,
    pub ledger_tail: Vec<&'a LedgerEvent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReply {
    pub phase: Phase,
    #[serde(flatten)]
    pub outcome: StepOutcome,
    /// Ledger events this step appended.
    pub events: Vec<LedgerEvent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackReply {
    pub phase: Phase,
    pub deltas: Vec<TokenDelta>,
    pub events: Vec<LedgerEvent>,
}

impl Session {
    /// New session in the learning mode given by `settings`. With
    /// `max_episodes` set, the session is done after that many episodes.
    pub fn new(id: u64, arena: Arena, settings: EpisodeSettings, max_episodes: Option<u64>) -> Self {
        Session { id, arena, settings, ledger: EpisodeLedger::new(), episode: None, phase: Phase::AwaitingUtterance, max_episodes }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    /// Completed episodes only.
    pub fn ledger(&self) -> &EpisodeLedger {
        &self.ledger
    }

    fn require(&self, phase: Phase, action: &'static str) -> Result<(), SessionError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(SessionError::Phase { action, phase: self.phase })
        }
    }

    pub fn utter(&mut self, text: &str) -> Result<Utterance, SessionError> {
        self.require(Phase::AwaitingUtterance, "utterance")?;
        let utterance = tokenize(text);
        self.episode = Some(Episode::start(
            &self.arena,
            &utterance,
            self.settings,
            self.ledger.episode_count(),
            self.ledger.next_index(),
        ));
        self.phase = Phase::Searching;
        Ok(utterance)
    }

    pub fn step(&mut self, lexicon: &Lexicon) -> Result<StepReply, SessionError> {
        self.require(Phase::Searching, "step")?;
        let episode = self.episode.as_mut().expect("searching has an episode");
        let before = episode.ledger().len();
        let outcome = episode.step(&self.arena, lexicon)?;
        let events = episode.ledger().events()[before..].to_vec();
        if matches!(outcome, StepOutcome::Committed { .. }) {
            self.phase = Phase::AwaitingFeedback;
        }
        Ok(StepReply { phase: self.phase, outcome, events })
    }

    pub fn feedback(&mut self, lexicon: &mut Lexicon, feedback: Feedback) -> Result<FeedbackReply, SessionError> {
        self.require(Phase::AwaitingFeedback, "feedback")?;
        let mut episode = self.episode.take().expect("awaiting feedback has an episode");
        let before = episode.ledger().len();
        let deltas = match episode.give_feedback(lexicon, feedback) {
            Ok(d) => d,
            Err(e) => {
                self.episode = Some(episode);
                return Err(e.into());
            }
        };
        let events = episode.ledger().events()[before..].to_vec();
        self.ledger.append(episode.into_ledger())?;
        let done = self.max_episodes.is_some_and(|m| self.ledger.episode_count() >= m);
        self.phase = if done { Phase::Done } else { Phase::AwaitingUtterance };
        Ok(FeedbackReply { phase: self.phase, deltas, events })
    }

    pub fn view(&self) -> SessionView<'_> {
        let current: &[LedgerEvent] = self.episode.as_ref().map_or(&[], |e| e.ledger().events());
        let all: Vec<&LedgerEvent> = self.ledger.events().iter().chain(current).collect();
        let ledger_tail = all[all.len().saturating_sub(LEDGER_TAIL)..].to_vec();
        let episode = self.episode.as_ref();
        SessionView {
            session_id: self.id,
            phase: self.phase,
            settings: &self.settings,
            arena: &self.arena,
            agent: episode.map(Episode::agent),
            utterance: episode.map(Episode::tokens),
            seen: episode.map_or(&[], Episode::seen),
            distribution: episode.map(Episode::distribution),
            commit: episode.and_then(Episode::commit),
            episodes_completed: self.ledger.episode_count(),
            ledger_tail,
        }
    }
}
