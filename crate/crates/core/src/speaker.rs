//! Scripted speaker: produces referring expressions from an attribute
//! grammar, so curricula can run without a human in the loop.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{Arena, FramedFeatures};
use crate::error::{Error, Result};
use crate::features::{Feature, Frame, ObjectId};
use crate::lexicon::normalize_token;
use crate::rng::rng_for;

pub const ATTRIBUTE_SLOT: &str = "<attrs>";
pub const HEAD_SLOT: &str = "<head>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub feature: Feature,
    pub op: Comparison,
    pub threshold: f64,
    /// Frame for spatial features; defaults to the speaker's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
}

impl Predicate {
    fn new(feature: Feature, op: Comparison, threshold: f64) -> Self {
        let frame = feature.is_spatial().then_some(Frame::Speaker);
        Predicate { feature, op, threshold, frame }
    }

    fn effective_frame(&self, spatial_override: Option<Frame>) -> Frame {
        if self.feature.is_spatial() {
            spatial_override.or(self.frame).unwrap_or(Frame::Speaker)
        } else {
            Frame::Speaker
        }
    }

    pub fn holds(&self, features: &FramedFeatures, spatial_override: Option<Frame>) -> bool {
        let v = features.in_frame(self.effective_frame(spatial_override)).get(self.feature);
        match self.op {
            Comparison::AtMost => v <= self.threshold,
            Comparison::AtLeast => v >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grammar {
    pub lexemes: BTreeMap<String, Predicate>,
    #[serde(default)]
    pub articles: Vec<String>,
    #[serde(default)]
    pub heads: Vec<String>,
    /// Token list; `<attrs>` expands to the chosen attributes, `<head>` to a head noun.
    pub template: Vec<String>,
    /// Re-grounds every spatial lexeme in this frame when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_frame: Option<Frame>,
}

impl Default for Grammar {
    fn default() -> Self {
        use Comparison::*;
        use Feature::*;
        let entries = [
            ("big", Size, AtLeast, 0.6),
            ("small", Size, AtMost, 0.4),
            ("round", Cornerness, AtMost, 0.25),
            ("boxy", Cornerness, AtLeast, 0.75),
            ("long", Elongation, AtLeast, 0.5),
            ("short", Elongation, AtMost, 0.2),
            ("dark", Intensity, AtMost, 0.35),
            ("light", Intensity, AtLeast, 0.65),
            ("left", Lateral, AtMost, -0.2),
            ("right", Lateral, AtLeast, 0.2),
            ("near", Depth, AtMost, 0.4),
            ("far", Depth, AtLeast, 0.6),
        ];
        Grammar {
            lexemes: entries.iter().map(|&(w, f, op, t)| (String::from(w), Predicate::new(f, op, t))).collect(),
            articles: alloc::vec![String::from("the")],
            heads: alloc::vec![String::from("one"), String::from("thing")],
            template: alloc::vec![String::from("the"), String::from(ATTRIBUTE_SLOT), String::from(HEAD_SLOT)],
            spatial_frame: None,
        }
    }
}

impl Grammar {
    pub fn with_spatial_frame(mut self, frame: Frame) -> Self {
        self.spatial_frame = Some(frame);
        self
    }

    pub fn predicate(&self, lexeme: &str) -> Option<&Predicate> {
        self.lexemes.get(lexeme)
    }

    pub fn is_spatial(&self, lexeme: &str) -> bool {
        self.predicate(lexeme).is_some_and(|p| p.feature.is_spatial())
    }

    /// Checks that lexemes are normalized, thresholds lie strictly inside
    /// their feature's range, and opposing predicates on one feature have
    /// disjoint truth regions.
    pub fn validate(&self) -> Result<()> {
        if self.lexemes.is_empty() {
            return Err(Error::Config(String::from("grammar has no lexemes")));
        }
        for (word, p) in &self.lexemes {
            if word.is_empty() || normalize_token(word) != *word {
                return Err(Error::Config(format!("lexeme {word:?} is not a normalized token")));
            }
            if self.articles.contains(word) || self.heads.contains(word) {
                return Err(Error::Config(format!("lexeme {word:?} is also an article or head")));
            }
            let (lo, hi) = p.feature.range();
            if !(p.threshold > lo && p.threshold < hi) {
                return Err(Error::Config(format!("{word}: threshold {} not strictly inside ({lo}, {hi})", p.threshold)));
            }
        }
        for (a, pa) in &self.lexemes {
            for (b, pb) in &self.lexemes {
                let same_axis = pa.feature == pb.feature
                    && pa.effective_frame(self.spatial_frame) == pb.effective_frame(self.spatial_frame);
                if same_axis && pa.op == Comparison::AtMost && pb.op == Comparison::AtLeast && pa.threshold >= pb.threshold {
                    return Err(Error::Config(format!("{a} and {b} overlap on {}", pa.feature.name())));
                }
            }
        }
        if !self.template.iter().any(|t| t == ATTRIBUTE_SLOT) {
            return Err(Error::Config(format!("template lacks the {ATTRIBUTE_SLOT} slot")));
        }
        Ok(())
    }

    /// Lexemes whose predicate holds of `features`, in grammar order.
    pub fn true_lexemes<'g>(&'g self, features: &FramedFeatures) -> Vec<&'g str> {
        self.lexemes
            .iter()
            .filter(|(_, p)| p.holds(features, self.spatial_frame))
            .map(|(w, _)| w.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedExpression {
    pub target_id: ObjectId,
    pub text: String,
    pub tokens: Vec<String>,
    pub attributes: Vec<String>,
    /// True when the attributes hold of the target and of no distractor.
    pub discriminating: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    pub require_discriminating: bool,
    /// Lexeme that must appear in the expression.
    pub must_include: Option<String>,
}

impl GenerateOptions {
    pub fn discriminating() -> Self {
        GenerateOptions { require_discriminating: true, must_include: None }
    }
}

/// Referring expression for `target_id` in `arena`.
///
/// In discriminating mode the smallest attribute set that is true of the
/// target and rules out every distractor is used (seeded choice among equally
/// small sets). Otherwise one or two true attributes are drawn.
pub fn generate(
    grammar: &Grammar,
    arena: &Arena,
    target_id: ObjectId,
    seed: u64,
    options: &GenerateOptions,
) -> Result<GeneratedExpression> {
    let target = arena.framed_features(target_id)?;
    let distractors: Vec<FramedFeatures> = arena
        .objects()
        .iter()
        .filter(|o| o.object_id != target_id)
        .map(|o| arena.framed_features(o.object_id))
        .collect::<Result<_>>()?;
    let mut rng = rng_for(seed, &[u64::from(target_id.0)]);

    let truths = grammar.true_lexemes(&target);
    let required = match &options.must_include {
        None => None,
        Some(w) => match truths.iter().position(|t| t == w) {
            Some(i) => Some(i),
            None if grammar.predicate(w).is_none() => return Err(Error::UnknownLexeme(w.clone())),
            None => return Err(Error::NoDistinguishingExpression(target_id)),
        },
    };
    let n = truths.len();
    // Bit i of a distractor mask is set when truths[i] also holds of it.
    let masks: Vec<u32> = distractors
        .iter()
        .map(|d| {
            truths.iter().enumerate().fold(0u32, |m, (i, w)| {
                if grammar.lexemes[*w].holds(d, grammar.spatial_frame) {
                    m | (1 << i)
                } else {
                    m
                }
            })
        })
        .collect();
    let excludes_all = |subset: u32| masks.iter().all(|&m| subset & !m != 0);
    let has_required = |subset: u32| required.is_none_or(|r| subset & (1 << r) != 0);

    let chosen: u32 = if options.require_discriminating {
        let mut found = None;
        for size in 1..=n as u32 {
            let candidates: Vec<u32> =
                (1u32..(1 << n)).filter(|s| s.count_ones() == size && has_required(*s) && excludes_all(*s)).collect();
            if !candidates.is_empty() {
                found = Some(candidates[rng.random_range(0..candidates.len())]);
                break;
            }
        }
        found.ok_or(Error::NoDistinguishingExpression(target_id))?
    } else if n == 0 {
        0
    } else {
        let size = rng.random_range(1..=2u32).min(n as u32);
        let candidates: Vec<u32> = (1u32..(1 << n)).filter(|s| s.count_ones() == size && has_required(*s)).collect();
        candidates[rng.random_range(0..candidates.len())]
    };

    let attributes: Vec<String> =
        truths.iter().enumerate().filter(|(i, _)| chosen & (1 << i) != 0).map(|(_, w)| String::from(*w)).collect();
    let mut tokens = Vec::new();
    for slot in &grammar.template {
        match slot.as_str() {
            ATTRIBUTE_SLOT => tokens.extend(attributes.iter().cloned()),
            HEAD_SLOT if !grammar.heads.is_empty() => {
                tokens.push(grammar.heads[rng.random_range(0..grammar.heads.len())].clone())
            }
            HEAD_SLOT => {}
            word => tokens.push(String::from(word)),
        }
    }
    Ok(GeneratedExpression {
        target_id,
        text: tokens.join(" "),
        tokens,
        discriminating: excludes_all(chosen),
        attributes,
    })
}

/// True iff every attribute token's predicate holds of `features`.
/// Articles and heads are ignored; any other token is an error.
pub fn label_check(grammar: &Grammar, tokens: &[String], features: &FramedFeatures) -> Result<bool> {
    let mut all = true;
    for token in tokens {
        if grammar.articles.contains(token) || grammar.heads.contains(token) {
            continue;
        }
        let p = grammar.predicate(token).ok_or_else(|| Error::UnknownLexeme(token.clone()))?;
        all &= p.holds(features, grammar.spatial_frame);
    }
    Ok(all)
}
