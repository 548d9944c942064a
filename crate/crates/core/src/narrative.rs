//! Sentences for mined rules. Rendering is a pure function of the rule and
//! the lexicon, so every [`NarrativeRule`] can be checked by regenerating it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::CueSequenceRule;
use crate::items::CharacteristicKey;
use crate::lexicon::{Lexicon, SubjectKey};
use crate::pattern::AssociationRule;
use crate::ratio::{self, percent_half_up, Fraction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NarrativeError {
    #[error("no phrase for `{0}` in the lexicon")]
    UnknownVocabularyItem(String),
    #[error("rule has an empty {0}")]
    EmptyRule(&'static str),
}

/// The structured rule behind a narrative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum RuleSource {
    Disruptiveness(AssociationRule),
    CueSequence(CueSequenceRule),
}

impl RuleSource {
    pub fn support(&self) -> Fraction {
        match self {
            RuleSource::Disruptiveness(r) => r.support(),
            RuleSource::CueSequence(r) => r.support,
        }
    }

    pub fn confidence(&self) -> Fraction {
        match self {
            RuleSource::Disruptiveness(r) => r.confidence(),
            RuleSource::CueSequence(r) => r.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeRule {
    pub text: String,
    pub rule: RuleSource,
    pub support: f64,
    pub confidence: f64,
}

impl NarrativeRule {
    /// Renders the embedded rule again.
    pub fn regenerate(&self, lexicon: &Lexicon) -> Result<String, NarrativeError> {
        render(&self.rule, lexicon).map(|n| n.text)
    }

    /// Whether the text is exactly what the embedded rule renders to.
    pub fn is_consistent(&self, lexicon: &Lexicon) -> bool {
        self.regenerate(lexicon).is_ok_and(|t| t == self.text)
    }
}

fn stats(support: Fraction, confidence: Fraction) -> String {
    format!(
        "(confidence {}%, support {}%)",
        percent_half_up(confidence),
        percent_half_up(support)
    )
}

fn missing(what: impl ToString) -> NarrativeError {
    NarrativeError::UnknownVocabularyItem(what.to_string())
}

pub fn render(rule: &RuleSource, lexicon: &Lexicon) -> Result<NarrativeRule, NarrativeError> {
    match rule {
        RuleSource::Disruptiveness(r) => render_disruptiveness(r, lexicon),
        RuleSource::CueSequence(r) => render_cue_sequence(r, lexicon),
    }
}

/// "`<subject>` `<characteristics>` `<predicates>` (confidence C%, support S%)".
pub fn render_disruptiveness(
    rule: &AssociationRule,
    lexicon: &Lexicon,
) -> Result<NarrativeRule, NarrativeError> {
    if rule.antecedent().is_empty() {
        return Err(NarrativeError::EmptyRule("antecedent"));
    }
    if rule.consequent().is_empty() {
        return Err(NarrativeError::EmptyRule("consequent"));
    }
    let task = lexicon
        .task_type(rule.task_type())
        .ok_or_else(|| missing(format!("task_type={}", rule.task_type())))?;
    let subject_key = rule
        .antecedent()
        .iter()
        .find(|c| c.key() == CharacteristicKey::Initiator)
        .map(|c| match c.value() {
            "self" => SubjectKey::SelfInitiated,
            _ => SubjectKey::External,
        })
        .unwrap_or(SubjectKey::Any);
    let subject = lexicon.subject(subject_key).ok_or_else(|| {
        missing(match subject_key {
            SubjectKey::SelfInitiated => "initiator=self",
            SubjectKey::External => "initiator=external",
            SubjectKey::Any => "subject any",
        })
    })?;

    let mut text = subject.text.replace("{task}", task);
    for c in rule.antecedent().iter().filter(|c| c.key() != CharacteristicKey::Initiator) {
        text.push(' ');
        text.push_str(lexicon.characteristic(*c).ok_or_else(|| missing(c))?);
    }
    let predicates = rule
        .consequent()
        .iter()
        .map(|d| {
            lexicon
                .consequent(*d)
                .map(|p| p.form(subject.number))
                .ok_or_else(|| missing(d))
        })
        .collect::<Result<Vec<_>, _>>()?;
    text.push(' ');
    text.push_str(&predicates.join(" and "));
    text.push(' ');
    text.push_str(&stats(rule.support(), rule.confidence()));

    Ok(NarrativeRule {
        text,
        rule: RuleSource::Disruptiveness(rule.clone()),
        support: ratio::to_f64(rule.support()),
        confidence: ratio::to_f64(rule.confidence()),
    })
}

pub fn render_cue_sequence(
    rule: &CueSequenceRule,
    lexicon: &Lexicon,
) -> Result<NarrativeRule, NarrativeError> {
    let (last, prefix) = match rule.sequence.split_last() {
        Some((last, prefix)) if !prefix.is_empty() => (last, prefix),
        _ => return Err(NarrativeError::EmptyRule("cue prefix")),
    };
    let cue = |c| lexicon.cue(c).ok_or_else(|| missing(c));
    let prefix = prefix.iter().map(|&c| cue(c)).collect::<Result<Vec<_>, _>>()?.join(", then ");
    let templates = lexicon.cue_templates();
    let mut text = match rule.task_type {
        Some(t) => {
            let task = lexicon.task_type(t).ok_or_else(|| missing(format!("task_type={t}")))?;
            templates.typed.replace("{task}", task)
        }
        None => templates.untyped.clone(),
    };
    text = text.replace("{prefix}", &prefix).replace("{last}", cue(*last)?);
    text.push(' ');
    text.push_str(&stats(rule.support, rule.confidence));
    Ok(NarrativeRule {
        text,
        rule: RuleSource::CueSequence(rule.clone()),
        support: ratio::to_f64(rule.support),
        confidence: ratio::to_f64(rule.confidence),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cues::CueType;
    use crate::task::TaskType;

    fn rule(task: TaskType, z: &[&str], y: &[&str], support: Fraction) -> AssociationRule {
        AssociationRule::new(
            task,
            z.iter().map(|s| s.parse().unwrap()),
            y.iter().map(|s| s.parse().unwrap()),
            support,
            Fraction::from_integer(1),
        )
        .unwrap()
    }

    #[test]
    fn self_switching_in_the_morning() {
        let r = rule(
            TaskType::Modeling,
            &["initiator=self", "time_of_day=morning"],
            &["D3=high"],
            Fraction::new(33, 50),
        );
        let n = render_disruptiveness(&r, &Lexicon::default()).unwrap();
        assert_eq!(
            n.text,
            "Self-switching a requirements modeling task in the morning contributes to a greater \
             interruption lag (confidence 100%, support 66%)"
        );
        assert_eq!(n.confidence, 1.0);
    }

    #[test]
    fn externally_interrupted_validation() {
        let r = rule(TaskType::Validation, &["initiator=external"], &["D1=high"], Fraction::new(1, 2));
        let n = render_disruptiveness(&r, &Lexicon::default()).unwrap();
        assert!(n
            .text
            .starts_with("Externally-interrupted requirements validation tasks tend to shatter into more fragments ("));
    }

    #[test]
    fn missing_phrase_fails_loudly() {
        let text = Lexicon::default_text().replace("morning = \"in the morning\"\n", "");
        let lex = Lexicon::parse(&text).unwrap();
        let r = rule(
            TaskType::Modeling,
            &["initiator=self", "time_of_day=morning"],
            &["D3=high"],
            Fraction::new(1, 2),
        );
        assert_eq!(
            render_disruptiveness(&r, &lex),
            Err(NarrativeError::UnknownVocabularyItem("time_of_day=morning".into()))
        );
    }

    #[test]
    fn cue_sequence_sentence() {
        let r = CueSequenceRule {
            task_type: Some(TaskType::Modeling),
            sequence: vec![CueType::Annotation, CueType::Verbal, CueType::Thumbnail],
            support: Fraction::new(2, 3),
            confidence: Fraction::from_integer(1),
        };
        let n = render_cue_sequence(&r, &Lexicon::default()).unwrap();
        assert_eq!(
            n.text,
            "Users resuming a requirements modeling task who open annotation cues, then verbal cues \
             go on to open thumbnail images (confidence 100%, support 67%)"
        );
    }

    #[test]
    fn json_round_trip_regenerates() {
        let lex = Lexicon::default();
        let r = rule(TaskType::Modeling, &["initiator=self"], &["D3=high", "D1=low"], Fraction::new(3, 5));
        let n = render_disruptiveness(&r, &lex).unwrap();
        let back: NarrativeRule = serde_json::from_str(&serde_json::to_string(&n).unwrap()).unwrap();
        assert!(back.is_consistent(&lex));
        assert_eq!(back.text, n.text);
    }
}
