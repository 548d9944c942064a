//! Versioned phrase lexicon used to render rules as sentences.
//!
//! The file format is TOML; `data/lexicon.toml` is the shipped default and
//! documents every section. Entries are checked against the item
//! vocabulary at load time, so a lexicon can be incomplete but never
//! mention an item that does not exist.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::cues::CueType;
use crate::items::{CharacteristicItem, CharacteristicKey, DisruptivenessItem, Level, Measure};
use crate::task::TaskType;

pub const LEXICON_VERSION: u32 = 1;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.toml");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("lexicon is not valid TOML: {0}")]
    Syntax(String),
    #[error("lexicon version {0} is not supported (expected {LEXICON_VERSION})")]
    Version(u32),
    #[error("lexicon entry `{0}` does not name a known item")]
    UnknownEntry(String),
    #[error("lexicon entry `{0}` must contain the {1} placeholder")]
    MissingPlaceholder(String, &'static str),
    #[error("lexicon phrase `{0}` is empty")]
    EmptyPhrase(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub number: Number,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub singular: String,
    pub plural: String,
}

impl Predicate {
    pub fn form(&self, n: Number) -> &str {
        match n {
            Number::Singular => &self.singular,
            Number::Plural => &self.plural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CueTemplates {
    pub typed: String,
    pub untyped: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    version: u32,
    #[serde(default)]
    task_types: BTreeMap<String, String>,
    #[serde(default)]
    subjects: BTreeMap<String, Subject>,
    #[serde(default)]
    characteristics: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    consequents: BTreeMap<String, BTreeMap<String, Predicate>>,
    #[serde(default)]
    cues: BTreeMap<String, String>,
    cue_templates: CueTemplates,
}

/// Which subject phrase a rule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SubjectKey {
    SelfInitiated,
    External,
    Any,
}

impl SubjectKey {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "self" => Some(SubjectKey::SelfInitiated),
            "external" => Some(SubjectKey::External),
            "any" => Some(SubjectKey::Any),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    task_types: BTreeMap<TaskType, String>,
    subjects: BTreeMap<SubjectKey, Subject>,
    characteristics: BTreeMap<CharacteristicItem, String>,
    consequents: BTreeMap<DisruptivenessItem, Predicate>,
    cues: BTreeMap<CueType, String>,
    cue_templates: CueTemplates,
}

fn non_empty(name: String, phrase: &str) -> Result<(), LexiconError> {
    if phrase.trim().is_empty() {
        Err(LexiconError::EmptyPhrase(name))
    } else {
        Ok(())
    }
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile = toml::from_str(text).map_err(|e| LexiconError::Syntax(e.message().to_string()))?;
        if file.version != LEXICON_VERSION {
            return Err(LexiconError::Version(file.version));
        }
        let unknown = |s: String| LexiconError::UnknownEntry(s);

        let mut task_types = BTreeMap::new();
        for (k, v) in file.task_types {
            let t: TaskType = k.parse().map_err(|_| unknown(format!("task_types.{k}")))?;
            non_empty(format!("task_types.{k}"), &v)?;
            task_types.insert(t, v);
        }

        let mut subjects = BTreeMap::new();
        for (k, v) in file.subjects {
            let s = SubjectKey::parse(&k).ok_or_else(|| unknown(format!("subjects.{k}")))?;
            if !v.text.contains("{task}") {
                return Err(LexiconError::MissingPlaceholder(format!("subjects.{k}"), "{task}"));
            }
            subjects.insert(s, v);
        }

        let mut characteristics = BTreeMap::new();
        for (key, values) in file.characteristics {
            let ck: CharacteristicKey = key
                .parse()
                .map_err(|_| unknown(format!("characteristics.{key}")))?;
            for (value, phrase) in values {
                let name = format!("characteristics.{key}.{value}");
                let item = CharacteristicItem::new(ck, &value).map_err(|_| unknown(name.clone()))?;
                non_empty(name, &phrase)?;
                characteristics.insert(item, phrase);
            }
        }

        let mut consequents = BTreeMap::new();
        for (measure, levels) in file.consequents {
            let m: Measure = measure
                .parse()
                .map_err(|_| unknown(format!("consequents.{measure}")))?;
            for (level, pred) in levels {
                let name = format!("consequents.{measure}.{level}");
                let l: Level = level.parse().map_err(|_| unknown(name.clone()))?;
                non_empty(name.clone(), &pred.singular)?;
                non_empty(name, &pred.plural)?;
                consequents.insert(DisruptivenessItem::new(m, l), pred);
            }
        }

        let mut cues = BTreeMap::new();
        for (k, v) in file.cues {
            let c: CueType = k.parse().map_err(|_| unknown(format!("cues.{k}")))?;
            non_empty(format!("cues.{k}"), &v)?;
            cues.insert(c, v);
        }

        let t = &file.cue_templates;
        for (name, text) in [("cue_templates.typed", &t.typed), ("cue_templates.untyped", &t.untyped)] {
            for placeholder in ["{prefix}", "{last}"] {
                if !text.contains(placeholder) {
                    return Err(LexiconError::MissingPlaceholder(name.to_string(), placeholder));
                }
            }
        }
        if !t.typed.contains("{task}") {
            return Err(LexiconError::MissingPlaceholder("cue_templates.typed".into(), "{task}"));
        }

        Ok(Lexicon {
            task_types,
            subjects,
            characteristics,
            consequents,
            cues,
            cue_templates: file.cue_templates,
        })
    }

    pub fn task_type(&self, t: TaskType) -> Option<&str> {
        self.task_types.get(&t).map(String::as_str)
    }

    pub fn subject(&self, key: SubjectKey) -> Option<&Subject> {
        self.subjects.get(&key)
    }

    pub fn characteristic(&self, item: CharacteristicItem) -> Option<&str> {
        self.characteristics.get(&item).map(String::as_str)
    }

    pub fn consequent(&self, item: DisruptivenessItem) -> Option<&Predicate> {
        self.consequents.get(&item)
    }

    pub fn cue(&self, c: CueType) -> Option<&str> {
        self.cues.get(&c).map(String::as_str)
    }

    pub fn cue_templates(&self) -> &CueTemplates {
        &self.cue_templates
    }

    pub fn default_text() -> &'static str {
        DEFAULT_LEXICON
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_lexicon_covers_the_vocabulary() {
        let lex = Lexicon::default();
        for &t in TaskType::ALL {
            assert!(lex.task_type(t).is_some(), "{t}");
        }
        for item in CharacteristicItem::all().filter(|i| i.key() != CharacteristicKey::Initiator) {
            assert!(lex.characteristic(item).is_some(), "{item}");
        }
        for &m in Measure::ALL {
            for &l in Level::ALL {
                assert!(lex.consequent(DisruptivenessItem::new(m, l)).is_some());
            }
        }
        for &c in CueType::ALL {
            assert!(lex.cue(c).is_some());
        }
    }

    #[test]
    fn rejects_wrong_version_and_unknown_items() {
        let base = Lexicon::default_text();
        assert_eq!(
            Lexicon::parse(&base.replace("version = 1", "version = 2")),
            Err(LexiconError::Version(2))
        );
        let bad = base.replace("morning = \"in the morning\"", "noon = \"at noon\"");
        assert!(matches!(Lexicon::parse(&bad), Err(LexiconError::UnknownEntry(_))));
        let bad = base.replace("Self-switching a {task} task", "Self-switching");
        assert!(matches!(Lexicon::parse(&bad), Err(LexiconError::MissingPlaceholder(..))));
        assert!(matches!(Lexicon::parse("version = "), Err(LexiconError::Syntax(_))));
    }
}
