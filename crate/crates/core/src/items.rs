//! The mining alphabet: categorical interruption characteristics and
//! discretized disruptiveness levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::task::string_enum;
use crate::task::DomainError;

string_enum! {
    /// Attribute of an interruption used as an antecedent item.
    CharacteristicKey, "characteristic" {
        Initiator => "initiator",
        TimeOfDay => "time_of_day",
        ContextSwitch => "context_switch",
        InterruptingType => "interrupting_type",
        PriorityRelation => "priority_relation",
        Blockage => "blockage",
        Boredom => "boredom",
    }
}

impl CharacteristicKey {
    /// The declared values for this key.
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            CharacteristicKey::Initiator => &["self", "external"],
            CharacteristicKey::TimeOfDay => &["morning", "afternoon", "evening"],
            CharacteristicKey::ContextSwitch => &["same_project", "different_project", "unknown"],
            CharacteristicKey::InterruptingType => &[
                "elicitation",
                "analysis",
                "modeling",
                "specification",
                "validation",
                "evolution",
                "other",
                "unknown",
            ],
            CharacteristicKey::PriorityRelation => &["higher", "lower", "equal", "unknown"],
            CharacteristicKey::Blockage | CharacteristicKey::Boredom => &["yes", "no"],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ItemError {
    #[error("`{0}` is not of the form key=value")]
    Malformed(String),
    #[error(transparent)]
    UnknownKey(#[from] DomainError),
    #[error("`{value}` is not a declared value of {key}")]
    UnknownValue { key: CharacteristicKey, value: String },
}

/// One `key=value` interruption characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharacteristicItem {
    key: CharacteristicKey,
    value: &'static str,
}

impl CharacteristicItem {
    pub fn new(key: CharacteristicKey, value: &str) -> Result<Self, ItemError> {
        key.vocabulary()
            .iter()
            .find(|v| **v == value)
            .map(|v| CharacteristicItem { key, value: v })
            .ok_or_else(|| ItemError::UnknownValue {
                key,
                value: value.to_string(),
            })
    }

    pub fn key(self) -> CharacteristicKey {
        self.key
    }

    pub fn value(self) -> &'static str {
        self.value
    }

    /// Every item in the declared vocabulary.
    pub fn all() -> impl Iterator<Item = CharacteristicItem> {
        CharacteristicKey::ALL.iter().flat_map(|&key| {
            key.vocabulary()
                .iter()
                .map(move |value| CharacteristicItem { key, value })
        })
    }
}

impl fmt::Display for CharacteristicItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

impl FromStr for CharacteristicItem {
    type Err = ItemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (k, v) = s.split_once('=').ok_or_else(|| ItemError::Malformed(s.to_string()))?;
        CharacteristicItem::new(k.parse()?, v)
    }
}

string_enum! {
    Measure, "measure" {
        D1 => "D1",
        D2 => "D2",
        D3 => "D3",
    }
}

string_enum! {
    Level, "level" {
        Low => "low",
        High => "high",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DisruptivenessItem {
    pub measure: Measure,
    pub level: Level,
}

impl DisruptivenessItem {
    pub fn new(measure: Measure, level: Level) -> Self {
        DisruptivenessItem { measure, level }
    }
}

impl fmt::Display for DisruptivenessItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.measure, self.level)
    }
}

impl FromStr for DisruptivenessItem {
    type Err = ItemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, l) = s
            .split_once('=')
            .or_else(|| s.split_once('_'))
            .ok_or_else(|| ItemError::Malformed(s.to_string()))?;
        Ok(DisruptivenessItem {
            measure: m.parse()?,
            level: l.parse()?,
        })
    }
}

/// An element of a mined item set. Characteristics order before measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    Characteristic(CharacteristicItem),
    Disruptiveness(DisruptivenessItem),
}

impl Item {
    pub fn is_characteristic(&self) -> bool {
        matches!(self, Item::Characteristic(_))
    }
}

impl From<CharacteristicItem> for Item {
    fn from(c: CharacteristicItem) -> Self {
        Item::Characteristic(c)
    }
}

impl From<DisruptivenessItem> for Item {
    fn from(d: DisruptivenessItem) -> Self {
        Item::Disruptiveness(d)
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Characteristic(c) => c.fmt(f),
            Item::Disruptiveness(d) => d.fmt(f),
        }
    }
}

impl FromStr for Item {
    type Err = ItemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with('D') {
            s.parse().map(Item::Disruptiveness)
        } else {
            s.parse().map(Item::Characteristic)
        }
    }
}

macro_rules! serde_via_str {
    ($($t:ty),+) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    )+};
}

serde_via_str!(CharacteristicItem, DisruptivenessItem, Item);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let c: CharacteristicItem = "time_of_day=morning".parse().unwrap();
        assert_eq!(c.key(), CharacteristicKey::TimeOfDay);
        assert_eq!(c.to_string(), "time_of_day=morning");
        let d: DisruptivenessItem = "D3_high".parse().unwrap();
        assert_eq!(d.to_string(), "D3=high");
        assert!(matches!("D1=low".parse::<Item>(), Ok(Item::Disruptiveness(_))));
    }

    #[test]
    fn vocabulary_is_closed() {
        assert!(matches!(
            "time_of_day=noon".parse::<CharacteristicItem>(),
            Err(ItemError::UnknownValue { .. })
        ));
        assert!("mood=bad".parse::<CharacteristicItem>().is_err());
        assert!("initiator".parse::<CharacteristicItem>().is_err());
    }

    #[test]
    fn characteristics_sort_before_measures() {
        let c: Item = "initiator=self".parse().unwrap();
        let d: Item = "D1=low".parse().unwrap();
        assert!(c < d);
    }
}
