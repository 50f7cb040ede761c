use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown acceptability label {0:?}")]
pub struct UnknownLabel(pub String);

/// Five-point acceptability scale, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Likert {
    CompletelyUnacceptable,
    SomewhatUnacceptable,
    Neutral,
    SomewhatAcceptable,
    CompletelyAcceptable,
}

impl Likert {
    pub const COLUMNS: [Likert; 5] = [
        Likert::CompletelyUnacceptable,
        Likert::SomewhatUnacceptable,
        Likert::Neutral,
        Likert::SomewhatAcceptable,
        Likert::CompletelyAcceptable,
    ];

    /// The only correct answer to the attention check row.
    pub const ATTENTION_ANSWER: Likert = Likert::SomewhatAcceptable;

    pub fn label(self) -> &'static str {
        match self {
            Likert::CompletelyUnacceptable => "Completely Unacceptable",
            Likert::SomewhatUnacceptable => "Somewhat Unacceptable",
            Likert::Neutral => "Neutral",
            Likert::SomewhatAcceptable => "Somewhat Acceptable",
            Likert::CompletelyAcceptable => "Completely Acceptable",
        }
    }

    pub fn value(self) -> i32 {
        match self {
            Likert::CompletelyUnacceptable => -2,
            Likert::SomewhatUnacceptable => -1,
            Likert::Neutral => 0,
            Likert::SomewhatAcceptable => 1,
            Likert::CompletelyAcceptable => 2,
        }
    }

    pub fn from_value(v: i32) -> Option<Likert> {
        Likert::COLUMNS.into_iter().find(|l| l.value() == v)
    }

    /// Mirror image on the scale.
    pub fn reversed(self) -> Likert {
        Likert::from_value(-self.value()).expect("scale is symmetric")
    }

    pub fn column_labels() -> Vec<String> {
        Likert::COLUMNS.iter().map(|l| l.label().to_string()).collect()
    }
}

/// Integer coding: Completely Acceptable = 2 down to Completely Unacceptable = -2.
pub fn likert_value(label: &str) -> Result<i32, UnknownLabel> {
    label.parse::<Likert>().map(Likert::value)
}

impl FromStr for Likert {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Likert::COLUMNS
            .into_iter()
            .find(|l| l.label() == s.trim())
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for Likert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Likert {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Likert {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
