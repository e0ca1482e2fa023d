use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary persuasion label. The index mapping (`False` = 0, `True` = 1) is
/// shared by batches, checkpoints and prediction files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    False,
    True,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::False, Label::True];

    pub const fn index(self) -> usize {
        match self {
            Label::False => 0,
            Label::True => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Label::False),
            1 => Some(Label::True),
            _ => None,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Label::False => "false",
            Label::True => "true",
        }
    }

    pub const fn other(self) -> Self {
        match self {
            Label::False => Label::True,
            Label::True => Label::False,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => Ok(Label::True),
            "false" => Ok(Label::False),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// Identifier of the label encoding written into checkpoint metadata.
pub const LABEL_ENCODING: &str = "false=0,true=1";

/// A value per class, indexed by [`Label`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerLabel<T> {
    #[serde(rename = "false")]
    pub false_: T,
    #[serde(rename = "true")]
    pub true_: T,
}

impl<T> PerLabel<T> {
    pub fn new(false_: T, true_: T) -> Self {
        Self { false_, true_ }
    }

    pub fn get(&self, label: Label) -> &T {
        match label {
            Label::False => &self.false_,
            Label::True => &self.true_,
        }
    }

    pub fn get_mut(&mut self, label: Label) -> &mut T {
        match label {
            Label::False => &mut self.false_,
            Label::True => &mut self.true_,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for label in Label::ALL {
            assert_eq!(Label::from_index(label.index()), Some(label));
            assert_eq!(label.as_str().parse::<Label>().unwrap(), label);
        }
        assert_eq!(Label::from_index(2), None);
    }

    #[test]
    fn rejects_other_spellings() {
        assert!("True".parse::<Label>().is_err());
        assert!("1".parse::<Label>().is_err());
        assert!("".parse::<Label>().is_err());
    }
}
