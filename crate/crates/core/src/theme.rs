use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four gender-stereotyping themes tracked through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Theme {
    #[serde(rename = "EMOT")]
    Emotions,
    #[serde(rename = "SEX")]
    Hypersexualization,
    #[serde(rename = "NORM")]
    GenderNorms,
    #[serde(rename = "MOM")]
    BadMother,
}

impl Theme {
    pub const ALL: [Theme; 4] = [
        Theme::Emotions,
        Theme::Hypersexualization,
        Theme::GenderNorms,
        Theme::BadMother,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Theme::Emotions => "EMOT",
            Theme::Hypersexualization => "SEX",
            Theme::GenderNorms => "NORM",
            Theme::BadMother => "MOM",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Theme::Emotions => "Emotions",
            Theme::Hypersexualization => "Hypersexualization",
            Theme::GenderNorms => "Betrayal of Gender Norms",
            Theme::BadMother => "Bad Mother",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Theme::Emotions => {
                "Describing the defendant's emotions, including emotional, emotionless, \
                 inappropriate joy or happiness, remorseful, or remorseless."
            }
            Theme::Hypersexualization => {
                "Describing the defendant as promiscuous, loose, an adulterer; attacking the \
                 defendant's sexual expression, or demonizing their sexual practices."
            }
            Theme::GenderNorms => {
                "Describing the defendant as manipulative, greedy, evil, deceitful."
            }
            Theme::BadMother => "Describing the defendant as a bad mother.",
        }
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown theme code {0:?} (expected EMOT, SEX, NORM or MOM)")]
pub struct UnknownTheme(pub String);

impl FromStr for Theme {
    type Err = UnknownTheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Theme::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownTheme(s.to_string()))
    }
}
