use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six tested body locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodySite {
    /// Index finger pad.
    H1,
    /// Back of the index finger.
    H2,
    /// Pinky finger pad.
    H3,
    /// Dorsal wrist.
    W1,
    /// Volar wrist.
    W2,
    /// Big toe pad.
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteClass {
    Hand,
    DorsalFoot,
    PlantarFoot,
}

impl BodySite {
    pub const ALL: [BodySite; 6] = [Self::H1, Self::H2, Self::H3, Self::W1, Self::W2, Self::F];

    pub fn code(self) -> &'static str {
        match self {
            Self::H1 => "H1",
            Self::H2 => "H2",
            Self::H3 => "H3",
            Self::W1 => "W1",
            Self::W2 => "W2",
            Self::F => "F",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::H1 => "index finger pad",
            Self::H2 => "back of index finger",
            Self::H3 => "pinky finger pad",
            Self::W1 => "dorsal wrist",
            Self::W2 => "volar wrist",
            Self::F => "big toe pad",
        }
    }

    /// Wrists are grouped with the hand for monofilament start sizes.
    pub fn site_class(self) -> SiteClass {
        match self {
            Self::F => SiteClass::PlantarFoot,
            _ => SiteClass::Hand,
        }
    }
}

impl fmt::Display for BodySite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown body site `{0}` (expected one of H1, H2, H3, W1, W2, F)")]
pub struct UnknownSite(pub String);

impl FromStr for BodySite {
    type Err = UnknownSite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|site| site.code() == s).ok_or_else(|| UnknownSite(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_parse_back() {
        for site in BodySite::ALL {
            assert_eq!(site.code().parse::<BodySite>().unwrap(), site);
        }
        assert!("toe".parse::<BodySite>().is_err());
        assert_eq!(BodySite::F.site_class(), SiteClass::PlantarFoot);
        assert_eq!(BodySite::W2.site_class(), SiteClass::Hand);
    }
}
