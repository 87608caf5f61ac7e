// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

/// A FACS action unit in canonical, presence-only form (`AU<k>`).
///
/// Intensity grades (`A`..`E`) and laterality markers (`L`/`R`, as prefix or
/// suffix) are stripped while parsing, so `"AU12B"`, `"L12"` and `"R12"` all
/// normalize to `AU12`. Ordering is numeric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AuCode(u16);

impl AuCode {
    pub fn new(number: u16) -> Result<Self, DataError> {
        if number == 0 {
            return Err(DataError::InvalidAu("AU0".into()));
        }
        Ok(AuCode(number))
    }

    pub fn number(self) -> u16 {
        self.0
    }
}

impl fmt::Display for AuCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AU{}", self.0)
    }
}

impl FromStr for AuCode {
    type Err = DataError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let upper = raw.trim().to_ascii_uppercase();
        let invalid = || DataError::InvalidAu(raw.trim().to_string());

        let mut rest = upper.as_str();
        if let Some(stripped) = rest.strip_prefix(['L', 'R']) {
            if stripped.starts_with(|c: char| c.is_ascii_digit()) || stripped.starts_with("AU") {
                rest = stripped;
            }
        }
        rest = rest.strip_prefix("AU").unwrap_or(rest).trim_start();

        let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if digits == 0 {
            return Err(invalid());
        }
        let (number, suffix) = rest.split_at(digits);
        // at most one intensity grade and one laterality marker, in either order
        let suffix = suffix.trim();
        if suffix.len() > 2 || !suffix.chars().all(|c| matches!(c, 'A'..='E' | 'L' | 'R')) {
            return Err(invalid());
        }
        let number: u16 = number.parse().map_err(|_| invalid())?;
        AuCode::new(number).map_err(|_| invalid())
    }
}

impl TryFrom<String> for AuCode {
    type Error = DataError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<AuCode> for String {
    fn from(code: AuCode) -> Self {
        code.to_string()
    }
}

/// Splits an AU string such as `"AU4+AU12B"` on `separator` and canonicalizes
/// every token. Empty tokens are skipped so `"4+"` and `""` are accepted.
pub fn parse_au_list(raw: &str, separator: &str) -> Result<Vec<AuCode>, DataError> {
    raw.split(separator)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(AuCode::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn au(s: &str) -> AuCode {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(au("AU12B").to_string(), "AU12");
        assert_eq!(au("L12"), au("AU12"));
        assert_eq!(au("R12"), au("AU12"));
        assert_eq!(au("12"), au("AU12"));
        assert_eq!(au(" au4 "), au("AU4"));
        assert_eq!(au("AU14R"), au("AU14"));
        assert_eq!(au("R14A"), au("AU14"));
        assert_eq!(au("LAU1"), au("AU1"));
        assert_eq!(au("AU12EL").number(), 12);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "AU", "AUX", "AU0", "AU12Z", "AU12BBB", "?", "L"] {
            assert!(bad.parse::<AuCode>().is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn ordering_is_numeric() {
        let mut v = vec![au("AU17"), au("AU2"), au("AU10")];
        v.sort();
        assert_eq!(v, vec![au("AU2"), au("AU10"), au("AU17")]);
    }

    #[test]
    fn list_splitting() {
        let v = parse_au_list("AU4+AU12B", "+").unwrap();
        assert_eq!(v, vec![au("AU4"), au("AU12")]);
        assert!(parse_au_list("", "+").unwrap().is_empty());
        assert_eq!(parse_au_list("1+R2+", "+").unwrap().len(), 2);
    }
}
