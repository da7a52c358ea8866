use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Short identifier for a protocol participant ("SP1", "MC", "IB", ...).
///
/// Limited to 1..=255 printable ASCII bytes without whitespace so it fits the
/// one-byte length prefix of the wire header and the key-store line format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PartyId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid party id {0:?}: expected 1-255 printable ASCII characters without spaces")]
pub struct PartyIdError(pub String);

impl PartyId {
    pub fn new(id: impl Into<String>) -> Result<Self, PartyIdError> {
        let id = id.into();
        let ok = !id.is_empty() && id.len() <= 255 && id.bytes().all(|b| b.is_ascii_graphic());
        if ok {
            Ok(Self(id))
        } else {
            Err(PartyIdError(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PartyId {
    type Err = PartyIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for PartyId {
    type Error = PartyIdError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<PartyId> for String {
    fn from(p: PartyId) -> String {
        p.0
    }
}

impl AsRef<str> for PartyId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// The three protocol roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Personnel,
    Master,
    Department,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Personnel => 1,
            Role::Master => 2,
            Role::Department => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Role::Personnel),
            2 => Some(Role::Master),
            3 => Some(Role::Department),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Personnel => "personnel",
            Role::Master => "master",
            Role::Department => "department",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "personnel" => Ok(Role::Personnel),
            "master" => Ok(Role::Master),
            "department" => Ok(Role::Department),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}
