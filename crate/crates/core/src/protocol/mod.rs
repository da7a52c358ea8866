//! The three role state machines and the messages they exchange.
//!
//! ```text
//! personnel --Request--> master --Relayed--> department
//! personnel <-Forwarded- master <-Response-- department
//! ```
//!
//! Field tags inside the encrypted envelopes:
//!
//! | tag  | field                                              |
//! |------|----------------------------------------------------|
//! | 0x01 | E_RV, the personnel's nonce under its own public key |
//! | 0x02 | SA_Data, personnel-signed core                     |
//! | 0x03 | C_Req, master-signed core                          |
//! | 0x04 | R, random set (int list)                           |
//! | 0x05 | S_Query, query under the department's public key   |
//! | 0x06 | H_v, request or response digest                    |
//! | 0x07 | M'_val, mapping sine (binary64 BE)                 |
//! | 0x08 | S_Answer, answer under the personnel's public key  |
//! | 0x09 | plaintext query (digest input only)                |
//! | 0x0A | plaintext answer (digest input only)               |

mod department;
mod master;
mod personnel;
pub mod wire;

use std::fmt;

pub use department::Department;
pub use master::{MasterControl, McSession};
pub use personnel::{Personnel, SessionState};

use crate::codec::{encode_fields, FieldTuple, FramingError};
use crate::crypto::{Ciphertext, Digest16, DigestFn};
pub use crate::party::Role;

pub mod tags {
    pub const E_RV: u8 = 0x01;
    pub const SA_DATA: u8 = 0x02;
    pub const C_REQ: u8 = 0x03;
    pub const R: u8 = 0x04;
    pub const S_QUERY: u8 = 0x05;
    pub const H_V: u8 = 0x06;
    pub const M_VAL: u8 = 0x07;
    pub const S_ANSWER: u8 = 0x08;
    pub const QUERY: u8 = 0x09;
    pub const ANSWER: u8 = 0x0A;

    /// Tags of the request core signed by the personnel and then the master.
    pub const CORE: [u8; 3] = [R, S_QUERY, H_V];
    /// Tags of a response, before and after the master control.
    pub const RESPONSE: [u8; 4] = [E_RV, H_V, M_VAL, S_ANSWER];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    AuthFail,
    Tampered,
    UnknownParty,
    MappingFail,
    SessionUnknown,
    PolicyFail,
    /// A downstream hop did not answer in time (TCP mode only).
    Timeout,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::AuthFail,
        ErrorCode::Tampered,
        ErrorCode::UnknownParty,
        ErrorCode::MappingFail,
        ErrorCode::SessionUnknown,
        ErrorCode::PolicyFail,
        ErrorCode::Timeout,
    ];

    pub fn to_byte(self) -> u8 {
        match self {
            ErrorCode::AuthFail => 1,
            ErrorCode::Tampered => 2,
            ErrorCode::UnknownParty => 3,
            ErrorCode::MappingFail => 4,
            ErrorCode::SessionUnknown => 5,
            ErrorCode::PolicyFail => 6,
            ErrorCode::Timeout => 7,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.to_byte() == b)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::AuthFail => "AUTH_FAIL",
            ErrorCode::Tampered => "TAMPERED",
            ErrorCode::UnknownParty => "UNKNOWN_PARTY",
            ErrorCode::MappingFail => "MAPPING_FAIL",
            ErrorCode::SessionUnknown => "SESSION_UNKNOWN",
            ErrorCode::PolicyFail => "POLICY_FAIL",
            ErrorCode::Timeout => "TIMEOUT",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Typed rejection raised by a role when a message is discarded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, thiserror::Error)]
#[error("{code} at {raised_by}: {detail}")]
pub struct ErrorNotice {
    pub code: ErrorCode,
    pub raised_by: Role,
    pub detail: String,
}

impl ErrorNotice {
    pub fn new(code: ErrorCode, raised_by: Role, detail: impl Into<String>) -> Self {
        Self { code, raised_by, detail: detail.into() }
    }

    /// `code | role | utf-8 detail`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.code.to_byte(), self.raised_by.code()];
        out.extend_from_slice(self.detail.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FramingError> {
        let [code, role, detail @ ..] = bytes else {
            return Err(FramingError::Malformed("error notice shorter than 2 bytes"));
        };
        let code = ErrorCode::from_byte(*code).ok_or(FramingError::Malformed("unknown error code"))?;
        let raised_by = Role::from_code(*role).ok_or(FramingError::Malformed("unknown role code"))?;
        let detail = String::from_utf8(detail.to_vec())
            .map_err(|_| FramingError::Malformed("error detail is not utf-8"))?;
        Ok(Self { code, raised_by, detail })
    }
}

/// Builds `map_err` closures for one role and error code.
#[derive(Clone, Copy)]
pub(crate) struct Rejector(pub Role, pub ErrorCode);

impl Rejector {
    pub(crate) fn at<E: fmt::Display>(self, what: &'static str) -> impl Fn(E) -> ErrorNotice {
        reject(self.0, self.1, what)
    }
}

pub(crate) fn reject<E: fmt::Display>(
    role: Role,
    code: ErrorCode,
    what: &'static str,
) -> impl Fn(E) -> ErrorNotice {
    move |e| ErrorNotice::new(code, role, format!("{what}: {e}"))
}

macro_rules! envelope {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq)]
        pub struct $name(pub Ciphertext);

        impl $name {
            pub fn ciphertext(&self) -> &Ciphertext {
                &self.0
            }

            pub fn to_bytes(&self) -> Vec<u8> {
                self.0.to_bytes()
            }

            pub fn from_bytes(bytes: &[u8]) -> Result<Self, FramingError> {
                Ciphertext::from_bytes(bytes).map(Self)
            }
        }
    };
}

envelope!(
    /// Personnel to master control: `{E_RV, SA_Data}` under the master's public key.
    RequestEnvelope
);
envelope!(
    /// Master control to department: `{E_RV, C_Req}` under the department's public key.
    RelayedRequest
);
envelope!(
    /// Department to master control: `{E_RV, H_v, M'_val, S_Answer}` under the master's public key.
    ResponseEnvelope
);
envelope!(
    /// Master control to personnel: the same four fields under the personnel's public key.
    ForwardedResponse
);

/// Digest binding E_RV, R and the plaintext query.
pub fn request_digest(digest: DigestFn, e_rv: &[u8], r: &[u8], query: &[u8]) -> Digest16 {
    let tuple = FieldTuple::from_fields([
        (tags::E_RV, e_rv),
        (tags::R, r),
        (tags::QUERY, query),
    ])
    .expect("tags are increasing");
    digest(&encode_fields(&tuple))
}

/// Digest binding E_RV, the mapping sine and the plaintext answer.
pub fn response_digest(digest: DigestFn, e_rv: &[u8], m_val: &[u8], answer: &[u8]) -> Digest16 {
    let tuple = FieldTuple::from_fields([
        (tags::E_RV, e_rv),
        (tags::M_VAL, m_val),
        (tags::ANSWER, answer),
    ])
    .expect("tags are increasing");
    digest(&encode_fields(&tuple))
}
