//! Cryptographic primitives: MD5, two-direction textbook RSA, the public-key
//! registry standing in for a certificate authority, and key-store files.

pub mod audit;
pub mod keystore;
mod md5;
mod registry;
mod rsa;

use std::fmt;

pub use self::md5::{md5, Md5};
pub use registry::KeyRegistry;
pub use rsa::{
    is_probable_prime, keygen, keygen_with, Ciphertext, Direction, KeyPair, PublicKey,
    DEFAULT_KEY_BITS, MIN_KEY_BITS, PUBLIC_EXPONENT,
};

use crate::codec::FramingError;
use crate::party::PartyId;

#[derive(Debug, thiserror::Error)]
pub enum CryptoError {
    #[error("ciphertext chunk error: {0}")]
    Chunk(String),
    #[error("invalid key parameter: {0}")]
    Parameter(String),
    #[error("party {0} is already registered")]
    DuplicateParty(PartyId),
    #[error("party {0} is not registered")]
    UnknownParty(PartyId),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error("key store {path}: {message}")]
    KeyStore { path: String, message: String },
}

/// A 16-byte message digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest16(pub [u8; 16]);

impl Digest16 {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl TryFrom<&[u8]> for Digest16 {
    type Error = FramingError;

    fn try_from(bytes: &[u8]) -> Result<Self, Self::Error> {
        bytes
            .try_into()
            .map(Digest16)
            .map_err(|_| FramingError::Malformed("digest must be 16 bytes"))
    }
}

impl fmt::Debug for Digest16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest16({})", self.to_hex())
    }
}

impl fmt::Display for Digest16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A 16-byte digest function. Protocol roles default to [`md5`]; any other
/// function can be swapped in as long as every role uses the same one.
pub type DigestFn = fn(&[u8]) -> Digest16;
