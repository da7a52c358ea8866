//! Role- and cooperation-based secure information sharing.
//!
//! A security personnel (SP) asks a government department for confidential
//! information about a subject. The request travels through a master control
//! (MC) which authenticates the personnel, countersigns the request and later
//! checks that the response came from the intended department by recomputing a
//! per-pair secret mapping value. The department discloses only the slice of
//! its records that the personnel's grade allows.
//!
//! Layout:
//!
//! * [`codec`] - canonical field tuples, integer lists and wire framing.
//! * [`crypto`] - MD5, textbook RSA in both key directions, key registry and
//!   key-store files.
//! * [`mapping`] - the secret operator-sequence mapping and its sine check.
//! * [`policy`] - department records and grade-based disclosure spans.
//! * [`protocol`] - the three role state machines and their envelopes.
//! * [`sim`] - deterministic in-process bus, adversary injection, scenario
//!   runner and TCP endpoints.
//!
//! None of this is production cryptography: MD5 is broken and unpadded RSA
//! is malleable. Both are kept because the protocol is defined in terms of
//! them.

pub mod codec;
pub mod crypto;
pub mod mapping;
pub mod policy;
pub mod protocol;
pub mod sim;
pub mod table1;

mod party;

pub use codec::{FieldTuple, FramingError, IntList};
pub use crypto::{Ciphertext, CryptoError, Digest16, Direction, KeyPair, KeyRegistry, PublicKey};
pub use mapping::{MappingRegistry, MappingSpec, MappingValue, Op, RandomSet};
pub use party::{PartyId, PartyIdError, Role};
pub use policy::{DepartmentDb, DepartmentRecord, PolicyEntry};
pub use protocol::{ErrorCode, ErrorNotice};
