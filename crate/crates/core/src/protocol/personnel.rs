use std::sync::Arc;

use rand::Rng;

use super::{
    reject, Rejector, request_digest, response_digest, tags, ErrorCode, ErrorNotice, ForwardedResponse,
    RequestEnvelope, Role,
};
use crate::codec::{decode_fields, decode_int_list, encode_fields, FieldTuple, IntList};
use crate::crypto::{audit, md5, Ciphertext, Digest16, DigestFn, KeyPair, KeyRegistry};
use crate::mapping::{RandomSet, DEFAULT_SET_LEN};
use crate::party::PartyId;

const ROLE: Role = Role::Personnel;

/// What the personnel keeps between sending a request and accepting its
/// response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub rv: u64,
    pub e_rv: Ciphertext,
    pub r: RandomSet,
    pub target: PartyId,
    pub query: Vec<u8>,
    /// Request digest H_v.
    pub request_digest: Digest16,
}

/// The requesting side.
#[derive(Debug)]
pub struct Personnel {
    id: PartyId,
    keys: KeyPair,
    registry: Arc<KeyRegistry>,
    master: PartyId,
    set_len: usize,
    digest: DigestFn,
}

impl Personnel {
    pub fn new(id: PartyId, keys: KeyPair, registry: Arc<KeyRegistry>, master: PartyId) -> Self {
        Self { id, keys, registry, master, set_len: DEFAULT_SET_LEN, digest: md5 }
    }

    /// Size of the random set R drawn for each request.
    pub fn with_random_set_len(mut self, n: usize) -> Self {
        assert!(n >= 1, "random set needs at least one value");
        self.set_len = n;
        self
    }

    pub fn with_digest(mut self, digest: DigestFn) -> Self {
        self.digest = digest;
        self
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    /// Builds the request envelope for `query` addressed to `department`.
    pub fn build_request<R: Rng + ?Sized>(
        &self,
        department: &PartyId,
        query: &[u8],
        rng: &mut R,
    ) -> Result<(RequestEnvelope, SessionState), ErrorNotice> {
        audit::as_actor(ROLE, || {
            let unknown = reject(ROLE, ErrorCode::UnknownParty, "key lookup");
            let dept_key = self.registry.lookup(department).map_err(&unknown)?;
            let master_key = self.registry.lookup(&self.master).map_err(&unknown)?;

            let rv: u64 = rng.random();
            let e_rv = self.keys.public().encrypt(&rv.to_be_bytes());
            let e_rv_bytes = e_rv.to_bytes();
            let r = RandomSet::draw(self.set_len, rng);
            let r_bytes = r.to_bytes();
            let h_v = request_digest(self.digest, &e_rv_bytes, &r_bytes, query);

            let s_query = dept_key.encrypt(query);
            let core = FieldTuple::from_fields([
                (tags::R, r_bytes),
                (tags::S_QUERY, s_query.to_bytes()),
                (tags::H_V, h_v.0.to_vec()),
            ])
            .expect("tags are increasing");
            let sa_data = self.keys.encrypt_private(&encode_fields(&core));

            let outer = FieldTuple::from_fields([
                (tags::E_RV, e_rv_bytes),
                (tags::SA_DATA, sa_data.to_bytes()),
            ])
            .expect("tags are increasing");
            let envelope = RequestEnvelope(master_key.encrypt(&encode_fields(&outer)));

            let state = SessionState {
                rv,
                e_rv,
                r,
                target: department.clone(),
                query: query.to_vec(),
                request_digest: h_v,
            };
            Ok((envelope, state))
        })
    }

    /// Checks a forwarded response against the session it should answer and
    /// returns the disclosed information.
    pub fn validate_response(
        &self,
        fwd: &ForwardedResponse,
        session: &SessionState,
    ) -> Result<IntList, ErrorNotice> {
        audit::as_actor(ROLE, || {
            let tampered = Rejector(ROLE, ErrorCode::Tampered);
            let plain = self.keys.decrypt_private(&fwd.0).map_err(tampered.at("response envelope"))?;
            let fields = decode_fields(&plain).map_err(tampered.at("response envelope"))?;
            fields.expect_tags(&tags::RESPONSE).map_err(tampered.at("response envelope"))?;

            let e_rv_bytes = fields.require(tags::E_RV).map_err(tampered.at("E_RV"))?;
            let m_val = fields.require(tags::M_VAL).map_err(tampered.at("mapping value"))?;
            if m_val.len() != 8 {
                return Err(ErrorNotice::new(ErrorCode::Tampered, ROLE, "mapping value is not 8 bytes"));
            }
            let s_answer = fields
                .require(tags::S_ANSWER)
                .and_then(Ciphertext::from_bytes)
                .map_err(tampered.at("S_Answer"))?;
            let answer_bytes = self.keys.decrypt_private(&s_answer).map_err(tampered.at("S_Answer"))?;
            let answer = decode_int_list(&answer_bytes).map_err(tampered.at("answer"))?;

            let claimed = fields.require(tags::H_V).map_err(tampered.at("H_v"))?;
            let recomputed = response_digest(self.digest, e_rv_bytes, m_val, &answer_bytes);
            if claimed != recomputed.as_bytes() {
                return Err(ErrorNotice::new(ErrorCode::Tampered, ROLE, "response digest mismatch"));
            }

            let unknown_session = Rejector(ROLE, ErrorCode::SessionUnknown);
            let e_rv = Ciphertext::from_bytes(e_rv_bytes).map_err(unknown_session.at("E_RV"))?;
            let rv_bytes = self.keys.decrypt_private(&e_rv).map_err(unknown_session.at("E_RV"))?;
            let rv = <[u8; 8]>::try_from(rv_bytes.as_slice())
                .map(u64::from_be_bytes)
                .map_err(|_| ErrorNotice::new(ErrorCode::SessionUnknown, ROLE, "E_RV is not a nonce"))?;
            if rv != session.rv {
                return Err(ErrorNotice::new(
                    ErrorCode::SessionUnknown,
                    ROLE,
                    "response nonce does not match this session",
                ));
            }
            Ok(answer)
        })
    }
}
