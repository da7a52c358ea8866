use std::sync::Arc;

use super::{
    reject, Rejector, request_digest, response_digest, tags, ErrorCode, ErrorNotice, RelayedRequest,
    ResponseEnvelope, Role,
};
use crate::codec::{decode_fields, encode_fields, encode_int_list, FieldTuple};
use crate::crypto::{audit, md5, Ciphertext, DigestFn, KeyPair, KeyRegistry};
use crate::mapping::{eval_mapping, MappingRegistry, RandomSet};
use crate::party::PartyId;
use crate::policy::DepartmentDb;

const ROLE: Role = Role::Department;

/// The information holder.
#[derive(Debug)]
pub struct Department {
    id: PartyId,
    keys: KeyPair,
    registry: Arc<KeyRegistry>,
    db: DepartmentDb,
    mappings: MappingRegistry,
    master: PartyId,
    digest: DigestFn,
}

impl Department {
    /// `db` may hold records of other departments too; only this
    /// department's records are kept.
    pub fn new(
        id: PartyId,
        keys: KeyPair,
        registry: Arc<KeyRegistry>,
        db: &DepartmentDb,
        master: PartyId,
    ) -> Self {
        let db = db.for_department(&id);
        let mappings = db.mapping_registry();
        Self { id, keys, registry, db, mappings, master, digest: md5 }
    }

    pub fn with_digest(mut self, digest: DigestFn) -> Self {
        self.digest = digest;
        self
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn db(&self) -> &DepartmentDb {
        &self.db
    }

    /// The mapping specs this department evaluates. Replacing one makes the
    /// department answer with a value the master control will not accept.
    pub fn mappings(&self) -> &MappingRegistry {
        &self.mappings
    }

    pub fn handle_request(
        &self,
        personnel: &PartyId,
        req: &RelayedRequest,
    ) -> Result<ResponseEnvelope, ErrorNotice> {
        audit::as_actor(ROLE, || {
            let tampered = Rejector(ROLE, ErrorCode::Tampered);
            let plain = self.keys.decrypt_private(&req.0).map_err(tampered.at("relayed request"))?;
            let outer = decode_fields(&plain).map_err(tampered.at("relayed request"))?;
            outer
                .expect_tags(&[tags::E_RV, tags::C_REQ])
                .map_err(tampered.at("relayed request"))?;
            let e_rv = outer.require(tags::E_RV).map_err(tampered.at("E_RV"))?;

            let unknown = reject(ROLE, ErrorCode::UnknownParty, "key lookup");
            let master_key = self.registry.lookup(&self.master).map_err(&unknown)?;
            let personnel_key = self.registry.lookup(personnel).map_err(&unknown)?;

            let auth = Rejector(ROLE, ErrorCode::AuthFail);
            let c_req = outer
                .require(tags::C_REQ)
                .and_then(Ciphertext::from_bytes)
                .map_err(auth.at("C_Req"))?;
            let core_bytes = master_key.decrypt(&c_req).map_err(auth.at("C_Req"))?;
            let core = decode_fields(&core_bytes).map_err(auth.at("C_Req"))?;
            core.expect_tags(&tags::CORE).map_err(auth.at("C_Req"))?;

            let r_bytes = core.require(tags::R).map_err(tampered.at("random set"))?;
            let r = RandomSet::from_bytes(r_bytes).map_err(tampered.at("random set"))?;
            let s_query = core
                .require(tags::S_QUERY)
                .and_then(Ciphertext::from_bytes)
                .map_err(tampered.at("S_Query"))?;
            let query = self.keys.decrypt_private(&s_query).map_err(tampered.at("S_Query"))?;
            let claimed = core.require(tags::H_V).map_err(tampered.at("H_v"))?;
            if claimed != request_digest(self.digest, e_rv, r_bytes, &query).as_bytes() {
                return Err(ErrorNotice::new(ErrorCode::Tampered, ROLE, "request digest mismatch"));
            }

            let policy_fail = Rejector(ROLE, ErrorCode::PolicyFail);
            let subject = std::str::from_utf8(&query).map_err(policy_fail.at("query"))?;
            let record = self.db.record(&self.id, subject).ok_or_else(|| {
                ErrorNotice::new(ErrorCode::PolicyFail, ROLE, format!("no record for subject {subject:?}"))
            })?;
            let shared = record.filter_shared(personnel).map_err(policy_fail.at("policy"))?;

            let mapping_fail = Rejector(ROLE, ErrorCode::MappingFail);
            let spec = self.mappings.lookup(personnel, &self.id).map_err(mapping_fail.at("mapping lookup"))?;
            let value = eval_mapping(&spec, &r).map_err(mapping_fail.at("mapping evaluation"))?;
            let m_val = value.sine_bytes();

            let answer = encode_int_list(&shared);
            let h_v = response_digest(self.digest, e_rv, &m_val, &answer);
            let s_answer = personnel_key.encrypt(&answer);
            let response = FieldTuple::from_fields([
                (tags::E_RV, e_rv.to_vec()),
                (tags::H_V, h_v.0.to_vec()),
                (tags::M_VAL, m_val.to_vec()),
                (tags::S_ANSWER, s_answer.to_bytes()),
            ])
            .expect("tags are increasing");
            Ok(ResponseEnvelope(master_key.encrypt(&encode_fields(&response))))
        })
    }
}
