use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{
    reject, Rejector, tags, ErrorCode, ErrorNotice, ForwardedResponse, RelayedRequest, RequestEnvelope,
    ResponseEnvelope, Role,
};
use crate::codec::{decode_fields, encode_fields, FieldTuple};
use crate::crypto::{audit, md5, Ciphertext, Digest16, KeyPair, KeyRegistry};
use crate::mapping::{sine_from_bytes, verify_mapping, MappingRegistry, RandomSet, DEFAULT_TOLERANCE};
use crate::party::PartyId;

const ROLE: Role = Role::Master;

/// An authenticated request waiting for its response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McSession {
    pub personnel: PartyId,
    pub department: PartyId,
    pub r: RandomSet,
    pub e_rv: Vec<u8>,
}

/// The relaying authority between personnel and departments.
#[derive(Debug)]
pub struct MasterControl {
    id: PartyId,
    keys: KeyPair,
    registry: Arc<KeyRegistry>,
    mappings: MappingRegistry,
    sessions: Mutex<HashMap<Digest16, McSession>>,
    tolerance: f64,
}

impl MasterControl {
    pub fn new(id: PartyId, keys: KeyPair, registry: Arc<KeyRegistry>, mappings: MappingRegistry) -> Self {
        Self {
            id,
            keys,
            registry,
            mappings,
            sessions: Mutex::new(HashMap::new()),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        assert!(tol > 0.0, "tolerance must be positive");
        self.tolerance = tol;
        self
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn mappings(&self) -> &MappingRegistry {
        &self.mappings
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session lock poisoned").len()
    }

    /// Forgets an in-flight session, e.g. after a downstream timeout.
    pub fn drop_session(&self, e_rv: &[u8]) -> Option<McSession> {
        self.sessions.lock().expect("session lock poisoned").remove(&md5(e_rv))
    }

    /// Authenticates the personnel and re-signs the request core for the
    /// department. Returns a copy of the session it opened.
    pub fn relay_request(
        &self,
        personnel: &PartyId,
        department: &PartyId,
        env: &RequestEnvelope,
    ) -> Result<(RelayedRequest, McSession), ErrorNotice> {
        audit::as_actor(ROLE, || {
            let unknown = reject(ROLE, ErrorCode::UnknownParty, "key lookup");
            let personnel_key = self.registry.lookup(personnel).map_err(&unknown)?;
            let department_key = self.registry.lookup(department).map_err(&unknown)?;

            let tampered = Rejector(ROLE, ErrorCode::Tampered);
            let plain = self.keys.decrypt_private(&env.0).map_err(tampered.at("request envelope"))?;
            let outer = decode_fields(&plain).map_err(tampered.at("request envelope"))?;
            outer
                .expect_tags(&[tags::E_RV, tags::SA_DATA])
                .map_err(tampered.at("request envelope"))?;
            let e_rv = outer.require(tags::E_RV).map_err(tampered.at("E_RV"))?;
            Ciphertext::from_bytes(e_rv).map_err(tampered.at("E_RV"))?;

            let auth = Rejector(ROLE, ErrorCode::AuthFail);
            let sa_data = outer
                .require(tags::SA_DATA)
                .and_then(Ciphertext::from_bytes)
                .map_err(auth.at("SA_Data"))?;
            let core_bytes = personnel_key.decrypt(&sa_data).map_err(auth.at("SA_Data"))?;
            let core = decode_fields(&core_bytes).map_err(auth.at("SA_Data"))?;
            core.expect_tags(&tags::CORE).map_err(auth.at("SA_Data"))?;
            let r = core
                .require(tags::R)
                .map_err(auth.at("random set"))
                .and_then(|b| RandomSet::from_bytes(b).map_err(auth.at("random set")))?;

            let session = McSession {
                personnel: personnel.clone(),
                department: department.clone(),
                r,
                e_rv: e_rv.to_vec(),
            };
            {
                let mut sessions = self.sessions.lock().expect("session lock poisoned");
                let key = md5(e_rv);
                if sessions.contains_key(&key) {
                    return Err(ErrorNotice::new(ErrorCode::AuthFail, ROLE, "E_RV already in flight"));
                }
                sessions.insert(key, session.clone());
            }

            let c_req = self.keys.encrypt_private(&core_bytes);
            let relayed = FieldTuple::from_fields([
                (tags::E_RV, e_rv.to_vec()),
                (tags::C_REQ, c_req.to_bytes()),
            ])
            .expect("tags are increasing");
            Ok((RelayedRequest(department_key.encrypt(&encode_fields(&relayed))), session))
        })
    }

    /// Verifies the department's mapping value and re-encrypts the response
    /// for the personnel. The session is consumed only on success.
    pub fn relay_response(
        &self,
        res: &ResponseEnvelope,
    ) -> Result<(ForwardedResponse, McSession), ErrorNotice> {
        audit::as_actor(ROLE, || {
            let tampered = Rejector(ROLE, ErrorCode::Tampered);
            let plain = self.keys.decrypt_private(&res.0).map_err(tampered.at("response envelope"))?;
            let fields = decode_fields(&plain).map_err(tampered.at("response envelope"))?;
            fields.expect_tags(&tags::RESPONSE).map_err(tampered.at("response envelope"))?;
            let e_rv = fields.require(tags::E_RV).map_err(tampered.at("E_RV"))?;
            let key = md5(e_rv);

            let mut sessions = self.sessions.lock().expect("session lock poisoned");
            let session = sessions.get(&key).ok_or_else(|| {
                ErrorNotice::new(ErrorCode::SessionUnknown, ROLE, "no request in flight for E_RV")
            })?;

            let mapping_fail = Rejector(ROLE, ErrorCode::MappingFail);
            let spec = self
                .mappings
                .lookup(&session.personnel, &session.department)
                .map_err(mapping_fail.at("mapping lookup"))?;
            let claimed = fields
                .require(tags::M_VAL)
                .and_then(sine_from_bytes)
                .map_err(mapping_fail.at("mapping value"))?;
            let ok = verify_mapping(&spec, &session.r, claimed, self.tolerance)
                .map_err(mapping_fail.at("mapping evaluation"))?;
            if !ok {
                return Err(ErrorNotice::new(ErrorCode::MappingFail, ROLE, "mapping value does not verify"));
            }

            let personnel_key = self
                .registry
                .lookup(&session.personnel)
                .map_err(reject(ROLE, ErrorCode::UnknownParty, "key lookup"))?;
            let session = sessions.remove(&key).expect("session present under lock");
            drop(sessions);
            Ok((ForwardedResponse(personnel_key.encrypt(&plain)), session))
        })
    }
}
