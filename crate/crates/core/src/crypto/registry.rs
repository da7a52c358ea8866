use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{CryptoError, PublicKey};
use crate::party::PartyId;

/// Directory of public keys, standing in for a certificate authority.
///
/// Register and lookup are linearizable; lookups may run concurrently.
#[derive(Debug, Default)]
pub struct KeyRegistry {
    keys: RwLock<BTreeMap<PartyId, Arc<PublicKey>>>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, party: PartyId, key: PublicKey) -> Result<(), CryptoError> {
        let mut keys = self.keys.write().expect("registry lock poisoned");
        if keys.contains_key(&party) {
            return Err(CryptoError::DuplicateParty(party));
        }
        keys.insert(party, Arc::new(key));
        Ok(())
    }

    pub fn lookup(&self, party: &PartyId) -> Result<Arc<PublicKey>, CryptoError> {
        self.keys
            .read()
            .expect("registry lock poisoned")
            .get(party)
            .cloned()
            .ok_or_else(|| CryptoError::UnknownParty(party.clone()))
    }

    pub fn contains(&self, party: &PartyId) -> bool {
        self.keys.read().expect("registry lock poisoned").contains_key(party)
    }

    pub fn parties(&self) -> Vec<PartyId> {
        self.keys.read().expect("registry lock poisoned").keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.keys.read().expect("registry lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;

    fn id(s: &str) -> PartyId {
        PartyId::new(s).unwrap()
    }

    #[test]
    fn register_then_lookup() {
        let reg = KeyRegistry::new();
        let kp = keygen(128, 1).unwrap();
        reg.register(id("SP1"), kp.public().clone()).unwrap();
        assert_eq!(*reg.lookup(&id("SP1")).unwrap(), *kp.public());
    }

    #[test]
    fn lookup_on_empty_registry_fails() {
        let reg = KeyRegistry::new();
        assert!(matches!(reg.lookup(&id("MC")), Err(CryptoError::UnknownParty(p)) if p.as_str() == "MC"));
    }

    #[test]
    fn double_register_fails() {
        let reg = KeyRegistry::new();
        let kp = keygen(128, 1).unwrap();
        reg.register(id("IB"), kp.public().clone()).unwrap();
        let err = reg.register(id("IB"), keygen(128, 2).unwrap().public().clone());
        assert!(matches!(err, Err(CryptoError::DuplicateParty(_))));
        // the first registration is untouched
        assert_eq!(*reg.lookup(&id("IB")).unwrap(), *kp.public());
    }

    #[test]
    fn concurrent_registration_is_linearizable() {
        let reg = Arc::new(KeyRegistry::new());
        let key = keygen(64, 5).unwrap().public().clone();
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let reg = Arc::clone(&reg);
                let key = key.clone();
                std::thread::spawn(move || {
                    let shared = reg.register(id("shared"), key.clone()).is_ok();
                    reg.register(id(&format!("p{i}")), key).unwrap();
                    shared
                })
            })
            .collect();
        let winners = handles.into_iter().map(|h| h.join().unwrap()).filter(|&w| w).count();
        assert_eq!(winners, 1);
        assert_eq!(reg.len(), 9);
    }
}
