use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::config::{ConfigError, Scenario};
use crate::crypto::keystore::KeyStore;
use crate::crypto::{keygen, CryptoError, KeyPair, KeyRegistry};
use crate::party::PartyId;
use crate::protocol::{Department, MasterControl, Personnel, Role};

/// Key pairs for every party of a scenario.
#[derive(Debug, Clone)]
pub struct KeySet {
    pairs: BTreeMap<PartyId, KeyPair>,
}

impl KeySet {
    /// Derives one key seed per party, in sorted party order, from the
    /// scenario seed; `parties` entries in the config override it.
    pub fn derive(sc: &Scenario) -> Result<Self, ConfigError> {
        Ok(Self::from_seed(sc.config.seed, sc.config.key_bits, &sc.parties(), &sc.config.parties)?)
    }

    /// Same derivation as [`KeySet::derive`] for an explicit party list.
    pub fn from_seed(
        seed: u64,
        bits: u32,
        parties: &[PartyId],
        overrides: &BTreeMap<PartyId, u64>,
    ) -> Result<Self, CryptoError> {
        let mut sorted = parties.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut pairs = BTreeMap::new();
        for party in sorted {
            let drawn: u64 = rng.random();
            let key_seed = overrides.get(&party).copied().unwrap_or(drawn);
            pairs.insert(party, keygen(bits, key_seed)?);
        }
        Ok(Self { pairs })
    }

    /// Loads private keys for `parties` only.
    pub fn load(store: &KeyStore, parties: &[PartyId]) -> Result<Self, ConfigError> {
        let mut pairs = BTreeMap::new();
        for p in parties {
            pairs.insert(p.clone(), store.load_private(p)?);
        }
        Ok(Self { pairs })
    }

    pub fn get(&self, party: &PartyId) -> Option<&KeyPair> {
        self.pairs.get(party)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartyId, &KeyPair)> {
        self.pairs.iter()
    }

    pub fn registry(&self) -> KeyRegistry {
        let reg = KeyRegistry::new();
        for (p, k) in &self.pairs {
            reg.register(p.clone(), k.public().clone()).expect("party ids are unique");
        }
        reg
    }
}

/// Role instances for one scenario.
///
/// A world built with [`World::build`] holds every role and every private key
/// (the simulator needs them to reseal tampered envelopes). One built with
/// [`World::build_for`] holds only the roles of one endpoint.
#[derive(Debug)]
pub struct World {
    pub registry: Arc<KeyRegistry>,
    pub master: Option<MasterControl>,
    pub personnel: BTreeMap<PartyId, Personnel>,
    pub departments: BTreeMap<PartyId, Department>,
    keys: KeySet,
}

impl World {
    pub fn build(sc: &Scenario) -> Result<Self, ConfigError> {
        Self::build_for(sc, &[Role::Personnel, Role::Master, Role::Department])
    }

    pub fn build_for(sc: &Scenario, roles: &[Role]) -> Result<Self, ConfigError> {
        let cfg = &sc.config;
        let wanted: Vec<PartyId> = sc
            .parties()
            .into_iter()
            .filter(|p| roles.contains(&role_of(sc, p)))
            .collect();
        let (keys, registry) = match &sc.keys_dir {
            Some(dir) => {
                let store = KeyStore::new(dir);
                let registry = store.load_registry()?;
                for p in sc.parties() {
                    if !registry.contains(&p) {
                        return Err(ConfigError::Keys(CryptoError::UnknownParty(p)));
                    }
                }
                (KeySet::load(&store, &wanted)?, registry)
            }
            None => {
                let all = KeySet::derive(sc)?;
                let registry = all.registry();
                let pairs = all.pairs.into_iter().filter(|(p, _)| wanted.contains(p)).collect();
                (KeySet { pairs }, registry)
            }
        };
        let registry = Arc::new(registry);
        let pair = |p: &PartyId| keys.get(p).cloned().expect("key loaded for wanted party");

        let master = roles.contains(&Role::Master).then(|| {
            MasterControl::new(cfg.master.clone(), pair(&cfg.master), registry.clone(), sc.db.mapping_registry())
        });
        let personnel = if roles.contains(&Role::Personnel) {
            sc.db
                .personnel()
                .into_iter()
                .map(|p| {
                    let role = Personnel::new(p.clone(), pair(&p), registry.clone(), cfg.master.clone())
                        .with_random_set_len(cfg.random_set_len);
                    (p, role)
                })
                .collect()
        } else {
            BTreeMap::new()
        };
        let departments = if roles.contains(&Role::Department) {
            sc.db
                .departments()
                .into_iter()
                .map(|d| {
                    let role = Department::new(d.clone(), pair(&d), registry.clone(), &sc.db, cfg.master.clone());
                    (d, role)
                })
                .collect()
        } else {
            BTreeMap::new()
        };
        Ok(Self { registry, master, personnel, departments, keys })
    }

    pub fn keys(&self) -> &KeySet {
        &self.keys
    }

    pub fn master(&self) -> &MasterControl {
        self.master.as_ref().expect("world has no master control")
    }
}

fn role_of(sc: &Scenario, party: &PartyId) -> Role {
    if *party == sc.config.master {
        Role::Master
    } else if sc.db.departments().contains(party) {
        Role::Department
    } else {
        Role::Personnel
    }
}
