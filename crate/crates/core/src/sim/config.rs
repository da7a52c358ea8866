//! Scenario files.
//!
//! ```json
//! {
//!   "seed": 42,
//!   "key_bits": 512,
//!   "department_db": "table1.json",
//!   "exchanges": [{"personnel": "SP1", "department": "IB", "query": "IB-subject-1"}],
//!   "attacks": [{"kind": "tamper", "hop": 2, "field": 5, "bit": "random"}],
//!   "endpoints": {"personnel": "127.0.0.1:7401", "master": "127.0.0.1:7402", "department": "127.0.0.1:7403"}
//! }
//! ```
//!
//! `department_db` and `keys` are resolved against the directory holding the
//! scenario file. Without `keys`, every party's key pair is derived from
//! `seed` (or from its entry in `parties`). An exchange without `query` asks
//! for the first subject the department keeps for that personnel. Without
//! `exchanges`, one exchange runs per policy in the DB, in file order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bus::ExchangeOutcome;
use crate::crypto::{CryptoError, DEFAULT_KEY_BITS};
use crate::mapping::DEFAULT_SET_LEN;
use crate::party::PartyId;
use crate::policy::{DepartmentDb, PolicyError};
use crate::protocol::{tags, ErrorCode, Role};

pub const DEFAULT_HOP_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("scenario error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Keys(#[from] CryptoError),
    #[error("unknown {what} {id}")]
    UnknownParty { what: &'static str, id: String },
    #[error("invalid attack: {0}")]
    InvalidAttack(String),
    #[error("mapping for ({personnel}, {department}) has {ops} operators but the random set has {set_len} values")]
    MappingArity { personnel: PartyId, department: PartyId, ops: usize, set_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_key_bits")]
    pub key_bits: u32,
    #[serde(default = "default_set_len")]
    pub random_set_len: usize,
    pub department_db: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys: Option<PathBuf>,
    #[serde(default = "default_master")]
    pub master: PartyId,
    /// Per-party key seeds overriding the ones drawn from `seed`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parties: BTreeMap<PartyId, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchanges: Option<Vec<ExchangeSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attacks: Vec<AttackSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<Endpoints>,
    #[serde(default = "default_timeout")]
    pub hop_timeout_ms: u64,
}

fn default_key_bits() -> u32 {
    DEFAULT_KEY_BITS
}

fn default_set_len() -> usize {
    DEFAULT_SET_LEN
}

fn default_master() -> PartyId {
    PartyId::new("MC").expect("valid id")
}

fn default_timeout() -> u64 {
    DEFAULT_HOP_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSpec {
    pub personnel: PartyId,
    pub department: PartyId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub personnel: String,
    pub master: String,
    pub department: String,
}

impl Endpoints {
    pub fn for_role(&self, role: Role) -> &str {
        match role {
            Role::Personnel => &self.personnel,
            Role::Master => &self.master,
            Role::Department => &self.department,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Tamper,
    Replay,
    Impersonate,
    WrongMapping,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] =
        [AttackKind::Tamper, AttackKind::Replay, AttackKind::Impersonate, AttackKind::WrongMapping];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Tamper => "tamper",
            AttackKind::Replay => "replay",
            AttackKind::Impersonate => "impersonate",
            AttackKind::WrongMapping => "wrong-mapping",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown attack kind {s:?} (tamper, replay, impersonate, wrong-mapping)"))
    }
}

/// A number, or the word `random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(
    try_from = "NumberOrWord",
    into = "NumberOrWord",
    bound(serialize = "T: Copy + Into<u64>", deserialize = "T: TryFrom<u64>")
)]
pub enum Pick<T> {
    #[default]
    Random,
    Fixed(T),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NumberOrWord {
    Number(u64),
    Word(String),
}

impl<T: TryFrom<u64>> TryFrom<NumberOrWord> for Pick<T> {
    type Error = String;

    fn try_from(v: NumberOrWord) -> Result<Self, Self::Error> {
        match v {
            NumberOrWord::Word(w) if w == "random" => Ok(Pick::Random),
            NumberOrWord::Word(w) => Err(format!("expected a number or \"random\", got {w:?}")),
            NumberOrWord::Number(n) => T::try_from(n).map(Pick::Fixed).map_err(|_| format!("{n} is out of range")),
        }
    }
}

impl<T: Into<u64>> From<Pick<T>> for NumberOrWord {
    fn from(p: Pick<T>) -> Self {
        match p {
            Pick::Random => NumberOrWord::Word("random".into()),
            Pick::Fixed(n) => NumberOrWord::Number(n.into()),
        }
    }
}

impl<T: FromStr> FromStr for Pick<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random" {
            return Ok(Pick::Random);
        }
        let s_num = s.strip_prefix("0x").map(|h| u64::from_str_radix(h, 16).map(|v| v.to_string()));
        let text = match s_num {
            Some(Ok(dec)) => dec,
            Some(Err(_)) => return Err(format!("bad number {s:?}")),
            None => s.to_string(),
        };
        text.parse().map(Pick::Fixed).map_err(|_| format!("expected a number or \"random\", got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub hop: u8,
    /// Envelope tag to corrupt, or `random` for a raw bit flip anywhere in the
    /// hop's ciphertext.
    #[serde(default)]
    pub field: Pick<u8>,
    /// Bit offset inside the chosen field or payload.
    #[serde(default)]
    pub bit: Pick<u32>,
    /// Index of the exchange to attack.
    #[serde(default)]
    pub exchange: usize,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, hop: u8) -> Self {
        Self { kind, hop, field: Pick::Random, bit: Pick::Random, exchange: 0 }
    }

    pub fn with_field(mut self, field: Pick<u8>) -> Self {
        self.field = field;
        self
    }

    pub fn with_bit(mut self, bit: Pick<u32>) -> Self {
        self.bit = bit;
        self
    }

    /// Tags an attacker can reach inside the hop's envelope.
    pub fn tags_at_hop(hop: u8) -> &'static [u8] {
        match hop {
            1 => &[tags::E_RV, tags::SA_DATA, tags::R, tags::S_QUERY, tags::H_V],
            2 => &[tags::E_RV, tags::C_REQ, tags::R, tags::S_QUERY, tags::H_V],
            3 | 4 => &tags::RESPONSE,
            _ => &[],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::InvalidAttack(m));
        let hops: &[u8] = match self.kind {
            AttackKind::Tamper => &[1, 2, 3, 4],
            AttackKind::Replay => &[3, 4],
            AttackKind::Impersonate => &[1],
            AttackKind::WrongMapping => &[3],
        };
        if !hops.contains(&self.hop) {
            return bad(format!("{} is not possible at hop {} (hops {:?})", self.kind, self.hop, hops));
        }
        match self.kind {
            AttackKind::Tamper => {
                if let Pick::Fixed(tag) = self.field {
                    if !Self::tags_at_hop(self.hop).contains(&tag) {
                        return bad(format!("tag 0x{tag:02x} is not carried at hop {}", self.hop));
                    }
                }
            }
            _ => {
                if self.field != Pick::Random || self.bit != Pick::Random {
                    return bad(format!("{} takes no field or bit", self.kind));
                }
            }
        }
        Ok(())
    }

    /// Whether the exchange outcome counts as this attack being caught.
    pub fn detected(&self, outcome: &ExchangeOutcome) -> bool {
        let ExchangeOutcome::Error(e) = outcome else { return false };
        match self.kind {
            AttackKind::Tamper => matches!(
                e.code,
                ErrorCode::Tampered | ErrorCode::AuthFail | ErrorCode::MappingFail | ErrorCode::SessionUnknown
            ),
            AttackKind::Impersonate => e.code == ErrorCode::AuthFail && e.raised_by == Role::Master,
            AttackKind::WrongMapping => e.code == ErrorCode::MappingFail && e.raised_by == Role::Master,
            AttackKind::Replay => {
                let at = if self.hop == 3 { Role::Master } else { Role::Personnel };
                e.code == ErrorCode::SessionUnknown && e.raised_by == at
            }
        }
    }
}

/// A validated scenario with its department DB loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub db: DepartmentDb,
    pub exchanges: Vec<ResolvedExchange>,
    /// Key directory, resolved against the scenario file.
    pub keys_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedExchange {
    pub personnel: PartyId,
    pub department: PartyId,
    pub query: String,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let config = parse_config(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let db = DepartmentDb::load(base.join(&config.department_db))?;
        let keys_dir = config.keys.as_ref().map(|k| base.join(k));
        Self::new(config, db, keys_dir)
    }

    /// Builds a scenario around an already loaded DB. `config.department_db`
    /// is kept only as a label.
    pub fn new(config: ScenarioConfig, db: DepartmentDb, keys_dir: Option<PathBuf>) -> Result<Self, ConfigError> {
        if config.random_set_len == 0 {
            return Err(ConfigError::Schema { path: "$.random_set_len".into(), message: "must be at least 1".into() });
        }
        for rec in db.records() {
            for p in rec.personnel_policies.values() {
                if p.mapping.arity() != config.random_set_len {
                    return Err(ConfigError::MappingArity {
                        personnel: p.mapping.personnel.clone(),
                        department: p.mapping.department.clone(),
                        ops: p.mapping.ops.len(),
                        set_len: config.random_set_len,
                    });
                }
            }
        }
        let personnel = db.personnel();
        let departments = db.departments();
        if personnel.contains(&config.master) || departments.contains(&config.master) {
            return Err(ConfigError::Schema {
                path: "$.master".into(),
                message: format!("{} is also a personnel or department", config.master),
            });
        }
        let exchanges = match &config.exchanges {
            Some(list) => list
                .iter()
                .map(|ex| {
                    if !personnel.contains(&ex.personnel) {
                        return Err(ConfigError::UnknownParty { what: "personnel", id: ex.personnel.to_string() });
                    }
                    if !departments.contains(&ex.department) {
                        return Err(ConfigError::UnknownParty { what: "department", id: ex.department.to_string() });
                    }
                    let query = match &ex.query {
                        Some(q) => q.clone(),
                        None => db.subject_for(&ex.personnel, &ex.department).unwrap_or_default().to_string(),
                    };
                    Ok(ResolvedExchange { personnel: ex.personnel.clone(), department: ex.department.clone(), query })
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => db
                .records()
                .iter()
                .flat_map(|r| {
                    r.personnel_policies.keys().map(|p| ResolvedExchange {
                        personnel: p.clone(),
                        department: r.department.clone(),
                        query: r.subject.clone(),
                    })
                })
                .collect(),
        };
        for id in config.parties.keys() {
            if *id != config.master && !personnel.contains(id) && !departments.contains(id) {
                return Err(ConfigError::UnknownParty { what: "party", id: id.to_string() });
            }
        }
        for a in &config.attacks {
            a.validate()?;
            if a.exchange >= exchanges.len() {
                return Err(ConfigError::InvalidAttack(format!(
                    "exchange {} does not exist ({} exchanges)",
                    a.exchange,
                    exchanges.len()
                )));
            }
        }
        Ok(Self { config, db, exchanges, keys_dir })
    }

    /// Every party in sorted order.
    pub fn parties(&self) -> Vec<PartyId> {
        let mut all: Vec<PartyId> = self.db.personnel().into_iter().chain(self.db.departments()).collect();
        all.push(self.config.master.clone());
        all.sort();
        all
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "$".to_string() } else { format!("$.{inner}") };
        ConfigError::Schema { path, message: e.into_inner().to_string() }
    })
}

impl ScenarioConfig {
    /// Scenario defaults with the given seed and DB label.
    pub fn new(seed: u64, department_db: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            key_bits: DEFAULT_KEY_BITS,
            random_set_len: DEFAULT_SET_LEN,
            department_db: department_db.into(),
            keys: None,
            master: default_master(),
            parties: BTreeMap::new(),
            exchanges: None,
            attacks: Vec::new(),
            endpoints: None,
            hop_timeout_ms: DEFAULT_HOP_TIMEOUT_MS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table1::fixture_db;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"seed": 7, "department_db": "db.json"}"#).unwrap();
        assert_eq!(cfg.key_bits, 512);
        assert_eq!(cfg.random_set_len, 5);
        assert_eq!(cfg.master.as_str(), "MC");
        assert_eq!(cfg.hop_timeout_ms, 5000);
        let sc = Scenario::new(cfg, fixture_db().unwrap(), None).unwrap();
        assert_eq!(sc.exchanges.len(), 10);
        assert_eq!(sc.parties().len(), 9);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let err = parse_config(r#"{"seed": 7, "department_db": "d", "attacks": [{"kind": "tamper", "hop": 2, "field": "x"}]}"#)
            .unwrap_err();
        match err {
            ConfigError::Schema { path, .. } => assert!(path.starts_with("$.attacks[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config(r#"{"seed": 7}"#).is_err());
        assert!(parse_config(r#"{"seed": 7, "department_db": "d", "colour": 1}"#).is_err());
    }

    #[test]
    fn unknown_parties_are_config_errors() {
        let mut cfg = ScenarioConfig::new(1, "db");
        cfg.exchanges = Some(vec![ExchangeSpec {
            personnel: PartyId::new("SP9").unwrap(),
            department: PartyId::new("IB").unwrap(),
            query: None,
        }]);
        assert!(matches!(
            Scenario::new(cfg.clone(), fixture_db().unwrap(), None),
            Err(ConfigError::UnknownParty { what: "personnel", .. })
        ));
        cfg.exchanges = None;
        cfg.parties.insert(PartyId::new("ghost").unwrap(), 3);
        assert!(matches!(Scenario::new(cfg, fixture_db().unwrap(), None), Err(ConfigError::UnknownParty { .. })));
    }

    #[test]
    fn mapping_arity_must_match_set_len() {
        let mut cfg = ScenarioConfig::new(1, "db");
        cfg.random_set_len = 4;
        assert!(matches!(
            Scenario::new(cfg, fixture_db().unwrap(), None),
            Err(ConfigError::MappingArity { .. })
        ));
    }

    #[test]
    fn attack_validation() {
        use AttackKind::*;
        assert!(AttackSpec::new(Tamper, 2).with_field(Pick::Fixed(5)).validate().is_ok());
        assert!(AttackSpec::new(Tamper, 2).with_field(Pick::Fixed(2)).validate().is_err());
        assert!(AttackSpec::new(Tamper, 5).validate().is_err());
        assert!(AttackSpec::new(Replay, 4).validate().is_ok());
        assert!(AttackSpec::new(Replay, 1).validate().is_err());
        assert!(AttackSpec::new(Impersonate, 2).validate().is_err());
        assert!(AttackSpec::new(WrongMapping, 3).validate().is_ok());
        assert!(AttackSpec::new(WrongMapping, 3).with_bit(Pick::Fixed(1)).validate().is_err());

        let mut cfg = ScenarioConfig::new(1, "db");
        cfg.attacks.push(AttackSpec { exchange: 99, ..AttackSpec::new(Replay, 4) });
        assert!(matches!(Scenario::new(cfg, fixture_db().unwrap(), None), Err(ConfigError::InvalidAttack(_))));
    }

    #[test]
    fn pick_parsing() {
        assert_eq!("random".parse::<Pick<u8>>().unwrap(), Pick::Random);
        assert_eq!("5".parse::<Pick<u8>>().unwrap(), Pick::Fixed(5));
        assert_eq!("0x05".parse::<Pick<u8>>().unwrap(), Pick::Fixed(5));
        assert!("300".parse::<Pick<u8>>().is_err());
        let spec: AttackSpec = serde_json::from_str(r#"{"kind":"tamper","hop":1,"field":6,"bit":3}"#).unwrap();
        assert_eq!((spec.field, spec.bit), (Pick::Fixed(6), Pick::Fixed(3)));
        let back = serde_json::to_string(&AttackSpec::new(AttackKind::WrongMapping, 3)).unwrap();
        assert!(back.contains(r#""field":"random""#), "{back}");
    }
}
