//! Deterministic in-process bus, adversary injection, scenario runner and
//! TCP endpoints.
//!
//! All randomness of a run comes from the scenario seed. Key seeds come from
//! `ChaCha20Rng::seed_from_u64(seed)` (stream 0). The exchange nonces and
//! random sets use stream 1 and attack choices use stream 2 of the same seed.
//! The same seed therefore gives byte-identical transcripts.
//!
//! Hops:
//!
//! | hop | from       | to         | message   |
//! |-----|------------|------------|-----------|
//! | 1   | personnel  | master     | Request   |
//! | 2   | master     | department | Relayed   |
//! | 3   | department | master     | Response  |
//! | 4   | master     | personnel  | Forwarded |

mod bus;
pub mod config;
pub mod tcp;
mod world;

pub use bus::{
    attack_trials, hop_roles, inject, run_rngs, run_scenario, ExchangeOutcome, ExchangeResult, HopOutcome,
    Simulator, Transcript, TranscriptEntry, TrialSummary,
};
pub use config::{
    AttackKind, AttackSpec, ConfigError, Endpoints, ExchangeSpec, Pick, ResolvedExchange, Scenario, ScenarioConfig,
};
pub use world::{KeySet, World};

use crate::table1;

/// The ten reference exchanges over the bundled fixture, with derived keys.
pub fn table1_scenario(seed: u64, key_bits: u32) -> Scenario {
    let mut cfg = ScenarioConfig::new(seed, "fixtures/table1.json");
    cfg.key_bits = key_bits;
    cfg.exchanges = Some(
        table1::ROWS
            .iter()
            .map(|r| ExchangeSpec { personnel: r.personnel_id(), department: r.department_id(), query: None })
            .collect(),
    );
    Scenario::new(cfg, table1::fixture_db().expect("fixture parses"), None).expect("fixture scenario is valid")
}
