use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::config::{AttackKind, AttackSpec, ConfigError, Pick, ResolvedExchange, Scenario};
use super::world::World;
use crate::codec::{decode_fields, encode_fields, FramingError, IntList};
use crate::crypto::Ciphertext;
use crate::party::PartyId;
use crate::protocol::wire::{MessageKind, WireMessage};
use crate::protocol::{
    tags, ErrorCode, ErrorNotice, ForwardedResponse, Personnel, RelayedRequest, RequestEnvelope,
    ResponseEnvelope, Role,
};

/// How one exchange ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeOutcome {
    Answer(IntList),
    Error(ErrorNotice),
}

impl ExchangeOutcome {
    pub fn answer(&self) -> Option<&IntList> {
        match self {
            ExchangeOutcome::Answer(a) => Some(a),
            ExchangeOutcome::Error(_) => None,
        }
    }

    pub fn error(&self) -> Option<&ErrorNotice> {
        match self {
            ExchangeOutcome::Answer(_) => None,
            ExchangeOutcome::Error(e) => Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HopOutcome {
    Delivered,
    Rejected { notice: ErrorNotice },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub run: usize,
    /// Set on messages of the honest exchange a replay attack records first.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub decoy: bool,
    pub hop: u8,
    pub from: Role,
    pub to: Role,
    pub kind: MessageKind,
    /// Hex of the framed message as it went over the bus.
    pub message: String,
    pub outcome: HopOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangeResult {
    pub run: usize,
    pub personnel: PartyId,
    pub department: PartyId,
    pub query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSpec>,
    pub outcome: ExchangeOutcome,
}

/// Append-only log of a scenario run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub seed: u64,
    pub entries: Vec<TranscriptEntry>,
    pub results: Vec<ExchangeResult>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn answers(&self) -> Vec<Option<IntList>> {
        self.results.iter().map(|r| r.outcome.answer().cloned()).collect()
    }
}

/// Sender and receiver of each hop.
pub fn hop_roles(hop: u8) -> (Role, Role) {
    match hop {
        1 => (Role::Personnel, Role::Master),
        2 => (Role::Master, Role::Department),
        3 => (Role::Department, Role::Master),
        4 => (Role::Master, Role::Personnel),
        _ => panic!("no hop {hop}"),
    }
}

fn hop_kind(hop: u8) -> MessageKind {
    match hop {
        1 => MessageKind::Request,
        2 => MessageKind::Relayed,
        3 => MessageKind::Response,
        _ => MessageKind::Forwarded,
    }
}

/// Exchange and attack random streams for one run seed.
pub fn run_rngs(seed: u64) -> (ChaCha20Rng, ChaCha20Rng) {
    let mut exchange = ChaCha20Rng::seed_from_u64(seed);
    exchange.set_stream(1);
    let mut attack = ChaCha20Rng::seed_from_u64(seed);
    attack.set_stream(2);
    (exchange, attack)
}

type Hook<'h> = dyn FnMut(u8, &mut WireMessage) -> Result<(), ConfigError> + 'h;

/// The deterministic single-threaded bus over one [`World`].
#[derive(Debug)]
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    world: World,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, ConfigError> {
        Ok(Self { scenario, world: World::build(scenario)? })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    /// All honest exchanges, then each configured attack.
    pub fn run(&self) -> Result<Transcript, ConfigError> {
        let seed = self.scenario.config.seed;
        let (mut rng, mut attack_rng) = run_rngs(seed);
        let mut t = Transcript { seed, ..Transcript::default() };
        for ex in &self.scenario.exchanges {
            self.exchange(&mut t, ex, None, &mut rng, &mut attack_rng)?;
        }
        for attack in &self.scenario.config.attacks {
            let ex = &self.scenario.exchanges[attack.exchange];
            self.exchange(&mut t, ex, Some(attack), &mut rng, &mut attack_rng)?;
        }
        Ok(t)
    }

    /// One attacked exchange with its own run seed.
    pub fn inject(&self, attack: &AttackSpec, seed: u64) -> Result<Transcript, ConfigError> {
        attack.validate()?;
        let ex = self.scenario.exchanges.get(attack.exchange).ok_or_else(|| {
            ConfigError::InvalidAttack(format!("exchange {} does not exist", attack.exchange))
        })?;
        let (mut rng, mut attack_rng) = run_rngs(seed);
        let mut t = Transcript { seed, ..Transcript::default() };
        self.exchange(&mut t, ex, Some(attack), &mut rng, &mut attack_rng)?;
        Ok(t)
    }

    /// Runs one exchange, optionally under attack, appending to `t`.
    pub fn exchange(
        &self,
        t: &mut Transcript,
        ex: &ResolvedExchange,
        attack: Option<&AttackSpec>,
        rng: &mut ChaCha20Rng,
        attack_rng: &mut ChaCha20Rng,
    ) -> Result<ExchangeOutcome, ConfigError> {
        let run = t.results.len();
        let sender = self.personnel(&ex.personnel)?;
        let outcome = match attack {
            None => self.drive(t, run, false, ex, sender, rng, &mut |_, _| Ok(()))?.0,
            Some(a) => match a.kind {
                AttackKind::Tamper => {
                    let mut hook = |hop: u8, msg: &mut WireMessage| {
                        if hop == a.hop {
                            self.tamper(hop, msg, a, attack_rng)?;
                        }
                        Ok(())
                    };
                    self.drive(t, run, false, ex, sender, rng, &mut hook)?.0
                }
                AttackKind::Replay => {
                    let (_, captured) = self.drive(t, run, true, ex, sender, rng, &mut |_, _| Ok(()))?;
                    let old = captured[a.hop as usize - 1].clone().ok_or_else(|| {
                        ConfigError::InvalidAttack("decoy exchange did not reach the replayed hop".into())
                    })?;
                    let mut hook = |hop: u8, msg: &mut WireMessage| {
                        if hop == a.hop {
                            *msg = old.clone();
                        }
                        Ok(())
                    };
                    self.drive(t, run, false, ex, sender, rng, &mut hook)?.0
                }
                AttackKind::Impersonate => {
                    let imp = self.impersonator(&ex.personnel)?;
                    self.drive(t, run, false, ex, &imp, rng, &mut |_, _| Ok(()))?.0
                }
                AttackKind::WrongMapping => {
                    let dept = self.department(&ex.department)?;
                    let honest = dept
                        .mappings()
                        .lookup(&ex.personnel, &ex.department)
                        .map_err(|e| ConfigError::InvalidAttack(e.to_string()))?;
                    dept.mappings().insert(honest.perturbed(attack_rng));
                    let out = self.drive(t, run, false, ex, sender, rng, &mut |_, _| Ok(()));
                    dept.mappings().insert(honest);
                    out?.0
                }
            },
        };
        t.results.push(ExchangeResult {
            run,
            personnel: ex.personnel.clone(),
            department: ex.department.clone(),
            query: ex.query.clone(),
            attack: attack.cloned(),
            outcome: outcome.clone(),
        });
        Ok(outcome)
    }

    fn personnel(&self, id: &PartyId) -> Result<&Personnel, ConfigError> {
        self.world
            .personnel
            .get(id)
            .ok_or_else(|| ConfigError::UnknownParty { what: "personnel", id: id.to_string() })
    }

    fn department(&self, id: &PartyId) -> Result<&crate::protocol::Department, ConfigError> {
        self.world
            .departments
            .get(id)
            .ok_or_else(|| ConfigError::UnknownParty { what: "department", id: id.to_string() })
    }

    /// A personnel claiming `victim`'s id but holding another personnel's keys.
    fn impersonator(&self, victim: &PartyId) -> Result<Personnel, ConfigError> {
        let other = self
            .world
            .personnel
            .keys()
            .find(|p| *p != victim)
            .ok_or_else(|| ConfigError::InvalidAttack("impersonation needs a second personnel".into()))?;
        let keys = self.world.keys().get(other).expect("personnel keys present").clone();
        Ok(Personnel::new(victim.clone(), keys, self.world.registry.clone(), self.scenario.config.master.clone())
            .with_random_set_len(self.scenario.config.random_set_len))
    }

    /// Walks the four hops. Returns the outcome and each hop's message as
    /// delivered.
    #[allow(clippy::too_many_arguments)]
    fn drive(
        &self,
        t: &mut Transcript,
        run: usize,
        decoy: bool,
        ex: &ResolvedExchange,
        sender: &Personnel,
        rng: &mut ChaCha20Rng,
        hook: &mut Hook<'_>,
    ) -> Result<(ExchangeOutcome, [Option<WireMessage>; 4]), ConfigError> {
        let mc = self.world.master();
        let mut captured: [Option<WireMessage>; 4] = Default::default();
        let (env, state) = match sender.build_request(&ex.department, ex.query.as_bytes(), rng) {
            Ok(v) => v,
            Err(e) => return Ok((ExchangeOutcome::Error(e), captured)),
        };
        let header = WireMessage::new(ex.personnel.clone(), ex.department.clone(), MessageKind::Request, Vec::new());
        let mut opened = None;

        let mut payload = env.to_bytes();
        let mut outcome = None;
        for hop in 1..=4u8 {
            let mut msg = header.reply(hop_kind(hop), std::mem::take(&mut payload));
            hook(hop, &mut msg)?;
            captured[hop as usize - 1] = Some(msg.clone());
            let (from, to) = hop_roles(hop);
            let result = self.deliver(hop, &msg, &state, &mut opened);
            t.entries.push(TranscriptEntry {
                run,
                decoy,
                hop,
                from,
                to,
                kind: msg.kind,
                message: hex::encode(msg.to_frame()),
                outcome: match &result {
                    Ok(_) => HopOutcome::Delivered,
                    Err(notice) => HopOutcome::Rejected { notice: notice.clone() },
                },
            });
            match result {
                Ok(Delivered::Next(next)) => payload = next,
                Ok(Delivered::Answer(answer)) => outcome = Some(ExchangeOutcome::Answer(answer)),
                Err(notice) => outcome = Some(ExchangeOutcome::Error(notice)),
            }
            if outcome.is_some() {
                break;
            }
        }
        if let Some(e_rv) = opened {
            mc.drop_session(&e_rv);
        }
        Ok((outcome.expect("hop 4 always ends the exchange"), captured))
    }

    fn deliver(
        &self,
        hop: u8,
        msg: &WireMessage,
        state: &crate::protocol::SessionState,
        opened: &mut Option<Vec<u8>>,
    ) -> Result<Delivered, ErrorNotice> {
        let (_, to) = hop_roles(hop);
        let mc = self.world.master();
        let garbled = |e: FramingError| ErrorNotice::new(ErrorCode::Tampered, to, format!("envelope: {e}"));
        match hop {
            1 => {
                let env = RequestEnvelope::from_bytes(&msg.payload).map_err(garbled)?;
                let (rel, session) = mc.relay_request(&msg.personnel, &msg.department, &env)?;
                *opened = Some(session.e_rv);
                if !self.world.departments.contains_key(&msg.department) {
                    return Err(ErrorNotice::new(ErrorCode::UnknownParty, Role::Master, "department unreachable"));
                }
                Ok(Delivered::Next(rel.to_bytes()))
            }
            2 => {
                let rel = RelayedRequest::from_bytes(&msg.payload).map_err(garbled)?;
                let dept = &self.world.departments[&msg.department];
                Ok(Delivered::Next(dept.handle_request(&msg.personnel, &rel)?.to_bytes()))
            }
            3 => {
                let res = ResponseEnvelope::from_bytes(&msg.payload).map_err(garbled)?;
                let (fwd, _) = mc.relay_response(&res)?;
                Ok(Delivered::Next(fwd.to_bytes()))
            }
            _ => {
                let fwd = ForwardedResponse::from_bytes(&msg.payload).map_err(garbled)?;
                let owner = &self.world.personnel[&msg.personnel];
                Ok(Delivered::Answer(owner.validate_response(&fwd, state)?))
            }
        }
    }

    /// Flips one bit of the hop's message, resealing any envelope layers
    /// around the chosen field so that only the field itself changes.
    fn tamper(
        &self,
        hop: u8,
        msg: &mut WireMessage,
        attack: &AttackSpec,
        rng: &mut ChaCha20Rng,
    ) -> Result<(), ConfigError> {
        let tag = match attack.field {
            Pick::Random => return flip(&mut msg.payload, attack.bit, rng),
            Pick::Fixed(tag) => tag,
        };
        let keys = self.world.keys();
        let recipient = match hop {
            1 | 3 => &self.scenario.config.master,
            2 => &msg.department,
            _ => &msg.personnel,
        };
        let recipient = keys.get(recipient).expect("all keys present");
        let broken = |e: &dyn std::fmt::Display| ConfigError::InvalidAttack(format!("cannot open hop {hop}: {e}"));
        let ct = Ciphertext::from_bytes(&msg.payload).map_err(|e| broken(&e))?;
        let plain = recipient.decrypt_private(&ct).map_err(|e| broken(&e))?;
        let mut outer = decode_fields(&plain).map_err(|e| broken(&e))?;
        if let Some(field) = outer.get_mut(tag) {
            flip(field, attack.bit, rng)?;
        } else {
            let (sealed, signer) = match hop {
                1 => (tags::SA_DATA, &msg.personnel),
                2 => (tags::C_REQ, &self.scenario.config.master),
                _ => return Err(ConfigError::InvalidAttack(format!("tag 0x{tag:02x} not at hop {hop}"))),
            };
            let signer = keys.get(signer).expect("all keys present");
            let field = outer.get_mut(sealed).expect("validated envelope");
            let inner_ct = Ciphertext::from_bytes(field).map_err(|e| broken(&e))?;
            let inner_plain = signer.public().decrypt(&inner_ct).map_err(|e| broken(&e))?;
            let mut inner = decode_fields(&inner_plain).map_err(|e| broken(&e))?;
            let target = inner
                .get_mut(tag)
                .ok_or_else(|| ConfigError::InvalidAttack(format!("tag 0x{tag:02x} not at hop {hop}")))?;
            flip(target, attack.bit, rng)?;
            *field = signer.encrypt_private(&encode_fields(&inner)).to_bytes();
        }
        msg.payload = recipient.public().encrypt(&encode_fields(&outer)).to_bytes();
        Ok(())
    }
}

enum Delivered {
    Next(Vec<u8>),
    Answer(IntList),
}

fn flip(buf: &mut [u8], bit: Pick<u32>, rng: &mut ChaCha20Rng) -> Result<(), ConfigError> {
    let bits = buf.len() as u64 * 8;
    if bits == 0 {
        return Err(ConfigError::InvalidAttack("field is empty".into()));
    }
    let b = match bit {
        Pick::Random => rng.random_range(0..bits),
        Pick::Fixed(b) if u64::from(b) < bits => u64::from(b),
        Pick::Fixed(b) => {
            return Err(ConfigError::InvalidAttack(format!("bit {b} is past the end of a {bits}-bit field")))
        }
    };
    buf[(b / 8) as usize] ^= 0x80 >> (b % 8);
    Ok(())
}

pub fn run_scenario(sc: &Scenario) -> Result<Transcript, ConfigError> {
    Simulator::new(sc)?.run()
}

/// Runs the attacked exchange once, seeded by the scenario seed.
pub fn inject(sc: &Scenario, attack: &AttackSpec) -> Result<Transcript, ConfigError> {
    Simulator::new(sc)?.inject(attack, sc.config.seed)
}

/// Outcome of repeated attack trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialSummary {
    pub attack: AttackSpec,
    pub trials: usize,
    pub detected: usize,
    /// Error codes seen, in order of first appearance, with counts.
    pub codes: Vec<(String, usize)>,
}

impl TrialSummary {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.detected as f64 / self.trials as f64
        }
    }
}

/// `trials` attacked exchanges with run seeds `seed, seed + 1, ...` over one
/// set of keys.
pub fn attack_trials(sim: &Simulator<'_>, attack: &AttackSpec, seed: u64, trials: usize) -> Result<TrialSummary, ConfigError> {
    let mut detected = 0;
    let mut codes: Vec<(String, usize)> = Vec::new();
    for i in 0..trials {
        let t = sim.inject(attack, seed.wrapping_add(i as u64))?;
        let outcome = &t.results.last().expect("one result").outcome;
        if attack.detected(outcome) {
            detected += 1;
        }
        let label = match outcome {
            ExchangeOutcome::Answer(_) => "ACCEPTED".to_string(),
            ExchangeOutcome::Error(e) => format!("{}@{}", e.code, e.raised_by),
        };
        match codes.iter_mut().find(|(c, _)| *c == label) {
            Some((_, n)) => *n += 1,
            None => codes.push((label, 1)),
        }
    }
    Ok(TrialSummary { attack: attack.clone(), trials, detected, codes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::table1_scenario;
    use crate::table1::ROWS;

    #[test]
    fn table1_answers_and_determinism() {
        let sc = table1_scenario(42, 256);
        let a = run_scenario(&sc).unwrap();
        for (row, got) in ROWS.iter().zip(a.answers()) {
            assert_eq!(got.as_ref(), Some(&row.expected()), "{} at {}", row.personnel, row.department);
        }
        assert_eq!(a.entries.len(), 40);
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = run_scenario(&table1_scenario(43, 256)).unwrap();
        assert_ne!(a.to_json(), c.to_json());
        assert_eq!(a.answers(), c.answers());
    }

    fn first_error(t: &Transcript) -> ErrorNotice {
        t.results[0].outcome.error().cloned().expect("attack should be caught")
    }

    #[test]
    fn each_attack_kind_is_caught_where_expected() {
        let sc = table1_scenario(7, 256);
        let sim = Simulator::new(&sc).unwrap();
        let cases = [
            (AttackSpec::new(AttackKind::Tamper, 2).with_field(Pick::Fixed(tags::S_QUERY)), ErrorCode::Tampered, Role::Department),
            (AttackSpec::new(AttackKind::Tamper, 1).with_field(Pick::Fixed(tags::H_V)), ErrorCode::Tampered, Role::Department),
            (AttackSpec::new(AttackKind::Tamper, 4).with_field(Pick::Fixed(tags::M_VAL)), ErrorCode::Tampered, Role::Personnel),
            (AttackSpec::new(AttackKind::Tamper, 3).with_field(Pick::Fixed(tags::M_VAL)).with_bit(Pick::Fixed(12)), ErrorCode::MappingFail, Role::Master),
            (AttackSpec::new(AttackKind::Impersonate, 1), ErrorCode::AuthFail, Role::Master),
            (AttackSpec::new(AttackKind::WrongMapping, 3), ErrorCode::MappingFail, Role::Master),
            (AttackSpec::new(AttackKind::Replay, 3), ErrorCode::SessionUnknown, Role::Master),
            (AttackSpec::new(AttackKind::Replay, 4), ErrorCode::SessionUnknown, Role::Personnel),
        ];
        for (spec, code, at) in cases {
            let t = sim.inject(&spec, 3).unwrap();
            let e = first_error(&t);
            assert_eq!((e.code, e.raised_by), (code, at), "{spec:?}: {e}");
            assert!(spec.detected(&t.results[0].outcome));
            assert_eq!(sim.world().master().session_count(), 0, "{spec:?} left a session behind");
        }
        // the wrong-mapping attack restores the department's honest spec
        let honest = sim.inject(&AttackSpec::new(AttackKind::Replay, 4), 4).unwrap();
        assert_eq!(honest.entries.iter().filter(|e| e.decoy).count(), 4);
        let t = sim.run().unwrap();
        assert!(t.results.iter().all(|r| r.outcome.answer().is_some()));
    }

    #[test]
    fn bad_bit_offsets_are_config_errors() {
        let sc = table1_scenario(7, 256);
        let sim = Simulator::new(&sc).unwrap();
        let spec = AttackSpec::new(AttackKind::Tamper, 4).with_field(Pick::Fixed(tags::M_VAL)).with_bit(Pick::Fixed(64));
        assert!(matches!(sim.inject(&spec, 1), Err(ConfigError::InvalidAttack(_))));
    }

    #[test]
    fn trial_summary_counts() {
        let sc = table1_scenario(9, 256);
        let sim = Simulator::new(&sc).unwrap();
        let s = attack_trials(&sim, &AttackSpec::new(AttackKind::Tamper, 2), 100, 20).unwrap();
        assert_eq!(s.trials, 20);
        assert_eq!(s.codes.iter().map(|(_, n)| n).sum::<usize>(), 20);
        assert!(s.detected >= 19, "{s:?}");
    }
}
