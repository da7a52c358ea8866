//! TCP endpoints for the three roles.
//!
//! Each endpoint accepts connections and handles every connection on its own
//! thread. A connection carries a sequence of framed [`WireMessage`]s, each
//! answered by exactly one reply. Roles call the next hop on a fresh
//! connection per exchange.
//!
//! * personnel endpoint: `Query` from a driver, replies `Answer` or `Error`.
//! * master endpoint: `Request` (or a bare `Response`), replies `Forwarded`
//!   or `Error`.
//! * department endpoint: `Relayed`, replies `Response` or `Error`.
//!
//! A frame that cannot be decoded gets an `Error` reply and the connection is
//! closed. If the department does not answer within the hop timeout, the
//! master control drops the session and replies `TIMEOUT`.

use std::io;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand_chacha::ChaCha20Rng;

use super::bus::{run_rngs, ExchangeOutcome};
use super::config::{ConfigError, Endpoints, Scenario};
use super::world::World;
use crate::codec::{decode_int_list, encode_int_list, FramingError, IntList};
use crate::party::PartyId;
use crate::protocol::wire::{MessageKind, WireMessage};
use crate::protocol::{
    ErrorCode, ErrorNotice, ForwardedResponse, RelayedRequest, RequestEnvelope, ResponseEnvelope, Role,
};

/// One role's endpoint state.
#[derive(Debug)]
pub struct Node {
    role: Role,
    world: World,
    endpoints: Endpoints,
    hop_timeout: Duration,
    rng: Mutex<ChaCha20Rng>,
}

impl Node {
    /// Loads only the keys and roles `role` needs.
    pub fn new(sc: &Scenario, role: Role) -> Result<Self, ConfigError> {
        let endpoints = sc.config.endpoints.clone().ok_or_else(|| ConfigError::Schema {
            path: "$.endpoints".into(),
            message: "TCP mode needs endpoint addresses".into(),
        })?;
        let world = World::build_for(sc, &[role])?;
        Ok(Self::from_world(role, world, endpoints, Duration::from_millis(sc.config.hop_timeout_ms), sc.config.seed))
    }

    pub fn from_world(role: Role, world: World, endpoints: Endpoints, hop_timeout: Duration, seed: u64) -> Self {
        let (rng, _) = run_rngs(seed);
        Self { role, world, endpoints, hop_timeout, rng: Mutex::new(rng) }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    fn notice(&self, code: ErrorCode, detail: impl Into<String>) -> ErrorNotice {
        ErrorNotice::new(code, self.role, detail)
    }

    fn handle(&self, msg: &WireMessage) -> WireMessage {
        let result = match (self.role, msg.kind) {
            (Role::Personnel, MessageKind::Query) => self.on_query(msg),
            (Role::Master, MessageKind::Request) => self.on_request(msg),
            (Role::Master, MessageKind::Response) => self.on_response(msg),
            (Role::Department, MessageKind::Relayed) => self.on_relayed(msg),
            (_, kind) => Err(self.notice(ErrorCode::Tampered, format!("unexpected {kind} message"))),
        };
        result.unwrap_or_else(|notice| msg.error_reply(&notice))
    }

    fn garbled(&self) -> impl Fn(FramingError) -> ErrorNotice + '_ {
        move |e| self.notice(ErrorCode::Tampered, format!("envelope: {e}"))
    }

    fn on_query(&self, msg: &WireMessage) -> Result<WireMessage, ErrorNotice> {
        let personnel = self
            .world
            .personnel
            .get(&msg.personnel)
            .ok_or_else(|| self.notice(ErrorCode::UnknownParty, format!("no personnel {}", msg.personnel)))?;
        let (env, state) = {
            let mut rng = self.rng.lock().expect("rng lock poisoned");
            personnel.build_request(&msg.department, &msg.payload, &mut *rng)?
        };
        let request = msg.reply(MessageKind::Request, env.to_bytes());
        // the master may spend one full hop timeout on the department
        let reply = call(&self.endpoints.master, &request, self.hop_timeout * 2)
            .map_err(|e| self.notice(ErrorCode::Timeout, format!("master control: {e}")))?;
        match reply.kind {
            MessageKind::Forwarded => {
                let fwd = ForwardedResponse::from_bytes(&reply.payload).map_err(self.garbled())?;
                let answer = personnel.validate_response(&fwd, &state)?;
                Ok(msg.reply(MessageKind::Answer, encode_int_list(&answer)))
            }
            MessageKind::Error => Ok(reply),
            other => Err(self.notice(ErrorCode::Tampered, format!("unexpected {other} reply"))),
        }
    }

    fn on_request(&self, msg: &WireMessage) -> Result<WireMessage, ErrorNotice> {
        let mc = self.world.master();
        let env = RequestEnvelope::from_bytes(&msg.payload).map_err(self.garbled())?;
        let (rel, session) = mc.relay_request(&msg.personnel, &msg.department, &env)?;
        let relayed = msg.reply(MessageKind::Relayed, rel.to_bytes());
        let result = match call(&self.endpoints.department, &relayed, self.hop_timeout) {
            Err(e) => Err(self.notice(ErrorCode::Timeout, format!("department: {e}"))),
            Ok(reply) => match reply.kind {
                MessageKind::Response => self.on_response(&reply),
                MessageKind::Error => Ok(msg.reply(MessageKind::Error, reply.payload)),
                other => Err(self.notice(ErrorCode::Tampered, format!("unexpected {other} reply"))),
            },
        };
        mc.drop_session(&session.e_rv);
        result
    }

    fn on_response(&self, msg: &WireMessage) -> Result<WireMessage, ErrorNotice> {
        let res = ResponseEnvelope::from_bytes(&msg.payload).map_err(self.garbled())?;
        let (fwd, _) = self.world.master().relay_response(&res)?;
        Ok(msg.reply(MessageKind::Forwarded, fwd.to_bytes()))
    }

    fn on_relayed(&self, msg: &WireMessage) -> Result<WireMessage, ErrorNotice> {
        let dept = self
            .world
            .departments
            .get(&msg.department)
            .ok_or_else(|| self.notice(ErrorCode::UnknownParty, format!("no department {}", msg.department)))?;
        let rel = RelayedRequest::from_bytes(&msg.payload).map_err(self.garbled())?;
        let res = dept.handle_request(&msg.personnel, &rel)?;
        Ok(msg.reply(MessageKind::Response, res.to_bytes()))
    }
}

/// Sends one message on a fresh connection and waits for the reply.
pub fn call(addr: &str, msg: &WireMessage, timeout: Duration) -> io::Result<WireMessage> {
    let mut stream = connect(addr, timeout)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    msg.write_to(&mut stream)?;
    match WireMessage::read_from(&mut stream)? {
        Some(Ok(reply)) => Ok(reply),
        Some(Err(e)) => Err(io::Error::new(io::ErrorKind::InvalidData, e)),
        None => Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed without a reply")),
    }
}

fn connect(addr: &str, timeout: Duration) -> io::Result<TcpStream> {
    let mut last = io::Error::new(io::ErrorKind::InvalidInput, format!("{addr} resolves to nothing"));
    for a in addr.to_socket_addrs()? {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn unknown_id() -> PartyId {
    PartyId::new("-").expect("valid id")
}

fn serve_connection(mut stream: TcpStream, node: &Node) -> io::Result<()> {
    loop {
        let msg = match WireMessage::read_from(&mut stream) {
            Ok(None) => return Ok(()),
            Ok(Some(Ok(msg))) => msg,
            Ok(Some(Err(e))) => return reject_and_close(&mut stream, node, e.to_string()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData || e.kind() == io::ErrorKind::UnexpectedEof => {
                return reject_and_close(&mut stream, node, e.to_string());
            }
            Err(e) => return Err(e),
        };
        node.handle(&msg).write_to(&mut stream)?;
    }
}

fn reject_and_close(stream: &mut TcpStream, node: &Node, why: String) -> io::Result<()> {
    let notice = node.notice(ErrorCode::Tampered, format!("malformed frame: {why}"));
    let reply = WireMessage::new(unknown_id(), unknown_id(), MessageKind::Error, notice.to_bytes());
    // the peer may already be gone
    let _ = reply.write_to(stream);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    Ok(())
}

/// Accepts connections forever.
pub fn serve(listener: TcpListener, node: Arc<Node>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::ConnectionAborted => continue,
            Err(e) => return Err(e),
        };
        let node = node.clone();
        thread::spawn(move || {
            let _ = serve_connection(stream, &node);
        });
    }
    Ok(())
}

/// [`serve`] on a background thread.
pub fn spawn(listener: TcpListener, node: Arc<Node>) -> JoinHandle<io::Result<()>> {
    thread::spawn(move || serve(listener, node))
}

/// A driver connection to a personnel endpoint.
#[derive(Debug)]
pub struct Driver {
    stream: TcpStream,
}

impl Driver {
    pub fn connect(addr: &str, timeout: Duration) -> io::Result<Self> {
        let stream = connect(addr, timeout)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        Ok(Self { stream })
    }

    /// Asks the personnel endpoint to run one exchange.
    pub fn query(&mut self, personnel: &PartyId, department: &PartyId, query: &str) -> io::Result<ExchangeOutcome> {
        let msg = WireMessage::new(personnel.clone(), department.clone(), MessageKind::Query, query.as_bytes().to_vec());
        msg.write_to(&mut self.stream)?;
        let reply = match WireMessage::read_from(&mut self.stream)? {
            Some(Ok(reply)) => reply,
            Some(Err(e)) => return Err(io::Error::new(io::ErrorKind::InvalidData, e)),
            None => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "personnel endpoint closed")),
        };
        let bad = |e: FramingError| io::Error::new(io::ErrorKind::InvalidData, e);
        match reply.kind {
            MessageKind::Answer => decode_int_list(&reply.payload).map(ExchangeOutcome::Answer).map_err(bad),
            MessageKind::Error => ErrorNotice::from_bytes(&reply.payload).map(ExchangeOutcome::Error).map_err(bad),
            other => Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected {other} reply"))),
        }
    }
}

/// Runs every exchange of the scenario through a personnel endpoint.
pub fn run_remote(sc: &Scenario, personnel_addr: &str) -> io::Result<Vec<ExchangeOutcome>> {
    let timeout = Duration::from_millis(sc.config.hop_timeout_ms) * 3;
    let mut driver = Driver::connect(personnel_addr, timeout)?;
    sc.exchanges.iter().map(|ex| driver.query(&ex.personnel, &ex.department, &ex.query)).collect()
}

/// The answers of a list of outcomes, `None` where an exchange failed.
pub fn answers(outcomes: &[ExchangeOutcome]) -> Vec<Option<IntList>> {
    outcomes.iter().map(|o| o.answer().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::table1_scenario;
    use std::io::Write;

    fn bind() -> (TcpListener, String) {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap().to_string();
        (l, addr)
    }

    /// Personnel and master endpoints, plus a department endpoint unless
    /// `department` names another address.
    fn nodes(timeout_ms: u64, department: Option<String>) -> (String, Arc<Node>) {
        let (lp, ap) = bind();
        let (lm, am) = bind();
        let (ld, ad) = match department {
            Some(a) => (None, a),
            None => {
                let (l, a) = bind();
                (Some(l), a)
            }
        };
        let mut sc = table1_scenario(11, 256);
        sc.config.hop_timeout_ms = timeout_ms;
        sc.config.endpoints = Some(Endpoints { personnel: ap.clone(), master: am, department: ad });
        let master = Arc::new(Node::new(&sc, Role::Master).unwrap());
        spawn(lp, Arc::new(Node::new(&sc, Role::Personnel).unwrap()));
        spawn(lm, master.clone());
        if let Some(ld) = ld {
            spawn(ld, Arc::new(Node::new(&sc, Role::Department).unwrap()));
        }
        (ap, master)
    }

    #[test]
    fn table1_over_loopback() {
        let (addr, _) = nodes(5000, None);
        let sc = table1_scenario(11, 256);
        let got = run_remote(&sc, &addr).unwrap();
        let local = crate::sim::run_scenario(&sc).unwrap();
        assert_eq!(answers(&got), local.answers());
    }

    #[test]
    fn malformed_frame_gets_error_and_close() {
        let (addr, _) = nodes(5000, None);
        let mut s = TcpStream::connect(&addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        // valid length prefix, body with an unknown message kind
        s.write_all(&[0, 0, 0, 5, 1, b'A', 1, b'B', 99]).unwrap();
        let reply = WireMessage::read_from(&mut s).unwrap().unwrap().unwrap();
        let notice = reply.error_notice().unwrap().unwrap();
        assert_eq!(notice.code, ErrorCode::Tampered);
        assert!(WireMessage::read_from(&mut s).unwrap().is_none());
        // endpoint still serves
        let mut d = Driver::connect(&addr, Duration::from_secs(5)).unwrap();
        let sp1 = PartyId::new("SP1").unwrap();
        let ib = PartyId::new("IB").unwrap();
        assert!(d.query(&sp1, &ib, "IB-subject-1").unwrap().answer().is_some());
        let out = d.query(&sp1, &ib, "no such subject").unwrap();
        assert_eq!(out.error().unwrap().code, ErrorCode::PolicyFail);
    }

    #[test]
    fn silent_department_times_out_and_session_expires() {
        // accepts and reads, never answers
        let (silent, silent_addr) = bind();
        thread::spawn(move || {
            let mut held = Vec::new();
            for c in silent.incoming() {
                held.push(c);
            }
        });
        let (addr, master) = nodes(300, Some(silent_addr));
        let mut d = Driver::connect(&addr, Duration::from_secs(5)).unwrap();
        let out = d.query(&PartyId::new("SP1").unwrap(), &PartyId::new("IB").unwrap(), "IB-subject-1").unwrap();
        let e = out.error().unwrap();
        assert_eq!((e.code, e.raised_by), (ErrorCode::Timeout, Role::Master));
        assert_eq!(master.world().master().session_count(), 0);

        // nothing listening at all
        let gone = {
            let (l, a) = bind();
            drop(l);
            a
        };
        let (addr, master) = nodes(300, Some(gone));
        let mut d = Driver::connect(&addr, Duration::from_secs(5)).unwrap();
        let out = d.query(&PartyId::new("SP1").unwrap(), &PartyId::new("IB").unwrap(), "IB-subject-1").unwrap();
        assert_eq!(out.error().unwrap().code, ErrorCode::Timeout);
        assert_eq!(master.world().master().session_count(), 0);
    }
}
