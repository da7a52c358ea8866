//! Per-thread record of crypto operations, for checking which role touched
//! which key in which direction.
//!
//! Recording is off unless a [`capture`] is active on the current thread.
//! Roles tag their work with [`as_actor`] so events carry the role that
//! performed them.

use std::cell::{Cell, RefCell};

use super::{Digest16, Direction, PublicKey};
use crate::party::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CryptoOp {
    Encrypt,
    Decrypt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CryptoEvent {
    pub actor: Option<Role>,
    pub op: CryptoOp,
    pub direction: Direction,
    /// Fingerprint of the modulus used.
    pub key: Digest16,
}

thread_local! {
    static SINK: RefCell<Option<Vec<CryptoEvent>>> = const { RefCell::new(None) };
    static ACTOR: Cell<Option<Role>> = const { Cell::new(None) };
}

/// Runs `f` and returns every crypto operation it performed on this thread.
pub fn capture<T>(f: impl FnOnce() -> T) -> (T, Vec<CryptoEvent>) {
    let outer = SINK.with(|s| s.borrow_mut().replace(Vec::new()));
    let out = f();
    let events = SINK.with(|s| {
        let mut slot = s.borrow_mut();
        let mine = slot.take().unwrap_or_default();
        if let Some(mut outer) = outer {
            outer.extend(mine.iter().cloned());
            *slot = Some(outer);
        }
        mine
    });
    (out, events)
}

/// Runs `f` with `role` as the actor recorded on crypto events.
pub fn as_actor<T>(role: Role, f: impl FnOnce() -> T) -> T {
    let prev = ACTOR.with(|a| a.replace(Some(role)));
    let out = f();
    ACTOR.with(|a| a.set(prev));
    out
}

pub(crate) fn record(op: CryptoOp, direction: Direction, key: &PublicKey) {
    SINK.with(|s| {
        if let Some(events) = s.borrow_mut().as_mut() {
            events.push(CryptoEvent {
                actor: ACTOR.with(Cell::get),
                op,
                direction,
                key: key.fingerprint(),
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;

    #[test]
    fn records_only_inside_capture() {
        let kp = keygen(64, 1).unwrap();
        let _ = kp.public().encrypt(b"x");
        let (_, events) = capture(|| {
            as_actor(Role::Master, || kp.decrypt_private(&kp.public().encrypt(b"hi")))
        });
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].op, CryptoOp::Encrypt);
        assert_eq!(events[1].direction, Direction::WithPrivate);
        assert!(events.iter().all(|e| e.actor == Some(Role::Master)));
        assert_eq!(events[0].key, kp.public().fingerprint());
    }

    #[test]
    fn nested_captures_propagate_outward() {
        let kp = keygen(64, 1).unwrap();
        let (inner, outer) = capture(|| capture(|| kp.public().encrypt(b"a")).1);
        assert_eq!(inner.len(), 1);
        assert_eq!(outer.len(), 1);
        assert_eq!(outer[0].actor, None);
    }
}
