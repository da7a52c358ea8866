//! Transport framing shared by the simulated bus and the TCP endpoints.
//!
//! ```text
//! frame   = u32 BE body length | body
//! body    = u8 len | personnel id | u8 len | department id | kind | payload
//! ```
//!
//! The party ids are routing metadata: they name the personnel the exchange
//! belongs to and the department it targets, whichever hop carries it.

use std::fmt;
use std::io::{self, Read, Write};

use crate::codec::{frame, read_frame, write_frame, FramingError, IntList, Reader};
use crate::party::PartyId;

use super::ErrorNotice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    /// Personnel to master control.
    Request,
    /// Master control to department.
    Relayed,
    /// Department to master control.
    Response,
    /// Master control to personnel.
    Forwarded,
    Error,
    /// A driver asking a personnel endpoint to run one exchange; the payload
    /// is the query.
    Query,
    /// The personnel endpoint's reply to a `Query`: an encoded int list.
    Answer,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::Request,
        MessageKind::Relayed,
        MessageKind::Response,
        MessageKind::Forwarded,
        MessageKind::Error,
        MessageKind::Query,
        MessageKind::Answer,
    ];

    pub fn to_byte(self) -> u8 {
        match self {
            MessageKind::Request => 1,
            MessageKind::Relayed => 2,
            MessageKind::Response => 3,
            MessageKind::Forwarded => 4,
            MessageKind::Error => 5,
            MessageKind::Query => 6,
            MessageKind::Answer => 7,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.to_byte() == b)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MessageKind::Request => "request",
            MessageKind::Relayed => "relayed",
            MessageKind::Response => "response",
            MessageKind::Forwarded => "forwarded",
            MessageKind::Error => "error",
            MessageKind::Query => "query",
            MessageKind::Answer => "answer",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub personnel: PartyId,
    pub department: PartyId,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn new(personnel: PartyId, department: PartyId, kind: MessageKind, payload: Vec<u8>) -> Self {
        Self { personnel, department, kind, payload }
    }

    /// Same routing header, different kind and payload.
    pub fn reply(&self, kind: MessageKind, payload: Vec<u8>) -> Self {
        Self::new(self.personnel.clone(), self.department.clone(), kind, payload)
    }

    pub fn error_reply(&self, notice: &ErrorNotice) -> Self {
        self.reply(MessageKind::Error, notice.to_bytes())
    }

    pub fn encode(&self) -> Vec<u8> {
        let p = self.personnel.as_str().as_bytes();
        let d = self.department.as_str().as_bytes();
        let mut out = Vec::with_capacity(3 + p.len() + d.len() + self.payload.len());
        out.push(p.len() as u8);
        out.extend_from_slice(p);
        out.push(d.len() as u8);
        out.extend_from_slice(d);
        out.push(self.kind.to_byte());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(body: &[u8]) -> Result<Self, FramingError> {
        let mut r = Reader::new(body);
        let personnel = read_id(&mut r)?;
        let department = read_id(&mut r)?;
        let kind = MessageKind::from_byte(r.u8()?).ok_or(FramingError::Malformed("unknown message kind"))?;
        let payload = r.rest().to_vec();
        Ok(Self { personnel, department, kind, payload })
    }

    /// Length-prefixed form, as sent on a stream.
    pub fn to_frame(&self) -> Vec<u8> {
        frame(&self.encode()).expect("message fits in a frame")
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_frame(w, &self.encode())
    }

    /// `Ok(None)` on a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Option<Result<Self, FramingError>>> {
        Ok(read_frame(r)?.map(|body| Self::decode(&body)))
    }

    /// The error notice carried by an `Error` message.
    pub fn error_notice(&self) -> Option<Result<ErrorNotice, FramingError>> {
        (self.kind == MessageKind::Error).then(|| ErrorNotice::from_bytes(&self.payload))
    }

    pub fn answer(&self) -> Option<Result<IntList, FramingError>> {
        (self.kind == MessageKind::Answer).then(|| crate::codec::decode_int_list(&self.payload))
    }
}

fn read_id(r: &mut Reader<'_>) -> Result<PartyId, FramingError> {
    let len = r.u8()? as usize;
    let raw = r.take(len)?;
    std::str::from_utf8(raw)
        .ok()
        .and_then(|s| PartyId::new(s).ok())
        .ok_or(FramingError::Malformed("bad party id"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::deframe;

    fn msg() -> WireMessage {
        WireMessage::new(
            PartyId::new("SP1").unwrap(),
            PartyId::new("IB").unwrap(),
            MessageKind::Request,
            vec![9, 8, 7],
        )
    }

    #[test]
    fn layout() {
        let m = msg();
        assert_eq!(m.encode(), b"\x03SP1\x02IB\x01\x09\x08\x07");
        let framed = m.to_frame();
        let (body, rest) = deframe(&framed).unwrap();
        assert!(rest.is_empty());
        assert_eq!(WireMessage::decode(body).unwrap(), m);
    }

    #[test]
    fn stream_round_trip() {
        let m = msg();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        m.reply(MessageKind::Answer, vec![]).write_to(&mut buf).unwrap();
        let mut cur = io::Cursor::new(buf);
        assert_eq!(WireMessage::read_from(&mut cur).unwrap().unwrap().unwrap(), m);
        assert_eq!(WireMessage::read_from(&mut cur).unwrap().unwrap().unwrap().kind, MessageKind::Answer);
        assert!(WireMessage::read_from(&mut cur).unwrap().is_none());
    }

    #[test]
    fn malformed_bodies() {
        assert!(WireMessage::decode(b"").is_err());
        assert!(WireMessage::decode(b"\x03SP").is_err());
        assert!(WireMessage::decode(b"\x00\x02IB\x01").is_err());
        assert!(WireMessage::decode(b"\x03SP1\x02IB\x63").is_err());
        assert!(WireMessage::decode(b"\x03S 1\x02IB\x01").is_err());
    }

    #[test]
    fn kinds() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_byte(k.to_byte()), Some(k));
        }
        assert_eq!(MessageKind::from_byte(0), None);
    }
}
