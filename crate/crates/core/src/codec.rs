//! Canonical byte encodings.
//!
//! Everything that is hashed, encrypted or put on the wire goes through one of
//! three layouts, all big-endian:
//!
//! ```text
//! field tuple : "RC1S" | u16 field count | { u8 tag | u32 len | payload }*
//! int list    : u32 count | { i64 }*
//! wire frame  : u32 len | body
//! ```
//!
//! Tags inside a tuple are strictly increasing, so a tuple has exactly one
//! encoding and the decoder can reject anything that is not canonical. The
//! magic doubles as the recognizable structure that tells a correct
//! decryption apart from a wrong-key one.

use std::io::{self, Read, Write};

/// Leading bytes of every encoded field tuple.
pub const MAGIC: [u8; 4] = *b"RC1S";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FramingError {
    #[error("missing field-tuple magic")]
    BadMagic,
    #[error("input truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after encoded value")]
    TrailingBytes(usize),
    #[error("tag {tag:#04x} does not follow {prev:#04x} in increasing order")]
    TagOrder { prev: u8, tag: u8 },
    #[error("payload of {0} bytes exceeds the u32 length field")]
    TooLong(usize),
    #[error("too many fields ({0}) for the u16 count")]
    TooManyFields(usize),
    #[error("missing required field {0:#04x}")]
    MissingField(u8),
    #[error("unexpected field {0:#04x}")]
    UnexpectedField(u8),
    #[error("field {tag:#04x} has length {len}, expected {expected}")]
    FieldLength { tag: u8, len: usize, expected: usize },
    #[error("malformed value: {0}")]
    Malformed(&'static str),
}

/// Ordered `(tag, payload)` pairs with strictly increasing tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FieldTuple {
    fields: Vec<(u8, Vec<u8>)>,
}

impl FieldTuple {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tuple from pairs, checking tag order and payload sizes.
    pub fn from_fields<I, P>(fields: I) -> Result<Self, FramingError>
    where
        I: IntoIterator<Item = (u8, P)>,
        P: Into<Vec<u8>>,
    {
        let mut tuple = Self::new();
        for (tag, payload) in fields {
            tuple.push(tag, payload)?;
        }
        Ok(tuple)
    }

    /// Appends a field. The tag must be greater than every tag already present.
    pub fn push(&mut self, tag: u8, payload: impl Into<Vec<u8>>) -> Result<(), FramingError> {
        let payload = payload.into();
        if let Some(&(prev, _)) = self.fields.last() {
            if tag <= prev {
                return Err(FramingError::TagOrder { prev, tag });
            }
        }
        if payload.len() > u32::MAX as usize {
            return Err(FramingError::TooLong(payload.len()));
        }
        if self.fields.len() == u16::MAX as usize {
            return Err(FramingError::TooManyFields(self.fields.len() + 1));
        }
        self.fields.push((tag, payload));
        Ok(())
    }

    /// Builder-style [`push`](Self::push).
    pub fn with(mut self, tag: u8, payload: impl Into<Vec<u8>>) -> Result<Self, FramingError> {
        self.push(tag, payload)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn tags(&self) -> impl Iterator<Item = u8> + '_ {
        self.fields.iter().map(|(t, _)| *t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &[u8])> {
        self.fields.iter().map(|(t, p)| (*t, p.as_slice()))
    }

    pub fn get(&self, tag: u8) -> Option<&[u8]> {
        self.fields
            .binary_search_by_key(&tag, |(t, _)| *t)
            .ok()
            .map(|i| self.fields[i].1.as_slice())
    }

    pub fn get_mut(&mut self, tag: u8) -> Option<&mut Vec<u8>> {
        self.fields
            .binary_search_by_key(&tag, |(t, _)| *t)
            .ok()
            .map(move |i| &mut self.fields[i].1)
    }

    /// Fails unless the tuple holds exactly the given tags (in any order of
    /// the argument).
    pub fn expect_tags(&self, expected: &[u8]) -> Result<(), FramingError> {
        for &tag in expected {
            if self.get(tag).is_none() {
                return Err(FramingError::MissingField(tag));
            }
        }
        match self.tags().find(|t| !expected.contains(t)) {
            Some(extra) => Err(FramingError::UnexpectedField(extra)),
            None => Ok(()),
        }
    }

    /// Like [`get`](Self::get) but a missing tag is an error.
    pub fn require(&self, tag: u8) -> Result<&[u8], FramingError> {
        self.get(tag).ok_or(FramingError::MissingField(tag))
    }
}

pub fn encode_fields(tuple: &FieldTuple) -> Vec<u8> {
    let body: usize = tuple.fields.iter().map(|(_, p)| 5 + p.len()).sum();
    let mut out = Vec::with_capacity(6 + body);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(tuple.fields.len() as u16).to_be_bytes());
    for (tag, payload) in &tuple.fields {
        out.push(*tag);
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(payload);
    }
    out
}

pub fn decode_fields(bytes: &[u8]) -> Result<FieldTuple, FramingError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| FramingError::BadMagic)? != MAGIC {
        return Err(FramingError::BadMagic);
    }
    let count = r.u16()?;
    let mut tuple = FieldTuple::new();
    for _ in 0..count {
        let tag = r.u8()?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?;
        tuple.push(tag, payload)?;
    }
    r.finish()?;
    Ok(tuple)
}

/// A list of signed 64-bit integers: obtainable information, disclosed
/// answers, the random set R.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct IntList(pub Vec<i64>);

impl IntList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for IntList {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[i64; N]> for IntList {
    fn from(v: [i64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl std::fmt::Display for IntList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

pub fn encode_int_list(list: &IntList) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * list.len());
    out.extend_from_slice(&(list.len() as u32).to_be_bytes());
    for v in &list.0 {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_int_list(bytes: &[u8]) -> Result<IntList, FramingError> {
    let mut r = Reader::new(bytes);
    let count = r.u32()? as usize;
    // Bound the allocation by what the input can actually hold.
    if r.remaining() / 8 < count {
        return Err(FramingError::Truncated {
            needed: count * 8 - r.remaining(),
        });
    }
    let items = (0..count)
        .map(|_| r.i64())
        .collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(IntList(items))
}

/// Prefixes `body` with its u32 big-endian length.
pub fn frame(body: &[u8]) -> Result<Vec<u8>, FramingError> {
    if body.len() > u32::MAX as usize {
        return Err(FramingError::TooLong(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

/// Splits one frame off the front of `stream`, returning `(body, rest)`.
pub fn deframe(stream: &[u8]) -> Result<(&[u8], &[u8]), FramingError> {
    let mut r = Reader::new(stream);
    let len = r.u32()? as usize;
    let body = r.take(len)?;
    Ok((body, r.rest()))
}

/// Largest frame a TCP endpoint will accept.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

/// Reads exactly one frame from a byte stream.
///
/// A clean EOF before the length prefix yields `Ok(None)`.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match reader.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_frame<W: Write>(writer: &mut W, body: &[u8]) -> io::Result<()> {
    let framed = frame(body).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    writer.write_all(&framed)?;
    writer.flush()
}

/// Cursor over a byte slice with big-endian readers.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FramingError> {
        if self.remaining() < n {
            return Err(FramingError::Truncated {
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FramingError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FramingError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FramingError> {
        self.array().map(u16::from_be_bytes)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FramingError> {
        self.array().map(u32::from_be_bytes)
    }

    pub(crate) fn i64(&mut self) -> Result<i64, FramingError> {
        self.array().map(i64::from_be_bytes)
    }

    pub(crate) fn rest(self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub(crate) fn finish(self) -> Result<(), FramingError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FramingError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn empty_tuple_is_header_only() {
        assert_eq!(encode_fields(&FieldTuple::new()), [0x52, 0x43, 0x31, 0x53, 0, 0]);
        assert!(decode_fields(&[0x52, 0x43, 0x31, 0x53, 0, 0]).unwrap().is_empty());
    }

    #[test]
    fn single_field_layout() {
        let t = FieldTuple::from_fields([(0x01, vec![0xAB])]).unwrap();
        let expected = [0x52, 0x43, 0x31, 0x53, 0x00, 0x01, 0x01, 0x00, 0x00, 0x00, 0x01, 0xAB];
        assert_eq!(encode_fields(&t), expected);
        assert_eq!(decode_fields(&expected).unwrap(), t);
    }

    #[test]
    fn truncated_single_field_is_rejected() {
        let bytes = [0x52, 0x43, 0x31, 0x53, 0x00, 0x01, 0x01, 0x00, 0x00, 0x00, 0x01];
        assert_eq!(decode_fields(&bytes), Err(FramingError::Truncated { needed: 1 }));
    }

    #[test]
    fn random_bytes_without_magic_are_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut b = [0u8; 16];
            rng.fill(&mut b);
            if b[..4] == MAGIC {
                continue;
            }
            assert_eq!(decode_fields(&b), Err(FramingError::BadMagic));
        }
    }

    #[test]
    fn random_inputs_almost_never_decode() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xC0DEC);
        let mut accepted = 0;
        for _ in 0..10_000 {
            let len = rng.random_range(6..64);
            let b: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            if decode_fields(&b).is_ok() {
                accepted += 1;
            }
        }
        assert!(accepted <= 1, "{accepted} random inputs decoded");
    }

    #[test]
    fn rejects_out_of_order_and_trailing() {
        let mut bytes = encode_fields(
            &FieldTuple::from_fields([(1u8, vec![1u8]), (2, vec![2])]).unwrap(),
        );
        // swap tags 1 and 2
        bytes[6] = 2;
        bytes[12] = 1;
        assert!(matches!(decode_fields(&bytes), Err(FramingError::TagOrder { .. })));

        let mut bytes = encode_fields(&FieldTuple::new());
        bytes.push(0);
        assert_eq!(decode_fields(&bytes), Err(FramingError::TrailingBytes(1)));
        assert!(FieldTuple::from_fields([(2u8, vec![]), (2, vec![])]).is_err());
    }

    #[test]
    fn expect_tags_checks_exact_set() {
        let t = FieldTuple::from_fields([(1u8, vec![]), (2, vec![])]).unwrap();
        assert!(t.expect_tags(&[1, 2]).is_ok());
        assert_eq!(t.expect_tags(&[1, 2, 3]), Err(FramingError::MissingField(3)));
        assert_eq!(t.expect_tags(&[1]), Err(FramingError::UnexpectedField(2)));
    }

    #[test]
    fn int_list_layouts() {
        assert_eq!(encode_int_list(&IntList::default()), [0, 0, 0, 0]);
        let mut expected = vec![0, 0, 0, 2];
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 23]);
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 37]);
        assert_eq!(encode_int_list(&IntList::from([23, 37])), expected);
        assert!(decode_int_list(&expected[..expected.len() - 1]).is_err());
        let mut long = expected.clone();
        long.push(9);
        assert_eq!(decode_int_list(&long), Err(FramingError::TrailingBytes(1)));
        // count claims more items than the buffer holds
        assert!(decode_int_list(&[0xFF, 0xFF, 0xFF, 0xFF]).is_err());
    }

    #[test]
    fn int_list_table1_obtainable_round_trip() {
        let row1 = IntList::from([
            23, 37, 39, 43, 38, 37, 24, 38, 35, 29, 40, 31, 33, 76, 48, 21, 52, 67, 52, 71, 49,
            26, 15, 38, 24,
        ]);
        assert_eq!(row1.len(), 25);
        let bytes = encode_int_list(&row1);
        assert_eq!(bytes.len(), 4 + 25 * 8);
        assert_eq!(decode_int_list(&bytes).unwrap(), row1);
    }

    #[test]
    fn frame_layouts() {
        assert_eq!(frame(&[]).unwrap(), [0, 0, 0, 0]);
        assert_eq!(frame(b"hello").unwrap(), b"\x00\x00\x00\x05hello");
        assert!(matches!(deframe(&[0, 0, 0, 5, 1, 2]), Err(FramingError::Truncated { .. })));
        let (body, rest) = deframe(b"\x00\x00\x00\x02hiXY").unwrap();
        assert_eq!((body, rest), (&b"hi"[..], &b"XY"[..]));
    }

    #[test]
    fn read_frame_from_stream() {
        let mut stream = io::Cursor::new(b"\x00\x00\x00\x03abc\x00\x00\x00\x00".to_vec());
        assert_eq!(read_frame(&mut stream).unwrap().unwrap(), b"abc");
        assert_eq!(read_frame(&mut stream).unwrap().unwrap(), b"");
        assert!(read_frame(&mut stream).unwrap().is_none());
        let mut short = io::Cursor::new(b"\x00\x00\x00\x03ab".to_vec());
        assert!(read_frame(&mut short).is_err());
    }

    fn arb_tuple() -> impl Strategy<Value = FieldTuple> {
        proptest::collection::btree_map(any::<u8>(), proptest::collection::vec(any::<u8>(), 0..40), 0..8)
            .prop_map(|m| FieldTuple::from_fields(m).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fields_round_trip(t in arb_tuple()) {
            let bytes = encode_fields(&t);
            prop_assert_eq!(&encode_fields(&t), &bytes);
            prop_assert_eq!(decode_fields(&bytes).unwrap(), t);
        }

        #[test]
        fn distinct_tuples_encode_distinctly(a in arb_tuple(), b in arb_tuple()) {
            prop_assert_eq!(a == b, encode_fields(&a) == encode_fields(&b));
        }

        #[test]
        fn int_list_round_trip(v in proptest::collection::vec(any::<i64>(), 0..50)) {
            let l = IntList(v);
            prop_assert_eq!(decode_int_list(&encode_int_list(&l)).unwrap(), l);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn frame_round_trip(body in proptest::collection::vec(any::<u8>(), 0..300)) {
            let framed = frame(&body).unwrap();
            let (got, rest) = deframe(&framed).unwrap();
            prop_assert_eq!(got, &body[..]);
            prop_assert!(rest.is_empty());
        }
    }
}
