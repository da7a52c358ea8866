//! Key-store directory.
//!
//! ```text
//! <dir>/public_keys.txt   one line per party:  <party> <bits> <modulus> <e>
//! <dir>/<party>.private   one line:            <party> <bits> <modulus> <e> <d> <p> <q>
//! ```
//!
//! Integers are lowercase hex without a prefix. Blank lines and lines starting
//! with `#` are ignored. The public file is what every role loads into its
//! [`KeyRegistry`]; a role only ever reads its own `.private` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use super::{CryptoError, KeyPair, KeyRegistry, PublicKey};
use crate::party::PartyId;

pub const PUBLIC_FILE: &str = "public_keys.txt";

#[derive(Debug, Clone)]
pub struct KeyStore {
    dir: PathBuf,
}

impl KeyStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn public_path(&self) -> PathBuf {
        self.dir.join(PUBLIC_FILE)
    }

    fn private_path(&self, party: &PartyId) -> PathBuf {
        self.dir.join(format!("{party}.private"))
    }

    /// Writes the party's private file and adds or replaces its line in the
    /// public file.
    pub fn save(&self, party: &PartyId, pair: &KeyPair) -> Result<(), CryptoError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let mut publics = if self.public_path().exists() {
            self.load_public_map()?
        } else {
            BTreeMap::new()
        };
        publics.insert(party.clone(), pair.public().clone());
        let mut text = String::from("# party bits modulus public_exponent\n");
        for (p, k) in &publics {
            text.push_str(&public_line(p, k));
            text.push('\n');
        }
        fs::write(self.public_path(), text).map_err(|e| io_err(&self.public_path(), e))?;

        let (p, q) = pair.primes();
        let private = format!(
            "# party bits modulus public_exponent private_exponent p q\n{} {:x} {:x} {:x}\n",
            public_line(party, pair.public()),
            pair.private_exponent(),
            p,
            q
        );
        let path = self.private_path(party);
        fs::write(&path, private).map_err(|e| io_err(&path, e))
    }

    pub fn load_registry(&self) -> Result<KeyRegistry, CryptoError> {
        let reg = KeyRegistry::new();
        for (party, key) in self.load_public_map()? {
            reg.register(party, key)?;
        }
        Ok(reg)
    }

    pub fn load_private(&self, party: &PartyId) -> Result<KeyPair, CryptoError> {
        let path = self.private_path(party);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut lines = records(&text);
        let (line_no, fields) = lines.next().ok_or_else(|| store_err(&path, "no key record"))?;
        if lines.next().is_some() {
            return Err(store_err(&path, "more than one key record"));
        }
        let [id, bits, n, e, d, p, q] = fields[..] else {
            return Err(store_err(&path, &format!("line {line_no}: expected 7 fields")));
        };
        if id != party.as_str() {
            return Err(store_err(&path, &format!("line {line_no}: record is for {id}")));
        }
        let at = |what: &str| format!("line {line_no}: {what}");
        let public = PublicKey::new(parse_bits(bits, &path, &at("bits"))?, hex(n, &path, &at("modulus"))?, hex(e, &path, &at("e"))?)?;
        KeyPair::from_parts(public, hex(d, &path, &at("d"))?, hex(p, &path, &at("p"))?, hex(q, &path, &at("q"))?)
    }

    fn load_public_map(&self) -> Result<BTreeMap<PartyId, PublicKey>, CryptoError> {
        let path = self.public_path();
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut out = BTreeMap::new();
        for (line_no, fields) in records(&text) {
            let at = |what: &str| format!("line {line_no}: {what}");
            let [id, bits, n, e] = fields[..] else {
                return Err(store_err(&path, &at("expected 4 fields")));
            };
            let party = PartyId::new(id).map_err(|err| store_err(&path, &at(&err.to_string())))?;
            let key = PublicKey::new(parse_bits(bits, &path, &at("bits"))?, hex(n, &path, &at("modulus"))?, hex(e, &path, &at("e"))?)?;
            if out.insert(party.clone(), key).is_some() {
                return Err(CryptoError::DuplicateParty(party));
            }
        }
        Ok(out)
    }
}

fn public_line(party: &PartyId, key: &PublicKey) -> String {
    format!("{party} {} {:x} {:x}", key.bits(), key.modulus(), key.exponent())
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split_whitespace().collect()))
}

fn hex(s: &str, path: &Path, what: &str) -> Result<BigUint, CryptoError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(store_err(path, &format!("{what}: not lowercase hex")));
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| store_err(path, what))
}

fn parse_bits(s: &str, path: &Path, what: &str) -> Result<u32, CryptoError> {
    s.parse().map_err(|_| store_err(path, &format!("{what}: not an integer")))
}

fn store_err(path: &Path, message: &str) -> CryptoError {
    CryptoError::KeyStore { path: path.display().to_string(), message: message.to_string() }
}

fn io_err(path: &Path, e: std::io::Error) -> CryptoError {
    store_err(path, &e.to_string())
}
