//! Textbook RSA usable in both key directions.
//!
//! Encrypting with the public key gives confidentiality; encrypting with the
//! private key gives message-recovering authentication (anyone holding the
//! public key can decrypt, and only the key owner could have produced it).
//! There is no padding: plaintext is cut into blocks of `k - 2` bytes, where
//! `k = bits / 8`, and each block is turned into the integer
//! `len || data` (one length byte, then the data, big-endian). The block
//! integer therefore has at most `k - 1` bytes and is below the modulus.
//!
//! Decryption checks that every recovered integer has that exact shape. Under
//! a wrong key the recovered integer is essentially uniform below the modulus
//! and passes with negligible probability.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{audit, md5, CryptoError, Digest16};
use crate::codec::{FramingError, Reader};

pub const PUBLIC_EXPONENT: u32 = 65537;
pub const MIN_KEY_BITS: u32 = 64;
/// Default modulus size for protocol keys.
pub const DEFAULT_KEY_BITS: u32 = 512;

/// Miller-Rabin rounds; error probability at most 4^-40 = 2^-80.
const MILLER_RABIN_ROUNDS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    WithPublic,
    WithPrivate,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Self::WithPublic => Self::WithPrivate,
            Self::WithPrivate => Self::WithPublic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    modulus: BigUint,
    exponent: BigUint,
    bits: u32,
}

impl PublicKey {
    pub fn new(bits: u32, modulus: BigUint, exponent: BigUint) -> Result<Self, CryptoError> {
        if bits < MIN_KEY_BITS || modulus.bits() != u64::from(bits) {
            return Err(CryptoError::Parameter(format!(
                "modulus has {} bits, declared {bits} (minimum {MIN_KEY_BITS})",
                modulus.bits()
            )));
        }
        if exponent.is_zero() || exponent >= modulus {
            return Err(CryptoError::Parameter("public exponent out of range".into()));
        }
        Ok(Self { modulus, exponent, bits })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn exponent(&self) -> &BigUint {
        &self.exponent
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Digest of the modulus, used to tell keys apart in audit logs.
    pub fn fingerprint(&self) -> Digest16 {
        md5(&self.modulus.to_bytes_be())
    }

    /// Public-key encryption (confidentiality towards the key owner).
    pub fn encrypt(&self, plaintext: &[u8]) -> Ciphertext {
        apply_encrypt(self, &self.exponent, Direction::WithPublic, plaintext)
    }

    /// Public-key decryption of something the owner encrypted with its
    /// private key (authentication of the owner).
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
        apply_decrypt(self, &self.exponent, Direction::WithPublic, ct)
    }

    fn block_data_len(&self) -> usize {
        self.bits as usize / 8 - 2
    }
}

/// Public and private halves of one party's key.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    public: PublicKey,
    private_exponent: BigUint,
    p: BigUint,
    q: BigUint,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("bits", &self.public.bits)
            .field("fingerprint", &self.public.fingerprint())
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Rebuilds a pair from stored components, checking that they agree.
    pub fn from_parts(
        public: PublicKey,
        private_exponent: BigUint,
        p: BigUint,
        q: BigUint,
    ) -> Result<Self, CryptoError> {
        if &p * &q != public.modulus {
            return Err(CryptoError::Parameter("p * q does not equal the modulus".into()));
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        if !(&private_exponent * &public.exponent % &phi).is_one() {
            return Err(CryptoError::Parameter("exponents are not inverse mod phi".into()));
        }
        Ok(Self { public, private_exponent, p, q })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.private_exponent
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    pub fn bits(&self) -> u32 {
        self.public.bits
    }

    pub fn encrypt(&self, direction: Direction, plaintext: &[u8]) -> Ciphertext {
        match direction {
            Direction::WithPublic => self.public.encrypt(plaintext),
            Direction::WithPrivate => self.encrypt_private(plaintext),
        }
    }

    pub fn decrypt(&self, direction: Direction, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
        match direction {
            Direction::WithPublic => self.public.decrypt(ct),
            Direction::WithPrivate => self.decrypt_private(ct),
        }
    }

    /// Private-key "encryption": a message-recovering signature.
    pub fn encrypt_private(&self, plaintext: &[u8]) -> Ciphertext {
        apply_encrypt(&self.public, &self.private_exponent, Direction::WithPrivate, plaintext)
    }

    pub fn decrypt_private(&self, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
        apply_decrypt(&self.public, &self.private_exponent, Direction::WithPrivate, ct)
    }
}

/// Deterministic key generation: the same `(bits, seed)` always yields the
/// same pair.
pub fn keygen(bits: u32, seed: u64) -> Result<KeyPair, CryptoError> {
    keygen_with(bits, &mut ChaCha20Rng::seed_from_u64(seed))
}

pub fn keygen_with<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<KeyPair, CryptoError> {
    if bits < MIN_KEY_BITS || bits & 1 == 1 {
        return Err(CryptoError::Parameter(format!(
            "key size must be an even number of bits >= {MIN_KEY_BITS}, got {bits}"
        )));
    }
    let e = BigUint::from(PUBLIC_EXPONENT);
    loop {
        let p = random_prime(bits / 2, rng);
        let q = random_prime(bits / 2, rng);
        if p == q {
            continue;
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        if !e.gcd(&phi).is_one() {
            continue;
        }
        let d = e.modinv(&phi).expect("e is coprime to phi");
        let n = &p * &q;
        debug_assert_eq!(n.bits(), u64::from(bits));
        let public = PublicKey { modulus: n, exponent: e, bits };
        return Ok(KeyPair { public, private_exponent: d, p, q });
    }
}

/// Random prime with exactly `bits` bits and its top two bits set, so the
/// product of two such primes has exactly `2 * bits` bits.
fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = random_bits(bits, rng);
        candidate.set_bit(u64::from(bits) - 1, true);
        candidate.set_bit(u64::from(bits) - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

fn random_bits<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> BigUint {
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    let excess = bytes.len() * 8 - bits as usize;
    bytes[0] &= 0xFF >> excess;
    BigUint::from_bytes_be(&bytes)
}

const SMALL_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Trial division by small primes followed by Miller-Rabin with random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    for &sp in &SMALL_PRIMES {
        if *n == BigUint::from(sp) {
            return true;
        }
        if (n % sp).is_zero() {
            return false;
        }
    }
    if *n < BigUint::from(2u32) {
        return false;
    }
    let one = BigUint::one();
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n is odd and > 2");
    let d = &n_minus_1 >> s;
    let base_range = n - 3u32;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        // base in [2, n - 2]
        let a = random_bits(n.bits() as u32, rng) % &base_range + 2u32;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// RSA ciphertext: one integer per plaintext block.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    chunks: Vec<BigUint>,
}

impl Ciphertext {
    pub fn from_chunks(chunks: Vec<BigUint>) -> Self {
        Self { chunks }
    }

    pub fn chunks(&self) -> &[BigUint] {
        &self.chunks
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// `u32 count | { u16 len | minimal big-endian magnitude }*`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.chunks.len() * 66);
        out.extend_from_slice(&(self.chunks.len() as u32).to_be_bytes());
        for c in &self.chunks {
            let mag = if c.is_zero() { Vec::new() } else { c.to_bytes_be() };
            out.extend_from_slice(&(mag.len() as u16).to_be_bytes());
            out.extend_from_slice(&mag);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FramingError> {
        let mut r = Reader::new(bytes);
        let count = r.u32()? as usize;
        // each chunk needs at least its 2-byte length
        if r.remaining() / 2 < count {
            return Err(FramingError::Truncated { needed: count * 2 - r.remaining() });
        }
        let mut chunks = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let mag = r.take(len)?;
            if mag.first() == Some(&0) {
                return Err(FramingError::Malformed("non-minimal chunk encoding"));
            }
            chunks.push(BigUint::from_bytes_be(mag));
        }
        r.finish()?;
        Ok(Self { chunks })
    }
}

fn apply_encrypt(
    key: &PublicKey,
    exponent: &BigUint,
    direction: Direction,
    plaintext: &[u8],
) -> Ciphertext {
    audit::record(audit::CryptoOp::Encrypt, direction, key);
    let chunks = plaintext
        .chunks(key.block_data_len())
        .map(|block| {
            let mut bytes = Vec::with_capacity(block.len() + 1);
            bytes.push(block.len() as u8);
            bytes.extend_from_slice(block);
            BigUint::from_bytes_be(&bytes).modpow(exponent, &key.modulus)
        })
        .collect();
    Ciphertext { chunks }
}

fn apply_decrypt(
    key: &PublicKey,
    exponent: &BigUint,
    direction: Direction,
    ct: &Ciphertext,
) -> Result<Vec<u8>, CryptoError> {
    audit::record(audit::CryptoOp::Decrypt, direction, key);
    let full = key.block_data_len();
    let mut out = Vec::with_capacity(ct.chunks.len() * full);
    let last = ct.chunks.len().saturating_sub(1);
    for (i, c) in ct.chunks.iter().enumerate() {
        if *c >= key.modulus {
            return Err(CryptoError::Chunk(format!("chunk {i} is not below the modulus")));
        }
        let block = c.modpow(exponent, &key.modulus).to_bytes_be();
        let len = block[0] as usize;
        if len == 0 || len > full || block.len() != len + 1 {
            return Err(CryptoError::Chunk(format!("chunk {i} has an inconsistent length header")));
        }
        if i != last && len != full {
            return Err(CryptoError::Chunk(format!("short block {i} before the final block")));
        }
        out.extend_from_slice(&block[1..]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair(bits: u32, seed: u64) -> KeyPair {
        keygen(bits, seed).unwrap()
    }

    #[test]
    fn keygen_is_deterministic() {
        assert_eq!(pair(512, 1), pair(512, 1));
        assert_ne!(pair(128, 1), pair(128, 2));
    }

    #[test]
    fn keygen_rejects_bad_sizes() {
        assert!(matches!(keygen(32, 1), Err(CryptoError::Parameter(_))));
        assert!(matches!(keygen(63, 1), Err(CryptoError::Parameter(_))));
        assert!(keygen(66, 1).is_ok());
    }

    #[test]
    fn modulus_has_requested_size() {
        for bits in [64, 128, 256, 512] {
            let kp = pair(bits, u64::from(bits));
            assert_eq!(kp.public().modulus().bits(), u64::from(bits));
            assert_eq!(kp.bits(), bits);
        }
    }

    #[test]
    fn round_trip_512_both_directions() {
        let kp = pair(512, 9);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for _ in 0..100 {
            let len = rng.random_range(0..300);
            let m: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            assert_eq!(kp.decrypt_private(&kp.public().encrypt(&m)).unwrap(), m);
            assert_eq!(kp.public().decrypt(&kp.encrypt_private(&m)).unwrap(), m);
        }
    }

    #[test]
    fn empty_plaintext_has_no_chunks() {
        let kp = pair(128, 1);
        let ct = kp.public().encrypt(&[]);
        assert_eq!(ct.chunk_count(), 0);
        assert_eq!(kp.decrypt_private(&ct).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn block_split_sizes() {
        let kp = pair(128, 1);
        // 128-bit modulus: 16-byte integers, 14 data bytes per block
        assert_eq!(kp.public().encrypt(&[7; 14]).chunk_count(), 1);
        assert_eq!(kp.public().encrypt(&[7; 15]).chunk_count(), 2);
        assert_eq!(kp.public().encrypt(&[0; 28]).chunk_count(), 2);
        // leading zero bytes survive
        let m = [0, 0, 0, 1];
        assert_eq!(kp.decrypt_private(&kp.public().encrypt(&m)).unwrap(), m);
    }

    #[test]
    fn chunk_not_below_modulus_is_rejected() {
        let kp = pair(128, 1);
        let ct = Ciphertext::from_chunks(vec![kp.public().modulus().clone()]);
        assert!(matches!(kp.decrypt_private(&ct), Err(CryptoError::Chunk(_))));
    }

    #[test]
    fn wrong_key_is_detected() {
        let a = pair(256, 100);
        let b = pair(256, 200);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut detected = 0;
        for _ in 0..200 {
            let m: Vec<u8> = (0..rng.random_range(1..100)).map(|_| rng.random()).collect();
            let wrong = b.public().decrypt(&a.encrypt_private(&m));
            let caught = match wrong {
                Err(_) => true,
                Ok(bytes) => crate::codec::decode_fields(&bytes).is_err(),
            };
            detected += caught as usize;
        }
        assert!(detected >= 199, "detected {detected}/200");
    }

    #[test]
    fn ciphertext_bytes_reject_non_minimal() {
        let ct = Ciphertext::from_chunks(vec![BigUint::from(5u32), BigUint::zero()]);
        let bytes = ct.to_bytes();
        assert_eq!(bytes, [0, 0, 0, 2, 0, 1, 5, 0, 0]);
        assert_eq!(Ciphertext::from_bytes(&bytes).unwrap(), ct);
        assert!(Ciphertext::from_bytes(&[0, 0, 0, 1, 0, 2, 0, 5]).is_err());
        assert!(Ciphertext::from_bytes(&[0, 0, 0, 1, 0, 2, 5]).is_err());
        assert!(Ciphertext::from_bytes(&[0xFF, 0xFF, 0xFF, 0xFF]).is_err());
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for n in 2u32..3000 {
            let trial = (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&BigUint::from(n), &mut rng), trial, "n = {n}");
        }
        // Carmichael numbers
        for n in [561u32, 1105, 1729, 2465, 2821, 6601, 8911] {
            assert!(!is_probable_prime(&BigUint::from(n), &mut rng));
        }
    }

    #[test]
    fn from_parts_validates() {
        let kp = pair(128, 3);
        let (p, q) = kp.primes();
        let rebuilt =
            KeyPair::from_parts(kp.public().clone(), kp.private_exponent().clone(), p.clone(), q.clone())
                .unwrap();
        assert_eq!(rebuilt, kp);
        let bad_d = kp.private_exponent() + 1u32;
        assert!(KeyPair::from_parts(kp.public().clone(), bad_d, p.clone(), q.clone()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn encrypt_is_deterministic_and_invertible(
            seed in 0u64..4,
            m in proptest::collection::vec(any::<u8>(), 0..200),
        ) {
            let kp = pair(256, seed);
            for dir in [Direction::WithPublic, Direction::WithPrivate] {
                let ct = kp.encrypt(dir, &m);
                prop_assert_eq!(&ct, &kp.encrypt(dir, &m));
                prop_assert!(ct.chunks().iter().all(|c| c < kp.public().modulus()));
                prop_assert_eq!(kp.decrypt(dir.opposite(), &ct).unwrap(), m.clone());
                prop_assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
            }
        }
    }
}
