//! Department verification through a secret per-pair mapping function.
//!
//! Each (personnel, department) pair shares an operator sequence over
//! `{+, -, *, /}`. Applied to the request's random set `R = r1..rn` as a
//! left-to-right fold, `((r1 op1 r2) op2 r3) ...`, it yields the raw value;
//! the value carried in the response is its sine (radians). Only the
//! department and the master control know the sequence, so a matching sine
//! tells the master control the response came from the intended department.

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_int_list, encode_int_list, FramingError, IntList};
use crate::party::PartyId;

pub const R_MIN: i64 = 1;
pub const R_MAX: i64 = 100;
pub const DEFAULT_SET_LEN: usize = 5;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Divisors with smaller magnitude are rejected.
pub const MIN_DIVISOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MappingError {
    #[error("mapping has {ops} operators but the random set has {values} values")]
    Arity { ops: usize, values: usize },
    #[error("division by {divisor} at step {step}")]
    Divisor { step: usize, divisor: f64 },
    #[error("no mapping registered for ({0}, {1})")]
    UnknownPair(PartyId, PartyId),
    #[error("random value {0} outside [{R_MIN}, {R_MAX}]")]
    OutOfRange(i64),
    #[error("random set must not be empty")]
    EmptySet,
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Framing(#[from] FramingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// The secret operator sequence shared by one (personnel, department) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingSpec {
    pub personnel: PartyId,
    pub department: PartyId,
    pub ops: Vec<Op>,
}

impl MappingSpec {
    pub fn new(personnel: PartyId, department: PartyId, ops: Vec<Op>) -> Self {
        Self { personnel, department, ops }
    }

    /// Number of random values this spec consumes.
    pub fn arity(&self) -> usize {
        self.ops.len() + 1
    }

    /// A uniformly random operator sequence for the same pair that differs
    /// from this one in at least one position.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R) -> MappingSpec {
        if self.ops.is_empty() {
            return self.clone();
        }
        loop {
            let ops: Vec<Op> = (0..self.ops.len()).map(|_| Op::ALL[rng.random_range(0..4)]).collect();
            if ops != self.ops {
                return MappingSpec { ops, ..self.clone() };
            }
        }
    }
}

/// The request's random values, each in `[1, 100]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomSet(Vec<i64>);

impl RandomSet {
    pub fn new(values: Vec<i64>) -> Result<Self, MappingError> {
        if values.is_empty() {
            return Err(MappingError::EmptySet);
        }
        if let Some(&v) = values.iter().find(|v| !(R_MIN..=R_MAX).contains(*v)) {
            return Err(MappingError::OutOfRange(v));
        }
        Ok(Self(values))
    }

    pub fn draw<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "random set needs at least one value");
        Self((0..n).map(|_| rng.random_range(R_MIN..=R_MAX)).collect())
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_int_list(&IntList(self.0.clone()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MappingError> {
        Self::new(decode_int_list(bytes)?.0)
    }
}

/// Raw fold result and its sine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingValue {
    pub raw: f64,
    pub sine: f64,
}

impl MappingValue {
    /// Wire form of the sine: binary64, big-endian.
    pub fn sine_bytes(&self) -> [u8; 8] {
        self.sine.to_be_bytes()
    }
}

pub fn sine_from_bytes(bytes: &[u8]) -> Result<f64, FramingError> {
    let arr: [u8; 8] = bytes
        .try_into()
        .map_err(|_| FramingError::Malformed("mapping value must be 8 bytes"))?;
    Ok(f64::from_be_bytes(arr))
}

/// Left-to-right fold of `ops` over arbitrary values, without the `[1, 100]`
/// restriction on the inputs.
pub fn fold_values(ops: &[Op], values: &[f64]) -> Result<f64, MappingError> {
    if values.len() != ops.len() + 1 {
        return Err(MappingError::Arity { ops: ops.len(), values: values.len() });
    }
    let mut acc = values[0];
    for (step, (op, &v)) in ops.iter().zip(&values[1..]).enumerate() {
        acc = match op {
            Op::Add => acc + v,
            Op::Sub => acc - v,
            Op::Mul => acc * v,
            Op::Div => {
                if v.abs() < MIN_DIVISOR {
                    return Err(MappingError::Divisor { step, divisor: v });
                }
                acc / v
            }
        };
    }
    Ok(acc)
}

pub fn eval_mapping(spec: &MappingSpec, r: &RandomSet) -> Result<MappingValue, MappingError> {
    let values: Vec<f64> = r.values().iter().map(|&v| v as f64).collect();
    let raw = fold_values(&spec.ops, &values)?;
    Ok(MappingValue { raw, sine: raw.sin() })
}

pub fn verify_mapping(
    spec: &MappingSpec,
    r: &RandomSet,
    claimed_sine: f64,
    tol: f64,
) -> Result<bool, MappingError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(MappingError::Tolerance(tol));
    }
    let expected = eval_mapping(spec, r)?;
    // NaN claims compare false
    Ok((expected.sine - claimed_sine).abs() <= tol)
}

/// Mapping specs by (personnel, department).
///
/// Insert and lookup are linearizable; lookups may run concurrently.
#[derive(Debug, Default)]
pub struct MappingRegistry {
    specs: RwLock<HashMap<(PartyId, PartyId), MappingSpec>>,
}

impl Clone for MappingRegistry {
    fn clone(&self) -> Self {
        Self { specs: RwLock::new(self.specs.read().expect("mapping lock poisoned").clone()) }
    }
}

impl MappingRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `spec` under its own pair, returning the spec it replaced.
    pub fn insert(&self, spec: MappingSpec) -> Option<MappingSpec> {
        let key = (spec.personnel.clone(), spec.department.clone());
        self.specs.write().expect("mapping lock poisoned").insert(key, spec)
    }

    pub fn lookup(&self, personnel: &PartyId, department: &PartyId) -> Result<MappingSpec, MappingError> {
        self.specs
            .read()
            .expect("mapping lock poisoned")
            .get(&(personnel.clone(), department.clone()))
            .cloned()
            .ok_or_else(|| MappingError::UnknownPair(personnel.clone(), department.clone()))
    }

    pub fn len(&self) -> usize {
        self.specs.read().expect("mapping lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
