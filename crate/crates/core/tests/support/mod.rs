//! Reference evaluator for the operator-sequence mapping in exact rational
//! arithmetic, independent of the library's floating-point fold.

#![allow(dead_code)]

use rcshare_core::Op;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn int(v: i64) -> Self {
        Self { num: v as i128, den: 1 }
    }

    fn norm(num: i128, den: i128) -> Self {
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Self { num: s * num / g, den: s * den / g }
    }

    pub fn apply(self, op: Op, rhs: Ratio) -> Option<Ratio> {
        Some(match op {
            Op::Add => Self::norm(self.num * rhs.den + rhs.num * self.den, self.den * rhs.den),
            Op::Sub => Self::norm(self.num * rhs.den - rhs.num * self.den, self.den * rhs.den),
            Op::Mul => Self::norm(self.num * rhs.num, self.den * rhs.den),
            Op::Div => {
                if rhs.num == 0 {
                    return None;
                }
                Self::norm(self.num * rhs.den, self.den * rhs.num)
            }
        })
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Left fold in exact arithmetic; `None` on division by zero.
pub fn exact_fold(ops: &[Op], values: &[i64]) -> Option<Ratio> {
    assert_eq!(values.len(), ops.len() + 1);
    let mut acc = Ratio::int(values[0]);
    for (op, &v) in ops.iter().zip(&values[1..]) {
        acc = acc.apply(*op, Ratio::int(v))?;
    }
    Some(acc)
}

/// Every operator sequence of exactly `len` operators.
pub fn op_sequences(len: usize) -> Vec<Vec<Op>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                Op::ALL.into_iter().map(move |op| {
                    let mut t = s.clone();
                    t.push(op);
                    t
                })
            })
            .collect();
    }
    out
}

/// Every vector of `len` values drawn from `lo..=hi`.
pub fn value_vectors(len: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (lo..=hi).map(move |v| {
                    let mut t = s.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// RFC 1321 appendix A.5.
pub const MD5_SUITE: [(&str, &str); 7] = [
    ("", "d41d8cd98f00b204e9800998ecf8427e"),
    ("a", "0cc175b9c0f1b6a831c399e269772661"),
    ("abc", "900150983cd24fb0d6963f7d28e17f72"),
    ("message digest", "f96b697d7cb7938d525a2f31aaf161d0"),
    ("abcdefghijklmnopqrstuvwxyz", "c3fcd3d76192e4007dfb496cca67e13b"),
    ("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", "d174ab98d277d9f5a5611c2c9f419d9f"),
    (
        "12345678901234567890123456789012345678901234567890123456789012345678901234567890",
        "57edf4a22be3c955ac49da2e2107b67a",
    ),
];
