// SPDX-License-Identifier: Apache-2.0

//! Arithmetic in binary extension fields GF(2^θ), 2 ≤ θ ≤ 16.
//!
//! Elements are stored as the integer encoding of their polynomial
//! coefficients over GF(2). Multiplication goes through log/antilog tables
//! built once per [`FieldContext`]; the tables are indexed by powers of the
//! smallest primitive element, so the modulus only has to be irreducible.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_THETA: u8 = 2;
pub const MAX_THETA: u8 = 16;

/// Irreducible polynomials used when a configuration does not name one.
/// Index is θ.
const DEFAULT_MODULI: [u32; 17] =
    [0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11B, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field exponent {0} outside supported range 2..=16")]
    UnsupportedTheta(u8),
    #[error("modulus {modulus:#x} is not an irreducible polynomial of degree {theta}")]
    Reducible { theta: u8, modulus: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("requested {requested} distinct elements but GF({q}) has only {q}")]
    Capacity { requested: usize, q: usize },
    #[error("value {value:#x} is not an element of GF({q})")]
    NotInField { value: u32, q: usize },
}

/// A field element. Only meaningful together with the [`FieldContext`] it
/// was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gf(pub u16);

impl Gf {
    pub const ZERO: Gf = Gf(0);
    pub const ONE: Gf = Gf(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Gf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// GF(2^θ) with a fixed irreducible modulus. Immutable after construction.
#[derive(Clone)]
pub struct FieldContext {
    theta: u8,
    modulus: u32,
    generator: u16,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl fmt::Debug for FieldContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldContext")
            .field("theta", &self.theta)
            .field("modulus", &format_args!("{:#x}", self.modulus))
            .finish()
    }
}

impl PartialEq for FieldContext {
    fn eq(&self, other: &Self) -> bool {
        self.theta == other.theta && self.modulus == other.modulus
    }
}

impl Eq for FieldContext {}

impl FieldContext {
    /// Field with the default modulus for `theta`.
    pub fn new(theta: u8) -> Result<Self, FieldError> {
        Self::with_modulus(theta, default_modulus(theta)?)
    }

    pub fn with_modulus(theta: u8, modulus: u32) -> Result<Self, FieldError> {
        if !(MIN_THETA..=MAX_THETA).contains(&theta) {
            return Err(FieldError::UnsupportedTheta(theta));
        }
        if degree(modulus) != Some(u32::from(theta)) || !is_irreducible(modulus) {
            return Err(FieldError::Reducible { theta, modulus });
        }
        let q = 1usize << theta;
        let generator = (2..q as u32)
            .find(|&g| multiplicative_order(g, modulus, q) == q - 1)
            .expect("the multiplicative group of a finite field is cyclic") as u16;

        let mut exp = vec![0u16; 2 * (q - 1)];
        let mut log = vec![0u16; q];
        let mut x = 1u32;
        for i in 0..q - 1 {
            exp[i] = x as u16;
            exp[i + q - 1] = x as u16;
            log[x as usize] = i as u16;
            x = clmul_mod(x, u32::from(generator), modulus);
        }
        Ok(Self { theta, modulus, generator, exp, log })
    }

    /// Smallest default field with at least `min_size` elements.
    pub fn smallest_with_size(min_size: usize) -> Result<Self, FieldError> {
        let theta = (MIN_THETA..=MAX_THETA)
            .find(|&t| (1usize << t) >= min_size)
            .ok_or(FieldError::Capacity { requested: min_size, q: 1 << MAX_THETA })?;
        Self::new(theta)
    }

    #[inline]
    pub fn theta(&self) -> u8 {
        self.theta
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Number of elements, 2^θ.
    #[inline]
    pub fn q(&self) -> usize {
        1 << self.theta
    }

    pub fn generator(&self) -> Gf {
        Gf(self.generator)
    }

    #[inline]
    pub fn contains(&self, a: Gf) -> bool {
        (a.0 as usize) < self.q()
    }

    pub fn element(&self, value: u32) -> Result<Gf, FieldError> {
        if (value as usize) < self.q() {
            Ok(Gf(value as u16))
        } else {
            Err(FieldError::NotInField { value, q: self.q() })
        }
    }

    #[inline]
    pub fn add(&self, a: Gf, b: Gf) -> Gf {
        Gf(a.0 ^ b.0)
    }

    /// Identical to [`add`](Self::add) in characteristic 2.
    #[inline]
    pub fn sub(&self, a: Gf, b: Gf) -> Gf {
        Gf(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: Gf, b: Gf) -> Gf {
        if a.0 == 0 || b.0 == 0 {
            return Gf::ZERO;
        }
        let s = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        Gf(self.exp[s])
    }

    pub fn inv(&self, a: Gf) -> Result<Gf, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        let order = self.q() - 1;
        let l = self.log[a.0 as usize] as usize;
        Ok(Gf(self.exp[(order - l) % order]))
    }

    pub fn div(&self, a: Gf, b: Gf) -> Result<Gf, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn checked_add(&self, a: Gf, b: Gf) -> Result<Gf, FieldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add(a, b))
    }

    pub fn checked_mul(&self, a: Gf, b: Gf) -> Result<Gf, FieldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    pub fn checked_inv(&self, a: Gf) -> Result<Gf, FieldError> {
        self.check(a)?;
        self.inv(a)
    }

    fn check(&self, a: Gf) -> Result<(), FieldError> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(FieldError::NotInField { value: u32::from(a.0), q: self.q() })
        }
    }

    /// The first `count` elements in canonical order 0, 1, 2, ….
    pub fn enumerate_elements(&self, count: usize) -> Result<Vec<Gf>, FieldError> {
        if count > self.q() {
            return Err(FieldError::Capacity { requested: count, q: self.q() });
        }
        Ok((0..count).map(|v| Gf(v as u16)).collect())
    }

    /// Multiply-accumulate `acc[i] += coef * src[i]`.
    #[inline]
    pub fn axpy(&self, acc: &mut [Gf], coef: Gf, src: &[Gf]) {
        if coef.is_zero() {
            return;
        }
        let lc = self.log[coef.0 as usize] as usize;
        for (a, s) in acc.iter_mut().zip(src) {
            if s.0 != 0 {
                a.0 ^= self.exp[lc + self.log[s.0 as usize] as usize];
            }
        }
    }

    #[inline]
    pub fn dot(&self, a: &[Gf], b: &[Gf]) -> Gf {
        a.iter().zip(b).fold(Gf::ZERO, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }
}

pub fn default_modulus(theta: u8) -> Result<u32, FieldError> {
    if (MIN_THETA..=MAX_THETA).contains(&theta) {
        Ok(DEFAULT_MODULI[theta as usize])
    } else {
        Err(FieldError::UnsupportedTheta(theta))
    }
}

fn degree(p: u32) -> Option<u32> {
    (p != 0).then(|| 31 - p.leading_zeros())
}

/// Remainder of polynomial division over GF(2).
fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("nonzero divisor");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Exhaustive trial division by every polynomial of degree 1..=deg/2.
pub fn is_irreducible(p: u32) -> bool {
    let Some(d) = degree(p) else { return false };
    if d == 0 {
        return false;
    }
    (2u32..(1 << (d / 2 + 1))).all(|divisor| poly_rem(p, divisor) != 0)
}

/// Carry-less product reduced modulo `modulus`.
pub(crate) fn clmul_mod(a: u32, b: u32, modulus: u32) -> u32 {
    let d = degree(modulus).expect("nonzero modulus");
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << d) != 0 {
            a ^= modulus;
        }
    }
    acc
}

fn multiplicative_order(g: u32, modulus: u32, q: usize) -> usize {
    let mut x = g;
    let mut n = 1;
    while x != 1 {
        x = clmul_mod(x, g, modulus);
        n += 1;
        if n > q {
            return 0;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf16() -> FieldContext {
        FieldContext::new(4).unwrap()
    }

    #[test]
    fn default_moduli_are_irreducible() {
        for theta in MIN_THETA..=MAX_THETA {
            let m = default_modulus(theta).unwrap();
            assert!(is_irreducible(m), "theta {theta}");
            assert_eq!(degree(m), Some(u32::from(theta)));
        }
        assert_eq!(default_modulus(4).unwrap(), 0x13);
        assert_eq!(default_modulus(8).unwrap(), 0x11B);
    }

    #[test]
    fn reducible_modulus_rejected() {
        // x^4 + 1 = (x + 1)^4
        assert_eq!(FieldContext::with_modulus(4, 0x11), Err(FieldError::Reducible { theta: 4, modulus: 0x11 }));
        assert!(matches!(FieldContext::new(1), Err(FieldError::UnsupportedTheta(1))));
        assert!(matches!(FieldContext::new(17), Err(FieldError::UnsupportedTheta(17))));
    }

    #[test]
    fn add_examples() {
        let f = gf16();
        assert_eq!(f.add(Gf(0x5), Gf(0x5)), Gf(0x0));
        assert_eq!(f.add(Gf(0xA), Gf(0x0)), Gf(0xA));
        assert_eq!(f.add(Gf(0x6), Gf(0x3)), Gf(0x5));
    }

    #[test]
    fn mul_examples() {
        let f = gf16();
        assert_eq!(f.mul(Gf(0x2), Gf(0x9)), Gf(0x1));
        for a in 0..16 {
            assert_eq!(f.mul(Gf(a), Gf::ONE), Gf(a));
            assert_eq!(f.mul(Gf(a), Gf::ZERO), Gf::ZERO);
        }
    }

    #[test]
    fn inv_examples() {
        let f = gf16();
        assert_eq!(f.inv(Gf(0x2)), Ok(Gf(0x9)));
        assert_eq!(f.inv(Gf(0x1)), Ok(Gf(0x1)));
        assert_eq!(f.inv(Gf(0x3)), Ok(Gf(0xE)));
        assert_eq!(f.inv(Gf::ZERO), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn checked_ops_reject_foreign_values() {
        let f = gf16();
        assert!(matches!(f.checked_add(Gf(0x10), Gf(1)), Err(FieldError::NotInField { .. })));
        assert!(matches!(f.checked_mul(Gf(1), Gf(0x20)), Err(FieldError::NotInField { .. })));
        assert_eq!(f.checked_inv(Gf(2)), Ok(Gf(9)));
    }

    #[test]
    fn table_mul_matches_carryless_reference() {
        for theta in [2u8, 3, 4, 5, 8] {
            let f = FieldContext::new(theta).unwrap();
            let q = f.q() as u32;
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(u32::from(f.mul(Gf(a as u16), Gf(b as u16)).0), clmul_mod(a, b, f.modulus()));
                }
            }
        }
    }

    #[test]
    fn inverse_exhaustive_up_to_theta_8() {
        for theta in 2..=8u8 {
            let f = FieldContext::new(theta).unwrap();
            for a in 1..f.q() as u16 {
                assert_eq!(f.mul(Gf(a), f.inv(Gf(a)).unwrap()), Gf::ONE);
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for theta in 2..=4u8 {
            let f = FieldContext::new(theta).unwrap();
            let els: Vec<Gf> = (0..f.q() as u16).map(Gf).collect();
            for &a in &els {
                assert_eq!(f.add(a, a), Gf::ZERO);
                for &b in &els {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for &c in &els {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn large_fields_build() {
        let f = FieldContext::new(16).unwrap();
        assert_eq!(f.q(), 65536);
        let a = Gf(0x1234);
        assert_eq!(f.mul(a, f.inv(a).unwrap()), Gf::ONE);
        let f8 = FieldContext::new(8).unwrap();
        // x is not primitive modulo 0x11B; the tables use another generator
        assert_ne!(f8.generator(), Gf(2));
    }

    #[test]
    fn enumerate_examples() {
        let f4 = FieldContext::new(2).unwrap();
        assert_eq!(f4.enumerate_elements(3).unwrap(), vec![Gf(0), Gf(1), Gf(2)]);
        assert!(gf16().enumerate_elements(0).unwrap().is_empty());
        assert_eq!(f4.enumerate_elements(5), Err(FieldError::Capacity { requested: 5, q: 4 }));
    }

    #[test]
    fn smallest_field_for_size() {
        assert_eq!(FieldContext::smallest_with_size(3).unwrap().theta(), 2);
        assert_eq!(FieldContext::smallest_with_size(16).unwrap().theta(), 4);
        assert_eq!(FieldContext::smallest_with_size(17).unwrap().theta(), 5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gf256_distributive(a in 0u16..256, b in 0u16..256, c in 0u16..256) {
                let f = FieldContext::new(8).unwrap();
                let (a, b, c) = (Gf(a), Gf(b), Gf(c));
                prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            }

            #[test]
            fn gf65536_inverse(a in 1u16..=u16::MAX) {
                let f = FieldContext::new(16).unwrap();
                prop_assert_eq!(f.mul(Gf(a), f.inv(Gf(a)).unwrap()), Gf::ONE);
            }

            #[test]
            fn enumerate_distinct(theta in 2u8..=10, frac in 0.0f64..=1.0) {
                let f = FieldContext::new(theta).unwrap();
                let n = (f.q() as f64 * frac) as usize;
                let els = f.enumerate_elements(n).unwrap();
                let set: std::collections::BTreeSet<_> = els.iter().collect();
                prop_assert_eq!(set.len(), n);
            }
        }
    }
}
