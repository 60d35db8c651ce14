//! Finite-field arithmetic over GF(p^k) for small orders (q ≤ 64).
//!
//! Fields are built once and then used as immutable lookup tables, which
//! keeps Reed-Solomon construction and the exhaustive axiom tests trivial.
//! Extension fields use a fixed irreducible polynomial per `(p, k)` so
//! that element indexing (and therefore every codeword table built on
//! top) is reproducible across runs.

use alloc::vec::Vec;
use thiserror::Error;

/// Largest supported field order.
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("exponent must be positive")]
    ZeroExponent,
    #[error("order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("{0} is not a prime power")]
    NotPrimePower(usize),
    #[error("element {value} out of range for field of order {q}")]
    ValueOutOfRange { value: usize, q: usize },
    #[error("operands belong to different fields")]
    MixedFields,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("empty coefficient list")]
    EmptyPolynomial,
}

/// Identifies a field by `(p, k)`. Because the irreducible polynomial is
/// fixed per `(p, k)`, two fields with equal ids have identical tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldId {
    pub p: u8,
    pub k: u8,
}

/// An element of GF(p^k), stored as its index in `[0, q)`.
///
/// For `k > 1` the index encodes the polynomial-basis coefficients in
/// base `p`, least significant coefficient first: index
/// `c_0 + c_1 p + … + c_{k-1} p^{k-1}` is `c_0 + c_1 x + …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u8,
    field: FieldId,
}

impl FieldElement {
    pub fn value(&self) -> usize {
        self.value as usize
    }

    pub fn field_id(&self) -> FieldId {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

/// Fixed irreducible polynomials, low-degree coefficient first, for every
/// prime power 4 ≤ p^k ≤ 64 with k > 1. All are monic and documented
/// minimal-weight choices; construction re-verifies invertibility, so a
/// reducible entry could not slip through silently.
fn irreducible_poly(p: usize, k: usize) -> Option<&'static [u8]> {
    match (p, k) {
        (2, 2) => Some(&[1, 1, 1]),          // x^2 + x + 1
        (2, 3) => Some(&[1, 1, 0, 1]),       // x^3 + x + 1
        (2, 4) => Some(&[1, 1, 0, 0, 1]),    // x^4 + x + 1
        (2, 5) => Some(&[1, 0, 1, 0, 0, 1]), // x^5 + x^2 + 1
        (2, 6) => Some(&[1, 1, 0, 0, 0, 0, 1]), // x^6 + x + 1
        (3, 2) => Some(&[1, 0, 1]),          // x^2 + 1
        (3, 3) => Some(&[1, 2, 0, 1]),       // x^3 + 2x + 1
        (5, 2) => Some(&[2, 0, 1]),          // x^2 + 2
        (7, 2) => Some(&[1, 0, 1]),          // x^2 + 1
        _ => None,
    }
}

fn is_prime(p: usize) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= p {
        if p.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// GF(p^k) with full addition/multiplication/inverse tables.
#[derive(Debug, Clone)]
pub struct FiniteField {
    id: FieldId,
    q: usize,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
    irreducible: Option<Vec<u8>>,
}

impl FiniteField {
    /// Builds GF(p^k). Verifies the identity elements and that every
    /// nonzero element has a multiplicative inverse before returning.
    pub fn new(p: usize, k: usize) -> Result<Self, GfError> {
        if !is_prime(p) {
            return Err(GfError::NotPrime(p));
        }
        if k == 0 {
            return Err(GfError::ZeroExponent);
        }
        let mut q: usize = 1;
        for _ in 0..k {
            q = q.checked_mul(p).ok_or(GfError::OrderTooLarge(usize::MAX))?;
            if q > MAX_ORDER {
                return Err(GfError::OrderTooLarge(q));
            }
        }
        let irreducible = if k > 1 {
            Some(
                irreducible_poly(p, k)
                    .expect("every prime power <= 64 has a table entry")
                    .to_vec(),
            )
        } else {
            None
        };

        let digits = |mut v: usize| -> Vec<u8> {
            let mut out = Vec::with_capacity(k);
            for _ in 0..k {
                out.push((v % p) as u8);
                v /= p;
            }
            out
        };
        let pack = |coeffs: &[u8]| -> usize {
            coeffs.iter().rev().fold(0usize, |acc, &c| acc * p + c as usize)
        };

        let mut add = Vec::with_capacity(q * q);
        let mut mul = Vec::with_capacity(q * q);
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                // Pointwise addition of coefficient vectors.
                let sum: Vec<u8> = da
                    .iter()
                    .zip(&db)
                    .map(|(&x, &y)| ((x as usize + y as usize) % p) as u8)
                    .collect();
                add.push(pack(&sum) as u8);
                // Convolution followed by reduction mod the irreducible.
                let mut conv = alloc::vec![0usize; 2 * k - 1];
                for (i, &x) in da.iter().enumerate() {
                    for (j, &y) in db.iter().enumerate() {
                        conv[i + j] += x as usize * y as usize;
                    }
                }
                if let Some(ref poly) = irreducible {
                    for i in (k..2 * k - 1).rev() {
                        let coeff = conv[i] % p;
                        if coeff != 0 {
                            let scale = p - coeff;
                            for (j, &pc) in poly.iter().enumerate() {
                                conv[i - k + j] += scale * pc as usize;
                            }
                        }
                        conv[i] = 0;
                    }
                }
                let reduced: Vec<u8> = conv[..k].iter().map(|&c| (c % p) as u8).collect();
                mul.push(pack(&reduced) as u8);
            }
        }

        let mut neg = alloc::vec![0u8; q];
        for a in 0..q {
            let mut found = None;
            for b in 0..q {
                if add[a * q + b] == 0 {
                    found = Some(b as u8);
                    break;
                }
            }
            neg[a] = found.expect("additive group is closed");
        }
        let mut inv = alloc::vec![0u8; q];
        for a in 1..q {
            let mut found = None;
            for b in 1..q {
                if mul[a * q + b] == 1 {
                    found = Some(b as u8);
                    break;
                }
            }
            inv[a] = found.ok_or(GfError::NotPrimePower(q))?;
        }
        if add[0] != 0 || mul[q + 1] != 1 {
            return Err(GfError::NotPrimePower(q));
        }

        Ok(FiniteField {
            id: FieldId { p: p as u8, k: k as u8 },
            q,
            add,
            mul,
            neg,
            inv,
            irreducible,
        })
    }

    /// Builds the field of a given order by factoring it as p^k.
    pub fn of_order(q: usize) -> Result<Self, GfError> {
        if q < 2 {
            return Err(GfError::NotPrimePower(q));
        }
        if q > MAX_ORDER {
            return Err(GfError::OrderTooLarge(q));
        }
        let mut p = 2;
        while p * p <= q {
            if q.is_multiple_of(p) {
                let mut k = 0;
                let mut rest = q;
                while rest.is_multiple_of(p) {
                    rest /= p;
                    k += 1;
                }
                if rest != 1 {
                    return Err(GfError::NotPrimePower(q));
                }
                return Self::new(p, k);
            }
            p += 1;
        }
        // q itself is prime.
        Self::new(q, 1)
    }

    pub fn id(&self) -> FieldId {
        self.id
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn characteristic(&self) -> usize {
        self.id.p as usize
    }

    pub fn extension_degree(&self) -> usize {
        self.id.k as usize
    }

    /// Coefficients of the fixed irreducible polynomial (present iff k > 1).
    pub fn irreducible(&self) -> Option<&[u8]> {
        self.irreducible.as_deref()
    }

    pub fn element(&self, value: usize) -> Result<FieldElement, GfError> {
        if value >= self.q {
            return Err(GfError::ValueOutOfRange { value, q: self.q });
        }
        Ok(FieldElement { value: value as u8, field: self.id })
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { value: 0, field: self.id }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement { value: 1, field: self.id }
    }

    /// Elements in canonical index order 0, 1, …, q-1.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.q).map(|v| FieldElement { value: v as u8, field: self.id })
    }

    fn check(&self, a: FieldElement) -> Result<usize, GfError> {
        if a.field != self.id {
            return Err(GfError::MixedFields);
        }
        Ok(a.value as usize)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GfError> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(FieldElement { value: self.add[a * self.q + b], field: self.id })
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GfError> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        Ok(FieldElement { value: self.mul[a * self.q + b], field: self.id })
    }

    pub fn neg(&self, a: FieldElement) -> Result<FieldElement, GfError> {
        let a = self.check(a)?;
        Ok(FieldElement { value: self.neg[a], field: self.id })
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GfError> {
        let nb = self.neg(b)?;
        self.add(a, nb)
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GfError> {
        let a = self.check(a)?;
        if a == 0 {
            return Err(GfError::ZeroInverse);
        }
        Ok(FieldElement { value: self.inv[a], field: self.id })
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> Result<FieldElement, GfError> {
        let mut base = a;
        self.check(a)?;
        let mut acc = self.one();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base)?;
            }
            base = self.mul(base, base)?;
            e >>= 1;
        }
        Ok(acc)
    }

    /// Horner evaluation of `Σ coeffs[i] x^i`.
    pub fn poly_eval(
        &self,
        coeffs: &[FieldElement],
        x: FieldElement,
    ) -> Result<FieldElement, GfError> {
        if coeffs.is_empty() {
            return Err(GfError::EmptyPolynomial);
        }
        self.check(x)?;
        let mut acc = self.zero();
        for &c in coeffs.iter().rev() {
            acc = self.add(self.mul(acc, x)?, c)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_orders() -> Vec<usize> {
        (2..=MAX_ORDER).filter(|&q| FiniteField::of_order(q).is_ok()).collect()
    }

    #[test]
    fn gf3_arithmetic() {
        let f = FiniteField::new(3, 1).unwrap();
        let two = f.element(2).unwrap();
        assert_eq!(f.add(two, two).unwrap().value(), 1);
        assert_eq!(f.mul(two, two).unwrap().value(), 1);
        assert_eq!(f.pow(two, 2).unwrap().value(), 1);
    }

    #[test]
    fn gf4_generator_square() {
        // In GF(4) with x^2 + x + 1, the generator x (index 2) squares to x + 1.
        let f = FiniteField::new(2, 2).unwrap();
        let x = f.element(2).unwrap();
        let x_plus_1 = f.element(3).unwrap();
        assert_eq!(f.mul(x, x).unwrap(), x_plus_1);
        assert_eq!(f.inv(x).unwrap(), x_plus_1);
    }

    #[test]
    fn rejects_non_prime() {
        assert_eq!(FiniteField::new(4, 1).unwrap_err(), GfError::NotPrime(4));
        assert_eq!(FiniteField::new(1, 1).unwrap_err(), GfError::NotPrime(1));
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(matches!(FiniteField::of_order(6), Err(GfError::NotPrimePower(6))));
        assert!(matches!(FiniteField::new(2, 7), Err(GfError::OrderTooLarge(_))));
        assert!(matches!(FiniteField::new(2, 0), Err(GfError::ZeroExponent)));
    }

    #[test]
    fn gf5_inverse() {
        let f = FiniteField::new(5, 1).unwrap();
        assert_eq!(f.inv(f.element(2).unwrap()).unwrap().value(), 3);
        assert!(matches!(f.inv(f.zero()), Err(GfError::ZeroInverse)));
    }

    #[test]
    fn mixed_field_operands_rejected() {
        let f3 = FiniteField::new(3, 1).unwrap();
        let f5 = FiniteField::new(5, 1).unwrap();
        let a = f3.element(1).unwrap();
        let b = f5.element(1).unwrap();
        assert!(matches!(f3.add(a, b), Err(GfError::MixedFields)));
        assert!(matches!(f5.mul(a, b), Err(GfError::MixedFields)));
    }

    #[test]
    fn poly_eval_examples() {
        let f5 = FiniteField::new(5, 1).unwrap();
        // 1 + 2x at x = 3 is 7 = 2 mod 5.
        let coeffs = [f5.element(1).unwrap(), f5.element(2).unwrap()];
        assert_eq!(f5.poly_eval(&coeffs, f5.element(3).unwrap()).unwrap().value(), 2);
        // Constant polynomial.
        for x in f5.elements() {
            assert_eq!(f5.poly_eval(&[f5.element(4).unwrap()], x).unwrap().value(), 4);
        }
        let f3 = FiniteField::new(3, 1).unwrap();
        // 1 + x + x^2 at x = 2: 1 + 2 + 4 = 7 = 1 mod 3.
        let one = f3.one();
        assert_eq!(f3.poly_eval(&[one, one, one], f3.element(2).unwrap()).unwrap().value(), 1);
        assert!(matches!(f3.poly_eval(&[], one), Err(GfError::EmptyPolynomial)));
    }

    #[test]
    fn poly_eval_matches_power_sum() {
        // Naive power-sum oracle over every (coeff vector, point) pair for
        // a few small fields.
        for q in [3usize, 4, 5, 8] {
            let f = FiniteField::of_order(q).unwrap();
            let coeff_sets: Vec<Vec<usize>> = (0..q * q)
                .map(|i| alloc::vec![i % q, (i / q) % q, (i * 7 + 3) % q])
                .collect();
            for raw in coeff_sets {
                let coeffs: Vec<FieldElement> =
                    raw.iter().map(|&v| f.element(v).unwrap()).collect();
                for x in f.elements() {
                    let mut expect = f.zero();
                    for (i, &c) in coeffs.iter().enumerate() {
                        expect = f.add(expect, f.mul(c, f.pow(x, i as u64).unwrap()).unwrap()).unwrap();
                    }
                    assert_eq!(f.poly_eval(&coeffs, x).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn inverse_and_negation_all_orders() {
        for q in all_orders() {
            let f = FiniteField::of_order(q).unwrap();
            for a in f.elements() {
                assert_eq!(f.add(a, f.neg(a).unwrap()).unwrap(), f.zero());
                if !a.is_zero() {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()).unwrap(), f.one());
                }
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_small_orders() {
        // Commutativity, associativity, and distributivity, exhaustively
        // for every order up to 16.
        for q in all_orders().into_iter().filter(|&q| q <= 16) {
            let f = FiniteField::of_order(q).unwrap();
            let els: Vec<_> = f.elements().collect();
            for &a in &els {
                for &b in &els {
                    assert_eq!(f.add(a, b).unwrap(), f.add(b, a).unwrap());
                    assert_eq!(f.mul(a, b).unwrap(), f.mul(b, a).unwrap());
                    for &c in &els {
                        assert_eq!(
                            f.add(f.add(a, b).unwrap(), c).unwrap(),
                            f.add(a, f.add(b, c).unwrap()).unwrap()
                        );
                        assert_eq!(
                            f.mul(f.mul(a, b).unwrap(), c).unwrap(),
                            f.mul(a, f.mul(b, c).unwrap()).unwrap()
                        );
                        assert_eq!(
                            f.mul(a, f.add(b, c).unwrap()).unwrap(),
                            f.add(f.mul(a, b).unwrap(), f.mul(a, c).unwrap()).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn frobenius_endomorphism() {
        // (a + b)^p = a^p + b^p in characteristic p.
        for q in all_orders().into_iter().filter(|&q| q <= 32) {
            let f = FiniteField::of_order(q).unwrap();
            let p = f.characteristic() as u64;
            for a in f.elements() {
                for b in f.elements() {
                    let lhs = f.pow(f.add(a, b).unwrap(), p).unwrap();
                    let rhs = f.add(f.pow(a, p).unwrap(), f.pow(b, p).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
