//! Classical block codes over small alphabets: Reed-Solomon construction,
//! exhaustive minimum-distance computation, and MDS certification against
//! the Singleton bound.
//!
//! Codes are stored as explicit codeword lists. At desk scale (at most a
//! few thousand codewords) the exhaustive pairwise distance scan is the
//! primary verification tool, and the explicit list feeds directly into
//! the equal-superposition state construction.

use alloc::vec::Vec;
use thiserror::Error;

use crate::gf::{FiniteField, GfError};

/// Exhaustive distance verification is skipped above this many codeword
/// pairs; construction parameters are trusted instead.
const PAIR_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("codeword length mismatch")]
    LengthMismatch,
    #[error("code must contain at least two codewords")]
    TooFewCodewords,
    #[error("duplicate codewords")]
    DuplicateCodewords,
    #[error("symbol {symbol} out of range for alphabet size {q}")]
    SymbolOutOfRange { symbol: usize, q: usize },
    #[error("alphabet size must be at least 2")]
    AlphabetTooSmall,
    #[error("block length must be positive")]
    ZeroLength,
    #[error("claimed minimum distance {claimed} but exhaustive scan found {actual}")]
    ClaimedDistanceWrong { claimed: usize, actual: usize },
    #[error("block length {n} too large for field of order {q} (need n <= q+1)")]
    BlockLengthTooLarge { n: usize, q: usize },
    #[error("dimension k={k} out of range for block length {n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("position {position} out of range for block length {n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("code is not MDS")]
    NotMds,
    #[error("code too large for desk-scale handling")]
    TooLarge,
    #[error(transparent)]
    Field(#[from] GfError),
}

/// Number of positions in which two equal-length words differ.
pub fn hamming_distance(a: &[u8], b: &[u8]) -> Result<usize, CodeError> {
    if a.len() != b.len() {
        return Err(CodeError::LengthMismatch);
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Result of the Singleton-bound check: the code is MDS iff the codeword
/// count meets `q^(n - δ + 1)` with equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCertificate {
    pub codeword_count: usize,
    pub min_distance: usize,
    pub singleton_bound: u128,
    pub is_mds: bool,
}

/// A block code: `M` distinct codewords of length `n` over `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalCode {
    q: usize,
    n: usize,
    codewords: Vec<Vec<u8>>,
    claimed_min_distance: Option<usize>,
}

impl ClassicalCode {
    /// Validates lengths, symbol ranges, and distinctness.
    pub fn new(q: usize, n: usize, codewords: Vec<Vec<u8>>) -> Result<Self, CodeError> {
        if q < 2 {
            return Err(CodeError::AlphabetTooSmall);
        }
        if n == 0 {
            return Err(CodeError::ZeroLength);
        }
        if codewords.is_empty() {
            return Err(CodeError::TooFewCodewords);
        }
        for cw in &codewords {
            if cw.len() != n {
                return Err(CodeError::LengthMismatch);
            }
            for &s in cw.iter() {
                if s as usize >= q {
                    return Err(CodeError::SymbolOutOfRange { symbol: s as usize, q });
                }
            }
        }
        let mut sorted = codewords.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CodeError::DuplicateCodewords);
        }
        Ok(ClassicalCode { q, n, codewords, claimed_min_distance: None })
    }

    /// Attaches a claimed minimum distance, verifying it exhaustively
    /// while the pair count stays within budget.
    pub fn with_claimed_distance(mut self, delta: usize) -> Result<Self, CodeError> {
        let m = self.codewords.len() as u64;
        if m * (m - 1) / 2 <= PAIR_BUDGET {
            let actual = self.min_distance()?;
            if actual != delta {
                return Err(CodeError::ClaimedDistanceWrong { claimed: delta, actual });
            }
        }
        self.claimed_min_distance = Some(delta);
        Ok(self)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codewords(&self) -> &[Vec<u8>] {
        &self.codewords
    }

    pub fn claimed_min_distance(&self) -> Option<usize> {
        self.claimed_min_distance
    }

    /// Exhaustive pairwise minimum Hamming distance, O(M^2 n).
    pub fn min_distance(&self) -> Result<usize, CodeError> {
        if self.codewords.len() < 2 {
            return Err(CodeError::TooFewCodewords);
        }
        let mut best = self.n;
        for (i, a) in self.codewords.iter().enumerate() {
            for b in &self.codewords[i + 1..] {
                let d = hamming_distance(a, b)?;
                if d < best {
                    best = d;
                    if best == 1 {
                        return Ok(1);
                    }
                }
            }
        }
        Ok(best)
    }

    /// Singleton-bound certificate: MDS iff `M == q^(n - δ + 1)`.
    pub fn is_mds(&self) -> Result<MdsCertificate, CodeError> {
        let delta = self.min_distance()?;
        let mut bound: u128 = 1;
        for _ in 0..(self.n - delta + 1) {
            bound = bound.saturating_mul(self.q as u128);
        }
        Ok(MdsCertificate {
            codeword_count: self.codewords.len(),
            min_distance: delta,
            singleton_bound: bound,
            is_mds: self.codewords.len() as u128 == bound,
        })
    }
}

/// The q-ary repetition code of length n: `{s^n : s in [0, q)}`, with
/// distance n. No field structure is needed, so any alphabet size works.
pub fn repetition(q: usize, n: usize) -> Result<ClassicalCode, CodeError> {
    if q < 2 {
        return Err(CodeError::AlphabetTooSmall);
    }
    if n == 0 {
        return Err(CodeError::ZeroLength);
    }
    let codewords = (0..q).map(|s| alloc::vec![s as u8; n]).collect();
    ClassicalCode::new(q, n, codewords)?.with_claimed_distance(n)
}

/// The `[4, 2, 3]_3` ternary Hamming code, generated by rows
/// `(1,0,1,1)` and `(0,1,1,2)`: codewords `(i, j, i+j, i+2j) mod 3`.
pub fn ternary_hamming() -> ClassicalCode {
    let mut codewords = Vec::with_capacity(9);
    for i in 0..3u8 {
        for j in 0..3u8 {
            codewords.push(alloc::vec![i, j, (i + j) % 3, (i + 2 * j) % 3]);
        }
    }
    ClassicalCode::new(3, 4, codewords)
        .and_then(|c| c.with_claimed_distance(3))
        .expect("fixed generator matrix yields a valid [4,2,3]_3 code")
}

/// Reed-Solomon code over the given field: evaluations of all degree-<k
/// polynomials at the first n field elements in canonical order
/// 0, 1, …, q-1. For `n = q + 1` the doubly-extended construction appends
/// the degree-(k-1) coefficient as the final coordinate.
///
/// The result is MDS with `δ = n - k + 1`; the distance is re-verified
/// exhaustively while the pair count stays within budget.
pub fn reed_solomon(field: &FiniteField, n: usize, k: usize) -> Result<ClassicalCode, CodeError> {
    let q = field.order();
    if n == 0 {
        return Err(CodeError::ZeroLength);
    }
    if k == 0 || k > n {
        return Err(CodeError::KOutOfRange { k, n });
    }
    if n > q + 1 {
        return Err(CodeError::BlockLengthTooLarge { n, q });
    }
    let mut m: u64 = 1;
    for _ in 0..k {
        m = m.saturating_mul(q as u64);
        if m > PAIR_BUDGET {
            return Err(CodeError::TooLarge);
        }
    }
    let extended = n == q + 1;
    let eval_points: Vec<_> = field.elements().take(if extended { q } else { n }).collect();

    let mut codewords = Vec::with_capacity(m as usize);
    for idx in 0..m {
        let mut rest = idx;
        let coeffs: Vec<_> = (0..k)
            .map(|_| {
                let c = (rest % q as u64) as usize;
                rest /= q as u64;
                field.element(c).expect("digit < q")
            })
            .collect();
        let mut cw = Vec::with_capacity(n);
        for &x in &eval_points {
            cw.push(field.poly_eval(&coeffs, x)?.value() as u8);
        }
        if extended {
            cw.push(coeffs[k - 1].value() as u8);
        }
        codewords.push(cw);
    }
    ClassicalCode::new(q, n, codewords)?.with_claimed_distance(n - k + 1)
}

/// Shortens an MDS code: keeps the codewords carrying `symbol` at
/// `position` and deletes that coordinate. The result is checked to be
/// MDS again (with the same minimum distance).
pub fn shorten(
    code: &ClassicalCode,
    position: usize,
    symbol: u8,
) -> Result<ClassicalCode, CodeError> {
    if position >= code.n() {
        return Err(CodeError::PositionOutOfRange { position, n: code.n() });
    }
    if !code.is_mds()?.is_mds {
        return Err(CodeError::NotMds);
    }
    if symbol as usize >= code.q() {
        return Err(CodeError::SymbolOutOfRange { symbol: symbol as usize, q: code.q() });
    }
    let codewords: Vec<Vec<u8>> = code
        .codewords()
        .iter()
        .filter(|cw| cw[position] == symbol)
        .map(|cw| {
            cw.iter()
                .enumerate()
                .filter(|&(i, _)| i != position)
                .map(|(_, &s)| s)
                .collect()
        })
        .collect();
    if codewords.len() < 2 {
        return Err(CodeError::TooFewCodewords);
    }
    let shortened = ClassicalCode::new(code.q(), code.n() - 1, codewords)?;
    let cert = shortened.is_mds()?;
    if !cert.is_mds {
        return Err(CodeError::NotMds);
    }
    shortened.with_claimed_distance(cert.min_distance)
}
