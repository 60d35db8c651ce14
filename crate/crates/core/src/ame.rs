//! AME state construction and verification, plus the generalized
//! Bell/Pauli machinery shared by the protocol modules.
//!
//! The verifier runs two independent numerical routes over every subset
//! of size `floor(n/2)`: the subset entropy must be maximal, and the
//! reduced density matrix must match the scaled identity element-wise.
//! Both must agree for a pass, which guards against eigen-solver
//! artifacts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::TAU;
use itertools::Itertools;
use num_complex::Complex64;
#[allow(unused_imports)] // float intrinsics under no_std
use num_traits::Float;
use thiserror::Error;

use crate::codes::{ClassicalCode, CodeError};
use crate::linalg;
use crate::qstate::{self, QuditState, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmeError {
    #[error("unknown catalog name `{0}`")]
    UnknownCatalogName(String),
    #[error("pauli index {index} out of range for dimension {d}")]
    IndexOutOfRange { index: usize, d: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// `exp(2πi k / d)` computed from the exact reduced angle, so repeated
/// products of root-of-unity phases do not accumulate error.
pub fn root_of_unity(d: usize, k: i64) -> Complex64 {
    let k = k.rem_euclid(d as i64) as f64;
    Complex64::from_polar(1.0, TAU * k / d as f64)
}

/// The generalized Pauli `U_qp = Σ_j ω^(jq) |j⟩⟨j+p|` (indices mod d).
#[derive(Debug, Clone)]
pub struct GeneralizedPauli {
    pub d: usize,
    pub q_index: usize,
    pub p_index: usize,
    matrix: Vec<Complex64>,
}

impl GeneralizedPauli {
    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }
}

/// Builds `U_qp`. Row `j` has its only nonzero entry `ω^(jq)` in column
/// `(j+p) mod d`.
pub fn pauli(d: usize, q: usize, p: usize) -> Result<GeneralizedPauli, AmeError> {
    if q >= d {
        return Err(AmeError::IndexOutOfRange { index: q, d });
    }
    if p >= d {
        return Err(AmeError::IndexOutOfRange { index: p, d });
    }
    let mut matrix = alloc::vec![Complex64::ZERO; d * d];
    for j in 0..d {
        matrix[j * d + (j + p) % d] = root_of_unity(d, (j * q) as i64);
    }
    Ok(GeneralizedPauli { d, q_index: q, p_index: p, matrix })
}

/// Adjoint of `U_qp` as a plain matrix (used for corrections).
pub fn pauli_adjoint(d: usize, q: usize, p: usize) -> Result<Vec<Complex64>, AmeError> {
    let u = pauli(d, q, p)?;
    Ok(linalg::mat_adjoint(d, u.matrix()))
}

/// The d² generalized Bell states `Ψ_qp = (1/√d) Σ_j ω^(jq) |j⟩|j+p⟩`,
/// indexed by `q·d + p`.
///
/// The pairing with the Pauli family is `(U_qp† ⊗ I)|Ψ_qp⟩ = |Ψ_00⟩`,
/// i.e. the correction that maps a Bell-measurement branch back to the
/// canonical state acts on the first qudit of the pair.
#[derive(Debug, Clone)]
pub struct BellBasis {
    pub d: usize,
    states: Vec<QuditState>,
}

impl BellBasis {
    pub fn state(&self, q: usize, p: usize) -> &QuditState {
        &self.states[q * self.d + p]
    }

    pub fn states(&self) -> &[QuditState] {
        &self.states
    }

    /// Raw basis vectors in outcome order, as expected by
    /// [`qstate::projective_measure`].
    pub fn vectors(&self) -> Vec<Vec<Complex64>> {
        self.states.iter().map(|s| s.amplitudes().to_vec()).collect()
    }

    /// Splits a flat outcome index back into `(q, p)`.
    pub fn outcome_to_qp(&self, outcome: usize) -> (usize, usize) {
        (outcome / self.d, outcome % self.d)
    }
}

pub fn bell_basis(d: usize) -> Result<BellBasis, AmeError> {
    if d < 2 {
        return Err(AmeError::State(StateError::InvalidLocalDimension));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut states = Vec::with_capacity(d * d);
    for q in 0..d {
        for p in 0..d {
            let mut amps = alloc::vec![Complex64::ZERO; d * d];
            for j in 0..d {
                amps[j * d + (j + p) % d] = root_of_unity(d, (j * q) as i64) * scale;
            }
            states.push(QuditState::from_amplitudes(2, d, amps)?);
        }
    }
    Ok(BellBasis { d, states })
}

/// Precomputed index maps for Bell projections of one party pair, so
/// enumerating all d² outcomes scans the amplitudes without re-deriving
/// digit positions each time.
#[derive(Debug)]
pub struct PairProjector {
    n: usize,
    d: usize,
    dim: usize,
    group_idx: Vec<usize>,
    rest_idx: Vec<usize>,
    rest_dim: usize,
}

impl PairProjector {
    /// Prepares projection of the ordered pair `(first, second)`; the
    /// first party plays the role of the first qudit in `Ψ_qp`.
    pub fn new(state: &QuditState, first: usize, second: usize) -> Result<Self, AmeError> {
        if state.n() < 3 {
            // Projecting both parties of a two-party state leaves no
            // system behind; callers handle that case via overlaps.
            return Err(AmeError::State(StateError::SubsetNotProper));
        }
        let (group_idx, rest_idx, rest_dim) =
            qstate::group_rest_indexing_pub(state, &[first, second])?;
        Ok(PairProjector {
            n: state.n(),
            d: state.d(),
            dim: state.dim(),
            group_idx,
            rest_idx,
            rest_dim,
        })
    }

    /// Projects onto `⟨Ψ_qp|` and removes both parties. Returns the
    /// branch probability and (when above the probability cutoff) the
    /// renormalized post state on the remaining parties, in ascending
    /// original order.
    pub fn project(
        &self,
        state: &QuditState,
        q: usize,
        p: usize,
    ) -> Result<(f64, Option<QuditState>), AmeError> {
        let d = self.d;
        if q >= d {
            return Err(AmeError::IndexOutOfRange { index: q, d });
        }
        if p >= d {
            return Err(AmeError::IndexOutOfRange { index: p, d });
        }
        if state.n() != self.n || state.d() != d || state.dim() != self.dim {
            return Err(AmeError::State(StateError::DimensionMismatch));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let phases: Vec<Complex64> =
            (0..d).map(|j| root_of_unity(d, -((j * q) as i64)) * scale).collect();
        let mut out = alloc::vec![Complex64::ZERO; self.rest_dim];
        for idx in 0..self.dim {
            let g = self.group_idx[idx];
            let j = g / d;
            if g % d != (j + p) % d {
                continue;
            }
            out[self.rest_idx[idx]] += phases[j] * state.amplitude(idx);
        }
        let prob: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if prob <= qstate::PROBABILITY_CUTOFF {
            return Ok((prob, None));
        }
        let norm = prob.sqrt();
        let amps = out.into_iter().map(|a| a / norm).collect();
        let post = QuditState::from_amplitudes(self.n - 2, d, amps)?;
        Ok((prob, Some(post)))
    }
}

/// One-shot Bell projection of the ordered pair `(first, second)` onto
/// `⟨Ψ_qp|`; see [`PairProjector`].
pub fn bell_project(
    state: &QuditState,
    first: usize,
    second: usize,
    q: usize,
    p: usize,
) -> Result<(f64, Option<QuditState>), AmeError> {
    PairProjector::new(state, first, second)?.project(state, q, p)
}

/// Where a candidate state came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    FromCode { q: usize, n: usize, codeword_count: usize, min_distance: Option<usize> },
    Catalog(String),
    UserSupplied,
}

/// A state under test, tagged with its origin.
#[derive(Debug, Clone)]
pub struct AmeCandidate {
    pub state: QuditState,
    pub provenance: Provenance,
}

impl AmeCandidate {
    pub fn user_supplied(state: QuditState) -> Self {
        AmeCandidate { state, provenance: Provenance::UserSupplied }
    }
}

/// Equal superposition over the codewords: `M^(-1/2) Σ_c |c⟩`, with local
/// dimension equal to the code alphabet.
pub fn state_from_code(code: &ClassicalCode) -> Result<AmeCandidate, AmeError> {
    let d = code.q();
    let n = code.n();
    let dim = qstate::dense_dim(n, d)?;
    let scale = 1.0 / (code.len() as f64).sqrt();
    let mut amps = alloc::vec![Complex64::ZERO; dim];
    for cw in code.codewords() {
        let idx = cw.iter().fold(0usize, |acc, &s| acc * d + s as usize);
        amps[idx] = Complex64::new(scale, 0.0);
    }
    let state = QuditState::from_amplitudes(n, d, amps)?;
    Ok(AmeCandidate {
        state,
        provenance: Provenance::FromCode {
            q: d,
            n,
            codeword_count: code.len(),
            min_distance: code.claimed_min_distance(),
        },
    })
}

/// Built-in states: `EPR(d)`, `GHZ(n,d)`, `AME43` (the four-qutrit state
/// `(1/3) Σ_ij |i, j, i+j, i+2j⟩`), and `AME43_swap_form` (the same state
/// family written so that the second half is a permutation of the first:
/// kets 0000, 0111, 0222, 1012, 1120, 1201, 2021, 2102, 2210).
pub fn catalog(name: &str) -> Result<AmeCandidate, AmeError> {
    let make = |state: QuditState| AmeCandidate {
        state,
        provenance: Provenance::Catalog(name.to_string()),
    };
    if let Some(inner) = name.strip_prefix("EPR(").and_then(|s| s.strip_suffix(')')) {
        let d: usize = inner
            .trim()
            .parse()
            .map_err(|_| AmeError::UnknownCatalogName(name.to_string()))?;
        return Ok(make(ghz_state(2, d)?));
    }
    if let Some(inner) = name.strip_prefix("GHZ(").and_then(|s| s.strip_suffix(')')) {
        let mut parts = inner.split(',');
        let n: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| AmeError::UnknownCatalogName(name.to_string()))?;
        let d: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| AmeError::UnknownCatalogName(name.to_string()))?;
        if parts.next().is_some() {
            return Err(AmeError::UnknownCatalogName(name.to_string()));
        }
        return Ok(make(ghz_state(n, d)?));
    }
    match name {
        "AME43" => {
            let mut amps = alloc::vec![Complex64::ZERO; 81];
            for i in 0..3usize {
                for j in 0..3usize {
                    let digits = [i, j, (i + j) % 3, (i + 2 * j) % 3];
                    let idx = digits.iter().fold(0, |acc, &g| acc * 3 + g);
                    amps[idx] = Complex64::new(1.0 / 3.0, 0.0);
                }
            }
            Ok(make(QuditState::from_amplitudes(4, 3, amps)?))
        }
        "AME43_swap_form" => {
            let kets = [
                [0usize, 0, 0, 0],
                [0, 1, 1, 1],
                [0, 2, 2, 2],
                [1, 0, 1, 2],
                [1, 1, 2, 0],
                [1, 2, 0, 1],
                [2, 0, 2, 1],
                [2, 1, 0, 2],
                [2, 2, 1, 0],
            ];
            let mut amps = alloc::vec![Complex64::ZERO; 81];
            for digits in kets {
                let idx = digits.iter().fold(0, |acc, &g| acc * 3 + g);
                amps[idx] = Complex64::new(1.0 / 3.0, 0.0);
            }
            Ok(make(QuditState::from_amplitudes(4, 3, amps)?))
        }
        other => Err(AmeError::UnknownCatalogName(other.to_string())),
    }
}

fn ghz_state(n: usize, d: usize) -> Result<QuditState, AmeError> {
    let dim = qstate::dense_dim(n, d)?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut amps = alloc::vec![Complex64::ZERO; dim];
    for s in 0..d {
        let idx = (0..n).fold(0usize, |acc, _| acc * d + s);
        amps[idx] = Complex64::new(scale, 0.0);
    }
    Ok(QuditState::from_amplitudes(n, d, amps)?)
}

/// Verifier tolerances and scope.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Entropy must be within this many dits of maximal.
    pub entropy_tol: f64,
    /// Element-wise deviation of the reduction from the scaled identity.
    pub deviation_tol: f64,
    /// Also check every subset smaller than `floor(n/2)`.
    pub extended: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { entropy_tol: 1e-8, deviation_tol: 1e-7, extended: false }
    }
}

/// Outcome of checking one subset.
#[derive(Debug, Clone)]
pub struct SubsetCheck {
    pub parties: Vec<usize>,
    pub entropy_dits: f64,
    pub max_entropy: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// Full verification report.
#[derive(Debug, Clone)]
pub struct AmeReport {
    pub n: usize,
    pub d: usize,
    pub checked_subsets: Vec<SubsetCheck>,
    pub is_ame: bool,
    pub worst_deviation: f64,
}

/// The subsets the canonical verifier scans: every subset of size
/// `floor(n/2)`, in lexicographic order.
pub fn half_subsets(n: usize) -> Vec<Vec<usize>> {
    (1..=n).combinations(n / 2).collect()
}

/// All party subsets of a given size, in lexicographic order.
pub fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    (1..=n).combinations(size).collect()
}

/// Checks a single subset: computes its entropy (in dits) and the
/// element-wise deviation of its reduction from the totally mixed state.
pub fn check_subset(state: &QuditState, parties: &[usize], opts: &VerifyOptions) -> SubsetCheck {
    let d = state.d();
    let (rows, cols, m) = state.split_matrix(parties);
    debug_assert!(rows <= cols);
    let gram = linalg::gram_rows(rows, cols, &m);
    let evs = linalg::hermitian_eigenvalues(rows, &gram);
    let ln_d = (d as f64).ln();
    let entropy: f64 = evs
        .iter()
        .filter(|&&ev| ev > qstate::EIGENVALUE_CUTOFF)
        .map(|&ev| -ev * ev.ln())
        .sum::<f64>()
        / ln_d;
    let target = 1.0 / rows as f64;
    let mut deviation = 0.0f64;
    for i in 0..rows {
        for j in 0..rows {
            let mut v = gram[i * rows + j];
            if i == j {
                v -= Complex64::new(target, 0.0);
            }
            deviation = deviation.max(v.norm());
        }
    }
    let max_entropy = parties.len() as f64;
    let pass =
        (entropy - max_entropy).abs() <= opts.entropy_tol && deviation <= opts.deviation_tol;
    SubsetCheck { parties: parties.to_vec(), entropy_dits: entropy, max_entropy, deviation, pass }
}

/// Assembles the report from per-subset checks (the canonical half-size
/// scan first, extended smaller subsets after). `is_ame` is decided by
/// the half-size subsets alone.
pub fn assemble_report(n: usize, d: usize, checks: Vec<SubsetCheck>) -> AmeReport {
    let half = n / 2;
    let is_ame = checks
        .iter()
        .filter(|c| c.parties.len() == half)
        .all(|c| c.pass);
    let worst_deviation = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    AmeReport { n, d, checked_subsets: checks, is_ame, worst_deviation }
}

/// Scans every subset of size `floor(n/2)` (and smaller, in extended
/// mode) and reports per-subset entropies and deviations.
pub fn verify_ame(candidate: &AmeCandidate, opts: &VerifyOptions) -> AmeReport {
    verify_state(&candidate.state, opts)
}

/// [`verify_ame`] on a bare state.
pub fn verify_state(state: &QuditState, opts: &VerifyOptions) -> AmeReport {
    let n = state.n();
    let mut checks: Vec<SubsetCheck> = half_subsets(n)
        .iter()
        .map(|s| check_subset(state, s, opts))
        .collect();
    if opts.extended {
        for size in 1..n / 2 {
            for subset in (1..=n).combinations(size) {
                checks.push(check_subset(state, &subset, opts));
            }
        }
    }
    assemble_report(n, state.d(), checks)
}
