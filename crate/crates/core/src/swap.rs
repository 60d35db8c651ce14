//! Entanglement swapping between identical AME states.
//!
//! A 2n-party state that is maximally entangled across the half/half cut
//! can be written `Σ_i |i⟩ U|i⟩ / √(d^n)` for a unitary `U` on the
//! half-block space. Bell-measuring the shared middle block of two such
//! states leaves the outer blocks in `Σ_i |i⟩ U_R T U_L |i⟩` where
//! `T = ⊗_t U†_{q_t p_t}` collects the measurement outcomes, so a chain
//! of m states telescopes to `U^m` up to outcome insertions. The
//! corrections that undo the insertions are products of U-power
//! conjugated generalized Paulis acting jointly on the final block; this
//! module computes and applies them, so every branch is checked against
//! the clean power state rather than only the all-zero outcome.

use alloc::vec::Vec;
use itertools::Itertools;
use num_complex::Complex64;
#[allow(unused_imports)] // float intrinsics under no_std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ame::{self, AmeError, PairProjector};
use crate::linalg;
use crate::qstate::{self, apply_global_unitary, fidelity, subset_entropy, QuditState, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwapError {
    #[error("state must have an even number of parties, got {0}")]
    OddPartyCount(usize),
    #[error("states must share the same shape")]
    ShapeMismatch,
    #[error("split is not maximally entangled (unitarity deviation {0:.3e})")]
    SplitNotMaximallyEntangled(f64),
    #[error("expected {expected} measured pairs, got {got}")]
    PairCount { expected: usize, got: usize },
    #[error("measured pairs must use distinct parties")]
    PairOverlap,
    #[error("a chain needs at least two states")]
    ChainTooShort,
    #[error("chain states must be identical (fidelity {0} with the first)")]
    ChainStatesDiffer(f64),
    #[error("expected {expected} outcome vectors, got {got}")]
    OutcomeCount { expected: usize, got: usize },
    #[error("a measurement branch carried no probability")]
    DegenerateBranch,
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Ame(#[from] AmeError),
}

/// The unitary pairing the first half-block basis with the second-half
/// states: `|Φ⟩ = Σ_i |i⟩ U|i⟩ / √(d^n)`.
#[derive(Debug, Clone)]
pub struct DefiningUnitary {
    n_half: usize,
    d: usize,
    matrix: Vec<Complex64>,
}

impl DefiningUnitary {
    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n_half as u32)
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    /// Rebuilds `Σ_i |i⟩ U|i⟩ / √(d^n)`.
    pub fn reconstruct(&self) -> Result<QuditState, SwapError> {
        Ok(state_of_operator(self.n_half, self.d, &self.matrix)?)
    }
}

/// `Σ_i |i⟩ M|i⟩ / √D` for a half-block operator M (unitary M gives a
/// normalized state).
fn state_of_operator(
    n_half: usize,
    d: usize,
    m: &[Complex64],
) -> Result<QuditState, StateError> {
    let dim = d.pow(n_half as u32);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut amps = alloc::vec![Complex64::ZERO; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            amps[i * dim + j] = m[j * dim + i] * scale;
        }
    }
    QuditState::from_amplitudes(2 * n_half, d, amps)
}

/// Extracts the operator pairing `left_block` (in the given order) with
/// `right_block`: `|Φ⟩ = Σ_i |i⟩_left W|i⟩_right / √D`, i.e.
/// `W[j][i] = √D · amplitude(left=i, right=j)`. Errors when the blocks
/// are not maximally entangled (W would not be unitary).
fn extract_with_blocks(
    state: &QuditState,
    left_block: &[usize],
    right_block: &[usize],
) -> Result<Vec<Complex64>, SwapError> {
    debug_assert_eq!(left_block.len(), right_block.len());
    let dim = state.d().pow(left_block.len() as u32);
    let (group_idx, rest_idx, rest_dim) = qstate::group_rest_indexing_pub(state, left_block)?;
    debug_assert_eq!(rest_dim, dim);
    // rest packs the complement of left_block in ascending order; re-map
    // it into the requested right-block order.
    let mut right_pos = alloc::vec![0usize; right_block.len()];
    let mut sorted_right = right_block.to_vec();
    sorted_right.sort_unstable();
    for (slot, &p) in right_block.iter().enumerate() {
        right_pos[slot] = sorted_right.iter().position(|&x| x == p).expect("member");
    }
    let d = state.d();
    let scale = (dim as f64).sqrt();
    let mut w = alloc::vec![Complex64::ZERO; dim * dim];
    let k = right_block.len();
    for (idx, &a) in state.amplitudes().iter().enumerate() {
        if a == Complex64::ZERO {
            continue;
        }
        let i = group_idx[idx];
        let mut digits = alloc::vec![0usize; k];
        let mut rest = rest_idx[idx];
        for t in (0..k).rev() {
            digits[t] = rest % d;
            rest /= d;
        }
        let mut j = 0usize;
        for slot in 0..k {
            j = j * d + digits[right_pos[slot]];
        }
        w[j * dim + i] = a * scale;
    }
    let dev = linalg::unitarity_deviation(dim, &w);
    if dev > 1e-9 {
        return Err(SwapError::SplitNotMaximallyEntangled(dev));
    }
    Ok(w)
}

/// Extracts the defining unitary for the canonical split: first n vs
/// last n parties of a 2n-party state.
pub fn extract_unitary(state: &QuditState) -> Result<DefiningUnitary, SwapError> {
    let n = state.n();
    if !n.is_multiple_of(2) {
        return Err(SwapError::OddPartyCount(n));
    }
    let n_half = n / 2;
    let left: Vec<usize> = (1..=n_half).collect();
    let right: Vec<usize> = (n_half + 1..=n).collect();
    let matrix = extract_with_blocks(state, &left, &right)?;
    Ok(DefiningUnitary { n_half, d: state.d(), matrix })
}

/// One outcome branch of a swap.
#[derive(Debug, Clone)]
pub struct SwapBranch {
    /// Bell outcomes per measured pair, in pair order.
    pub outcomes: Vec<(usize, usize)>,
    pub probability: f64,
    /// State of the 2n unmeasured parties: left block then right block.
    pub post_state: QuditState,
}

/// Bell-measures n shared pairs `(left_party, right_party)` between two
/// 2n-party states and enumerates every joint outcome. The post state of
/// outcome `(q,p)…` equals `Σ_i |i⟩ U_R (⊗_t U†_{q_t p_t}) U_L |i⟩ / √D`
/// with the defining unitaries taken against the measured blocks in pair
/// order.
pub fn swap_once(
    left: &QuditState,
    right: &QuditState,
    pairs: &[(usize, usize)],
) -> Result<Vec<SwapBranch>, SwapError> {
    let n2 = left.n();
    if !n2.is_multiple_of(2) {
        return Err(SwapError::OddPartyCount(n2));
    }
    if right.n() != n2 || right.d() != left.d() {
        return Err(SwapError::ShapeMismatch);
    }
    let n_half = n2 / 2;
    if pairs.len() != n_half {
        return Err(SwapError::PairCount { expected: n_half, got: pairs.len() });
    }
    let left_measured: Vec<usize> = pairs.iter().map(|&(l, _)| l).collect();
    let right_measured: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();
    for list in [&left_measured, &right_measured] {
        let mut sorted = list.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n_half {
            return Err(SwapError::PairOverlap);
        }
        for &p in list.iter() {
            if p == 0 || p > n2 {
                return Err(SwapError::State(StateError::PartyOutOfRange { party: p, n: n2 }));
            }
        }
    }

    let d = left.d();
    let joint = left.tensor(right)?;
    // Joint labels: left parties 1..2n, right parties offset by 2n.
    let mut labels: Vec<usize> = (1..=2 * n2).collect();

    struct Partial {
        outcomes: Vec<(usize, usize)>,
        probability: f64,
        state: QuditState,
    }
    let mut partials =
        alloc::vec![Partial { outcomes: Vec::new(), probability: 1.0, state: joint }];
    for t in 0..n_half {
        let l_label = left_measured[t];
        let r_label = n2 + right_measured[t];
        let first = labels.iter().position(|&x| x == l_label).expect("present") + 1;
        let second = labels.iter().position(|&x| x == r_label).expect("present") + 1;
        let projector = PairProjector::new(&partials[0].state, first, second)?;
        let mut next = Vec::with_capacity(partials.len() * d * d);
        for partial in &partials {
            for q in 0..d {
                for p in 0..d {
                    let (prob, post) = projector.project(&partial.state, q, p)?;
                    let post = post.ok_or(SwapError::DegenerateBranch)?;
                    let mut outcomes = partial.outcomes.clone();
                    outcomes.push((q, p));
                    next.push(Partial {
                        outcomes,
                        probability: partial.probability * prob,
                        state: post,
                    });
                }
            }
        }
        partials = next;
        labels.retain(|&x| x != l_label && x != r_label);
    }
    let total: f64 = partials.iter().map(|b| b.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SwapError::State(StateError::ProbabilityLeak(total)));
    }
    Ok(partials
        .into_iter()
        .map(|b| SwapBranch {
            outcomes: b.outcomes,
            probability: b.probability,
            post_state: b.state,
        })
        .collect())
}

/// Canonical pairing for chain layouts: left party `n + t` measures
/// against right party `t`.
pub fn swap_once_canonical(
    left: &QuditState,
    right: &QuditState,
) -> Result<Vec<SwapBranch>, SwapError> {
    let n_half = left.n() / 2;
    let pairs: Vec<(usize, usize)> = (1..=n_half).map(|t| (n_half + t, t)).collect();
    swap_once(left, right, &pairs)
}

/// `⊗_t U_{q_t p_t}` in pair order (first pair most significant).
pub fn pauli_tensor(d: usize, outcomes: &[(usize, usize)]) -> Result<Vec<Complex64>, SwapError> {
    let mut out = alloc::vec![Complex64::ONE];
    let mut dim = 1usize;
    for &(q, p) in outcomes {
        let u = ame::pauli(d, q, p)?;
        out = linalg::kron(dim, &out, d, u.matrix());
        dim *= d;
    }
    Ok(out)
}

/// The operator `U_R (⊗_t U†_{q_t p_t}) U_L` a swap branch realizes.
pub fn branch_operator(
    u_left: &[Complex64],
    u_right: &[Complex64],
    d: usize,
    outcomes: &[(usize, usize)],
) -> Result<Vec<Complex64>, SwapError> {
    let dim = (u_left.len() as f64).sqrt() as usize;
    let t = linalg::mat_adjoint(dim, &pauli_tensor(d, outcomes)?);
    Ok(linalg::mat_mul(dim, u_right, &linalg::mat_mul(dim, &t, u_left)))
}

/// Outcome-selection policy for chains.
#[derive(Debug, Clone)]
pub enum ChainOutcomes {
    /// Take `(0,0)` everywhere.
    AllZero,
    /// Sample each pair by its branch probabilities, reproducibly.
    Seeded(u64),
    /// Use the given outcome vector per hop.
    Fixed(Vec<Vec<(usize, usize)>>),
}

/// Result of a repeater-style chain of swaps.
#[derive(Debug, Clone)]
pub struct SwapChainResult {
    /// Number of chained states.
    pub hops: usize,
    /// Bell outcomes per hop, in pair order.
    pub outcome_record: Vec<Vec<(usize, usize)>>,
    /// Probability of the realized outcome path.
    pub path_probability: f64,
    /// Final 2n-party state after the Pauli-product corrections.
    pub final_state: QuditState,
    /// Fidelity of the corrected final state with `Σ_i |i⟩ U^m |i⟩`.
    pub corrected_fidelity: f64,
    /// Whether that fidelity reaches 1 - 1e-9.
    pub u_power_check: bool,
}

/// Chains `m` identical states, Bell-measuring each shared middle block,
/// then applies the accumulated correction
/// `C = Π_j U^(m-j) P_j U^(j-m)` (with `P_j` the hop-j outcome Paulis)
/// on the final block and compares against the direct `U^m` state.
pub fn swap_chain(
    states: &[QuditState],
    outcomes: ChainOutcomes,
) -> Result<SwapChainResult, SwapError> {
    let m = states.len();
    if m < 2 {
        return Err(SwapError::ChainTooShort);
    }
    let first = &states[0];
    if !first.n().is_multiple_of(2) {
        return Err(SwapError::OddPartyCount(first.n()));
    }
    for s in &states[1..] {
        if s.n() != first.n() || s.d() != first.d() {
            return Err(SwapError::ShapeMismatch);
        }
        let f = fidelity(first, s)?;
        if f < 1.0 - 1e-9 {
            return Err(SwapError::ChainStatesDiffer(f));
        }
    }
    let n_half = first.n() / 2;
    let d = first.d();
    let dim = d.pow(n_half as u32);
    let u = extract_unitary(first)?;

    if let ChainOutcomes::Fixed(ref fixed) = outcomes {
        if fixed.len() != m - 1 {
            return Err(SwapError::OutcomeCount { expected: m - 1, got: fixed.len() });
        }
    }
    let mut rng = match outcomes {
        ChainOutcomes::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut acc = first.clone();
    let mut outcome_record: Vec<Vec<(usize, usize)>> = Vec::with_capacity(m - 1);
    let mut path_probability = 1.0f64;
    for hop in 1..m {
        let joint = acc.tensor(&states[hop])?;
        let mut labels: Vec<usize> = (1..=2 * first.n()).collect();
        let mut state = joint;
        let mut hop_outcomes = Vec::with_capacity(n_half);
        for t in 1..=n_half {
            let l_label = n_half + t;
            let r_label = first.n() + t;
            let first_pos = labels.iter().position(|&x| x == l_label).expect("present") + 1;
            let second_pos = labels.iter().position(|&x| x == r_label).expect("present") + 1;
            let projector = PairProjector::new(&state, first_pos, second_pos)?;
            let (q, p) = match &outcomes {
                ChainOutcomes::AllZero => (0, 0),
                ChainOutcomes::Fixed(fixed) => fixed[hop - 1][t - 1],
                ChainOutcomes::Seeded(_) => {
                    let rng = rng.as_mut().expect("seeded rng");
                    let mut options = Vec::with_capacity(d * d);
                    for q in 0..d {
                        for p in 0..d {
                            let (prob, _) = projector.project(&state, q, p)?;
                            options.push(((q, p), prob));
                        }
                    }
                    let roll: f64 = rng.gen();
                    let mut cum = 0.0;
                    let mut chosen = options.len() - 1;
                    for (i, (_, prob)) in options.iter().enumerate() {
                        cum += prob;
                        if roll < cum {
                            chosen = i;
                            break;
                        }
                    }
                    options[chosen].0
                }
            };
            let (prob, post) = projector.project(&state, q, p)?;
            let post = post.ok_or(SwapError::DegenerateBranch)?;
            path_probability *= prob;
            state = post;
            hop_outcomes.push((q, p));
            labels.retain(|&x| x != l_label && x != r_label);
        }
        outcome_record.push(hop_outcomes);
        acc = state;
    }

    // Correction on the final block: C = Π_j U^(m-j) P_j U^(j-m).
    let mut correction = linalg::identity(dim);
    let u_adj = linalg::mat_adjoint(dim, u.matrix());
    for (j, hop_outcomes) in outcome_record.iter().enumerate() {
        let k = m - 1 - j;
        let mut term = pauli_tensor(d, hop_outcomes)?;
        for _ in 0..k {
            term = linalg::mat_mul(dim, u.matrix(), &term);
        }
        for _ in 0..k {
            term = linalg::mat_mul(dim, &term, &u_adj);
        }
        correction = linalg::mat_mul(dim, &correction, &term);
    }
    let right_block: Vec<usize> = (n_half + 1..=2 * n_half).collect();
    let final_state = apply_global_unitary(&acc, &right_block, &correction)?;

    let mut u_power = linalg::identity(dim);
    for _ in 0..m {
        u_power = linalg::mat_mul(dim, u.matrix(), &u_power);
    }
    let target = state_of_operator(n_half, d, &u_power)?;
    let corrected_fidelity = fidelity(&final_state, &target)?;
    Ok(SwapChainResult {
        hops: m,
        outcome_record,
        path_probability,
        final_state,
        corrected_fidelity,
        u_power_check: corrected_fidelity >= 1.0 - 1e-9,
    })
}

/// A monomial single-qudit unitary: `M|x⟩ = ω^(e_x) |σ(x)⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialUnitary {
    pub basis_perm: Vec<usize>,
    pub phase_exponents: Vec<usize>,
}

impl MonomialUnitary {
    fn is_identity(&self) -> bool {
        self.basis_perm.iter().enumerate().all(|(i, &s)| i == s)
            && self.phase_exponents.iter().all(|&e| e == 0)
    }
}

/// A restricted local-equivalence witness: permute the right-block
/// parties, then apply one monomial per right-block party. Applying it
/// to the second state of [`check_local_equiv_restricted`] reproduces
/// the first up to a global phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// `block_permutation[t]` is the (0-based) right-block slot whose
    /// qudit ends up at right-block slot `t`.
    pub block_permutation: Vec<usize>,
    /// Monomials per right-block slot, applied after the permutation.
    pub monomials: Vec<MonomialUnitary>,
}

impl Witness {
    /// Applies this witness to a 2n-party state.
    pub fn apply(&self, state: &QuditState) -> Result<QuditState, SwapError> {
        let n = state.n();
        if !n.is_multiple_of(2) {
            return Err(SwapError::OddPartyCount(n));
        }
        let n_half = n / 2;
        if self.block_permutation.len() != n_half || self.monomials.len() != n_half {
            return Err(SwapError::ShapeMismatch);
        }
        let mut perm: Vec<usize> = (1..=n).collect();
        for t in 0..n_half {
            perm[n_half + t] = n_half + self.block_permutation[t] + 1;
        }
        let permuted = state.permute_parties(&perm)?;
        let d = state.d();
        let dim = state.dim();
        let mut amps = alloc::vec![Complex64::ZERO; dim];
        let mut digits = alloc::vec![0usize; n];
        for (idx, &a) in permuted.amplitudes().iter().enumerate() {
            if a == Complex64::ZERO {
                continue;
            }
            let mut rest = idx;
            for t in (0..n).rev() {
                digits[t] = rest % d;
                rest /= d;
            }
            let mut phase = Complex64::ONE;
            let mut out_idx = 0usize;
            for (t, &digit) in digits.iter().enumerate() {
                let g = if t >= n_half {
                    let mono = &self.monomials[t - n_half];
                    phase *= ame::root_of_unity(d, mono.phase_exponents[digit] as i64);
                    mono.basis_perm[digit]
                } else {
                    digit
                };
                out_idx = out_idx * d + g;
            }
            amps[out_idx] += phase * a;
        }
        Ok(QuditState::from_amplitudes(n, d, amps)?)
    }

    pub fn is_identity(&self) -> bool {
        self.block_permutation.iter().enumerate().all(|(i, &s)| i == s)
            && self.monomials.iter().all(|m| m.is_identity())
    }
}

/// Verdict of the restricted equivalence search. `Unknown` never claims
/// inequivalence; `spectrum_mismatch` records when the entropy spectra
/// already differ (a certificate that no local witness can exist).
#[derive(Debug, Clone)]
pub enum EquivVerdict {
    Equivalent(Witness),
    Unknown { spectrum_mismatch: bool },
}

/// Candidate budget for the exhaustive witness search.
const SEARCH_BUDGET: u64 = 2_000_000;

/// Searches the finite class "right-block party permutations x per-party
/// monomial unitaries (basis permutation + d-th-root phases)" for a
/// witness mapping `b` onto `a`. Entropy spectra are compared first as a
/// necessary condition.
pub fn check_local_equiv_restricted(
    a: &QuditState,
    b: &QuditState,
) -> Result<EquivVerdict, SwapError> {
    let n = a.n();
    if b.n() != n || b.d() != a.d() {
        return Err(SwapError::ShapeMismatch);
    }
    if !n.is_multiple_of(2) {
        return Err(SwapError::OddPartyCount(n));
    }
    let d = a.d();
    let n_half = n / 2;

    // Entropy spectra (multisets over all subsets up to half size) are
    // invariant under every witness in the class.
    for size in 1..=n_half {
        let mut sa: Vec<f64> = Vec::new();
        let mut sb: Vec<f64> = Vec::new();
        for subset in (1..=n).combinations(size) {
            sa.push(subset_entropy(a, &subset)?);
            sb.push(subset_entropy(b, &subset)?);
        }
        sa.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        sb.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        if sa.iter().zip(&sb).any(|(x, y)| (x - y).abs() > 1e-7) {
            return Ok(EquivVerdict::Unknown { spectrum_mismatch: true });
        }
    }

    // Budget check: permutations x (d! * d^d)^(n/2).
    let mut per_party: u64 = 1;
    for k in 2..=d as u64 {
        per_party = per_party.saturating_mul(k);
    }
    per_party = per_party.saturating_mul((d as u64).saturating_pow(d as u32));
    let mut total: u64 = 1;
    for k in 2..=n_half as u64 {
        total = total.saturating_mul(k);
    }
    for _ in 0..n_half {
        total = total.saturating_mul(per_party);
    }
    if total > SEARCH_BUDGET {
        return Ok(EquivVerdict::Unknown { spectrum_mismatch: false });
    }

    let basis_perms: Vec<Vec<usize>> = (0..d).permutations(d).collect();
    let phase_count = d.pow(d as u32);
    let monomials_per_party: Vec<MonomialUnitary> = basis_perms
        .iter()
        .flat_map(|perm| {
            (0..phase_count).map(move |mut code| {
                let mut exps = alloc::vec![0usize; d];
                for e in exps.iter_mut() {
                    *e = code % d;
                    code /= d;
                }
                MonomialUnitary { basis_perm: perm.clone(), phase_exponents: exps }
            })
        })
        .collect();

    for block_perm in (0..n_half).permutations(n_half) {
        let mut perm: Vec<usize> = (1..=n).collect();
        for t in 0..n_half {
            perm[n_half + t] = n_half + block_perm[t] + 1;
        }
        let permuted = b.permute_parties(&perm)?;
        // Enumerate monomial assignments with a per-party counter.
        let mut pick = alloc::vec![0usize; n_half];
        loop {
            let monomials: Vec<MonomialUnitary> =
                pick.iter().map(|&i| monomials_per_party[i].clone()).collect();
            let overlap = monomial_overlap(a, &permuted, &monomials)?;
            if overlap >= 1.0 - 1e-9 {
                return Ok(EquivVerdict::Equivalent(Witness {
                    block_permutation: block_perm.clone(),
                    monomials,
                }));
            }
            // Advance the counter.
            let mut t = 0;
            loop {
                if t == n_half {
                    break;
                }
                pick[t] += 1;
                if pick[t] < monomials_per_party.len() {
                    break;
                }
                pick[t] = 0;
                t += 1;
            }
            if t == n_half {
                break;
            }
        }
    }
    Ok(EquivVerdict::Unknown { spectrum_mismatch: false })
}

/// `|⟨a| (⊗ monomials on the right block) |b⟩|²` in one pass.
fn monomial_overlap(
    a: &QuditState,
    b_permuted: &QuditState,
    monomials: &[MonomialUnitary],
) -> Result<f64, SwapError> {
    let n = a.n();
    let d = a.d();
    let n_half = n / 2;
    let mut acc = Complex64::ZERO;
    let mut digits = alloc::vec![0usize; n];
    for (idx, &amp) in b_permuted.amplitudes().iter().enumerate() {
        if amp == Complex64::ZERO {
            continue;
        }
        let mut rest = idx;
        for t in (0..n).rev() {
            digits[t] = rest % d;
            rest /= d;
        }
        let mut phase = Complex64::ONE;
        let mut out_idx = 0usize;
        for t in 0..n {
            let g = if t >= n_half {
                let mono = &monomials[t - n_half];
                phase *= ame::root_of_unity(d, mono.phase_exponents[digits[t]] as i64);
                mono.basis_perm[digits[t]]
            } else {
                digits[t]
            };
            out_idx = out_idx * d + g;
        }
        acc += a.amplitude(out_idx).conj() * phase * amp;
    }
    Ok(acc.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ame::catalog;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The half-block permutation realized by the swap-form state:
    /// 00→00, 01→11, 02→22, 10→12, 11→20, 12→01, 20→21, 21→02, 22→10.
    const U_TABLE: [(usize, usize); 9] = [
        (0, 0),
        (1, 4),
        (2, 8),
        (3, 5),
        (4, 6),
        (5, 1),
        (6, 7),
        (7, 2),
        (8, 3),
    ];

    fn eq_swap_form() -> QuditState {
        catalog("AME43_swap_form").unwrap().state
    }

    #[test]
    fn epr_has_identity_unitary() {
        for d in [2usize, 3, 5] {
            let e = catalog(&alloc::format!("EPR({d})")).unwrap();
            let u = extract_unitary(&e.state).unwrap();
            assert!(linalg::max_abs_diff(u.matrix(), &linalg::identity(d)) < 1e-12);
        }
    }

    #[test]
    fn swap_form_unitary_matches_permutation_table() {
        let u = extract_unitary(&eq_swap_form()).unwrap();
        let mut expect = alloc::vec![Complex64::ZERO; 81];
        for &(input, output) in &U_TABLE {
            expect[output * 9 + input] = Complex64::ONE;
        }
        assert!(linalg::max_abs_diff(u.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn ghz_split_is_rejected() {
        let g = catalog("GHZ(4,2)").unwrap();
        assert!(matches!(
            extract_unitary(&g.state),
            Err(SwapError::SplitNotMaximallyEntangled(_))
        ));
    }

    #[test]
    fn extract_reconstruct_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for (n_half, d) in [(1usize, 2usize), (1, 5), (2, 3)] {
            let dim = d.pow(n_half as u32);
            let m = qstate::random_unitary(dim, &mut rng);
            let state = state_of_operator(n_half, d, &m).unwrap();
            let u = extract_unitary(&state).unwrap();
            assert!(linalg::max_abs_diff(u.matrix(), &m) < 1e-12);
            let back = u.reconstruct().unwrap();
            assert!(fidelity(&state, &back).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn epr_swapping_recovers_epr() {
        for d in [2usize, 3] {
            let e = catalog(&alloc::format!("EPR({d})")).unwrap();
            let branches = swap_once_canonical(&e.state, &e.state).unwrap();
            assert_eq!(branches.len(), d * d);
            let mut total = 0.0;
            for b in &branches {
                assert_abs_diff_eq!(b.probability, 1.0 / ((d * d) as f64).powi(1), epsilon = 1e-9);
                total += b.probability;
                if b.outcomes == alloc::vec![(0, 0)] {
                    assert!(fidelity(&b.post_state, &e.state).unwrap() > 1.0 - 1e-12);
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn swap_branches_match_operator_formula() {
        let state = eq_swap_form();
        let u = extract_unitary(&state).unwrap();
        let branches = swap_once_canonical(&state, &state).unwrap();
        assert_eq!(branches.len(), 81);
        for b in &branches {
            assert_abs_diff_eq!(b.probability, 1.0 / 81.0, epsilon = 1e-9);
            let op = branch_operator(u.matrix(), u.matrix(), 3, &b.outcomes).unwrap();
            let expect = state_of_operator(2, 3, &op).unwrap();
            let dev: f64 = b
                .post_state
                .amplitudes()
                .iter()
                .zip(expect.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-10, "outcomes {:?}: {dev}", b.outcomes);
        }

        // The all-zero branch is the clean U² state.
        let usq = linalg::mat_mul(9, u.matrix(), u.matrix());
        let expect = state_of_operator(2, 3, &usq).unwrap();
        assert!(fidelity(&branches[0].post_state, &expect).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn every_branch_corrects_to_the_zero_branch() {
        let state = eq_swap_form();
        let u = extract_unitary(&state).unwrap();
        let usq = linalg::mat_mul(9, u.matrix(), u.matrix());
        let target = state_of_operator(2, 3, &usq).unwrap();
        let branches = swap_once_canonical(&state, &state).unwrap();
        for b in &branches {
            // C = U_R P U_R† on the right block.
            let p = pauli_tensor(3, &b.outcomes).unwrap();
            let c = linalg::mat_mul(
                9,
                u.matrix(),
                &linalg::mat_mul(9, &p, &linalg::mat_adjoint(9, u.matrix())),
            );
            let corrected = apply_global_unitary(&b.post_state, &[3, 4], &c).unwrap();
            assert!(
                fidelity(&corrected, &target).unwrap() > 1.0 - 1e-9,
                "outcomes {:?}",
                b.outcomes
            );
        }
    }

    #[test]
    fn squared_table_comes_from_multiplication_not_transcription() {
        let u = extract_unitary(&eq_swap_form()).unwrap();
        let usq = linalg::mat_mul(9, u.matrix(), u.matrix());
        // The square of a permutation matrix is a permutation matrix:
        // every input maps to exactly one output and every output is hit.
        let mut image = alloc::vec![None; 9];
        let mut hit = alloc::vec![false; 9];
        for input in 0..9 {
            for output in 0..9 {
                let v = usq[output * 9 + input];
                if v.norm() > 0.5 {
                    assert!(image[input].is_none());
                    assert!((v - Complex64::ONE).norm() < 1e-12);
                    image[input] = Some(output);
                    hit[output] = true;
                }
            }
        }
        assert!(image.iter().all(|x| x.is_some()));
        assert!(hit.iter().all(|&x| x));

        // A hand-transcribed variant of the squared table that maps both
        // 10 and 12 to 01 (and both 11 and 20 to 21) is not injective
        // and must not match the computed square.
        let transcribed: [(usize, usize); 9] = [
            (0, 0),
            (1, 6),
            (2, 3),
            (3, 1),
            (4, 7),
            (5, 1),
            (6, 7),
            (7, 2),
            (8, 3),
        ];
        let mut seen = alloc::vec![false; 9];
        let mut injective = true;
        for &(_, out) in &transcribed {
            if seen[out] {
                injective = false;
            }
            seen[out] = true;
        }
        assert!(!injective);
        let matches_computed =
            transcribed.iter().all(|&(input, output)| image[input] == Some(output));
        assert!(!matches_computed);
    }

    #[test]
    fn chains_reproduce_unitary_powers() {
        let state = eq_swap_form();
        for m in [2usize, 3, 4] {
            let states = alloc::vec![state.clone(); m];
            for policy in [
                ChainOutcomes::AllZero,
                ChainOutcomes::Seeded(7),
                ChainOutcomes::Seeded(1234),
            ] {
                let result = swap_chain(&states, policy).unwrap();
                assert_eq!(result.hops, m);
                assert_eq!(result.outcome_record.len(), m - 1);
                assert!(
                    result.u_power_check,
                    "m={m}: corrected fidelity {}",
                    result.corrected_fidelity
                );
            }
        }

        // EPR chains always give back EPR.
        let epr = catalog("EPR(3)").unwrap().state;
        let result =
            swap_chain(&[epr.clone(), epr.clone(), epr.clone()], ChainOutcomes::Seeded(9))
                .unwrap();
        assert!(result.u_power_check);
        assert!(fidelity(&result.final_state, &epr).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn two_hop_chain_is_generally_not_ame() {
        let state = eq_swap_form();
        let result = swap_chain(&[state.clone(), state.clone()], ChainOutcomes::AllZero).unwrap();
        let report = ame::verify_state(&result.final_state, &ame::VerifyOptions::default());
        assert!(!report.is_ame);
    }

    #[test]
    fn three_hop_chain_is_ame_again() {
        let state = eq_swap_form();
        let result = swap_chain(
            &[state.clone(), state.clone(), state.clone()],
            ChainOutcomes::Seeded(3),
        )
        .unwrap();
        let report = ame::verify_state(&result.final_state, &ame::VerifyOptions::default());
        assert!(report.is_ame);

        let verdict = check_local_equiv_restricted(&result.final_state, &state).unwrap();
        match verdict {
            EquivVerdict::Equivalent(w) => {
                assert_eq!(w.block_permutation, alloc::vec![1, 0]);
                assert!(w.monomials.iter().any(|m| m.basis_perm == alloc::vec![0, 2, 1]));
                // The witness indeed maps the swap-form state onto the
                // chain output.
                let mapped = w.apply(&state).unwrap();
                assert!(fidelity(&mapped, &result.final_state).unwrap() > 1.0 - 1e-9);
            }
            EquivVerdict::Unknown { .. } => panic!("expected a witness"),
        }
    }

    #[test]
    fn self_equivalence_yields_identity_witness() {
        let state = eq_swap_form();
        match check_local_equiv_restricted(&state, &state).unwrap() {
            EquivVerdict::Equivalent(w) => assert!(w.is_identity()),
            EquivVerdict::Unknown { .. } => panic!("expected identity witness"),
        }
    }

    #[test]
    fn spectrum_mismatch_is_a_fast_path() {
        let ame43 = catalog("AME43").unwrap().state;
        let ghz = catalog("GHZ(4,3)").unwrap().state;
        match check_local_equiv_restricted(&ame43, &ghz).unwrap() {
            EquivVerdict::Unknown { spectrum_mismatch } => assert!(spectrum_mismatch),
            EquivVerdict::Equivalent(_) => panic!("GHZ is not AME"),
        }
    }

    #[test]
    fn permuted_swap_form_states_stay_ame() {
        // Every party permutation of the swap-form state passes the
        // verifier; the stronger claim that the permuted state equals
        // the original is not assumed.
        let state = eq_swap_form();
        let opts = ame::VerifyOptions::default();
        for perm in (1..=4usize).permutations(4) {
            let permuted = state.permute_parties(&perm).unwrap();
            assert!(ame::verify_state(&permuted, &opts).is_ame, "{perm:?}");
        }
    }

    #[test]
    fn witnesses_preserve_entropy_spectra() {
        // The fast path relies on every witness in the class leaving the
        // multiset of subset entropies unchanged.
        let state = eq_swap_form();
        let witness = Witness {
            block_permutation: alloc::vec![1, 0],
            monomials: alloc::vec![
                MonomialUnitary { basis_perm: alloc::vec![2, 0, 1], phase_exponents: alloc::vec![1, 0, 2] },
                MonomialUnitary { basis_perm: alloc::vec![0, 2, 1], phase_exponents: alloc::vec![0, 1, 0] },
            ],
        };
        let mapped = witness.apply(&state).unwrap();
        for size in 1..=2usize {
            let mut sa: alloc::vec::Vec<f64> = (1..=4)
                .combinations(size)
                .map(|s| subset_entropy(&state, &s).unwrap())
                .collect();
            let mut sb: alloc::vec::Vec<f64> = (1..=4)
                .combinations(size)
                .map(|s| subset_entropy(&mapped, &s).unwrap())
                .collect();
            sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
            sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in sa.iter().zip(&sb) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chain_validation() {
        let state = eq_swap_form();
        assert!(matches!(
            swap_chain(std::slice::from_ref(&state), ChainOutcomes::AllZero),
            Err(SwapError::ChainTooShort)
        ));
        let other = catalog("AME43").unwrap().state;
        assert!(matches!(
            swap_chain(&[state.clone(), other], ChainOutcomes::AllZero),
            Err(SwapError::ChainStatesDiffer(_))
        ));
        assert!(matches!(
            swap_chain(&[state.clone(), state.clone()], ChainOutcomes::Fixed(alloc::vec![])),
            Err(SwapError::OutcomeCount { expected: 1, got: 0 })
        ));
    }
}
