//! Threshold and ramp quantum secret sharing on AME resources.
//!
//! The dealer side encodes by Bell-measuring each of the `L` secret
//! qudits against one resource qudit and broadcasting the outcomes. Any
//! `m` of the remaining `2m - L` players recover by applying a sorting
//! unitary built from the resource amplitudes, followed by the Pauli
//! corrections selected by the broadcast outcomes.
//!
//! Access-structure classification works on the purification directly:
//! the dealer qudits of the resource state double as the reference system
//! `R`, and a player set is authorized / forbidden / intermediate
//! according to its mutual information with `R`. The recovery simulation
//! and the mutual-information route are independent, so the tests can
//! check one against the other.

use alloc::vec::Vec;
use itertools::Itertools;
use num_complex::Complex64;
#[allow(unused_imports)] // float intrinsics under no_std
use num_traits::Float;
use thiserror::Error;

use crate::ame::{self, AmeCandidate, AmeError, PairProjector};
use crate::linalg;
use crate::qstate::{
    self, apply_global_unitary, apply_local_unitary, mutual_information, subset_entropy,
    LocalUnitary, QuditState, StateError,
};

/// Classification tolerance on mutual information, in dits.
pub const CLASSIFY_TOL: f64 = 1e-8;
/// Orthonormality budget for the recovered `{|φ(k)⟩}` family.
pub const GRAM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QssError {
    #[error("resource must have an even number of parties, got {0}")]
    OddResource(usize),
    #[error("ramp parameter L={l} out of range 1..={m}")]
    LOutOfRange { l: usize, m: usize },
    #[error("expected {expected} dealer indices, got {got}")]
    DealerCount { expected: usize, got: usize },
    #[error("dealer index {0} invalid or repeated")]
    BadDealer(usize),
    #[error("secret must be {l} qudits of dimension {d}")]
    SecretShape { l: usize, d: usize },
    #[error("recovering set must contain exactly {expected} players")]
    RecoveringSetSize { expected: usize },
    #[error("party {0} is not a player of this scheme")]
    NotAPlayer(usize),
    #[error("expected {expected} Bell outcomes, got {got}")]
    OutcomeCount { expected: usize, got: usize },
    #[error("a measurement branch carried no probability")]
    DegenerateBranch,
    #[error("resource is not maximally entangled across the recovery cut (gram deviation {0:.3e})")]
    NotMaximallyEntangled(f64),
    #[error("reference set must contain at most {expected} parties")]
    ReferenceSetSize { expected: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Ame(#[from] AmeError),
}

/// An `(m, L, 2m-L)` ramp scheme (threshold scheme when `L = 1`) built on
/// a 2m-party resource state of local dimension d.
#[derive(Debug, Clone)]
pub struct QssScheme {
    m: usize,
    l: usize,
    d: usize,
    resource: AmeCandidate,
    dealer_indices: Vec<usize>,
}

impl QssScheme {
    /// Wraps a resource state. Dealers default to parties `1..=L`.
    pub fn new(
        resource: AmeCandidate,
        l: usize,
        dealers: Option<Vec<usize>>,
    ) -> Result<Self, QssError> {
        let n = resource.state.n();
        if !n.is_multiple_of(2) {
            return Err(QssError::OddResource(n));
        }
        let m = n / 2;
        if l == 0 || l > m {
            return Err(QssError::LOutOfRange { l, m });
        }
        let dealer_indices = dealers.unwrap_or_else(|| (1..=l).collect());
        if dealer_indices.len() != l {
            return Err(QssError::DealerCount { expected: l, got: dealer_indices.len() });
        }
        for (i, &p) in dealer_indices.iter().enumerate() {
            if p == 0 || p > n || dealer_indices[..i].contains(&p) {
                return Err(QssError::BadDealer(p));
            }
        }
        let d = resource.state.d();
        Ok(QssScheme { m, l, d, resource, dealer_indices })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn resource(&self) -> &AmeCandidate {
        &self.resource
    }

    pub fn dealer_indices(&self) -> &[usize] {
        &self.dealer_indices
    }

    /// Non-dealer parties of the resource, ascending. Player sets are
    /// always given in these original resource labels.
    pub fn players(&self) -> Vec<usize> {
        (1..=2 * self.m).filter(|p| !self.dealer_indices.contains(p)).collect()
    }

    pub fn secret_dim(&self) -> usize {
        self.d.pow(self.l as u32)
    }
}

/// The post-measurement share state for one vector of dealer outcomes.
#[derive(Debug, Clone)]
pub struct EncodedSecret {
    /// State of the `2m - L` players, parties in ascending resource order.
    pub post_state: QuditState,
    /// Bell outcomes `(q_i, p_i)` per dealer, in dealer order. Public
    /// knowledge: the dealers broadcast them.
    pub outcomes: Vec<(usize, usize)>,
    /// Probability of this branch.
    pub probability: f64,
    /// Dimension `d^L` of the encoded secret.
    pub secret_dim: usize,
}

/// The maximally entangled purification `(1/√(d^L)) Σ_k |k⟩_R |k⟩_S` of a
/// uniformly random L-qudit secret: reference digits first, then secret
/// digits, paired positionally.
pub fn purify_secret(l: usize, d: usize) -> Result<QuditState, QssError> {
    let half = qstate::dense_dim(l, d)?;
    let dim = qstate::dense_dim(2 * l, d)?;
    let scale = 1.0 / (half as f64).sqrt();
    let mut amps = alloc::vec![Complex64::ZERO; dim];
    for k in 0..half {
        amps[k * half + k] = Complex64::new(scale, 0.0);
    }
    Ok(QuditState::from_amplitudes(2 * l, d, amps)?)
}

/// Runs the dealer measurements for every outcome vector: `d^(2L)`
/// branches, each recording its outcomes, probability, and player state.
pub fn encode(scheme: &QssScheme, secret: &QuditState) -> Result<Vec<EncodedSecret>, QssError> {
    let (l, d) = (scheme.l, scheme.d);
    if secret.n() != l || secret.d() != d {
        return Err(QssError::SecretShape { l, d });
    }
    let global = secret.tensor(&scheme.resource.state)?;
    // Global party labels: secret qudit i is party i, resource party r
    // sits at L + r.
    let mut labels: Vec<usize> = (1..=l + 2 * scheme.m).collect();
    let secret_dim = scheme.secret_dim();

    struct Branch {
        outcomes: Vec<(usize, usize)>,
        probability: f64,
        state: QuditState,
    }
    let mut branches =
        alloc::vec![Branch { outcomes: Vec::new(), probability: 1.0, state: global }];
    for i in 0..l {
        let secret_label = i + 1;
        let dealer_label = l + scheme.dealer_indices[i];
        let first = labels.iter().position(|&x| x == secret_label).expect("label present") + 1;
        let second = labels.iter().position(|&x| x == dealer_label).expect("label present") + 1;
        let projector = PairProjector::new(&branches[0].state, first, second)?;
        let mut next = Vec::with_capacity(branches.len() * d * d);
        for branch in &branches {
            for q in 0..d {
                for p in 0..d {
                    let (prob, post) = projector.project(&branch.state, q, p)?;
                    let post = post.ok_or(QssError::DegenerateBranch)?;
                    let mut outcomes = branch.outcomes.clone();
                    outcomes.push((q, p));
                    next.push(Branch {
                        outcomes,
                        probability: branch.probability * prob,
                        state: post,
                    });
                }
            }
        }
        branches = next;
        labels.retain(|&x| x != secret_label && x != dealer_label);
    }
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(QssError::State(StateError::ProbabilityLeak(total)));
    }
    Ok(branches
        .into_iter()
        .map(|b| EncodedSecret {
            post_state: b.state,
            outcomes: b.outcomes,
            probability: b.probability,
            secret_dim,
        })
        .collect())
}

/// Runs the dealer measurements for one specific outcome vector only.
/// Agrees with the corresponding entry of [`encode`].
pub fn encode_branch(
    scheme: &QssScheme,
    secret: &QuditState,
    outcomes: &[(usize, usize)],
) -> Result<EncodedSecret, QssError> {
    let (l, d) = (scheme.l, scheme.d);
    if secret.n() != l || secret.d() != d {
        return Err(QssError::SecretShape { l, d });
    }
    if outcomes.len() != l {
        return Err(QssError::OutcomeCount { expected: l, got: outcomes.len() });
    }
    for &(q, p) in outcomes {
        if q >= d || p >= d {
            return Err(QssError::Ame(AmeError::IndexOutOfRange { index: q.max(p), d }));
        }
    }
    let mut labels: Vec<usize> = (1..=l + 2 * scheme.m).collect();
    let mut state = secret.tensor(&scheme.resource.state)?;
    let mut probability = 1.0f64;
    for (i, &(q, p)) in outcomes.iter().enumerate() {
        let secret_label = i + 1;
        let dealer_label = l + scheme.dealer_indices[i];
        let first = labels.iter().position(|&x| x == secret_label).expect("label present") + 1;
        let second = labels.iter().position(|&x| x == dealer_label).expect("label present") + 1;
        let (prob, post) = ame::bell_project(&state, first, second, q, p)?;
        let post = post.ok_or(QssError::DegenerateBranch)?;
        probability *= prob;
        state = post;
        labels.retain(|&x| x != secret_label && x != dealer_label);
    }
    Ok(EncodedSecret {
        post_state: state,
        outcomes: outcomes.to_vec(),
        probability,
        secret_dim: scheme.secret_dim(),
    })
}

/// The sorting unitary `V = Σ_k |k⟩⟨φ(k)|` for a given recovery split,
/// derived by reshaping the resource amplitudes against
/// (dealers + excluded players | recovering set). Returns the matrix and
/// the worst Gram deviation of the `{|φ(k)⟩}` family from orthonormality.
fn sorting_unitary(
    scheme: &QssScheme,
    recovering: &[usize],
    excluded: &[usize],
) -> Result<(Vec<Complex64>, f64), QssError> {
    let m = scheme.m;
    let d = scheme.d;
    let dim_m = d.pow(m as u32);
    // Row order: dealer digits first (dealer order), then excluded
    // players ascending. Columns: recovering set ascending.
    let mut s_side: Vec<usize> = scheme.dealer_indices.clone();
    s_side.extend_from_slice(excluded);
    debug_assert_eq!(s_side.len() + recovering.len(), 2 * m);
    let (group_idx, rest_idx, rest_dim) =
        qstate::group_rest_indexing_pub(&scheme.resource.state, &s_side)?;
    debug_assert_eq!(rest_dim, dim_m);
    let scale = (dim_m as f64).sqrt();
    let mut phi = alloc::vec![Complex64::ZERO; dim_m * dim_m];
    let amps = scheme.resource.state.amplitudes();
    for (idx, &a) in amps.iter().enumerate() {
        phi[group_idx[idx] * dim_m + rest_idx[idx]] = a * scale;
    }
    let gram = linalg::gram_rows(dim_m, dim_m, &phi);
    let mut deviation = 0.0f64;
    for i in 0..dim_m {
        for j in 0..dim_m {
            let mut v = gram[i * dim_m + j];
            if i == j {
                v -= Complex64::ONE;
            }
            deviation = deviation.max(v.norm());
        }
    }
    if deviation > GRAM_TOL {
        return Err(QssError::NotMaximallyEntangled(deviation));
    }
    // V maps |φ(k)⟩ to |k⟩: row k of V is ⟨φ(k)|.
    let mut v = alloc::vec![Complex64::ZERO; dim_m * dim_m];
    for k in 0..dim_m {
        for x in 0..dim_m {
            v[k * dim_m + x] = phi[k * dim_m + x].conj();
        }
    }
    Ok((v, deviation))
}

/// A recovery run: the reconstructed secret plus what was applied.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub secret: QuditState,
    /// Recovering set, ascending resource labels.
    pub recovering_set: Vec<usize>,
    /// Worst Gram deviation of the sorted basis family.
    pub gram_deviation: f64,
}

/// Recovers the secret from one encode branch using exactly `m` players:
/// applies the sorting unitary on the recovering set, then the outcome
/// Paulis on its first `L` qudits, and extracts the secret qudits.
pub fn recover(
    scheme: &QssScheme,
    encoded: &EncodedSecret,
    recovering_set: &[usize],
) -> Result<Recovery, QssError> {
    let players = scheme.players();
    if encoded.outcomes.len() != scheme.l {
        return Err(QssError::OutcomeCount { expected: scheme.l, got: encoded.outcomes.len() });
    }
    if encoded.post_state.n() != players.len() || encoded.post_state.d() != scheme.d {
        return Err(QssError::SecretShape { l: players.len(), d: scheme.d });
    }
    let set = qstate::checked_subset(2 * scheme.m, recovering_set).map_err(QssError::State)?;
    if set.len() != scheme.m {
        return Err(QssError::RecoveringSetSize { expected: scheme.m });
    }
    for &p in &set {
        if !players.contains(&p) {
            return Err(QssError::NotAPlayer(p));
        }
    }
    let excluded: Vec<usize> = players.iter().copied().filter(|p| !set.contains(p)).collect();
    let (v, gram_deviation) = sorting_unitary(scheme, &set, &excluded)?;

    // Positions of the recovering parties inside the player state.
    let positions: Vec<usize> = set
        .iter()
        .map(|p| players.iter().position(|x| x == p).expect("player present") + 1)
        .collect();
    let mut state = apply_global_unitary(&encoded.post_state, &positions, &v)?;
    for (i, &(q, p)) in encoded.outcomes.iter().enumerate() {
        let pauli = ame::pauli(scheme.d, q, p)?;
        let lu = LocalUnitary::new(positions[i], scheme.d, pauli.matrix().to_vec())?;
        state = apply_local_unitary(&state, &lu)?;
    }
    let secret_slots: Vec<usize> = positions[..scheme.l].to_vec();
    let secret = state.extract_pure_substate(&secret_slots)?;
    Ok(Recovery { secret, recovering_set: set, gram_deviation })
}

/// Access-structure category of a player set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetCategory {
    Authorized,
    Forbidden,
    Intermediate,
}

#[derive(Debug, Clone)]
pub struct SetClassification {
    pub subset: Vec<usize>,
    pub category: SetCategory,
    pub mutual_info_dits: f64,
}

/// Classifies a player set by its mutual information with the reference:
/// `2L` dits means authorized, `0` forbidden, anything else intermediate.
///
/// The purification is the resource state itself with the dealer qudits
/// relabeled as the reference system; no separate encoding isometry is
/// materialized. The recovery tests exercise the equivalence of the two
/// pictures.
pub fn classify_set(scheme: &QssScheme, subset: &[usize]) -> Result<SetClassification, QssError> {
    let players = scheme.players();
    let set = qstate::checked_subset(2 * scheme.m, subset).map_err(QssError::State)?;
    for &p in &set {
        if !players.contains(&p) {
            return Err(QssError::NotAPlayer(p));
        }
    }
    let mi = mutual_information(&scheme.resource.state, &scheme.dealer_indices, &set)?;
    let full = 2.0 * scheme.l as f64;
    let category = if (mi - full).abs() <= CLASSIFY_TOL {
        SetCategory::Authorized
    } else if mi.abs() <= CLASSIFY_TOL {
        SetCategory::Forbidden
    } else {
        SetCategory::Intermediate
    };
    Ok(SetClassification { subset: set, category, mutual_info_dits: mi })
}

/// One failed condition inside an equivalence scan.
#[derive(Debug, Clone)]
pub struct EquivalenceFailure {
    pub reference: Vec<usize>,
    pub subset: Vec<usize>,
    pub got: f64,
    pub expected: f64,
}

/// Report of the threshold-equivalence scan.
#[derive(Debug, Clone)]
pub struct ThresholdEquivalenceReport {
    /// All mutual-information conditions hold for every dealer choice.
    pub ok: bool,
    /// Verdict of the subset-entropy verifier on the same state.
    pub ame_verdict: bool,
    /// The two routes agree.
    pub consistent: bool,
    pub failures: Vec<EquivalenceFailure>,
}

/// Checks that a 2m-party state is the purification of an (m, 2m-1)
/// threshold scheme for every choice of the reference party: every
/// m-subset of the rest carries full information (`I = 2`), every
/// (m-1)-subset none (`I = 0`). Cross-checks the verdict against the
/// entropy verifier.
pub fn verify_threshold_equivalence(
    state: &QuditState,
) -> Result<ThresholdEquivalenceReport, QssError> {
    let n = state.n();
    if !n.is_multiple_of(2) {
        return Err(QssError::OddResource(n));
    }
    let m = n / 2;
    let mut failures = Vec::new();
    for r in 1..=n {
        let others: Vec<usize> = (1..=n).filter(|&p| p != r).collect();
        for subset in others.iter().copied().combinations(m) {
            let mi = mutual_information(state, &[r], &subset)?;
            if (mi - 2.0).abs() > CLASSIFY_TOL {
                failures.push(EquivalenceFailure {
                    reference: alloc::vec![r],
                    subset,
                    got: mi,
                    expected: 2.0,
                });
            }
        }
        if m >= 2 {
            for subset in others.iter().copied().combinations(m - 1) {
                let mi = mutual_information(state, &[r], &subset)?;
                if mi.abs() > CLASSIFY_TOL {
                    failures.push(EquivalenceFailure {
                        reference: alloc::vec![r],
                        subset,
                        got: mi,
                        expected: 0.0,
                    });
                }
            }
        }
    }
    let ok = failures.is_empty();
    let ame_verdict = ame::verify_state(state, &ame::VerifyOptions::default()).is_ame;
    Ok(ThresholdEquivalenceReport { ok, ame_verdict, consistent: ok == ame_verdict, failures })
}

/// Report of the ramp-equivalence scan.
#[derive(Debug, Clone)]
pub struct RampEquivalenceReport {
    /// Every bipartition into two m-sets keeping the reference together
    /// is maximally entangled.
    pub condition_holds: bool,
    /// The derived consequences hold: `S(C) = L` for every L-player set,
    /// `S(R,A) = S(A) - S(R)` for authorized sets, and
    /// `S(R,B) = S(B) + S(R)` for forbidden sets.
    pub consequences_hold: bool,
    pub ok: bool,
    pub failures: Vec<EquivalenceFailure>,
}

/// Checks the defining entanglement condition of an `(m, L, 2m-L)` ramp
/// purification: the 2m-party state (players plus L reference qudits)
/// must be maximally entangled across every m|m bipartition that keeps
/// the reference qudits on one side. Smaller reference-together cuts
/// follow by tracing the totally mixed m-party reductions, and the
/// derived entropy identities are verified separately.
pub fn verify_ramp_equivalence(
    state: &QuditState,
    reference_set: &[usize],
) -> Result<RampEquivalenceReport, QssError> {
    let n = state.n();
    if !n.is_multiple_of(2) {
        return Err(QssError::OddResource(n));
    }
    let m = n / 2;
    let refs = qstate::checked_subset(n, reference_set).map_err(QssError::State)?;
    let l = refs.len();
    if l > m {
        return Err(QssError::ReferenceSetSize { expected: m });
    }
    let mut failures = Vec::new();

    // Defining condition over m-subsets avoiding the reference (their
    // complements contain it whole).
    for subset in (1..=n).filter(|p| !refs.contains(p)).combinations(m) {
        let s = subset_entropy(state, &subset)?;
        if (s - m as f64).abs() > CLASSIFY_TOL {
            failures.push(EquivalenceFailure {
                reference: refs.clone(),
                subset,
                got: s,
                expected: m as f64,
            });
        }
    }
    let condition_holds = failures.is_empty();

    // Derived identities on player sets.
    let players: Vec<usize> = (1..=n).filter(|p| !refs.contains(p)).collect();
    let s_r = subset_entropy(state, &refs)?;
    let mut consequence_failures = Vec::new();
    if (s_r - l as f64).abs() > CLASSIFY_TOL {
        consequence_failures.push(EquivalenceFailure {
            reference: refs.clone(),
            subset: refs.clone(),
            got: s_r,
            expected: l as f64,
        });
    }
    for subset in players.iter().copied().combinations(l) {
        let s_c = subset_entropy(state, &subset)?;
        if (s_c - l as f64).abs() > CLASSIFY_TOL {
            consequence_failures.push(EquivalenceFailure {
                reference: refs.clone(),
                subset,
                got: s_c,
                expected: l as f64,
            });
        }
    }
    for size in 1..=players.len() {
        for subset in players.iter().copied().combinations(size) {
            let s_set = subset_entropy(state, &subset)?;
            let mut joint = subset.clone();
            joint.extend_from_slice(&refs);
            joint.sort_unstable();
            let s_joint = subset_entropy(state, &joint)?;
            if size >= m {
                let expected = s_set - s_r;
                if (s_joint - expected).abs() > CLASSIFY_TOL {
                    consequence_failures.push(EquivalenceFailure {
                        reference: refs.clone(),
                        subset,
                        got: s_joint,
                        expected,
                    });
                }
            } else if size <= m - l {
                let expected = s_set + s_r;
                if (s_joint - expected).abs() > CLASSIFY_TOL {
                    consequence_failures.push(EquivalenceFailure {
                        reference: refs.clone(),
                        subset,
                        got: s_joint,
                        expected,
                    });
                }
            }
        }
    }
    let consequences_hold = consequence_failures.is_empty();
    failures.extend(consequence_failures);
    Ok(RampEquivalenceReport {
        condition_holds,
        consequences_hold,
        ok: condition_holds && consequences_hold,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ame::catalog;
    use crate::codes;
    use crate::gf::FiniteField;
    use crate::qstate::{fidelity, partial_trace, random_state, trace_distance, Bipartition};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ame43_scheme() -> QssScheme {
        QssScheme::new(catalog("AME43").unwrap(), 1, None).unwrap()
    }

    fn ame65_scheme() -> QssScheme {
        let f5 = FiniteField::new(5, 1).unwrap();
        let code = codes::reed_solomon(&f5, 6, 3).unwrap();
        QssScheme::new(ame::state_from_code(&code).unwrap(), 2, None).unwrap()
    }

    #[test]
    fn purified_secrets() {
        let p = purify_secret(1, 3).unwrap();
        let scale = 1.0 / 3.0f64.sqrt();
        for k in 0..3 {
            assert_abs_diff_eq!(p.amplitude(k * 3 + k).re, scale, epsilon = 1e-14);
        }

        let p22 = purify_secret(2, 2).unwrap();
        assert_eq!(p22.n(), 4);
        assert_abs_diff_eq!(subset_entropy(&p22, &[1, 2]).unwrap(), 2.0, epsilon = 1e-10);

        let epr = purify_secret(1, 2).unwrap();
        let cat = catalog("EPR(2)").unwrap();
        assert!(fidelity(&epr, &cat.state).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn encode_enumerates_uniform_branches() {
        let scheme = ame43_scheme();
        let secret = QuditState::basis_state(1, 3, &[0]).unwrap();
        let branches = encode(&scheme, &secret).unwrap();
        assert_eq!(branches.len(), 9);
        for b in &branches {
            assert_abs_diff_eq!(b.probability, 1.0 / 9.0, epsilon = 1e-9);
            assert_eq!(b.post_state.n(), 3);
            assert_eq!(b.secret_dim, 3);
        }
    }

    /// Direct construction of the encoded state from the coefficient
    /// formula: post ∝ Σ_k ⟨k_1…k_L| (⊗_i U†_{q_i p_i}) |s⟩
    /// |k_{L+1}…k_m⟩_B |φ(k)⟩_A, with B the excluded players and φ read
    /// off the resource amplitudes. Oracle for the simulated projections.
    fn encoded_oracle(
        scheme: &QssScheme,
        secret: &QuditState,
        outcomes: &[(usize, usize)],
    ) -> QuditState {
        let (m, l, d) = (scheme.m(), scheme.l(), scheme.d());
        let players = scheme.players();
        // Canonical split: B = first m - L players, A = last m players.
        let b_set: Vec<usize> = players[..m - l].to_vec();
        let a_set: Vec<usize> = players[m - l..].to_vec();

        // s' = (⊗ U†) s.
        let mut sprime = secret.clone();
        for (i, &(q, p)) in outcomes.iter().enumerate() {
            let adj = ame::pauli_adjoint(d, q, p).unwrap();
            let lu = LocalUnitary::new(i + 1, d, adj).unwrap();
            sprime = apply_local_unitary(&sprime, &lu).unwrap();
        }

        // φ(k) via the (dealers, B | A) reshape of the resource.
        let mut s_side = scheme.dealer_indices().to_vec();
        s_side.extend_from_slice(&b_set);
        let (gi, ri, rest_dim) =
            qstate::group_rest_indexing_pub(&scheme.resource().state, &s_side).unwrap();
        let dim_m = d.pow(m as u32);
        let scale = (dim_m as f64).sqrt();
        let mut phi = alloc::vec![Complex64::ZERO; dim_m * rest_dim];
        for (idx, &a) in scheme.resource().state.amplitudes().iter().enumerate() {
            phi[gi[idx] * rest_dim + ri[idx]] = a * scale;
        }

        // Assemble player amplitudes (players ascending).
        let dim_players = d.pow(players.len() as u32);
        let mut amps = alloc::vec![Complex64::ZERO; dim_players];
        let dim_l = d.pow(l as u32);
        let dim_b = d.pow((m - l) as u32);
        let norm = 1.0 / (dim_b as f64).sqrt();
        for kb in 0..dim_b {
            for ka in 0..rest_dim {
                let mut acc = Complex64::ZERO;
                for ks in 0..dim_l {
                    let k = ks * dim_b + kb;
                    acc += sprime.amplitude(ks) * phi[k * rest_dim + ka];
                }
                // Scatter (kb over b_set, ka over a_set) into ascending
                // player order.
                let mut digits = alloc::vec![0usize; players.len()];
                let mut rest = kb;
                for t in (0..b_set.len()).rev() {
                    digits[players.iter().position(|p| *p == b_set[t]).unwrap()] = rest % d;
                    rest /= d;
                }
                let mut rest = ka;
                for t in (0..a_set.len()).rev() {
                    digits[players.iter().position(|p| *p == a_set[t]).unwrap()] = rest % d;
                    rest /= d;
                }
                let idx = digits.iter().fold(0, |acc2, &g| acc2 * d + g);
                amps[idx] += acc * norm;
            }
        }
        QuditState::from_unnormalized(players.len(), d, amps).unwrap()
    }

    #[test]
    fn encode_matches_coefficient_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let scheme = ame43_scheme();
        let secret = random_state(1, 3, &mut rng);
        let branches = encode(&scheme, &secret).unwrap();
        for b in &branches {
            let expect = encoded_oracle(&scheme, &secret, &b.outcomes);
            let dev: f64 = b
                .post_state
                .amplitudes()
                .iter()
                .zip(expect.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-10, "outcomes {:?}: deviation {dev}", b.outcomes);
        }
    }

    #[test]
    fn encode_identity_branch_holds_plain_secret() {
        // With outcomes (0,0), U_00 = I, so the coefficient row is the
        // secret itself.
        let scheme = ame43_scheme();
        let secret = QuditState::basis_state(1, 3, &[0]).unwrap();
        let branches = encode(&scheme, &secret).unwrap();
        let zero = &branches[0];
        assert_eq!(zero.outcomes, alloc::vec![(0, 0)]);
        let expect = encoded_oracle(&scheme, &secret, &[(0, 0)]);
        assert!(fidelity(&zero.post_state, &expect).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn encode_branch_agrees_with_full_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let scheme = QssScheme::new(catalog("AME43").unwrap(), 2, None).unwrap();
        let secret = random_state(2, 3, &mut rng);
        let branches = encode(&scheme, &secret).unwrap();
        for flat in [0usize, 7, 40, 80] {
            let outcomes = branches[flat].outcomes.clone();
            let single = encode_branch(&scheme, &secret, &outcomes).unwrap();
            assert_abs_diff_eq!(
                single.probability,
                branches[flat].probability,
                epsilon = 1e-12
            );
            assert!(
                fidelity(&single.post_state, &branches[flat].post_state).unwrap()
                    > 1.0 - 1e-12
            );
        }
    }

    #[test]
    fn ramp_encode_branches_sum_to_one() {
        // L=2 on the 4-party qutrit state: 81 branches.
        let scheme = QssScheme::new(catalog("AME43").unwrap(), 2, None).unwrap();
        let secret = purify_secret(1, 3).unwrap(); // any 2-qutrit state
        let branches = encode(&scheme, &secret).unwrap();
        assert_eq!(branches.len(), 81);
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn recovery_from_every_branch_and_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scheme = ame43_scheme();
        for secret in [
            QuditState::from_unnormalized(
                1,
                3,
                alloc::vec![Complex64::ONE, Complex64::ONE, Complex64::ZERO],
            )
            .unwrap(),
            QuditState::basis_state(1, 3, &[2]).unwrap(),
            random_state(1, 3, &mut rng),
        ] {
            let branches = encode(&scheme, &secret).unwrap();
            for b in &branches {
                for set in [[2usize, 3], [2, 4], [3, 4]] {
                    let rec = recover(&scheme, b, &set).unwrap();
                    let f = fidelity(&rec.secret, &secret).unwrap();
                    assert!(f >= 1.0 - 1e-9, "set {set:?} outcomes {:?}: {f}", b.outcomes);
                    assert!(rec.gram_deviation < 1e-9);
                }
            }
        }
    }

    #[test]
    fn recovery_needs_m_players() {
        let scheme = ame43_scheme();
        let secret = QuditState::basis_state(1, 3, &[1]).unwrap();
        let branches = encode(&scheme, &secret).unwrap();
        assert!(matches!(
            recover(&scheme, &branches[0], &[2]),
            Err(QssError::RecoveringSetSize { expected: 2 })
        ));
        assert!(matches!(
            recover(&scheme, &branches[0], &[1, 2]),
            Err(QssError::NotAPlayer(1))
        ));
    }

    #[test]
    fn threshold_classification() {
        let scheme = ame43_scheme();
        for set in [[2usize, 3], [2, 4], [3, 4]] {
            let c = classify_set(&scheme, &set).unwrap();
            assert_eq!(c.category, SetCategory::Authorized);
            assert_abs_diff_eq!(c.mutual_info_dits, 2.0, epsilon = 1e-8);
        }
        for p in [2usize, 3, 4] {
            let c = classify_set(&scheme, &[p]).unwrap();
            assert_eq!(c.category, SetCategory::Forbidden);
            assert_abs_diff_eq!(c.mutual_info_dits, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn ramp_classification_has_intermediate_sets() {
        let scheme = ame65_scheme();
        let players = scheme.players();
        assert_eq!(players, alloc::vec![3, 4, 5, 6]);
        for set in players.iter().copied().combinations(2) {
            let c = classify_set(&scheme, &set).unwrap();
            assert_eq!(c.category, SetCategory::Intermediate, "{set:?}");
            assert!(c.mutual_info_dits > 1e-6 && c.mutual_info_dits < 4.0 - 1e-6);
        }
        for set in players.iter().copied().combinations(3) {
            let c = classify_set(&scheme, &set).unwrap();
            assert_eq!(c.category, SetCategory::Authorized);
            assert_abs_diff_eq!(c.mutual_info_dits, 4.0, epsilon = 1e-8);
        }
        for &p in &players {
            let c = classify_set(&scheme, &[p]).unwrap();
            assert_eq!(c.category, SetCategory::Forbidden);
        }
    }

    #[test]
    fn encoded_branch_states_are_ame_themselves() {
        // Sharing a specific secret leaves the 2m-1 players in a state
        // that itself passes the verifier.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let scheme = ame43_scheme();
        let opts = ame::VerifyOptions::default();
        for secret in [QuditState::basis_state(1, 3, &[1]).unwrap(), random_state(1, 3, &mut rng)]
        {
            let branches = encode(&scheme, &secret).unwrap();
            for b in branches.iter().take(3) {
                assert!(ame::verify_state(&b.post_state, &opts).is_ame);
            }
        }
    }

    #[test]
    fn forbidden_sets_learn_nothing() {
        // Reductions of forbidden sets are secret-independent and
        // totally mixed, branch by branch.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scheme = ame43_scheme();
        let s1 = random_state(1, 3, &mut rng);
        let s2 = random_state(1, 3, &mut rng);
        let b1 = encode(&scheme, &s1).unwrap();
        let b2 = encode(&scheme, &s2).unwrap();
        for (x, y) in b1.iter().zip(&b2) {
            assert_eq!(x.outcomes, y.outcomes);
            for player_pos in 1..=3usize {
                let bp = Bipartition::new(3, &[player_pos]).unwrap();
                let r1 = partial_trace(&x.post_state, &bp).unwrap();
                let r2 = partial_trace(&y.post_state, &bp).unwrap();
                assert!(trace_distance(&r1, &r2).unwrap() < 1e-9);
                assert!(r1.deviation_from_maximally_mixed() < 1e-9);
            }
        }
    }

    #[test]
    fn complement_law_and_monotonicity() {
        let scheme = ame65_scheme();
        let players = scheme.players();
        for size in 1..=players.len() {
            for set in players.iter().copied().combinations(size) {
                let c = classify_set(&scheme, &set).unwrap();
                // Complement law: forbidden sets have authorized
                // complements.
                if c.category == SetCategory::Forbidden && size < players.len() {
                    let comp: Vec<usize> =
                        players.iter().copied().filter(|p| !set.contains(p)).collect();
                    let cc = classify_set(&scheme, &comp).unwrap();
                    assert_eq!(cc.category, SetCategory::Authorized);
                }
                // Monotonicity: supersets of authorized sets stay
                // authorized.
                if c.category == SetCategory::Authorized {
                    for extra in players.iter().copied().filter(|p| !set.contains(p)) {
                        let mut bigger = set.clone();
                        bigger.push(extra);
                        let cb = classify_set(&scheme, &bigger).unwrap();
                        assert_eq!(cb.category, SetCategory::Authorized);
                    }
                }
            }
        }
    }

    #[test]
    fn threshold_scheme_has_no_intermediate_sets() {
        let scheme = ame43_scheme();
        let players = scheme.players();
        for size in 1..=players.len() {
            for set in players.iter().copied().combinations(size) {
                let c = classify_set(&scheme, &set).unwrap();
                let expect = if size >= scheme.m() {
                    SetCategory::Authorized
                } else {
                    SetCategory::Forbidden
                };
                assert_eq!(c.category, expect);
            }
        }
    }

    #[test]
    fn ramp_scheme_with_interleaved_dealers() {
        // Dealers {2, 5} leave players {1, 3, 4, 6}; the sorting unitary
        // has to pack dealer digits (in dealer order) between excluded
        // players on both sides.
        let f5 = FiniteField::new(5, 1).unwrap();
        let code = codes::reed_solomon(&f5, 6, 3).unwrap();
        let resource = ame::state_from_code(&code).unwrap();
        let scheme = QssScheme::new(resource, 2, Some(alloc::vec![5, 2])).unwrap();
        assert_eq!(scheme.players(), alloc::vec![1, 3, 4, 6]);

        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let secret = random_state(2, 5, &mut rng);
        for outcomes in [alloc::vec![(0, 0), (0, 0)], alloc::vec![(3, 1), (2, 4)]] {
            let branch = encode_branch(&scheme, &secret, &outcomes).unwrap();
            for set in [[1usize, 3, 4], [1, 4, 6], [3, 4, 6]] {
                let rec = recover(&scheme, &branch, &set).unwrap();
                assert!(fidelity(&rec.secret, &secret).unwrap() >= 1.0 - 1e-9, "{set:?}");
            }
        }
        for set in [[1usize, 3], [4, 6]] {
            let c = classify_set(&scheme, &set).unwrap();
            assert_eq!(c.category, SetCategory::Intermediate);
        }
    }

    #[test]
    fn threshold_equivalence_reports() {
        let ame = catalog("AME43").unwrap();
        let rep = verify_threshold_equivalence(&ame.state).unwrap();
        assert!(rep.ok && rep.ame_verdict && rep.consistent);

        let ghz = catalog("GHZ(4,2)").unwrap();
        let rep = verify_threshold_equivalence(&ghz.state).unwrap();
        assert!(!rep.ok && !rep.ame_verdict && rep.consistent);
        // GHZ single-party reductions are classically correlated with
        // the reference.
        assert!(rep
            .failures
            .iter()
            .any(|f| f.subset.len() == 1 && f.expected == 0.0 && f.got > 0.5));

        let epr = catalog("EPR(5)").unwrap();
        let rep = verify_threshold_equivalence(&epr.state).unwrap();
        assert!(rep.ok && rep.consistent);

        assert!(matches!(
            verify_threshold_equivalence(&catalog("GHZ(3,2)").unwrap().state),
            Err(QssError::OddResource(3))
        ));
    }

    #[test]
    fn ramp_equivalence_reports() {
        let scheme = ame65_scheme();
        let rep = verify_ramp_equivalence(&scheme.resource().state, &[1, 2]).unwrap();
        assert!(rep.ok && rep.condition_holds && rep.consequences_hold);

        let ghz = catalog("GHZ(4,2)").unwrap();
        let rep = verify_ramp_equivalence(&ghz.state, &[1]).unwrap();
        assert!(!rep.ok && !rep.condition_holds);

        // A state maximally entangled across reference-together cuts,
        // built from an AME state by rotating a non-reference party.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let u = qstate::random_unitary(3, &mut rng);
        let lu = LocalUnitary::new(4, 3, u).unwrap();
        let rotated = apply_local_unitary(&catalog("AME43").unwrap().state, &lu).unwrap();
        let rep = verify_ramp_equivalence(&rotated, &[1]).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn scheme_validation() {
        let ame = catalog("AME43").unwrap();
        assert!(matches!(
            QssScheme::new(ame.clone(), 3, None),
            Err(QssError::LOutOfRange { l: 3, m: 2 })
        ));
        assert!(matches!(
            QssScheme::new(ame.clone(), 1, Some(alloc::vec![5])),
            Err(QssError::BadDealer(5))
        ));
        assert!(matches!(
            QssScheme::new(ame.clone(), 2, Some(alloc::vec![1, 1])),
            Err(QssError::BadDealer(1))
        ));
        let ghz3 = catalog("GHZ(3,2)").unwrap();
        assert!(matches!(QssScheme::new(ghz3, 1, None), Err(QssError::OddResource(3))));

        // Dealers need not be the first parties.
        let scheme = QssScheme::new(ame, 1, Some(alloc::vec![3])).unwrap();
        assert_eq!(scheme.players(), alloc::vec![1, 2, 4]);
        let secret = QuditState::basis_state(1, 3, &[1]).unwrap();
        let branches = encode(&scheme, &secret).unwrap();
        for b in &branches {
            let rec = recover(&scheme, b, &[1, 4]).unwrap();
            assert!(fidelity(&rec.secret, &secret).unwrap() > 1.0 - 1e-9);
        }
    }
}
