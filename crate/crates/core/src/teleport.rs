//! Open-destination teleportation on an AME resource.
//!
//! The dealer Bell-measures her resource qudit against the input state,
//! leaving the destination undecided. A joint set `A` of `ceil(n/2)`
//! parties then applies the sorting unitary derived from the resource
//! amplitudes; afterwards the first `A` qudit holds the (Pauli-rotated)
//! input and every remaining player of the small side shares a fresh EPR
//! pair with one `A` qudit. Teleporting into the small side costs one
//! more Bell measurement; handing the state to a member of `A` is a mere
//! relabeling inside the joint operation.
//!
//! Pairing convention: the i-th player of the small side (ascending
//! party order) is paired with A-slot `i + 1`; the protocol applies the
//! corrections itself, so final fidelity is the single success metric.

use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // float intrinsics under no_std
use num_traits::Float;
use thiserror::Error;

use crate::ame::{self, AmeCandidate, AmeError, PairProjector};
use crate::linalg;
use crate::qstate::{
    self, apply_global_unitary, apply_local_unitary, fidelity, LocalUnitary, QuditState,
    StateError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TeleportError {
    #[error("resource failed AME verification")]
    ResourceNotAme,
    #[error("dealer {party} out of range 1..={n}")]
    DealerOutOfRange { party: usize, n: usize },
    #[error("set A must contain exactly {expected} parties, got {got}")]
    SetASize { expected: usize, got: usize },
    #[error("set A must not contain the dealer")]
    DealerInSetA,
    #[error("destination must differ from the dealer")]
    DestinationIsDealer,
    #[error("destination {0} must not belong to set A")]
    DestinationInSetA(usize),
    #[error("destination {0} must belong to set A")]
    DestinationNotInSetA(usize),
    #[error("destination {party} out of range 1..={n}")]
    DestinationOutOfRange { party: usize, n: usize },
    #[error("secret must be a single qudit of dimension {expected}")]
    SecretShape { expected: usize },
    #[error("a measurement branch carried no probability")]
    DegenerateBranch,
    #[error("the sorted basis family is not orthonormal (deviation {0:.3e})")]
    BadSortedBasis(f64),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Ame(#[from] AmeError),
}

/// One recorded protocol step.
#[derive(Debug, Clone)]
pub struct TranscriptStep {
    pub actor: String,
    pub action: String,
    pub outcome: Option<(usize, usize)>,
}

/// Ordered record of the canonical (all-zero outcome) protocol path.
/// Every outcome is recorded before any correction that consumes it.
#[derive(Debug, Clone)]
pub struct ProtocolTranscript {
    pub steps: Vec<TranscriptStep>,
    pub final_fidelity: f64,
}

/// Result of one outcome pair.
#[derive(Debug, Clone)]
pub struct BranchResult {
    pub dealer_outcome: (usize, usize),
    /// Second Bell measurement; absent when the destination sits in A.
    pub a_outcome: Option<(usize, usize)>,
    pub probability: f64,
    /// Fidelity with the input state after corrections.
    pub fidelity: f64,
}

/// Full protocol run over every outcome branch.
#[derive(Debug, Clone)]
pub struct TeleportRun {
    pub resource: AmeCandidate,
    pub dealer: usize,
    pub set_a: Vec<usize>,
    pub destination: usize,
    pub branches: Vec<BranchResult>,
    /// Post-dealer states per dealer outcome (flat index `q·d + p`),
    /// before any destination-dependent operation. Exposed so runs with
    /// different destinations can be compared step-for-step.
    pub dealer_branch_states: Vec<QuditState>,
    pub transcript: ProtocolTranscript,
    pub min_fidelity: f64,
}

enum DestinationKind {
    /// Index into the small side (ascending player order).
    SmallSide(usize),
    /// Index into set A (ascending order).
    InA(usize),
}

/// Teleports `secret` to a party outside `set_a`: dealer measurement,
/// sorting unitary on `A`, Bell measurement pairing the secret slot with
/// the destination's EPR partner, Pauli corrections at the destination.
/// Enumerates all `d^4` outcome pairs.
pub fn open_destination_teleport(
    resource: &AmeCandidate,
    dealer: usize,
    secret: &QuditState,
    set_a: &[usize],
    destination: usize,
) -> Result<TeleportRun, TeleportError> {
    let n = resource.state.n();
    if destination == 0 || destination > n {
        return Err(TeleportError::DestinationOutOfRange { party: destination, n });
    }
    if destination == dealer {
        return Err(TeleportError::DestinationIsDealer);
    }
    let set_a = validate_set_a(resource, dealer, set_a)?;
    if set_a.contains(&destination) {
        return Err(TeleportError::DestinationInSetA(destination));
    }
    let small: Vec<usize> =
        (1..=n).filter(|&p| p != dealer && !set_a.contains(&p)).collect();
    let b_index = small
        .iter()
        .position(|&p| p == destination)
        .expect("destination is neither dealer nor in A");
    run_protocol(resource, dealer, secret, &set_a, DestinationKind::SmallSide(b_index))
}

/// Variant with the destination inside the jointly operating set: the
/// sorting unitary is composed with the swap that parks the secret slot
/// on the destination qudit, and no second measurement is needed.
/// `set_a` is derived canonically: the destination plus the lowest
/// non-dealer parties.
pub fn choose_destination_in_a(
    resource: &AmeCandidate,
    dealer: usize,
    secret: &QuditState,
    destination: usize,
) -> Result<TeleportRun, TeleportError> {
    let n = resource.state.n();
    if destination == 0 || destination > n {
        return Err(TeleportError::DestinationOutOfRange { party: destination, n });
    }
    if destination == dealer {
        return Err(TeleportError::DestinationIsDealer);
    }
    let take = n - n / 2;
    let mut set_a = alloc::vec![destination];
    set_a.extend((1..=n).filter(|&p| p != dealer && p != destination).take(take - 1));
    set_a.sort_unstable();
    let set_a = validate_set_a(resource, dealer, &set_a)?;
    let a_index = set_a.iter().position(|&p| p == destination).expect("destination kept");
    run_protocol(resource, dealer, secret, &set_a, DestinationKind::InA(a_index))
}

fn validate_set_a(
    resource: &AmeCandidate,
    dealer: usize,
    set_a: &[usize],
) -> Result<Vec<usize>, TeleportError> {
    let n = resource.state.n();
    if dealer == 0 || dealer > n {
        return Err(TeleportError::DealerOutOfRange { party: dealer, n });
    }
    let set = qstate::checked_subset(n, set_a).map_err(TeleportError::State)?;
    let expected = n - n / 2;
    if set.len() != expected {
        return Err(TeleportError::SetASize { expected, got: set.len() });
    }
    if set.contains(&dealer) {
        return Err(TeleportError::DealerInSetA);
    }
    if !ame::verify_ame(resource, &ame::VerifyOptions::default()).is_ame {
        return Err(TeleportError::ResourceNotAme);
    }
    Ok(set)
}

/// The unitary on the A factor mapping the sorted basis `|φ(k)⟩` to
/// `|k⟩ ⊗ |0…0⟩`, completed to a full basis when A is the larger side
/// (odd n). Returns the matrix and the Gram deviation of the φ family.
fn sort_unitary(
    resource: &QuditState,
    s_side: &[usize],
    a_side: &[usize],
) -> Result<(Vec<Complex64>, f64), TeleportError> {
    let d = resource.d();
    let m = s_side.len();
    let dim_m = d.pow(m as u32);
    let (group_idx, rest_idx, a_dim) = qstate::group_rest_indexing_pub(resource, s_side)?;
    debug_assert_eq!(a_dim, d.pow(a_side.len() as u32));
    let scale = (dim_m as f64).sqrt();
    let mut phi = alloc::vec![Complex64::ZERO; dim_m * a_dim];
    for (idx, &amp) in resource.amplitudes().iter().enumerate() {
        phi[group_idx[idx] * a_dim + rest_idx[idx]] = amp * scale;
    }
    let gram = linalg::gram_rows(dim_m, a_dim, &phi);
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
    if deviation > 1e-9 {
        return Err(TeleportError::BadSortedBasis(deviation));
    }

    // Orthonormal basis of the A factor: the φ rows first, completed by
    // Gram-Schmidt over the standard basis.
    let mut basis: Vec<Vec<Complex64>> = (0..dim_m)
        .map(|k| phi[k * a_dim..(k + 1) * a_dim].to_vec())
        .collect();
    let mut candidate = 0usize;
    while basis.len() < a_dim {
        let mut v = alloc::vec![Complex64::ZERO; a_dim];
        v[candidate] = Complex64::ONE;
        candidate += 1;
        for b in &basis {
            let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
        }
    }

    // Targets: |k⟩|0…0⟩ for the φ rows, then the remaining standard
    // indices in ascending order for the completion vectors.
    let extra = a_dim / dim_m;
    let mut targets: Vec<usize> = (0..dim_m).map(|k| k * extra).collect();
    targets.extend((0..a_dim).filter(|x| x % extra != 0));
    let mut v = alloc::vec![Complex64::ZERO; a_dim * a_dim];
    for (t, b) in basis.iter().enumerate() {
        let row = targets[t];
        for (j, x) in b.iter().enumerate() {
            v[row * a_dim + j] = x.conj();
        }
    }
    Ok((v, deviation))
}

fn run_protocol(
    resource: &AmeCandidate,
    dealer: usize,
    secret: &QuditState,
    set_a: &[usize],
    dest: DestinationKind,
) -> Result<TeleportRun, TeleportError> {
    let n = resource.state.n();
    let d = resource.state.d();
    if secret.n() != 1 || secret.d() != d {
        return Err(TeleportError::SecretShape { expected: d });
    }
    let small: Vec<usize> =
        (1..=n).filter(|&p| p != dealer && !set_a.contains(&p)).collect();

    // Sorting unitary for the (dealer, small side | A) split of the
    // resource; it does not depend on the measurement outcomes.
    let mut s_side = alloc::vec![dealer];
    s_side.extend_from_slice(&small);
    let (v, _gram) = sort_unitary(&resource.state, &s_side, set_a)?;

    // Dealer step: Bell-measure (secret, dealer qudit). The global state
    // has the secret as party 1 and resource party r at r + 1.
    let global = secret.tensor(&resource.state)?;
    let projector = PairProjector::new(&global, 1, dealer + 1)?;
    let mut dealer_branch_states = Vec::with_capacity(d * d);
    let mut dealer_probs = Vec::with_capacity(d * d);
    for q in 0..d {
        for p in 0..d {
            let (prob, post) = projector.project(&global, q, p)?;
            let post = post.ok_or(TeleportError::DegenerateBranch)?;
            dealer_branch_states.push(post);
            dealer_probs.push(prob);
        }
    }
    let total: f64 = dealer_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(TeleportError::State(StateError::ProbabilityLeak(total)));
    }

    // Remaining parties after the dealer measurement, ascending resource
    // labels; slot positions are 1-based indices into this list.
    let remaining: Vec<usize> = (1..=n).filter(|&p| p != dealer).collect();
    let a_slots: Vec<usize> = set_a
        .iter()
        .map(|p| remaining.iter().position(|x| x == p).expect("A inside remaining") + 1)
        .collect();

    let (destination, b_partner_slot) = match dest {
        DestinationKind::SmallSide(i) => (small[i], Some(a_slots[i + 1])),
        DestinationKind::InA(j) => (set_a[j], None),
    };

    let mut branches = Vec::new();
    let mut min_fidelity = f64::INFINITY;
    for (flat, dealer_state) in dealer_branch_states.iter().enumerate() {
        let (q1, p1) = (flat / d, flat % d);
        let sorted = apply_global_unitary(dealer_state, &a_slots, &v)?;
        match dest {
            DestinationKind::InA(j) => {
                // Park the secret slot on the destination qudit.
                let state = if j == 0 {
                    sorted
                } else {
                    let mut perm: Vec<usize> = (1..=sorted.n()).collect();
                    perm.swap(a_slots[0] - 1, a_slots[j] - 1);
                    sorted.permute_parties(&perm)?
                };
                let corrected = apply_pauli(&state, a_slots[j], d, q1, p1)?;
                let dest_state = corrected.extract_pure_substate(&[a_slots[j]])?;
                let f = fidelity(&dest_state, secret)?;
                min_fidelity = min_fidelity.min(f);
                branches.push(BranchResult {
                    dealer_outcome: (q1, p1),
                    a_outcome: None,
                    probability: dealer_probs[flat],
                    fidelity: f,
                });
            }
            DestinationKind::SmallSide(_) => {
                let partner = b_partner_slot.expect("small-side destination has a partner");
                let pair = PairProjector::new(&sorted, a_slots[0], partner)?;
                // Survivors of the second measurement, ascending labels.
                let a1_party = set_a[0];
                let partner_party = remaining[partner - 1];
                let survivors: Vec<usize> = remaining
                    .iter()
                    .copied()
                    .filter(|&p| p != a1_party && p != partner_party)
                    .collect();
                let dest_pos = survivors
                    .iter()
                    .position(|&p| p == destination)
                    .expect("destination survives")
                    + 1;
                let mut branch_total = 0.0f64;
                for q2 in 0..d {
                    for p2 in 0..d {
                        let (prob2, post) = pair.project(&sorted, q2, p2)?;
                        let post = post.ok_or(TeleportError::DegenerateBranch)?;
                        branch_total += prob2;
                        let corrected = apply_pauli(
                            &apply_pauli(&post, dest_pos, d, q2, p2)?,
                            dest_pos,
                            d,
                            q1,
                            p1,
                        )?;
                        let dest_state = corrected.extract_pure_substate(&[dest_pos])?;
                        let f = fidelity(&dest_state, secret)?;
                        min_fidelity = min_fidelity.min(f);
                        branches.push(BranchResult {
                            dealer_outcome: (q1, p1),
                            a_outcome: Some((q2, p2)),
                            probability: dealer_probs[flat] * prob2,
                            fidelity: f,
                        });
                    }
                }
                if (branch_total - 1.0).abs() > 1e-9 {
                    return Err(TeleportError::State(StateError::ProbabilityLeak(
                        branch_total,
                    )));
                }
            }
        }
    }

    let transcript = build_transcript(dealer, set_a, destination, &branches);
    Ok(TeleportRun {
        resource: resource.clone(),
        dealer,
        set_a: set_a.to_vec(),
        destination,
        branches,
        dealer_branch_states,
        transcript,
        min_fidelity,
    })
}

fn apply_pauli(
    state: &QuditState,
    party: usize,
    d: usize,
    q: usize,
    p: usize,
) -> Result<QuditState, TeleportError> {
    let u = ame::pauli(d, q, p)?;
    let lu = LocalUnitary::new(party, d, u.matrix().to_vec())?;
    Ok(apply_local_unitary(state, &lu)?)
}

fn build_transcript(
    dealer: usize,
    set_a: &[usize],
    destination: usize,
    branches: &[BranchResult],
) -> ProtocolTranscript {
    let canonical = branches
        .iter()
        .find(|b| b.dealer_outcome == (0, 0) && b.a_outcome.is_none_or(|o| o == (0, 0)))
        .expect("all-zero branch exists");
    let mut steps = alloc::vec![TranscriptStep {
        actor: alloc::format!("dealer (party {dealer})"),
        action: String::from("Bell measurement on the input qudit and her resource qudit"),
        outcome: Some(canonical.dealer_outcome),
    }];
    steps.push(TranscriptStep {
        actor: alloc::format!("set A {set_a:?}"),
        action: String::from("joint sorting unitary"),
        outcome: None,
    });
    if let Some(o) = canonical.a_outcome {
        steps.push(TranscriptStep {
            actor: alloc::format!("set A {set_a:?}"),
            action: alloc::format!(
                "Bell measurement pairing the secret slot with party {destination}'s partner"
            ),
            outcome: Some(o),
        });
    }
    steps.push(TranscriptStep {
        actor: alloc::format!("destination (party {destination})"),
        action: String::from("Pauli corrections from the broadcast outcomes"),
        outcome: None,
    });
    ProtocolTranscript { steps, final_fidelity: canonical.fidelity }
}
