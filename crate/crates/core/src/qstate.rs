//! Dense qudit state vectors and density matrices: tensor algebra,
//! partial trace, entropies, fidelities, local/global unitaries, and
//! projective measurements.
//!
//! Parties are 1-based and party 1 is the most significant base-`d`
//! digit, so `|k_1 … k_n⟩` lives at flat index `k_1 d^(n-1) + … + k_n`.
//! States are immutable values and every operation is a pure function.

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // float intrinsics under no_std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg;

/// Tolerance for algebraic identities (norms, unitarity, hermiticity).
pub const ALGEBRA_TOL: f64 = 1e-10;
/// Tolerance for entropy comparisons (eigen-solver noise).
pub const ENTROPY_TOL: f64 = 1e-9;
/// Eigenvalues below this cutoff are treated as zero inside entropies.
pub const EIGENVALUE_CUTOFF: f64 = 1e-12;
/// Branches with probability below this are dropped from measurements.
pub const PROBABILITY_CUTOFF: f64 = 1e-12;
/// Desk-scale cap on dense state size (the 7-party, d=7 state fits).
pub const MAX_AMPLITUDES: usize = 2_097_152;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("state norm {0} too far from 1")]
    NotNormalized(f64),
    #[error("cannot normalize a (near-)zero vector")]
    ZeroVector,
    #[error("digit {digit} out of range for local dimension {d}")]
    DigitOutOfRange { digit: usize, d: usize },
    #[error("local dimension must be at least 2")]
    InvalidLocalDimension,
    #[error("party count must be at least 1")]
    NoParties,
    #[error("state of {0} amplitudes exceeds the desk-scale cap")]
    TooLarge(usize),
    #[error("party {party} out of range 1..={n}")]
    PartyOutOfRange { party: usize, n: usize },
    #[error("party subset must not be empty")]
    EmptySubset,
    #[error("subset must be a proper subset of the parties")]
    SubsetNotProper,
    #[error("duplicate party indices")]
    DuplicateParties,
    #[error("party subsets overlap")]
    OverlappingSubsets,
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix trace {0} too far from 1")]
    BadTrace(f64),
    #[error("matrix has eigenvalue {0:.3e} below the PSD tolerance")]
    NotPositive(f64),
    #[error("projector basis is not orthonormal and complete (deviation {0:.3e})")]
    IncompleteBasis(f64),
    #[error("measurement probabilities sum to {0}, expected 1")]
    ProbabilityLeak(f64),
    #[error("mutual information {0:.3e} below numerical tolerance")]
    NegativeMutualInformation(f64),
    #[error("state is not a product across the requested cut (residual {0:.3e})")]
    NotProduct(f64),
    #[error("invalid party permutation")]
    BadPermutation,
}

/// `d^n` with the desk-scale cap enforced.
pub fn dense_dim(n: usize, d: usize) -> Result<usize, StateError> {
    if d < 2 {
        return Err(StateError::InvalidLocalDimension);
    }
    if n == 0 {
        return Err(StateError::NoParties);
    }
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(d).ok_or(StateError::TooLarge(usize::MAX))?;
        if dim > MAX_AMPLITUDES {
            return Err(StateError::TooLarge(dim));
        }
    }
    Ok(dim)
}

/// A normalized pure state of `n` qudits of local dimension `d`.
#[derive(Debug, Clone)]
pub struct QuditState {
    n: usize,
    d: usize,
    amps: Vec<Complex64>,
}

impl QuditState {
    /// Wraps an amplitude vector that is already normalized to 1e-10.
    pub fn from_amplitudes(n: usize, d: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        let dim = dense_dim(n, d)?;
        if amps.len() != dim {
            return Err(StateError::DimensionMismatch);
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > ALGEBRA_TOL {
            return Err(StateError::NotNormalized(norm_sq.sqrt()));
        }
        Ok(QuditState { n, d, amps })
    }

    /// Normalizes an arbitrary nonzero amplitude vector.
    pub fn from_unnormalized(n: usize, d: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        let dim = dense_dim(n, d)?;
        if amps.len() != dim {
            return Err(StateError::DimensionMismatch);
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(StateError::ZeroVector);
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(QuditState { n, d, amps })
    }

    /// The computational basis state `|digits⟩`.
    pub fn basis_state(n: usize, d: usize, digits: &[usize]) -> Result<Self, StateError> {
        let dim = dense_dim(n, d)?;
        if digits.len() != n {
            return Err(StateError::DimensionMismatch);
        }
        let mut idx = 0usize;
        for &g in digits {
            if g >= d {
                return Err(StateError::DigitOutOfRange { digit: g, d });
            }
            idx = idx * d + g;
        }
        let mut amps = alloc::vec![Complex64::ZERO; dim];
        amps[idx] = Complex64::ONE;
        Ok(QuditState { n, d, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, idx: usize) -> Complex64 {
        self.amps[idx]
    }

    /// Stride of a 1-based party in the flat index.
    fn stride(&self, party: usize) -> usize {
        self.d.pow((self.n - party) as u32)
    }

    fn check_party(&self, party: usize) -> Result<(), StateError> {
        if party == 0 || party > self.n {
            return Err(StateError::PartyOutOfRange { party, n: self.n });
        }
        Ok(())
    }

    /// Product state `self ⊗ other` (other's parties appended).
    pub fn tensor(&self, other: &QuditState) -> Result<QuditState, StateError> {
        if self.d != other.d {
            return Err(StateError::DimensionMismatch);
        }
        let dim = dense_dim(self.n + other.n, self.d)?;
        let mut amps = Vec::with_capacity(dim);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(QuditState { n: self.n + other.n, d: self.d, amps })
    }

    pub fn inner(&self, other: &QuditState) -> Result<Complex64, StateError> {
        if self.n != other.n || self.d != other.d {
            return Err(StateError::DimensionMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Relabels parties: new party `t` carries what old party `perm[t-1]`
    /// carried. `perm` must be a permutation of `1..=n`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<QuditState, StateError> {
        if perm.len() != self.n {
            return Err(StateError::BadPermutation);
        }
        let mut seen = alloc::vec![false; self.n];
        for &p in perm {
            if p == 0 || p > self.n || seen[p - 1] {
                return Err(StateError::BadPermutation);
            }
            seen[p - 1] = true;
        }
        let mut amps = alloc::vec![Complex64::ZERO; self.amps.len()];
        let mut digits = alloc::vec![0usize; self.n];
        for (idx, &a) in self.amps.iter().enumerate() {
            let mut rest = idx;
            for t in (0..self.n).rev() {
                digits[t] = rest % self.d;
                rest /= self.d;
            }
            let mut new_idx = 0usize;
            for t in 0..self.n {
                new_idx = new_idx * self.d + digits[perm[t] - 1];
            }
            amps[new_idx] = a;
        }
        Ok(QuditState { n: self.n, d: self.d, amps })
    }

    /// Reshapes the amplitudes into a `(d^|keep|) x (d^(n-|keep|))` matrix:
    /// rows are indexed by the kept parties (ascending order, first kept
    /// party most significant), columns by the rest.
    pub(crate) fn split_matrix(&self, keep: &[usize]) -> (usize, usize, Vec<Complex64>) {
        let k = keep.len();
        let rows = self.d.pow(k as u32);
        let cols = self.amps.len() / rows;
        let mut kept_mask = alloc::vec![false; self.n + 1];
        for &p in keep {
            kept_mask[p] = true;
        }
        // Per-party multiplier for the row/column index of each digit.
        let mut row_mul = alloc::vec![0usize; self.n + 1];
        let mut col_mul = alloc::vec![0usize; self.n + 1];
        let mut r = rows;
        let mut c = cols;
        for p in 1..=self.n {
            if kept_mask[p] {
                r /= self.d;
                row_mul[p] = r;
            } else {
                c /= self.d;
                col_mul[p] = c;
            }
        }
        let mut m = alloc::vec![Complex64::ZERO; self.amps.len()];
        let d = self.d;
        for (idx, &a) in self.amps.iter().enumerate() {
            let mut rest = idx;
            let mut ri = 0usize;
            let mut ci = 0usize;
            for p in (1..=self.n).rev() {
                let g = rest % d;
                rest /= d;
                ri += g * row_mul[p];
                ci += g * col_mul[p];
            }
            m[ri * cols + ci] = a;
        }
        (rows, cols, m)
    }

    /// Extracts the pure state carried by `parties` when the global state
    /// factorizes across that cut; errors if it does not.
    pub fn extract_pure_substate(&self, parties: &[usize]) -> Result<QuditState, StateError> {
        let sub = checked_subset(self.n, parties)?;
        if sub.len() == self.n {
            return Ok(self.clone());
        }
        let (rows, cols, m) = self.split_matrix(&sub);
        // Best column as the representative of the (expected rank-1) range.
        let mut best = 0usize;
        let mut best_norm = -1.0f64;
        for c in 0..cols {
            let norm: f64 = (0..rows).map(|r| m[r * cols + c].norm_sqr()).sum();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        if best_norm < 1e-12 {
            return Err(StateError::ZeroVector);
        }
        let scale = best_norm.sqrt();
        let u: Vec<Complex64> = (0..rows).map(|r| m[r * cols + best] / scale).collect();
        // Rank-1 residual: |M|^2 - |u† M|^2 vanishes iff M = u v†.
        let total: f64 = m.iter().map(|a| a.norm_sqr()).sum();
        let mut captured = 0.0f64;
        for c in 0..cols {
            let mut acc = Complex64::ZERO;
            for r in 0..rows {
                acc += u[r].conj() * m[r * cols + c];
            }
            captured += acc.norm_sqr();
        }
        let residual = (total - captured).abs();
        if residual > 1e-9 {
            return Err(StateError::NotProduct(residual));
        }
        QuditState::from_unnormalized(sub.len(), self.d, u)
    }
}

/// A bipartition of `n` parties given by one side of the cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    n: usize,
    subset_a: Vec<usize>,
}

impl Bipartition {
    pub fn new(n: usize, subset_a: &[usize]) -> Result<Self, StateError> {
        let subset_a = checked_subset(n, subset_a)?;
        if subset_a.len() == n {
            return Err(StateError::SubsetNotProper);
        }
        Ok(Bipartition { n, subset_a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn subset_a(&self) -> &[usize] {
        &self.subset_a
    }

    pub fn complement(&self) -> Vec<usize> {
        (1..=self.n).filter(|p| !self.subset_a.contains(p)).collect()
    }
}

/// Validates a party subset: nonempty, unique, in range. Returns it sorted.
pub(crate) fn checked_subset(n: usize, subset: &[usize]) -> Result<Vec<usize>, StateError> {
    if subset.is_empty() {
        return Err(StateError::EmptySubset);
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(StateError::DuplicateParties);
        }
    }
    for &p in &sorted {
        if p == 0 || p > n {
            return Err(StateError::PartyOutOfRange { party: p, n });
        }
    }
    Ok(sorted)
}

/// Reduced density matrix of a subset of parties, stored row-major.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace, and positivity.
    pub fn new(dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self, StateError> {
        let side: usize = dims.iter().product();
        if side == 0 || data.len() != side * side {
            return Err(StateError::DimensionMismatch);
        }
        let mut herm_dev = 0.0f64;
        for i in 0..side {
            for j in i..side {
                let dev = (data[i * side + j] - data[j * side + i].conj()).norm();
                herm_dev = herm_dev.max(dev);
            }
        }
        if herm_dev > ALGEBRA_TOL {
            return Err(StateError::NotHermitian(herm_dev));
        }
        let trace: Complex64 = (0..side).map(|i| data[i * side + i]).sum();
        if (trace.re - 1.0).abs() > ALGEBRA_TOL || trace.im.abs() > ALGEBRA_TOL {
            return Err(StateError::BadTrace(trace.re));
        }
        let dm = DensityMatrix { dims, data };
        let min = dm.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -ALGEBRA_TOL {
            return Err(StateError::NotPositive(min));
        }
        Ok(dm)
    }

    fn from_parts(dims: Vec<usize>, data: Vec<Complex64>) -> Self {
        DensityMatrix { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        let side = self.side();
        (0..side).map(|i| self.data[i * side + i]).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(self.side(), &self.data)
    }

    /// Largest element-wise deviation from `I / side` (the totally mixed
    /// state on this subsystem).
    pub fn deviation_from_maximally_mixed(&self) -> f64 {
        let side = self.side();
        let target = 1.0 / side as f64;
        let mut worst = 0.0f64;
        for i in 0..side {
            for j in 0..side {
                let mut v = self.data[i * side + j];
                if i == j {
                    v -= Complex64::new(target, 0.0);
                }
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

/// A unitary acting on a single party.
#[derive(Debug, Clone)]
pub struct LocalUnitary {
    target_party: usize,
    d: usize,
    matrix: Vec<Complex64>,
}

impl LocalUnitary {
    pub fn new(target_party: usize, d: usize, matrix: Vec<Complex64>) -> Result<Self, StateError> {
        if matrix.len() != d * d {
            return Err(StateError::DimensionMismatch);
        }
        let dev = linalg::unitarity_deviation(d, &matrix);
        if dev > ALGEBRA_TOL {
            return Err(StateError::NotUnitary(dev));
        }
        Ok(LocalUnitary { target_party, d, matrix })
    }

    pub fn target_party(&self) -> usize {
        self.target_party
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }
}

/// Partial trace onto the parties in `keep` (ascending order).
pub fn partial_trace(state: &QuditState, keep: &Bipartition) -> Result<DensityMatrix, StateError> {
    if keep.n() != state.n() {
        return Err(StateError::DimensionMismatch);
    }
    let (rows, cols, m) = state.split_matrix(keep.subset_a());
    let data = linalg::gram_rows(rows, cols, &m);
    Ok(DensityMatrix::from_parts(
        alloc::vec![state.d(); keep.subset_a().len()],
        data,
    ))
}

fn entropy_from_eigenvalues(eigenvalues: &[f64], base_dim: usize) -> Result<f64, StateError> {
    let ln_d = (base_dim as f64).ln();
    let mut s = 0.0f64;
    for &ev in eigenvalues {
        if ev < -ALGEBRA_TOL {
            return Err(StateError::NotPositive(ev));
        }
        if ev > EIGENVALUE_CUTOFF {
            s -= ev * ev.ln();
        }
    }
    Ok(s / ln_d)
}

/// Von Neumann entropy in dits (logarithm base `base_dim`).
pub fn von_neumann_entropy(rho: &DensityMatrix, base_dim: usize) -> Result<f64, StateError> {
    if base_dim < 2 {
        return Err(StateError::InvalidLocalDimension);
    }
    entropy_from_eigenvalues(&rho.eigenvalues(), base_dim)
}

/// Entropy of a party subset of a pure state, in dits. Internally reduces
/// over the smaller side of the cut (their spectra agree for pure states).
pub fn subset_entropy(state: &QuditState, subset: &[usize]) -> Result<f64, StateError> {
    let sub = checked_subset(state.n(), subset)?;
    if sub.len() == state.n() {
        return Ok(0.0);
    }
    let (rows, cols, m) = state.split_matrix(&sub);
    let gram = if rows <= cols {
        linalg::gram_rows(rows, cols, &m)
    } else {
        linalg::gram_cols(rows, cols, &m)
    };
    let side = rows.min(cols);
    entropy_from_eigenvalues(&linalg::hermitian_eigenvalues(side, &gram), state.d())
}

/// Mutual information `I(X:Y) = S(X) + S(Y) - S(X,Y)` in dits, for
/// disjoint party sets of a pure state. Clamped at zero.
pub fn mutual_information(
    state: &QuditState,
    set_x: &[usize],
    set_y: &[usize],
) -> Result<f64, StateError> {
    let x = checked_subset(state.n(), set_x)?;
    let y = checked_subset(state.n(), set_y)?;
    if x.iter().any(|p| y.contains(p)) {
        return Err(StateError::OverlappingSubsets);
    }
    let mut xy = x.clone();
    xy.extend_from_slice(&y);
    xy.sort_unstable();
    let mi = subset_entropy(state, &x)? + subset_entropy(state, &y)?
        - subset_entropy(state, &xy)?;
    if mi < -ENTROPY_TOL {
        return Err(StateError::NegativeMutualInformation(mi));
    }
    Ok(mi.max(0.0))
}

/// Applies a single-party unitary.
pub fn apply_local_unitary(
    state: &QuditState,
    u: &LocalUnitary,
) -> Result<QuditState, StateError> {
    state.check_party(u.target_party)?;
    if u.d != state.d() {
        return Err(StateError::DimensionMismatch);
    }
    let d = state.d();
    let stride = state.stride(u.target_party);
    let dim = state.dim();
    let mut out = alloc::vec![Complex64::ZERO; dim];
    let block = stride * d;
    for base in (0..dim).step_by(block) {
        for inner in 0..stride {
            let start = base + inner;
            for j in 0..d {
                let mut acc = Complex64::ZERO;
                for jp in 0..d {
                    acc += u.matrix[j * d + jp] * state.amps[start + jp * stride];
                }
                out[start + j * stride] = acc;
            }
        }
    }
    QuditState::from_amplitudes(state.n(), d, out)
}

/// Applies a joint unitary to an ordered list of parties; the first listed
/// party is the most significant digit of the matrix index.
pub fn apply_global_unitary(
    state: &QuditState,
    parties: &[usize],
    matrix: &[Complex64],
) -> Result<QuditState, StateError> {
    if parties.is_empty() {
        return Err(StateError::EmptySubset);
    }
    let mut sorted = parties.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(StateError::DuplicateParties);
        }
    }
    for &p in parties {
        state.check_party(p)?;
    }
    let d = state.d();
    let group_dim = d.pow(parties.len() as u32);
    if matrix.len() != group_dim * group_dim {
        return Err(StateError::DimensionMismatch);
    }
    let dev = linalg::unitarity_deviation(group_dim, matrix);
    if dev > ALGEBRA_TOL {
        return Err(StateError::NotUnitary(dev));
    }
    let strides: Vec<usize> = parties.iter().map(|&p| state.stride(p)).collect();
    let dim = state.dim();

    // Enumerate base indices with all grouped digits zero, then transform
    // the gathered group vector.
    let mut out = alloc::vec![Complex64::ZERO; dim];
    let mut group_offsets = alloc::vec![0usize; group_dim];
    for (g, slot) in group_offsets.iter_mut().enumerate() {
        let mut rest = g;
        let mut off = 0usize;
        for t in (0..parties.len()).rev() {
            off += (rest % d) * strides[t];
            rest /= d;
        }
        *slot = off;
    }
    let mut in_group = alloc::vec![false; dim];
    for &p in parties {
        let stride = state.stride(p);
        for (idx, flag) in in_group.iter_mut().enumerate() {
            if !(idx / stride).is_multiple_of(d) {
                *flag = true;
            }
        }
    }
    let mut gathered = alloc::vec![Complex64::ZERO; group_dim];
    for base in 0..dim {
        if in_group[base] {
            continue;
        }
        for g in 0..group_dim {
            gathered[g] = state.amps[base + group_offsets[g]];
        }
        for (row, chunk) in matrix.chunks(group_dim).enumerate() {
            let mut acc = Complex64::ZERO;
            for g in 0..group_dim {
                acc += chunk[g] * gathered[g];
            }
            out[base + group_offsets[row]] = acc;
        }
    }
    QuditState::from_amplitudes(state.n(), d, out)
}

/// One branch of a projective measurement.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: QuditState,
}

/// Projective measurement of `parties` in the given orthonormal basis of
/// their joint factor. Enumerates every branch with probability above the
/// cutoff; post-states keep all parties, with the measured factor left in
/// the projected basis state.
pub fn projective_measure(
    state: &QuditState,
    parties: &[usize],
    basis: &[Vec<Complex64>],
) -> Result<Vec<MeasurementBranch>, StateError> {
    let d = state.d();
    let group_dim = d.pow(parties.len() as u32);
    if basis.len() != group_dim || basis.iter().any(|b| b.len() != group_dim) {
        return Err(StateError::IncompleteBasis(f64::NAN));
    }
    let mut worst = 0.0f64;
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for g in 0..group_dim {
                acc += bi[g].conj() * bj[g];
            }
            if i == j {
                acc -= Complex64::ONE;
            }
            worst = worst.max(acc.norm());
        }
    }
    if worst > ALGEBRA_TOL {
        return Err(StateError::IncompleteBasis(worst));
    }

    let (group_idx, rest_idx, rest_dim) = group_rest_indexing(state, parties)?;
    // M[g][r] view of the amplitudes.
    let mut m = alloc::vec![Complex64::ZERO; state.dim()];
    for idx in 0..state.dim() {
        m[group_idx[idx] * rest_dim + rest_idx[idx]] = state.amps[idx];
    }

    let mut branches = Vec::new();
    let mut total = 0.0f64;
    for (outcome, b) in basis.iter().enumerate() {
        let mut coeff = alloc::vec![Complex64::ZERO; rest_dim];
        for g in 0..group_dim {
            let bg = b[g].conj();
            if bg == Complex64::ZERO {
                continue;
            }
            for r in 0..rest_dim {
                coeff[r] += bg * m[g * rest_dim + r];
            }
        }
        let probability: f64 = coeff.iter().map(|c| c.norm_sqr()).sum();
        total += probability;
        if probability <= PROBABILITY_CUTOFF {
            continue;
        }
        let scale = probability.sqrt();
        let mut post = alloc::vec![Complex64::ZERO; state.dim()];
        for idx in 0..state.dim() {
            post[idx] = b[group_idx[idx]] * coeff[rest_idx[idx]] / scale;
        }
        branches.push(MeasurementBranch {
            outcome,
            probability,
            post_state: QuditState::from_amplitudes(state.n(), d, post)?,
        });
    }
    if (total - 1.0).abs() > ENTROPY_TOL {
        return Err(StateError::ProbabilityLeak(total));
    }
    Ok(branches)
}

/// Seeded-sampling wrapper around [`projective_measure`]: picks one branch
/// reproducibly from the supplied RNG.
pub fn measure_sampled<R: Rng + ?Sized>(
    state: &QuditState,
    parties: &[usize],
    basis: &[Vec<Complex64>],
    rng: &mut R,
) -> Result<MeasurementBranch, StateError> {
    let branches = projective_measure(state, parties, basis)?;
    let roll: f64 = rng.gen();
    let mut acc = 0.0f64;
    for branch in &branches {
        acc += branch.probability;
        if roll < acc {
            return Ok(branch.clone());
        }
    }
    Ok(branches.last().expect("at least one branch").clone())
}

/// Index decomposition used by measurements: for every flat index, the
/// packed digit index of `parties` (in the given order) and of the rest
/// (ascending).
pub(crate) fn group_rest_indexing_pub(
    state: &QuditState,
    parties: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, usize), StateError> {
    group_rest_indexing(state, parties)
}

fn group_rest_indexing(
    state: &QuditState,
    parties: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, usize), StateError> {
    let mut sorted = parties.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(StateError::DuplicateParties);
        }
    }
    if parties.is_empty() {
        return Err(StateError::EmptySubset);
    }
    for &p in parties {
        state.check_party(p)?;
    }
    let d = state.d();
    let n = state.n();
    let group_dim = d.pow(parties.len() as u32);
    let rest_dim = state.dim() / group_dim;
    let mut group_mul = alloc::vec![0usize; n + 1];
    let mut in_group = alloc::vec![false; n + 1];
    let mut gmul = group_dim;
    for &p in parties {
        gmul /= d;
        group_mul[p] = gmul;
        in_group[p] = true;
    }
    let mut rest_mul = alloc::vec![0usize; n + 1];
    let mut rmul = rest_dim;
    for p in 1..=n {
        if !in_group[p] {
            rmul /= d;
            rest_mul[p] = rmul;
        }
    }
    let mut group_idx = alloc::vec![0usize; state.dim()];
    let mut rest_idx = alloc::vec![0usize; state.dim()];
    for idx in 0..state.dim() {
        let mut rest = idx;
        let mut gi = 0usize;
        let mut ri = 0usize;
        for p in (1..=n).rev() {
            let g = rest % d;
            rest /= d;
            if in_group[p] {
                gi += g * group_mul[p];
            } else {
                ri += g * rest_mul[p];
            }
        }
        group_idx[idx] = gi;
        rest_idx[idx] = ri;
    }
    Ok((group_idx, rest_idx, rest_dim))
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &QuditState, b: &QuditState) -> Result<f64, StateError> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `(1/2)‖r1 - r2‖₁` via the eigenvalues of the Hermitian difference.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64, StateError> {
    if r1.side() != r2.side() {
        return Err(StateError::DimensionMismatch);
    }
    let side = r1.side();
    let diff: Vec<Complex64> = r1.data.iter().zip(&r2.data).map(|(a, b)| a - b).collect();
    let evs = linalg::hermitian_eigenvalues(side, &diff);
    Ok(0.5 * evs.iter().map(|ev| ev.abs()).sum::<f64>())
}

/// A Haar-ish random pure state (normalized complex Gaussian vector).
pub fn random_state<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> QuditState {
    let dim = dense_dim(n, d).expect("desk-scale dimensions");
    let amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    QuditState::from_unnormalized(n, d, amps).expect("gaussian vector is nonzero")
}

/// A Haar-random `d x d` unitary (QR of a complex Gaussian matrix via
/// modified Gram-Schmidt), row-major.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for i in 0..d {
        let (done, rest) = cols.split_at_mut(i);
        let current = &mut rest[0];
        for prev in done.iter() {
            let proj: Complex64 =
                prev.iter().zip(current.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, p) in current.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let norm: f64 = current.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for x in current.iter_mut() {
            *x /= norm;
        }
    }
    let mut out = alloc::vec![Complex64::ZERO; d * d];
    for c in 0..d {
        for r in 0..d {
            out[r * d + c] = cols[c][r];
        }
    }
    out
}
