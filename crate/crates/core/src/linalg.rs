//! Small dense complex-matrix helpers shared by the state modules.
//!
//! Matrices are row-major `Vec<Complex64>` slices. Eigenvalues of
//! Hermitian matrices are delegated to nalgebra's symmetric solver; the
//! Gram products that feed it are hand-rolled so the inner loops stay
//! contiguous (they dominate the large bipartition scans).

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix, unsorted.
pub(crate) fn hermitian_eigenvalues(dim: usize, data: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(data.len(), dim * dim);
    let m = DMatrix::from_row_slice(dim, dim, data);
    m.symmetric_eigenvalues().iter().copied().collect()
}

/// `G = M M†` for a row-major `rows x cols` matrix, exploiting hermiticity.
pub(crate) fn gram_rows(rows: usize, cols: usize, m: &[Complex64]) -> Vec<Complex64> {
    let mut g = alloc::vec![Complex64::ZERO; rows * rows];
    for i in 0..rows {
        let ri = &m[i * cols..(i + 1) * cols];
        for j in i..rows {
            let rj = &m[j * cols..(j + 1) * cols];
            let mut acc = Complex64::ZERO;
            for k in 0..cols {
                acc += ri[k] * rj[k].conj();
            }
            g[i * rows + j] = acc;
            g[j * rows + i] = acc.conj();
        }
    }
    g
}

/// `G = M† M` for a row-major `rows x cols` matrix.
pub(crate) fn gram_cols(rows: usize, cols: usize, m: &[Complex64]) -> Vec<Complex64> {
    let mut g = alloc::vec![Complex64::ZERO; cols * cols];
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for i in 0..cols {
            let c = row[i].conj();
            if c == Complex64::ZERO {
                continue;
            }
            for j in 0..cols {
                g[i * cols + j] += c * row[j];
            }
        }
    }
    g
}

/// Product of two square row-major matrices.
pub(crate) fn mat_mul(dim: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = alloc::vec![Complex64::ZERO; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == Complex64::ZERO {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

/// Conjugate transpose of a square row-major matrix.
pub(crate) fn mat_adjoint(dim: usize, m: &[Complex64]) -> Vec<Complex64> {
    let mut out = alloc::vec![Complex64::ZERO; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[j * dim + i] = m[i * dim + j].conj();
        }
    }
    out
}

/// Largest entry of `U U† - I` in absolute value.
pub(crate) fn unitarity_deviation(dim: usize, u: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            let mut acc = Complex64::ZERO;
            for k in 0..dim {
                acc += u[i * dim + k] * u[j * dim + k].conj();
            }
            if i == j {
                acc -= Complex64::ONE;
            }
            let dev = acc.norm();
            if dev > worst {
                worst = dev;
            }
        }
    }
    worst
}

/// Largest entry of `A - B` in absolute value.
#[cfg(test)]
pub(crate) fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Identity matrix.
pub(crate) fn identity(dim: usize) -> Vec<Complex64> {
    let mut m = alloc::vec![Complex64::ZERO; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = Complex64::ONE;
    }
    m
}

/// Kronecker product of two square matrices; the first factor is the
/// most significant block.
pub(crate) fn kron(a_dim: usize, a: &[Complex64], b_dim: usize, b: &[Complex64]) -> Vec<Complex64> {
    let dim = a_dim * b_dim;
    let mut out = alloc::vec![Complex64::ZERO; dim * dim];
    for ai in 0..a_dim {
        for aj in 0..a_dim {
            let f = a[ai * a_dim + aj];
            if f == Complex64::ZERO {
                continue;
            }
            for bi in 0..b_dim {
                for bj in 0..b_dim {
                    out[(ai * b_dim + bi) * dim + (aj * b_dim + bj)] = f * b[bi * b_dim + bj];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_products_agree() {
        // For a square matrix, tr(M M†) = tr(M† M).
        let m: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64 * 0.3 - 1.0, (i as f64).sin()))
            .collect();
        let a = gram_rows(3, 3, &m);
        let b = gram_cols(3, 3, &m);
        let tra: Complex64 = (0..3).map(|i| a[i * 3 + i]).sum();
        let trb: Complex64 = (0..3).map(|i| b[i * 3 + i]).sum();
        assert!((tra - trb).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let mut m = alloc::vec![Complex64::ZERO; 4];
        m[0] = Complex64::new(0.25, 0.0);
        m[3] = Complex64::new(0.75, 0.0);
        let mut ev = hermitian_eigenvalues(2, &m);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 0.25).abs() < 1e-14);
        assert!((ev[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn unitarity_detects_scaling()
    {
        let id = alloc::vec![
            Complex64::ONE,
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::new(1.1, 0.0),
        ];
        assert!(unitarity_deviation(2, &id) > 0.1);
    }
}
