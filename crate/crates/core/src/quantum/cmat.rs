//! Dense complex matrices sized for few-qubit work.
//!
//! Everything here is O(dim³) or better with dim ≤ 64, so plain row-major
//! `Vec<Complex64>` storage and textbook loops are the whole story.

use num_complex::Complex64;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<C>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Outer product |ψ⟩⟨ψ| of a (not necessarily normalized) vector.
    pub fn outer(psi: &[C]) -> Self {
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMat {
        let mut out = self.clone();
        for o in &mut out.data {
            *o *= s;
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Kronecker product; the right factor varies fastest, matching the
    /// computational-basis ordering |i⟩⊗|j⟩ ↦ i·dim_b + j.
    pub fn kron(&self, other: &CMat) -> CMat {
        let (na, nb) = (self.dim, other.dim);
        let n = na * nb;
        let mut out = CMat::zeros(n);
        for ia in 0..na {
            for ja in 0..na {
                let a = self[(ia, ja)];
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for ib in 0..nb {
                    for jb in 0..nb {
                        out[(ia * nb + ib, ja * nb + jb)] = a * other[(ib, jb)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues (ascending) and the unitary whose
    /// columns are the matching eigenvectors.
    ///
    /// Panics if the matrix is not Hermitian to 1e-8; callers validate first.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMat) {
        assert!(self.is_hermitian(1e-8), "hermitian_eigen requires a Hermitian matrix");
        let n = self.dim;
        let mut a = self.clone();
        let mut v = CMat::identity(n);
        let scale: f64 = self.data.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
        for _sweep in 0..200 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r <= 1e-300 {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * r);
                    // Smaller-magnitude root of t² − 2τt − 1 = 0, which makes
                    // (1 − t²)·r + t·(aqq − app) = 0 below.
                    let t = if tau >= 0.0 {
                        -1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let cth = 1.0 / (1.0 + t * t).sqrt();
                    let sth = t * cth;
                    // J acts on columns (p, q):
                    //   col_p ← cth·col_p + s·col_q,  col_q ← −s̄·col_p + cth·col_q
                    // with s = sth·conj(phase) chosen so (J† A J)[p][q] = 0.
                    let s = phase.conj() * sth;
                    rotate_columns(&mut a, p, q, cth, s);
                    rotate_rows(&mut a, p, q, cth, s);
                    rotate_columns(&mut v, p, q, cth, s);
                }
            }
        }
        let mut eigs: Vec<(f64, usize)> =
            (0..n).map(|i| (a[(i, i)].re, i)).collect();
        eigs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let values: Vec<f64> = eigs.iter().map(|&(val, _)| val).collect();
        let mut vectors = CMat::zeros(n);
        for (new_col, &(_, old_col)) in eigs.iter().enumerate() {
            for row in 0..n {
                vectors[(row, new_col)] = v[(row, old_col)];
            }
        }
        (values, vectors)
    }

    /// Positive-semidefinite square root via the eigendecomposition, with
    /// negative eigenvalues (float noise) floored at zero.
    pub fn psd_sqrt(&self) -> CMat {
        let (vals, vecs) = self.hermitian_eigen();
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for k in 0..n {
            let lam = vals[k].max(0.0).sqrt();
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += lam * vecs[(i, k)] * vecs[(j, k)].conj();
                }
            }
        }
        out
    }
}

fn rotate_columns(m: &mut CMat, p: usize, q: usize, cth: f64, s: C) {
    let n = m.dim();
    for i in 0..n {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = mp * cth + mq * s;
        m[(i, q)] = -mp * s.conj() + mq * cth;
    }
}

fn rotate_rows(m: &mut CMat, p: usize, q: usize, cth: f64, s: C) {
    let n = m.dim();
    for j in 0..n {
        let mp = m[(p, j)];
        let mq = m[(q, j)];
        m[(p, j)] = mp * cth + mq * s.conj();
        m[(q, j)] = -mp * s + mq * cth;
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.dim + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        CMat::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]])
    }

    fn pauli_y() -> CMat {
        CMat::from_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]])
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = CMat::identity(2);
        assert_eq!(i2.kron(&i2), CMat::identity(4));
    }

    #[test]
    fn pauli_eigenvalues_are_plus_minus_one() {
        for m in [pauli_x(), pauli_y()] {
            let (vals, vecs) = m.hermitian_eigen();
            assert!((vals[0] + 1.0).abs() < 1e-12);
            assert!((vals[1] - 1.0).abs() < 1e-12);
            // Reconstruct V Λ V†.
            let mut rec = CMat::zeros(2);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        rec[(i, j)] += vals[k] * vecs[(i, k)] * vecs[(j, k)].conj();
                    }
                }
            }
            assert!(rec.max_abs_diff(&m) < 1e-12);
        }
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        // Deterministic pseudo-random Hermitian via a simple LCG.
        let mut state = 0x12345678u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for dim in [2usize, 3, 5, 8] {
            let mut m = CMat::zeros(dim);
            for i in 0..dim {
                m[(i, i)] = c(next(), 0.0);
                for j in i + 1..dim {
                    let v = c(next(), next());
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
            let (vals, vecs) = m.hermitian_eigen();
            let mut rec = CMat::zeros(dim);
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        rec[(i, j)] += vals[k] * vecs[(i, k)] * vecs[(j, k)].conj();
                    }
                }
            }
            assert!(rec.max_abs_diff(&m) < 1e-10, "dim {dim}");
            // Unitarity of the eigenvector matrix.
            let vtv = vecs.adjoint().mul(&vecs);
            assert!(vtv.max_abs_diff(&CMat::identity(dim)) < 1e-10);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        // A = B†B is PSD for any B.
        let b = CMat::from_rows(&[
            &[c(0.3, 0.1), c(-0.2, 0.4)],
            &[c(0.0, -0.5), c(0.7, 0.2)],
        ]);
        let a = b.adjoint().mul(&b);
        let root = a.psd_sqrt();
        assert!(root.mul(&root).max_abs_diff(&a) < 1e-12);
        assert!(root.is_hermitian(1e-12));
    }
}
