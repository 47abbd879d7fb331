//! Symmetric banded matrices and an `LDLᵀ` factorization with inertia count.
//!
//! No pivoting is done; the KKT systems assembled by the interior-point
//! solver are regularised until the inertia is correct, which keeps the
//! factorization stable in the orderings used here.

use crate::scalar::Scalar;

/// Lower band of a symmetric matrix, row-major.
#[derive(Debug, Clone)]
pub struct BandMatrix<T: Scalar> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![T::zero(); n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw, "({i},{j}) outside band {}", self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    /// Adds `val` at `(i, j)` and, implicitly, at `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, val: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += val;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return T::zero();
        }
        self.data[self.idx(i, j)]
    }

    /// `y = A x` using both triangles.
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let mut acc = T::zero();
            for j in lo..i {
                let a = row[j + self.bw - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc + row[self.bw] * x[i];
        }
    }
}

/// Eigenvalue sign counts of a factorised symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

/// `A = L D Lᵀ` with unit lower `L` stored below the diagonal and `D` on it.
#[derive(Debug, Clone)]
pub struct BandLdl<T: Scalar> {
    f: BandMatrix<T>,
}

impl<T: Scalar> BandLdl<T> {
    /// Factorizes `a`. Pivots with magnitude at most `zero_tol` are counted
    /// as zero eigenvalues and replaced by `zero_tol` to keep going.
    pub fn factor(a: &BandMatrix<T>, zero_tol: T) -> (Self, Inertia) {
        let mut f = a.clone();
        let (n, bw) = (f.n, f.bw);
        let w = bw + 1;
        let mut inertia = Inertia { pos: 0, neg: 0, zero: 0 };
        let mut tmp = vec![T::zero(); w];
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            // tmp[k - lo_i] = L[i][k] * D[k] for k < current column.
            for j in lo_i..=i {
                let lo_j = j.saturating_sub(bw);
                let rj = j * w + bw - j;
                let mut s = f.data[ri + j];
                for k in lo_i.max(lo_j)..j {
                    s -= tmp[k - lo_i] * f.data[rj + k];
                }
                if j < i {
                    let d = f.data[rj + j];
                    tmp[j - lo_i] = s;
                    f.data[ri + j] = s / d;
                } else {
                    let d = if s.abs() <= zero_tol {
                        inertia.zero += 1;
                        if s < T::zero() { -zero_tol } else { zero_tol }
                    } else {
                        if s > T::zero() {
                            inertia.pos += 1;
                        } else {
                            inertia.neg += 1;
                        }
                        s
                    };
                    f.data[ri + i] = d;
                }
            }
        }
        (Self { f }, inertia)
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let (n, bw) = (self.f.n, self.f.bw);
        let w = bw + 1;
        let d = &self.f.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let r = i * w + bw - i;
            let mut s = b[i];
            for k in lo..i {
                s -= d[r + k] * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= d[i * w + bw];
        }
        for i in (0..n).rev() {
            let r = i * w + bw - i;
            let lo = i.saturating_sub(bw);
            let bi = b[i];
            for k in lo..i {
                b[k] -= d[r + k] * bi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kkt(n: usize, m_every: usize, bw: usize, rng: &mut ChaCha8Rng) -> BandMatrix<f64> {
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            let is_row = i % m_every == m_every - 1;
            let diag = if is_row { -1e-3 } else { 2.0 + rng.gen::<f64>() };
            a.add(i, i, diag);
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.gen_range(-0.3..0.3));
            }
        }
        a
    }

    #[test]
    fn solves_and_counts_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, bw) = (60, 5);
        let a = random_kkt(n, 4, bw, &mut rng);
        let (ldl, inertia) = BandLdl::factor(&a, 1e-14);
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let eig = dense.clone().symmetric_eigen().eigenvalues;
        let pos = eig.iter().filter(|e| **e > 0.0).count();
        assert_eq!(inertia.pos, pos);
        assert_eq!(inertia.neg, n - pos);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        ldl.solve(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert_relative_eq!(*x, *y, epsilon = 1e-9);
        }
    }

    #[test]
    fn mul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_kkt(20, 3, 4, &mut rng);
        let dense = DMatrix::from_fn(20, 20, |i, j| a.get(i, j));
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 7.0).collect();
        let mut y = vec![0.0; 20];
        a.mul_vec(&x, &mut y);
        let yd = &dense * nalgebra::DVector::from_vec(x);
        for i in 0..20 {
            assert_relative_eq!(y[i], yd[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn f32_factorization() {
        let mut a = BandMatrix::<f32>::zeros(3, 1);
        a.add(0, 0, 4.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 3.0);
        a.add(2, 1, 1.0);
        a.add(2, 2, -2.0);
        let (ldl, inertia) = BandLdl::factor(&a, 1e-7);
        assert_eq!((inertia.pos, inertia.neg), (2, 1));
        let mut b = [5.0_f32, 5.0, -1.0];
        ldl.solve(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-5 && (b[1] - 1.0).abs() < 1e-5 && (b[2] - 1.0).abs() < 1e-5);
    }
}
