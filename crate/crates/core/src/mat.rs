//! Small dense square matrices (dimension at most 3).

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = T::one();
        }
        m
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i * d.len() + i] = v;
        }
        m
    }

    /// Matrix whose columns are `f(e_i)`.
    pub fn from_linear_map(n: usize, f: impl Fn(&[T]) -> Vec<T>) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = f(&e);
            for i in 0..n {
                m.a[i * n + j] = col[i];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |s, j| s + self.get(i, j) * v[j]))
            .collect()
    }

    pub fn mul(&self, o: &Mat<T>) -> Mat<T> {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = (0..n).fold(T::zero(), |s, k| s + self.get(i, k) * o.get(k, j));
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat<T> {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[j * n + i] = self.get(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat { n: self.n, a: self.a.iter().map(|&v| v * s).collect() }
    }

    pub fn det(&self) -> T {
        let g = |i, j| self.get(i, j);
        match self.n {
            0 => T::one(),
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            3 => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
            _ => unimplemented!("dimension > 3"),
        }
    }

    pub fn inverse(&self) -> Option<Mat<T>> {
        let n = self.n;
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let g = |i, j| self.get(i, j);
        let mut m = Self::zeros(n);
        match n {
            1 => m.a[0] = T::one() / d,
            2 => {
                m.a = vec![g(1, 1) / d, -g(0, 1) / d, -g(1, 0) / d, g(0, 0) / d];
            }
            3 => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = match j {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let (c0, c1) = match i {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let minor = g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0);
                        let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
                        m.a[i * 3 + j] = sign * minor / d;
                    }
                }
            }
            _ => return None,
        }
        Some(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3() {
        let m: Mat<f64> = Mat { n: 3, a: vec![2.0, 1.0, 0.5, 0.0, 3.0, 1.0, 1.0, -1.0, 4.0] };
        let p = m.mul(&m.inverse().unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p.get(i, j) - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn det_transpose() {
        let m: Mat<f64> = Mat { n: 2, a: vec![1.0, 2.0, 3.0, 5.0] };
        assert_eq!(m.det(), -1.0);
        assert_eq!(m.transpose().get(0, 1), 3.0);
    }
}
