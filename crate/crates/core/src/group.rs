//! The affine group `G = V x| H`.

use crate::cone::{ConeModel, HElement};
use crate::mat::Mat;
use crate::scalar::{lit, Real};

/// `(h, x)` acting by `y -> h y + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint<T> {
    pub h: HElement<T>,
    pub x: Vec<T>,
}

/// Element of the Lie algebra: a chart direction in `H` and a translation.
#[derive(Debug, Clone, PartialEq)]
pub struct LieDirection<T> {
    pub h_dir: Vec<T>,
    pub x_dir: Vec<T>,
}

impl<T: Real> GroupPoint<T> {
    pub fn new(h: HElement<T>, x: Vec<T>) -> Self {
        GroupPoint { h, x }
    }

    pub fn identity(cone: &ConeModel<T>) -> Self {
        GroupPoint { h: cone.h_identity(), x: vec![T::zero(); cone.dim()] }
    }

    pub fn dilation(h: HElement<T>, cone: &ConeModel<T>) -> Self {
        GroupPoint { h, x: vec![T::zero(); cone.dim()] }
    }

    /// `(h, x)(h1, x1) = (h h1, h x1 + x)`.
    pub fn product(&self, cone: &ConeModel<T>, other: &Self) -> Self {
        let hx = cone.act(&self.h, &other.x);
        GroupPoint {
            h: cone.compose(&self.h, &other.h),
            x: hx.iter().zip(&self.x).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// `(h, x)^{-1} = (h^{-1}, -h^{-1} x)`.
    pub fn inverse(&self, cone: &ConeModel<T>) -> Self {
        let hi = cone.h_inverse(&self.h);
        let x = cone.act(&hi, &self.x).into_iter().map(|v| -v).collect();
        GroupPoint { h: hi, x }
    }

    /// Action on the ambient space.
    pub fn apply(&self, cone: &ConeModel<T>, y: &[T]) -> Vec<T> {
        cone.act(&self.h, y).iter().zip(&self.x).map(|(&a, &b)| a + b).collect()
    }

    /// One-parameter subgroup `exp(t X)`.
    pub fn exp(cone: &ConeModel<T>, dir: &LieDirection<T>, t: T) -> Self {
        let h = cone.h_exp(&dir.h_dir, t);
        // x(t) = sum_k t^(k+1) H^k xi / (k+1)!
        let m: Mat<T> = cone.lie_matrix(&dir.h_dir);
        let mut term: Vec<T> = dir.x_dir.iter().map(|&v| v * t).collect();
        let mut x = term.clone();
        for k in 1..60 {
            term = m.mul_vec(&term).into_iter().map(|v| v * t / lit(k as f64 + 1.0)).collect();
            let small = term.iter().all(|v| v.abs() <= T::epsilon() * lit(1e-3));
            for (a, b) in x.iter_mut().zip(&term) {
                *a = *a + *b;
            }
            if small {
                break;
            }
        }
        GroupPoint { h, x }
    }
}
