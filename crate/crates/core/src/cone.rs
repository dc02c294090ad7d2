//! Symmetric cone models: the positive orthant and 2x2 positive definite matrices.
//!
//! Points are stored in an orthonormal basis of the ambient space. For `spd2`
//! that basis is `(x11, sqrt(2) x12, x22)`, so the trace inner product is the
//! Euclidean one. [`ConeModel::to_storage`] converts to `[x11, x12, x22]`.
//!
//! The group `H` is parametrised by chart coordinates `theta`: `log` of the
//! diagonal for the orthant, `(log a, b, log c)` of the Cholesky factor
//! `[[a, 0], [b, c]]` for `spd2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::quadrature;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Orthant(usize),
    Spd2,
}

/// Element of `H` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HElement<T> {
    pub theta: Vec<T>,
}

impl<T: Real> HElement<T> {
    pub fn new(theta: Vec<T>) -> Self {
        HElement { theta }
    }
}

#[derive(Debug, Clone)]
pub struct ConeModel<T> {
    kind: ConeKind,
    phi_e: T,
}

fn sqrt2<T: Real>() -> T {
    T::SQRT_2()
}

/// Eigen-decomposition of the symmetric matrix `[[a, b], [b, c]]`:
/// eigenvalues `(l1 >= l2)` and the unit eigenvector `(cos, sin)` of `l1`.
pub(crate) fn sym2_eig<T: Real>(a: T, b: T, c: T) -> (T, T, T, T) {
    let half = lit::<T>(0.5);
    let m = (a + c) * half;
    let d = ((a - c) * half).hypot(b);
    let l1 = m + d;
    let l2 = m - d;
    let ang = half * (lit::<T>(2.0) * b).atan2(a - c);
    (l1, l2, ang.cos(), ang.sin())
}

/// Apply `f` spectrally to `[[a, b], [b, c]]`, returning `(a', b', c')`.
pub(crate) fn sym2_fn<T: Real>(a: T, b: T, c: T, f: impl Fn(T) -> T) -> (T, T, T) {
    let (l1, l2, co, si) = sym2_eig(a, b, c);
    let (f1, f2) = (f(l1), f(l2));
    (
        f1 * co * co + f2 * si * si,
        (f1 - f2) * co * si,
        f1 * si * si + f2 * co * co,
    )
}

/// `s x s` for symmetric `s`, `x`.
fn congruence<T: Real>(s: (T, T, T), x: (T, T, T)) -> (T, T, T) {
    let t = [[s.0 * x.0 + s.1 * x.1, s.0 * x.1 + s.1 * x.2], [s.1 * x.0 + s.2 * x.1, s.1 * x.1 + s.2 * x.2]];
    (
        t[0][0] * s.0 + t[0][1] * s.1,
        t[0][0] * s.1 + t[0][1] * s.2,
        t[1][0] * s.1 + t[1][1] * s.2,
    )
}

static SPD2_PHI_E: OnceLock<std::result::Result<f64, Error>> = OnceLock::new();

fn spd2_phi_e() -> Result<f64> {
    SPD2_PHI_E
        .get_or_init(|| {
            let t = 1e-12;
            let v = quadrature::integrate_to_infinity(
                |x11: f64| {
                    quadrature::integrate_to_infinity(
                        |x22: f64| {
                            let lim = (2.0 * x11 * x22).sqrt();
                            let e = (-x11 - x22).exp();
                            quadrature::integrate(|_u: f64| e, -lim, lim, t).unwrap_or(f64::NAN)
                        },
                        0.0,
                        t,
                    )
                    .unwrap_or(f64::NAN)
                },
                0.0,
                t,
            )?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Quadrature("characteristic function at e".into()))
            }
        })
        .clone()
}

impl<T: Real> ConeModel<T> {
    pub fn orthant(r: usize) -> Result<Self> {
        if !(1..=3).contains(&r) {
            return Err(Error::Config(format!("orthant rank must be 1..=3, got {r}")));
        }
        let tol = if std::mem::size_of::<T>() >= 8 { 1e-13 } else { 1e-6 };
        let one_d = quadrature::integrate_to_infinity(|y: T| (-y).exp(), T::zero(), lit(tol))?;
        Ok(ConeModel { kind: ConeKind::Orthant(r), phi_e: one_d.powi(r as i32) })
    }

    /// The value `phi(e)` is computed once by nested adaptive quadrature and cached.
    pub fn spd2() -> Result<Self> {
        Ok(ConeModel { kind: ConeKind::Spd2, phi_e: lit(spd2_phi_e()?) })
    }

    /// Parse `"orthant:r=<k>"` or `"spd2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "spd2" {
            return Self::spd2();
        }
        if let Some(rest) = s.strip_prefix("orthant:r=") {
            let r: usize = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad orthant rank in {s:?}")))?;
            return Self::orthant(r);
        }
        Err(Error::Config(format!("unknown cone {s:?}")))
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            ConeKind::Orthant(r) => format!("orthant:r={r}"),
            ConeKind::Spd2 => "spd2".into(),
        }
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        match self.kind {
            ConeKind::Orthant(r) => r,
            ConeKind::Spd2 => 3,
        }
    }

    /// Rank `r`.
    pub fn rank(&self) -> usize {
        match self.kind {
            ConeKind::Orthant(r) => r,
            ConeKind::Spd2 => 2,
        }
    }

    pub fn is_orthant(&self) -> bool {
        matches!(self.kind, ConeKind::Orthant(_))
    }

    pub fn phi_e(&self) -> T {
        self.phi_e
    }

    pub fn identity(&self) -> Vec<T> {
        match self.kind {
            ConeKind::Orthant(r) => vec![T::one(); r],
            ConeKind::Spd2 => vec![T::one(), T::zero(), T::one()],
        }
    }

    pub fn h_identity(&self) -> HElement<T> {
        HElement::new(vec![T::zero(); self.dim()])
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    fn entries(x: &[T]) -> (T, T, T) {
        (x[0], x[1] / sqrt2::<T>(), x[2])
    }

    fn from_entries(a: T, b: T, c: T) -> Vec<T> {
        vec![a, b * sqrt2::<T>(), c]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.kind {
            ConeKind::Orthant(_) => x.iter().all(|&v| v > T::zero()),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::entries(x);
                a > T::zero() && a * c - b * b > T::zero()
            }
        }
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        self.check_dim(x)?;
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::NotInCone)
        }
    }

    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(y).fold(T::zero(), |s, (&a, &b)| s + a * b)
    }

    /// Determinant polynomial `Delta`.
    pub fn determinant(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.determinant_unchecked(x))
    }

    pub(crate) fn determinant_unchecked(&self, x: &[T]) -> T {
        match self.kind {
            ConeKind::Orthant(_) => x.iter().fold(T::one(), |p, &v| p * v),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::entries(x);
                a * c - b * b
            }
        }
    }

    /// Characteristic function `phi(x) = phi(e) Delta(x)^(-n/r)`.
    pub fn characteristic(&self, x: &[T]) -> Result<T> {
        self.check_point(x)?;
        let p = lit::<T>(self.dim() as f64 / self.rank() as f64);
        Ok(self.phi_e * self.determinant_unchecked(x).powf(-p))
    }

    /// Determinant of `h` as a linear map of the ambient space.
    pub fn det_h(&self, h: &HElement<T>) -> T {
        match self.kind {
            ConeKind::Orthant(_) => h.theta.iter().fold(T::zero(), |s, &t| s + t).exp(),
            ConeKind::Spd2 => (lit::<T>(3.0) * (h.theta[0] + h.theta[2])).exp(),
        }
    }

    fn cholesky_factor(h: &HElement<T>) -> (T, T, T) {
        (h.theta[0].exp(), h.theta[1], h.theta[2].exp())
    }

    /// `h . x`.
    pub fn act(&self, h: &HElement<T>, x: &[T]) -> Vec<T> {
        match self.kind {
            ConeKind::Orthant(_) => x.iter().zip(&h.theta).map(|(&v, &t)| v * t.exp()).collect(),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::cholesky_factor(h);
                let (x11, x12, x22) = Self::entries(x);
                Self::from_entries(
                    a * a * x11,
                    a * (b * x11 + c * x12),
                    b * b * x11 + lit::<T>(2.0) * b * c * x12 + c * c * x22,
                )
            }
        }
    }

    /// `h* . x`, the adjoint with respect to the ambient inner product.
    pub fn adjoint_act(&self, h: &HElement<T>, x: &[T]) -> Vec<T> {
        match self.kind {
            ConeKind::Orthant(_) => self.act(h, x),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::cholesky_factor(h);
                let (x11, x12, x22) = Self::entries(x);
                Self::from_entries(
                    a * a * x11 + lit::<T>(2.0) * a * b * x12 + b * b * x22,
                    c * (a * x12 + b * x22),
                    c * c * x22,
                )
            }
        }
    }

    pub fn compose(&self, h1: &HElement<T>, h2: &HElement<T>) -> HElement<T> {
        match self.kind {
            ConeKind::Orthant(_) => {
                HElement::new(h1.theta.iter().zip(&h2.theta).map(|(&a, &b)| a + b).collect())
            }
            ConeKind::Spd2 => {
                let (_, b1, c1) = Self::cholesky_factor(h1);
                let (a2, b2, _) = Self::cholesky_factor(h2);
                HElement::new(vec![
                    h1.theta[0] + h2.theta[0],
                    b1 * a2 + c1 * b2,
                    h1.theta[2] + h2.theta[2],
                ])
            }
        }
    }

    pub fn h_inverse(&self, h: &HElement<T>) -> HElement<T> {
        match self.kind {
            ConeKind::Orthant(_) => HElement::new(h.theta.iter().map(|&t| -t).collect()),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::cholesky_factor(h);
                HElement::new(vec![-h.theta[0], -b / (a * c), -h.theta[2]])
            }
        }
    }

    /// Matrix of `h` acting on the ambient space (orthonormal basis).
    pub fn action_matrix(&self, h: &HElement<T>) -> Mat<T> {
        Mat::from_linear_map(self.dim(), |v| self.act(h, v))
    }

    /// Chart coordinates of the unique `h` in `H` with `h . e = x`.
    pub fn chart(&self, x: &[T]) -> Result<HElement<T>> {
        self.check_point(x)?;
        Ok(match self.kind {
            ConeKind::Orthant(_) => HElement::new(x.iter().map(|v| v.ln()).collect()),
            ConeKind::Spd2 => {
                let (x11, x12, x22) = Self::entries(x);
                let a = x11.sqrt();
                let b = x12 / a;
                let c = (x22 - b * b).sqrt();
                HElement::new(vec![a.ln(), b, c.ln()])
            }
        })
    }

    /// Point `h . e` for chart coordinates `theta`.
    pub fn chart_point(&self, theta: &[T]) -> Vec<T> {
        self.act(&HElement::new(theta.to_vec()), &self.identity())
    }

    /// Riemannian distance of the invariant metric.
    pub fn metric_distance(&self, x: &[T], y: &[T]) -> Result<T> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &[T], y: &[T]) -> T {
        match self.kind {
            ConeKind::Orthant(_) => x
                .iter()
                .zip(y)
                .fold(T::zero(), |s, (&a, &b)| {
                    let d = (b / a).ln();
                    s + d * d
                })
                .sqrt(),
            ConeKind::Spd2 => {
                let (x11, x12, x22) = Self::entries(x);
                let (y11, y12, y22) = Self::entries(y);
                let qa = x11 * x22 - x12 * x12;
                let qb = x11 * y22 + x22 * y11 - lit::<T>(2.0) * x12 * y12;
                let qc = y11 * y22 - y12 * y12;
                let disc = (qb * qb - lit::<T>(4.0) * qa * qc).max(T::zero()).sqrt();
                let l1 = (qb + disc) / (lit::<T>(2.0) * qa);
                let l2 = qc / (qa * l1);
                let (g1, g2) = (l1.ln(), l2.ln());
                (g1 * g1 + g2 * g2).sqrt()
            }
        }
    }

    /// Distance to the identity; `None` outside the cone.
    pub fn distance_to_identity(&self, w: &[T]) -> Option<T> {
        match self.kind {
            ConeKind::Orthant(_) => {
                let mut s = T::zero();
                for &v in w {
                    if v <= T::zero() {
                        return None;
                    }
                    let l = v.ln();
                    s = s + l * l;
                }
                Some(s.sqrt())
            }
            ConeKind::Spd2 => {
                let (a, b, c) = Self::entries(w);
                if a <= T::zero() || a * c - b * b <= T::zero() {
                    return None;
                }
                let l1 = sym2_eig(a, b, c).0;
                let l2 = (a * c - b * b) / l1;
                let (g1, g2) = (l1.ln(), l2.ln());
                Some((g1 * g1 + g2 * g2).sqrt())
            }
        }
    }

    /// Gradient in `w` of `d(w, c)` (orthonormal coordinates).
    pub fn distance_gradient(&self, w: &[T], c: &[T]) -> Vec<T> {
        let d = self.distance_unchecked(w, c);
        if d <= T::epsilon() {
            return vec![T::zero(); self.dim()];
        }
        match self.kind {
            ConeKind::Orthant(_) => {
                w.iter().zip(c).map(|(&wi, &ci)| (wi / ci).ln() / (d * wi)).collect()
            }
            ConeKind::Spd2 => {
                let (c11, c12, c22) = Self::entries(c);
                let cih = sym2_fn(c11, c12, c22, |l| T::one() / l.sqrt());
                let (w11, w12, w22) = Self::entries(w);
                let m = congruence(cih, (w11, w12, w22));
                let g = sym2_fn(m.0, m.1, m.2, |l| l.ln() / l);
                let gm = congruence(cih, g);
                vec![gm.0 / d, gm.1 * sqrt2::<T>() / d, gm.2 / d]
            }
        }
    }

    /// Density of the left Haar measure of `H` in chart coordinates,
    /// normalised as `phi(x) dx` pulled back by `theta -> h . e`.
    pub fn haar_weight(&self, theta: &[T]) -> T {
        match self.kind {
            ConeKind::Orthant(_) => self.phi_e,
            ConeKind::Spd2 => self.phi_e * lit::<T>(4.0) * sqrt2::<T>() * (-theta[2]).exp(),
        }
    }

    /// Jordan inverse `x^{-1}`.
    pub fn jordan_inverse(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_point(x)?;
        Ok(match self.kind {
            ConeKind::Orthant(_) => x.iter().map(|&v| T::one() / v).collect(),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::entries(x);
                let d = a * c - b * b;
                Self::from_entries(c / d, -b / d, a / d)
            }
        })
    }

    /// Euclidean distance from `x` to the boundary of the cone.
    pub fn boundary_distance(&self, x: &[T]) -> T {
        match self.kind {
            ConeKind::Orthant(_) => x.iter().fold(T::infinity(), |m, &v| m.min(v)),
            ConeKind::Spd2 => {
                let (a, b, c) = Self::entries(x);
                sym2_eig(a, b, c).1
            }
        }
    }

    /// Axis-aligned box containing the metric ball `B_radius(c)`.
    pub fn ball_bounding_box(&self, c: &[T], radius: T) -> (Vec<T>, Vec<T>) {
        match self.kind {
            ConeKind::Orthant(_) => (
                c.iter().map(|&v| v * (-radius).exp()).collect(),
                c.iter().map(|&v| v * radius.exp()).collect(),
            ),
            ConeKind::Spd2 => {
                let (a, b, cc) = Self::entries(c);
                let (l1, l2, _, _) = sym2_eig(a, b, cc);
                let lo = l2 * (-radius).exp();
                let hi = l1 * radius.exp();
                let off = (hi - lo) * lit(0.5) * sqrt2::<T>();
                (vec![lo, -off, lo], vec![hi, off, hi])
            }
        }
    }

    /// Box in chart coordinates containing `chart(B_radius(c))`.
    pub fn ball_chart_box(&self, c: &[T], radius: T) -> (Vec<T>, Vec<T>) {
        let half = lit::<T>(0.5);
        match self.kind {
            ConeKind::Orthant(_) => (
                c.iter().map(|&v| v.ln() - radius).collect(),
                c.iter().map(|&v| v.ln() + radius).collect(),
            ),
            ConeKind::Spd2 => {
                let (a, b, cc) = Self::entries(c);
                let l1 = sym2_eig(a, b, cc).0;
                let l2 = (a * cc - b * b) / l1;
                let lo = l2 * (-radius).exp();
                let hi = l1 * radius.exp();
                // |b| = |x12| / sqrt(x11) <= sqrt(x22) <= sqrt(hi)
                let bmax = ((hi - lo) * half / lo.sqrt()).min(hi.sqrt());
                (
                    vec![half * lo.ln(), -bmax, half * (lo * lo / hi).ln()],
                    vec![half * hi.ln(), bmax, half * (hi * hi / lo).ln()],
                )
            }
        }
    }

    /// Matrix of the Lie algebra element with chart direction `dir`
    /// acting on the ambient space.
    pub fn lie_matrix(&self, dir: &[T]) -> Mat<T> {
        match self.kind {
            ConeKind::Orthant(_) => Mat::diag(dir),
            ConeKind::Spd2 => {
                let (e1, beta, e3) = (dir[0], dir[1], dir[2]);
                Mat::from_linear_map(3, |v| {
                    let (x11, x12, x22) = Self::entries(v);
                    let two = lit::<T>(2.0);
                    Self::from_entries(
                        two * e1 * x11,
                        beta * x11 + (e1 + e3) * x12,
                        two * beta * x12 + two * e3 * x22,
                    )
                })
            }
        }
    }

    /// Trace of [`Self::lie_matrix`].
    pub fn lie_trace(&self, dir: &[T]) -> T {
        match self.kind {
            ConeKind::Orthant(_) => dir.iter().fold(T::zero(), |s, &v| s + v),
            ConeKind::Spd2 => lit::<T>(3.0) * (dir[0] + dir[2]),
        }
    }

    /// `exp(t X)` in `H` for chart direction `dir`.
    pub fn h_exp(&self, dir: &[T], t: T) -> HElement<T> {
        match self.kind {
            ConeKind::Orthant(_) => HElement::new(dir.iter().map(|&v| v * t).collect()),
            ConeKind::Spd2 => {
                let (e1, beta, e3) = (dir[0], dir[1], dir[2]);
                let diff = e1 - e3;
                let off = if (diff * t).abs() < lit(1e-8) {
                    beta * t * (t * (e1 + e3) * lit(0.5)).exp()
                } else {
                    beta * ((e1 * t).exp() - (e3 * t).exp()) / diff
                };
                HElement::new(vec![e1 * t, off, e3 * t])
            }
        }
    }

    /// Serialisation layout: `[x11, x12, x22]` for `spd2`, identity otherwise.
    pub fn to_storage(&self, x: &[T]) -> Vec<T> {
        match self.kind {
            ConeKind::Orthant(_) => x.to_vec(),
            ConeKind::Spd2 => vec![x[0], x[1] / sqrt2::<T>(), x[2]],
        }
    }

    pub fn from_storage(&self, s: &[T]) -> Vec<T> {
        match self.kind {
            ConeKind::Orthant(_) => s.to_vec(),
            ConeKind::Spd2 => vec![s[0], s[1] * sqrt2::<T>(), s[2]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd() -> ConeModel<f64> {
        ConeModel::spd2().unwrap()
    }

    fn sym(x11: f64, x12: f64, x22: f64) -> Vec<f64> {
        vec![x11, x12 * 2f64.sqrt(), x22]
    }

    #[test]
    fn phi_at_identity() {
        let o = ConeModel::<f64>::orthant(2).unwrap();
        assert!((o.phi_e() - 1.0).abs() < 1e-12);
        // Gamma_Omega(3/2) = sqrt(2 pi) Gamma(3/2) Gamma(1) for the 2x2 cone, in orthonormal measure.
        let expected = std::f64::consts::PI / 2f64.sqrt();
        assert!((spd().phi_e() - expected).abs() < 1e-9, "{}", spd().phi_e());
    }

    #[test]
    fn determinant_examples() {
        let o = ConeModel::<f64>::orthant(2).unwrap();
        assert_eq!(o.determinant(&[2.0, 3.0]).unwrap(), 6.0);
        assert!((spd().determinant(&sym(2.0, 1.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(o.determinant(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn parse_names() {
        assert_eq!(ConeModel::<f64>::parse("orthant:r=2").unwrap().kind(), ConeKind::Orthant(2));
        assert_eq!(ConeModel::<f64>::parse("spd2").unwrap().name(), "spd2");
        assert!(ConeModel::<f64>::parse("orthant:r=9").is_err());
        assert!(ConeModel::<f64>::parse("lorentz").is_err());
    }

    #[test]
    fn chart_of_identity_is_zero() {
        let c = spd();
        assert_eq!(c.chart(&c.identity()).unwrap().theta, vec![0.0, 0.0, 0.0]);
        assert!(matches!(c.chart(&sym(1.0, 2.0, 1.0)), Err(Error::NotInCone)));
    }

    #[test]
    fn characteristic_of_scaled_identity() {
        let o = ConeModel::<f64>::orthant(1).unwrap();
        assert!((o.characteristic(&[4.0]).unwrap() - 0.25).abs() < 1e-14);
        let c = spd();
        let v = c.characteristic(&sym(2.0, 0.0, 2.0)).unwrap();
        assert!((v - c.phi_e() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn haar_weight_is_left_invariant() {
        // integral of F(h0 h) dh equals integral of F(h) dh
        let c = spd();
        let f = |t: &[f64]| {
            let r2 = t[0] * t[0] + 0.5 * t[1] * t[1] + t[2] * t[2];
            crate::smooth::step(r2.sqrt() / 1.2, 1.0)
        };
        let h0 = HElement::new(vec![0.3, -0.4, -0.2]);
        let step = 0.05;
        let nodes = quadrature::symmetric_nodes(step, 3.0);
        let (mut a, mut b) = (0.0, 0.0);
        for &t0 in &nodes {
            for &t1 in &nodes {
                for &t2 in &nodes {
                    let th = [t0, t1, t2];
                    let w = c.haar_weight(&th);
                    a += f(&th) * w;
                    let moved = c.compose(&h0, &HElement::new(th.to_vec()));
                    b += f(&moved.theta) * w;
                }
            }
        }
        assert!(((a - b) / a).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn distance_gradient_matches_difference() {
        let c = spd();
        let w = sym(1.3, 0.2, 0.8);
        let x0 = sym(0.9, -0.1, 1.4);
        let g = c.distance_gradient(&w, &x0);
        for i in 0..3 {
            let mut p = w.clone();
            let mut m = w.clone();
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let fd = (c.distance_unchecked(&p, &x0) - c.distance_unchecked(&m, &x0)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7, "{i} {fd} {}", g[i]);
        }
    }

    #[test]
    fn lie_matrix_is_derivative_of_exp() {
        let c = spd();
        let dir = [0.3, -0.7, 0.5];
        let x = sym(1.1, 0.3, 0.9);
        let m = c.lie_matrix(&dir).mul_vec(&x);
        let t = 1e-6;
        let p = c.act(&c.h_exp(&dir, t), &x);
        let q = c.act(&c.h_exp(&dir, -t), &x);
        for i in 0..3 {
            assert!(((p[i] - q[i]) / (2.0 * t) - m[i]).abs() < 1e-8);
        }
        assert!((c.lie_trace(&dir) - (0..3).map(|i| c.lie_matrix(&dir).get(i, i)).sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn f32_orthant() {
        let o = ConeModel::<f32>::orthant(2).unwrap();
        assert!((o.phi_e() - 1.0).abs() < 1e-5);
        assert!((o.metric_distance(&[1.0, 1.0], &[std::f32::consts::E, 1.0]).unwrap() - 1.0).abs() < 1e-6);
    }

    fn arb_theta() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.5f64..1.5, 3)
    }

    proptest! {
        #[test]
        fn multiplicative_determinant(t in arb_theta(), s in arb_theta()) {
            let c = spd();
            let h = HElement::new(t);
            let x = c.chart_point(&s);
            let lhs = c.determinant(&c.act(&h, &x)).unwrap();
            let rhs = c.determinant(&c.chart_point(&h.theta)).unwrap() * c.determinant(&x).unwrap();
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-10);
            // Delta(h e) = |Det h|^(r/n)
            let dh = c.det_h(&h).powf(2.0 / 3.0);
            prop_assert!(((c.determinant(&c.chart_point(&h.theta)).unwrap() - dh) / dh).abs() < 1e-10);
        }

        #[test]
        fn characteristic_covariance(t in arb_theta(), s in arb_theta()) {
            let c = spd();
            let h = HElement::new(t);
            let x = c.chart_point(&s);
            let lhs = c.characteristic(&c.act(&h, &x)).unwrap();
            let rhs = c.characteristic(&x).unwrap() / c.det_h(&h);
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-10);
        }

        #[test]
        fn chart_inverts_act(t in arb_theta()) {
            let c = spd();
            let back = c.chart(&c.chart_point(&t)).unwrap();
            for i in 0..3 {
                prop_assert!((back.theta[i] - t[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn metric_invariance(t in arb_theta(), s in arb_theta(), u in arb_theta()) {
            let c = spd();
            let h = HElement::new(t);
            let x = c.chart_point(&s);
            let y = c.chart_point(&u);
            let d0 = c.metric_distance(&x, &y).unwrap();
            let d1 = c.metric_distance(&c.act(&h, &x), &c.act(&h, &y)).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-10 * (1.0 + d0));
            let dinv = c.metric_distance(&c.jordan_inverse(&x).unwrap(), &c.jordan_inverse(&y).unwrap()).unwrap();
            prop_assert!((d0 - dinv).abs() < 1e-10 * (1.0 + d0));
        }

        #[test]
        fn group_law(t in arb_theta(), s in arb_theta()) {
            let c = spd();
            let (h, k) = (HElement::new(t), HElement::new(s));
            let x = c.identity();
            let lhs = c.act(&c.compose(&h, &k), &x);
            let rhs = c.act(&h, &c.act(&k, &x));
            for i in 0..3 { prop_assert!((lhs[i] - rhs[i]).abs() < 1e-10 * (1.0 + rhs[i].abs())); }
            let id = c.compose(&h, &c.h_inverse(&h));
            for v in id.theta { prop_assert!(v.abs() < 1e-12); }
            // adjoint: <h x, y> = <x, h* y>
            let y = c.chart_point(&[0.1, 0.2, -0.3]);
            let a = c.inner(&c.act(&h, &x), &y);
            let b = c.inner(&x, &c.adjoint_act(&h, &y));
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn orthant_distance_is_log_euclidean(a in 0.1f64..5.0, b in 0.1f64..5.0, c2 in 0.1f64..5.0, d in 0.1f64..5.0) {
            let o = ConeModel::<f64>::orthant(2).unwrap();
            let dist = o.metric_distance(&[a, b], &[c2, d]).unwrap();
            let want = ((a.ln() - c2.ln()).powi(2) + (b.ln() - d.ln()).powi(2)).sqrt();
            prop_assert!((dist - want).abs() < 1e-12);
        }
    }
}
