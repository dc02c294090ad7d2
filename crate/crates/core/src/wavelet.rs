//! The admissible wavelet: a radial bump around `e` in the invariant metric.

use num_complex::Complex;
use serde::Serialize;

use crate::cone::{ConeModel, HElement};
use crate::error::{Error, Result};
use crate::grid::{FreqGrid, FrequencyField, Spectrum};
use crate::quadrature::{product_nodes, symmetric_nodes};
use crate::scalar::{lit, Real};
use crate::smooth;

pub const INNER_RADIUS: f64 = 0.5;
pub const OUTER_RADIUS: f64 = 2.0;

/// How the admissibility integral was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureReport {
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    pub last_relative_change: f64,
}

/// `psi^(w) = kappa * step((d(w, e) - 1/2) / (3/2))`: equal to `kappa` on
/// `B_{1/2}(e)`, zero outside `B_2(e)`, with `kappa` chosen so the
/// admissibility constant is 1.
#[derive(Debug, Clone)]
pub struct WaveletSystem<T: Real> {
    pub cone: ConeModel<T>,
    pub sharpness: T,
    pub kappa: T,
    pub psi_hat: FrequencyField<T>,
    pub report: QuadratureReport,
}

fn chart_box<T: Real>(cone: &ConeModel<T>) -> Vec<T> {
    // half-widths of a chart box containing {h : d(h e, e) < 2}
    match cone.kind() {
        crate::cone::ConeKind::Orthant(r) => vec![lit(OUTER_RADIUS + 0.05); r],
        crate::cone::ConeKind::Spd2 => vec![lit(1.05), lit(2.8), lit(1.05)],
    }
}

fn profile<T: Real>(cone: &ConeModel<T>, w: &[T], sharpness: T) -> T {
    match cone.distance_to_identity(w) {
        Some(d) => smooth::plateau(d, lit(INNER_RADIUS), lit(OUTER_RADIUS), sharpness),
        None => T::zero(),
    }
}

/// `int_H g(h* e) dh` on a uniform chart lattice, halving the step until the
/// relative change drops below `tol`.
pub fn h_integral<T: Real>(
    cone: &ConeModel<T>,
    g: impl Fn(&[T]) -> T,
    half_widths: &[T],
    first_step: T,
    tol: T,
    max_nodes: usize,
) -> Result<(T, QuadratureReport)> {
    let e = cone.identity();
    let mut step = first_step;
    let mut report = QuadratureReport { steps: vec![], values: vec![], last_relative_change: f64::INFINITY };
    let mut prev: Option<T> = None;
    loop {
        let axes: Vec<Vec<T>> = half_widths.iter().map(|&hw| symmetric_nodes(step, hw)).collect();
        let count: usize = axes.iter().map(|a| a.len()).product();
        if count > max_nodes {
            return Err(Error::Quadrature(format!(
                "H-lattice budget {max_nodes} exceeded at step {step}; last change {}",
                report.last_relative_change
            )));
        }
        let vol = step.powi(cone.dim() as i32);
        let mut sum = T::zero();
        let mut idx = vec![0usize; axes.len()];
        let mut theta = vec![T::zero(); axes.len()];
        for _ in 0..count {
            for a in 0..axes.len() {
                theta[a] = axes[a][idx[a]];
            }
            let h = HElement::new(theta.clone());
            let v = g(&cone.adjoint_act(&h, &e));
            if v != T::zero() {
                sum = sum + v * cone.haar_weight(&theta);
            }
            for a in (0..axes.len()).rev() {
                idx[a] += 1;
                if idx[a] < axes[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        let value = sum * vol;
        report.steps.push(step.to_f64_lossy());
        report.values.push(value.to_f64_lossy());
        if let Some(p) = prev {
            let change = ((value - p) / value).abs();
            report.last_relative_change = change.to_f64_lossy();
            if change < tol {
                return Ok((value, report));
            }
        }
        prev = Some(value);
        step = step / lit(2.0);
    }
}

impl<T: Real> WaveletSystem<T> {
    /// Unnormalised profile value at `w`.
    pub fn eval_real(&self, w: &[T]) -> T {
        self.kappa * profile(&self.cone, w, self.sharpness)
    }

    /// `psi^(h* w)`.
    pub fn eval_dilated(&self, h: &HElement<T>, w: &[T]) -> T {
        self.eval_real(&self.cone.adjoint_act(h, w))
    }

    pub fn gradient_real(&self, w: &[T]) -> Vec<T> {
        let n = self.cone.dim();
        let d = match self.cone.distance_to_identity(w) {
            Some(d) => d,
            None => return vec![T::zero(); n],
        };
        let s = smooth::plateau_derivative(d, lit(INNER_RADIUS), lit(OUTER_RADIUS), self.sharpness);
        if s == T::zero() {
            return vec![T::zero(); n];
        }
        let e = self.cone.identity();
        self.cone.distance_gradient(w, &e).into_iter().map(|g| self.kappa * s * g).collect()
    }

    /// `int_H |psi^(h* e)|^2 dh`, refined until the relative change is below 1e-7.
    pub fn admissibility_constant(&self) -> Result<T> {
        let hw = chart_box(&self.cone);
        let tol = if std::mem::size_of::<T>() >= 8 { 1e-7 } else { 1e-4 };
        h_integral(&self.cone, |w| self.eval_real(w).powi(2), &hw, lit(0.1), lit(tol), 40_000_000)
            .map(|(v, _)| v)
    }

    /// `max |psi^(w)| (1 + |w|)^k / Delta(w)^l` over the sampled grid, for `k, l` in `0..=2`.
    pub fn growth_bounds(&self) -> Vec<(u32, u32, T)> {
        let grid = &self.psi_hat.grid;
        let mut out = Vec::with_capacity(9);
        for k in 0..=2u32 {
            for l in 0..=2u32 {
                let mut m = T::zero();
                for (i, &v) in self.psi_hat.values.iter().enumerate() {
                    if v == T::zero() {
                        continue;
                    }
                    let w = grid.point(i);
                    let norm = w.iter().fold(T::zero(), |s, &a| s + a * a).sqrt();
                    let det = match self.cone.determinant(&w) {
                        Ok(d) => d,
                        Err(_) => T::zero(),
                    };
                    m = m.max(v.abs() * (T::one() + norm).powi(k as i32) / det.powi(l as i32));
                }
                out.push((k, l, m));
            }
        }
        out
    }

    /// Chart half-widths of a box containing every `h` with `psi^(h* e) != 0`.
    pub fn chart_support(&self) -> Vec<T> {
        chart_box(&self.cone)
    }
}

/// Build the wavelet, normalise it to admissibility 1 and sample it on `grid`.
pub fn make_wavelet<T: Real>(cone: &ConeModel<T>, grid: &FreqGrid<T>, sharpness: T) -> Result<WaveletSystem<T>> {
    if grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: grid.ndim() });
    }
    if !(sharpness > T::zero()) || !sharpness.is_finite() {
        return Err(Error::Config("sharpness must be positive".into()));
    }
    let e = cone.identity();
    let (lo, hi) = cone.ball_bounding_box(&e, lit(OUTER_RADIUS));
    if !grid.contains_box(&lo, &hi) {
        return Err(Error::Grid("support ball B_2(e) leaves the grid box".into()));
    }
    let (ilo, ihi) = cone.ball_bounding_box(&e, lit(INNER_RADIUS));
    for a in 0..grid.ndim() {
        let across = (ihi[a] - ilo[a]) / grid.spacing[a];
        if across < lit(8.0) {
            return Err(Error::Grid(format!(
                "axis {a}: only {across:.2} samples across B_1/2(e), need 8"
            )));
        }
    }
    let hw = chart_box(cone);
    let tol = if std::mem::size_of::<T>() >= 8 { 1e-7 } else { 1e-4 };
    let (raw, report) = h_integral(cone, |w| profile(cone, w, sharpness).powi(2), &hw, lit(0.1), lit(tol), 40_000_000)?;
    let kappa = T::one() / raw.sqrt();
    let psi_hat = FrequencyField::from_fn(grid, |w| kappa * profile(cone, w, sharpness));
    Ok(WaveletSystem { cone: cone.clone(), sharpness, kappa, psi_hat, report })
}

impl<T: Real> Spectrum<T> for WaveletSystem<T> {
    fn dim(&self) -> usize {
        self.cone.dim()
    }

    fn eval(&self, w: &[T]) -> Complex<T> {
        Complex::new(self.eval_real(w), T::zero())
    }

    fn gradient(&self, w: &[T]) -> Option<Vec<Complex<T>>> {
        Some(self.gradient_real(w).into_iter().map(|g| Complex::new(g, T::zero())).collect())
    }
}

/// Grid for sampling the wavelet of `cone`, with `n` nodes per axis.
pub fn default_wavelet_grid<T: Real>(cone: &ConeModel<T>, n: usize) -> Result<FreqGrid<T>> {
    let (lo, hi) = cone.ball_bounding_box(&cone.identity(), lit(OUTER_RADIUS + 0.05));
    FreqGrid::covering(&lo, &hi, &vec![n; cone.dim()])
}

/// All chart nodes of a product lattice with the given step inside the wavelet support box.
pub fn support_lattice<T: Real>(cone: &ConeModel<T>, step: T) -> Vec<Vec<T>> {
    let axes: Vec<Vec<T>> = chart_box(cone).iter().map(|&hw| symmetric_nodes(step, hw)).collect();
    product_nodes(&axes)
}
