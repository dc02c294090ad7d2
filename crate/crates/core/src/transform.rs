//! Quasi-regular representation, wavelet analysis and synthesis, group convolution.
//!
//! Conventions: `pi^(h, x) f^(w) = sqrt(det h) exp(-i <x, w>) f^(h* w)`,
//! `W f(h, x) = sqrt(det h) int f^(w) psi^(h* w) exp(i <x, w>) dw`, and the Haar
//! measure on `G` is `dx dh / ((2 pi)^n det h)` so that admissibility 1 gives the
//! reproducing formula without extra constants.

use num_complex::Complex;
use rayon::prelude::*;

use crate::cone::{ConeModel, HElement};
use crate::error::{Error, Result};
use crate::grid::{spatial_to_spectrum, spectrum_to_spatial, FreqGrid, NdFft, SampledSignal, Spectrum};
use crate::group::{GroupPoint, LieDirection};
use crate::mat::Mat;
use crate::quadrature::product_nodes;
use crate::scalar::{lit, Real};
use crate::wavelet::{WaveletSystem, OUTER_RADIUS};

type C<T> = Complex<T>;

fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

fn cis<T: Real>(a: T) -> C<T> {
    Complex::new(a.cos(), a.sin())
}

fn two_pi_pow<T: Real>(p: f64) -> T {
    T::TAU().powf(lit(p))
}

/// `pi(g) f` evaluated exactly from a model spectrum.
pub struct Represented<'a, T: Real, S: Spectrum<T> + ?Sized> {
    pub cone: &'a ConeModel<T>,
    pub g: GroupPoint<T>,
    pub inner: &'a S,
}

impl<'a, T: Real, S: Spectrum<T> + ?Sized> Represented<'a, T, S> {
    pub fn new(cone: &'a ConeModel<T>, g: GroupPoint<T>, inner: &'a S) -> Self {
        Represented { cone, g, inner }
    }
}

impl<'a, T: Real, S: Spectrum<T> + ?Sized> Spectrum<T> for Represented<'a, T, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, w: &[T]) -> C<T> {
        let amp = self.cone.det_h(&self.g.h).sqrt();
        let phase = -self.cone.inner(&self.g.x, w);
        self.inner.eval(&self.cone.adjoint_act(&self.g.h, w)) * cis(phase) * amp
    }

    fn gradient(&self, w: &[T]) -> Option<Vec<C<T>>> {
        let hw = self.cone.adjoint_act(&self.g.h, w);
        let inner_grad = self.inner.gradient(&hw)?;
        let f = self.inner.eval(&hw);
        let amp = self.cone.det_h(&self.g.h).sqrt();
        let ph = cis(-self.cone.inner(&self.g.x, w)) * amp;
        // d/dw f(h* w) = h (grad f)(h* w)
        let n = self.dim();
        let hm = self.cone.action_matrix(&self.g.h);
        Some(
            (0..n)
                .map(|i| {
                    let chain = (0..n).fold(czero::<T>(), |s, j| s + inner_grad[j] * hm.get(i, j));
                    (chain - f * Complex::new(T::zero(), self.g.x[i])) * ph
                })
                .collect(),
        )
    }
}

/// `pi(g) f` for a sampled spectrum, resampled with tensor cubic interpolation.
pub fn rep_apply<T: Real>(cone: &ConeModel<T>, g: &GroupPoint<T>, f: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    if f.grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: f.grid.ndim() });
    }
    SampledSignal::sample(&Represented::new(cone, g.clone(), f), &f.grid)
}

/// `pi(g) f` sampled exactly from a model spectrum.
pub fn rep_apply_model<T: Real, S: Spectrum<T> + ?Sized>(
    cone: &ConeModel<T>,
    g: &GroupPoint<T>,
    f: &S,
    grid: &FreqGrid<T>,
) -> Result<SampledSignal<T>> {
    SampledSignal::sample(&Represented::new(cone, g.clone(), f), grid)
}

/// Quadrature samples of `H`: chart lattice nodes with Haar weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HSamples<T> {
    pub thetas: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub step: T,
}

impl<T: Real> HSamples<T> {
    /// Nodes `step * k` inside `[lo, hi]` accepted by `keep`.
    pub fn lattice(
        cone: &ConeModel<T>,
        step: T,
        lo: &[T],
        hi: &[T],
        keep: impl Fn(&[T]) -> bool,
        budget: usize,
    ) -> Result<Self> {
        if !(step > T::zero()) {
            return Err(Error::Config("H step must be positive".into()));
        }
        let axes: Vec<Vec<T>> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                let k0 = (a / step).ceil().to_i64().unwrap_or(0);
                let k1 = (b / step).floor().to_i64().unwrap_or(0);
                (k0..=k1).map(|k| step * lit(k as f64)).collect()
            })
            .collect();
        let count: usize = axes.iter().map(|a| a.len()).product();
        if count > budget {
            return Err(Error::Budget { what: "H lattice box".into(), needed: count, limit: budget });
        }
        let vol = step.powi(cone.dim() as i32);
        let thetas: Vec<Vec<T>> = product_nodes(&axes).into_iter().filter(|t| keep(t)).collect();
        let weights = thetas.iter().map(|t| cone.haar_weight(t) * vol).collect();
        Ok(HSamples { thetas, weights, step })
    }

    /// Every lattice `h` for which `psi^(h* .)` meets the metric ball `B_radius(center)`.
    pub fn support_exact(cone: &ConeModel<T>, step: T, center: &[T], radius: T) -> Result<Self> {
        let reach = radius + lit(OUTER_RADIUS);
        // psi^(h* w) != 0 for some w in the ball iff d(center, (h^{-1})* e) < 2 + radius,
        // and (h^{-1})* e is the Jordan inverse of h e.
        let cinv = cone.jordan_inverse(center)?;
        let (lo, hi) = cone.ball_chart_box(&cinv, reach);
        let e = cone.identity();
        HSamples::lattice(
            cone,
            step,
            &lo,
            &hi,
            |t| {
                let h = HElement::new(t.to_vec());
                let p = cone.adjoint_act(&cone.h_inverse(&h), &e);
                cone.distance_unchecked(center, &p) < reach
            },
            50_000_000,
        )
    }

    pub fn from_points(cone: &ConeModel<T>, thetas: Vec<Vec<T>>, step: T) -> Self {
        let vol = step.powi(cone.dim() as i32);
        let weights = thetas.iter().map(|t| cone.haar_weight(t) * vol).collect();
        HSamples { thetas, weights, step }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn element(&self, i: usize) -> HElement<T> {
        HElement::new(self.thetas[i].clone())
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        HSamples {
            thetas: idx.iter().map(|&i| self.thetas[i].clone()).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            step: self.step,
        }
    }
}

/// Spatial sample lattice of one level: `origin + basis k`, `0 <= k < shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLattice<T> {
    pub basis: Mat<T>,
    pub origin: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Real> SpatialLattice<T> {
    /// The dual torus grid of a frequency grid.
    pub fn torus(grid: &FreqGrid<T>) -> Self {
        SpatialLattice {
            basis: Mat::diag(&grid.spatial_step()),
            origin: vec![T::zero(); grid.ndim()],
            shape: grid.shape.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.basis.det().abs()
    }

    pub fn point(&self, idx: usize) -> Vec<T> {
        let n = self.shape.len();
        let mut k = vec![T::zero(); n];
        let mut rem = idx;
        for a in (0..n).rev() {
            k[a] = T::from_usize_lossy(rem % self.shape[a]);
            rem /= self.shape[a];
        }
        self.basis.mul_vec(&k).iter().zip(&self.origin).map(|(&a, &b)| a + b).collect()
    }

    /// Whether this lattice is exactly the dual torus grid of `grid`.
    pub fn is_torus_of(&self, grid: &FreqGrid<T>) -> bool {
        if self.shape != grid.shape || self.origin.iter().any(|&o| o != T::zero()) {
            return false;
        }
        let t = Mat::diag(&grid.spatial_step());
        let tol = lit::<T>(1e-12);
        self.basis.a.iter().zip(&t.a).all(|(&a, &b)| (a - b).abs() <= tol * (T::one() + b.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level<T> {
    pub h: HElement<T>,
    /// Haar quadrature weight of this level.
    pub weight: T,
    pub lattice: SpatialLattice<T>,
    pub values: Vec<Complex<T>>,
}

/// Samples of a function on `G`, level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T> {
    pub cone: String,
    pub levels: Vec<Level<T>>,
}

impl<T: Real> CoefficientField<T> {
    pub fn max_abs(&self) -> T {
        self.levels
            .iter()
            .flat_map(|l| l.values.iter())
            .fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Largest pointwise difference to another field on the same samples.
    pub fn max_diff(&self, other: &Self) -> Result<T> {
        if self.levels.len() != other.levels.len() {
            return Err(Error::Grid("fields have different level counts".into()));
        }
        let mut m = T::zero();
        for (a, b) in self.levels.iter().zip(&other.levels) {
            if a.values.len() != b.values.len() {
                return Err(Error::Grid("levels have different sizes".into()));
            }
            for (x, y) in a.values.iter().zip(&b.values) {
                m = m.max((x - y).norm());
            }
        }
        Ok(m)
    }

    pub fn h_samples(&self) -> Vec<Vec<T>> {
        self.levels.iter().map(|l| l.h.theta.clone()).collect()
    }

    /// Exact left translation `F(g0^{-1} .)`: relabels every sample.
    pub fn left_translate(&self, cone: &ConeModel<T>, g0: &GroupPoint<T>) -> Self {
        let m0 = cone.action_matrix(&g0.h);
        let levels = self
            .levels
            .iter()
            .map(|l| {
                let origin = g0.apply(cone, &l.lattice.origin);
                Level {
                    h: cone.compose(&g0.h, &l.h),
                    weight: l.weight,
                    lattice: SpatialLattice { basis: m0.mul(&l.lattice.basis), origin, shape: l.lattice.shape.clone() },
                    values: l.values.clone(),
                }
            })
            .collect();
        CoefficientField { cone: self.cone.clone(), levels }
    }
}

/// `sum_j w_j psi^(h_j* w)^2`: the discrete admissibility at `w`.
pub fn coverage<T: Real>(wavelet: &WaveletSystem<T>, hs: &HSamples<T>, w: &[T]) -> T {
    hs.thetas
        .iter()
        .zip(&hs.weights)
        .fold(T::zero(), |s, (t, &wt)| s + wt * wavelet.eval_dilated(&HElement::new(t.clone()), w).powi(2))
}

fn check_dims<T: Real>(wavelet: &WaveletSystem<T>, grid: &FreqGrid<T>) -> Result<()> {
    if grid.ndim() != wavelet.cone.dim() {
        return Err(Error::Dimension { expected: wavelet.cone.dim(), got: grid.ndim() });
    }
    Ok(())
}

/// Wavelet transform on the torus layout: every level is sampled on the dual grid of `f.grid`.
/// Fails if part of the spectrum of `f` is seen by no level.
pub fn analyze<T: Real>(f: &SampledSignal<T>, wavelet: &WaveletSystem<T>, hs: &HSamples<T>) -> Result<CoefficientField<T>> {
    analyze_impl(f, wavelet, hs, true)
}

/// [`analyze`] on an arbitrary set of levels, without the coverage check.
pub fn analyze_partial<T: Real>(f: &SampledSignal<T>, wavelet: &WaveletSystem<T>, hs: &HSamples<T>) -> Result<CoefficientField<T>> {
    analyze_impl(f, wavelet, hs, false)
}

fn analyze_impl<T: Real>(f: &SampledSignal<T>, wavelet: &WaveletSystem<T>, hs: &HSamples<T>, check: bool) -> Result<CoefficientField<T>> {
    check_dims(wavelet, &f.grid)?;
    let cone = &wavelet.cone;
    let grid = &f.grid;
    let fft = NdFft::new(&grid.shape);
    let support: Vec<usize> = (0..grid.len()).filter(|&i| f.values[i] != czero()).collect();
    let pts: Vec<Vec<T>> = support.iter().map(|&i| grid.point(i)).collect();
    let scale = two_pi_pow::<T>(grid.ndim() as f64 / 2.0);
    let results: Vec<(Level<T>, Vec<T>)> = (0..hs.len())
        .into_par_iter()
        .map(|j| {
            let h = hs.element(j);
            let amp = cone.det_h(&h).sqrt() * scale;
            let mut spec = vec![czero(); grid.len()];
            let mut cov = Vec::with_capacity(support.len());
            for (&i, w) in support.iter().zip(&pts) {
                let p = wavelet.eval_dilated(&h, w);
                cov.push(hs.weights[j] * p * p);
                spec[i] = f.values[i] * (p * amp);
            }
            let values = spectrum_to_spatial(grid, &fft, &spec);
            (Level { h, weight: hs.weights[j], lattice: SpatialLattice::torus(grid), values }, cov)
        })
        .collect();
    let mut cover = vec![T::zero(); support.len()];
    let mut levels = Vec::with_capacity(results.len());
    for (l, c) in results {
        for (a, b) in cover.iter_mut().zip(&c) {
            *a = *a + *b;
        }
        levels.push(l);
    }
    let total: T = support.iter().fold(T::zero(), |s, &i| s + f.values[i].norm_sqr());
    if check && total > T::zero() {
        let missing = support
            .iter()
            .zip(&cover)
            .filter(|(_, &c)| c == T::zero())
            .fold(T::zero(), |s, (&i, _)| s + f.values[i].norm_sqr());
        let frac = (missing / total).to_f64_lossy();
        if frac > 1e-10 {
            return Err(Error::Uncovered { fraction: frac });
        }
    }
    Ok(CoefficientField { cone: cone.name(), levels })
}

/// Wavelet transform on the scale-adapted layout: level `h` uses frequencies
/// `h^{-*} u` for `u` on `local` and spatial samples `h y`. Covariance under
/// the full group holds exactly for model spectra.
pub fn analyze_adapted<T: Real, S: Spectrum<T> + ?Sized>(
    f: &S,
    wavelet: &WaveletSystem<T>,
    hs: &HSamples<T>,
    local: &FreqGrid<T>,
) -> Result<CoefficientField<T>> {
    check_dims(wavelet, local)?;
    let cone = &wavelet.cone;
    let e = cone.identity();
    let (lo, hi) = cone.ball_bounding_box(&e, lit(OUTER_RADIUS));
    if !local.contains_box(&lo, &hi) {
        return Err(Error::Grid("local grid does not contain the wavelet support".into()));
    }
    let fft = NdFft::new(&local.shape);
    let upts: Vec<Vec<T>> = local.points();
    let psi: Vec<T> = upts.iter().map(|u| wavelet.eval_real(u)).collect();
    let scale = two_pi_pow::<T>(local.ndim() as f64 / 2.0);
    let base = SpatialLattice::torus(local);
    let levels: Vec<Level<T>> = (0..hs.len())
        .into_par_iter()
        .map(|j| {
            let h = hs.element(j);
            let hinv = cone.h_inverse(&h);
            let amp = scale / cone.det_h(&h).sqrt();
            let spec: Vec<C<T>> = upts
                .iter()
                .zip(&psi)
                .map(|(u, &p)| if p == T::zero() { czero() } else { f.eval(&cone.adjoint_act(&hinv, u)) * p })
                .collect();
            let values = spectrum_to_spatial(local, &fft, &spec).into_iter().map(|v| v * amp).collect();
            let lattice = SpatialLattice {
                basis: cone.action_matrix(&h).mul(&base.basis),
                origin: vec![T::zero(); local.ndim()],
                shape: local.shape.clone(),
            };
            Level { h, weight: hs.weights[j], lattice, values }
        })
        .collect();
    Ok(CoefficientField { cone: cone.name(), levels })
}

/// Single voice value `W f(g)` with the discretisation of [`analyze_adapted`], by direct summation.
pub fn voice_at<T: Real, S: Spectrum<T> + ?Sized>(
    f: &S,
    wavelet: &WaveletSystem<T>,
    g: &GroupPoint<T>,
    local: &FreqGrid<T>,
) -> C<T> {
    let cone = &wavelet.cone;
    let hinv = cone.h_inverse(&g.h);
    let y = cone.act(&hinv, &g.x);
    let mut acc = czero();
    for i in 0..local.len() {
        let u = local.point(i);
        let p = wavelet.eval_real(&u);
        if p == T::zero() {
            continue;
        }
        acc = acc + f.eval(&cone.adjoint_act(&hinv, &u)) * cis(cone.inner(&y, &u)) * p;
    }
    acc * (local.cell_volume() / cone.det_h(&g.h).sqrt())
}

/// Weak-integral synthesis `int F(g) pi(g) psi dg` onto `out`.
pub fn synthesize<T: Real>(
    field: &CoefficientField<T>,
    wavelet: &WaveletSystem<T>,
    out: &FreqGrid<T>,
) -> Result<SampledSignal<T>> {
    check_dims(wavelet, out)?;
    let cone = &wavelet.cone;
    let n = out.ndim();
    let fft = NdFft::new(&out.shape);
    let pts = out.points();
    let norm = two_pi_pow::<T>(-(n as f64));
    let direct_work: usize = field
        .levels
        .iter()
        .filter(|l| !l.lattice.is_torus_of(out))
        .map(|l| l.values.len() * out.len())
        .sum();
    if direct_work > 2_000_000_000 {
        return Err(Error::Budget { what: "direct synthesis".into(), needed: direct_work, limit: 2_000_000_000 });
    }
    let parts: Vec<Vec<C<T>>> = field
        .levels
        .par_iter()
        .map(|l| {
            let dh = cone.det_h(&l.h);
            let coef = l.weight * norm / dh.sqrt();
            let lines: Vec<C<T>> = if l.lattice.is_torus_of(out) {
                let s = two_pi_pow::<T>(n as f64 / 2.0);
                spatial_to_spectrum(out, &fft, &l.values).into_iter().map(|v| v * s).collect()
            } else {
                let vol = l.lattice.cell_volume();
                let xs: Vec<Vec<T>> = (0..l.lattice.len()).map(|k| l.lattice.point(k)).collect();
                pts.iter()
                    .map(|w| {
                        xs.iter()
                            .zip(&l.values)
                            .fold(czero(), |s, (x, v)| s + v * cis(-cone.inner(x, w)))
                            * vol
                    })
                    .collect()
            };
            pts.iter()
                .zip(lines)
                .map(|(w, v)| {
                    let p = wavelet.eval_dilated(&l.h, w);
                    if p == T::zero() {
                        czero()
                    } else {
                        v * (p * coef)
                    }
                })
                .collect()
        })
        .collect();
    let mut values = vec![czero(); out.len()];
    for p in parts {
        for (a, b) in values.iter_mut().zip(p) {
            *a = *a + b;
        }
    }
    SampledSignal::new(out.clone(), values)
}

/// A function `K(h, x)` on `G` given by its spatial Fourier transform.
pub trait GroupKernel<T: Real>: Sync {
    /// `K^(h, v) = (2 pi)^(-n/2) int K(h, x) exp(-i <x, v>) dx`.
    fn x_spectrum(&self, h: &HElement<T>, v: &[T]) -> C<T>;

    /// The wavelet `psi` if this kernel is `W psi psi`.
    fn reproducing_wavelet(&self) -> Option<&WaveletSystem<T>> {
        None
    }
}

/// The reproducing kernel `W psi psi`.
pub struct ReproducingKernel<'a, T: Real> {
    pub wavelet: &'a WaveletSystem<T>,
}

impl<'a, T: Real> GroupKernel<T> for ReproducingKernel<'a, T> {
    fn x_spectrum(&self, h: &HElement<T>, v: &[T]) -> C<T> {
        let n = self.wavelet.cone.dim();
        let amp = two_pi_pow::<T>(n as f64 / 2.0) * self.wavelet.cone.det_h(h).sqrt();
        Complex::new(amp * self.wavelet.eval_real(v) * self.wavelet.eval_dilated(h, v), T::zero())
    }

    fn reproducing_wavelet(&self) -> Option<&WaveletSystem<T>> {
        Some(self.wavelet)
    }
}

fn torus_grid_of<T: Real>(field: &CoefficientField<T>, grid: &FreqGrid<T>) -> Result<()> {
    if field.levels.iter().all(|l| l.lattice.is_torus_of(grid)) {
        Ok(())
    } else {
        Err(Error::Unsupported("group convolution needs every level on the torus grid".into()))
    }
}

/// `(F * K)(g) = int F(g') K(g'^{-1} g) dg'` on the torus layout, at the levels `out`.
/// The spatial integral is exact for torus fields; the `H` integral uses the level weights of `F`.
pub fn group_convolve_at<T: Real>(
    cone: &ConeModel<T>,
    field: &CoefficientField<T>,
    kernel: &dyn GroupKernel<T>,
    grid: &FreqGrid<T>,
    out: &HSamples<T>,
) -> Result<CoefficientField<T>> {
    torus_grid_of(field, grid)?;
    let n = grid.ndim();
    let fft = NdFft::new(&grid.shape);
    let pts = grid.points();
    let lines: Vec<Vec<C<T>>> =
        field.levels.par_iter().map(|l| spatial_to_spectrum(grid, &fft, &l.values)).collect();
    let lattice = SpatialLattice::torus(grid);
    if let Some(wavelet) = kernel.reproducing_wavelet() {
        // K^(h_j^{-1} h1, h_j* w) factorises, so the sum over j is shared by all outputs.
        let shared: Vec<C<T>> = {
            let parts: Vec<Vec<C<T>>> = field
                .levels
                .par_iter()
                .zip(&lines)
                .map(|(l, li)| {
                    let c = l.weight / cone.det_h(&l.h).sqrt();
                    pts.iter()
                        .zip(li)
                        .map(|(w, v)| {
                            if *v == czero() {
                                return czero();
                            }
                            let p = wavelet.eval_dilated(&l.h, w);
                            v * (p * c)
                        })
                        .collect()
                })
                .collect();
            let mut acc = vec![czero(); grid.len()];
            for p in parts {
                for (a, b) in acc.iter_mut().zip(p) {
                    *a = *a + b;
                }
            }
            acc
        };
        let levels = (0..out.len())
            .into_par_iter()
            .map(|i| {
                let h1 = out.element(i);
                let amp = cone.det_h(&h1).sqrt();
                let spec: Vec<C<T>> = pts
                    .iter()
                    .zip(&shared)
                    .map(|(w, s)| if *s == czero() { czero() } else { s * (amp * wavelet.eval_dilated(&h1, w)) })
                    .collect();
                Level { h: h1, weight: out.weights[i], lattice: lattice.clone(), values: spectrum_to_spatial(grid, &fft, &spec) }
            })
            .collect();
        return Ok(CoefficientField { cone: field.cone.clone(), levels });
    }
    let c = two_pi_pow::<T>(-(n as f64) / 2.0);
    let levels = (0..out.len())
        .into_par_iter()
        .map(|i| {
            let h1 = out.element(i);
            let mut spec = vec![czero(); grid.len()];
            for (l, li) in field.levels.iter().zip(&lines) {
                let rel = cone.compose(&cone.h_inverse(&l.h), &h1);
                for (m, w) in pts.iter().enumerate() {
                    if li[m] == czero() {
                        continue;
                    }
                    let v = cone.adjoint_act(&l.h, w);
                    spec[m] = spec[m] + li[m] * kernel.x_spectrum(&rel, &v) * (l.weight * c);
                }
            }
            Level { h: h1, weight: out.weights[i], lattice: lattice.clone(), values: spectrum_to_spatial(grid, &fft, &spec) }
        })
        .collect();
    Ok(CoefficientField { cone: field.cone.clone(), levels })
}

/// [`group_convolve_at`] evaluated at the levels of `field`.
pub fn group_convolve<T: Real>(
    cone: &ConeModel<T>,
    field: &CoefficientField<T>,
    kernel: &dyn GroupKernel<T>,
    grid: &FreqGrid<T>,
) -> Result<CoefficientField<T>> {
    let hs = HSamples {
        thetas: field.h_samples(),
        weights: field.levels.iter().map(|l| l.weight).collect(),
        step: T::zero(),
    };
    group_convolve_at(cone, field, kernel, grid, &hs)
}

fn derivative_value<T: Real>(cone: &ConeModel<T>, x: &LieDirection<T>, w: &[T], f: C<T>, grad: &[C<T>]) -> C<T> {
    let hstar = cone.lie_matrix(&x.h_dir).transpose();
    let hw = hstar.mul_vec(w);
    let dir = hw.iter().zip(grad).fold(czero(), |s, (&a, g)| s + g * a);
    let half_tr = cone.lie_trace(&x.h_dir) * lit(0.5);
    let xi = cone.inner(&x.x_dir, w);
    f * half_tr + dir - f * Complex::new(T::zero(), xi)
}

/// Derivative of `t -> pi(exp(t X)) f` at 0 for a model spectrum with closed-form gradient:
/// `(H* w) . grad f^ - i <xi, w> f^ + tr(H)/2 f^`.
pub fn rep_derivative_model<T: Real, S: Spectrum<T> + ?Sized>(
    cone: &ConeModel<T>,
    x: &LieDirection<T>,
    f: &S,
    grid: &FreqGrid<T>,
) -> Result<SampledSignal<T>> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let w = grid.point(i);
        let grad = f.gradient(&w).ok_or_else(|| Error::Unsupported("spectrum has no closed-form gradient".into()))?;
        values.push(derivative_value(cone, x, &w, f.eval(&w), &grad));
    }
    SampledSignal::new(grid.clone(), values)
}

/// [`rep_derivative_model`] for a sampled spectrum, with the gradient taken spectrally.
pub fn rep_derivative<T: Real>(cone: &ConeModel<T>, x: &LieDirection<T>, f: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    if f.grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: f.grid.ndim() });
    }
    let fft = NdFft::new(&f.grid.shape);
    let grads = f.spectral_gradient(&fft);
    let values = (0..f.grid.len())
        .map(|i| {
            let g: Vec<C<T>> = grads.iter().map(|a| a[i]).collect();
            derivative_value(cone, x, &f.grid.point(i), f.values[i], &g)
        })
        .collect();
    SampledSignal::new(f.grid.clone(), values)
}
