//! Brute-force references: test signals, the classical 1-D Besov integral,
//! direct group convolution and the inversion constant of the Haar measure.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeModel, HElement};
use crate::error::{Error, Result};
use crate::grid::{FreqGrid, SampledSignal, Spectrum};
use crate::scalar::{lit, Real};
use crate::smooth;
use crate::transform::{CoefficientField, GroupKernel, HSamples, Level, SpatialLattice};

/// Recipe for a random band-limited signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSignalSpec {
    pub seed: u64,
    pub bumps: usize,
    /// Centre of the frequency region, orthonormal coordinates.
    pub center: Vec<f64>,
    /// Metric radius of the frequency region.
    pub radius: f64,
    /// Minimal Euclidean distance between the region and the cone boundary.
    pub margin: f64,
    pub amplitude: (f64, f64),
    /// Spatial shifts are drawn from `[-max_shift, max_shift]^n`.
    pub max_shift: f64,
}

impl TestSignalSpec {
    pub fn new(seed: u64, bumps: usize, center: Vec<f64>, radius: f64) -> Self {
        TestSignalSpec { seed, bumps, center, radius, margin: 0.05, amplitude: (0.5, 1.5), max_shift: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump<T> {
    pub amplitude: Complex<T>,
    pub shift: Vec<T>,
    pub center: Vec<T>,
    pub radius: T,
}

/// `f^(w) = sum_b A_b exp(-i <tau_b, w>) step(d(w, c_b) / r_b)`.
#[derive(Debug, Clone)]
pub struct TestSignal<T: Real> {
    pub cone: ConeModel<T>,
    pub bumps: Vec<Bump<T>>,
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> TestSignal<T> {
    pub fn generate(cone: &ConeModel<T>, spec: &TestSignalSpec) -> Result<Self> {
        let n = cone.dim();
        if spec.center.len() != n {
            return Err(Error::Dimension { expected: n, got: spec.center.len() });
        }
        if !(spec.radius > 0.0) || spec.bumps == 0 {
            return Err(Error::Config("test signal needs a positive radius and at least one bump".into()));
        }
        if spec.amplitude.0 > spec.amplitude.1 || spec.max_shift < 0.0 {
            return Err(Error::Config("bad amplitude range or shift".into()));
        }
        let center: Vec<T> = spec.center.iter().map(|&v| lit(v)).collect();
        if !cone.contains(&center) {
            return Err(Error::NotInCone);
        }
        let radius: T = lit(spec.radius);
        let clearance = cone.boundary_distance(&center) * (-radius).exp();
        if clearance < lit(spec.margin) {
            return Err(Error::Config(format!(
                "frequency region is within {:.3e} of the cone boundary, margin {}",
                clearance.to_f64_lossy(),
                spec.margin
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let half = radius * lit(0.5);
        let (lo, hi) = cone.ball_bounding_box(&center, half);
        let mut bumps = Vec::with_capacity(spec.bumps);
        while bumps.len() < spec.bumps {
            let c: Vec<T> = lo.iter().zip(&hi).map(|(&a, &b)| a + (b - a) * lit(rng.gen::<f64>())).collect();
            if !cone.contains(&c) {
                continue;
            }
            let d = cone.distance_unchecked(&c, &center);
            if d >= half {
                continue;
            }
            let r = (radius - d) * lit(rng.gen_range(0.6..1.0));
            let amp = rng.gen_range(spec.amplitude.0..=spec.amplitude.1);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let shift = (0..n).map(|_| lit(rng.gen_range(-spec.max_shift..=spec.max_shift))).collect();
            bumps.push(Bump {
                amplitude: Complex::new(lit(amp * phase.cos()), lit(amp * phase.sin())),
                shift,
                center: c,
                radius: r,
            });
        }
        Ok(TestSignal { cone: cone.clone(), bumps, center, radius })
    }

    /// Whether `w` lies in the closed support region.
    pub fn region_contains(&self, w: &[T]) -> bool {
        self.cone.contains(w) && self.cone.distance_unchecked(w, &self.center) <= self.radius
    }
}

impl<T: Real> Spectrum<T> for TestSignal<T> {
    fn dim(&self) -> usize {
        self.cone.dim()
    }

    fn eval(&self, w: &[T]) -> Complex<T> {
        if !self.cone.contains(w) {
            return Complex::new(T::zero(), T::zero());
        }
        self.bumps.iter().fold(Complex::new(T::zero(), T::zero()), |s, b| {
            let d = self.cone.distance_unchecked(w, &b.center);
            if d >= b.radius {
                return s;
            }
            let ph = -self.cone.inner(&b.shift, w);
            s + b.amplitude * Complex::new(ph.cos(), ph.sin()) * smooth::step(d / b.radius, T::one())
        })
    }

    fn gradient(&self, w: &[T]) -> Option<Vec<Complex<T>>> {
        let n = self.dim();
        let mut g = vec![Complex::new(T::zero(), T::zero()); n];
        if !self.cone.contains(w) {
            return Some(g);
        }
        for b in &self.bumps {
            let d = self.cone.distance_unchecked(w, &b.center);
            if d >= b.radius {
                continue;
            }
            let ph = -self.cone.inner(&b.shift, w);
            let a = b.amplitude * Complex::new(ph.cos(), ph.sin());
            let s = smooth::step(d / b.radius, T::one());
            let ds = smooth::step_derivative(d / b.radius, T::one()) / b.radius;
            let dd = self.cone.distance_gradient(w, &b.center);
            for i in 0..n {
                g[i] = g[i] + a * Complex::new(ds * dd[i], -s * b.shift[i]);
            }
        }
        Some(g)
    }
}

/// Sample a test signal on `grid`; the grid box must contain the support region.
pub fn make_test_signal<T: Real>(
    cone: &ConeModel<T>,
    spec: &TestSignalSpec,
    grid: &FreqGrid<T>,
) -> Result<(TestSignal<T>, SampledSignal<T>)> {
    if grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: grid.ndim() });
    }
    let sig = TestSignal::generate(cone, spec)?;
    let (lo, hi) = cone.ball_bounding_box(&sig.center, sig.radius);
    if !grid.contains_box(&lo, &hi) {
        return Err(Error::Grid("test signal region leaves the grid box".into()));
    }
    let sampled = SampledSignal::sample(&sig, grid)?;
    Ok((sig, sampled))
}

/// `(int_0^inf ||F^{-1}(f^ psi^(./a))||_p^q a^{-s} da/a)^{1/q}` on the nodes
/// `a = exp(theta)`, each weighted by `step`, with a direct DFT on the dual grid.
pub fn classical_besov_1d(
    f: &SampledSignal<f64>,
    psi: impl Fn(f64) -> f64,
    p: f64,
    q: f64,
    s: f64,
    thetas: &[f64],
    step: f64,
) -> Result<f64> {
    if f.grid.ndim() != 1 {
        return Err(Error::Dimension { expected: 1, got: f.grid.ndim() });
    }
    let n = f.grid.shape[0];
    let dw = f.grid.spacing[0];
    let w: Vec<f64> = (0..n).map(|k| f.grid.point(k)[0]).collect();
    let dx = std::f64::consts::TAU / (n as f64 * dw);
    let c = dw / std::f64::consts::TAU.sqrt();
    let mut total = 0.0;
    for &t in thetas {
        let a = t.exp();
        let band: Vec<(f64, Complex<f64>)> = w
            .iter()
            .zip(&f.values)
            .filter_map(|(&wk, &v)| {
                let m = psi(wk / a);
                if m == 0.0 || v == Complex::new(0.0, 0.0) {
                    None
                } else {
                    Some((wk, v * m))
                }
            })
            .collect();
        if band.is_empty() {
            continue;
        }
        let mut lp = 0.0;
        for m in 0..n {
            let x = m as f64 * dx;
            let v: Complex<f64> = band.iter().map(|&(wk, b)| b * Complex::from_polar(1.0, x * wk)).sum();
            lp += (v * c).norm().powf(p);
        }
        let norm_p = (lp * dx).powf(1.0 / p);
        total += norm_p.powf(q) * a.powf(-s) * step;
    }
    Ok(total.powf(1.0 / q))
}

/// Periodised band-limited kernel `z -> K(h', h_j^{-1} z)` on the torus of `grid`.
fn periodised_kernel(
    cone: &ConeModel<f64>,
    kernel: &dyn GroupKernel<f64>,
    rel: &HElement<f64>,
    hj: &HElement<f64>,
    grid: &FreqGrid<f64>,
) -> Vec<Complex<f64>> {
    let n = grid.ndim();
    let lat = SpatialLattice::torus(grid);
    let det = cone.det_h(hj);
    let c = grid.cell_volume() * det / std::f64::consts::TAU.powf(n as f64 / 2.0);
    let spec: Vec<(Vec<f64>, Complex<f64>)> = (0..grid.len())
        .map(|m| {
            let w = grid.point(m);
            let k = kernel.x_spectrum(rel, &cone.adjoint_act(hj, &w));
            (w, k)
        })
        .filter(|(_, k)| *k != Complex::new(0.0, 0.0))
        .collect();
    (0..lat.len())
        .map(|i| {
            let z = lat.point(i);
            spec.iter().map(|(w, k)| k * Complex::from_polar(1.0, cone.inner(&z, w))).sum::<Complex<f64>>() * c
        })
        .collect()
}

/// `(F * K)(h1, x) = sum_j w_j / ((2 pi)^n det h_j) sum_y dy F(h_j, y) K(h_j^{-1} h1, h_j^{-1}(x - y))`
/// by direct double sums over a torus field. At most 1000 samples per field.
pub fn bruteforce_group_convolution(
    cone: &ConeModel<f64>,
    field: &CoefficientField<f64>,
    kernel: &dyn GroupKernel<f64>,
    grid: &FreqGrid<f64>,
    out: &HSamples<f64>,
) -> Result<CoefficientField<f64>> {
    let lat = SpatialLattice::torus(grid);
    let samples: usize = field.levels.iter().map(|l| l.values.len()).sum();
    let out_samples = out.len() * lat.len();
    if samples > 1000 || out_samples > 1000 {
        return Err(Error::Budget { what: "brute-force convolution".into(), needed: samples.max(out_samples), limit: 1000 });
    }
    if field.levels.iter().any(|l| !l.lattice.is_torus_of(grid)) {
        return Err(Error::Unsupported("brute-force convolution needs torus levels".into()));
    }
    let n = grid.ndim();
    let dy = grid.spatial_cell_volume();
    let shape = &grid.shape;
    let mut levels = Vec::with_capacity(out.len());
    for i in 0..out.len() {
        let h1 = out.element(i);
        let mut vals = vec![Complex::new(0.0, 0.0); lat.len()];
        for l in &field.levels {
            let rel = cone.compose(&cone.h_inverse(&l.h), &h1);
            let kz = periodised_kernel(cone, kernel, &rel, &l.h, grid);
            let c = l.weight * dy / (std::f64::consts::TAU.powi(n as i32) * cone.det_h(&l.h));
            for (xi, v) in vals.iter_mut().enumerate() {
                let xm = grid.multi_index(xi);
                let mut acc = Complex::new(0.0, 0.0);
                for (yi, fy) in l.values.iter().enumerate() {
                    let ym = grid.multi_index(yi);
                    let zm: Vec<usize> = (0..n).map(|a| (xm[a] + shape[a] - ym[a]) % shape[a]).collect();
                    acc += fy * kz[grid.flat_index(&zm)];
                }
                *v += acc * c;
            }
        }
        levels.push(Level { h: h1, weight: out.weights[i], lattice: lat.clone(), values: vals });
    }
    Ok(CoefficientField { cone: field.cone.clone(), levels })
}

/// Ratios `int F(h) dh / int F((h*)^{-1}) dh` for each test function, where
/// `(h*)^{-1}` is identified with `(h e)^{-1}` in the cone. Returns the mean
/// ratio and the individual values; fails if they spread by more than 1e-3.
pub fn newhaar_constant(
    cone: &ConeModel<f64>,
    tests: &[&dyn Fn(&[f64]) -> f64],
    half_width: f64,
) -> Result<(f64, Vec<f64>)> {
    if tests.len() < 3 {
        return Err(Error::Config("need at least three test functions".into()));
    }
    let inv = |t: &[f64]| -> Vec<f64> {
        let x = cone.chart_point(t);
        let xi = cone.jordan_inverse(&x).expect("chart point lies in the cone");
        cone.chart(&xi).expect("inverse lies in the cone").theta
    };
    let mut ratios = Vec::with_capacity(tests.len());
    for f in tests {
        let direct = lattice_integral(cone, |t| f(t), half_width)?;
        let inverted = lattice_integral(cone, |t| f(&inv(t)), half_width)?;
        if inverted == 0.0 {
            return Err(Error::Quadrature("test function integrates to zero".into()));
        }
        ratios.push(direct / inverted);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().fold(0.0f64, |m, r| m.max((r - mean).abs())) / mean.abs();
    if spread > 1e-3 {
        return Err(Error::Quadrature(format!("inversion ratios spread by {spread:.3e}")));
    }
    Ok((mean, ratios))
}

/// Riemann sum of `f` against Haar measure over `[-half_width, half_width]^n`,
/// halving the chart step until the change drops below `1e-10` (`1e-5` in three
/// dimensions). When the next halving would exceed the node budget the last value
/// is accepted if its change is below `1e-4`.
fn lattice_integral(cone: &ConeModel<f64>, f: impl Fn(&[f64]) -> f64, half_width: f64) -> Result<f64> {
    const BUDGET: usize = 30_000_000;
    let n = cone.dim();
    let tol = if n <= 2 { 1e-10 } else { 1e-5 };
    let nodes = |step: f64| (2 * (half_width / step).floor() as usize + 1).pow(n as u32);
    let mut step = 0.2;
    let mut prev: Option<f64> = None;
    loop {
        let m = (half_width / step).floor() as i64;
        let total_nodes = nodes(step);
        if total_nodes > BUDGET {
            return Err(Error::Budget { what: "Haar lattice".into(), needed: total_nodes, limit: BUDGET });
        }
        let mut sum = 0.0;
        let mut idx = vec![-m; n];
        for _ in 0..total_nodes {
            let t: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
            let v = f(&t);
            if v != 0.0 {
                sum += v * cone.haar_weight(&t);
            }
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] <= m {
                    break;
                }
                idx[a] = -m;
            }
        }
        let value = sum * step.powi(n as i32);
        if let Some(p) = prev {
            let change = (value - p).abs() / value.abs().max(1e-300);
            if change <= tol || (nodes(step / 2.0) > BUDGET && change <= 1e-4) {
                return Ok(value);
            }
        }
        prev = Some(value);
        step /= 2.0;
    }
}
/// Smooth compactly supported test function on `H`: a bump of radius `r` around `c` in chart coordinates.
pub fn chart_bump(c: Vec<f64>, r: f64) -> impl Fn(&[f64]) -> f64 {
    move |t: &[f64]| {
        let d = t.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        smooth::step(d / r, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_is_deterministic() {
        let c = ConeModel::<f64>::orthant(2).unwrap();
        let spec = TestSignalSpec::new(7, 3, vec![2.0, 2.0], 0.6);
        let a = TestSignal::generate(&c, &spec).unwrap();
        let b = TestSignal::generate(&c, &spec).unwrap();
        assert_eq!(a.bumps, b.bumps);
        let other = TestSignal::generate(&c, &TestSignalSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.bumps, other.bumps);
    }

    #[test]
    fn margin_violation_rejected() {
        let c = ConeModel::<f64>::orthant(1).unwrap();
        let spec = TestSignalSpec { margin: 0.5, ..TestSignalSpec::new(1, 1, vec![0.6], 0.5) };
        assert!(matches!(TestSignal::generate(&c, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn signal_gradient_matches_difference() {
        let c = ConeModel::<f64>::spd2().unwrap();
        let spec = TestSignalSpec::new(3, 2, vec![2.0, 0.3, 2.0], 0.5);
        let s = TestSignal::generate(&c, &spec).unwrap();
        let p = s.bumps[0].center.iter().map(|v| v + 0.05).collect::<Vec<_>>();
        let g = s.gradient(&p).unwrap();
        for i in 0..3 {
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (s.eval(&a) - s.eval(&b)) / 2e-6;
            assert!((fd - g[i]).norm() < 1e-6, "{fd} {}", g[i]);
        }
    }

    #[test]
    fn orthant_inversion_constant_is_one() {
        let c = ConeModel::<f64>::orthant(2).unwrap();
        let f1 = chart_bump(vec![0.3, -0.2], 0.8);
        let f2 = chart_bump(vec![-0.5, 0.1], 0.6);
        let f3 = chart_bump(vec![0.0, 0.7], 1.0);
        let (m, _) = newhaar_constant(&c, &[&f1, &f2, &f3], 2.5).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }
}

/// One level of sample data for [`rasterized_sequence_norm`].
pub struct RasterLevel<'a> {
    /// Integer chart index; the level sits at `epsilon * index`.
    pub index: Vec<i64>,
    /// Samples per axis over one period.
    pub counts: Vec<usize>,
    pub values: &'a [Complex<f64>],
}

/// `|| sum_i |lambda_i| 1_{g_i U} ||_{L^{p,q}_s}` with `U` the tiling box (chart cell of
/// side `epsilon` times one spatial sample cell), evaluated on a raster with `sub`
/// chart nodes per cell side and `fine` spatial nodes per period axis.
#[allow(clippy::too_many_arguments)]
pub fn rasterized_sequence_norm(
    cone: &ConeModel<f64>,
    levels: &[RasterLevel<'_>],
    epsilon: f64,
    period: &[f64],
    fine: usize,
    sub: usize,
    p: f64,
    q: f64,
    s: f64,
) -> Result<f64> {
    let n = cone.dim();
    if levels.is_empty() || period.len() != n || fine == 0 || sub == 0 {
        return Err(Error::Config("empty raster".into()));
    }
    if levels.iter().any(|l| l.counts.iter().any(|&c| fine % c != 0)) {
        return Err(Error::Config("raster must refine every sample cell".into()));
    }
    let by_index: std::collections::HashMap<Vec<i64>, usize> =
        levels.iter().enumerate().map(|(j, l)| (l.index.clone(), j)).collect();
    let (mut lo, mut hi) = (vec![i64::MAX; n], vec![i64::MIN; n]);
    for l in levels {
        for a in 0..n {
            lo[a] = lo[a].min(l.index[a]);
            hi[a] = hi[a].max(l.index[a]);
        }
    }
    let dt = epsilon / sub as f64;
    let dx: f64 = period.iter().map(|p| p / fine as f64).product();
    let axis_len: Vec<usize> = (0..n).map(|a| (hi[a] - lo[a] + 1) as usize * sub).collect();
    let total: usize = axis_len.iter().product();
    let spatial = fine.pow(n as u32);
    let mut sum = 0.0;
    for t in 0..total {
        let mut rest = t;
        let mut theta = vec![0.0; n];
        for a in (0..n).rev() {
            let i = rest % axis_len[a];
            rest /= axis_len[a];
            theta[a] = lo[a] as f64 * epsilon - epsilon / 2.0 + (i as f64 + 0.5) * dt;
        }
        let key: Vec<i64> = theta.iter().map(|v| (v / epsilon).round() as i64).collect();
        let Some(&j) = by_index.get(&key) else { continue };
        let l = &levels[j];
        let mut inner = 0.0;
        for x in 0..spatial {
            let mut rest = x;
            let mut k = 0usize;
            let mut stride = 1usize;
            for a in (0..n).rev() {
                let m = rest % fine;
                rest /= fine;
                // node m lies in the cell of sample round(m N / fine)
                let c = l.counts[a];
                let ka = ((m * c) as f64 / fine as f64).round() as usize % c;
                k += ka * stride;
                stride *= c;
            }
            inner += l.values[k].norm().powf(p);
        }
        inner *= dx;
        let det = cone.det_h(&HElement::new(theta.clone()));
        sum += cone.haar_weight(&theta) * dt.powi(n as i32) * det.powf(s) * inner.powf(q / p);
    }
    Ok(sum.powf(1.0 / q))
}
