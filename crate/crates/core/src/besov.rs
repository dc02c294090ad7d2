//! Cone lattices, frequency partitions of unity, and Besov norms in lattice
//! and group-integral form, plus mixed norms of coefficient fields.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeKind, ConeModel, HElement};
use crate::error::{Error, Result};
use crate::grid::{spectrum_to_spatial, FreqGrid, FrequencyField, NdFft, SampledSignal};
use crate::quadrature::product_nodes;
use crate::scalar::{lit, Real};
use crate::smooth;
use crate::transform::{CoefficientField, HSamples};
use crate::wavelet::{QuadratureReport, WaveletSystem};

/// Besov exponents. `p, q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl BesovParams {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self> {
        let b = BesovParams { p, q, s };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.q >= 1.0) || !self.p.is_finite() || !self.q.is_finite() || !self.s.is_finite() {
            return Err(Error::Config(format!("need finite p, q >= 1, got p={} q={}", self.p, self.q)));
        }
        Ok(())
    }

    /// `s' = s r / n - q / 2`.
    pub fn s_prime<T: Real>(&self, cone: &ConeModel<T>) -> f64 {
        self.s * cone.rank() as f64 / cone.dim() as f64 - self.q / 2.0
    }
}

/// Region of the cone a lattice has to cover: a metric ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeExtent {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// A `(delta, R)`-lattice: `B_delta(x_j)` disjoint, `B_{R delta}(x_j)` covering the extent.
#[derive(Debug, Clone)]
pub struct ConeLattice<T> {
    pub points: Vec<Vec<T>>,
    pub delta: T,
    pub big_r: T,
    /// Chart spacing per axis.
    pub spacing: Vec<T>,
    pub extent: LatticeExtent,
    pub min_distance: T,
}

fn chart_spacing<T: Real>(cone: &ConeModel<T>, delta: T, big_r: T) -> Vec<T> {
    match cone.kind() {
        ConeKind::Orthant(r) => {
            let cover = lit::<T>(1.9) * big_r * delta / lit::<T>(r as f64).sqrt();
            let s = (lit::<T>(2.5) * delta).min(cover).max(lit::<T>(2.0) * delta);
            vec![s; r]
        }
        ConeKind::Spd2 => {
            let k = delta / lit(0.5);
            vec![lit::<T>(0.55) * k, lit::<T>(0.8) * k, lit::<T>(0.55) * k]
        }
    }
}

/// Lattice coordinates to a cone point: orthant `exp(u)`, spd2 Cholesky factor
/// `[[e^u1, 0], [u2 e^u3, e^u3]]`.
fn lattice_point<T: Real>(cone: &ConeModel<T>, u: &[T]) -> Vec<T> {
    match cone.kind() {
        ConeKind::Orthant(_) => cone.chart_point(u),
        ConeKind::Spd2 => cone.chart_point(&[u[0], u[1] * u[2].exp(), u[2]]),
    }
}

fn ball_nodes<T: Real>(grid: &FreqGrid<T>, cone: &ConeModel<T>, center: &[T], radius: T) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| {
            let w = grid.point(i);
            cone.contains(&w) && cone.distance_unchecked(&w, center) <= radius
        })
        .collect()
}

/// Lattice points near the extent, verified on the in-cone nodes of `grid` inside the extent.
pub fn make_lattice<T: Real>(
    cone: &ConeModel<T>,
    delta: T,
    big_r: T,
    extent: &LatticeExtent,
    grid: &FreqGrid<T>,
) -> Result<ConeLattice<T>> {
    if !(delta > T::zero()) || !(big_r >= lit(2.0)) {
        return Err(Error::Config("lattice needs delta > 0 and R >= 2".into()));
    }
    if extent.center.len() != cone.dim() || grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: extent.center.len() });
    }
    let center: Vec<T> = extent.center.iter().map(|&v| lit(v)).collect();
    let radius: T = lit(extent.radius);
    let spacing = chart_spacing(cone, delta, big_r);
    let points: Vec<Vec<T>> = if extent.radius <= 0.0 {
        vec![center.clone()]
    } else {
        let reach = radius + big_r * delta;
        let (lo, hi) = cone.ball_chart_box(&cone.identity(), reach + lit(1.0));
        let mut axes = Vec::with_capacity(cone.dim());
        for a in 0..cone.dim() {
            let (l, h) = match cone.kind() {
                ConeKind::Spd2 if a == 1 => {
                    let m = hi[1].abs().max(lo[1].abs()) * (-lo[2]).exp();
                    (-m, m)
                }
                _ => (lo[a], hi[a]),
            };
            let k0 = (l / spacing[a]).floor().to_i64().unwrap_or(0);
            let k1 = (h / spacing[a]).ceil().to_i64().unwrap_or(0);
            axes.push((k0..=k1).map(|k| spacing[a] * lit(k as f64)).collect::<Vec<T>>());
        }
        let cl = cone.chart(&center)?;
        let e = cone.identity();
        // built around e, then moved to the centre by an isometry
        product_nodes(&axes)
            .into_iter()
            .map(|u| lattice_point(cone, &u))
            .filter(|p| cone.distance_unchecked(p, &e) < reach)
            .map(|p| cone.act(&cl, &p))
            .collect()
    };
    let min_distance = verify_lattice(cone, &points, delta, big_r, extent, grid)?;
    Ok(ConeLattice { points, delta, big_r, spacing, extent: extent.clone(), min_distance })
}

/// Checks that the `delta`-balls around `points` are disjoint and that the
/// `R delta`-balls cover every in-cone node of `grid` inside `extent`.
/// Returns the smallest pairwise distance.
pub fn verify_lattice<T: Real>(
    cone: &ConeModel<T>,
    points: &[Vec<T>],
    delta: T,
    big_r: T,
    extent: &LatticeExtent,
    grid: &FreqGrid<T>,
) -> Result<T> {
    let center: Vec<T> = extent.center.iter().map(|&v| lit(v)).collect();
    let radius: T = lit(extent.radius);
    let mut min_distance = T::infinity();
    for i in 0..points.len() {
        for j in 0..i {
            let d = cone.distance_unchecked(&points[i], &points[j]);
            if d < min_distance {
                min_distance = d;
            }
            if d < lit::<T>(2.0) * delta {
                return Err(Error::Lattice(format!(
                    "balls B_delta around points {j} and {i} overlap (distance {:.6})",
                    d.to_f64_lossy()
                )));
            }
        }
    }
    let cover = big_r * delta;
    for i in ball_nodes(grid, cone, &center, radius) {
        let w = grid.point(i);
        let best = points.iter().fold(T::infinity(), |m, p| m.min(cone.distance_unchecked(&w, p)));
        if best > cover {
            return Err(Error::Lattice(format!(
                "grid node {:?} is {:.4} from the lattice, covering radius {:.4}",
                w.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
                best.to_f64_lossy(),
                cover.to_f64_lossy()
            )));
        }
    }
    Ok(min_distance)
}

/// Smooth partition `{psi_j}` subordinate to a lattice.
#[derive(Debug, Clone)]
pub struct FrequencyPartition<T: Real> {
    pub lattice: ConeLattice<T>,
    pub grid: FreqGrid<T>,
    pub bands: Vec<FrequencyField<T>>,
    /// Width of the transition band of the plateau bumps.
    pub gamma: T,
}

/// `psi_j = p_j + (1 - sum p) c_j / sum c` with plateau bumps `p_j` (1 on
/// `B_delta(x_j)`, support `B_{delta+gamma}`) and cover bumps `c_j` of radius 3/2.
pub fn make_partition<T: Real>(
    cone: &ConeModel<T>,
    lattice: &ConeLattice<T>,
    grid: &FreqGrid<T>,
) -> Result<FrequencyPartition<T>> {
    if grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: grid.ndim() });
    }
    let delta = lattice.delta;
    let spread = if lattice.points.len() > 1 { lattice.min_distance } else { lit(10.0) };
    let gamma = lit::<T>(0.1).min((spread - lit::<T>(2.0) * delta) * lit(0.45));
    if !(gamma > T::zero()) {
        return Err(Error::Lattice("points too close for a plateau partition".into()));
    }
    let cover_r: T = lit(1.5);
    let center: Vec<T> = lattice.extent.center.iter().map(|&v| lit(v)).collect();
    let (ilo, ihi) = cone.ball_bounding_box(&center, delta);
    for a in 0..grid.ndim() {
        if (ihi[a] - ilo[a]) / grid.spacing[a] < lit(4.0) {
            return Err(Error::Grid("grid too coarse to resolve B_delta".into()));
        }
    }
    let m = lattice.points.len();
    let rows: Vec<Vec<T>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let w = grid.point(i);
            let mut out = vec![T::zero(); m];
            if !cone.contains(&w) {
                return out;
            }
            let d: Vec<T> = lattice.points.iter().map(|x| cone.distance_unchecked(&w, x)).collect();
            let p: Vec<T> = d.iter().map(|&dj| smooth::plateau(dj, delta, delta + gamma, T::one())).collect();
            let c: Vec<T> = d.iter().map(|&dj| smooth::step(dj / cover_r, T::one())).collect();
            let sp = p.iter().fold(T::zero(), |s, &v| s + v);
            let sc = c.iter().fold(T::zero(), |s, &v| s + v);
            let rest = (T::one() - sp).max(T::zero());
            for j in 0..m {
                out[j] = if sc > T::zero() { p[j] + rest * c[j] / sc } else { p[j] };
            }
            out
        })
        .collect();
    let bands = (0..m)
        .map(|j| FrequencyField { grid: grid.clone(), values: rows.iter().map(|r| r[j]).collect() })
        .collect();
    let part = FrequencyPartition { lattice: lattice.clone(), grid: grid.clone(), bands, gamma };
    let radius: T = lit(lattice.extent.radius);
    for i in ball_nodes(grid, cone, &center, radius) {
        let s = part.sum_at(i);
        if (s - T::one()).abs() > lit(1e-10) {
            return Err(Error::Uncovered { fraction: (T::one() - s).abs().to_f64_lossy() });
        }
    }
    Ok(part)
}

impl<T: Real> FrequencyPartition<T> {
    /// `sum_j psi_j` at grid node `i`.
    pub fn sum_at(&self, i: usize) -> T {
        self.bands.iter().fold(T::zero(), |s, b| s + b.values[i])
    }
}

fn lp_norm<T: Real>(values: &[Complex<T>], p: f64, cell: T) -> T {
    let pp: T = lit(p);
    let s = values.iter().fold(T::zero(), |s, v| s + v.norm().powf(pp));
    (s * cell).powf(T::one() / pp)
}

/// `(sum_j Delta(x_j)^{-s} ||F^{-1}(f^ psi_j)||_p^q)^{1/q}`.
pub fn norm_discrete<T: Real>(
    f: &SampledSignal<T>,
    part: &FrequencyPartition<T>,
    params: &BesovParams,
    cone: &ConeModel<T>,
) -> Result<T> {
    params.validate()?;
    if f.grid != part.grid {
        return Err(Error::Grid("signal and partition grids differ".into()));
    }
    let total: T = f.values.iter().fold(T::zero(), |s, v| s + v.norm_sqr());
    if total == T::zero() {
        return Ok(T::zero());
    }
    let missing = (0..f.grid.len()).fold(T::zero(), |s, i| {
        let c = part.sum_at(i);
        if (c - T::one()).abs() > lit(1e-8) {
            s + f.values[i].norm_sqr()
        } else {
            s
        }
    });
    let frac = (missing / total).to_f64_lossy();
    if frac > 1e-10 {
        return Err(Error::Uncovered { fraction: frac });
    }
    let fft = NdFft::new(&f.grid.shape);
    let cell = f.grid.spatial_cell_volume();
    let terms: Vec<T> = part
        .bands
        .par_iter()
        .zip(&part.lattice.points)
        .map(|(b, x)| {
            if b.values.iter().zip(&f.values).all(|(&m, v)| m == T::zero() || v.norm_sqr() == T::zero()) {
                return T::zero();
            }
            let spec: Vec<Complex<T>> = f.values.iter().zip(&b.values).map(|(v, &m)| v * m).collect();
            let x_vals = spectrum_to_spatial(&f.grid, &fft, &spec);
            let det = cone.determinant(x).unwrap_or(T::one());
            det.powf(lit(-params.s)) * lp_norm(&x_vals, params.p, cell).powf(lit(params.q))
        })
        .collect();
    let sum = terms.into_iter().fold(T::zero(), |s, t| s + t);
    Ok(sum.powf(lit(1.0 / params.q)))
}

/// A Besov value with its quadrature history.
#[derive(Debug, Clone, Serialize)]
pub struct BesovRecord {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub s_prime: f64,
    pub value: f64,
    /// Chart step of the final quadrature.
    pub step: f64,
    pub quadrature_report: QuadratureReport,
}

/// Every chart lattice node `h` with `h e` within 2 of the support of `f`, found
/// through an enclosing metric ball of the support.
pub fn continuous_nodes<T: Real>(f: &SampledSignal<T>, wavelet: &WaveletSystem<T>, step: T) -> Result<HSamples<T>> {
    let cone = &wavelet.cone;
    let n = cone.dim();
    let support: Vec<Vec<T>> = (0..f.grid.len())
        .filter(|&i| f.values[i].norm_sqr() > T::zero())
        .map(|i| f.grid.point(i))
        .collect();
    if support.is_empty() {
        return Ok(HSamples { thetas: vec![], weights: vec![], step });
    }
    if support.iter().any(|w| !cone.contains(w)) {
        return Err(Error::NotInCone);
    }
    let mut c = vec![T::zero(); n];
    for w in &support {
        for a in 0..n {
            c[a] = c[a] + w[a];
        }
    }
    let count = T::from_usize_lossy(support.len());
    let c: Vec<T> = c.into_iter().map(|v| v / count).collect();
    let radius = support.iter().fold(T::zero(), |m, w| m.max(cone.distance_unchecked(w, &c)));
    let reach = radius + lit(crate::wavelet::OUTER_RADIUS);
    let (lo, hi) = cone.ball_chart_box(&c, reach);
    HSamples::lattice(cone, step, &lo, &hi, |t| cone.distance_unchecked(&cone.chart_point(t), &c) < reach, 50_000_000)
}

/// Per-level data of the group-integral norm: Haar weight, `det h` and
/// `||F^{-1}(f^ psi^(h^{-1} .))||_p` for each requested `p`.
#[derive(Debug, Clone)]
pub struct ContinuousBands<T> {
    pub ps: Vec<f64>,
    pub weights: Vec<T>,
    pub dets: Vec<T>,
    pub norms: Vec<Vec<T>>,
}

pub fn continuous_bands<T: Real>(
    f: &SampledSignal<T>,
    wavelet: &WaveletSystem<T>,
    hs: &HSamples<T>,
    ps: &[f64],
) -> ContinuousBands<T> {
    let cone = &wavelet.cone;
    let fft = NdFft::new(&f.grid.shape);
    let cell = f.grid.spatial_cell_volume();
    let support: Vec<(usize, Vec<T>)> = (0..f.grid.len())
        .filter(|&i| f.values[i].norm_sqr() > T::zero())
        .map(|i| (i, f.grid.point(i)))
        .collect();
    let rows: Vec<Option<(T, T, Vec<T>)>> = (0..hs.len())
        .into_par_iter()
        .map(|j| {
            let h = hs.element(j);
            let hinv = cone.h_inverse(&h);
            let mut spec = vec![Complex::new(T::zero(), T::zero()); f.grid.len()];
            let mut hit = false;
            for (i, w) in &support {
                let m = wavelet.eval_real(&cone.act(&hinv, w));
                if m != T::zero() {
                    hit = true;
                    spec[*i] = f.values[*i] * m;
                }
            }
            if !hit {
                return None;
            }
            let x_vals = spectrum_to_spatial(&f.grid, &fft, &spec);
            Some((hs.weights[j], cone.det_h(&h), ps.iter().map(|&p| lp_norm(&x_vals, p, cell)).collect()))
        })
        .collect();
    let mut out = ContinuousBands { ps: ps.to_vec(), weights: vec![], dets: vec![], norms: vec![] };
    for (w, d, n) in rows.into_iter().flatten() {
        out.weights.push(w);
        out.dets.push(d);
        out.norms.push(n);
    }
    out
}

impl<T: Real> ContinuousBands<T> {
    /// `(sum_h w_h ||.||_p^q Det(h)^{-s r/n})^{1/q}`.
    pub fn value(&self, params: &BesovParams, rank: usize, dim: usize) -> Result<T> {
        let k = self
            .ps
            .iter()
            .position(|&p| p == params.p)
            .ok_or_else(|| Error::Config(format!("p = {} was not computed", params.p)))?;
        let expo: T = lit(-params.s * rank as f64 / dim as f64);
        let q: T = lit(params.q);
        let sum = (0..self.weights.len()).fold(T::zero(), |acc, j| {
            acc + self.weights[j] * self.dets[j].powf(expo) * self.norms[j][k].powf(q)
        });
        Ok(sum.powf(T::one() / q))
    }
}

/// Group-integral norms for several exponent sets at once. The chart step
/// starts at `first_step` and halves until every value changes by less than `tol`.
pub fn norm_continuous_multi<T: Real>(
    f: &SampledSignal<T>,
    wavelet: &WaveletSystem<T>,
    params: &[BesovParams],
    first_step: T,
    tol: f64,
    max_levels: usize,
) -> Result<Vec<BesovRecord>> {
    for b in params {
        b.validate()?;
    }
    let cone = &wavelet.cone;
    if f.grid.ndim() != cone.dim() {
        return Err(Error::Dimension { expected: cone.dim(), got: f.grid.ndim() });
    }
    let mut ps: Vec<f64> = params.iter().map(|b| b.p).collect();
    ps.sort_by(|a, b| a.partial_cmp(b).expect("finite p"));
    ps.dedup();
    let mut reports: Vec<QuadratureReport> = params
        .iter()
        .map(|_| QuadratureReport { steps: vec![], values: vec![], last_relative_change: f64::INFINITY })
        .collect();
    let mut step = first_step;
    let mut prev: Option<Vec<T>> = None;
    loop {
        let hs = continuous_nodes(f, wavelet, step)?;
        if hs.len() > max_levels {
            let worst = reports.iter().fold(0.0f64, |m, r| m.max(r.last_relative_change));
            return Err(Error::Quadrature(format!(
                "H quadrature needs {} levels at step {:.4}, budget {max_levels}; last change {worst:.3e}",
                hs.len(),
                step.to_f64_lossy()
            )));
        }
        let bands = continuous_bands(f, wavelet, &hs, &ps);
        let values: Vec<T> =
            params.iter().map(|b| bands.value(b, cone.rank(), cone.dim())).collect::<Result<_>>()?;
        let mut done = true;
        for (k, v) in values.iter().enumerate() {
            reports[k].steps.push(step.to_f64_lossy());
            reports[k].values.push(v.to_f64_lossy());
            let change = match &prev {
                Some(p) if *v != T::zero() => ((*v - p[k]) / *v).abs().to_f64_lossy(),
                Some(_) => 0.0,
                None if *v == T::zero() => 0.0,
                None => f64::INFINITY,
            };
            reports[k].last_relative_change = change;
            if !(change < tol) {
                done = false;
            }
        }
        if done {
            return Ok(params
                .iter()
                .zip(values)
                .zip(reports)
                .map(|((b, v), r)| BesovRecord {
                    p: b.p,
                    q: b.q,
                    s: b.s,
                    s_prime: b.s_prime(cone),
                    value: v.to_f64_lossy(),
                    step: step.to_f64_lossy(),
                    quadrature_report: r,
                })
                .collect());
        }
        prev = Some(values);
        step = step / lit(2.0);
    }
}

/// `(int_H ||f * psi_h||_p^q Det(h)^{-s r/n} dh)^{1/q}` with `psi_h^(w) = psi^(h^{-1} w)`.
pub fn norm_continuous<T: Real>(
    f: &SampledSignal<T>,
    wavelet: &WaveletSystem<T>,
    params: &BesovParams,
    first_step: T,
    tol: f64,
    max_levels: usize,
) -> Result<BesovRecord> {
    norm_continuous_multi(f, wavelet, std::slice::from_ref(params), first_step, tol, max_levels)
        .map(|mut v| v.remove(0))
}

/// `(sum_j w_j (int |F(h_j, x)|^p dx)^{q/p} det(h_j)^s)^{1/q}`.
pub fn mixed_norm<T: Real>(field: &CoefficientField<T>, cone: &ConeModel<T>, p: f64, q: f64, s: f64) -> Result<T> {
    BesovParams::new(p, q, s)?;
    let mut sum = T::zero();
    for l in &field.levels {
        if !(l.weight > T::zero()) {
            return Err(Error::Config("coefficient level without a positive weight".into()));
        }
        let inner = lp_norm(&l.values, p, l.lattice.cell_volume());
        sum = sum + l.weight * inner.powf(lit(q)) * cone.det_h(&l.h).powf(lit(s));
    }
    Ok(sum.powf(lit(1.0 / q)))
}

/// Factor picked up by [`mixed_norm`] under left translation by `(h0, x0)`.
pub fn left_translation_factor<T: Real>(cone: &ConeModel<T>, h0: &HElement<T>, p: f64, q: f64, s: f64) -> T {
    cone.det_h(h0).powf(lit(1.0 / p + s / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_prime_relation() {
        let c = ConeModel::<f64>::spd2().unwrap();
        let b = BesovParams::new(2.0, 1.0, 1.5).unwrap();
        assert_eq!(b.s_prime(&c), 1.5 * 2.0 / 3.0 - 0.5);
        assert!(BesovParams::new(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn orthant_one_lattice_is_log_spaced() {
        let c = ConeModel::<f64>::orthant(1).unwrap();
        let g = FreqGrid::covering(&[0.5], &[8.0], &[256]).unwrap();
        let ext = LatticeExtent { center: vec![2.0], radius: 1.0 };
        let l = make_lattice(&c, 0.5, 2.0, &ext, &g).unwrap();
        let mut t: Vec<f64> = l.points.iter().map(|p| p[0].ln()).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 1.25).abs() < 1e-12);
        }
        assert!(l.min_distance >= 1.0);
    }

    #[test]
    fn single_point_lattice() {
        let c = ConeModel::<f64>::orthant(2).unwrap();
        let g = FreqGrid::covering(&[0.5, 0.5], &[3.0, 3.0], &[32, 32]).unwrap();
        let ext = LatticeExtent { center: vec![1.0, 1.0], radius: 0.0 };
        let l = make_lattice(&c, 0.5, 2.0, &ext, &g).unwrap();
        assert_eq!(l.points, vec![vec![1.0, 1.0]]);
    }
}
