//! Discrete frames on orthant cones: well-spread sets, bounded partitions of
//! unity, the discretisation operators `T1`, `T2` and iterative reconstruction.
//!
//! Sampling sets live on the torus of a signal grid. Level `j` sits at the chart
//! node `epsilon * index_j` and carries `N_j` samples per axis with `N_j` dividing
//! the grid shape, so every sample point is a torus node.

use std::collections::HashMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{mixed_norm, BesovParams};
use crate::cone::{ConeKind, HElement};
use crate::error::{Error, Result};
use crate::grid::{spatial_to_spectrum, spectrum_to_spatial, FreqGrid, NdFft, SampledSignal};
use crate::group::GroupPoint;
use crate::scalar::{lit, Real};
use crate::transform::{CoefficientField, HSamples, Level, SpatialLattice};
use crate::wavelet::{WaveletSystem, OUTER_RADIUS};

type C<T> = Complex<T>;

fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

fn two_pi_pow<T: Real>(p: f64) -> T {
    T::TAU().powf(lit(p))
}

/// Half-width of a tile `g_i U_epsilon` in lattice units.
pub const TILE_HALF_WIDTH: f64 = 0.75;

/// A Neumann step that shrinks the residual by less than this fraction counts as stalled.
pub const STALL_FRACTION: f64 = 1e-3;

/// Largest number of sample points a well-spread set may hold.
pub const POINT_BUDGET: usize = 10_000_000;

/// Smooth tent: 1 on `|t| <= 1/4`, 0 from `|t| = 3/4`; integer translates sum to 1.
pub fn tent<T: Real>(t: T) -> T {
    let a = t.abs();
    if a <= lit(0.25) {
        T::one()
    } else if a >= lit(TILE_HALF_WIDTH) {
        T::zero()
    } else {
        let c = (T::PI() * (a - lit(0.25))).cos();
        c * c
    }
}

/// Sample points `g_i = (h_j, x_{j,k})` with tiles `g_i U_epsilon`, where `U_epsilon`
/// is the chart box of half-width `0.75 epsilon` times the spatial box of half-width
/// `0.75` spatial steps.
#[derive(Debug, Clone)]
pub struct WellSpreadSet<T> {
    pub cone: crate::cone::ConeModel<T>,
    pub epsilon: T,
    pub beta: T,
    /// Integer chart index of each level; the chart node is `epsilon * index`.
    pub indices: Vec<Vec<i64>>,
    /// Samples per axis at each level.
    pub counts: Vec<Vec<usize>>,
    /// Spatial step of `U_epsilon` at the identity.
    pub base_step: Vec<T>,
    /// Signal grid whose torus carries the spatial samples.
    pub grid: FreqGrid<T>,
    /// `H` quadrature of the working region.
    pub region: HSamples<T>,
    /// Largest number of tiles containing one node of the working region.
    pub max_overlap: usize,
    lookup: HashMap<Vec<i64>, usize>,
}

impl<T: Real> WellSpreadSet<T> {
    pub fn levels(&self) -> usize {
        self.indices.len()
    }

    /// Total number of sample points.
    pub fn len(&self) -> usize {
        (0..self.levels()).map(|j| self.level_len(j)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn level_len(&self, j: usize) -> usize {
        self.counts[j].iter().product()
    }

    pub fn theta(&self, j: usize) -> Vec<T> {
        self.indices[j].iter().map(|&k| self.epsilon * lit(k as f64)).collect()
    }

    pub fn h(&self, j: usize) -> HElement<T> {
        HElement::new(self.theta(j))
    }

    pub fn level_of(&self, index: &[i64]) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    /// Spatial sample spacing at level `j`.
    pub fn spatial_step(&self, j: usize) -> Vec<T> {
        let period = self.grid.period();
        period.iter().zip(&self.counts[j]).map(|(&p, &n)| p / T::from_usize_lossy(n)).collect()
    }

    pub fn cell_volume(&self, j: usize) -> T {
        self.spatial_step(j).iter().fold(T::one(), |p, &s| p * s)
    }

    /// Haar volume of the chart cell of level `j`.
    pub fn h_volume(&self, j: usize) -> T {
        self.cone.haar_weight(&self.theta(j)) * self.epsilon.powi(self.cone.dim() as i32)
    }

    /// `dg` volume of one sample cell at level `j`.
    pub fn dg_volume(&self, j: usize) -> T {
        let n = self.cone.dim();
        self.h_volume(j) * self.cell_volume(j) / (two_pi_pow::<T>(n as f64) * self.cone.det_h(&self.h(j)))
    }

    pub fn point(&self, j: usize, k: &[usize]) -> GroupPoint<T> {
        let d = self.spatial_step(j);
        GroupPoint::new(self.h(j), k.iter().zip(&d).map(|(&k, &d)| d * T::from_usize_lossy(k)).collect())
    }

    /// All sample points, level by level in row-major spatial order.
    pub fn points(&self) -> Vec<GroupPoint<T>> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.levels() {
            for k in 0..self.level_len(j) {
                out.push(self.point(j, &unflatten(k, &self.counts[j])));
            }
        }
        out
    }
}

fn unflatten(mut idx: usize, shape: &[usize]) -> Vec<usize> {
    let mut m = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        m[a] = idx % shape[a];
        idx /= shape[a];
    }
    m
}

fn flatten(m: &[usize], shape: &[usize]) -> usize {
    m.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

fn smallest_divisor_at_least(m: usize, target: f64) -> usize {
    (1..=m).find(|&d| m % d == 0 && d as f64 >= target).unwrap_or(m)
}

/// Wrapped offset of torus node `m` from sample `k`, in sample units.
fn wrapped_offset<T: Real>(m: usize, k: usize, big_m: usize, n: usize) -> T {
    let u = lit::<T>((m * n) as f64 / big_m as f64) - T::from_usize_lossy(k);
    let nn = T::from_usize_lossy(n);
    let mut v = u % nn;
    if v > nn / lit(2.0) {
        v = v - nn;
    } else if v <= -nn / lit(2.0) {
        v = v + nn;
    }
    v
}

/// Per torus node, the samples whose spatial tent is nonzero there, with the tent value.
fn axis_tents<T: Real>(big_m: usize, n: usize) -> Vec<Vec<(usize, T)>> {
    (0..big_m)
        .map(|m| {
            if n == 1 {
                return vec![(0, T::one())];
            }
            let centre = (m * n) / big_m;
            let mut row = Vec::with_capacity(2);
            for dk in [n - 1, 0, 1] {
                let k = (centre + dk) % n;
                let w = tent(wrapped_offset::<T>(m, k, big_m, n));
                if w > T::zero() && !row.iter().any(|&(kk, _)| kk == k) {
                    row.push((k, w));
                }
            }
            row
        })
        .collect()
}

/// Spatial tiles containing torus node `m` on one axis.
fn axis_cover(m: usize, big_m: usize, n: usize) -> usize {
    if n == 1 {
        return 1;
    }
    (0..n).filter(|&k| wrapped_offset::<f64>(m, k, big_m, n).abs() <= TILE_HALF_WIDTH).count()
}

/// Well-spread set for sampling step `epsilon` in the `H` chart and spatial density
/// `beta`: the spatial step at the identity is `beta` times the Nyquist step of the
/// wavelet, at level `h` it is scaled by `h` and then rounded down to a divisor of
/// the torus.
pub fn make_wellspread<T: Real>(
    wavelet: &WaveletSystem<T>,
    grid: &FreqGrid<T>,
    region: &HSamples<T>,
    epsilon: T,
    beta: T,
) -> Result<WellSpreadSet<T>> {
    let cone = &wavelet.cone;
    if !matches!(cone.kind(), ConeKind::Orthant(_)) {
        return Err(Error::Unsupported("frames are implemented for orthant cones".into()));
    }
    if !(epsilon > T::zero()) || !(beta > T::zero()) {
        return Err(Error::Config("epsilon and beta must be positive".into()));
    }
    let n = cone.dim();
    if grid.ndim() != n {
        return Err(Error::Dimension { expected: n, got: grid.ndim() });
    }
    if region.is_empty() {
        return Err(Error::Config("empty working region".into()));
    }
    let mut lo = vec![T::infinity(); n];
    let mut hi = vec![T::neg_infinity(); n];
    for t in &region.thetas {
        for a in 0..n {
            lo[a] = lo[a].min(t[a]);
            hi[a] = hi[a].max(t[a]);
        }
    }
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|a| {
            let k0 = (lo[a] / epsilon).floor().to_i64().unwrap_or(0);
            let k1 = (hi[a] / epsilon).ceil().to_i64().unwrap_or(0);
            (k0, k1)
        })
        .collect();
    let h_count: usize = ranges.iter().map(|&(a, b)| (b - a + 1) as usize).product();
    if h_count > POINT_BUDGET {
        return Err(Error::Budget { what: "well-spread levels".into(), needed: h_count, limit: POINT_BUDGET });
    }
    let e = cone.identity();
    let (blo, bhi) = cone.ball_bounding_box(&e, lit(OUTER_RADIUS));
    let base_step: Vec<T> = (0..n).map(|a| beta * T::TAU() / (bhi[a] - blo[a])).collect();
    let period = grid.period();

    let mut indices = Vec::with_capacity(h_count);
    let mut counts = Vec::with_capacity(h_count);
    let mut total = 0usize;
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    for _ in 0..h_count {
        let c: Vec<usize> = (0..n)
            .map(|a| {
                let theta = epsilon * lit(idx[a] as f64);
                let step = theta.exp() * base_step[a];
                smallest_divisor_at_least(grid.shape[a], (period[a] / step).to_f64_lossy())
            })
            .collect();
        total += c.iter().product::<usize>();
        if total > POINT_BUDGET {
            return Err(Error::Budget { what: "well-spread points".into(), needed: total, limit: POINT_BUDGET });
        }
        indices.push(idx.clone());
        counts.push(c);
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] <= ranges[a].1 {
                break;
            }
            idx[a] = ranges[a].0;
        }
    }
    let lookup = indices.iter().enumerate().map(|(j, k)| (k.clone(), j)).collect();
    let mut ws = WellSpreadSet {
        cone: cone.clone(),
        epsilon,
        beta,
        indices,
        counts,
        base_step,
        grid: grid.clone(),
        region: region.clone(),
        max_overlap: 0,
        lookup,
    };
    ws.max_overlap = covering_certificate(&ws)?;
    Ok(ws)
}

/// Levels whose `H` tile contains chart node `theta`.
fn h_neighbours<T: Real>(ws: &WellSpreadSet<T>, theta: &[T]) -> Vec<(usize, T)> {
    let n = theta.len();
    let u: Vec<T> = theta.iter().map(|&t| t / ws.epsilon).collect();
    let base: Vec<i64> = u.iter().map(|v| v.round().to_i64().unwrap_or(0)).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut index = base.clone();
        for v in index.iter_mut() {
            *v += (c % 3) as i64 - 1;
            c /= 3;
        }
        let mut inside = true;
        let mut w = T::one();
        for a in 0..n {
            let d = u[a] - lit(index[a] as f64);
            if d.abs() > lit(TILE_HALF_WIDTH) {
                inside = false;
                break;
            }
            w = w * tent(d);
        }
        if inside {
            if let Some(j) = ws.level_of(&index) {
                out.push((j, w));
            }
        }
    }
    out
}

/// Checks that every region node lies in some tile and returns the largest overlap.
fn covering_certificate<T: Real>(ws: &WellSpreadSet<T>) -> Result<usize> {
    let n = ws.cone.dim();
    let mut cover_cache: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut worst = 0usize;
    for (r, theta) in ws.region.thetas.iter().enumerate() {
        let nb = h_neighbours(ws, theta);
        if nb.is_empty() {
            return Err(Error::Lattice(format!("region level {r} lies in no tile")));
        }
        let mut per_axis: Vec<Vec<usize>> = vec![vec![0; 0]; n];
        for a in 0..n {
            per_axis[a] = vec![0; ws.grid.shape[a]];
        }
        // overlap at (theta, x) is the sum over neighbouring levels of the spatial product
        let mut total = vec![0usize; ws.grid.len()];
        for &(j, _) in &nb {
            for a in 0..n {
                let key = (ws.grid.shape[a], ws.counts[j][a]);
                let cov = cover_cache
                    .entry(key)
                    .or_insert_with(|| (0..key.0).map(|m| axis_cover(m, key.0, key.1)).collect());
                per_axis[a].clone_from(cov);
            }
            for (i, t) in total.iter_mut().enumerate() {
                let m = unflatten(i, &ws.grid.shape);
                *t += (0..n).map(|a| per_axis[a][m[a]]).product::<usize>();
            }
        }
        if let Some(i) = total.iter().position(|&t| t == 0) {
            return Err(Error::Lattice(format!("node {i} of region level {r} lies in no tile")));
        }
        worst = worst.max(total.into_iter().max().unwrap_or(0));
    }
    Ok(worst)
}

/// Bounded uniform partition of unity `psi_i(h, x) = a_j(h) tau_{j,k}(x)` subordinate
/// to the tiles: `a_j` are normalised chart tents, `tau_{j,k}` periodic spatial tents.
#[derive(Debug, Clone)]
pub struct Bupu<T> {
    /// For each region level, the lattice levels with nonzero weight.
    pub h_rows: Vec<Vec<(usize, T)>>,
    /// For each lattice level, the region levels it touches with their weight.
    pub h_cols: Vec<Vec<(usize, T)>>,
    /// Spatial tents per `(axis, samples)`: for each torus node, `(k, tau)`.
    tents: HashMap<(usize, usize), Vec<Vec<(usize, T)>>>,
}

pub fn make_bupu<T: Real>(ws: &WellSpreadSet<T>) -> Result<Bupu<T>> {
    let n = ws.cone.dim();
    let mut h_rows = Vec::with_capacity(ws.region.len());
    let mut h_cols = vec![Vec::new(); ws.levels()];
    for (r, theta) in ws.region.thetas.iter().enumerate() {
        let nb = h_neighbours(ws, theta);
        let sum = nb.iter().fold(T::zero(), |s, &(_, w)| s + w);
        if !(sum > T::zero()) {
            return Err(Error::Lattice(format!("region level {r} is covered by no tile")));
        }
        let row: Vec<(usize, T)> = nb.into_iter().filter(|&(_, w)| w > T::zero()).map(|(j, w)| (j, w / sum)).collect();
        for &(j, w) in &row {
            h_cols[j].push((r, w));
        }
        h_rows.push(row);
    }
    let mut tents = HashMap::new();
    for c in &ws.counts {
        for a in 0..n {
            let key = (a, c[a]);
            tents.entry(key).or_insert_with(|| axis_tents::<T>(ws.grid.shape[a], c[a]));
        }
    }
    Ok(Bupu { h_rows, h_cols, tents })
}

impl<T: Real> Bupu<T> {
    /// `psi_i` for sample `(j, k)` at region level `r` and torus node `m`.
    pub fn value(&self, ws: &WellSpreadSet<T>, j: usize, k: &[usize], r: usize, m: &[usize]) -> T {
        let a_j = match self.h_rows[r].iter().find(|&&(jj, _)| jj == j) {
            Some(&(_, w)) => w,
            None => return T::zero(),
        };
        let mut v = a_j;
        for a in 0..k.len() {
            let row = &self.tents[&(a, ws.counts[j][a])][m[a]];
            v = v * row.iter().find(|&&(kk, _)| kk == k[a]).map(|&(_, w)| w).unwrap_or(T::zero());
        }
        v
    }

    fn axis(&self, a: usize, n: usize) -> &[Vec<(usize, T)>] {
        &self.tents[&(a, n)]
    }
}

/// Apply a sparse map along one axis. Forward: `rows[new]` lists `(old, w)`;
/// adjoint: `rows[old]` lists `(new, w)`.
fn apply_axis<T: Real>(
    data: &[C<T>],
    shape: &[usize],
    axis: usize,
    rows: &[Vec<(usize, T)>],
    new_len: usize,
    adjoint: bool,
) -> (Vec<C<T>>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let old_len = shape[axis];
    let mut out = vec![czero(); outer * new_len * inner];
    for o in 0..outer {
        for (i, row) in rows.iter().enumerate() {
            for &(k, w) in row {
                let (src, dst) = if adjoint { (i, k) } else { (k, i) };
                let sb = (o * old_len + src) * inner;
                let db = (o * new_len + dst) * inner;
                for t in 0..inner {
                    out[db + t] = out[db + t] + data[sb + t] * w;
                }
            }
        }
    }
    let mut s = shape.to_vec();
    s[axis] = new_len;
    (out, s)
}

/// Sample values `lambda_{j,k}`, level by level in row-major spatial order.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceData<T> {
    pub values: Vec<Vec<C<T>>>,
}

impl<T: Real> SequenceData<T> {
    pub fn zeros(ws: &WellSpreadSet<T>) -> Self {
        SequenceData { values: (0..ws.levels()).map(|j| vec![czero(); ws.level_len(j)]).collect() }
    }

    fn check(&self, ws: &WellSpreadSet<T>) -> Result<()> {
        if self.values.len() != ws.levels() || self.values.iter().enumerate().any(|(j, v)| v.len() != ws.level_len(j)) {
            return Err(Error::Grid("sequence data does not match the well-spread set".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().flatten().fold(T::zero(), |m, v| m.max(v.norm()))
    }
}

/// `(sum_j Det(h_j)^s |U_H| (sum_k |lambda_{j,k}|^p |cell_j|)^{q/p})^{1/q}`, with `s`
/// the coorbit exponent `s'`.
pub fn sequence_norm<T: Real>(sd: &SequenceData<T>, ws: &WellSpreadSet<T>, params: &BesovParams) -> Result<T> {
    params.validate()?;
    sd.check(ws)?;
    let (p, q, s): (T, T, T) = (lit(params.p), lit(params.q), lit(params.s));
    let mut sum = T::zero();
    for (j, vals) in sd.values.iter().enumerate() {
        let inner = vals.iter().fold(T::zero(), |a, v| a + v.norm().powf(p)) * ws.cell_volume(j);
        if inner == T::zero() {
            continue;
        }
        sum = sum + ws.cone.det_h(&ws.h(j)).powf(s) * ws.h_volume(j) * inner.powf(q / p);
    }
    Ok(sum.powf(T::one() / q))
}

/// The discrete operators of a well-spread set, with wavelet tables cached.
pub struct FrameOperators<'a, T: Real> {
    pub ws: &'a WellSpreadSet<T>,
    pub bupu: &'a Bupu<T>,
    pub wavelet: &'a WaveletSystem<T>,
    fft: NdFft<T>,
    level_ffts: HashMap<Vec<usize>, NdFft<T>>,
    region_psi: Vec<Vec<T>>,
    lattice_psi: Vec<Vec<T>>,
}

impl<'a, T: Real> FrameOperators<'a, T> {
    pub fn new(ws: &'a WellSpreadSet<T>, bupu: &'a Bupu<T>, wavelet: &'a WaveletSystem<T>) -> Result<Self> {
        if bupu.h_rows.len() != ws.region.len() || bupu.h_cols.len() != ws.levels() {
            return Err(Error::Grid("partition of unity does not match the well-spread set".into()));
        }
        let grid = &ws.grid;
        let pts = grid.points();
        let table = |h: HElement<T>| -> Vec<T> { pts.iter().map(|w| wavelet.eval_dilated(&h, w)).collect() };
        let region_psi = (0..ws.region.len()).into_par_iter().map(|r| table(ws.region.element(r))).collect();
        let lattice_psi = (0..ws.levels()).into_par_iter().map(|j| table(ws.h(j))).collect();
        let mut level_ffts = HashMap::new();
        for c in &ws.counts {
            level_ffts.entry(c.clone()).or_insert_with(|| NdFft::new(c));
        }
        Ok(FrameOperators { ws, bupu, wavelet, fft: NdFft::new(&grid.shape), level_ffts, region_psi, lattice_psi })
    }

    fn check_signal(&self, f: &SampledSignal<T>) -> Result<()> {
        if f.grid != self.ws.grid {
            return Err(Error::Grid("signal grid differs from the well-spread set grid".into()));
        }
        Ok(())
    }

    /// Torus index of frequency node `m` reduced modulo `counts`.
    fn folded(&self, m: &[usize], counts: &[usize]) -> usize {
        let g = &self.ws.grid;
        let r: Vec<usize> = (0..m.len())
            .map(|a| (g.offset[a] + m[a] as i64).rem_euclid(counts[a] as i64) as usize)
            .collect();
        flatten(&r, counts)
    }

    /// `lambda_i = W f(g_i)`.
    pub fn sample(&self, f: &SampledSignal<T>) -> Result<SequenceData<T>> {
        self.check_signal(f)?;
        let g = &self.ws.grid;
        let dw = g.cell_volume();
        let support: Vec<(usize, Vec<usize>)> =
            (0..g.len()).filter(|&i| f.values[i] != czero()).map(|i| (i, g.multi_index(i))).collect();
        let values = (0..self.ws.levels())
            .into_par_iter()
            .map(|j| {
                let counts = &self.ws.counts[j];
                let amp = self.ws.cone.det_h(&self.ws.h(j)).sqrt() * dw;
                let mut bins = vec![czero(); counts.iter().product()];
                let psi = &self.lattice_psi[j];
                for (i, m) in &support {
                    let p = psi[*i];
                    if p != T::zero() {
                        let b = self.folded(m, counts);
                        bins[b] = bins[b] + f.values[*i] * (p * amp);
                    }
                }
                self.level_ffts[counts].process(&mut bins, true);
                bins
            })
            .collect();
        Ok(SequenceData { values })
    }

    /// Values of a torus-layout field at the sample points. Levels absent from the
    /// field read as zero; `epsilon` must be a multiple of the field's chart step.
    pub fn sample_field(&self, field: &CoefficientField<T>) -> Result<SequenceData<T>> {
        let ws = self.ws;
        let step = ws.region.step;
        let ratio = (ws.epsilon / step).to_f64_lossy();
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Config("epsilon must be a multiple of the field's H step".into()));
        }
        let ratio = ratio.round() as i64;
        let key = |t: &[T]| -> Vec<i64> { t.iter().map(|&v| (v / step).round().to_i64().unwrap_or(i64::MAX)).collect() };
        let mut by_index = HashMap::new();
        for (l, level) in field.levels.iter().enumerate() {
            if !level.lattice.is_torus_of(&ws.grid) {
                return Err(Error::Unsupported("field levels must be on the torus grid".into()));
            }
            by_index.insert(key(&level.h.theta), l);
        }
        let shape = &ws.grid.shape;
        let values = (0..ws.levels())
            .map(|j| {
                let counts = &ws.counts[j];
                let idx: Vec<i64> = ws.indices[j].iter().map(|&k| k * ratio).collect();
                match by_index.get(&idx) {
                    None => vec![czero(); ws.level_len(j)],
                    Some(&l) => (0..ws.level_len(j))
                        .map(|k| {
                            let kk = unflatten(k, counts);
                            let m: Vec<usize> = (0..kk.len()).map(|a| kk[a] * (shape[a] / counts[a])).collect();
                            field.levels[l].values[flatten(&m, shape)]
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(SequenceData { values })
    }

    fn interpolate_level(&self, j: usize, vals: &[C<T>]) -> Vec<C<T>> {
        let shape = &self.ws.grid.shape;
        let mut data = vals.to_vec();
        let mut cur = self.ws.counts[j].clone();
        for a in 0..cur.len() {
            let (d, s) = apply_axis(&data, &cur, a, self.bupu.axis(a, self.ws.counts[j][a]), shape[a], false);
            data = d;
            cur = s;
        }
        data
    }

    fn restrict_level(&self, j: usize, vals: &[C<T>]) -> Vec<C<T>> {
        let mut data = vals.to_vec();
        let mut cur = self.ws.grid.shape.clone();
        for a in 0..cur.len() {
            let n = self.ws.counts[j][a];
            let (d, s) = apply_axis(&data, &cur, a, self.bupu.axis(a, n), n, true);
            data = d;
            cur = s;
        }
        data
    }

    /// `sum_i lambda_i psi_i` on the region levels.
    pub fn quasi_interpolate(&self, sd: &SequenceData<T>) -> Result<CoefficientField<T>> {
        sd.check(self.ws)?;
        let ws = self.ws;
        let interp: Vec<Option<Vec<C<T>>>> = (0..ws.levels())
            .into_par_iter()
            .map(|j| {
                if ws.bupu_touches(self.bupu, j) && sd.values[j].iter().any(|v| *v != czero()) {
                    Some(self.interpolate_level(j, &sd.values[j]))
                } else {
                    None
                }
            })
            .collect();
        let lattice = SpatialLattice::torus(&ws.grid);
        let levels = (0..ws.region.len())
            .into_par_iter()
            .map(|r| {
                let mut values = vec![czero(); ws.grid.len()];
                for &(j, a) in &self.bupu.h_rows[r] {
                    if let Some(v) = &interp[j] {
                        for (o, x) in values.iter_mut().zip(v) {
                            *o = *o + x * a;
                        }
                    }
                }
                Level { h: ws.region.element(r), weight: ws.region.weights[r], lattice: lattice.clone(), values }
            })
            .collect();
        Ok(CoefficientField { cone: ws.cone.name(), levels })
    }

    /// `mu_i(F) = int F psi_i dg` for a field on the region levels.
    pub fn moments(&self, field: &CoefficientField<T>) -> Result<SequenceData<T>> {
        let ws = self.ws;
        if field.levels.len() != ws.region.len() || field.levels.iter().any(|l| !l.lattice.is_torus_of(&ws.grid)) {
            return Err(Error::Grid("field must live on the region levels and the torus grid".into()));
        }
        let n = ws.cone.dim();
        let cell = ws.grid.spatial_cell_volume();
        let norm = two_pi_pow::<T>(-(n as f64));
        let omega: Vec<T> = (0..ws.region.len())
            .map(|r| ws.region.weights[r] * norm / ws.cone.det_h(&ws.region.element(r)) * cell)
            .collect();
        let values = (0..ws.levels())
            .into_par_iter()
            .map(|j| {
                if self.bupu.h_cols[j].is_empty() {
                    return vec![czero(); ws.level_len(j)];
                }
                let mut acc = vec![czero(); ws.grid.len()];
                for &(r, a) in &self.bupu.h_cols[j] {
                    let c = a * omega[r];
                    for (o, x) in acc.iter_mut().zip(&field.levels[r].values) {
                        *o = *o + x * c;
                    }
                }
                self.restrict_level(j, &acc)
            })
            .collect();
        Ok(SequenceData { values })
    }

    /// `sum_i c_i rho_i pi(g_i) psi`, with `rho_i` the cell `dg` volume when `weighted`.
    pub fn atoms(&self, sd: &SequenceData<T>, weighted: bool) -> Result<SampledSignal<T>> {
        sd.check(self.ws)?;
        let ws = self.ws;
        let g = &ws.grid;
        let idx: Vec<Vec<usize>> = (0..g.len()).map(|i| g.multi_index(i)).collect();
        let parts: Vec<Option<Vec<C<T>>>> = (0..ws.levels())
            .into_par_iter()
            .map(|j| {
                if sd.values[j].iter().all(|v| *v == czero()) {
                    return None;
                }
                let counts = &ws.counts[j];
                let mut spec = sd.values[j].clone();
                self.level_ffts[counts].process(&mut spec, false);
                let rho = if weighted { ws.dg_volume(j) } else { T::one() };
                let amp = ws.cone.det_h(&ws.h(j)).sqrt() * rho;
                let psi = &self.lattice_psi[j];
                Some(
                    idx.iter()
                        .enumerate()
                        .map(|(i, m)| if psi[i] == T::zero() { czero() } else { spec[self.folded(m, counts)] * (psi[i] * amp) })
                        .collect(),
                )
            })
            .collect();
        let mut values = vec![czero(); g.len()];
        for p in parts.into_iter().flatten() {
            for (a, b) in values.iter_mut().zip(p) {
                *a = *a + b;
            }
        }
        SampledSignal::new(g.clone(), values)
    }

    /// Wavelet transform on the region levels (torus layout).
    pub fn analyze(&self, f: &SampledSignal<T>) -> Result<CoefficientField<T>> {
        self.check_signal(f)?;
        let ws = self.ws;
        let g = &ws.grid;
        let scale = two_pi_pow::<T>(g.ndim() as f64 / 2.0);
        let lattice = SpatialLattice::torus(g);
        let levels = (0..ws.region.len())
            .into_par_iter()
            .map(|r| {
                let h = ws.region.element(r);
                let amp = ws.cone.det_h(&h).sqrt() * scale;
                let spec: Vec<C<T>> =
                    f.values.iter().zip(&self.region_psi[r]).map(|(v, &p)| if p == T::zero() { czero() } else { v * (p * amp) }).collect();
                Level { h, weight: ws.region.weights[r], lattice: lattice.clone(), values: spectrum_to_spatial(g, &self.fft, &spec) }
            })
            .collect();
        Ok(CoefficientField { cone: ws.cone.name(), levels })
    }

    /// `int F(g) pi(g) psi dg` for a field on the region levels.
    pub fn synthesize(&self, field: &CoefficientField<T>) -> Result<SampledSignal<T>> {
        let ws = self.ws;
        if field.levels.len() != ws.region.len() || field.levels.iter().any(|l| !l.lattice.is_torus_of(&ws.grid)) {
            return Err(Error::Grid("field must live on the region levels and the torus grid".into()));
        }
        let g = &ws.grid;
        let n = g.ndim();
        let s = two_pi_pow::<T>(n as f64 / 2.0) * two_pi_pow::<T>(-(n as f64));
        let parts: Vec<Vec<C<T>>> = field
            .levels
            .par_iter()
            .enumerate()
            .map(|(r, l)| {
                let coef = l.weight * s / ws.cone.det_h(&l.h).sqrt();
                let line = spatial_to_spectrum(g, &self.fft, &l.values);
                line.into_iter().zip(&self.region_psi[r]).map(|(v, &p)| if p == T::zero() { czero() } else { v * (p * coef) }).collect()
            })
            .collect();
        let mut values = vec![czero(); g.len()];
        for p in parts {
            for (a, b) in values.iter_mut().zip(p) {
                *a = *a + b;
            }
        }
        SampledSignal::new(g.clone(), values)
    }

    /// `T1 F = (sum_i F(g_i) psi_i) * W psi psi`.
    pub fn t1(&self, field: &CoefficientField<T>) -> Result<CoefficientField<T>> {
        let sd = self.sample_field(field)?;
        self.analyze(&self.synthesize(&self.quasi_interpolate(&sd)?)?)
    }

    /// `T2 F = sum_i lambda_i(F) W psi psi(g_i^{-1} .)`.
    pub fn t2(&self, field: &CoefficientField<T>) -> Result<CoefficientField<T>> {
        let mu = self.moments(field)?;
        self.analyze(&self.atoms(&mu, false)?)
    }

    /// `T1` conjugated to signals: `f -> W^{-1} T1 W f`.
    pub fn t1_signal(&self, f: &SampledSignal<T>) -> Result<SampledSignal<T>> {
        self.synthesize(&self.quasi_interpolate(&self.sample(f)?)?)
    }

    /// `T2` conjugated to signals: `f -> W^{-1} T2 W f`.
    pub fn t2_signal(&self, f: &SampledSignal<T>) -> Result<SampledSignal<T>> {
        self.atoms(&self.moments(&self.analyze(f)?)?, false)
    }

    /// Weighted discrete frame operator `f -> sum_i rho_i <f, pi(g_i) psi> pi(g_i) psi`.
    pub fn frame_operator(&self, f: &SampledSignal<T>) -> Result<SampledSignal<T>> {
        self.atoms(&self.sample(f)?, true)
    }
}

impl<T: Real> WellSpreadSet<T> {
    fn bupu_touches(&self, bupu: &Bupu<T>, j: usize) -> bool {
        !bupu.h_cols[j].is_empty()
    }
}

/// `lambda_i = W f(g_i)` for every sample point.
pub fn sample_coefficients<T: Real>(
    f: &SampledSignal<T>,
    wavelet: &WaveletSystem<T>,
    ws: &WellSpreadSet<T>,
    bupu: &Bupu<T>,
) -> Result<SequenceData<T>> {
    FrameOperators::new(ws, bupu, wavelet)?.sample(f)
}

pub fn apply_t1<T: Real>(
    field: &CoefficientField<T>,
    ws: &WellSpreadSet<T>,
    bupu: &Bupu<T>,
    wavelet: &WaveletSystem<T>,
) -> Result<CoefficientField<T>> {
    FrameOperators::new(ws, bupu, wavelet)?.t1(field)
}

pub fn apply_t2<T: Real>(
    field: &CoefficientField<T>,
    ws: &WellSpreadSet<T>,
    bupu: &Bupu<T>,
    wavelet: &WaveletSystem<T>,
) -> Result<CoefficientField<T>> {
    FrameOperators::new(ws, bupu, wavelet)?.t2(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "T1-neumann")]
    T1Neumann,
    #[serde(rename = "T2-neumann")]
    T2Neumann,
    #[serde(rename = "frame-cg")]
    FrameCg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::T1Neumann => "T1-neumann",
            Method::T2Neumann => "T2-neumann",
            Method::FrameCg => "frame-cg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "T1-neumann" => Ok(Method::T1Neumann),
            "T2-neumann" => Ok(Method::T2Neumann),
            "frame-cg" => Ok(Method::FrameCg),
            other => Err(Error::Config(format!("unknown reconstruction method {other:?}"))),
        }
    }
}

pub enum FrameInput<'a, T> {
    Samples(&'a SequenceData<T>),
    Field(&'a CoefficientField<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { max_iter: 100, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub method: String,
    pub epsilon: f64,
    pub beta: f64,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    /// Relative `L^2` error against the reference signal, when one was given.
    pub final_error: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub signal: SampledSignal<T>,
    /// Atomic coefficients `c_i` of the result (`T2-neumann` only).
    pub coefficients: Option<SequenceData<T>>,
    pub report: IterationReport,
}

fn axpy<T: Real>(y: &mut SampledSignal<T>, a: C<T>, x: &SampledSignal<T>) {
    for (u, v) in y.values.iter_mut().zip(&x.values) {
        *u = *u + v * a;
    }
}

fn sub<T: Real>(a: &SampledSignal<T>, b: &SampledSignal<T>) -> SampledSignal<T> {
    let mut out = a.clone();
    axpy(&mut out, Complex::new(-T::one(), T::zero()), b);
    out
}

/// Richardson iteration `u <- u + (rhs - A u)`, i.e. the partial sums of the Neumann
/// series of `A^{-1} rhs`. Three consecutive steps that fail to shrink the residual
/// by [`STALL_FRACTION`] raise [`Error::Divergence`].
fn neumann<T: Real>(
    rhs: &SampledSignal<T>,
    op: impl Fn(&SampledSignal<T>) -> Result<SampledSignal<T>>,
    opts: &IterationOptions,
) -> Result<(SampledSignal<T>, Vec<f64>, bool)> {
    let scale = rhs.l2_norm();
    let mut u = rhs.clone();
    let mut residuals: Vec<f64> = Vec::new();
    if scale == T::zero() {
        return Ok((u, residuals, true));
    }
    let mut rising = 0;
    for it in 1..=opts.max_iter {
        let r = sub(rhs, &op(&u)?);
        let rel = (r.l2_norm() / scale).to_f64_lossy();
        if !rel.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: rel });
        }
        if let Some(&last) = residuals.last() {
            rising = if rel >= last * (1.0 - STALL_FRACTION) { rising + 1 } else { 0 };
        }
        residuals.push(rel);
        if rel <= opts.tol {
            return Ok((u, residuals, true));
        }
        if rising >= 3 {
            return Err(Error::Divergence { iterations: it, residual: rel });
        }
        axpy(&mut u, Complex::new(T::one(), T::zero()), &r);
    }
    Ok((u, residuals, false))
}

/// Conjugate gradients for a Hermitian positive semidefinite operator.
fn conjugate_gradient<T: Real>(
    rhs: &SampledSignal<T>,
    op: impl Fn(&SampledSignal<T>) -> Result<SampledSignal<T>>,
    opts: &IterationOptions,
) -> Result<(SampledSignal<T>, Vec<f64>, bool)> {
    let scale = rhs.l2_norm();
    let mut u = SampledSignal::zeros(&rhs.grid);
    let mut residuals = Vec::new();
    if scale == T::zero() {
        return Ok((u, residuals, true));
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.inner(&r).re;
    for _ in 0..opts.max_iter {
        let ap = op(&p)?;
        let pap = p.inner(&ap).re;
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rr / pap;
        axpy(&mut u, Complex::new(alpha, T::zero()), &p);
        axpy(&mut r, Complex::new(-alpha, T::zero()), &ap);
        let rr_new = r.inner(&r).re;
        let rel = (rr_new.sqrt() / scale).to_f64_lossy();
        residuals.push(rel);
        if rel <= opts.tol {
            return Ok((u, residuals, true));
        }
        let beta = rr_new / rr;
        let mut next = r.clone();
        axpy(&mut next, Complex::new(beta, T::zero()), &p);
        p = next;
        rr = rr_new;
    }
    Ok((u, residuals, false))
}

/// Reconstruct a signal from frame data.
///
/// `T1-neumann` inverts `T1` on the sampled coefficients; `T2-neumann` computes the
/// atomic coefficients `lambda_i(T2^{-1} W f)` of a coefficient field and returns the
/// atom sum; `frame-cg` solves the weighted frame operator equation by conjugate
/// gradients.
pub fn reconstruct<T: Real>(
    input: FrameInput<'_, T>,
    method: Method,
    ops: &FrameOperators<'_, T>,
    opts: &IterationOptions,
    reference: Option<&SampledSignal<T>>,
) -> Result<Reconstruction<T>> {
    let samples = |input: &FrameInput<'_, T>| -> Result<SequenceData<T>> {
        match input {
            FrameInput::Samples(sd) => {
                sd.check(ops.ws)?;
                Ok((*sd).clone())
            }
            FrameInput::Field(f) => ops.sample_field(f),
        }
    };
    let (signal, coefficients, residuals, converged) = match method {
        Method::T1Neumann => {
            let rhs = ops.synthesize(&ops.quasi_interpolate(&samples(&input)?)?)?;
            let (u, res, ok) = neumann(&rhs, |u| ops.t1_signal(u), opts)?;
            (u, None, res, ok)
        }
        Method::T2Neumann => {
            let f = match &input {
                FrameInput::Field(field) => ops.synthesize(field)?,
                FrameInput::Samples(_) => {
                    return Err(Error::Config("T2-neumann needs a coefficient field".into()));
                }
            };
            let (u, res, ok) = neumann(&f, |u| ops.t2_signal(u), opts)?;
            let c = ops.moments(&ops.analyze(&u)?)?;
            (ops.atoms(&c, false)?, Some(c), res, ok)
        }
        Method::FrameCg => {
            let rhs = ops.atoms(&samples(&input)?, true)?;
            let (u, res, ok) = conjugate_gradient(&rhs, |u| ops.frame_operator(u), opts)?;
            (u, None, res, ok)
        }
    };
    let final_error = reference.map(|r| signal.relative_error(r).to_f64_lossy());
    let report = IterationReport {
        method: method.name().into(),
        epsilon: ops.ws.epsilon.to_f64_lossy(),
        beta: ops.ws.beta.to_f64_lossy(),
        iterations: residuals.len(),
        residuals,
        final_error,
        converged,
    };
    Ok(Reconstruction { signal, coefficients, report })
}

/// Empirical frame constants over a signal ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub epsilon: f64,
    pub beta: f64,
    pub points: usize,
    /// `||W f(g_i)||_{Y#} / ||W f||_{L^{p,q}_s}` per signal.
    pub ratios: Vec<f64>,
    pub a1: f64,
    pub a2: f64,
    pub ratio: f64,
}

pub fn frame_bounds<T: Real>(
    signals: &[SampledSignal<T>],
    ops: &FrameOperators<'_, T>,
    params: &BesovParams,
) -> Result<FrameBounds> {
    params.validate()?;
    if signals.is_empty() {
        return Err(Error::Config("empty signal ensemble".into()));
    }
    let mut ratios = Vec::with_capacity(signals.len());
    for f in signals {
        let seq = sequence_norm(&ops.sample(f)?, ops.ws, params)?;
        let cont = mixed_norm(&ops.analyze(f)?, &ops.ws.cone, params.p, params.q, params.s)?;
        if cont == T::zero() {
            return Err(Error::Config("zero signal in the ensemble".into()));
        }
        ratios.push((seq / cont).to_f64_lossy());
    }
    let a1 = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let a2 = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(FrameBounds {
        epsilon: ops.ws.epsilon.to_f64_lossy(),
        beta: ops.ws.beta.to_f64_lossy(),
        points: ops.ws.len(),
        ratios,
        a1,
        a2,
        ratio: a2 / a1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tents_partition_unity() {
        for i in 0..200 {
            let t = -3.0 + 0.031 * i as f64;
            let s: f64 = (-5..=5).map(|k| tent(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-15, "{t}");
        }
        assert_eq!(tent(0.2), 1.0);
        assert_eq!(tent(0.75), 0.0);
    }

    #[test]
    fn axis_tents_sum_to_one() {
        for (m, n) in [(16, 1), (16, 2), (16, 4), (48, 6), (48, 48)] {
            let rows = axis_tents::<f64>(m, n);
            for row in &rows {
                let s: f64 = row.iter().map(|r| r.1).sum();
                assert!((s - 1.0).abs() < 1e-14, "{m} {n}");
                assert!(row.iter().all(|&(k, _)| k < n));
            }
        }
    }

    #[test]
    fn divisors() {
        assert_eq!(smallest_divisor_at_least(48, 5.0), 6);
        assert_eq!(smallest_divisor_at_least(48, 0.3), 1);
        assert_eq!(smallest_divisor_at_least(48, 100.0), 48);
        assert_eq!(smallest_divisor_at_least(256, 33.0), 64);
    }
}
