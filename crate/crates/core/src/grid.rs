//! Frequency grids, sampled signals and torus FFTs.
//!
//! A grid samples frequencies `w_i = spacing_i * (offset_i + m_i)`, `0 <= m_i < shape_i`,
//! row-major with the last axis fastest. The dual spatial grid is the torus with
//! period `2 pi / spacing_i` and step `dx_i = 2 pi / (shape_i * spacing_i)`; with an
//! integer offset every grid translation is a circular shift.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid<T> {
    pub shape: Vec<usize>,
    pub spacing: Vec<T>,
    pub offset: Vec<i64>,
}

impl<T: Real> FreqGrid<T> {
    pub fn new(shape: Vec<usize>, spacing: Vec<T>, offset: Vec<i64>) -> Result<Self> {
        if shape.is_empty() || shape.len() != spacing.len() || shape.len() != offset.len() {
            return Err(Error::Grid("shape, spacing and offset must have equal nonzero length".into()));
        }
        if shape.iter().any(|&n| n < 2) || spacing.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::Grid("degenerate grid".into()));
        }
        Ok(FreqGrid { shape, spacing, offset })
    }

    /// Smallest grid of the given shape whose nodes cover the box `[lo, hi]`.
    pub fn covering(lo: &[T], hi: &[T], shape: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != shape.len() {
            return Err(Error::Grid("box and shape dimensions differ".into()));
        }
        let mut spacing = Vec::new();
        let mut offset = Vec::new();
        for i in 0..lo.len() {
            if shape[i] < 3 || !(hi[i] > lo[i]) {
                return Err(Error::Grid(format!("axis {i}: empty box or fewer than 3 nodes")));
            }
            let dw = (hi[i] - lo[i]) / T::from_usize_lossy(shape[i] - 2);
            spacing.push(dw);
            offset.push((lo[i] / dw).floor().to_i64().unwrap_or(0));
        }
        Self::new(shape.to_vec(), spacing, offset)
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            out[a] = idx % self.shape[a];
            idx /= self.shape[a];
        }
        out
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Frequency of flat node `idx`.
    pub fn point(&self, idx: usize) -> Vec<T> {
        let m = self.multi_index(idx);
        (0..self.ndim())
            .map(|a| self.spacing[a] * lit::<T>((self.offset[a] + m[a] as i64) as f64))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn lower(&self) -> Vec<T> {
        (0..self.ndim()).map(|a| self.spacing[a] * lit::<T>(self.offset[a] as f64)).collect()
    }

    pub fn upper(&self) -> Vec<T> {
        (0..self.ndim())
            .map(|a| self.spacing[a] * lit::<T>((self.offset[a] + self.shape[a] as i64 - 1) as f64))
            .collect()
    }

    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |p, &s| p * s)
    }

    pub fn spatial_step(&self) -> Vec<T> {
        (0..self.ndim())
            .map(|a| T::TAU() / (T::from_usize_lossy(self.shape[a]) * self.spacing[a]))
            .collect()
    }

    pub fn period(&self) -> Vec<T> {
        self.spacing.iter().map(|&s| T::TAU() / s).collect()
    }

    pub fn spatial_cell_volume(&self) -> T {
        self.spatial_step().iter().fold(T::one(), |p, &s| p * s)
    }

    /// Spatial coordinate of node `idx`, with indices taken in `[-N/2, N/2)`.
    pub fn spatial_point_centered(&self, idx: usize) -> Vec<T> {
        let m = self.multi_index(idx);
        let dx = self.spatial_step();
        (0..self.ndim())
            .map(|a| {
                let n = self.shape[a] as i64;
                let k = m[a] as i64;
                let k = if k >= (n + 1) / 2 { k - n } else { k };
                dx[a] * lit::<T>(k as f64)
            })
            .collect()
    }

    /// Doubling the node count on each axis while keeping the box.
    pub fn refined(&self) -> Result<Self> {
        let lo = self.lower();
        let shape: Vec<usize> = self.shape.iter().map(|&n| 2 * n).collect();
        let spacing: Vec<T> = self.spacing.iter().map(|&s| s / lit(2.0)).collect();
        let offset: Vec<i64> = self.offset.iter().map(|&o| 2 * o).collect();
        let g = Self::new(shape, spacing, offset)?;
        debug_assert!(g.lower().iter().zip(&lo).all(|(a, b)| (*a - *b).abs() <= T::epsilon() * lit(16.0) * (T::one() + b.abs())));
        Ok(g)
    }

    /// Same spacing, `factor` times the nodes per axis, centred on the old box.
    pub fn padded(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Grid("padding factor must be positive".into()));
        }
        let shape: Vec<usize> = self.shape.iter().map(|&n| n * factor).collect();
        let offset: Vec<i64> =
            self.offset.iter().zip(&self.shape).map(|(&o, &n)| o - ((n * (factor - 1)) / 2) as i64).collect();
        Self::new(shape, self.spacing.clone(), offset)
    }

    /// Whether the box `[lo, hi]` lies inside the grid box.
    pub fn contains_box(&self, lo: &[T], hi: &[T]) -> bool {
        let (gl, gh) = (self.lower(), self.upper());
        (0..self.ndim()).all(|a| lo[a] >= gl[a] && hi[a] <= gh[a])
    }
}

/// Multi-dimensional FFT plans for one grid shape.
#[derive(Clone)]
pub struct NdFft<T: Real> {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<T>>>,
    inv: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> std::fmt::Debug for NdFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NdFft{:?}", self.shape)
    }
}

impl<T: Real> NdFft<T> {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        NdFft {
            shape: shape.to_vec(),
            fwd: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inv: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Unnormalised transform: forward uses `exp(-2 pi i k m / N)`.
    pub fn process(&self, data: &mut [Complex<T>], inverse: bool) {
        let total: usize = self.shape.iter().product();
        assert_eq!(data.len(), total, "buffer does not match FFT shape");
        let nd = self.shape.len();
        let mut buf = Vec::new();
        let mut scratch = Vec::new();
        for a in 0..nd {
            let n = self.shape[a];
            let stride: usize = self.shape[a + 1..].iter().product();
            let plan = if inverse { &self.inv[a] } else { &self.fwd[a] };
            scratch.resize(plan.get_inplace_scratch_len(), Complex::new(T::zero(), T::zero()));
            if stride == 1 {
                for chunk in data.chunks_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            buf.resize(n, Complex::new(T::zero(), T::zero()));
            let outer = total / (n * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        buf[k] = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    for k in 0..n {
                        data[base + k * stride] = buf[k];
                    }
                }
            }
        }
    }
}

fn axis_phases<T: Real>(grid: &FreqGrid<T>, sign: T) -> Vec<Vec<Complex<T>>> {
    (0..grid.ndim())
        .map(|a| {
            let n = grid.shape[a];
            let o = grid.offset[a].rem_euclid(n as i64) as f64;
            (0..n)
                .map(|k| {
                    let ang = sign * T::TAU() * lit::<T>(o * k as f64 / n as f64);
                    Complex::new(ang.cos(), ang.sin())
                })
                .collect()
        })
        .collect()
}

fn apply_phases<T: Real>(grid: &FreqGrid<T>, data: &mut [Complex<T>], phases: &[Vec<Complex<T>>], scale: T) {
    let nd = grid.ndim();
    let mut m = vec![0usize; nd];
    for v in data.iter_mut() {
        let mut p = Complex::new(scale, T::zero());
        for a in 0..nd {
            p = p * phases[a][m[a]];
        }
        *v = *v * p;
        for a in (0..nd).rev() {
            m[a] += 1;
            if m[a] < grid.shape[a] {
                break;
            }
            m[a] = 0;
        }
    }
}

fn inv_sqrt_two_pi_pow<T: Real>(n: usize) -> T {
    T::TAU().powf(lit(-(n as f64) / 2.0))
}

/// Spectrum samples to spatial samples on the dual torus:
/// `f(x_k) = (2 pi)^(-n/2) sum_m F_m exp(i x_k . w_m) vol(dw)`.
pub fn spectrum_to_spatial<T: Real>(grid: &FreqGrid<T>, fft: &NdFft<T>, spec: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut data = spec.to_vec();
    fft.process(&mut data, true);
    let phases = axis_phases(grid, T::one());
    apply_phases(grid, &mut data, &phases, inv_sqrt_two_pi_pow::<T>(grid.ndim()) * grid.cell_volume());
    data
}

/// Inverse of [`spectrum_to_spatial`].
pub fn spatial_to_spectrum<T: Real>(grid: &FreqGrid<T>, fft: &NdFft<T>, spatial: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut data = spatial.to_vec();
    let phases = axis_phases(grid, -T::one());
    apply_phases(grid, &mut data, &phases, inv_sqrt_two_pi_pow::<T>(grid.ndim()) * grid.spatial_cell_volume());
    fft.process(&mut data, false);
    data
}

/// A spectrum that can be evaluated at arbitrary frequencies.
pub trait Spectrum<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, w: &[T]) -> Complex<T>;
    /// Gradient in `w`, when available in closed form.
    fn gradient(&self, _w: &[T]) -> Option<Vec<Complex<T>>> {
        None
    }
}

/// Complex spectrum sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T> {
    pub grid: FreqGrid<T>,
    pub values: Vec<Complex<T>>,
}

/// Real field sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField<T> {
    pub grid: FreqGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> FrequencyField<T> {
    pub fn from_fn(grid: &FreqGrid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        FrequencyField { grid: grid.clone(), values }
    }
}

impl<T: Real> SampledSignal<T> {
    pub fn new(grid: FreqGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(SampledSignal { grid, values })
    }

    pub fn zeros(grid: &FreqGrid<T>) -> Self {
        SampledSignal { grid: grid.clone(), values: vec![Complex::new(T::zero(), T::zero()); grid.len()] }
    }

    /// Sample a spectrum on `grid`.
    pub fn sample<S: Spectrum<T> + ?Sized>(spec: &S, grid: &FreqGrid<T>) -> Result<Self> {
        if spec.dim() != grid.ndim() {
            return Err(Error::Dimension { expected: grid.ndim(), got: spec.dim() });
        }
        let values = (0..grid.len()).map(|i| spec.eval(&grid.point(i))).collect();
        Ok(SampledSignal { grid: grid.clone(), values })
    }

    pub fn from_spatial(grid: &FreqGrid<T>, fft: &NdFft<T>, spatial: &[Complex<T>]) -> Result<Self> {
        if spatial.len() != grid.len() {
            return Err(Error::Grid("spatial buffer size".into()));
        }
        Ok(SampledSignal { grid: grid.clone(), values: spatial_to_spectrum(grid, fft, spatial) })
    }

    /// Embed into [`FreqGrid::padded`] with zeros; refines the spatial sampling by `factor`.
    pub fn zero_padded(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.padded(factor)?;
        let mut out = Self::zeros(&grid);
        let shift: Vec<usize> = (0..grid.ndim()).map(|a| (self.grid.offset[a] - grid.offset[a]) as usize).collect();
        for (i, v) in self.values.iter().enumerate() {
            let m: Vec<usize> = self.grid.multi_index(i).iter().zip(&shift).map(|(a, b)| a + b).collect();
            out.values[grid.flat_index(&m)] = *v;
        }
        Ok(out)
    }

    pub fn spatial(&self, fft: &NdFft<T>) -> Vec<Complex<T>> {
        spectrum_to_spatial(&self.grid, fft, &self.values)
    }

    /// Discrete `L^2` norm on the frequency side.
    pub fn l2_norm(&self) -> T {
        (self.values.iter().fold(T::zero(), |s, v| s + v.norm_sqr()) * self.grid.cell_volume()).sqrt()
    }

    /// Discrete inner product `<self, other>` (conjugate-linear in `other`).
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| s + a * b.conj());
        s * self.grid.cell_volume()
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.values.iter().zip(&other.values).fold(T::zero(), |s, (a, b)| s + (a - b).norm_sqr())
            * self.grid.cell_volume())
        .sqrt()
    }

    pub fn relative_error(&self, reference: &Self) -> T {
        self.distance(reference) / reference.l2_norm()
    }

    pub fn scale(&self, s: T) -> Self {
        SampledSignal { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Spectral gradient: transform of `-i x f(x)` with centred torus coordinates.
    pub fn spectral_gradient(&self, fft: &NdFft<T>) -> Vec<Vec<Complex<T>>> {
        let spatial = self.spatial(fft);
        (0..self.grid.ndim())
            .map(|a| {
                let weighted: Vec<Complex<T>> = spatial
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex::new(T::zero(), -self.grid.spatial_point_centered(i)[a]))
                    .collect();
                spatial_to_spectrum(&self.grid, fft, &weighted)
            })
            .collect()
    }
}

fn keys_weights<T: Real>(t: T) -> [T; 4] {
    // cubic convolution, a = -1/2, taps at -1, 0, 1, 2
    let a = lit::<T>(-0.5);
    let w = |x: T| {
        let x = x.abs();
        if x <= T::one() {
            (a + lit(2.0)) * x * x * x - (a + lit(3.0)) * x * x + T::one()
        } else if x < lit(2.0) {
            a * x * x * x - lit::<T>(5.0) * a * x * x + lit::<T>(8.0) * a * x - lit::<T>(4.0) * a
        } else {
            T::zero()
        }
    };
    [w(t + T::one()), w(t), w(T::one() - t), w(lit::<T>(2.0) - t)]
}

impl<T: Real> Spectrum<T> for SampledSignal<T> {
    fn dim(&self) -> usize {
        self.grid.ndim()
    }

    /// Tensor cubic interpolation, zero outside the grid.
    fn eval(&self, w: &[T]) -> Complex<T> {
        let nd = self.grid.ndim();
        let mut base = vec![0i64; nd];
        let mut weights = vec![[T::zero(); 4]; nd];
        for a in 0..nd {
            let u = w[a] / self.grid.spacing[a] - lit::<T>(self.grid.offset[a] as f64);
            if !(u > lit(-2.0)) || !(u < lit::<T>(self.grid.shape[a] as f64 + 1.0)) {
                return Complex::new(T::zero(), T::zero());
            }
            let f = u.floor();
            base[a] = f.to_i64().unwrap_or(0);
            weights[a] = keys_weights(u - f);
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        let taps = 4usize.pow(nd as u32);
        'outer: for t in 0..taps {
            let mut idx = 0usize;
            let mut wt = T::one();
            let mut rem = t;
            for a in 0..nd {
                let j = rem % 4;
                rem /= 4;
                let m = base[a] - 1 + j as i64;
                if m < 0 || m >= self.grid.shape[a] as i64 {
                    continue 'outer;
                }
                let stride: usize = self.grid.shape[a + 1..].iter().product();
                idx += m as usize * stride;
                wt = wt * weights[a][j];
            }
            acc = acc + self.values[idx] * wt;
        }
        acc
    }
}
