//! Standard desk-scale setups: a cone, its wavelet, a signal grid and an `H` step.

use crate::cone::{ConeKind, ConeModel};
use crate::error::Result;
use crate::grid::{FreqGrid, SampledSignal};
use crate::oracle::{make_test_signal, TestSignal, TestSignalSpec};
use crate::scalar::{lit, Real};
use crate::transform::HSamples;
use crate::wavelet::{default_wavelet_grid, make_wavelet, WaveletSystem};

#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub cone: ConeModel<T>,
    pub wavelet: WaveletSystem<T>,
    /// Torus grid for signals.
    pub grid: FreqGrid<T>,
    /// Centre and metric radius of the signal region.
    pub center: Vec<f64>,
    pub radius: f64,
    pub h_step: T,
}

/// Signal grid nodes per axis at refinement level 0.
pub fn default_nodes(kind: ConeKind) -> usize {
    match kind {
        ConeKind::Orthant(1) => 256,
        ConeKind::Orthant(2) => 48,
        ConeKind::Orthant(_) => 24,
        ConeKind::Spd2 => 24,
    }
}

fn wavelet_nodes(kind: ConeKind) -> usize {
    match kind {
        ConeKind::Orthant(1) => 128,
        ConeKind::Orthant(_) => 72,
        ConeKind::Spd2 => 72,
    }
}

impl<T: Real> Scenario<T> {
    /// The standard setup for `cone` with `nodes` signal grid nodes per axis.
    pub fn with_nodes(cone: &ConeModel<T>, nodes: usize) -> Result<Self> {
        let (center, radius) = match cone.kind() {
            ConeKind::Orthant(r) => (vec![2.0; r], 0.6),
            ConeKind::Spd2 => (vec![2.0, 0.0, 2.0], 0.5),
        };
        let wgrid = default_wavelet_grid(cone, wavelet_nodes(cone.kind()))?;
        let wavelet = make_wavelet(cone, &wgrid, T::one())?;
        let c: Vec<T> = center.iter().map(|&v| lit(v)).collect();
        let (lo, hi) = cone.ball_bounding_box(&c, lit(radius));
        let pad: Vec<T> = lo.iter().zip(&hi).map(|(&a, &b)| (b - a) * lit(0.05)).collect();
        let lo: Vec<T> = lo.iter().zip(&pad).map(|(&a, &p)| a - p).collect();
        let hi: Vec<T> = hi.iter().zip(&pad).map(|(&a, &p)| a + p).collect();
        let grid = FreqGrid::covering(&lo, &hi, &vec![nodes; cone.dim()])?;
        Ok(Scenario { cone: cone.clone(), wavelet, grid, center, radius, h_step: lit(0.25) })
    }

    pub fn standard(cone: &ConeModel<T>) -> Result<Self> {
        Self::with_nodes(cone, default_nodes(cone.kind()))
    }

    pub fn signal_spec(&self, seed: u64) -> TestSignalSpec {
        TestSignalSpec::new(seed, 3, self.center.clone(), self.radius)
    }

    pub fn signal(&self, seed: u64) -> Result<(TestSignal<T>, SampledSignal<T>)> {
        make_test_signal(&self.cone, &self.signal_spec(seed), &self.grid)
    }

    /// Every lattice `h` whose dilated wavelet meets the signal region.
    pub fn h_samples(&self) -> Result<HSamples<T>> {
        let c: Vec<T> = self.center.iter().map(|&v| lit(v)).collect();
        HSamples::support_exact(&self.cone, self.h_step, &c, lit(self.radius))
    }
}
