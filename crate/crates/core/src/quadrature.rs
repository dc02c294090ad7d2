//! Adaptive Gauss-Kronrod quadrature and uniform-lattice helpers.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let c = (a + b) / lit(2.0);
    let h = (b - a) / lit(2.0);
    let fc = f(c);
    let mut k = fc * lit(WGK[7]);
    let mut g = fc * lit(WG[3]);
    for i in 0..7 {
        let dx = h * lit(XGK[i]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * lit(WGK[i]);
        if i % 2 == 1 {
            g = g + s * lit(WG[i / 2]);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive G7/K15 on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> Result<T> {
    let (v, e) = kronrod(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..4000 {
        let total = parts.iter().fold(T::zero(), |s, p| s + p.2);
        let err = parts.iter().fold(T::zero(), |s, p| s + p.3);
        if err <= tol.max(T::epsilon() * lit(50.0) * total.abs()) {
            return Ok(total);
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .fold((0, -T::one()), |(bi, be), (i, p)| if p.3 > be { (i, p.3) } else { (bi, be) });
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = (lo + hi) / lit(2.0);
        let (v1, e1) = kronrod(&mut f, lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let err = parts.iter().fold(T::zero(), |s, p| s + p.3);
    Err(Error::Quadrature(format!("subdivision budget exhausted, error estimate {err}")))
}

/// Integral over `[a, inf)` via `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, tol: T) -> Result<T> {
    integrate(
        |t: T| {
            let u = T::one() - t;
            if u <= T::zero() {
                return T::zero();
            }
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                T::zero()
            }
        },
        T::zero(),
        T::one(),
        tol,
    )
}

/// Integer lattice `step * k` with `|step * k| <= half_width` (inclusive, symmetric).
pub fn symmetric_nodes<T: Real>(step: T, half_width: T) -> Vec<T> {
    let m = (half_width / step + lit(1e-9)).floor().to_i64().unwrap_or(0);
    (-m..=m).map(|k| step * lit(k as f64)).collect()
}

/// Cartesian product of per-axis node lists, last axis fastest.
pub fn product_nodes<T: Real>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}
