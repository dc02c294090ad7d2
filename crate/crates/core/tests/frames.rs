use conewave::besov::BesovParams;
use conewave::frames::*;
use conewave::grid::SampledSignal;
use conewave::group::GroupPoint;
use conewave::oracle::{rasterized_sequence_norm, RasterLevel};
use conewave::scenario::Scenario;
use conewave::transform::{analyze, CoefficientField, HSamples, Represented};
use conewave::{ConeModel, Error, HElement};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LADDER: [f64; 4] = [2.0, 1.0, 0.5, 0.25];
const REGION_STEP: f64 = 0.125;

struct Setup {
    sc: Scenario<f64>,
    region: HSamples<f64>,
}

impl Setup {
    fn new(name: &str) -> Self {
        let sc = Scenario::standard(&ConeModel::parse(name).unwrap()).unwrap();
        let region = HSamples::support_exact(&sc.cone, REGION_STEP, &sc.center, sc.radius).unwrap();
        Setup { sc, region }
    }

    fn frame(&self, eps: f64, beta: f64) -> (WellSpreadSet<f64>, Bupu<f64>) {
        let ws = make_wellspread(&self.sc.wavelet, &self.sc.grid, &self.region, eps, beta).unwrap();
        let bupu = make_bupu(&ws).unwrap();
        (ws, bupu)
    }

    /// `pi(h0) psi` with `h0` moving the wavelet onto the signal region.
    fn atom(&self) -> SampledSignal<f64> {
        let n = self.sc.cone.dim();
        let g = GroupPoint::new(HElement::new(vec![2f64.ln(); n]), vec![0.0; n]);
        SampledSignal::sample(&Represented::new(&self.sc.cone, g, &self.sc.wavelet), &self.sc.grid).unwrap()
    }
}

fn field_rel(a: &CoefficientField<f64>, b: &CoefficientField<f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.levels.iter().zip(&b.levels) {
        for (u, v) in x.values.iter().zip(&y.values) {
            num += x.weight * (u - v).norm_sqr();
            den += x.weight * u.norm_sqr();
        }
    }
    (num / den).sqrt()
}

fn random_sequence(ws: &WellSpreadSet<f64>, seed: u64) -> SequenceData<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sd = SequenceData::zeros(ws);
    for v in sd.values.iter_mut().flatten() {
        *v = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    sd
}

fn axis_levels(ws: &WellSpreadSet<f64>) -> Vec<usize> {
    (0..ws.cone.dim())
        .map(|a| {
            let mut v: Vec<i64> = ws.indices.iter().map(|k| k[a]).collect();
            v.sort();
            v.dedup();
            v.len() - 1
        })
        .collect()
}

#[test]
fn halving_epsilon_doubles_cells_per_axis() {
    for name in ["orthant:r=1", "orthant:r=2"] {
        let s = Setup::new(name);
        let mut prev: Option<Vec<usize>> = None;
        for eps in LADDER {
            let ws = make_wellspread(&s.sc.wavelet, &s.sc.grid, &s.region, eps, 0.5).unwrap();
            let counts = axis_levels(&ws);
            assert_eq!(ws.levels(), counts.iter().map(|c| c + 1).product::<usize>());
            if let Some(p) = prev {
                for (c, p) in counts.iter().zip(&p) {
                    assert!((*c as i64 - 2 * *p as i64).abs() <= 1, "{name} {eps}: {c} vs {p}");
                }
            }
            prev = Some(counts);
        }
    }
}

#[test]
fn identity_slice_samples_integer_translates() {
    let sc = Scenario::standard(&ConeModel::parse("orthant:r=2").unwrap()).unwrap();
    let region = HSamples::from_points(&sc.cone, vec![vec![0.0, 0.0]], 1.0);
    let ws = make_wellspread(&sc.wavelet, &sc.grid, &region, 1.0, 1.0).unwrap();
    let j = ws.level_of(&[0, 0]).unwrap();
    let d: Vec<f64> = ws.spatial_step(j);
    for a in 0..2 {
        // capped at the torus when the wavelet band is wider than the grid
        assert!(d[a] <= ws.base_step[a] * (1.0 + 1e-12) || ws.counts[j][a] == sc.grid.shape[a]);
        assert_eq!(sc.grid.shape[a] % ws.counts[j][a], 0);
    }
    let p: GroupPoint<f64> = ws.point(j, &[3, 5]);
    assert_eq!(p.h.theta, vec![0.0, 0.0]);
    assert!((p.x[0] - 3.0 * d[0]).abs() < 1e-12 && (p.x[1] - 5.0 * d[1]).abs() < 1e-12);
}

#[test]
fn covering_certificate_is_exhaustive() {
    for (name, eps) in [("orthant:r=1", 1.0), ("orthant:r=1", 0.25), ("orthant:r=2", 1.0)] {
        let s = Setup::new(name);
        let (ws, _) = s.frame(eps, 0.5);
        assert!(ws.max_overlap >= 1 && ws.max_overlap <= 3usize.pow(2 * ws.cone.dim() as u32));
        let shape = &ws.grid.shape;
        for theta in &ws.region.thetas {
            let near: Vec<usize> = (0..ws.levels())
                .filter(|&j| ws.theta(j).iter().zip(theta).all(|(a, b)| (a - b).abs() <= 0.75 * eps + 1e-12))
                .collect();
            assert!(!near.is_empty());
            for m in 0..ws.grid.len() {
                let mi = ws.grid.multi_index(m);
                let covered = near.iter().any(|&j| {
                    (0..mi.len()).all(|a| {
                        let n = ws.counts[j][a];
                        let u = (mi[a] * n) as f64 / shape[a] as f64;
                        let off = (u - u.round()).abs();
                        n == 1 || off <= 0.75
                    })
                });
                assert!(covered, "{name}: node {m} at {theta:?}");
            }
        }
    }
}

#[test]
fn construction_errors() {
    let s = Setup::new("orthant:r=2");
    assert!(matches!(make_wellspread(&s.sc.wavelet, &s.sc.grid, &s.region, 0.0, 0.5), Err(Error::Config(_))));
    assert!(matches!(make_wellspread(&s.sc.wavelet, &s.sc.grid, &s.region, 1e-3, 0.5), Err(Error::Budget { .. })));
    let spd = Scenario::standard(&ConeModel::parse("spd2").unwrap()).unwrap();
    let hs = spd.h_samples().unwrap();
    assert!(matches!(make_wellspread(&spd.wavelet, &spd.grid, &hs, 1.0, 0.5), Err(Error::Unsupported(_))));
}

#[test]
fn bupu_sums_to_one_with_tile_support() {
    let s = Setup::new("orthant:r=1");
    let (ws, bupu) = s.frame(1.0, 0.5);
    let shape = ws.grid.shape.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let r = rng.gen_range(0..ws.region.len());
        let m = vec![rng.gen_range(0..shape[0])];
        let mut total = 0.0;
        for j in 0..ws.levels() {
            for k in 0..ws.level_len(j) {
                total += bupu.value(&ws, j, &[k], r, &m);
            }
        }
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }
    // support inside the tile, exhaustively
    for j in 0..ws.levels() {
        let n = ws.counts[j][0];
        for k in 0..n {
            for (r, theta) in ws.region.thetas.iter().enumerate() {
                for m in 0..shape[0] {
                    let v = bupu.value(&ws, j, &[k], r, &[m]);
                    assert!((0.0..=1.0).contains(&v));
                    if v > 0.0 {
                        assert!((theta[0] - ws.theta(j)[0]).abs() < 0.75);
                        let u = (m * n) as f64 / shape[0] as f64 - k as f64;
                        let off = u - (u / n as f64).round() * n as f64;
                        assert!(n == 1 || off.abs() < 0.75);
                    }
                }
            }
        }
    }
}

#[test]
fn bupu_is_one_inside_a_single_tile() {
    let s = Setup::new("orthant:r=2");
    let (ws, bupu) = s.frame(1.0, 0.5);
    let r = ws.region.thetas.iter().position(|t| t.iter().all(|v| (v - v.round()).abs() < 1e-12)).unwrap();
    let idx: Vec<i64> = ws.region.thetas[r].iter().map(|v| v.round() as i64).collect();
    let j = ws.level_of(&idx).unwrap();
    let stride: Vec<usize> = (0..2).map(|a| ws.grid.shape[a] / ws.counts[j][a]).collect();
    let v = bupu.value(&ws, j, &[1, 2], r, &[stride[0], 2 * stride[1]]);
    assert!((v - 1.0).abs() < 1e-14, "{v}");
}

#[test]
fn sampling_matches_the_transform() {
    for name in ["orthant:r=1", "orthant:r=2"] {
        let s = Setup::new(name);
        let (ws, bupu) = s.frame(0.5, 0.5);
        let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
        let zero = ops.sample(&SampledSignal::zeros(&s.sc.grid)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let (_, f) = s.sc.signal(7).unwrap();
        let lam = sample_coefficients(&f, &s.sc.wavelet, &ws, &bupu).unwrap();
        let field = analyze(&f, &s.sc.wavelet, &s.region).unwrap();
        let direct = ops.sample_field(&field).unwrap();
        let mut diff = 0.0f64;
        for (a, b) in lam.values.iter().flatten().zip(direct.values.iter().flatten()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-10 * lam.max_abs(), "{name}: {diff:e}");
    }
}

#[test]
fn sampling_a_field_needs_commensurate_steps() {
    let s = Setup::new("orthant:r=1");
    let ws = make_wellspread(&s.sc.wavelet, &s.sc.grid, &s.region, 0.3, 0.5).unwrap();
    let bupu = make_bupu(&ws).unwrap();
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let field = ops.analyze(&s.sc.signal(1).unwrap().1).unwrap();
    assert!(matches!(ops.sample_field(&field), Err(Error::Config(_))));
}

#[test]
fn sequence_norm_single_entry_and_solidity() {
    let s = Setup::new("orthant:r=2");
    let (ws, _) = s.frame(1.0, 0.5);
    let j = ws.levels() / 2;
    let c = Complex::new(0.6, -0.8) * 3.0;
    let mut sd = SequenceData::zeros(&ws);
    sd.values[j][5] = c;
    for (p, q, sp) in [(2.0, 2.0, -1.0), (1.0, 2.0, 0.5), (2.0, 1.0, 1.0)] {
        let params = BesovParams::new(p, q, sp).unwrap();
        let det = ws.cone.det_h(&ws.h(j));
        let expected = 3.0 * (det.powf(sp) * ws.h_volume(j)).powf(1.0 / q) * ws.cell_volume(j).powf(1.0 / p);
        let got = sequence_norm(&sd, &ws, &params).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected, "{got} {expected}");
    }
    let big = random_sequence(&ws, 9);
    let mut small = big.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for v in small.values.iter_mut().flatten() {
        *v *= rng.gen_range(0.0..1.0);
    }
    for (p, q, sp) in [(2.0, 2.0, -1.0), (1.0, 1.0, 0.0), (1.0, 2.0, 1.0)] {
        let params = BesovParams::new(p, q, sp).unwrap();
        assert!(sequence_norm(&small, &ws, &params).unwrap() <= sequence_norm(&big, &ws, &params).unwrap());
    }
    let mut bad = big.clone();
    bad.values.pop();
    assert!(sequence_norm(&bad, &ws, &BesovParams::new(2.0, 2.0, 0.0).unwrap()).is_err());
}

#[test]
fn sequence_norm_against_fine_grid_raster() {
    for (name, eps, fine) in [("orthant:r=1", 1.0, 256), ("orthant:r=1", 0.5, 256), ("orthant:r=2", 1.0, 48)] {
        let s = Setup::new(name);
        let (ws, _) = s.frame(eps, 0.5);
        let period = ws.grid.period();
        for seed in 0..3 {
            let sd = random_sequence(&ws, 20 + seed);
            let levels: Vec<RasterLevel> = (0..ws.levels())
                .map(|j| RasterLevel { index: ws.indices[j].clone(), counts: ws.counts[j].clone(), values: &sd.values[j] })
                .collect();
            for (p, q, sp) in [(2.0, 2.0, -1.0), (1.0, 2.0, 0.5), (2.0, 1.0, 1.0)] {
                let closed = sequence_norm(&sd, &ws, &BesovParams::new(p, q, sp).unwrap()).unwrap();
                let raster = rasterized_sequence_norm(&ws.cone, &levels, eps, &period, fine, 8, p, q, sp).unwrap();
                let factor = (closed / raster).max(raster / closed);
                assert!(factor <= 1.5, "{name} {eps} ({p},{q},{sp}): {factor}");
            }
        }
    }
}

#[test]
fn t1_t2_are_linear_and_preserve_the_integral() {
    let s = Setup::new("orthant:r=2");
    let (ws, bupu) = s.frame(1.0, 0.5);
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let fa = ops.analyze(&s.sc.signal(31).unwrap().1).unwrap();
    let fb = ops.analyze(&s.sc.signal(32).unwrap().1).unwrap();
    let mut zero = fa.clone();
    zero.levels.iter_mut().for_each(|l| l.values.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0)));
    let (a, b) = (Complex::new(0.7, -0.2), Complex::new(-1.3, 0.5));
    let mut combo = fa.clone();
    for (l, m) in combo.levels.iter_mut().zip(&fb.levels) {
        for (u, v) in l.values.iter_mut().zip(&m.values) {
            *u = *u * a + v * b;
        }
    }
    for t in [apply_t1, apply_t2] {
        let z = t(&zero, &ws, &bupu, &s.sc.wavelet).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let ta = t(&fa, &ws, &bupu, &s.sc.wavelet).unwrap();
        let tb = t(&fb, &ws, &bupu, &s.sc.wavelet).unwrap();
        let tc = t(&combo, &ws, &bupu, &s.sc.wavelet).unwrap();
        let scale = tc.max_abs();
        for ((x, y), z) in ta.levels.iter().zip(&tb.levels).zip(&tc.levels) {
            for ((u, v), w) in x.values.iter().zip(&y.values).zip(&z.values) {
                assert!((u * a + v * b - w).norm() <= 1e-12 * scale);
            }
        }
    }
    // sum of moments equals the Haar integral of the field
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut fa = fa;
    fa.levels.iter_mut().for_each(|l| l.values.iter_mut().for_each(|v| *v = Complex::new(rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0))));
    let mu = ops.moments(&fa).unwrap();
    let total: Complex<f64> = mu.values.iter().flatten().sum();
    let cell = ws.grid.spatial_cell_volume();
    let direct: Complex<f64> = fa
        .levels
        .iter()
        .map(|l| l.values.iter().sum::<Complex<f64>>() * (l.weight * cell / (std::f64::consts::TAU.powi(2) * ws.cone.det_h(&l.h))))
        .sum();
    assert!((total - direct).norm() <= 1e-8 * direct.norm().max(1e-300), "{total} {direct}");
}

#[test]
fn t1_t2_approach_identity_on_the_reproducing_space() {
    for name in ["orthant:r=1", "orthant:r=2"] {
        let s = Setup::new(name);
        let atom = s.atom();
        let (_, f) = s.sc.signal(3).unwrap();
        let mut prev = [f64::INFINITY; 2];
        let mut first_f = [0.0; 2];
        let mut last_f = [0.0; 2];
        for (i, eps) in LADDER.into_iter().enumerate() {
            let (ws, bupu) = s.frame(eps, 0.5);
            let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
            let fa = ops.analyze(&atom).unwrap();
            let ff = ops.analyze(&f).unwrap();
            for (t, which) in [(0, "T1"), (1, "T2")] {
                let apply = |x: &CoefficientField<f64>| if t == 0 { ops.t1(x).unwrap() } else { ops.t2(x).unwrap() };
                let ca = field_rel(&fa, &apply(&fa));
                assert!(ca < prev[t], "{name} {which} eps {eps}: {ca} after {}", prev[t]);
                prev[t] = ca;
                let cf = field_rel(&ff, &apply(&ff));
                if i == 0 {
                    first_f[t] = cf;
                }
                last_f[t] = cf;
            }
        }
        for t in 0..2 {
            assert!(last_f[t] < 0.25 * first_f[t], "{name}: {first_f:?} {last_f:?}");
        }
    }
}

fn reconstruction_ladder(name: &str) {
    let s = Setup::new(name);
    let (_, f) = s.sc.signal(3).unwrap();
    let fixed = IterationOptions { max_iter: 3, tol: 0.0 };
    let full = IterationOptions { max_iter: 50, tol: 1e-10 };
    let mut prev = [f64::INFINITY; 2];
    for eps in LADDER {
        let (ws, bupu) = s.frame(eps, 0.5);
        let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
        let lam = ops.sample(&f).unwrap();
        let field = ops.analyze(&f).unwrap();
        for (t, method) in [(0, Method::T1Neumann), (1, Method::T2Neumann)] {
            let input = || if t == 0 { FrameInput::Samples(&lam) } else { FrameInput::Field(&field) };
            let short = reconstruct(input(), method, &ops, &fixed, Some(&f)).unwrap();
            assert_eq!(short.report.iterations, 3);
            let err = short.report.final_error.unwrap();
            assert!(err < prev[t], "{name} {} eps {eps}: {err:e} after {:e}", method.name(), prev[t]);
            prev[t] = err;
            let long = reconstruct(input(), method, &ops, &full, Some(&f)).unwrap();
            assert!(long.report.converged && long.report.iterations <= 50);
            assert!(long.report.final_error.unwrap() <= 1e-2);
            if method == Method::T2Neumann {
                let c = long.coefficients.unwrap();
                let back = ops.atoms(&c, false).unwrap();
                assert!(back.relative_error(&f) <= 1e-2);
            }
        }
    }
}

#[test]
fn reconstruction_improves_with_epsilon_orthant1() {
    reconstruction_ladder("orthant:r=1");
}

#[test]
fn reconstruction_improves_with_epsilon_orthant2() {
    reconstruction_ladder("orthant:r=2");
}

#[test]
fn coarse_epsilon_is_reported() {
    let opts = IterationOptions::default();
    let s = Setup::new("orthant:r=2");
    let (ws, bupu) = s.frame(4.0, 0.5);
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let (_, f) = s.sc.signal(3).unwrap();
    let lam = ops.sample(&f).unwrap();
    let field = ops.analyze(&f).unwrap();
    for r in [
        reconstruct(FrameInput::Samples(&lam), Method::T1Neumann, &ops, &opts, None),
        reconstruct(FrameInput::Field(&field), Method::T2Neumann, &ops, &opts, None),
    ] {
        assert!(matches!(r, Err(Error::Divergence { iterations, .. }) if iterations <= 10));
    }
    // conjugate gradients still converge on the same data
    let cg = reconstruct(FrameInput::Samples(&lam), Method::FrameCg, &ops, &opts, Some(&f)).unwrap();
    assert!(cg.report.converged);
    assert!(cg.report.final_error.unwrap() < 1e-6);

    // stalled iteration on undersampled levels
    let s = Setup::new("orthant:r=1");
    let (ws, bupu) = s.frame(4.0, 8.0);
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let field = ops.analyze(&s.sc.signal(3).unwrap().1).unwrap();
    assert!(matches!(
        reconstruct(FrameInput::Field(&field), Method::T2Neumann, &ops, &opts, None),
        Err(Error::Divergence { .. })
    ));
}

#[test]
fn exact_atom_is_recovered() {
    let s = Setup::new("orthant:r=1");
    let (ws, bupu) = s.frame(0.5, 0.5);
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let j = ws.indices.iter().position(|k| k[0] == 1).unwrap();
    let g = ws.point(j, &[7]);
    let f = SampledSignal::sample(&Represented::new(&ws.cone, g, &s.sc.wavelet), &ws.grid).unwrap();
    let lam = ops.sample(&f).unwrap();
    let opts = IterationOptions::default();
    for m in [Method::T1Neumann, Method::FrameCg] {
        let r = reconstruct(FrameInput::Samples(&lam), m, &ops, &opts, Some(&f)).unwrap();
        assert!(r.report.final_error.unwrap() <= 1e-3, "{}", m.name());
    }
    let field = ops.analyze(&f).unwrap();
    let r = reconstruct(FrameInput::Field(&field), Method::T2Neumann, &ops, &opts, Some(&f)).unwrap();
    assert!(r.report.final_error.unwrap() <= 1e-3);
    assert!(matches!(
        reconstruct(FrameInput::Samples(&lam), Method::T2Neumann, &ops, &opts, None),
        Err(Error::Config(_))
    ));
}

#[test]
fn iteration_report_serialises() {
    let s = Setup::new("orthant:r=1");
    let (ws, bupu) = s.frame(1.0, 0.5);
    let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
    let (_, f) = s.sc.signal(2).unwrap();
    let lam = ops.sample(&f).unwrap();
    let r = reconstruct(FrameInput::Samples(&lam), Method::FrameCg, &ops, &IterationOptions::default(), Some(&f)).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r.report).unwrap();
    for key in ["method", "epsilon", "beta", "iterations", "residuals", "final_error", "converged"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["method"], "frame-cg");
    assert_eq!(Method::parse("T2-neumann").unwrap(), Method::T2Neumann);
    assert!(Method::parse("jacobi").is_err());
}

#[test]
fn frame_ratio_tightens() {
    let params = BesovParams::new(2.0, 2.0, -1.0).unwrap();
    for name in ["orthant:r=1", "orthant:r=2"] {
        let s = Setup::new(name);
        let signals: Vec<_> = (0..20).map(|k| s.sc.signal(500 + k).unwrap().1).collect();
        let mut prev = f64::INFINITY;
        for eps in LADDER {
            let (ws, bupu) = s.frame(eps, 0.5);
            let ops = FrameOperators::new(&ws, &bupu, &s.sc.wavelet).unwrap();
            let fb = frame_bounds(&signals, &ops, &params).unwrap();
            assert!(fb.a1 > 0.0 && fb.a2.is_finite() && fb.ratio >= 1.0);
            assert!(fb.ratio <= prev * 1.05, "{name} {eps}: {} after {prev}", fb.ratio);
            prev = fb.ratio;
        }
    }
}
