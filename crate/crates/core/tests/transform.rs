use conewave::grid::{spectrum_to_spatial, NdFft, SampledSignal, Spectrum};
use conewave::group::{GroupPoint, LieDirection};
use conewave::oracle::bruteforce_group_convolution;
use conewave::scenario::Scenario;
use conewave::transform::*;
use conewave::{ConeModel, HElement, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(name: &str) -> Scenario<f64> {
    Scenario::standard(&ConeModel::parse(name).unwrap()).unwrap()
}

fn rel_sup(a: &CoefficientField<f64>, b: &CoefficientField<f64>) -> f64 {
    a.max_diff(b).unwrap() / b.max_abs()
}

#[test]
fn unitary_on_exact_path() {
    for (name, nodes) in [("orthant:r=1", 256), ("orthant:r=2", 192), ("spd2", 160)] {
        let sc = Scenario::<f64>::with_nodes(&ConeModel::parse(name).unwrap(), nodes).unwrap();
        let (sig, f) = sc.signal(1).unwrap();
        let h = HElement::new(vec![0.05; sc.cone.dim()]);
        let g = GroupPoint::new(h, vec![0.3; sc.cone.dim()]);
        let pf = rep_apply_model(&sc.cone, &g, &sig, &sc.grid).unwrap();
        let drift = (pf.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
        assert!(drift < 1e-10, "{name}: {drift:e}");

        let gi = g.inverse(&sc.cone);
        let back = Represented::new(&sc.cone, gi, &sig);
        let rt = rep_apply_model(&sc.cone, &g, &back, &sc.grid).unwrap();
        assert!(rt.relative_error(&f) < 1e-12, "{name}");
    }
}

#[test]
fn interpolated_round_trip() {
    let sc = scenario("orthant:r=1");
    let (_, f) = sc.signal(2).unwrap();
    let g = GroupPoint::new(HElement::new(vec![0.04]), vec![0.5]);
    let once = rep_apply(&sc.cone, &g.inverse(&sc.cone), &f).unwrap();
    let twice = rep_apply(&sc.cone, &g, &once).unwrap();
    let err = twice.relative_error(&f);
    assert!(err < 1e-4, "{err:e}");
    let id = rep_apply(&sc.cone, &GroupPoint::identity(&sc.cone), &f).unwrap();
    assert!(id.relative_error(&f) < 1e-14);
}

#[test]
fn grid_translation_is_circular_shift() {
    let sc = scenario("orthant:r=2");
    let (_, f) = sc.signal(3).unwrap();
    let dx = sc.grid.spatial_step();
    let k = [3usize, 5];
    let g = GroupPoint::new(sc.cone.h_identity(), vec![dx[0] * k[0] as f64, dx[1] * k[1] as f64]);
    let pf = rep_apply(&sc.cone, &g, &f).unwrap();
    let fft = NdFft::new(&sc.grid.shape);
    let a = f.spatial(&fft);
    let b = pf.spatial(&fft);
    let n = &sc.grid.shape;
    let mut worst = 0.0f64;
    for i in 0..sc.grid.len() {
        let m = sc.grid.multi_index(i);
        let src = [(m[0] + n[0] - k[0]) % n[0], (m[1] + n[1] - k[1]) % n[1]];
        worst = worst.max((b[i] - a[sc.grid.flat_index(&src)]).norm());
    }
    let peak = a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!(worst / peak < 1e-12, "{}", worst / peak);
}

#[test]
fn analyze_matches_direct_sum() {
    for name in ["orthant:r=1", "spd2"] {
        let sc = scenario(name);
        let (_, f) = sc.signal(4).unwrap();
        let hs = sc.h_samples().unwrap();
        let field = analyze(&f, &sc.wavelet, &hs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..4 {
            let j = rng.gen_range(0..hs.len());
            let level = &field.levels[j];
            let k = rng.gen_range(0..level.values.len());
            let x = level.lattice.point(k);
            let h = &level.h;
            let mut acc = Complex::new(0.0, 0.0);
            for i in 0..f.grid.len() {
                let w = f.grid.point(i);
                let p = sc.wavelet.eval_dilated(h, &w);
                acc += f.values[i] * p * Complex::from_polar(1.0, sc.cone.inner(&x, &w));
            }
            acc *= sc.cone.det_h(h).sqrt() * f.grid.cell_volume();
            let scale = field.max_abs();
            assert!((acc - level.values[k]).norm() / scale < 1e-10, "{name}");
        }
    }
}

#[test]
fn wavelet_autocorrelation_at_identity() {
    let sc = scenario("orthant:r=1");
    let grid = sc.wavelet.psi_hat.grid.clone();
    let psi = SampledSignal::sample(&sc.wavelet, &grid).unwrap();
    let hs = HSamples::from_points(&sc.cone, vec![vec![0.0]], 1.0);
    let field = analyze(&psi, &sc.wavelet, &hs).unwrap();
    let expected: f64 = psi.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume();
    assert!((field.levels[0].values[0].re - expected).abs() < 1e-12 * expected);
}

#[test]
fn disjoint_support_gives_zero() {
    let sc = scenario("orthant:r=1");
    let (_, f) = sc.signal(5).unwrap();
    // d(h* w, e) > 2 for every w in the signal region
    let hs = HSamples::from_points(&sc.cone, vec![vec![4.0], vec![-4.5]], 0.25);
    let field = analyze_partial(&f, &sc.wavelet, &hs).unwrap();
    assert_eq!(field.max_abs(), 0.0);
    assert!(matches!(analyze(&f, &sc.wavelet, &hs), Err(conewave::Error::Uncovered { fraction }) if fraction == 1.0));
}

#[test]
fn covariance_exact_on_adapted_layout() {
    for name in ["orthant:r=1", "orthant:r=2", "spd2"] {
        let sc = scenario(name);
        let (sig, _) = sc.signal(6).unwrap();
        let local = sc.wavelet.psi_hat.grid.clone();
        let local = if sc.cone.dim() == 3 {
            conewave::wavelet::default_wavelet_grid(&sc.cone, 24).unwrap()
        } else {
            local
        };
        let n = sc.cone.dim();
        let step = sc.h_step;
        let g0 = GroupPoint::new(HElement::new(vec![step; n]), vec![0.7; n]);
        let moved = Represented::new(&sc.cone, g0.clone(), &sig);
        let hs = HSamples::from_points(&sc.cone, vec![vec![0.0; n], vec![-step; n], vec![2.0 * step; n]], step);
        let field = analyze_adapted(&moved, &sc.wavelet, &hs, &local).unwrap();
        let peak = field.max_abs();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g0i = g0.inverse(&sc.cone);
        for level in &field.levels {
            for _ in 0..3 {
                let k = rng.gen_range(0..level.values.len());
                let g = GroupPoint::new(level.h.clone(), level.lattice.point(k));
                let reference = voice_at(&sig, &sc.wavelet, &g0i.product(&sc.cone, &g), &local);
                let err = (reference - level.values[k]).norm() / peak;
                assert!(err < 1e-8, "{name}: {err:e}");
            }
        }
    }
}

#[test]
fn torus_translation_covariance() {
    let sc = scenario("orthant:r=1");
    let (_, f) = sc.signal(7).unwrap();
    let dx = sc.grid.spatial_step()[0];
    let g0 = GroupPoint::new(sc.cone.h_identity(), vec![4.0 * dx]);
    let pf = rep_apply(&sc.cone, &g0, &f).unwrap();
    let hs = sc.h_samples().unwrap();
    let a = analyze(&f, &sc.wavelet, &hs).unwrap();
    let b = analyze(&pf, &sc.wavelet, &hs).unwrap();
    let n = sc.grid.shape[0];
    let mut worst = 0.0f64;
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        for k in 0..n {
            worst = worst.max((lb.values[(k + 4) % n] - la.values[k]).norm());
        }
    }
    assert!(worst / a.max_abs() < 1e-12);
}

#[test]
fn synthesis_of_single_coefficient() {
    let sc = scenario("orthant:r=2");
    let h0 = HElement::new(vec![0.1, -0.2]);
    let x0 = vec![0.4, -1.0];
    let level = Level {
        h: h0.clone(),
        weight: 1.0,
        lattice: SpatialLattice { basis: conewave::mat::Mat::identity(2), origin: x0.clone(), shape: vec![1, 1] },
        values: vec![Complex::new(1.0, 0.0)],
    };
    let field = CoefficientField { cone: sc.cone.name(), levels: vec![level] };
    let grid = sc.wavelet.psi_hat.grid.clone();
    let out = synthesize(&field, &sc.wavelet, &grid).unwrap();
    let atom = rep_apply_model(&sc.cone, &GroupPoint::new(h0.clone(), x0), &sc.wavelet, &grid).unwrap();
    let scaled = out.scale(std::f64::consts::TAU.powi(2) * sc.cone.det_h(&h0));
    assert!(scaled.relative_error(&atom) < 1e-12);

    let zero = CoefficientField { cone: sc.cone.name(), levels: vec![] };
    assert_eq!(synthesize(&zero, &sc.wavelet, &grid).unwrap().l2_norm(), 0.0);
}

#[test]
fn synthesis_inverts_analysis() {
    for name in ["orthant:r=1", "orthant:r=2", "spd2"] {
        let sc = scenario(name);
        let (_, f) = sc.signal(8).unwrap();
        let hs = sc.h_samples().unwrap();
        let field = analyze(&f, &sc.wavelet, &hs).unwrap();
        let back = synthesize(&field, &sc.wavelet, &sc.grid).unwrap();
        let err = back.relative_error(&f);
        assert!(err < 1e-2, "{name}: {err:e}");
    }
}

#[test]
fn reproducing_formula() {
    for name in ["orthant:r=1", "orthant:r=2", "spd2"] {
        let sc = scenario(name);
        let hs = sc.h_samples().unwrap();
        let kernel = ReproducingKernel { wavelet: &sc.wavelet };
        for seed in [21, 22, 23] {
            let (_, f) = sc.signal(seed).unwrap();
            let field = analyze(&f, &sc.wavelet, &hs).unwrap();
            let conv = group_convolve(&sc.cone, &field, &kernel, &sc.grid).unwrap();
            let r = rel_sup(&conv, &field);
            assert!(r < 5e-3, "{name} seed {seed}: {r:e}");
        }
    }
}

struct Opaque<'a>(ReproducingKernel<'a, f64>);

impl GroupKernel<f64> for Opaque<'_> {
    fn x_spectrum(&self, h: &HElement<f64>, v: &[f64]) -> Complex<f64> {
        self.0.x_spectrum(h, v)
    }
}

#[test]
fn fast_and_general_convolution_agree() {
    let sc = scenario("spd2");
    let (_, f) = sc.signal(31).unwrap();
    let hs = sc.h_samples().unwrap();
    let idx: Vec<usize> = (0..hs.len()).step_by(9).collect();
    let hs = hs.subset(&idx);
    let field = analyze(&f, &sc.wavelet, &hs).unwrap();
    let fast = group_convolve(&sc.cone, &field, &ReproducingKernel { wavelet: &sc.wavelet }, &sc.grid).unwrap();
    let out = hs.subset(&[0, hs.len() / 2]);
    let fast_at = group_convolve_at(&sc.cone, &field, &ReproducingKernel { wavelet: &sc.wavelet }, &sc.grid, &out).unwrap();
    let slow = group_convolve_at(&sc.cone, &field, &Opaque(ReproducingKernel { wavelet: &sc.wavelet }), &sc.grid, &out).unwrap();
    assert!(rel_sup(&slow, &fast_at) < 1e-12);
    assert_eq!(fast.levels[0].values, fast_at.levels[0].values);
}

#[test]
fn convolution_matches_bruteforce() {
    let cone = ConeModel::<f64>::orthant(1).unwrap();
    let sc = Scenario::with_nodes(&cone, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hs = HSamples::from_points(&cone, vec![vec![0.0], vec![0.25]], 0.25);
    let lattice = SpatialLattice::torus(&sc.grid);
    let levels = (0..hs.len())
        .map(|j| Level {
            h: hs.element(j),
            weight: hs.weights[j],
            lattice: lattice.clone(),
            values: (0..16).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
        })
        .collect();
    let field = CoefficientField { cone: cone.name(), levels };
    let out = HSamples::from_points(&cone, vec![vec![0.0], vec![-0.25], vec![0.5]], 0.25);
    let kernel = ReproducingKernel { wavelet: &sc.wavelet };
    let fast = group_convolve_at(&cone, &field, &kernel, &sc.grid, &out).unwrap();
    let general = group_convolve_at(&cone, &field, &Opaque(ReproducingKernel { wavelet: &sc.wavelet }), &sc.grid, &out).unwrap();
    let brute = bruteforce_group_convolution(&cone, &field, &kernel, &sc.grid, &out).unwrap();
    assert!(rel_sup(&fast, &brute) < 1e-10, "{:e}", rel_sup(&fast, &brute));
    assert!(rel_sup(&general, &brute) < 1e-10);

    let zero = CoefficientField {
        cone: cone.name(),
        levels: field.levels.iter().map(|l| Level { values: vec![Complex::new(0.0, 0.0); 16], ..l.clone() }).collect(),
    };
    assert_eq!(group_convolve(&cone, &zero, &kernel, &sc.grid).unwrap().max_abs(), 0.0);
}

#[test]
fn convolution_left_equivariance() {
    let sc = scenario("orthant:r=1");
    let (_, f) = sc.signal(41).unwrap();
    let hs = sc.h_samples().unwrap();
    let field = analyze(&f, &sc.wavelet, &hs).unwrap();
    let kernel = ReproducingKernel { wavelet: &sc.wavelet };
    let dx = sc.grid.spatial_step()[0];
    let g0 = GroupPoint::new(sc.cone.h_identity(), vec![6.0 * dx]);
    let moved = field.left_translate(&sc.cone, &g0);
    // translations keep the torus layout once relabelled by a circular shift
    let n = sc.grid.shape[0];
    let shifted = CoefficientField {
        cone: field.cone.clone(),
        levels: field
            .levels
            .iter()
            .map(|l| Level {
                lattice: SpatialLattice::torus(&sc.grid),
                values: (0..n).map(|k| l.values[(k + n - 6) % n]).collect(),
                ..l.clone()
            })
            .collect(),
    };
    assert_eq!(moved.levels[0].lattice.origin, vec![6.0 * dx]);
    let a = group_convolve(&sc.cone, &shifted, &kernel, &sc.grid).unwrap();
    let b = group_convolve(&sc.cone, &field, &kernel, &sc.grid).unwrap();
    let mut worst = 0.0f64;
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        for k in 0..n {
            worst = worst.max((la.values[(k + 6) % n] - lb.values[k]).norm());
        }
    }
    assert!(worst / b.max_abs() < 1e-12);
}

fn fd_error<S: Spectrum<f64>>(sc: &Scenario<f64>, x: &LieDirection<f64>, sig: &S, t: f64) -> (f64, SampledSignal<f64>) {
    let formula = rep_derivative_model(&sc.cone, x, sig, &sc.grid).unwrap();
    let plus = rep_apply_model(&sc.cone, &GroupPoint::exp(&sc.cone, x, t), sig, &sc.grid).unwrap();
    let minus = rep_apply_model(&sc.cone, &GroupPoint::exp(&sc.cone, x, -t), sig, &sc.grid).unwrap();
    let vals = plus.values.iter().zip(&minus.values).map(|(a, b)| (a - b) / (2.0 * t)).collect();
    let fd = SampledSignal::new(sc.grid.clone(), vals).unwrap();
    (fd.relative_error(&formula), formula)
}

#[test]
fn derivative_matches_finite_differences() {
    for name in ["orthant:r=1", "orthant:r=2", "spd2"] {
        let sc = scenario(name);
        let (sig, _) = sc.signal(51).unwrap();
        let n = sc.cone.dim();
        let x = LieDirection {
            h_dir: (0..n).map(|i| 0.3 - 0.2 * i as f64).collect(),
            x_dir: (0..n).map(|i| 0.5 + 0.1 * i as f64).collect(),
        };
        let (e, _) = fd_error(&sc, &x, &sig, 1e-4);
        assert!(e < 1e-6, "{name}: {e:e}");
        let (e1, _) = fd_error(&sc, &x, &sig, 2e-2);
        let (e2, _) = fd_error(&sc, &x, &sig, 1e-2);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "{name}: order {order}");
    }
}

#[test]
fn derivative_special_directions() {
    let sc = scenario("orthant:r=2");
    let (sig, f) = sc.signal(52).unwrap();
    let zero = LieDirection { h_dir: vec![0.0; 2], x_dir: vec![0.0; 2] };
    assert_eq!(rep_derivative(&sc.cone, &zero, &f).unwrap().l2_norm(), 0.0);
    assert_eq!(rep_derivative_model(&sc.cone, &zero, &sig, &sc.grid).unwrap().l2_norm(), 0.0);

    let tr = LieDirection { h_dir: vec![0.0; 2], x_dir: vec![0.0, 1.0] };
    let d = rep_derivative(&sc.cone, &tr, &f).unwrap();
    for i in 0..f.grid.len() {
        let w = f.grid.point(i);
        let expected = f.values[i] * Complex::new(0.0, -w[1]);
        assert!((d.values[i] - expected).norm() < 1e-14);
    }

    // spectral gradient on the samples converges to the closed form
    let cone = ConeModel::<f64>::orthant(1).unwrap();
    let x = LieDirection { h_dir: vec![0.2], x_dir: vec![0.3] };
    let mut errs = Vec::new();
    for nodes in [128, 256, 512] {
        let sc = Scenario::with_nodes(&cone, nodes).unwrap();
        let (sig, f) = sc.signal(52).unwrap();
        let sampled = rep_derivative(&sc.cone, &x, &f).unwrap();
        let model = rep_derivative_model(&sc.cone, &x, &sig, &sc.grid).unwrap();
        errs.push(sampled.relative_error(&model));
    }
    eprintln!("{errs:?}");
    assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-4, "{errs:?}");
}

#[test]
fn single_precision_transform_runs() {
    let cone = ConeModel::<f32>::orthant(1).unwrap();
    let sc = Scenario::standard(&cone).unwrap();
    let (_, f) = sc.signal(1).unwrap();
    let hs = sc.h_samples().unwrap();
    let field = analyze(&f, &sc.wavelet, &hs).unwrap();
    let back = synthesize(&field, &sc.wavelet, &sc.grid).unwrap();
    assert!(back.relative_error(&f).to_f64_lossy() < 2e-2);
}

#[test]
fn spatial_helper_round_trip() {
    let sc = scenario("orthant:r=1");
    let (_, f) = sc.signal(9).unwrap();
    let fft = NdFft::new(&sc.grid.shape);
    let x = spectrum_to_spatial(&sc.grid, &fft, &f.values);
    let back = SampledSignal::from_spatial(&sc.grid, &fft, &x).unwrap();
    assert!(back.relative_error(&f) < 1e-13);
}
