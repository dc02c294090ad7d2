use std::path::{Path, PathBuf};

use conewave::besov::{make_lattice, make_partition, mixed_norm, norm_continuous, norm_discrete, LatticeExtent};
use conewave::frames::{frame_bounds, make_bupu, make_wellspread, reconstruct, FrameInput, FrameOperators, Method};
use conewave::grid::SampledSignal;
use conewave::io;
use conewave::scenario::Scenario;
use conewave::selftest::{continuous_tolerance, run_selftest};
use conewave::transform::{analyze, HSamples};
use conewave::wavelet::{default_wavelet_grid, make_wavelet};
use conewave::Error;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, exit: 0 }
    }
}

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: Option<&'a Path>,
    pub verbose: bool,
}

impl Context<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("conewave: {}", msg.as_ref());
        }
    }

    fn artifact(&self, name: &str) -> Option<PathBuf> {
        self.out.map(|d| d.join(name))
    }

    fn scenario(&self) -> Result<Scenario<f64>, CliError> {
        let cone = self.cfg.cone()?;
        let mut sc = match self.cfg.nodes {
            Some(n) => Scenario::with_nodes(&cone, n)?,
            None => Scenario::standard(&cone)?,
        };
        if self.cfg.sharpness != 1.0 || self.cfg.wavelet_nodes.is_some() {
            let wgrid = match self.cfg.wavelet_nodes {
                Some(n) => default_wavelet_grid(&cone, n)?,
                None => sc.wavelet.psi_hat.grid.clone(),
            };
            sc.wavelet = make_wavelet(&cone, &wgrid, self.cfg.sharpness)?;
        }
        sc.h_step = self.cfg.h_step;
        Ok(sc)
    }

    /// Input tensors when given, seeded test signals otherwise. Inputs replace the signal grid.
    fn signals(&self, sc: &mut Scenario<f64>) -> Result<Vec<(String, SampledSignal<f64>)>, CliError> {
        if self.cfg.inputs.is_empty() {
            return self
                .cfg
                .seeds
                .iter()
                .map(|&s| Ok((format!("seed:{s}"), sc.signal(s)?.1)))
                .collect();
        }
        let mut out = Vec::new();
        for p in &self.cfg.inputs {
            let f = io::load_signal(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if f.grid.ndim() != sc.cone.dim() {
                return Err(CliError::Config(format!("{} does not match the cone dimension", p.display())));
            }
            if out.first().is_some_and(|(_, g): &(String, SampledSignal<f64>)| g.grid != f.grid) {
                return Err(CliError::Config("input signals must share one grid".into()));
            }
            out.push((p.display().to_string(), f));
        }
        sc.grid = out[0].1.grid.clone();
        Ok(out)
    }

    fn ops_region(&self, sc: &Scenario<f64>) -> Result<HSamples<f64>, CliError> {
        Ok(HSamples::support_exact(&sc.cone, self.cfg.sampling.region_step, &sc.center, sc.radius)?)
    }
}

fn grid_json(g: &conewave::grid::FreqGrid<f64>) -> Value {
    json!({ "shape": g.shape, "spacing": g.spacing, "lower": g.lower() })
}

pub fn cone_info(ctx: &Context) -> Result<Outcome, CliError> {
    let cone = ctx.cfg.cone()?;
    let b = ctx.cfg.besov();
    Ok(Outcome::ok(json!({
        "cone": cone.name(),
        "rank": cone.rank(),
        "dim": cone.dim(),
        "identity": cone.identity(),
        "besov": { "p": b.p, "q": b.q, "s": b.s, "s_prime": b.s_prime(&cone) },
    })))
}

pub fn wavelet_build(ctx: &Context) -> Result<Outcome, CliError> {
    let sc = ctx.scenario()?;
    let w = &sc.wavelet;
    if let Some(p) = ctx.artifact("wavelet.bin") {
        let psi = SampledSignal::new(w.psi_hat.grid.clone(), w.psi_hat.values.iter().map(|&v| v.into()).collect())?;
        io::save_signal(&p, &psi, Some(&sc.cone.name()))?;
    }
    Ok(Outcome::ok(json!({
        "cone": sc.cone.name(),
        "sharpness": w.sharpness,
        "kappa": w.kappa,
        "grid": grid_json(&w.psi_hat.grid),
        "admissibility_constant": w.admissibility_constant()?,
        "quadrature": w.report,
        "chart_support": w.chart_support(),
    })))
}

pub fn transform(ctx: &Context) -> Result<Outcome, CliError> {
    let mut sc = ctx.scenario()?;
    let signals = ctx.signals(&mut sc)?;
    let hs = sc.h_samples()?;
    let b = ctx.cfg.besov();
    let s_prime = b.s_prime(&sc.cone);
    let mut rows = Vec::new();
    for (i, (label, f)) in signals.iter().enumerate() {
        ctx.log(format!("analysing {label}"));
        let field = analyze(f, &sc.wavelet, &hs)?;
        if let Some(p) = ctx.artifact(&format!("field_{i}.bin")) {
            io::save_field(&p, &field)?;
        }
        rows.push(json!({
            "signal": label,
            "levels": field.levels.len(),
            "samples": field.levels.iter().map(|l| l.values.len()).sum::<usize>(),
            "max_abs": field.max_abs(),
            "mixed_norm": mixed_norm(&field, &sc.cone, b.p, b.q, s_prime)?,
        }));
    }
    Ok(Outcome::ok(json!({
        "cone": sc.cone.name(),
        "grid": grid_json(&sc.grid),
        "h_step": sc.h_step,
        "besov": { "p": b.p, "q": b.q, "s": b.s, "s_prime": s_prime },
        "signals": rows,
    })))
}

pub fn besov(ctx: &Context) -> Result<Outcome, CliError> {
    let mut sc = ctx.scenario()?;
    let signals = ctx.signals(&mut sc)?;
    let b = ctx.cfg.besov();
    let tol = ctx.cfg.quadrature_tol.unwrap_or_else(|| continuous_tolerance(sc.cone.kind(), true));
    let ext = LatticeExtent { center: sc.center.clone(), radius: sc.radius };
    let lat = make_lattice(&sc.cone, ctx.cfg.lattice.delta, ctx.cfg.lattice.big_r, &ext, &sc.grid)?;
    let part = make_partition(&sc.cone, &lat, &sc.grid)?;
    let mut rows = Vec::new();
    for (label, f) in &signals {
        ctx.log(format!("norms of {label}"));
        let cont = norm_continuous(f, &sc.wavelet, &b, 0.5, tol, 2_000_000)?;
        let disc = norm_discrete(f, &part, &b, &sc.cone)?;
        let ratio = (cont.value > 0.0).then(|| disc / cont.value);
        rows.push(json!({
            "signal": label,
            "continuous": cont.value,
            "discrete": disc,
            "ratio": ratio,
            "quadrature": cont.quadrature_report,
        }));
    }
    Ok(Outcome::ok(json!({
        "cone": sc.cone.name(),
        "besov": { "p": b.p, "q": b.q, "s": b.s, "s_prime": b.s_prime(&sc.cone) },
        "lattice_points": lat.points.len(),
        "quadrature_tol": tol,
        "signals": rows,
    })))
}

pub fn lattice(ctx: &Context) -> Result<Outcome, CliError> {
    let sc = ctx.scenario()?;
    let ext = LatticeExtent { center: sc.center.clone(), radius: sc.radius };
    let lat = make_lattice(&sc.cone, ctx.cfg.lattice.delta, ctx.cfg.lattice.big_r, &ext, &sc.grid)?;
    let part = make_partition(&sc.cone, &lat, &sc.grid)?;
    if let Some(p) = ctx.artifact("lattice.bin") {
        io::save_points(&p, &lat.points, &sc.cone.name())?;
    }
    Ok(Outcome::ok(json!({
        "cone": sc.cone.name(),
        "delta": lat.delta,
        "big_r": lat.big_r,
        "points": lat.points.len(),
        "chart_spacing": lat.spacing,
        "min_distance": lat.min_distance,
        "bands": part.bands.len(),
        "grid": grid_json(&sc.grid),
    })))
}

pub fn frame_bounds_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let mut sc = ctx.scenario()?;
    let signals = ctx.signals(&mut sc)?;
    let region = ctx.ops_region(&sc)?;
    let s = &ctx.cfg.sampling;
    let ws = make_wellspread(&sc.wavelet, &sc.grid, &region, s.epsilon, s.beta)?;
    let bupu = make_bupu(&ws)?;
    let ops = FrameOperators::new(&ws, &bupu, &sc.wavelet)?;
    let b = ctx.cfg.besov();
    let sp = conewave::besov::BesovParams { s: b.s_prime(&sc.cone), ..b };
    ctx.log(format!("{} frame points on {} levels", ws.len(), ws.levels()));
    let fb = frame_bounds(&signals.iter().map(|s| s.1.clone()).collect::<Vec<_>>(), &ops, &sp)?;
    Ok(Outcome::ok(json!({
        "cone": sc.cone.name(),
        "levels": ws.levels(),
        "max_overlap": ws.max_overlap,
        "besov": { "p": sp.p, "q": sp.q, "s_prime": sp.s },
        "bounds": fb,
    })))
}

pub fn reconstruct_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let mut sc = ctx.scenario()?;
    let signals = ctx.signals(&mut sc)?;
    let region = ctx.ops_region(&sc)?;
    let s = &ctx.cfg.sampling;
    let ws = make_wellspread(&sc.wavelet, &sc.grid, &region, s.epsilon, s.beta)?;
    let bupu = make_bupu(&ws)?;
    let ops = FrameOperators::new(&ws, &bupu, &sc.wavelet)?;
    let method = ctx.cfg.method;
    let mut rows = Vec::new();
    let mut all_converged = true;
    for (i, (label, f)) in signals.iter().enumerate() {
        ctx.log(format!("{} on {label}", method.name()));
        let rec = match method {
            Method::T2Neumann => {
                let field = ops.analyze(f)?;
                reconstruct(FrameInput::Field(&field), method, &ops, &ctx.cfg.iteration(), Some(f))?
            }
            _ => {
                let lam = ops.sample(f)?;
                reconstruct(FrameInput::Samples(&lam), method, &ops, &ctx.cfg.iteration(), Some(f))?
            }
        };
        if let Some(p) = ctx.artifact(&format!("reconstruction_{i}.bin")) {
            io::save_signal(&p, &rec.signal, Some(&sc.cone.name()))?;
        }
        if let (Some(c), Some(p)) = (&rec.coefficients, ctx.artifact(&format!("coefficients_{i}.bin"))) {
            io::save_sequence(&p, c, &ws)?;
        }
        all_converged &= rec.report.converged;
        rows.push(json!({ "signal": label, "report": rec.report }));
    }
    Ok(Outcome {
        report: json!({ "cone": sc.cone.name(), "points": ws.len(), "levels": ws.levels(), "runs": rows }),
        exit: if all_converged { 0 } else { 1 },
    })
}

pub fn selftest(ctx: &Context) -> Result<Outcome, CliError> {
    let cones = ctx.cfg.selftest_cones();
    ctx.log(format!("selftest on {}", cones.join(", ")));
    let report = run_selftest(&cones, &ctx.cfg.criteria).map_err(|e| match e {
        Error::Config(m) => CliError::Config(m),
        other => other.into(),
    })?;
    if ctx.verbose {
        for c in &report.criteria {
            eprintln!("{}", c.line());
        }
    }
    let exit = if report.passed { 0 } else { 1 };
    Ok(Outcome { report: serde_json::to_value(&report).map_err(|e| CliError::Core(e.into()))?, exit })
}
