use std::path::{Path, PathBuf};

use conewave::besov::BesovParams;
use conewave::frames::{IterationOptions, Method};
use conewave::selftest::ALL_CONES;
use conewave::ConeModel;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovConfig {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl Default for BesovConfig {
    fn default() -> Self {
        BesovConfig { p: 2.0, q: 2.0, s: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub epsilon: f64,
    pub beta: f64,
    /// `H` step of the region the frame lives on.
    pub region_step: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { epsilon: 0.5, beta: 0.5, region_step: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub delta: f64,
    pub big_r: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { delta: 0.5, big_r: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cone: Option<String>,
    /// Signal grid nodes per axis.
    pub nodes: Option<usize>,
    /// Wavelet grid nodes per axis.
    pub wavelet_nodes: Option<usize>,
    pub sharpness: f64,
    pub h_step: f64,
    pub besov: BesovConfig,
    pub sampling: SamplingConfig,
    pub lattice: LatticeConfig,
    pub method: Method,
    pub max_iter: usize,
    pub tol: f64,
    /// Relative tolerance of the continuous norm quadrature.
    pub quadrature_tol: Option<f64>,
    pub seeds: Vec<u64>,
    /// Signal tensors to use instead of seeded test signals.
    pub inputs: Vec<PathBuf>,
    pub threads: Option<usize>,
    /// Cones and criteria for `selftest`; empty means all.
    pub cones: Vec<String>,
    pub criteria: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let it = IterationOptions::default();
        RunConfig {
            cone: None,
            nodes: None,
            wavelet_nodes: None,
            sharpness: 1.0,
            h_step: 0.25,
            besov: BesovConfig::default(),
            sampling: SamplingConfig::default(),
            lattice: LatticeConfig::default(),
            method: Method::T1Neumann,
            max_iter: it.max_iter,
            tol: it.tol,
            quadrature_tol: None,
            seeds: vec![1],
            inputs: vec![],
            threads: None,
            cones: vec![],
            criteria: vec![],
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
            }
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(c) = &self.cone {
            ConeModel::<f64>::parse(c).map_err(|e| bad(e.to_string()))?;
        }
        for c in &self.cones {
            ConeModel::<f64>::parse(c).map_err(|e| bad(e.to_string()))?;
        }
        if let Some(id) = self.criteria.iter().find(|&&id| !(1..=10).contains(&id)) {
            return Err(bad(format!("no criterion {id}")));
        }
        if self.nodes.is_some_and(|n| n < 4) || self.wavelet_nodes.is_some_and(|n| n < 4) {
            return Err(bad("grids need at least 4 nodes per axis"));
        }
        positive("sharpness", self.sharpness)?;
        positive("h_step", self.h_step)?;
        positive("sampling.epsilon", self.sampling.epsilon)?;
        positive("sampling.beta", self.sampling.beta)?;
        positive("sampling.region_step", self.sampling.region_step)?;
        positive("lattice.delta", self.lattice.delta)?;
        if self.lattice.big_r < 2.0 {
            return Err(bad("lattice.big_r must be at least 2"));
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(bad("tol must be non-negative and max_iter positive"));
        }
        if let Some(t) = self.quadrature_tol {
            positive("quadrature_tol", t)?;
        }
        if self.threads == Some(0) {
            return Err(bad("threads must be positive"));
        }
        if self.seeds.is_empty() && self.inputs.is_empty() {
            return Err(bad("need at least one seed or input"));
        }
        BesovParams::new(self.besov.p, self.besov.q, self.besov.s).map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn cone(&self) -> Result<ConeModel<f64>, CliError> {
        let c = self.cone.as_deref().ok_or_else(|| bad("config needs a cone"))?;
        ConeModel::parse(c).map_err(|e| bad(e.to_string()))
    }

    pub fn besov(&self) -> BesovParams {
        BesovParams { p: self.besov.p, q: self.besov.q, s: self.besov.s }
    }

    pub fn iteration(&self) -> IterationOptions {
        IterationOptions { max_iter: self.max_iter, tol: self.tol }
    }

    pub fn selftest_cones(&self) -> Vec<String> {
        if !self.cones.is_empty() {
            self.cones.clone()
        } else if let Some(c) = &self.cone {
            vec![c.clone()]
        } else {
            ALL_CONES.iter().map(|s| s.to_string()).collect()
        }
    }
}
