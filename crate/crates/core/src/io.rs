//! Raw little-endian `float64` / `complex128` tensors with a JSON sidecar header.
//!
//! A tensor stored at `name.bin` has its header at `name.bin.json`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{SequenceData, WellSpreadSet};
use crate::grid::{FreqGrid, SampledSignal};
use crate::transform::{CoefficientField, Level, SpatialLattice};
use crate::HElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Float64,
    Complex128,
}

impl TensorKind {
    fn width(self) -> usize {
        match self {
            TensorKind::Float64 => 1,
            TensorKind::Complex128 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub kind: TensorKind,
    pub grid_spacing: Vec<f64>,
    /// Integer offset times spacing for frequency grids, zero for torus fields.
    pub origin: Vec<f64>,
    #[serde(default)]
    pub cone: Option<String>,
    #[serde(default)]
    pub h_chart_coords: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Samples per axis of each level, for sequence data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_counts: Option<Vec<Vec<usize>>>,
}

impl TensorHeader {
    fn scalars(&self) -> usize {
        self.shape.iter().product::<usize>() * self.kind.width()
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_tensor(path: &Path, header: &TensorHeader, data: &[f64]) -> Result<()> {
    if data.len() != header.scalars() {
        return Err(Error::Io(format!("tensor holds {} values, header expects {}", data.len(), header.scalars())));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(TensorHeader, Vec<f64>)> {
    let header: TensorHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != header.scalars() * 8 {
        return Err(Error::Io(format!("{} holds {} bytes, header expects {}", path.display(), bytes.len(), header.scalars() * 8)));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((header, data))
}

fn interleave(values: &[Complex<f64>]) -> Vec<f64> {
    values.iter().flat_map(|v| [v.re, v.im]).collect()
}

fn deinterleave(data: &[f64]) -> Vec<Complex<f64>> {
    data.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect()
}

/// Spectrum samples on their frequency grid.
pub fn save_signal(path: &Path, f: &SampledSignal<f64>, cone: Option<&str>) -> Result<()> {
    let g = &f.grid;
    let header = TensorHeader {
        shape: g.shape.clone(),
        kind: TensorKind::Complex128,
        grid_spacing: g.spacing.clone(),
        origin: g.lower(),
        cone: cone.map(str::to_string),
        h_chart_coords: None,
        weights: None,
        level_counts: None,
    };
    write_tensor(path, &header, &interleave(&f.values))
}

pub fn load_signal(path: &Path) -> Result<SampledSignal<f64>> {
    let (h, data) = read_tensor(path)?;
    if h.kind != TensorKind::Complex128 || h.grid_spacing.len() != h.shape.len() || h.origin.len() != h.shape.len() {
        return Err(Error::Io("not a signal tensor".into()));
    }
    let offset = h.origin.iter().zip(&h.grid_spacing).map(|(o, d)| (o / d).round() as i64).collect();
    let grid = FreqGrid::new(h.shape.clone(), h.grid_spacing.clone(), offset)?;
    SampledSignal::new(grid, deinterleave(&data))
}

/// A torus-layout coefficient field as a `[levels, spatial...]` tensor.
pub fn save_field(path: &Path, field: &CoefficientField<f64>) -> Result<()> {
    let first = field.levels.first().ok_or_else(|| Error::Io("empty field".into()))?;
    let shape = first.lattice.shape.clone();
    let n = shape.len();
    if field.levels.iter().any(|l| l.lattice != first.lattice) || (0..n).any(|a| (0..n).any(|b| a != b && first.lattice.basis.get(a, b) != 0.0)) {
        return Err(Error::Unsupported("only torus fields with a common diagonal lattice can be saved".into()));
    }
    let mut full = vec![field.levels.len()];
    full.extend(&shape);
    let header = TensorHeader {
        shape: full,
        kind: TensorKind::Complex128,
        grid_spacing: (0..n).map(|a| first.lattice.basis.get(a, a)).collect(),
        origin: first.lattice.origin.clone(),
        cone: Some(field.cone.clone()),
        h_chart_coords: Some(field.levels.iter().map(|l| l.h.theta.clone()).collect()),
        weights: Some(field.levels.iter().map(|l| l.weight).collect()),
        level_counts: None,
    };
    let data: Vec<f64> = field.levels.iter().flat_map(|l| interleave(&l.values)).collect();
    write_tensor(path, &header, &data)
}

pub fn load_field(path: &Path) -> Result<CoefficientField<f64>> {
    let (h, data) = read_tensor(path)?;
    let (Some(thetas), Some(weights), Some(cone)) = (h.h_chart_coords, h.weights, h.cone) else {
        return Err(Error::Io("field header needs cone, h_chart_coords and weights".into()));
    };
    if h.kind != TensorKind::Complex128 || h.shape.len() < 2 || thetas.len() != h.shape[0] || weights.len() != h.shape[0] {
        return Err(Error::Io("not a field tensor".into()));
    }
    let spatial = h.shape[1..].to_vec();
    let lattice = SpatialLattice {
        basis: crate::mat::Mat::diag(&h.grid_spacing),
        origin: h.origin.clone(),
        shape: spatial.clone(),
    };
    let per = spatial.iter().product::<usize>() * 2;
    let levels = thetas
        .into_iter()
        .zip(weights)
        .zip(data.chunks_exact(per))
        .map(|((t, w), chunk)| Level { h: HElement::new(t), weight: w, lattice: lattice.clone(), values: deinterleave(chunk) })
        .collect();
    Ok(CoefficientField { cone, levels })
}

/// Sequence data flattened level by level, with the level chart nodes and counts.
pub fn save_sequence(path: &Path, sd: &SequenceData<f64>, ws: &WellSpreadSet<f64>) -> Result<()> {
    if sd.values.len() != ws.levels() {
        return Err(Error::Grid("sequence data does not match the well-spread set".into()));
    }
    let total = sd.values.iter().map(Vec::len).sum();
    let header = TensorHeader {
        shape: vec![total],
        kind: TensorKind::Complex128,
        grid_spacing: ws.grid.spacing.clone(),
        origin: ws.grid.lower(),
        cone: Some(ws.cone.name()),
        h_chart_coords: Some((0..ws.levels()).map(|j| ws.theta(j)).collect()),
        weights: Some((0..ws.levels()).map(|j| ws.h_volume(j)).collect()),
        level_counts: Some(ws.counts.clone()),
    };
    let data: Vec<f64> = sd.values.iter().flat_map(|v| interleave(v)).collect();
    write_tensor(path, &header, &data)
}

/// Reads sequence data saved for `ws`.
pub fn load_sequence(path: &Path, ws: &WellSpreadSet<f64>) -> Result<SequenceData<f64>> {
    let (h, data) = read_tensor(path)?;
    if h.level_counts.as_ref() != Some(&ws.counts) || h.kind != TensorKind::Complex128 {
        return Err(Error::Grid("stored sequence belongs to a different well-spread set".into()));
    }
    let all = deinterleave(&data);
    let mut values = Vec::with_capacity(ws.levels());
    let mut at = 0;
    for j in 0..ws.levels() {
        let n = ws.level_len(j);
        values.push(all[at..at + n].to_vec());
        at += n;
    }
    Ok(SequenceData { values })
}

/// Cone points as a flat `[count, dim]` float64 tensor.
pub fn save_points(path: &Path, points: &[Vec<f64>], cone: &str) -> Result<()> {
    let dim = points.first().map_or(0, Vec::len);
    let header = TensorHeader {
        shape: vec![points.len(), dim],
        kind: TensorKind::Float64,
        grid_spacing: vec![],
        origin: vec![],
        cone: Some(cone.to_string()),
        h_chart_coords: None,
        weights: None,
        level_counts: None,
    };
    write_tensor(path, &header, &points.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.bin");
        let header = TensorHeader {
            shape: vec![2, 3],
            kind: TensorKind::Float64,
            grid_spacing: vec![0.5, 0.25],
            origin: vec![1.0, -2.0],
            cone: None,
            h_chart_coords: None,
            weights: None,
            level_counts: None,
        };
        let data = vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, -3.25, 0.1];
        write_tensor(&p, &header, &data).unwrap();
        let (h, d) = read_tensor(&p).unwrap();
        assert_eq!(h, header);
        assert!(d.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let raw = fs::read(&p).unwrap();
        assert_eq!(&raw[..8], &1.0f64.to_le_bytes());
        assert!(write_tensor(&p, &header, &data[..5]).is_err());
    }

    #[test]
    fn signal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        let grid = FreqGrid::new(vec![4, 3], vec![0.5, 0.25], vec![3, -2]).unwrap();
        let values = (0..12).map(|i| Complex::new(i as f64, -(i as f64) / 3.0)).collect();
        let f = SampledSignal::new(grid, values).unwrap();
        save_signal(&p, &f, Some("orthant:r=2")).unwrap();
        assert_eq!(load_signal(&p).unwrap(), f);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(v["kind"], "complex128");
        assert_eq!(v["cone"], "orthant:r=2");
    }
}
