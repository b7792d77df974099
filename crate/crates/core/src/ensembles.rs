//! Matrix-valued processes assembled from independent entry paths.
//!
//! Entry `(i, j)` of every variant is a deterministic function of
//! `(seed, domain, index)`, so frames can be rebuilt piecewise and in any
//! order. Paths are integrated once per requested chunk of output times and
//! only the values at those times are retained.

use std::f64::consts::SQRT_2;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dump::{write_binary, FRAME_MAGIC};
use crate::error::{Result, SpectralError};
use crate::fractional_noise::{FgnSampler, HurstParameter, SamplerOptions, TimeGrid};
use crate::matrix::{FrameMatrix, HermMatrix, SymMatrix};
use crate::pathwise_sde::{
    integrate_2d_into, integrate_into, moment_table, moment_table_2d, CoefficientSet,
    CoefficientSet2D, InitialLaw, InitialLaw2D, Preset,
};
use crate::rng::{self, derive_seed, lattice_index, pair_index, substream};

/// Smallest Monte Carlo size accepted for estimated Wishart centering.
pub const MIN_CENTERING_MC: usize = 10_000;

// Upper bound on retained entry values per chunk of output times.
const CHUNK_VALUES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WignerReal,
    WignerComplex,
    Dependent,
    WishartReal,
    WishartComplex,
}

impl Variant {
    pub fn is_wishart(self) -> bool {
        matches!(self, Variant::WishartReal | Variant::WishartComplex)
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Variant::WignerComplex | Variant::WishartComplex)
    }
}

/// One term `a_r X_{(i,j)+r}` of a dependent entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexTerm {
    pub offset: (i64, i64),
    pub weight: f64,
}

/// How Wishart factor entries are centered.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    /// Uncentered entries.
    None,
    /// Known means at every grid node (`[re, im]`; `im` unused for real variants).
    Table(Vec<[f64; 2]>),
    /// Closed-form means of a preset, evaluated with the spec's initial law.
    Exact(Preset),
    /// Monte Carlo means with `n_mc >= MIN_CENTERING_MC` replicas.
    Estimate { n_mc: usize },
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub variant: Variant,
    pub n: usize,
    /// Wishart row count.
    pub p: usize,
    pub index_set: Vec<IndexTerm>,
    pub coeffs: CoefficientSet,
    pub coeffs_2d: CoefficientSet2D,
    pub x0: InitialLaw,
    pub z0: InitialLaw2D,
    pub grid: TimeGrid,
    pub hurst: HurstParameter,
    pub seed: u64,
    pub centering: Centering,
    pub sampler: SamplerOptions,
}

impl EnsembleSpec {
    /// fBm entries started at zero; `p = n` and the single-site index set.
    pub fn new(variant: Variant, n: usize, grid: TimeGrid, hurst: HurstParameter, seed: u64) -> Self {
        let coeffs = Preset::Fbm.coefficients();
        Self {
            variant,
            n,
            p: n,
            index_set: vec![IndexTerm {
                offset: (0, 0),
                weight: 1.0,
            }],
            coeffs_2d: CoefficientSet2D::componentwise(&coeffs),
            coeffs,
            x0: InitialLaw::Fixed(0.0),
            z0: InitialLaw2D::default(),
            grid,
            hurst,
            seed,
            centering: Centering::Exact(Preset::Fbm),
            sampler: SamplerOptions::default(),
        }
    }

    /// Use a named preset for both the scalar and the componentwise 2-D
    /// equation; centering is exact when the preset has a closed-form mean.
    pub fn with_preset(mut self, preset: &Preset) -> Self {
        self.coeffs = preset.coefficients();
        self.coeffs_2d = CoefficientSet2D::componentwise(&self.coeffs);
        self.centering = if preset.exact_mean(&InitialLaw::Fixed(0.0), 0.0).is_some() {
            Centering::Exact(preset.clone())
        } else {
            Centering::Estimate {
                n_mc: MIN_CENTERING_MC,
            }
        };
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_index_set(mut self, terms: Vec<IndexTerm>) -> Self {
        self.index_set = terms;
        self
    }

    /// Custom scalar coefficients; Wishart centering falls back to estimation.
    pub fn with_coefficients(mut self, coeffs: CoefficientSet) -> Self {
        self.coeffs = coeffs;
        self.centering = Centering::Estimate {
            n_mc: MIN_CENTERING_MC,
        };
        self
    }

    /// Custom 2-D coefficients; Wishart centering falls back to estimation.
    pub fn with_coefficients_2d(mut self, coeffs: CoefficientSet2D) -> Self {
        self.coeffs_2d = coeffs;
        self.centering = Centering::Estimate {
            n_mc: MIN_CENTERING_MC,
        };
        self
    }

    pub fn with_x0(mut self, x0: InitialLaw) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_z0(mut self, z0: InitialLaw2D) -> Self {
        self.z0 = z0;
        self
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    /// The spec for replica `r`; only the seed changes.
    pub fn replica(&self, r: usize) -> Self {
        let mut s = self.clone();
        s.seed = derive_seed(derive_seed(self.seed, rng::domain::REPLICA), r as u64);
        s
    }

    /// Frame dimension: `p` for Wishart variants, `n` otherwise.
    pub fn frame_dim(&self) -> usize {
        if self.variant.is_wishart() {
            self.p
        } else {
            self.n
        }
    }

    /// Largest `|k|`, `|l|` over the index set.
    pub fn window_radius(&self) -> i64 {
        self.index_set
            .iter()
            .map(|t| t.offset.0.abs().max(t.offset.1.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n == 0 {
            return Err(SpectralError::Config("matrix dimension n must be at least 1".into()));
        }
        if self.variant.is_wishart() && self.p == 0 {
            return Err(SpectralError::Config("Wishart row count p must be at least 1".into()));
        }
        if self.variant == Variant::Dependent && self.index_set.is_empty() {
            return Err(SpectralError::Config("dependent index set is empty".into()));
        }
        if let Centering::Table(t) = &self.centering {
            if t.len() != self.grid.len() {
                return Err(SpectralError::Config(format!(
                    "centering table has {} rows, grid has {} nodes",
                    t.len(),
                    self.grid.len()
                )));
            }
        }
        if let Centering::Estimate { n_mc } = self.centering {
            if n_mc < MIN_CENTERING_MC {
                return Err(SpectralError::Config(format!(
                    "centering needs n_mc >= {MIN_CENTERING_MC}, got {n_mc}"
                )));
            }
        }
        Ok(())
    }

    /// Short stable hash of everything that determines the frames.
    pub fn spec_hash(&self) -> String {
        let mut h = Sha256::new();
        let desc = format!(
            "{:?}|{}|{}|{:?}|{}|{}|{:?}|{:?}|{}|{}|{}|{}|{:?}|{:?}",
            self.variant,
            self.n,
            self.p,
            self.index_set,
            self.coeffs.name,
            self.coeffs_2d.name,
            self.x0,
            self.z0,
            self.grid.t_end,
            self.grid.steps,
            self.hurst.value(),
            self.seed,
            self.centering,
            self.sampler.method,
        );
        h.update(desc.as_bytes());
        hex::encode(&h.finalize()[..8])
    }

    /// Means subtracted from Wishart factor entries at every grid node.
    pub fn resolved_means(&self) -> Result<Vec<[f64; 2]>> {
        match &self.centering {
            Centering::None => Ok(vec![[0.0; 2]; self.grid.len()]),
            Centering::Table(t) => Ok(t.clone()),
            Centering::Exact(preset) => self
                .grid
                .nodes()
                .into_iter()
                .map(|t| {
                    let m = if self.variant.is_complex() {
                        preset
                            .exact_mean(&self.z0.re, t)
                            .zip(preset.exact_mean(&self.z0.im, t))
                            .map(|(a, b)| [a, b])
                    } else {
                        preset.exact_mean(&self.x0, t).map(|a| [a, 0.0])
                    };
                    m.ok_or_else(|| {
                        SpectralError::Config(format!(
                            "preset `{}` has no closed-form mean",
                            preset.name()
                        ))
                    })
                })
                .collect(),
            Centering::Estimate { n_mc } => {
                let seed = derive_seed(self.seed, rng::domain::MOMENT);
                if self.variant.is_complex() {
                    Ok(moment_table_2d(&self.coeffs_2d, &self.z0, self.grid, self.hurst, *n_mc, seed)?
                        .into_iter()
                        .map(|m| m.m_t)
                        .collect())
                } else {
                    Ok(moment_table(&self.coeffs, &self.x0, self.grid, self.hurst, *n_mc, seed)?
                        .into_iter()
                        .map(|m| [m.m_t, 0.0])
                        .collect())
                }
            }
        }
    }
}

/// The matrix realized at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProcessFrame {
    pub t: f64,
    pub data: FrameMatrix,
}

impl MatrixProcessFrame {
    pub fn dim(&self) -> usize {
        self.data.dim()
    }
}

// Produces retained entry values for a set of output nodes.
struct EntrySource<'a> {
    spec: &'a EnsembleSpec,
    sampler: FgnSampler,
}

impl<'a> EntrySource<'a> {
    fn new(spec: &'a EnsembleSpec) -> Result<Self> {
        Ok(Self {
            spec,
            sampler: FgnSampler::new(spec.grid, spec.hurst, spec.sampler)?,
        })
    }

    fn real(&self, domain: u64, index: u64, nodes: &[usize], out: &mut [f64]) -> Result<()> {
        let mut rng = substream(self.spec.seed, domain, index);
        let x0 = self.spec.x0.sample(&mut rng);
        let driver = self.sampler.sample_path(&mut rng);
        let mut vals = Vec::with_capacity(driver.len());
        integrate_into(&self.spec.coeffs, self.spec.grid.dt(), &driver, x0, &mut vals)?;
        for (o, &k) in out.iter_mut().zip(nodes) {
            *o = vals[k];
        }
        Ok(())
    }

    fn complex(&self, domain: u64, index: u64, nodes: &[usize], out: &mut [f64]) -> Result<()> {
        let mut rng = substream(self.spec.seed, domain, index);
        let z0 = self.spec.z0.sample(&mut rng);
        let d1 = self.sampler.sample_path(&mut rng);
        let d2 = self.sampler.sample_path(&mut rng);
        let mut vals = Vec::with_capacity(d1.len());
        integrate_2d_into(&self.spec.coeffs_2d, self.spec.grid.dt(), &d1, &d2, z0, &mut vals)?;
        for (o, &k) in out.chunks_exact_mut(2).zip(nodes) {
            o.copy_from_slice(&vals[k]);
        }
        Ok(())
    }

    /// Values of every key at every node, key-major with `width` values per node.
    fn table<K: Sync>(
        &self,
        keys: &[K],
        nodes: &[usize],
        width: usize,
        gen: impl Fn(&Self, &K, &mut [f64]) -> Result<()> + Sync,
    ) -> Result<Vec<f64>> {
        let stride = nodes.len() * width;
        let mut out = vec![0.0; keys.len() * stride];
        if stride == 0 {
            return Ok(out);
        }
        out.par_chunks_mut(stride)
            .zip(keys.par_iter())
            .try_for_each(|(row, key)| gen(self, key, row))?;
        Ok(out)
    }
}

fn check_nodes(spec: &EnsembleSpec, nodes: &[usize]) -> Result<()> {
    if let Some(&k) = nodes.iter().find(|&&k| k >= spec.grid.len()) {
        return Err(SpectralError::Domain(format!(
            "output node {k} is outside the grid of {} nodes",
            spec.grid.len()
        )));
    }
    Ok(())
}

fn upper_keys(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn wigner_chunk(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    let n = spec.n;
    let keys = upper_keys(n);
    let src = EntrySource::new(spec)?;
    let vals = src.table(&keys, nodes, 1, |s, &(i, j), out| {
        s.real(rng::domain::ENTRY_REAL, pair_index(i, j), nodes, out)
    })?;
    let inv = 1.0 / (n as f64).sqrt();
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let mut m = SymMatrix::zeros(n);
            for (e, &(i, j)) in keys.iter().enumerate() {
                let x = vals[e * nodes.len() + k] * inv;
                m.set(i, j, if i == j { SQRT_2 * x } else { x });
            }
            MatrixProcessFrame {
                t: spec.grid.node(node),
                data: FrameMatrix::Real(m),
            }
        })
        .collect())
}

fn wigner_complex_chunk(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    let n = spec.n;
    let keys = upper_keys(n);
    let src = EntrySource::new(spec)?;
    let vals = src.table(&keys, nodes, 2, |s, &(i, j), out| {
        if i == j {
            s.real(rng::domain::ENTRY_DIAG, pair_index(i, i), nodes, &mut out[..nodes.len()])
        } else {
            s.complex(rng::domain::ENTRY_COMPLEX, pair_index(i, j), nodes, out)
        }
    })?;
    let inv = 1.0 / (n as f64).sqrt();
    let stride = 2 * nodes.len();
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let mut m = HermMatrix::zeros(n);
            for (e, &(i, j)) in keys.iter().enumerate() {
                let row = &vals[e * stride..(e + 1) * stride];
                let z = if i == j {
                    Complex64::new(row[k], 0.0)
                } else {
                    Complex64::new(row[2 * k], row[2 * k + 1])
                };
                m.set(i, j, z * inv);
            }
            MatrixProcessFrame {
                t: spec.grid.node(node),
                data: FrameMatrix::Complex(m),
            }
        })
        .collect())
}

/// Lattice sites `(i, j) + r` needed by the upper triangle of a dependent frame.
pub fn dependent_sites(spec: &EnsembleSpec) -> Vec<(i64, i64)> {
    let n = spec.n as i64;
    let mut sites = std::collections::BTreeSet::new();
    for i in 0..n {
        for j in i..n {
            for term in &spec.index_set {
                sites.insert((i + term.offset.0, j + term.offset.1));
            }
        }
    }
    sites.into_iter().collect()
}

fn dependent_chunk(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    let n = spec.n;
    let sites = dependent_sites(spec);
    let src = EntrySource::new(spec)?;
    let vals = src.table(&sites, nodes, 1, |s, &(u, v), out| {
        s.real(rng::domain::LATTICE, lattice_index(u, v), nodes, out)
    })?;
    let lookup = |u: i64, v: i64| -> usize {
        sites
            .binary_search(&(u, v))
            .expect("site enumerated for every upper-triangle term")
    };
    let keys = upper_keys(n);
    let term_sites: Vec<Vec<(usize, f64)>> = keys
        .iter()
        .map(|&(i, j)| {
            spec.index_set
                .iter()
                .map(|t| (lookup(i as i64 + t.offset.0, j as i64 + t.offset.1), t.weight))
                .collect()
        })
        .collect();
    let inv = 1.0 / (n as f64).sqrt();
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let mut m = SymMatrix::zeros(n);
            for (&(i, j), terms) in keys.iter().zip(&term_sites) {
                let x: f64 = terms
                    .iter()
                    .map(|&(s, a)| a * vals[s * nodes.len() + k])
                    .sum();
                m.set(i, j, x * inv);
            }
            MatrixProcessFrame {
                t: spec.grid.node(node),
                data: FrameMatrix::Real(m),
            }
        })
        .collect())
}

fn wishart_chunk(
    spec: &EnsembleSpec,
    nodes: &[usize],
    means: &[[f64; 2]],
) -> Result<Vec<MatrixProcessFrame>> {
    let (p, n) = (spec.p, spec.n);
    let keys: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..n).map(move |k| (i, k))).collect();
    let src = EntrySource::new(spec)?;
    let complex = spec.variant == Variant::WishartComplex;
    let width = if complex { 2 } else { 1 };
    let vals = src.table(&keys, nodes, width, |s, &(i, k), out| {
        if complex {
            s.complex(rng::domain::WISHART_COMPLEX, pair_index(i, k), nodes, out)
        } else {
            s.real(rng::domain::WISHART, pair_index(i, k), nodes, out)
        }
    })?;
    let stride = width * nodes.len();
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(c, &node)| {
            let m = means[node];
            let t = spec.grid.node(node);
            if complex {
                let factor: Vec<Complex64> = (0..keys.len())
                    .map(|e| {
                        let row = &vals[e * stride..];
                        Complex64::new(row[2 * c] - m[0], row[2 * c + 1] - m[1])
                    })
                    .collect();
                MatrixProcessFrame {
                    t,
                    data: FrameMatrix::Complex(HermMatrix::gram(&factor, p, n, n as f64)),
                }
            } else {
                let factor: Vec<f64> = (0..keys.len()).map(|e| vals[e * stride + c] - m[0]).collect();
                MatrixProcessFrame {
                    t,
                    data: FrameMatrix::Real(SymMatrix::gram(&factor, p, n, n as f64)),
                }
            }
        })
        .collect())
}

fn entries_per_node(spec: &EnsembleSpec) -> usize {
    let n = spec.n;
    match spec.variant {
        Variant::WignerReal => n * (n + 1) / 2,
        Variant::WignerComplex => n * (n + 1),
        Variant::Dependent => n * (n + 1) / 2 * spec.index_set.len(),
        Variant::WishartReal => spec.p * n,
        Variant::WishartComplex => 2 * spec.p * n,
    }
}

/// Build frames at the given grid nodes, handing each to `f` in node order.
/// Output times are processed in chunks sized to bound retained entry values;
/// entry paths are regenerated per chunk.
pub fn for_each_frame(
    spec: &EnsembleSpec,
    nodes: &[usize],
    centered: bool,
    mut f: impl FnMut(MatrixProcessFrame) -> Result<()>,
) -> Result<()> {
    spec.validate()?;
    check_nodes(spec, nodes)?;
    let per_node = entries_per_node(spec).max(1);
    let chunk = (CHUNK_VALUES / per_node).max(1);
    let means = if spec.variant.is_wishart() {
        if centered {
            spec.resolved_means()?
        } else {
            vec![[0.0; 2]; spec.grid.len()]
        }
    } else {
        Vec::new()
    };
    for part in nodes.chunks(chunk) {
        let frames = match spec.variant {
            Variant::WignerReal => wigner_chunk(spec, part)?,
            Variant::WignerComplex => wigner_complex_chunk(spec, part)?,
            Variant::Dependent => dependent_chunk(spec, part)?,
            Variant::WishartReal | Variant::WishartComplex => wishart_chunk(spec, part, &means)?,
        };
        for frame in frames {
            f(frame)?;
        }
    }
    Ok(())
}

/// Frames for any variant (Wishart variants centered).
pub fn build_frames(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    let mut out = Vec::with_capacity(nodes.len());
    for_each_frame(spec, nodes, true, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok(out)
}

fn expect_variant(spec: &EnsembleSpec, v: Variant) -> Result<()> {
    if spec.variant != v {
        return Err(SpectralError::Config(format!(
            "expected variant {v:?}, spec has {:?}",
            spec.variant
        )));
    }
    Ok(())
}

pub fn build_wigner_frames(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    expect_variant(spec, Variant::WignerReal)?;
    build_frames(spec, nodes)
}

pub fn build_wigner_complex_frames(
    spec: &EnsembleSpec,
    nodes: &[usize],
) -> Result<Vec<MatrixProcessFrame>> {
    expect_variant(spec, Variant::WignerComplex)?;
    build_frames(spec, nodes)
}

pub fn build_dependent_frames(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    expect_variant(spec, Variant::Dependent)?;
    build_frames(spec, nodes)
}

pub fn build_wishart_frames(spec: &EnsembleSpec, nodes: &[usize]) -> Result<Vec<MatrixProcessFrame>> {
    expect_variant(spec, Variant::WishartReal)?;
    build_frames(spec, nodes)
}

pub fn build_wishart_complex_frames(
    spec: &EnsembleSpec,
    nodes: &[usize],
) -> Result<Vec<MatrixProcessFrame>> {
    expect_variant(spec, Variant::WishartComplex)?;
    build_frames(spec, nodes)
}

/// Wishart frames from uncentered factor entries.
pub fn uncentered_wishart_frames(
    spec: &EnsembleSpec,
    nodes: &[usize],
) -> Result<Vec<MatrixProcessFrame>> {
    if !spec.variant.is_wishart() {
        return Err(SpectralError::Config("uncentered frames need a Wishart variant".into()));
    }
    let mut out = Vec::with_capacity(nodes.len());
    for_each_frame(spec, nodes, false, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok(out)
}

/// Dense row-major CSV: one line per matrix row, `t,row,v_0,...`; complex
/// frames interleave real and imaginary parts.
pub fn write_frames_csv<W: Write>(mut w: W, frames: &[MatrixProcessFrame]) -> io::Result<()> {
    let Some(first) = frames.first() else {
        return writeln!(w, "t,row");
    };
    let n = first.dim();
    let complex = matches!(first.data, FrameMatrix::Complex(_));
    let cols: Vec<String> = (0..n)
        .flat_map(|j| {
            if complex {
                vec![format!("re_{j}"), format!("im_{j}")]
            } else {
                vec![format!("v_{j}")]
            }
        })
        .collect();
    writeln!(w, "t,row,{}", cols.join(","))?;
    for f in frames {
        let dense = f.data.dense_values();
        let width = dense.len() / f.dim().max(1);
        for (i, row) in dense.chunks(width.max(1)).enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", f.t, i, vals.join(","))?;
        }
    }
    Ok(())
}

/// `MATF` binary dump, one row per frame (dense, row-major).
pub fn write_frames_binary<W: Write>(w: W, frames: &[MatrixProcessFrame]) -> io::Result<()> {
    let width = frames.first().map_or(0, |f| f.data.dense_values().len());
    let mut values = Vec::with_capacity(width * frames.len());
    for f in frames {
        let d = f.data.dense_values();
        if d.len() != width {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "frames differ in size"));
        }
        values.extend(d);
    }
    write_binary(w, FRAME_MAGIC, frames.len(), width, &values)
}
