//! Exact sampling of fractional Gaussian noise and fractional Brownian motion
//! on uniform grids.
//!
//! The primary sampler is circulant embedding of the fGN autocovariance
//! (Davies–Harte). If the embedded spectrum has a value below `-tol_spec`
//! (relative to its maximum) the sampler falls back to the Durbin–Levinson
//! conditional recursion, which is exact but quadratic in the grid size.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SpectralError};
use crate::rng::{self, substream};

/// Hurst exponent in `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            domain(format!("Hurst parameter must lie in (1/2, 1), got {h}"))
        }
    }

    /// Also accepts `h = 1/2` (standard Brownian motion). Only meant for
    /// sanity checks against the i.i.d. increment case.
    pub fn new_test_mode(h: f64) -> Result<Self> {
        if h == 0.5 {
            Ok(Self(h))
        } else {
            Self::new(h)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = SpectralError;
    fn try_from(h: f64) -> Result<Self> {
        HurstParameter::new_test_mode(h)
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniform grid `t_k = k * t_end / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return domain(format!("grid end time must be positive, got {t_end}"));
        }
        if steps == 0 {
            return domain("grid needs at least one step");
        }
        Ok(Self { t_end, steps })
    }

    /// Build a grid from explicit nodes. Only uniform grids starting at 0 are accepted.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return domain("grid nodes must start at 0 and contain at least two nodes");
        }
        let grid = Self::new(*nodes.last().unwrap(), nodes.len() - 1)?;
        let dt = grid.dt();
        for (k, &t) in nodes.iter().enumerate() {
            if (t - k as f64 * dt).abs() > 1e-9 * grid.t_end {
                return domain("non-uniform time grids are not supported");
            }
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.t_end, self.steps).map(|_| ())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t` (within round-off), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k as usize > self.steps || (x - k).abs() > 1e-9 * x.abs().max(1.0) {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Coarsen by an integer factor (every `factor`-th node).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return domain(format!("cannot coarsen {} steps by {factor}", self.steps));
        }
        Self::new(self.t_end, self.steps / factor)
    }
}

/// `½(s^{2H} + t^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParameter) -> Result<f64> {
    if s < 0.0 || t < 0.0 || !s.is_finite() || !t.is_finite() {
        return domain(format!("fBm covariance needs non-negative times, got ({s}, {t})"));
    }
    let two_h = 2.0 * h.value();
    Ok(0.5 * (s.powf(two_h) + t.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Autocovariance of unit-step fGN at lag `k`.
pub fn fgn_autocovariance(k: usize, h: HurstParameter) -> f64 {
    let two_h = 2.0 * h.value();
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Increments,
    Paths,
}

/// A batch of paths on a shared grid, stored path-major.
#[derive(Debug, Clone)]
pub struct GaussianPathBatch {
    pub grid: TimeGrid,
    pub hurst: HurstParameter,
    pub kind: PathKind,
    count: usize,
    width: usize,
    values: Vec<f64>,
}

impl GaussianPathBatch {
    pub fn count(&self) -> usize {
        self.count
    }

    /// Values per path: `M` for increments, `M + 1` for paths.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    /// Circulant embedding, falling back to the recursion if the spectrum is negative.
    Auto,
    CirculantOnly,
    Recursion,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub method: SamplerMethod,
    pub tol_spec: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            method: SamplerMethod::Auto,
            tol_spec: 1e-10,
        }
    }
}

enum Engine {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Recursion {
        // Row n holds the Durbin–Levinson coefficients φ_{n,1..n}.
        phi: Vec<Vec<f64>>,
        innovation_sd: Vec<f64>,
    },
}

/// Reusable fGN sampler for one `(grid, H)` pair.
pub struct FgnSampler {
    grid: TimeGrid,
    hurst: HurstParameter,
    scale: f64,
    engine: Engine,
}

impl fmt::Debug for FgnSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FgnSampler")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("circulant", &self.uses_circulant())
            .finish()
    }
}

impl FgnSampler {
    pub fn new(grid: TimeGrid, hurst: HurstParameter, opts: SamplerOptions) -> Result<Self> {
        grid.validate()?;
        let scale = grid.dt().powf(hurst.value());
        let engine = match opts.method {
            SamplerMethod::Recursion => Self::recursion_engine(grid.steps, hurst),
            SamplerMethod::Auto | SamplerMethod::CirculantOnly => {
                match Self::circulant_engine(grid.steps, hurst, opts.tol_spec) {
                    Ok(engine) => engine,
                    Err(err) if opts.method == SamplerMethod::CirculantOnly => return Err(err),
                    Err(_) => Self::recursion_engine(grid.steps, hurst),
                }
            }
        };
        Ok(Self {
            grid,
            hurst,
            scale,
            engine,
        })
    }

    fn circulant_engine(n: usize, h: HurstParameter, tol_spec: f64) -> Result<Engine> {
        let m = 2 * n;
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex64::new(fgn_autocovariance(lag, h), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min < -tol_spec * max {
            return Err(SpectralError::EmbeddingFailure {
                min: min / max,
                tol: tol_spec,
            });
        }
        let sqrt_eig = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Engine::Circulant { sqrt_eig, fft })
    }

    fn recursion_engine(n: usize, h: HurstParameter) -> Engine {
        let r: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(k, h)).collect();
        let mut phi: Vec<Vec<f64>> = vec![Vec::new()];
        let mut v = vec![r[0]];
        for k in 1..n {
            let prev = &phi[k - 1];
            let acc: f64 = (1..k).map(|j| prev[j - 1] * r[k - j]).sum();
            let kappa = (r[k] - acc) / v[k - 1];
            let mut next = Vec::with_capacity(k);
            for j in 1..k {
                next.push(prev[j - 1] - kappa * prev[k - j - 1]);
            }
            next.push(kappa);
            v.push(v[k - 1] * (1.0 - kappa * kappa));
            phi.push(next);
        }
        Engine::Recursion {
            phi,
            innovation_sd: v.into_iter().map(|x| x.max(0.0).sqrt()).collect(),
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.engine, Engine::Circulant { .. })
    }

    /// Fill `out` (length `M`) with one fGN increment sequence for the grid.
    pub fn sample_increments_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.steps;
        assert_eq!(out.len(), n, "increment buffer has wrong length");
        match &self.engine {
            Engine::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                for (o, c) in out.iter_mut().zip(&buf) {
                    *o = c.re * self.scale;
                }
            }
            Engine::Recursion { phi, innovation_sd } => {
                for k in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    let mean: f64 = phi[k]
                        .iter()
                        .enumerate()
                        .map(|(j, p)| p * out[k - 1 - j])
                        .sum();
                    out[k] = mean + innovation_sd[k] * z;
                }
                for o in out.iter_mut() {
                    *o *= self.scale;
                }
            }
        }
    }

    /// Fill `out` (length `M + 1`) with an fBm path starting at 0.
    pub fn sample_path_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.grid.len(), "path buffer has wrong length");
        out[0] = 0.0;
        self.sample_increments_into(rng, &mut out[1..]);
        for k in 1..out.len() {
            out[k] += out[k - 1];
        }
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.sample_path_into(rng, &mut out);
        out
    }

    fn batch(&self, count: usize, seed: u64, kind: PathKind) -> Result<GaussianPathBatch> {
        if count == 0 {
            return domain("path count must be at least 1");
        }
        let width = match kind {
            PathKind::Increments => self.grid.steps,
            PathKind::Paths => self.grid.len(),
        };
        let mut values = vec![0.0; count * width];
        values
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| {
                let mut rng = substream(seed, rng::domain::FGN_PATH, i as u64);
                match kind {
                    PathKind::Increments => self.sample_increments_into(&mut rng, row),
                    PathKind::Paths => self.sample_path_into(&mut rng, row),
                }
            });
        Ok(GaussianPathBatch {
            grid: self.grid,
            hurst: self.hurst,
            kind,
            count,
            width,
            values,
        })
    }
}

/// `count` independent fGN increment sequences; path `i` uses substream `(seed, i)`.
pub fn generate_fgn(
    grid: TimeGrid,
    h: HurstParameter,
    count: usize,
    seed: u64,
) -> Result<GaussianPathBatch> {
    generate_fgn_with(grid, h, count, seed, SamplerOptions::default())
}

pub fn generate_fgn_with(
    grid: TimeGrid,
    h: HurstParameter,
    count: usize,
    seed: u64,
    opts: SamplerOptions,
) -> Result<GaussianPathBatch> {
    FgnSampler::new(grid, h, opts)?.batch(count, seed, PathKind::Increments)
}

/// Prefix sums of [`generate_fgn`]; every path starts at exactly 0.
pub fn generate_fbm(
    grid: TimeGrid,
    h: HurstParameter,
    count: usize,
    seed: u64,
) -> Result<GaussianPathBatch> {
    generate_fbm_with(grid, h, count, seed, SamplerOptions::default())
}

pub fn generate_fbm_with(
    grid: TimeGrid,
    h: HurstParameter,
    count: usize,
    seed: u64,
    opts: SamplerOptions,
) -> Result<GaussianPathBatch> {
    FgnSampler::new(grid, h, opts)?.batch(count, seed, PathKind::Paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> HurstParameter {
        HurstParameter::new_test_mode(x).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstParameter::new(0.5).is_err());
        assert!(HurstParameter::new(1.0).is_err());
        assert!(HurstParameter::new(0.75).is_ok());
        assert!(HurstParameter::new_test_mode(0.5).is_ok());
        assert!(HurstParameter::new_test_mode(0.4).is_err());
    }

    #[test]
    fn covariance_examples() {
        assert!((fbm_covariance(1.0, 1.0, h(0.7)).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(1.0, 2.0, h(0.5)).unwrap() - 1.0).abs() < 1e-15);
        let v = fbm_covariance(1.0, 2.0, h(0.75)).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            fbm_covariance(0.3, 1.7, h(0.6)).unwrap(),
            fbm_covariance(1.7, 0.3, h(0.6)).unwrap()
        );
        assert!(fbm_covariance(-1.0, 1.0, h(0.7)).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        let g = TimeGrid::from_nodes(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(g.steps, 2);
        assert!(TimeGrid::from_nodes(&[0.0, 0.4, 1.0]).is_err());
        let g = TimeGrid::new(1.0, 64).unwrap();
        assert_eq!(g.index_of(0.5), Some(32));
        assert_eq!(g.index_of(0.51), None);
        assert_eq!(g.node(64), 1.0);
    }

    #[test]
    fn paths_start_at_zero() {
        let grid = TimeGrid::new(2.0, 32).unwrap();
        let batch = generate_fbm(grid, h(0.7), 17, 99).unwrap();
        assert!(batch.iter().all(|p| p[0] == 0.0 && p.iter().all(|v| v.is_finite())));
        assert_eq!(batch.width(), 33);
    }

    #[test]
    fn circulant_spectrum_is_nonnegative_in_range() {
        for &hv in &[0.51, 0.6, 0.75, 0.9, 0.99] {
            let s = FgnSampler::new(
                TimeGrid::new(1.0, 1000).unwrap(),
                h(hv),
                SamplerOptions {
                    method: SamplerMethod::CirculantOnly,
                    tol_spec: 1e-10,
                },
            )
            .unwrap();
            assert!(s.uses_circulant());
        }
    }

    #[test]
    fn zero_count_rejected() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        assert!(generate_fgn(grid, h(0.7), 0, 1).is_err());
    }

    #[test]
    fn recursion_matches_exact_variance() {
        // Unit-variance innovations recover the autocovariance at lag 0.
        let s = FgnSampler::new(
            TimeGrid::new(8.0, 8).unwrap(),
            h(0.8),
            SamplerOptions {
                method: SamplerMethod::Recursion,
                tol_spec: 1e-10,
            },
        )
        .unwrap();
        assert!(!s.uses_circulant());
        if let Engine::Recursion { innovation_sd, .. } = &s.engine {
            assert!((innovation_sd[0] - 1.0).abs() < 1e-15);
            assert!(innovation_sd.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }
}
