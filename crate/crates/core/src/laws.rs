//! Reference limit laws: scaled semicircle and Marchenko–Pastur.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SpectralError};
use crate::rng::{self, substream};

/// Semicircle law of scale `d`, supported on `[−2d, 2d]` with variance `d²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemicircleLaw {
    d: f64,
}

impl SemicircleLaw {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(SpectralError::Domain(format!("semicircle scale must be positive, got {d}")));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn support(&self) -> (f64, f64) {
        (-2.0 * self.d, 2.0 * self.d)
    }

    pub fn density(&self, x: f64) -> f64 {
        let r = 4.0 * self.d * self.d - x * x;
        if r <= 0.0 {
            0.0
        } else {
            r.sqrt() / (2.0 * PI * self.d * self.d)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let d2 = self.d * self.d;
        let root = (4.0 * d2 - x * x).sqrt();
        let v = 0.5 + x * root / (4.0 * PI * d2) + x.atan2(root) / PI;
        v.clamp(0.0, 1.0)
    }

    /// `E[X^k]`: zero for odd `k`, `d^k · Catalan(k/2)` for even `k`.
    pub fn moment(&self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        catalan(k / 2) * self.d.powi(k as i32)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let (lo, hi) = self.support();
        bisect_quantile(|x| self.cdf(x), q, lo, hi)
    }

    pub fn mean(&self) -> f64 {
        0.0
    }
}

fn catalan(k: u32) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * 2.0 * (2.0 * i as f64 + 1.0) / (i as f64 + 2.0);
    }
    c
}

/// Marchenko–Pastur law with aspect ratio `c` and entry scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPasturLaw {
    c: f64,
    sigma: f64,
}

impl MarchenkoPasturLaw {
    pub fn new(c: f64, sigma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            return Err(SpectralError::Domain(format!(
                "Marchenko–Pastur parameters must be positive, got c = {c}, sigma = {sigma}"
            )));
        }
        Ok(Self { c, sigma })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Edges of the continuous part.
    pub fn support(&self) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let r = self.c.sqrt();
        (s2 * (1.0 - r) * (1.0 - r), s2 * (1.0 + r) * (1.0 + r))
    }

    /// Mass of the atom at zero, `1 − 1/c` for `c > 1`.
    pub fn atom_mass(&self) -> f64 {
        if self.c > 1.0 {
            1.0 - 1.0 / self.c
        } else {
            0.0
        }
    }

    /// Density of the continuous part.
    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b || x <= 0.0 {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * self.sigma * self.sigma * self.c * x)
    }

    // Antiderivative of √((b−x)(x−a))/x on [a, b], written with atan2 so the
    // edges stay accurate.
    fn antiderivative(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        let r = ((b - x) * (x - a)).max(0.0).sqrt();
        let first = 0.5 * (a + b) * (2.0 * x - a - b).atan2(2.0 * r);
        let gm = (a * b).sqrt();
        let second = if gm == 0.0 {
            0.0
        } else {
            gm * ((a + b) * x - 2.0 * a * b).atan2(2.0 * gm * r)
        };
        r + first - second
    }

    /// Right-continuous CDF including the atom.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let (a, b) = self.support();
        let atom = self.atom_mass();
        if x <= a {
            return atom;
        }
        if x >= b {
            return 1.0;
        }
        let scale = 2.0 * PI * self.sigma * self.sigma * self.c;
        let cont = (self.antiderivative(x) - self.antiderivative(a)) / scale;
        (atom + cont).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let atom = self.atom_mass();
        if q <= atom {
            return 0.0;
        }
        let (a, b) = self.support();
        bisect_quantile(|x| self.cdf(x), q, a, b)
    }

    /// First moment, `σ²` for every `c`.
    pub fn mean(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Smallest `x` in `[lo, hi]` with `cdf(x) ≥ q`, to floating-point resolution.
fn bisect_quantile(cdf: impl Fn(f64) -> f64, q: f64, mut lo: f64, mut hi: f64) -> f64 {
    if q <= 0.0 {
        return lo;
    }
    if q >= 1.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A reference law for spectral comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralLaw {
    Semicircle(SemicircleLaw),
    MarchenkoPastur(MarchenkoPasturLaw),
    PointMass(f64),
}

impl SpectralLaw {
    pub fn semicircle(d: f64) -> Result<Self> {
        SemicircleLaw::new(d).map(SpectralLaw::Semicircle)
    }

    pub fn marchenko_pastur(c: f64, sigma: f64) -> Result<Self> {
        MarchenkoPasturLaw::new(c, sigma).map(SpectralLaw::MarchenkoPastur)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            SpectralLaw::Semicircle(l) => l.cdf(x),
            SpectralLaw::MarchenkoPastur(l) => l.cdf(x),
            SpectralLaw::PointMass(a) => f64::from(x >= *a),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self.atom() {
            Some((loc, mass)) if loc == x => self.cdf(x) - mass,
            _ => self.cdf(x),
        }
    }

    /// Density of the continuous part (zero for a point mass).
    pub fn density(&self, x: f64) -> f64 {
        match self {
            SpectralLaw::Semicircle(l) => l.density(x),
            SpectralLaw::MarchenkoPastur(l) => l.density(x),
            SpectralLaw::PointMass(_) => 0.0,
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            SpectralLaw::Semicircle(l) => l.quantile(q),
            SpectralLaw::MarchenkoPastur(l) => l.quantile(q),
            SpectralLaw::PointMass(a) => *a,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            SpectralLaw::Semicircle(l) => l.mean(),
            SpectralLaw::MarchenkoPastur(l) => l.mean(),
            SpectralLaw::PointMass(a) => *a,
        }
    }

    /// Location and mass of the atom, if any.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self {
            SpectralLaw::MarchenkoPastur(l) if l.atom_mass() > 0.0 => Some((0.0, l.atom_mass())),
            SpectralLaw::PointMass(a) => Some((*a, 1.0)),
            _ => None,
        }
    }

    /// Closed interval containing all mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            SpectralLaw::Semicircle(l) => l.support(),
            SpectralLaw::MarchenkoPastur(l) => {
                let (a, b) = l.support();
                if l.atom_mass() > 0.0 {
                    (0.0, b)
                } else {
                    (a, b)
                }
            }
            SpectralLaw::PointMass(a) => (*a, *a),
        }
    }

    pub fn id(&self) -> String {
        match self {
            SpectralLaw::Semicircle(l) => format!("sc:{}", l.d()),
            SpectralLaw::MarchenkoPastur(l) => format!("mp:{}:{}", l.c(), l.sigma()),
            SpectralLaw::PointMass(a) => format!("delta:{a}"),
        }
    }
}

/// `n` inverse-CDF draws. Draws are generated in blocks of 4096 from
/// per-block substreams; an atom is hit with its exact probability and
/// returns its location exactly.
pub fn law_sampler(law: &SpectralLaw, n: usize, seed: u64) -> Vec<f64> {
    const BLOCK: usize = 4096;
    let mut out = vec![0.0; n];
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = substream(seed, rng::domain::LAW_SAMPLE, b as u64);
        for slot in chunk.iter_mut() {
            let u: f64 = rng.random();
            *slot = match law.atom() {
                Some((loc, mass)) if u < mass => loc,
                _ => law.quantile(u),
            };
        }
    });
    out
}

/// A law parameter that is either given or resolved at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawParam {
    Value(f64),
    Auto,
}

impl LawParam {
    fn parse(s: &str, what: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LawParam::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(LawParam::Value)
            .ok_or_else(|| SpectralError::Config(format!("invalid {what} `{s}` in law id")))
    }

    fn resolve(self, auto: Option<f64>, what: &str) -> Result<f64> {
        match self {
            LawParam::Value(v) => Ok(v),
            LawParam::Auto => auto.ok_or_else(|| {
                SpectralError::Config(format!("no value available to resolve `auto` {what}"))
            }),
        }
    }
}

impl fmt::Display for LawParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawParam::Value(v) => write!(f, "{v}"),
            LawParam::Auto => f.write_str("auto"),
        }
    }
}

/// Law identifiers `sc:<d>` and `mp:<c>:<sigma>`; parameters may be `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawId {
    Semicircle { d: LawParam },
    MarchenkoPastur { c: LawParam, sigma: LawParam },
}

/// Values that `auto` parameters resolve to at one output time.
#[derive(Debug, Clone, Copy, Default)]
pub struct AutoValues {
    /// Entry standard deviation `d_t`.
    pub scale: Option<f64>,
    /// Aspect ratio `p / N`.
    pub aspect: Option<f64>,
}

impl LawId {
    pub fn resolve(&self, auto: AutoValues) -> Result<SpectralLaw> {
        match *self {
            LawId::Semicircle { d } => SpectralLaw::semicircle(d.resolve(auto.scale, "d")?),
            LawId::MarchenkoPastur { c, sigma } => SpectralLaw::marchenko_pastur(
                c.resolve(auto.aspect, "c")?,
                sigma.resolve(auto.scale, "sigma")?,
            ),
        }
    }
}

impl FromStr for LawId {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["sc", d] => Ok(LawId::Semicircle {
                d: LawParam::parse(d, "d")?,
            }),
            ["mp", c, sigma] => Ok(LawId::MarchenkoPastur {
                c: LawParam::parse(c, "c")?,
                sigma: LawParam::parse(sigma, "sigma")?,
            }),
            _ => Err(SpectralError::Config(format!(
                "law id `{s}` must look like sc:<d> or mp:<c>:<sigma>"
            ))),
        }
    }
}

impl fmt::Display for LawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawId::Semicircle { d } => write!(f, "sc:{d}"),
            LawId::MarchenkoPastur { c, sigma } => write!(f, "mp:{c}:{sigma}"),
        }
    }
}
