//! Run execution: every command reads a [`RunConfig`], writes flat CSVs into
//! one directory and finishes with `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ResolvedRun, RunConfig};
use crate::ensembles::{for_each_frame, Centering, MatrixProcessFrame, Variant};
use crate::error::{Result, SpectralError};
use crate::fractional_noise::{FgnSampler, SamplerOptions};
use crate::laws::{AutoValues, LawId};
use crate::pathwise_sde::{
    holder_norm_estimate, integrate, moment_table, moment_table_2d, InitialLaw, Preset,
};
use crate::rng::{self, derive_seed, substream};
use crate::spectra::{
    eigenvalues_sym, lipschitz_flow_check, spectral_identity_errors, EigenOptions, ESDSeries,
    MetricReport, SpectrumFrame, TestFunction,
};
use crate::stieltjes::{
    burgers_check, burgers_times, dependent_fixed_point, gmp_closed, gsc_closed, pde_residual_mp,
    pde_residual_sc, pde_residual_sc_fbm, select_sign_convention, DependentKernel,
    FixedPointConfig, ResidualField, SignConvention, StieltjesField, RESIDUAL_CSV_HEADER,
    STIELTJES_CSV_HEADER,
};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Resolved mean and spread of the entry process at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub m_t: [f64; 2],
    pub d_t: f64,
    /// `exact` or `estimate`.
    pub source: MomentSource,
    pub d_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Exact,
    Estimate,
}

/// Sign-convention outcome; failed conventions have no error value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRecord {
    pub chosen: SignConvention,
    pub max_err_minus: Option<f64>,
    pub max_err_plus: Option<f64>,
    pub max_iterations_minus: usize,
    pub kernel_asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub ensemble_hash: String,
    pub frame_dim: usize,
    pub replicas: usize,
    /// The effective configuration (seed override applied, no output dir).
    pub config: RunConfig,
    pub moments: Vec<MomentRow>,
    /// Wishart centering means `[re, im]` at the output times, fixed once
    /// for all replicas.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centering_means: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_outcome: Option<SignRecord>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| {
            SpectralError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| SpectralError::Config(format!("invalid manifest {}: {e}", path.display())))
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Completed run: output directory and manifest.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// Collects output files, records checksums and writes the manifest last.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

/// Parse a config file; a manifest is accepted too, in which case its
/// embedded configuration is used.
pub fn load_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| SpectralError::Config(format!("invalid JSON: {e}")))?;
    match value.get("config") {
        Some(inner) if value.get("files").is_some() => serde_json::from_value(inner.clone())
            .map_err(|e| SpectralError::Config(format!("invalid config in manifest: {e}"))),
        _ => RunConfig::from_json(text),
    }
}

/// Moment rows at the output nodes, exact when the preset allows it.
pub fn resolve_moments(run: &ResolvedRun) -> Result<Vec<MomentRow>> {
    let cfg = &run.config;
    let e = &cfg.ensemble;
    let h = run.hurst;
    let complex = e.variant.is_complex();
    let times: Vec<f64> = run.nodes.iter().map(|&k| run.grid.node(k)).collect();
    let exact = |t: f64| -> Option<([f64; 2], f64)> {
        let p = &e.preset;
        if complex {
            let m = [p.exact_mean(&e.z0.re, t)?, p.exact_mean(&e.z0.im, t)?];
            let d = p.exact_sd(&e.z0.re, t, h)?.hypot(p.exact_sd(&e.z0.im, t, h)?);
            Some((m, d))
        } else {
            Some(([p.exact_mean(&e.x0, t)?, 0.0], p.exact_sd(&e.x0, t, h)?))
        }
    };
    if let Some(rows) = times
        .iter()
        .map(|&t| {
            exact(t).map(|(m_t, d_t)| MomentRow {
                t,
                m_t,
                d_t,
                source: MomentSource::Exact,
                d_stderr: 0.0,
            })
        })
        .collect::<Option<Vec<_>>>()
    {
        return Ok(rows);
    }
    let seed = derive_seed(cfg.seed, rng::domain::MOMENT);
    let n_mc = cfg.moments.n_mc;
    let rows = if complex {
        let table = moment_table_2d(&run.spec.coeffs_2d, &e.z0, run.grid, h, n_mc, seed)?;
        run.nodes
            .iter()
            .map(|&k| MomentRow {
                t: table[k].t,
                m_t: table[k].m_t,
                d_t: table[k].d_t,
                source: MomentSource::Estimate,
                d_stderr: table[k].d_stderr,
            })
            .collect()
    } else {
        let table = moment_table(&run.spec.coeffs, &e.x0, run.grid, h, n_mc, seed)?;
        run.nodes
            .iter()
            .map(|&k| MomentRow {
                t: table[k].t,
                m_t: [table[k].m_t, 0.0],
                d_t: table[k].d_t,
                source: MomentSource::Estimate,
                d_stderr: table[k].d_stderr,
            })
            .collect()
    };
    Ok(rows)
}

/// Values for `auto` law parameters at one output time.
pub fn auto_values(variant: Variant, n: usize, p: usize, row: &MomentRow) -> AutoValues {
    AutoValues {
        scale: (row.d_t > 0.0).then_some(row.d_t),
        aspect: variant.is_wishart().then(|| p as f64 / n as f64),
    }
}

fn base_manifest(run: &ResolvedRun, command: &str, moments: Vec<MomentRow>) -> Manifest {
    let mut config = run.config.clone();
    config.out = None;
    Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        ensemble_hash: run.spec.spec_hash(),
        frame_dim: run.spec.frame_dim(),
        replicas: config.replicas,
        config,
        moments,
        centering_means: Vec::new(),
        sign_outcome: None,
        diagnostics: BTreeMap::new(),
        notes: Vec::new(),
        files: Vec::new(),
    }
}

fn finish(mut out: Outputs, mut manifest: Manifest) -> Result<RunArtifact> {
    let dir = out.dir.clone();
    manifest.files = std::mem::take(&mut out.files);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
    Ok(RunArtifact { dir, manifest })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

// Frames buffered before their eigenvalues are computed in parallel.
const EIGEN_BATCH: usize = 16;

struct Simulated {
    pooled: Vec<SpectrumFrame>,
    kept: Vec<(MatrixProcessFrame, SpectrumFrame)>,
    max_trace_err: f64,
    max_frob_err: f64,
}

fn simulate_spectra(run: &ResolvedRun, keep_first: bool) -> Result<Simulated> {
    let nodes = &run.nodes;
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); nodes.len()];
    let mut kept = Vec::new();
    let (mut max_trace_err, mut max_frob_err) = (0.0f64, 0.0f64);
    for r in 0..run.config.replicas {
        let spec = run.spec.replica(r);
        let mut batch: Vec<MatrixProcessFrame> = Vec::with_capacity(EIGEN_BATCH);
        let mut slot = 0usize;
        let mut flush = |batch: &mut Vec<MatrixProcessFrame>| -> Result<()> {
            let spectra: Vec<SpectrumFrame> = batch
                .par_iter()
                .map(|f| eigenvalues_sym(f, EigenOptions::default()))
                .collect::<Result<_>>()?;
            for (frame, spectrum) in batch.drain(..).zip(spectra) {
                let (te, fe) = spectral_identity_errors(&frame, &spectrum);
                max_trace_err = max_trace_err.max(te);
                max_frob_err = max_frob_err.max(fe);
                pooled[slot].extend_from_slice(spectrum.eigenvalues());
                slot += 1;
                if keep_first && r == 0 {
                    kept.push((frame, spectrum));
                }
            }
            Ok(())
        };
        for_each_frame(&spec, nodes, true, |frame| {
            batch.push(frame);
            if batch.len() == EIGEN_BATCH {
                flush(&mut batch)?;
            }
            Ok(())
        })?;
        flush(&mut batch)?;
    }
    let pooled = nodes
        .iter()
        .zip(pooled)
        .map(|(&k, v)| SpectrumFrame::new(run.grid.node(k), v))
        .collect::<Result<_>>()?;
    Ok(Simulated {
        pooled,
        kept,
        max_trace_err,
        max_frob_err,
    })
}

fn metric_report(
    run: &ResolvedRun,
    moments: &[MomentRow],
    frames: &[SpectrumFrame],
    laws: &[(String, LawId)],
    hash: &str,
    notes: &mut Vec<String>,
) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    let spec = &run.spec;
    for (label, id) in laws {
        for (frame, row) in frames.iter().zip(moments) {
            let auto = auto_values(spec.variant, spec.n, spec.p, row);
            match id.resolve(auto) {
                Ok(law) => report.push_frame(frame, &law, label, hash),
                Err(_) if auto.scale.is_none() => {
                    notes.push(format!("{label} skipped at t = {}: entry spread is zero", frame.t))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

fn labelled_laws(run: &ResolvedRun) -> Vec<(String, LawId)> {
    run.config.laws.iter().cloned().zip(run.laws.iter().copied()).collect()
}

fn is_plain_fbm(run: &ResolvedRun) -> bool {
    run.config.ensemble.preset == Preset::Fbm && run.config.ensemble.x0 == InitialLaw::Fixed(0.0)
}

fn push_residual(
    buf: &mut Vec<u8>,
    diagnostics: &mut BTreeMap<String, f64>,
    field: &ResidualField,
    eta: f64,
) -> Result<()> {
    field.write_rows(&mut *buf)?;
    let key = format!("max_residual_{}_eta{}", field.equation_id, eta);
    let v = diagnostics.entry(key).or_insert(0.0);
    *v = v.max(field.max());
    Ok(())
}

/// Simulate the configured ensemble and write spectra, metrics and the
/// enabled diagnostics to `out`.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<RunArtifact> {
    let mut run = config.resolve()?;
    let moments = resolve_moments(&run)?;
    // Estimated means would otherwise be redrawn with every replica seed.
    let mut centering_means = Vec::new();
    if run.spec.variant.is_wishart() {
        let means = run.spec.resolved_means()?;
        centering_means = run.nodes.iter().map(|&k| means[k]).collect();
        run.spec = run.spec.clone().with_centering(Centering::Table(means));
    }
    let mut manifest = base_manifest(&run, "simulate", moments.clone());
    manifest.centering_means = centering_means;
    let hash = manifest.ensemble_hash.clone();
    let toggles = run.config.toggles;
    let mut outputs = Outputs::new(out)?;

    let sim = simulate_spectra(&run, toggles.holder_diag)?;
    manifest
        .diagnostics
        .insert("max_trace_identity_error".into(), sim.max_trace_err);
    manifest
        .diagnostics
        .insert("max_frobenius_identity_error".into(), sim.max_frob_err);

    let mut series = ESDSeries::new(hash.clone());
    for f in &sim.pooled {
        series.push(f.clone())?;
    }
    outputs.write("spectra.csv", &csv_bytes(|w| series.write_csv(w))?)?;

    let report = metric_report(
        &run,
        &moments,
        &sim.pooled,
        &labelled_laws(&run),
        &hash,
        &mut manifest.notes,
    )?;
    outputs.write("metrics.csv", &csv_bytes(|w| report.write_csv(w))?)?;

    let re = run.z_grid.re_parts();
    let etas = run.z_grid.etas.clone();
    let fields: Vec<StieltjesField> = if toggles.stieltjes || toggles.pde_checks || toggles.fixedpoint {
        etas.iter()
            .map(|&eta| StieltjesField::empirical(&sim.pooled, &re, eta))
            .collect()
    } else {
        Vec::new()
    };
    if toggles.stieltjes {
        let mut buf = format!("{STIELTJES_CSV_HEADER}\n").into_bytes();
        for f in &fields {
            f.write_rows(&mut buf, "upper")?;
        }
        outputs.write("stieltjes.csv", &buf)?;
    }

    let mut residuals = format!("{RESIDUAL_CSV_HEADER}\n").into_bytes();
    let mut have_residuals = false;
    if toggles.pde_checks {
        let d_series: Vec<f64> = moments.iter().map(|m| m.d_t).collect();
        for (field, &eta) in fields.iter().zip(&etas) {
            match run.spec.variant {
                Variant::WignerReal | Variant::WignerComplex => {
                    let r = pde_residual_sc(field, &d_series)?;
                    push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                    if run.spec.variant == Variant::WignerReal && is_plain_fbm(&run) {
                        let r = pde_residual_sc_fbm(field, run.hurst.value())?;
                        push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                    }
                }
                Variant::WishartReal | Variant::WishartComplex => {
                    let c = run.spec.p as f64 / run.spec.n as f64;
                    let r = pde_residual_mp(field, &d_series, c)?;
                    push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                }
                Variant::Dependent => {}
            }
            have_residuals = true;
        }
    }

    if toggles.fixedpoint {
        let last = sim.pooled.len() - 1;
        let t = sim.pooled[last].t;
        let kernel = DependentKernel::new(&run.spec.index_set, moments[last].d_t)?;
        let mut zs = Vec::new();
        let mut reference = Vec::new();
        for (field, &eta) in fields.iter().zip(&etas) {
            for (j, &e) in re.iter().enumerate() {
                zs.push(Complex64::new(e, eta));
                reference.push(field.get(last, j));
            }
        }
        let outcome = select_sign_convention(&kernel, &zs, &reference, &run.config.fixedpoint)?;
        let finite = |v: f64| v.is_finite().then_some(v);
        manifest.sign_outcome = Some(SignRecord {
            chosen: outcome.chosen,
            max_err_minus: finite(outcome.max_err_minus),
            max_err_plus: finite(outcome.max_err_plus),
            max_iterations_minus: outcome.max_iterations_minus,
            kernel_asymmetry: kernel.asymmetry,
        });
        let cfg = FixedPointConfig {
            sign_convention: outcome.chosen,
            ..run.config.fixedpoint
        };
        let (csv, solved) = fixedpoint_csv(&kernel, t, &zs, &run.config.fixedpoint)?;
        outputs.write("fixedpoint.csv", &csv)?;
        let chosen: Vec<Option<Complex64>> = solved
            .into_iter()
            .filter(|(conv, _)| *conv == cfg.sign_convention)
            .map(|(_, g)| g)
            .collect();
        let per_eta = re.len();
        for (k, &eta) in etas.iter().enumerate() {
            let mut values = Vec::with_capacity(per_eta);
            for j in 0..per_eta {
                let idx = k * per_eta + j;
                values.push(match chosen[idx] {
                    Some(g) => (g - reference[idx]).norm(),
                    None => f64::INFINITY,
                });
            }
            let field = ResidualField {
                equation_id: "dependent",
                times: vec![t],
                re: re.clone(),
                values,
            };
            push_residual(&mut residuals, &mut manifest.diagnostics, &field, eta)?;
        }
        have_residuals = true;
    }
    if have_residuals {
        outputs.write("residuals.csv", &residuals)?;
    }

    if toggles.holder_diag {
        let f = TestFunction::arctan();
        let mut buf = b"s,t,function,lhs,rhs,ok\n".to_vec();
        let mut violations = 0.0;
        for i in 0..sim.kept.len() {
            for j in i + 1..sim.kept.len() {
                let (a, sa) = &sim.kept[i];
                let (b, sb) = &sim.kept[j];
                let bound = lipschitz_flow_check(a, sa, b, sb, &f)?;
                if !bound.ok {
                    violations += 1.0;
                }
                buf.extend(
                    format!("{},{},arctan,{},{},{}\n", a.t, b.t, bound.lhs, bound.rhs, bound.ok)
                        .bytes(),
                );
            }
        }
        outputs.write("flow.csv", &buf)?;
        manifest.diagnostics.insert("flow_bound_violations".into(), violations);
        let (csv, mean_q, max_q) = holder_csv(&run)?;
        outputs.write("holder.csv", &csv)?;
        manifest.diagnostics.insert("holder_quotient_mean".into(), mean_q);
        manifest.diagnostics.insert("holder_quotient_max".into(), max_q);
    }

    finish(outputs, manifest)
}

type Solved = Vec<(SignConvention, Option<Complex64>)>;

// Rows `t,re_z,im_z,re_S,im_S,convention,iterations,converged` for both
// conventions; failed points are written as NaN.
fn fixedpoint_csv(
    kernel: &DependentKernel,
    t: f64,
    zs: &[Complex64],
    cfg: &FixedPointConfig,
) -> Result<(Vec<u8>, Solved)> {
    let mut buf = b"t,re_z,im_z,re_S,im_S,convention,iterations,converged\n".to_vec();
    let mut solved = Vec::new();
    for conv in [SignConvention::SelfconsistentMinus, SignConvention::PaperPlus] {
        let c = FixedPointConfig {
            sign_convention: conv,
            ..*cfg
        };
        let results: Vec<Result<_>> = zs
            .par_iter()
            .map(|&z| dependent_fixed_point(kernel, z, &c))
            .collect();
        for (z, res) in zs.iter().zip(results) {
            let line = match res {
                Ok(fp) => {
                    solved.push((conv, Some(fp.g_upper())));
                    format!(
                        "{},{},{},{},{},{},{},true\n",
                        t, z.re, z.im, fp.s.re, fp.s.im, conv.as_str(), fp.iterations
                    )
                }
                Err(SpectralError::NoConvergence { iterations, .. }) => {
                    solved.push((conv, None));
                    format!("{},{},{},NaN,NaN,{},{},false\n", t, z.re, z.im, conv.as_str(), iterations)
                }
                Err(e) => return Err(e),
            };
            buf.extend(line.bytes());
        }
    }
    Ok((buf, solved))
}

// Hölder quotients of independent scalar solution paths at β = H − ε.
fn holder_csv(run: &ResolvedRun) -> Result<(Vec<u8>, f64, f64)> {
    let cfg = &run.config;
    let beta = run.hurst.value() - cfg.holder.epsilon;
    let sampler = FgnSampler::new(run.grid, run.hurst, SamplerOptions::default())?;
    let coeffs = &run.spec.coeffs;
    let x0 = cfg.ensemble.x0;
    let estimates: Vec<Result<_>> = (0..cfg.holder.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, rng::domain::HOLDER, i as u64);
            let start = x0.sample(&mut rng);
            let driver = sampler.sample_path(&mut rng);
            let path = integrate(coeffs, run.grid, &driver, start)?;
            holder_norm_estimate(&path.values, run.grid, beta)
        })
        .collect();
    let mut buf = b"path_id,beta,quotient,s,t\n".to_vec();
    let (mut sum, mut max) = (0.0, 0.0f64);
    let count = estimates.len().max(1) as f64;
    for (i, est) in estimates.into_iter().enumerate() {
        let est = est?;
        sum += est.quotient;
        max = max.max(est.quotient);
        let (s, t) = est.argmax_pair.unwrap_or((f64::NAN, f64::NAN));
        buf.extend(format!("{},{},{},{},{}\n", i, est.beta, est.quotient, s, t).bytes());
    }
    Ok((buf, sum / count, max))
}

/// Recompute metrics of a finished run against another law.
pub fn cmd_compare(run_dir: &Path, law: &str, out: Option<&Path>) -> Result<PathBuf> {
    let manifest = Manifest::read(run_dir)?;
    let id: LawId = law.parse()?;
    let text = fs::read_to_string(run_dir.join("spectra.csv"))
        .map_err(|e| SpectralError::Config(format!("cannot read spectra.csv: {e}")))?;
    let frames = parse_spectra_csv(&text)?;
    let expected = manifest.frame_dim * manifest.replicas;
    if frames.len() != manifest.moments.len() {
        return Err(SpectralError::Config(format!(
            "spectra.csv has {} times, manifest has {}",
            frames.len(),
            manifest.moments.len()
        )));
    }
    let run = manifest.config.resolve()?;
    let mut report = MetricReport::default();
    for (frame, row) in frames.iter().zip(&manifest.moments) {
        if frame.len() != expected {
            return Err(SpectralError::Config(format!(
                "spectrum at t = {} has {} eigenvalues, expected {expected}",
                frame.t,
                frame.len()
            )));
        }
        if (frame.t - row.t).abs() > 1e-12 * row.t.abs().max(1.0) {
            return Err(SpectralError::Config(format!(
                "spectrum time {} does not match manifest time {}",
                frame.t, row.t
            )));
        }
        let auto = auto_values(run.spec.variant, run.spec.n, run.spec.p, row);
        match id.resolve(auto) {
            Ok(l) => report.push_frame(frame, &l, law, &manifest.ensemble_hash),
            Err(_) if auto.scale.is_none() => {}
            Err(e) => return Err(e),
        }
    }
    let dir = out.unwrap_or(run_dir);
    fs::create_dir_all(dir)?;
    let path = dir.join("compare.csv");
    fs::write(&path, csv_bytes(|w| report.write_csv(w))?)?;
    Ok(path)
}

/// Parse `t,rank,eigenvalue` rows into time-ordered spectra.
pub fn parse_spectra_csv(text: &str) -> Result<Vec<SpectrumFrame>> {
    let bad = |line: usize| SpectralError::Config(format!("malformed spectra.csv line {line}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t,rank,eigenvalue")) => {}
        _ => return Err(SpectralError::Config("spectra.csv has no header".into())),
    }
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(i + 1))?;
        let _rank = parts.next().ok_or_else(|| bad(i + 1))?;
        let v: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(i + 1))?;
        match groups.last_mut() {
            Some((gt, vals)) if *gt == t => vals.push(v),
            _ => groups.push((t, vec![v])),
        }
    }
    if groups.is_empty() {
        return Err(SpectralError::Config("spectra.csv is empty".into()));
    }
    groups
        .into_iter()
        .map(|(t, v)| SpectrumFrame::new(t, v).map_err(|e| SpectralError::Config(e.to_string())))
        .collect()
}

/// Closed-form Dependent fixed point on the configured z-grid at the final
/// output time, under both sign conventions.
pub fn cmd_fixedpoint(config: &RunConfig, out: &Path) -> Result<RunArtifact> {
    let run = config.resolve()?;
    let moments = resolve_moments(&run)?;
    let mut manifest = base_manifest(&run, "fixedpoint", moments.clone());
    let last = moments.last().expect("at least one output time");
    let kernel = DependentKernel::new(&run.spec.index_set, last.d_t)?;
    manifest.diagnostics.insert("kernel_asymmetry".into(), kernel.asymmetry);
    let zs: Vec<Complex64> = run
        .z_grid
        .etas
        .iter()
        .flat_map(|&eta| run.z_grid.re_parts().into_iter().map(move |e| Complex64::new(e, eta)))
        .collect();
    let (csv, solved) = fixedpoint_csv(&kernel, last.t, &zs, &run.config.fixedpoint)?;
    let failed = solved.iter().filter(|(_, g)| g.is_none()).count();
    manifest.diagnostics.insert("failed_points".into(), failed as f64);
    let mut outputs = Outputs::new(out)?;
    outputs.write("fixedpoint.csv", &csv)?;
    finish(outputs, manifest)
}

/// Closed-form transforms of the configured laws at the output times and the
/// finite-difference residuals of their transport equations.
pub fn cmd_stieltjes(config: &RunConfig, out: &Path) -> Result<RunArtifact> {
    let run = config.resolve()?;
    if run.laws.is_empty() {
        return Err(SpectralError::Config("stieltjes needs at least one law".into()));
    }
    let moments = resolve_moments(&run)?;
    let mut manifest = base_manifest(&run, "stieltjes", moments.clone());
    let spec = &run.spec;
    let times: Vec<f64> = moments.iter().map(|m| m.t).collect();
    let d_series: Vec<f64> = moments.iter().map(|m| m.d_t).collect();
    if d_series.iter().any(|&d| !(d > 0.0)) {
        return Err(SpectralError::Config(
            "stieltjes needs a positive entry spread at every output time".into(),
        ));
    }
    let re = run.z_grid.re_parts();
    let h = run.hurst.value();
    let mut outputs = Outputs::new(out)?;
    let mut residuals = format!("{RESIDUAL_CSV_HEADER}\n").into_bytes();
    let pde = times.len() >= 3;
    for (k, (label, id)) in labelled_laws(&run).into_iter().enumerate() {
        let laws: Vec<_> = moments
            .iter()
            .map(|row| id.resolve(auto_values(spec.variant, spec.n, spec.p, row)))
            .collect::<Result<_>>()?;
        let mut buf = format!("{STIELTJES_CSV_HEADER}\n").into_bytes();
        for &eta in &run.z_grid.etas {
            let field = StieltjesField::from_fn(&times, &re, eta, |t, z| {
                let idx = times.iter().position(|&x| x == t).expect("field time");
                stieltjes_of(&laws[idx], z)
            });
            field.write_rows(&mut buf, "upper")?;
            if !pde {
                continue;
            }
            match id {
                LawId::Semicircle { .. } => {
                    let r = pde_residual_sc(&field, &d_series)?;
                    push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                    if is_plain_fbm(&run) && !spec.variant.is_complex() {
                        let r = pde_residual_sc_fbm(&field, h)?;
                        push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                        let (t0, t1) = (times[0].powf(2.0 * h), times[times.len() - 1].powf(2.0 * h));
                        let n = times.len() - 1;
                        let tau: Vec<f64> =
                            (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
                        let bt = burgers_times(&tau, h);
                        let bf = StieltjesField::from_fn(&bt, &re, eta, |t, z| gsc_closed(z, t.powf(h)));
                        let r = burgers_check(&bf, h)?;
                        push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                    }
                }
                LawId::MarchenkoPastur { .. } => {
                    if let crate::laws::SpectralLaw::MarchenkoPastur(l) = laws[0] {
                        let r = pde_residual_mp(&field, &d_series, l.c())?;
                        push_residual(&mut residuals, &mut manifest.diagnostics, &r, eta)?;
                    }
                }
            }
        }
        let name = format!("stieltjes_{k}.csv");
        outputs.write(&name, &buf)?;
        manifest.notes.push(format!("{name}: {label}"));
    }
    if pde {
        outputs.write("residuals.csv", &residuals)?;
    } else {
        manifest
            .notes
            .push("residuals skipped: fewer than 3 output times".into());
    }
    finish(outputs, manifest)
}

fn stieltjes_of(law: &crate::laws::SpectralLaw, z: Complex64) -> Complex64 {
    use crate::laws::SpectralLaw;
    match law {
        SpectralLaw::Semicircle(l) => gsc_closed(z, l.d()),
        SpectralLaw::MarchenkoPastur(l) => gmp_closed(z, l.c(), l.sigma()),
        SpectralLaw::PointMass(a) => (z - *a).inv(),
    }
}

/// Hölder quotients of independent solution paths of the configured scalar
/// equation.
pub fn cmd_holder(config: &RunConfig, out: &Path) -> Result<RunArtifact> {
    let run = config.resolve()?;
    let mut manifest = base_manifest(&run, "holder", Vec::new());
    let (csv, mean_q, max_q) = holder_csv(&run)?;
    manifest.diagnostics.insert("holder_quotient_mean".into(), mean_q);
    manifest.diagnostics.insert("holder_quotient_max".into(), max_q);
    let mut outputs = Outputs::new(out)?;
    outputs.write("holder.csv", &csv)?;
    finish(outputs, manifest)
}
