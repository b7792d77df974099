//! Static report: SVG plots and a markdown summary of a finished run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{auto_values, parse_spectra_csv, sha256_hex, Manifest};
use crate::error::{Result, SpectralError};
use crate::laws::SpectralLaw;

/// Histogram with probability mass per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Mass divided by bin width.
    pub fn density(&self, i: usize) -> f64 {
        self.mass[i] / self.width(i)
    }
}

const MAX_BINS: usize = 10_000;

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis histogram: bin width `2·IQR·n^{−1/3}`, falling back to
/// Sturges' rule when the IQR vanishes.
pub fn freedman_diaconis(values: &[f64]) -> Result<Histogram> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::Domain("histogram needs finite values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let (lo, hi) = (v[0], v[n - 1]);
    let range = hi - lo;
    if range == 0.0 {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            mass: vec![1.0],
        });
    }
    let iqr = sorted_quantile(&v, 0.75) - sorted_quantile(&v, 0.25);
    let bins = if iqr > 0.0 {
        let h = 2.0 * iqr / (n as f64).cbrt();
        ((range / h).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        (n as f64).log2().ceil() as usize + 1
    };
    let w = range / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * w).collect();
    let mut counts = vec![0usize; bins];
    for x in &v {
        let i = (((x - lo) / w) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        edges,
        mass: counts.iter().map(|&c| c as f64 / n as f64).collect(),
    })
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

// Linear map of [a, b] onto pixel range [p, q].
fn scale(x: f64, a: f64, b: f64, p: f64, q: f64) -> f64 {
    if b == a {
        (p + q) / 2.0
    } else {
        p + (x - a) / (b - a) * (q - p)
    }
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {top} L{PAD} {bot} L{right} {bot}" stroke="black" fill="none"/>"#,
        top = PAD,
        bot = H - PAD,
        right = W - PAD
    );
    for (v, px, anchor) in [(x.0, PAD, "start"), (x.1, W - PAD, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{:.3}</text>"#,
            H - PAD + 15.0,
            v
        );
    }
    for (v, py) in [(y.0, H - PAD), (y.1, PAD)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
            PAD - 4.0,
            py + 4.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn polyline(points: &[(f64, f64)], colour: &str) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<polyline points=\"{}\" stroke=\"{colour}\" stroke-width=\"1.5\" fill=\"none\"/>\n",
        pts.join(" ")
    )
}

/// Histogram of `values` with an optional overlaid law density.
pub fn density_svg(values: &[f64], law: Option<(&str, &SpectralLaw)>, title: &str) -> Result<String> {
    let hist = freedman_diaconis(values)?;
    let mut x0 = hist.edges[0];
    let mut x1 = hist.edges[hist.bins()];
    let curve: Vec<(f64, f64)> = match law {
        Some((_, l)) => {
            let (a, b) = l.support();
            x0 = x0.min(a);
            x1 = x1.max(b);
            (0..=400)
                .map(|i| {
                    let x = x0 + (x1 - x0) * i as f64 / 400.0;
                    (x, l.density(x))
                })
                .collect()
        }
        None => Vec::new(),
    };
    // The law curve may diverge at a hard edge; cap it relative to the bars.
    let hist_max = (0..hist.bins()).map(|i| hist.density(i)).fold(0.0, f64::max);
    let curve_max = curve.iter().map(|p| p.1).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let ymax = hist_max.max(curve_max.min(3.0 * hist_max)).max(1e-12) * 1.05;
    let mut s = svg_open(title);
    axes(&mut s, (x0, x1), (0.0, ymax), "eigenvalue", "density");
    for i in 0..hist.bins() {
        let xa = scale(hist.edges[i], x0, x1, PAD, W - PAD);
        let xb = scale(hist.edges[i + 1], x0, x1, PAD, W - PAD);
        let y = scale(hist.density(i), 0.0, ymax, H - PAD, PAD);
        let _ = writeln!(
            s,
            r##"<rect x="{xa:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
            (xb - xa).max(0.0),
            (H - PAD - y).max(0.0)
        );
    }
    if let Some((label, _)) = law {
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| {
                (
                    scale(x, x0, x1, PAD, W - PAD),
                    scale(y.min(ymax), 0.0, ymax, H - PAD, PAD),
                )
            })
            .collect();
        s.push_str(&polyline(&pts, "#d62728"));
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#d62728" text-anchor="end">{}</text>"##,
            W - PAD,
            PAD - 10.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Metric value against time, one line per `(metric, law)` series.
pub fn metrics_svg(series: &BTreeMap<String, Vec<(f64, f64)>>, title: &str) -> String {
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let (t0, t1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (t0, t1) = if all.is_empty() { (0.0, 1.0) } else { (t0, t1) };
    let ymax = all.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-12) * 1.05;
    let mut s = svg_open(title);
    axes(&mut s, (t0, t1), (0.0, ymax), "t", "value");
    if all.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">no metric rows</text>"#,
            W / 2.0,
            H / 2.0
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let px: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(t, v)| (scale(t, t0, t1, PAD, W - PAD), scale(v, 0.0, ymax, H - PAD, PAD)))
            .collect();
        s.push_str(&polyline(&px, colour));
        for (x, y) in &px {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{colour}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}" text-anchor="end">{}</text>"#,
            W - PAD,
            PAD + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heat map of `log10` residuals over `(t, re_z)`.
pub fn residual_heatmap_svg(rows: &[(f64, f64, f64)], title: &str) -> String {
    let mut ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut es: Vec<f64> = rows.iter().map(|r| r.1).collect();
    for v in [&mut ts, &mut es] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let logs: Vec<f64> = rows.iter().map(|r| r.2.max(1e-300).log10()).collect();
    let finite = logs.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let mut s = svg_open(title);
    let (e0, e1) = (es.first().copied().unwrap_or(0.0), es.last().copied().unwrap_or(1.0));
    let (t0, t1) = (ts.first().copied().unwrap_or(0.0), ts.last().copied().unwrap_or(1.0));
    axes(&mut s, (e0, e1), (t0, t1), "Re z", "t");
    let cw = (W - 2.0 * PAD) / es.len().max(1) as f64;
    let ch = (H - 2.0 * PAD) / ts.len().max(1) as f64;
    for (r, l) in rows.iter().zip(&logs) {
        let i = es.iter().position(|&e| e == r.1).unwrap_or(0);
        let k = ts.iter().position(|&t| t == r.0).unwrap_or(0);
        let u = if hi > lo && l.is_finite() { (l - lo) / (hi - lo) } else { 0.5 };
        let (red, blue) = ((255.0 * u).round() as u8, (255.0 * (1.0 - u)).round() as u8);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},64,{blue})"/>"#,
            PAD + i as f64 * cw,
            H - PAD - (k + 1) as f64 * ch,
            cw,
            ch
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">log10 residual in [{:.2}, {:.2}]</text>"#,
        W - PAD,
        PAD - 10.0,
        if lo.is_finite() { lo } else { 0.0 },
        if hi.is_finite() { hi } else { 0.0 }
    );
    s.push_str("</svg>\n");
    s
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn parse_rows(text: &str, header: &str, file: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(SpectralError::Config(format!("{file} has an unexpected header")));
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn num(s: &str, file: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| SpectralError::Config(format!("{file}: `{s}` is not a number")))
}

/// Write `report/` into `out` (default: the run directory). Returns the
/// files written, relative to the report directory.
pub fn cmd_report(run_dir: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::read(run_dir)?;
    let spectra = fs::read_to_string(run_dir.join("spectra.csv"))
        .map_err(|e| SpectralError::Config(format!("cannot read spectra.csv: {e}")))?;
    let frames = parse_spectra_csv(&spectra)?;
    let last = frames.last().expect("parser rejects empty spectra");
    let run = manifest.config.resolve()?;

    let law = match (run.laws.first(), manifest.moments.last()) {
        (Some(id), Some(row)) => {
            let auto = auto_values(run.spec.variant, run.spec.n, run.spec.p, row);
            id.resolve(auto).ok().map(|l| (run.config.laws[0].clone(), l))
        }
        _ => None,
    };
    let density = density_svg(
        last.eigenvalues(),
        law.as_ref().map(|(s, l)| (s.as_str(), l)),
        &format!("ESD at t = {}", last.t),
    )?;

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut final_metrics: Vec<(String, String, f64)> = Vec::new();
    if let Some(text) = read_optional(&run_dir.join("metrics.csv"))? {
        for row in parse_rows(&text, "t,metric,value,law,ensemble_hash", "metrics.csv")? {
            if row.len() != 5 {
                return Err(SpectralError::Config("metrics.csv row has wrong width".into()));
            }
            let (t, v) = (num(&row[0], "metrics.csv")?, num(&row[2], "metrics.csv")?);
            series.entry(format!("{} {}", row[1], row[3])).or_default().push((t, v));
            if t == last.t {
                final_metrics.push((row[1].clone(), row[3].clone(), v));
            }
        }
    }
    let metrics = metrics_svg(&series, "distance to reference law");

    let mut residual_max: BTreeMap<String, f64> = BTreeMap::new();
    let heatmap = match read_optional(&run_dir.join("residuals.csv"))? {
        Some(text) => {
            let rows = parse_rows(&text, "t,re_z,residual,equation_id", "residuals.csv")?;
            let first = rows.first().map(|r| r[3].clone());
            let mut cells = Vec::new();
            for r in &rows {
                let v = num(&r[2], "residuals.csv")?;
                let m = residual_max.entry(r[3].clone()).or_insert(0.0);
                *m = m.max(v);
                if Some(&r[3]) == first.as_ref() {
                    cells.push((num(&r[0], "residuals.csv")?, num(&r[1], "residuals.csv")?, v));
                }
            }
            first.map(|id| residual_heatmap_svg(&cells, &format!("residual `{id}`")))
        }
        None => None,
    };

    let mut summary = String::new();
    let _ = writeln!(summary, "# Run summary\n");
    let _ = writeln!(summary, "| field | value |\n|---|---|");
    let c = &manifest.config;
    for (k, v) in [
        ("command", manifest.command.clone()),
        ("config hash", manifest.config_hash.clone()),
        ("seed", manifest.seed.to_string()),
        ("ensemble hash", manifest.ensemble_hash.clone()),
        ("variant", format!("{:?}", c.ensemble.variant)),
        ("N", c.ensemble.n.to_string()),
        ("frame dimension", manifest.frame_dim.to_string()),
        ("replicas", manifest.replicas.to_string()),
        ("H", c.hurst.to_string()),
        ("final time", last.t.to_string()),
    ] {
        let _ = writeln!(summary, "| {k} | {v} |");
    }
    if !final_metrics.is_empty() {
        let _ = writeln!(summary, "\n## Metrics at t = {}\n", last.t);
        let _ = writeln!(summary, "| metric | law | value |\n|---|---|---|");
        for (m, l, v) in &final_metrics {
            let _ = writeln!(summary, "| {m} | {l} | {v} |");
        }
    }
    if !residual_max.is_empty() {
        let _ = writeln!(summary, "\n## Largest residuals\n");
        let _ = writeln!(summary, "| equation | max residual |\n|---|---|");
        for (id, v) in &residual_max {
            let _ = writeln!(summary, "| {id} | {v} |");
        }
    }
    if let Some(sign) = &manifest.sign_outcome {
        let _ = writeln!(summary, "\n## Sign convention\n");
        let _ = writeln!(summary, "chosen: `{}`", sign.chosen.as_str());
    }
    if !manifest.diagnostics.is_empty() {
        let _ = writeln!(summary, "\n## Diagnostics\n");
        let _ = writeln!(summary, "| name | value |\n|---|---|");
        for (k, v) in &manifest.diagnostics {
            let _ = writeln!(summary, "| {k} | {v} |");
        }
    }
    let _ = writeln!(summary, "\n## Files\n");
    for f in &manifest.files {
        let _ = writeln!(summary, "- `{}` ({} bytes, sha256 `{}`)", f.name, f.bytes, &f.sha256[..16]);
    }

    let dir = out.unwrap_or(run_dir).join("report");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<()> {
        fs::write(dir.join(name), body)?;
        written.push(PathBuf::from(name));
        Ok(())
    };
    put("density.svg", &density)?;
    put("metrics.svg", &metrics)?;
    if let Some(h) = heatmap {
        put("residuals.svg", &h)?;
    }
    put("summary.md", &summary)?;
    Ok(written)
}

/// SHA-256 of every file in a report directory, by name.
pub fn report_checksums(report_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(report_dir)? {
        let entry = entry?;
        let bytes = fs::read(entry.path())?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), sha256_hex(&bytes));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_mass_sums_to_one() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let h = freedman_diaconis(&v).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.edges.len(), h.bins() + 1);
    }

    #[test]
    fn degenerate_histograms() {
        let h = freedman_diaconis(&[2.0; 5]).unwrap();
        assert_eq!(h.mass, vec![1.0]);
        let h = freedman_diaconis(&[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(freedman_diaconis(&[]).is_err());
    }

    #[test]
    fn svgs_are_well_formed() {
        let law = SpectralLaw::semicircle(1.0).unwrap();
        let s = density_svg(&[-1.0, 0.0, 0.5, 1.0], Some(("sc:1", &law)), "x").unwrap();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        let s = metrics_svg(&BTreeMap::new(), "m");
        assert!(s.contains("no metric rows"));
    }
}
