//! CSV tables and minimal SVG figures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

/// An output directory; every file written is relative to it.
#[derive(Clone, Debug)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        Self::create(self.root.join(name))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn write_csv<R, I>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let p = self.path(name);
        let io = |e: csv::Error| CliError::io(&p, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(&p).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    /// Two-column `key,value` table.
    pub fn write_summary(&self, name: &str, entries: &[(&str, String)]) -> Result<()> {
        self.write_csv(name, &["key", "value"], entries.iter().map(|(k, v)| [k.to_string(), v.clone()]))
    }
}

/// Reads a `key,value` table written by [`OutDir::write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(io)?;
            Ok((rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").to_string()))
        })
        .collect()
}

/// Looks up a numeric entry of a summary table.
pub fn summary_value(path: &Path, key: &str) -> Result<f64> {
    read_summary(path)?
        .into_iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| CliError::Invalid(format!("{}: no numeric `{key}`", path.display())))
}

fn color(t: f64) -> String {
    // dark blue through teal to yellow
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * (1.5 * t - 0.5).clamp(0.0, 1.0)) as u8;
    let g = (255.0 * (0.15 + 0.85 * t)) as u8;
    let b = (255.0 * (0.55 - 0.45 * t).clamp(0.0, 1.0)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of `log10(value)` over a `height x width` grid, one cell per bin.
pub fn heatmap_svg(values: &[f64], height: usize, width: usize, title: &str) -> String {
    let cell = (512 / height.max(width)).clamp(2, 24);
    let logs: Vec<f64> = values.iter().map(|&v| v.max(1e-300).log10()).collect();
    let finite_max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = (finite_max - 12.0).max(logs.iter().cloned().fold(f64::INFINITY, f64::min));
    let span = (finite_max - lo).max(1e-12);
    let (w, h) = (width * cell, height * cell + 24);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">{title} (log10, {lo:.2} to {finite_max:.2})</text>\n"
    );
    for k in 0..height {
        for l in 0..width {
            let t = (logs[k * width + l] - lo) / span;
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\"/>",
                l * cell,
                24 + k * cell,
                color(t)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart of one or more `(label, points)` series.
pub fn curve_svg(series: &[(&str, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let xs = if x1 > x0 { x1 - x0 } else { 1.0 };
    let ys = if y1 > y0 { y1 - y0 } else { 1.0 };
    let px = |x: f64| m + (x - x0) / xs * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / ys * (h - 2.0 * m);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label} [{x0:.4} to {x1:.4}]</text>\n\
         <text x=\"12\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">{y_label} [{y0:.4} to {y1:.4}]</text>\n",
        w - 2.0 * m,
        h - 2.0 * m,
        w / 2.0,
        h - 12.0,
        h / 2.0,
        h / 2.0
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let c = palette[i % palette.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{c}\">{label}</text>",
            path.join(" "),
            w - m - 120.0,
            m + 16.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path().join("a/b")).unwrap();
        out.write_summary("s.csv", &[("gap", num(0.125)), ("label", "x,y".into())]).unwrap();
        assert_eq!(summary_value(&out.path("s.csv"), "gap").unwrap(), 0.125);
        assert_eq!(read_summary(&out.path("s.csv")).unwrap()[1].1, "x,y");
        assert!(summary_value(&out.path("s.csv"), "label").is_err());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = heatmap_svg(&[1.0, 0.0, 1e-3, 2.0], 2, 2, "map");
        assert_eq!(s.matches("<rect").count(), 4);
        assert!(s.ends_with("</svg>\n"));
        let c = curve_svg(&[("a", vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])], "epoch", "psnr");
        assert!(c.contains("polyline"));
    }
}
