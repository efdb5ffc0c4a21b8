//! Distribution-report artifacts for a latent batch: per-dimension
//! histogram CSVs, the covariance matrix CSV, a combined SVG panel
//! (covariance heatmap plus marginal histograms), and the name,value
//! metrics CSV. All output is deterministic for identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::batch_stats;

pub const HIST_BINS: usize = 64;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `name,value` rows; floats use Rust's shortest round-trip form.
pub fn write_metrics_csv<S: AsRef<str>>(path: &Path, rows: &[(S, f64)]) -> Result<()> {
    let mut out = String::from("name,value\n");
    for (name, value) in rows {
        let _ = writeln!(out, "{},{}", name.as_ref(), value);
    }
    write_file(path, &out)
}

struct Histogram {
    lo: f64,
    width: f64,
    counts: Vec<usize>,
}

fn histogram(values: &[f64], bins: usize) -> Histogram {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        // constant column: center a unit range on the value
        lo -= 0.5;
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { lo, width, counts }
}

fn color(v: f64, vmax: f64) -> String {
    // diverging blue-white-red around zero
    let t = (v / vmax).clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t.abs()).round() as u8;
    let (r, g, b) = if t < 0.0 {
        (lerp(255.0, 59.0), lerp(255.0, 76.0), lerp(255.0, 192.0))
    } else {
        (lerp(255.0, 180.0), lerp(255.0, 4.0), lerp(255.0, 38.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn svg_panel(cov: &Tensor, hists: &[Histogram]) -> String {
    let d = cov.shape()[0];
    let cell = (240 / d).clamp(10, 48) as f64;
    let heat_w = cell * d as f64;
    let hist_w = 180.0;
    let hist_h = 100.0;
    let per_row = 4usize;
    let rows = hists.len().div_ceil(per_row);
    let hist_top = 70.0 + heat_w + 40.0;
    let width = (per_row as f64 * (hist_w + 20.0) + 40.0).max(heat_w + 60.0);
    let height = hist_top + rows as f64 * (hist_h + 46.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<text x=\"20\" y=\"24\">latent covariance</text>");
    let vmax = cov
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    for i in 0..d {
        for j in 0..d {
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"{}\" stroke=\"#999\" stroke-width=\"0.5\"><title>cov[{i},{j}] = {}</title></rect>",
                20.0 + j as f64 * cell,
                40.0 + i as f64 * cell,
                color(cov.at(i, j), vmax),
                cov.at(i, j)
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{:.1}\">marginal histograms</text>",
        40.0 + heat_w + 24.0
    );
    for (k, h) in hists.iter().enumerate() {
        let ox = 20.0 + (k % per_row) as f64 * (hist_w + 20.0);
        let oy = hist_top + (k / per_row) as f64 * (hist_h + 46.0);
        let max_count = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let bar_w = hist_w / h.counts.len() as f64;
        let _ = writeln!(
            s,
            "<text x=\"{ox:.1}\" y=\"{:.1}\">dim {k}</text>",
            oy - 6.0
        );
        for (b, &c) in h.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = hist_h * c as f64 / max_count;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bar_w:.2}\" height=\"{bh:.2}\" fill=\"#4878a8\"/>",
                ox + b as f64 * bar_w,
                oy + hist_h - bh
            );
        }
        let _ = writeln!(
            s,
            "<line x1=\"{ox:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
            oy + hist_h,
            ox + hist_w,
            oy + hist_h
        );
        let _ = writeln!(
            s,
            "<text x=\"{ox:.1}\" y=\"{:.1}\" font-size=\"10\">[{:.3}, {:.3}]</text>",
            oy + hist_h + 14.0,
            h.lo,
            h.lo + h.width * h.counts.len() as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `hist_dim{i}.csv` (bin_left,bin_right,count) per dimension, the
/// d x d `covariance.csv`, and `report.svg` into `out_dir` (created if
/// missing). Needs at least 2 rows for the covariance.
pub fn distribution_report(z: &Tensor, out_dir: &Path) -> Result<()> {
    if z.rank() != 2 || z.shape()[1] == 0 {
        return Err(Error::Invalid(format!(
            "distribution report needs a rank-2 batch with at least 1 column, got {:?}",
            z.shape()
        )));
    }
    let stats = batch_stats(z)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (n, d) = (z.shape()[0], z.shape()[1]);

    let mut hists = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| z.at(i, j)).collect();
        let h = histogram(&col, HIST_BINS);
        let mut csv = String::from("bin_left,bin_right,count\n");
        for (b, &c) in h.counts.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                h.lo + b as f64 * h.width,
                h.lo + (b + 1) as f64 * h.width,
                c
            );
        }
        write_file(&out_dir.join(format!("hist_dim{j}.csv")), &csv)?;
        hists.push(h);
    }

    let mut cov_csv = String::new();
    for i in 0..d {
        let row: Vec<String> = (0..d).map(|j| stats.cov.at(i, j).to_string()).collect();
        let _ = writeln!(cov_csv, "{}", row.join(","));
    }
    write_file(&out_dir.join("covariance.csv"), &cov_csv)?;
    write_file(&out_dir.join("report.svg"), &svg_panel(&stats.cov, &hists))?;
    Ok(())
}
