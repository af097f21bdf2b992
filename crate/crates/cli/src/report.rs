//! Report CSVs and the SVG figures rendered from them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use morlie_core::baselines::{ErrorCurve, WidthReport};
use morlie_core::{Chart, StatePoint};

use crate::io::fmt_f64;
use crate::plot::{self, Mark, Series};

pub const ERRORS_FILE: &str = "errors.csv";
pub const SPECTRUM_SG_FILE: &str = "spectrum_sg.csv";
pub const SPECTRUM_POD_FILE: &str = "spectrum_pod.csv";
pub const OVERLAY_FILE: &str = "overlay.csv";
pub const WIDTH_FILE: &str = "width.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_errors(path: &Path, curves: &[(usize, ErrorCurve)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "traj,time,error")?;
    for (traj, c) in curves {
        for (t, e) in c.times.iter().zip(&c.errors) {
            writeln!(w, "{traj},{},{}", fmt_f64(*t), fmt_f64(*e))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cumulative(sv: &[f64]) -> Vec<f64> {
    let total: f64 = sv.iter().sum();
    let mut acc = 0.0;
    sv.iter()
        .map(|s| {
            acc += s;
            if total > 0.0 {
                acc / total
            } else {
                1.0
            }
        })
        .collect()
}

/// Singular values of the reduced snapshot matrix, one block per product factor.
pub fn write_spectrum_sg(path: &Path, blocks: &[Vec<f64>]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "block,index,sigma,cumulative")?;
    for (b, sv) in blocks.iter().enumerate() {
        for (i, (s, c)) in sv.iter().zip(cumulative(sv)).enumerate() {
            writeln!(w, "{b},{i},{},{}", fmt_f64(*s), fmt_f64(c))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_pod(path: &Path, sv: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "index,sigma,cumulative")?;
    for (i, (s, c)) in sv.iter().zip(cumulative(sv)).enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(*s), fmt_f64(c))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub time: f64,
    /// `data` or `rom`.
    pub source: String,
    pub point: usize,
    pub x: f64,
    pub y: f64,
}

/// Planar picture of a state: `(x, y)` per particle, `(x_i, u_i)` on a
/// grid, or the Cartesian point of polar coordinates.
pub fn planar_points(x: &StatePoint) -> Vec<(f64, f64)> {
    let c = x.coords();
    match x.chart() {
        Chart::PointCloud { .. } => c.chunks_exact(3).map(|p| (p[0], p[1])).collect(),
        Chart::Grid { period } => c.iter().enumerate().map(|(i, u)| (period * i as f64 / c.len() as f64, *u)).collect(),
        Chart::Polar => vec![(c[0] * c[1].cos(), c[0] * c[1].sin())],
    }
}

pub fn overlay_rows(time: f64, data: &StatePoint, rom: &StatePoint) -> Vec<OverlayRow> {
    let mut out = Vec::new();
    for (source, x) in [("data", data), ("rom", rom)] {
        for (i, (px, py)) in planar_points(x).into_iter().enumerate() {
            out.push(OverlayRow {
                time,
                source: source.into(),
                point: i,
                x: px,
                y: py,
            });
        }
    }
    out
}

pub fn write_overlay(path: &Path, rows: &[OverlayRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,source,point,x,y")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", fmt_f64(r.time), r.source, r.point, fmt_f64(r.x), fmt_f64(r.y))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_width(path: &Path, report: Option<&WidthReport>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "traj,step,distance")?;
    if let Some(r) = report {
        for (traj, step, d) in &r.per_snapshot {
            writeln!(w, "{traj},{step},{}", fmt_f64(*d))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Data rows of a small report CSV (header skipped).
pub fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        bail!("{} is empty", path.display());
    };
    let n = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cols: Vec<String> = l.split(',').map(str::to_string).collect();
            if cols.len() != n {
                bail!("{}: line {}: expected {n} columns", path.display(), i + 2);
            }
            Ok(cols)
        })
        .collect()
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>().with_context(|| format!("not a number: {s:?}"))
}

/// Render every figure whose CSV exists in `dir`; returns the files written.
pub fn render_svgs(dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();

    let p = dir.join(ERRORS_FILE);
    if p.exists() {
        let mut series: Vec<Series> = Vec::new();
        for r in read_rows(&p)? {
            let traj = r[0].clone();
            let pt = (num(&r[1])?, num(&r[2])?);
            match series.iter_mut().find(|s| s.name == format!("trajectory {traj}")) {
                Some(s) => s.points.push(pt),
                None => {
                    let color = series.len();
                    series.push(Series {
                        name: format!("trajectory {traj}"),
                        points: vec![pt],
                        mark: Mark::Line,
                        color,
                    })
                }
            }
        }
        // Keep the legend readable.
        series.truncate(6);
        let chart = plot::Chart {
            title: "ROM reconstruction error".into(),
            x_label: "t".into(),
            y_label: "error".into(),
            log_y: false,
            series,
        };
        std::fs::write(dir.join("errors.svg"), chart.render())?;
        written.push("errors.svg".into());
    }

    let sg = dir.join(SPECTRUM_SG_FILE);
    let pod = dir.join(SPECTRUM_POD_FILE);
    if sg.exists() || pod.exists() {
        let mut series = Vec::new();
        if sg.exists() {
            let rows = read_rows(&sg)?;
            let n_blocks = rows.iter().filter_map(|r| r[0].parse::<usize>().ok()).max().map_or(0, |b| b + 1);
            for b in 0..n_blocks {
                let pts = rows
                    .iter()
                    .filter(|r| r[0] == b.to_string())
                    .map(|r| Ok((num(&r[1])? + 1.0, num(&r[2])?)))
                    .collect::<Result<Vec<_>>>()?;
                let name = if n_blocks == 1 {
                    "reduced snapshots".to_string()
                } else {
                    format!("reduced snapshots, block {b}")
                };
                series.push(Series {
                    name,
                    points: pts,
                    mark: Mark::Circle,
                    color: b,
                });
            }
        }
        if pod.exists() {
            let pts = read_rows(&pod)?
                .iter()
                .map(|r| Ok((num(&r[0])? + 1.0, num(&r[1])?)))
                .collect::<Result<Vec<_>>>()?;
            series.push(Series {
                name: "POD snapshots".into(),
                points: pts,
                mark: Mark::Line,
                color: 4,
            });
        }
        let chart = plot::Chart {
            title: "Singular values".into(),
            x_label: "index".into(),
            y_label: "sigma".into(),
            log_y: true,
            series,
        };
        std::fs::write(dir.join("spectra.svg"), chart.render())?;
        written.push("spectra.svg".into());
    }

    let p = dir.join(OVERLAY_FILE);
    if p.exists() {
        let rows = read_rows(&p)?;
        let mut times: Vec<String> = Vec::new();
        for r in &rows {
            if !times.contains(&r[0]) {
                times.push(r[0].clone());
            }
        }
        let mut series = Vec::new();
        for (i, t) in times.iter().enumerate() {
            for (source, mark) in [("data", Mark::Circle), ("rom", Mark::Cross)] {
                let pts = rows
                    .iter()
                    .filter(|r| &r[0] == t && r[1] == source)
                    .map(|r| Ok((num(&r[3])?, num(&r[4])?)))
                    .collect::<Result<Vec<_>>>()?;
                series.push(Series {
                    name: format!("{source}, t = {}", plot_time(t)),
                    points: pts,
                    mark,
                    color: i,
                });
            }
        }
        let chart = plot::Chart {
            title: "Data and reconstruction, first trajectory".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: false,
            series,
        };
        std::fs::write(dir.join("overlay.svg"), chart.render())?;
        written.push("overlay.svg".into());
    }
    Ok(written)
}

fn plot_time(s: &str) -> String {
    s.parse::<f64>().map(|t| format!("{t:.3}")).unwrap_or_else(|_| s.to_string())
}
