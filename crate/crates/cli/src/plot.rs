// SPDX-License-Identifier: Apache-2.0

//! SVG rendering of CSV artifacts. Plotting never re-runs a simulation.

use std::fs::{self, File};
use std::path::Path;

use anyhow::{bail, Context, Result};
use plotters::prelude::*;

use qdi_dpa::io::read_series_csv;

use crate::{PlotArgs, PlotKind};

const SIZE: (u32, u32) = (960, 540);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

struct Line {
    label: String,
    points: Vec<(f64, f64)>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(
        || p.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn read_lines(inputs: &[std::path::PathBuf]) -> Result<Vec<Line>> {
    inputs
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let s = read_series_csv(f).with_context(|| format!("series {}", p.display()))?;
            Ok(Line {
                label: format!("{} ({})", stem(p), s.value_column),
                points: s.t_ps.into_iter().zip(s.values).collect(),
            })
        })
        .collect()
}

/// Columns whose header contains `d_A`, skipping empty cells.
fn read_da_columns(inputs: &[std::path::PathBuf]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    for p in inputs {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        let mut r = csv::Reader::from_reader(f);
        let headers = r.headers().map_err(qdi_dpa::Error::from)?.clone();
        let cols: Vec<usize> = (0..headers.len())
            .filter(|&i| headers[i].contains("d_A"))
            .collect();
        if cols.is_empty() {
            bail!(qdi_dpa::Error::Schema(format!(
                "{}: no column named like `d_A`",
                p.display()
            )));
        }
        let mut data = vec![Vec::new(); cols.len()];
        for rec in r.records() {
            let rec = rec.map_err(qdi_dpa::Error::from)?;
            for (k, &c) in cols.iter().enumerate() {
                let cell = rec.get(c).unwrap_or("").trim();
                if !cell.is_empty() {
                    let v: f64 = cell.parse().map_err(|_| {
                        qdi_dpa::Error::Schema(format!(
                            "{}: column `{}` has `{cell}`",
                            p.display(),
                            &headers[c]
                        ))
                    })?;
                    data[k].push(v);
                }
            }
        }
        for (k, &c) in cols.iter().enumerate() {
            if data[k].is_empty() {
                bail!(qdi_dpa::Error::Schema(format!(
                    "{}: column `{}` is empty",
                    p.display(),
                    &headers[c]
                )));
            }
            out.push((headers[c].to_string(), std::mem::take(&mut data[k])));
        }
    }
    Ok(out)
}

fn read_peaks(input: &Path) -> Result<Vec<(f64, f64)>> {
    let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut r = csv::Reader::from_reader(f);
    let headers = r.headers().map_err(qdi_dpa::Error::from)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["guess", "peak"] {
        bail!(qdi_dpa::Error::Schema(format!(
            "{}: expected header `guess,peak`",
            input.display()
        )));
    }
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(qdi_dpa::Error::from)?;
        let g: f64 = rec[0]
            .parse()
            .map_err(|_| qdi_dpa::Error::Schema(format!("column `guess` has `{}`", &rec[0])))?;
        if !rec[1].is_empty() {
            let p: f64 = rec[1]
                .parse()
                .map_err(|_| qdi_dpa::Error::Schema(format!("column `peak` has `{}`", &rec[1])))?;
            pts.push((g, p));
        }
    }
    if pts.is_empty() {
        bail!(qdi_dpa::Error::Schema(format!(
            "{}: no comparable peaks",
            input.display()
        )));
    }
    Ok(pts)
}

fn bounds(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-12 {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn draw_lines(svg: &mut String, lines: &[Line], title: &str, y_desc: &str) -> Result<()> {
    let (x0, x1) = bounds(lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(lines.iter().flat_map(|l| l.points.iter().map(|p| p.1)));
    let root = SVGBackend::with_string(svg, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("time (ps)")
        .y_desc(y_desc)
        .draw()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    for (i, l) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(
                l.points.iter().copied(),
                color.stroke_width(2),
            ))
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .label(l.label.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(())
}

fn draw_histogram(svg: &mut String, series: &[(String, Vec<f64>)], title: &str) -> Result<()> {
    const BINS: usize = 20;
    let hi = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let width = hi / BINS as f64;
    let counts: Vec<Vec<usize>> = series
        .iter()
        .map(|(_, v)| {
            let mut c = vec![0usize; BINS];
            for &x in v {
                c[((x / width) as usize).min(BINS - 1)] += 1;
            }
            c
        })
        .collect();
    let top = counts.iter().flatten().copied().max().unwrap_or(1).max(1);
    let root = SVGBackend::with_string(svg, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..hi, 0usize..top + 1)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("d_A")
        .y_desc("count")
        .draw()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let n = series.len() as f64;
    for (k, ((label, _), c)) in series.iter().zip(&counts).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let bars = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(move |(b, &v)| {
                let x0 = b as f64 * width + k as f64 * width / n;
                Rectangle::new([(x0, 0), (x0 + width / n, v)], color.mix(0.7).filled())
            });
        chart
            .draw_series(bars)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .label(label.clone())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(())
}

fn draw_peaks(svg: &mut String, peaks: &[(f64, f64)], title: &str) -> Result<()> {
    let x1 = peaks.iter().map(|p| p.0).fold(0.0, f64::max) + 1.0;
    let (_, y1) = bounds(peaks.iter().map(|p| p.1).chain([0.0]));
    let root = SVGBackend::with_string(svg, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(-1.0..x1, 0.0..y1)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("key guess")
        .y_desc("max |T| (uA)")
        .draw()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    chart
        .draw_series(
            peaks
                .iter()
                .map(|&(g, p)| Circle::new((g, p), 3, PALETTE[0].filled())),
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(())
}

pub fn run(args: &PlotArgs) -> Result<u8> {
    let mut svg = String::new();
    match args.kind {
        PlotKind::Waveform => {
            let lines = read_lines(&args.inputs)?;
            draw_lines(
                &mut svg,
                &lines,
                args.title.as_deref().unwrap_or("block current"),
                "current (uA)",
            )?;
        }
        PlotKind::BiasOverlay => {
            let lines = read_lines(&args.inputs)?;
            draw_lines(
                &mut svg,
                &lines,
                args.title.as_deref().unwrap_or("DPA bias"),
                "T (uA)",
            )?;
        }
        PlotKind::DaHistogram => {
            let series = read_da_columns(&args.inputs)?;
            draw_histogram(
                &mut svg,
                &series,
                args.title.as_deref().unwrap_or("max d_A distribution"),
            )?;
        }
        PlotKind::PeakVsGuess => {
            if args.inputs.len() != 1 {
                bail!(crate::config::usage(
                    "peak-vs-guess takes exactly one --input"
                ));
            }
            let peaks = read_peaks(&args.inputs[0])?;
            draw_peaks(
                &mut svg,
                &peaks,
                args.title.as_deref().unwrap_or("peak bias per key guess"),
            )?;
        }
    }
    if !args.reproducible {
        if let Some(end) = svg.find('\n') {
            svg.insert_str(
                end + 1,
                &format!(
                    "<!-- generated by qdi-dpa {} -->\n",
                    env!("CARGO_PKG_VERSION")
                ),
            );
        }
    }
    fs::write(&args.output, &svg).with_context(|| format!("writing {}", args.output.display()))?;
    println!("wrote {}", args.output.display());
    Ok(0)
}
