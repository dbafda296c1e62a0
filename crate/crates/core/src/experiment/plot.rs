//! Minimal SVG charts: HV curves, mask heatmaps, selection frequencies and
//! τ sweeps. Linear axes, legend on every chart.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::runner::{parse_run_dir, read_generations_csv};
use crate::fairness::{objective_names, N_OBJECTIVES};
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str, width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        width / 2.0,
        escape(title)
    )
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// A line chart; each series is `(label, points)`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = nice_range(x0, x1);
    let (y0, y1) = nice_range(y0, y1);
    let plot_w = WIDTH - 2.0 * MARGIN - 120.0;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut s = header(title, WIDTH, HEIGHT);
    let _ = writeln!(
        s,
        "<g stroke=\"black\"><line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/><line x1=\"{m}\" y1=\"{b}\" x2=\"{m}\" y2=\"{t}\"/></g>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = MARGIN + plot_w,
        t = MARGIN
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>",
            sx(fx),
            HEIGHT - MARGIN + 16.0,
            fx
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.4}</text>",
            MARGIN - 4.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            "<polyline class=\"series\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        let ly = MARGIN + 18.0 * k as f64;
        let lx = MARGIN + plot_w + 12.0;
        let _ = writeln!(
            s,
            "<g class=\"legend\"><line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text></g>",
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Generation x objective heatmap of 0/1 mask rows.
pub fn mask_heatmap(title: &str, rows: &[(usize, Vec<u8>)]) -> String {
    let names = objective_names();
    let cell_w = 18.0;
    let cell_h = (300.0 / rows.len().max(1) as f64).clamp(2.0, 14.0);
    let left = 48.0;
    let top = 48.0;
    let width = left + cell_w * N_OBJECTIVES as f64 + 120.0;
    let height = top + cell_h * rows.len() as f64 + 40.0;
    let mut s = header(title, width, height);
    for (k, name) in names.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"9\">{}</text>",
            left + cell_w * (k as f64 + 0.5),
            top - 6.0,
            name
        );
    }
    for (r, (generation, bits)) in rows.iter().enumerate() {
        let y = top + cell_h * r as f64;
        if r % 10 == 0 {
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"9\">{generation}</text>",
                left - 4.0,
                y + cell_h.min(9.0)
            );
        }
        for (k, &b) in bits.iter().enumerate() {
            let fill = if b == 1 { "#1f77b4" } else { "#f0f0f0" };
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{:.1}\" y=\"{y:.1}\" width=\"{cell_w}\" height=\"{cell_h:.2}\" fill=\"{fill}\"/>",
                left + cell_w * k as f64
            );
        }
    }
    let lx = left + cell_w * N_OBJECTIVES as f64 + 12.0;
    let _ = writeln!(
        s,
        "<g class=\"legend\"><rect x=\"{lx}\" y=\"{top}\" width=\"12\" height=\"12\" fill=\"#1f77b4\"/><text x=\"{}\" y=\"{}\">selected</text>\
         <rect x=\"{lx}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"#f0f0f0\" stroke=\"#999\"/><text x=\"{}\" y=\"{}\">not selected</text></g>",
        lx + 16.0,
        top + 10.0,
        top + 18.0,
        lx + 16.0,
        top + 28.0
    );
    s.push_str("</svg>\n");
    s
}

/// Bar chart of how many generations selected each objective.
pub fn frequency_bars(title: &str, counts: &[usize; N_OBJECTIVES], generations: usize) -> String {
    let names = objective_names();
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = (WIDTH - 2.0 * MARGIN - 100.0) / N_OBJECTIVES as f64;
    let max = generations.max(1) as f64;
    let mut s = header(title, WIDTH, HEIGHT);
    for (k, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * plot_h;
        let x = MARGIN + bar_w * k as f64;
        let _ = writeln!(
            s,
            "<rect class=\"bar\" data-count=\"{c}\" x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"#2ca02c\"/>",
            HEIGHT - MARGIN - h,
            bar_w * 0.8
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"9\">{}</text>",
            x + bar_w * 0.4,
            HEIGHT - MARGIN + 12.0,
            names[k]
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{generations}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>",
        MARGIN - 4.0,
        MARGIN + 4.0,
        MARGIN - 4.0,
        HEIGHT - MARGIN
    );
    let lx = WIDTH - MARGIN - 80.0;
    let _ = writeln!(
        s,
        "<g class=\"legend\"><rect x=\"{lx}\" y=\"{MARGIN}\" width=\"12\" height=\"12\" fill=\"#2ca02c\"/><text x=\"{}\" y=\"{}\">generations selected</text></g>",
        lx + 16.0,
        MARGIN + 10.0
    );
    s.push_str("</svg>\n");
    s
}

/// Read `mask.csv` as `(generation, bits)` rows.
pub fn read_mask_csv(path: &Path) -> Result<Vec<(usize, Vec<u8>)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|_| Error::MissingArtifacts(path.display().to_string()))?;
    let bad = |m: String| Error::Input {
        path: path.display().to_string(),
        message: m,
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != N_OBJECTIVES + 1 {
            return Err(bad(format!("expected {} columns", N_OBJECTIVES + 1)));
        }
        let generation = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
        let bits = (1..=N_OBJECTIVES)
            .map(|k| match &rec[k] {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(bad(format!("mask entry `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push((generation, bits));
    }
    Ok(rows)
}

/// Per-objective count of generations (excluding the initial population)
/// whose mask selected it.
pub fn selection_counts(rows: &[(usize, Vec<u8>)]) -> [usize; N_OBJECTIVES] {
    let mut counts = [0; N_OBJECTIVES];
    for (_, bits) in rows.iter().filter(|(g, _)| *g > 0) {
        for (c, &b) in counts.iter_mut().zip(bits) {
            *c += b as usize;
        }
    }
    counts
}

/// Run directories below `dir`, or `dir` itself if it is a run directory.
pub fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("generations.csv").is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut runs: Vec<(u32, u32, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|_| Error::MissingArtifacts(dir.display().to_string()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let (f, t) = parse_run_dir(&e.file_name().to_string_lossy())?;
            Some((f, t, e.path()))
        })
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::MissingArtifacts(format!("no run directories in {}", dir.display())));
    }
    Ok(runs.into_iter().map(|(_, _, p)| p).collect())
}

/// Mean validation HV per generation over the runs of `dir`.
pub fn mean_hv_curve(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let runs = run_dirs(dir)?;
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for run in &runs {
        let p = run.join("generations.csv");
        if !p.is_file() {
            return Err(Error::MissingArtifacts(p.display().to_string()));
        }
        for (i, g) in read_generations_csv(&p)?.iter().enumerate() {
            if sums.len() <= i {
                sums.push((g.generation as f64, 0.0, 0));
            }
            sums[i].1 += g.validation.hv;
            sums[i].2 += 1;
        }
    }
    Ok(sums.into_iter().map(|(g, s, n)| (g, s / n as f64)).collect())
}

/// Write every chart that the inputs support into `out`; returns the paths.
///
/// Each input is an experiment or run directory and becomes one line of the
/// HV chart. The mask heatmap and frequency chart use the first run of the
/// first input. A `tau_sweep.csv` in any input adds a τ chart.
pub fn emit_plots(inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::MissingArtifacts("no input directories".into()));
    }
    // Read everything before touching `out`, so a bad input leaves nothing behind.
    let mut sweeps = Vec::new();
    let mut curves = Vec::new();
    for dir in inputs {
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let sweep = dir.join("tau_sweep.csv");
        if sweep.is_file() {
            sweeps.push((label, read_tau_sweep(&sweep)?));
        } else {
            curves.push((label, mean_hv_curve(dir)?));
        }
    }
    let mask_rows = if curves.is_empty() {
        None
    } else {
        let first = run_dirs(&inputs[0])?;
        Some(read_mask_csv(&first[0].join("mask.csv"))?)
    };

    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    let mut written = Vec::new();
    let mut write = |name: &str, svg: String| -> Result<()> {
        let p = out.join(name);
        std::fs::write(&p, svg).map_err(Error::io(&p))?;
        written.push(p);
        Ok(())
    };
    if let Some(rows) = mask_rows {
        write("hv_curve.svg", line_chart("HV over generations", "generation", "HV (validation)", &curves))?;
        write("mask_heatmap.svg", mask_heatmap("Selected objectives per generation", &rows))?;
        let generations = rows.iter().filter(|(g, _)| *g > 0).count();
        write(
            "selection_frequency.svg",
            frequency_bars("Selection frequency", &selection_counts(&rows), generations),
        )?;
    }
    if !sweeps.is_empty() {
        write("tau_sweep.svg", line_chart("Final test HV against tau", "tau", "HV (test)", &sweeps))?;
    }
    Ok(written)
}

/// `(tau, test_hv)` pairs of a `tau_sweep.csv`.
pub fn read_tau_sweep(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|_| Error::MissingArtifacts(path.display().to_string()))?;
    let bad = |m: String| Error::Input {
        path: path.display().to_string(),
        message: m,
    };
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (ti, hi) = (col("tau")?, col("test_hv")?);
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let p = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
            Ok((p(ti)?, p(hi)?))
        })
        .collect()
}
