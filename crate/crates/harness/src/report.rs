use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use ndarray::Array4;
use trajspace::anchor::TraversabilityMap;
use trajspace::dataset::Task;

use crate::corpus::Window;
use crate::protocol::{by_task, EvalResult, RowKind};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    Json,
    All,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            "all" => Ok(Format::All),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn csv(results: &[EvalResult]) -> Result<String> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut out =
        String::from("method,task,scene,kind,ade,fde,samples,count,traversable,config_hash\n");
    for r in results {
        let kind = match r.kind {
            RowKind::Split => "split",
            RowKind::SourceAverage => "source_average",
            RowKind::Average => "average",
        };
        let trav = r.traversable.map(|t| format!("{t:.4}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{kind},{:.4},{:.4},{},{},{trav},{}",
            r.method,
            r.task.label(),
            r.scene,
            r.ade,
            r.fde,
            r.samples,
            r.count,
            r.config_hash
        )
        .expect("write to string");
    }
    Ok(out)
}

fn cell(r: &EvalResult) -> String {
    format!("{:.2} / {:.2}", r.ade, r.fde)
}

/// Markdown tables: one scene-column table per leave-one-out task and a
/// pair-block ADE and FDE table for domain adaptation.
pub fn markdown(results: &[EvalResult]) -> Result<String> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut out = String::new();
    for (task, rows) in by_task(results) {
        if task == Task::DomainAdaptation {
            for (metric, pick) in [("ADE", true), ("FDE", false)] {
                out.push_str(&pair_table(&rows, metric, pick));
                out.push('\n');
            }
        } else {
            out.push_str(&scene_table(task, &rows));
            out.push('\n');
        }
    }
    Ok(out)
}

fn methods<'a>(rows: &[&'a EvalResult]) -> Vec<&'a str> {
    let mut m: Vec<&str> = Vec::new();
    for r in rows {
        if !m.contains(&r.method.as_str()) {
            m.push(&r.method);
        }
    }
    m
}

fn columns(rows: &[&EvalResult]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        if !cols.contains(&r.scene) {
            cols.push(r.scene.clone());
        }
    }
    // averages go last
    cols.sort_by_key(|c| c == "AVG");
    cols
}

fn scene_table(task: Task, rows: &[&EvalResult]) -> String {
    let cols = columns(rows);
    let mut out = format!("| {} | {} |\n", task.label(), cols.join(" | "));
    out.push_str(&format!("|---|{}\n", "---|".repeat(cols.len())));
    for m in methods(rows) {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| {
                rows.iter()
                    .find(|r| r.method == m && &r.scene == c)
                    .map(|r| cell(r))
                    .unwrap_or_else(|| "-".into())
            })
            .collect();
        out.push_str(&format!("| {m} | {} |\n", cells.join(" | ")));
    }
    out
}

fn pair_table(rows: &[&EvalResult], metric: &str, ade: bool) -> String {
    let cols = columns(rows);
    let header: Vec<String> = cols
        .iter()
        .map(|c| {
            if c.ends_with("2*") {
                format!("{c} AVG")
            } else {
                c.clone()
            }
        })
        .collect();
    let mut out = format!(
        "| Domain Adaptation ({metric}) | {} |\n",
        header.join(" | ")
    );
    out.push_str(&format!("|---|{}\n", "---|".repeat(cols.len())));
    for m in methods(rows) {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| {
                rows.iter()
                    .find(|r| r.method == m && &r.scene == c)
                    .map(|r| format!("{:.2}", if ade { r.ade } else { r.fde }))
                    .unwrap_or_else(|| "-".into())
            })
            .collect();
        out.push_str(&format!("| {m} | {} |\n", cells.join(" | ")));
    }
    out
}

/// Writes `results.<ext>` files for `format` and returns their paths.
pub fn report(
    results: &[EvalResult],
    format: Format,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    if matches!(format, Format::Csv | Format::All) {
        emit("results.csv", csv(results)?)?;
    }
    if matches!(format, Format::Markdown | Format::All) {
        emit("results.md", markdown(results)?)?;
    }
    if matches!(format, Format::Json | Format::All) {
        emit("results.json", serde_json::to_string_pretty(results)?)?;
    }
    Ok(written)
}

/// PNG of up to `max_agents` windows: map in grey and white, history in
/// blue, ground truth in green, samples in red.
pub fn plot_predictions(
    path: impl AsRef<Path>,
    map: Option<&TraversabilityMap<f64>>,
    windows: &[Window],
    pred: &Array4<f64>,
    max_agents: usize,
) -> Result<()> {
    let n = windows.len().min(max_agents);
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for (i, w) in windows.iter().take(n).enumerate() {
        pts.extend(w.hist.iter().chain(&w.fut));
        for s in 0..pred.dim().1 {
            for t in 0..pred.dim().2 {
                pts.push([pred[[i, s, t, 0]], pred[[i, s, t, 1]]]);
            }
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    if pts.is_empty() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let pad = 1.0;
    let size = 800u32;
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad;
    let scale = size as f64 / span;
    let to_px = |p: [f64; 2]| ((p[0] - lo[0] + pad) * scale, (p[1] - lo[1] + pad) * scale);

    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
    if let Some(map) = map {
        for (x, y, px) in img.enumerate_pixels_mut() {
            let world = [
                x as f64 / scale + lo[0] - pad,
                y as f64 / scale + lo[1] - pad,
            ];
            if !map.is_traversable(world) {
                *px = Rgb([170, 170, 170]);
            }
        }
    }
    let mut polyline = |points: &[[f64; 2]], color: Rgb<u8>| {
        for seg in points.windows(2) {
            line(&mut img, to_px(seg[0]), to_px(seg[1]), color);
        }
    };
    for (i, w) in windows.iter().take(n).enumerate() {
        for s in 0..pred.dim().1 {
            let mut path = vec![w.last_observed()];
            path.extend((0..pred.dim().2).map(|t| [pred[[i, s, t, 0]], pred[[i, s, t, 1]]]));
            polyline(&path, Rgb([220, 60, 60]));
        }
        let mut gt = vec![w.last_observed()];
        gt.extend(&w.fut);
        polyline(&gt, Rgb([40, 160, 60]));
        polyline(&w.hist, Rgb([40, 80, 200]));
    }
    img.save(path)?;
    Ok(())
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}
