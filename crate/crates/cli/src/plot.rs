use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use plotters::prelude::*;

struct Row {
    psi: f64,
    n: f64,
    edges: f64,
    touched: f64,
    matching_total: f64,
    z: f64,
}

fn read(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let h = r.headers()?.clone();
    let col = |name: &str| h.iter().position(|c| c == name).with_context(|| format!("{}: no column {name}", path.display()));
    let (psi, n, edges, touched, m, z) = (col("psi")?, col("n")?, col("edges")?, col("edges_touched")?, col("matching_total")?, col("z")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { Ok(rec[i].parse::<f64>()?) };
        out.push(Row { psi: f(psi)?, n: f(n)?, edges: f(edges)?, touched: f(touched)?, matching_total: f(m)?, z: f(z)? });
    }
    Ok(out)
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(1.0, f64::max)
}

/// Writes edges_vs_n.svg, cost_vs_psi.svg and z_vs_matching.svg into `dir`.
pub fn plot(csvs: &[PathBuf], dir: &Path) -> Result<Vec<PathBuf>> {
    let runs: Vec<(String, Vec<Row>)> = csvs
        .iter()
        .map(|p| Ok((p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), read(p)?)))
        .collect::<Result<_>>()?;
    let mut written = Vec::new();

    let path = dir.join("edges_vs_n.svg");
    {
        let root = SVGBackend::new(&path, (800, 600)).into_drawing_area();
        root.fill(&WHITE)?;
        let xmax = max_of(runs.iter().flat_map(|(_, r)| r.iter().map(|x| x.n)));
        let ymax = max_of(runs.iter().flat_map(|(_, r)| r.iter().map(|x| x.edges)));
        let mut chart = ChartBuilder::on(&root)
            .caption("spanner edges vs live shapes", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..xmax * 1.05, 0.0..ymax * 1.05)?;
        chart.configure_mesh().x_desc("n").y_desc("edges").draw()?;
        for (k, (name, rows)) in runs.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            chart
                .draw_series(rows.iter().map(|r| Circle::new((r.n, r.edges), 2, color.filled())))?
                .label(name.as_str())
                .legend(move |(x, y)| Circle::new((x + 10, y), 3, color.filled()));
        }
        chart.configure_series_labels().border_style(BLACK).draw()?;
        root.present()?;
    }
    written.push(path);

    let path = dir.join("cost_vs_psi.svg");
    {
        let mut by_psi: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for (_, rows) in &runs {
            for r in rows {
                let e = by_psi.entry(r.psi.to_bits()).or_default();
                e.0 += r.touched;
                e.1 += 1.0;
            }
        }
        let pts: Vec<(f64, f64)> = by_psi.iter().map(|(p, (s, c))| (f64::from_bits(*p), (s / c).max(1e-3))).collect();
        let root = SVGBackend::new(&path, (800, 600)).into_drawing_area();
        root.fill(&WHITE)?;
        let xmax = max_of(pts.iter().map(|p| p.0)) * 1.5;
        let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).min(xmax / 2.0) / 1.5;
        let ymax = max_of(pts.iter().map(|p| p.1)) * 2.0;
        let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).min(ymax / 2.0) / 2.0;
        let mut chart = ChartBuilder::on(&root)
            .caption("mean edges touched per update vs Ψ", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d((xmin..xmax).log_scale(), (ymin..ymax).log_scale())?;
        chart.configure_mesh().x_desc("Ψ").y_desc("edges touched").draw()?;
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), BLUE.stroke_width(2)))?
            .label("measured")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
        if let Some(&(p0, y0)) = pts.first() {
            let quad: Vec<(f64, f64)> = pts.iter().map(|&(p, _)| (p, y0 * (p / p0).powi(2))).collect();
            chart
                .draw_series(LineSeries::new(quad, RED.stroke_width(1)))?
                .label("Ψ² reference")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        }
        chart.configure_series_labels().border_style(BLACK).draw()?;
        root.present()?;
    }
    written.push(path);

    let path = dir.join("z_vs_matching.svg");
    {
        let root = SVGBackend::new(&path, (800, 600)).into_drawing_area();
        root.fill(&WHITE)?;
        let xmax = max_of(runs.iter().flat_map(|(_, r)| r.iter().map(|x| x.matching_total)));
        let ymax = max_of(runs.iter().flat_map(|(_, r)| r.iter().map(|x| x.z))).max(2.0 * xmax);
        let mut chart = ChartBuilder::on(&root)
            .caption("difference size z vs Σ|M|", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..xmax * 1.05, 0.0..ymax * 1.05)?;
        chart.configure_mesh().x_desc("Σ|M|").y_desc("z").draw()?;
        chart
            .draw_series(LineSeries::new([(0.0, 0.0), (xmax, 2.0 * xmax)], RED))?
            .label("z = 2 Σ|M|")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        for (k, (_, rows)) in runs.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            chart.draw_series(rows.iter().map(|r| Circle::new((r.matching_total, r.z), 2, color.filled())))?;
        }
        chart.configure_series_labels().border_style(BLACK).draw()?;
        root.present()?;
    }
    written.push(path);
    Ok(written)
}
