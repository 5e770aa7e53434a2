//! Static SVG figures.

use std::path::Path;

use plotters::prelude::*;

use crate::bench_harness::gap::GapReport;
use crate::error::{Error, Result};

const COLORS: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Plot {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Empirical CDF points `(x_(i), i / n)`.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// One step curve per named series.
pub fn plot_error_cdfs(path: &Path, series: &[(&str, Vec<f64>)], x_label: &str) -> Result<()> {
    let curves: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, v)| (*n, ecdf(v))).collect();
    let hi = curves
        .iter()
        .flat_map(|(_, c)| c.iter().map(|p| p.0))
        .fold(0.0f64, f64::max);
    let hi = if hi > 0.0 { hi * 1.05 } else { 1.0 };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(48)
        .caption("error CDF", ("sans-serif", 20))
        .build_cartesian_2d(0.0..hi, 0.0..1.0)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("fraction of trials")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut steps = Vec::with_capacity(2 * c.len() + 1);
        let mut prev = 0.0;
        steps.push((0.0, 0.0));
        for &(x, y) in c {
            steps.push((x, prev));
            steps.push((x, y));
            prev = y;
        }
        steps.push((hi, prev));
        chart
            .draw_series(LineSeries::new(steps, color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// Ratio against `log2 k` with two-stderr bars.
pub fn plot_gap(path: &Path, report: &GapReport) -> Result<()> {
    if report.points.is_empty() {
        return Err(Error::Empty("gap report"));
    }
    let xs: Vec<f64> = report.points.iter().map(|p| (p.k as f64).log2()).collect();
    let (x0, x1) = (xs[0] - 1.0, xs[xs.len() - 1] + 1.0);
    let y1 = report
        .points
        .iter()
        .map(|p| p.ratio + 2.0 * p.ratio_stderr)
        .fold(1.0f64, f64::max)
        * 1.1;
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(48)
        .caption(format!("d = {}, N = {}", report.d, report.n), ("sans-serif", 20))
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("log2 k")
        .y_desc("Phi_N / E max |g_j|")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(LineSeries::new(vec![(x0, 1.0), (x1, 1.0)], BLACK.mix(0.4)))
        .map_err(|e| plot_err(path, e))?;
    let pts: Vec<(f64, f64)> = xs.iter().zip(&report.points).map(|(&x, p)| (x, p.ratio)).collect();
    chart
        .draw_series(LineSeries::new(pts.clone(), BLUE.stroke_width(2)))
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(xs.iter().zip(&report.points).map(|(&x, p)| {
            PathElement::new(
                vec![(x, p.ratio - 2.0 * p.ratio_stderr), (x, p.ratio + 2.0 * p.ratio_stderr)],
                BLUE,
            )
        }))
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_harness::gap::GapPoint;

    #[test]
    fn ecdf_is_monotone_and_ends_at_one() {
        let c = ecdf(&[3.0, 1.0, f64::NAN, 2.0]);
        assert_eq!(c, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
    }

    #[test]
    fn writes_svg_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cdf.svg");
        plot_error_cdfs(&p, &[("a", vec![0.1, 0.2]), ("b", vec![0.0, 0.3, 0.5])], "error").unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("<svg"));
        let g = GapReport {
            d: 4,
            alpha: 2.0,
            n: 2,
            n_mc: 10,
            points: [4u64, 16]
                .iter()
                .map(|&k| GapPoint {
                    k,
                    phi_n: 1.0,
                    phi_n_stderr: 0.1,
                    gauss: 1.0,
                    gauss_stderr: 0.1,
                    ratio: 1.0,
                    ratio_stderr: 0.1,
                    in_window: true,
                })
                .collect(),
            gaussian_design: None,
        };
        let p = dir.path().join("gap.svg");
        plot_gap(&p, &g).unwrap();
        assert!(std::fs::metadata(&p).unwrap().len() > 0);
    }
}
