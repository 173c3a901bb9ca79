//! Static SVG plots of result series and Wigner grids.

use elq_core::scenario::ResultSeries;
use elq_core::tomo::WignerGrid;
use plotters::prelude::*;

use crate::CliError;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::new("plot", e.to_string())
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

/// Line plot of the selected columns against the series axis.
pub fn series_svg(series: &ResultSeries, columns: &[&str], y_desc: &str) -> Result<String, CliError> {
    let cols: Vec<&(String, Vec<f64>)> = series.columns.iter().filter(|c| columns.contains(&c.0.as_str())).collect();
    let (x0, x1) = range(series.axis.iter().copied());
    let (y0, y1) = range(cols.iter().flat_map(|c| c.1.iter().copied()));
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (640, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(&series.name, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc(&series.axis_name).y_desc(y_desc).draw().map_err(plot_err)?;
        for (k, (label, ys)) in cols.iter().map(|c| (&c.0, &c.1)).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = series.axis.iter().copied().zip(ys.iter().copied()).filter(|p| p.1.is_finite()).collect();
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
            chart.draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(out)
}

/// Blue-white-red map on `[-m, m]`.
fn diverging(v: f64, m: f64) -> RGBColor {
    let t = (v / m).clamp(-1.0, 1.0);
    let mix = |a: u8, b: u8, s: f64| (a as f64 + (b as f64 - a as f64) * s).round() as u8;
    if t >= 0.0 {
        RGBColor(mix(255, 178, t), mix(255, 24, t), mix(255, 43, t))
    } else {
        RGBColor(mix(255, 33, -t), mix(255, 102, -t), mix(255, 172, -t))
    }
}

pub fn wigner_svg(grid: &WignerGrid, title: &str) -> Result<String, CliError> {
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]) } else { 0.5 };
    let (hx, hy) = (half(&grid.re), half(&grid.im));
    let (x0, x1) = (grid.re[0] - hx, grid.re[grid.re.len() - 1] + hx);
    let (y0, y1) = (grid.im[0] - hy, grid.im[grid.im.len() - 1] + hy);
    let m = grid.max_abs().max(1e-12);
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (520, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(48)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().x_desc("Re β").y_desc("Im β").draw().map_err(plot_err)?;
        let cells = grid.im.iter().enumerate().flat_map(|(i, &y)| {
            grid.re.iter().enumerate().map(move |(j, &x)| {
                Rectangle::new([(x - hx, y - hy), (x + hx, y + hy)], diverging(grid.values[i][j], m).filled())
            })
        });
        chart.draw_series(cells).map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(out)
}
