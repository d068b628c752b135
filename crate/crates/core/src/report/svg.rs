//! Line charts of interference curves as standalone SVG.
//!
//! Each task's slowdown curve is drawn against the baseline, and the area
//! between them is shaded by region: red ABOVE, yellow CROSSING, green BELOW.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{InterferenceCurve, RegionClass};
use crate::error::{Error, Result};
use crate::report::experiment::{CurveSet, WorkloadKey};

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];

pub fn region_color(region: RegionClass) -> &'static str {
    match region {
        RegionClass::Above => "#e41a1c",
        RegionClass::Crossing => "#ffd700",
        RegionClass::Below => "#4daf4a",
    }
}

pub struct ChartSeries<'a> {
    pub label: String,
    pub curve: &'a InterferenceCurve,
    /// Shade the gap to the baseline with this region's color.
    pub region: Option<RegionClass>,
    pub is_baseline: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    step * mag
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, thr: u32) -> f64 {
        let span = (self.x1 - self.x0).max(1.0);
        LEFT + (f64::from(thr) - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn points(&self, c: &InterferenceCurve) -> Vec<(f64, f64)> {
        c.points.iter().map(|p| (self.x(p.thr_pct), self.y(p.value))).collect()
    }
}

fn join_points(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders one chart. Fails when there is nothing to draw.
pub fn render(title: &str, y_label: &str, series: &[ChartSeries<'_>]) -> Result<String> {
    let all: Vec<_> = series.iter().flat_map(|s| &s.curve.points).collect();
    if all.is_empty() {
        return Err(Error::NothingToPlot(format!("`{title}` has no data points")));
    }
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.value), hi.max(p.value))
        });
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let step = nice_step(hi - lo);
    let scale = Scale {
        x0: f64::from(all.iter().map(|p| p.thr_pct).min().unwrap_or(0)),
        x1: f64::from(all.iter().map(|p| p.thr_pct).max().unwrap_or(100)),
        y0: (lo / step).floor() * step,
        y1: (hi / step).ceil() * step,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );

    // grid and axes
    let plot_bottom = HEIGHT - BOTTOM;
    let plot_right = WIDTH - RIGHT;
    let mut v = scale.y0;
    while v <= scale.y1 + step * 1e-6 {
        let y = scale.y(v);
        let _ = writeln!(
            s,
            r##"<line class="grid" x1="{LEFT}" y1="{y:.2}" x2="{plot_right}" y2="{y:.2}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            (v * 1e6).round() / 1e6
        );
        v += step;
    }
    let mut grid: Vec<u32> = all.iter().map(|p| p.thr_pct).collect();
    grid.sort_unstable();
    grid.dedup();
    for thr in grid {
        let x = scale.x(thr);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{thr}</text>"#,
            plot_bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        r##"<path class="axis" d="M{LEFT},{TOP} V{plot_bottom} H{plot_right}" fill="none" stroke="#000000"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">THR%</text>"#,
        (LEFT + plot_right) / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(20,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + plot_bottom) / 2.0,
        escape(y_label)
    );

    // region bands between each task curve and the baseline
    let baseline = series.iter().find(|c| c.is_baseline);
    if let Some(base) = baseline {
        for c in series.iter().filter(|c| !c.is_baseline) {
            let Some(region) = c.region else { continue };
            if c.curve.thr_grid() != base.curve.thr_grid() {
                return Err(Error::GridMismatch);
            }
            let mut pts = scale.points(c.curve);
            pts.extend(scale.points(base.curve).into_iter().rev());
            let _ = writeln!(
                s,
                r#"<polygon class="region region-{}" points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
                region.as_str().to_ascii_lowercase(),
                join_points(&pts),
                region_color(region)
            );
        }
    }

    // curves, baseline last so it stays on top
    let mut color = PALETTE.iter().cycle();
    let mut legend = Vec::new();
    for c in series.iter().filter(|c| !c.is_baseline).chain(baseline) {
        let (stroke, width, dash, class) = if c.is_baseline {
            ("#000000", 3.0, r#" stroke-dasharray="8 4""#, "baseline")
        } else {
            (*color.next().unwrap(), 2.0, "", "curve")
        };
        let pts = scale.points(c.curve);
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            join_points(&pts)
        );
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{stroke}"/>"#
            );
        }
        let label = match (c.is_baseline, c.region) {
            (true, _) => format!("{} (baseline)", c.label),
            (false, Some(r)) => format!("{} [{r}]", c.label),
            (false, None) => c.label.clone(),
        };
        legend.push((label, stroke, dash));
    }
    for (k, (label, stroke, dash)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let x = plot_right + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{stroke}" stroke-width="2"{dash}/>"#,
            x + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            x + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `slowdown_<interference>.svg` for every interference configuration,
/// plus `rf_<interference>.svg` where every curve has RF values.
pub fn write_charts(curves: &[CurveSet], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut interferences: Vec<WorkloadKey> = Vec::new();
    for c in curves {
        if !interferences.contains(&c.interference) {
            interferences.push(c.interference);
        }
    }
    if interferences.is_empty() {
        return Err(Error::NothingToPlot("no curves".into()));
    }
    let mut written = Vec::new();
    for interf in interferences {
        let group: Vec<&CurveSet> = curves.iter().filter(|c| c.interference == interf).collect();
        let slow: Vec<ChartSeries<'_>> = group
            .iter()
            .map(|c| ChartSeries {
                label: c.task.to_string(),
                curve: &c.slowdown,
                region: (!c.is_baseline).then_some(c.region),
                is_baseline: c.is_baseline,
            })
            .collect();
        let path = dir.join(format!("slowdown_{}.svg", interf.slug()));
        let svg = render(&format!("Slowdown under {interf} interference"), "slowdown", &slow)?;
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);

        let rf: Option<Vec<ChartSeries<'_>>> = group
            .iter()
            .map(|c| {
                c.rf.as_ref().map(|curve| ChartSeries {
                    label: c.task.to_string(),
                    curve,
                    region: None,
                    is_baseline: c.is_baseline,
                })
            })
            .collect();
        if let Some(rf) = rf {
            let path = dir.join(format!("rf_{}.svg", interf.slug()));
            let svg = render(&format!("RF under {interf} interference"), "RF", &rf)?;
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
