//! Minimal SVG plotting: lines and scatters on linear or log10 axes.
//!
//! Output is deterministic (no timestamps, fixed formatting) and every
//! series element carries its data coordinates in `data-x`/`data-y`
//! attributes, so tests and tooling can diff plotted values structurally
//! instead of comparing pixels.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SeriesKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
struct Series {
    name: String,
    kind: SeriesKind,
    points: Vec<(f64, f64)>,
}

/// Builder for one SVG chart.
#[derive(Debug, Clone)]
pub struct SvgPlot {
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    log_y: bool,
    series: Vec<Series>,
}

impl SvgPlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn line(mut self, name: &str, points: &[(f64, f64)]) -> Self {
        self.series.push(Series {
            name: name.to_string(),
            kind: SeriesKind::Line,
            points: points.to_vec(),
        });
        self
    }

    pub fn scatter(mut self, name: &str, points: &[(f64, f64)]) -> Self {
        self.series.push(Series {
            name: name.to_string(),
            kind: SeriesKind::Scatter,
            points: points.to_vec(),
        });
        self
    }

    fn transform(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x {
            if p.0 <= 0.0 {
                return None;
            }
            p.0.log10()
        } else {
            p.0
        };
        let y = if self.log_y {
            if p.1 <= 0.0 {
                return None;
            }
            p.1.log10()
        } else {
            p.1
        };
        Some((x, y))
    }

    /// Render the complete SVG document.
    pub fn render(&self) -> String {
        let mut transformed: Vec<Vec<(f64, f64, f64, f64)>> = Vec::new();
        let mut bounds: Option<(f64, f64, f64, f64)> = None;
        for series in &self.series {
            let mut pts = Vec::with_capacity(series.points.len());
            for &p in &series.points {
                if let Some((tx, ty)) = self.transform(p) {
                    let (min_x, max_x, min_y, max_y) =
                        bounds.unwrap_or((tx, tx, ty, ty));
                    bounds = Some((min_x.min(tx), max_x.max(tx), min_y.min(ty), max_y.max(ty)));
                    pts.push((tx, ty, p.0, p.1));
                }
            }
            transformed.push(pts);
        }
        let (mut min_x, mut max_x, mut min_y, mut max_y) =
            bounds.unwrap_or((0.0, 1.0, 0.0, 1.0));
        if max_x == min_x {
            min_x -= 0.5;
            max_x += 0.5;
        }
        if max_y == min_y {
            min_y -= 0.5;
            max_y += 0.5;
        }
        let pad_y = 0.05 * (max_y - min_y);
        min_y -= pad_y;
        max_y += pad_y;

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |v: f64| MARGIN_LEFT + (v - min_x) / (max_x - min_x) * plot_w;
        let sy = |v: f64| MARGIN_TOP + (max_y - v) / (max_y - min_y) * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"16\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // axes
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT:.1}\" y=\"{MARGIN_TOP:.1}\" width=\"{plot_w:.1}\" \
             height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#333\"/>\n"
        ));
        for i in 0..=4 {
            let frac = i as f64 / 4.0;
            let vx = min_x + frac * (max_x - min_x);
            let vy = min_y + frac * (max_y - min_y);
            let label_x = if self.log_x { 10f64.powf(vx) } else { vx };
            let label_y = if self.log_y { 10f64.powf(vy) } else { vy };
            svg.push_str(&format!(
                "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"#ccc\"/>\n",
                sx(vx),
                MARGIN_TOP,
                MARGIN_TOP + plot_h
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
                 font-size=\"11\">{}</text>\n",
                sx(vx),
                MARGIN_TOP + plot_h + 16.0,
                short(label_x)
            ));
            svg.push_str(&format!(
                "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"#ccc\"/>\n",
                MARGIN_LEFT,
                sy(vy),
                MARGIN_LEFT + plot_w
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
                 font-size=\"11\">{}</text>\n",
                MARGIN_LEFT - 6.0,
                sy(vy) + 4.0,
                short(label_y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        ));

        for (index, (series, pts)) in self.series.iter().zip(&transformed).enumerate() {
            let color = PALETTE[index % PALETTE.len()];
            match series.kind {
                SeriesKind::Line => {
                    let coords: Vec<String> = pts
                        .iter()
                        .map(|&(tx, ty, _, _)| format!("{:.2},{:.2}", sx(tx), sy(ty)))
                        .collect();
                    svg.push_str(&format!(
                        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" \
                         data-series=\"{}\" points=\"{}\"/>\n",
                        color,
                        escape(&series.name),
                        coords.join(" ")
                    ));
                }
                SeriesKind::Scatter => {
                    svg.push_str(&format!("<g data-series=\"{}\">\n", escape(&series.name)));
                    for &(tx, ty, dx, dy) in pts {
                        svg.push_str(&format!(
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" \
                             data-x=\"{}\" data-y=\"{}\"/>\n",
                            sx(tx),
                            sy(ty),
                            color,
                            dx,
                            dy
                        ));
                    }
                    svg.push_str("</g>\n");
                }
            }
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
                 fill=\"{}\">{}</text>\n",
                MARGIN_LEFT + 8.0,
                MARGIN_TOP + 16.0 + index as f64 * 15.0,
                color,
                escape(&series.name)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Compact axis-label formatting.
fn short(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic_and_structured() {
        let plot = SvgPlot::new("Boundary", "t_p (s)", "rho (W/mm)")
            .line("fit", &[(0.001, 1.0), (0.01, 0.5), (0.1, 0.25)])
            .scatter("failures", &[(0.002, 0.9), (0.05, 0.3)]);
        let a = plot.render();
        let b = plot.render();
        assert_eq!(a, b);
        assert!(a.contains("<polyline"));
        assert!(a.contains("data-series=\"failures\""));
        assert!(a.contains("data-x=\"0.002\""));
        assert!(a.contains("data-y=\"0.9\""));
    }

    #[test]
    fn log_axes_skip_non_positive_points() {
        let plot = SvgPlot::new("F_pp", "f (Hz)", "F_pp (N)")
            .log_log()
            .scatter("sweep", &[(10.0, 0.3), (0.0, 0.1), (100.0, 0.03)]);
        let svg = plot.render();
        assert!(svg.contains("data-x=\"10\""));
        assert!(!svg.contains("data-x=\"0\""));
    }

    #[test]
    fn single_point_does_not_collapse_the_axes() {
        let svg = SvgPlot::new("one", "x", "y").scatter("p", &[(1.0, 2.0)]).render();
        assert!(svg.contains("<circle"));
    }
}
