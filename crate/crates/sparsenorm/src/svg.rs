//! Minimal hand-rolled SVG log-log plotting: enough for rate curves
//! (empirical points with an overlaid theoretical line), with no external
//! renderer. Output is a deterministic function of the input series.

/// One polyline on the plot. Points with nonpositive or nonfinite
/// coordinates are dropped (they have no log-log image).
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Dashed stroke, no markers — used for theoretical curves.
    pub dashed: bool,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 64.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders series on log₁₀/log₁₀ axes. Returns a complete standalone SVG
/// document as a string.
pub fn log_log_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let kept: Vec<(usize, Vec<(f64, f64)>)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .collect();
            (i, pts)
        })
        .collect();

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"26\" font-size=\"17\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));

    let all: Vec<(f64, f64)> = kept.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">no \
             positive data to plot</text>\n</svg>\n",
            WIDTH / 2.0,
            HEIGHT / 2.0
        ));
        return out;
    }

    let (mut lx0, mut lx1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
            (lo.min(x.log10()), hi.max(x.log10()))
        });
    let (mut ly0, mut ly1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| {
            (lo.min(y.log10()), hi.max(y.log10()))
        });
    if lx1 - lx0 < 1e-9 {
        lx0 -= 0.5;
        lx1 += 0.5;
    }
    if ly1 - ly0 < 1e-9 {
        ly0 -= 0.5;
        ly1 += 0.5;
    }
    // breathing room
    let (px, py) = ((lx1 - lx0) * 0.04, (ly1 - ly0) * 0.06);
    lx0 -= px;
    lx1 += px;
    ly0 -= py;
    ly1 += py;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64| MARGIN_LEFT + (x.log10() - lx0) / (lx1 - lx0) * plot_w;
    let to_py = |y: f64| MARGIN_TOP + plot_h - (y.log10() - ly0) / (ly1 - ly0) * plot_h;

    // frame
    out.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));

    // decade grid lines and tick labels
    let x_lo = lx0.ceil() as i64;
    let x_hi = lx1.floor() as i64;
    for k in x_lo..=x_hi {
        let x = to_px(10f64.powi(k as i32));
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
             stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            MARGIN_TOP + plot_h
        ));
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" \
             text-anchor=\"middle\">1e{k}</text>\n",
            MARGIN_TOP + plot_h + 18.0
        ));
    }
    let y_lo = ly0.ceil() as i64;
    let y_hi = ly1.floor() as i64;
    for k in y_lo..=y_hi {
        let y = to_py(10f64.powi(k as i32));
        out.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" \
             text-anchor=\"end\">1e{k}</text>\n",
            MARGIN_LEFT - 7.0,
            y + 4.0
        ));
    }

    // axis labels
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        esc(y_label)
    ));

    // series
    for (i, pts) in &kept {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let dash = if series[*i].dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(to_px(*x)), fmt(to_py(*y))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
             stroke-width=\"1.8\"{dash}/>\n",
            path.join(" ")
        ));
        if !series[*i].dashed {
            for (x, y) in pts {
                out.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                    fmt(to_px(*x)),
                    fmt(to_py(*y))
                ));
            }
        }
    }

    // legend, top-right inside the frame
    let legend_x = MARGIN_LEFT + plot_w - 250.0;
    let mut legend_y = MARGIN_TOP + 18.0;
    for (i, _) in &kept {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if series[*i].dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        out.push_str(&format!(
            "<line x1=\"{legend_x:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
             stroke=\"{color}\" stroke-width=\"1.8\"{dash}/>\n",
            legend_y - 4.0,
            legend_x + 26.0,
            legend_y - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{legend_y:.1}\" font-size=\"12\">{}</text>\n",
            legend_x + 32.0,
            esc(&series[*i].label)
        ));
        legend_y += 17.0;
    }

    out.push_str("</svg>\n");
    out
}
