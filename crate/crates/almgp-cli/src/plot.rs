//! RMSE-curve SVG, built by hand: a mean polyline per strategy on top of
//! a min–max band polygon. ALC is solid green, random acquisition dashed
//! red. The plot draws only numbers that already sit in the aggregate
//! rows, plus axis decoration.

use crate::aggregate::AggRow;
use almgp::active::Strategy;
use std::fmt::Write as _;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 58.0;

fn color(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Alc => "#2f9e44",
        Strategy::Random => "#e03131",
    }
}

fn dash(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Alc => "",
        Strategy::Random => " stroke-dasharray=\"8 5\"",
    }
}

/// Picks a round step so that roughly `want` ticks cover `span`.
fn tick_step(span: f64, want: usize) -> f64 {
    let raw = span / want as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let snapped = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    snapped * mag
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

pub fn render(rows: &[AggRow], title: &str) -> String {
    let mut strategies: Vec<Strategy> = Vec::new();
    for r in rows {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy);
        }
    }
    let max_iter = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let max_rmse = rows.iter().map(|r| r.max_rmse).fold(0.0, f64::max);
    let x_span = max_iter.max(1) as f64;
    let y_span = if max_rmse > 0.0 { max_rmse * 1.05 } else { 1.0 };

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |it: f64| MARGIN_LEFT + it / x_span * plot_w;
    let y = |v: f64| MARGIN_TOP + (1.0 - v / y_span) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"17\">{title}</text>",
        MARGIN_LEFT + plot_w / 2.0
    );

    // axes
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{:.2}\" y2=\"{y0}\" stroke=\"black\"/>",
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{MARGIN_TOP}\" stroke=\"black\"/>"
    );

    let xstep = tick_step(x_span, 8).max(1.0);
    let mut t = 0.0;
    while t <= x_span + 1e-9 {
        let px = x(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{y0}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            y0 + 20.0,
            fmt_tick(t)
        );
        t += xstep;
    }
    let ystep = tick_step(y_span, 6);
    let mut t = 0.0;
    while t <= y_span + 1e-9 {
        let py = y(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"13\">{}</text>",
            x0 - 9.0,
            py + 4.0,
            fmt_tick(t)
        );
        t += ystep;
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">iteration</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 20 {:.2})\">test RMSE</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for &s in &strategies {
        let series: Vec<&AggRow> = rows.iter().filter(|r| r.strategy == s).collect();
        if series.is_empty() {
            continue;
        }
        let mut band = String::new();
        for r in &series {
            let _ = write!(band, "{:.2},{:.2} ", x(r.iteration as f64), y(r.min_rmse));
        }
        for r in series.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", x(r.iteration as f64), y(r.max_rmse));
        }
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>",
            band.trim_end(),
            color(s)
        );
        let mut line = String::new();
        for r in &series {
            let _ = write!(line, "{:.2},{:.2} ", x(r.iteration as f64), y(r.mean_rmse));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{}/>",
            line.trim_end(),
            color(s),
            dash(s)
        );
    }

    // legend, top right
    let lx = MARGIN_LEFT + plot_w - 150.0;
    let mut ly = MARGIN_TOP + 14.0;
    for &s in &strategies {
        let _ = writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{:.2}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"{}/>",
            lx + 34.0,
            color(s),
            dash(s)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{}</text>",
            lx + 42.0,
            ly + 4.0,
            s
        );
        ly += 20.0;
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<AggRow> {
        let mut out = Vec::new();
        for s in [Strategy::Alc, Strategy::Random] {
            for it in 0..=5usize {
                let base = if s == Strategy::Alc { 0.5 } else { 0.8 };
                let v = base / (it + 1) as f64;
                out.push(AggRow {
                    strategy: s,
                    iteration: it,
                    mean_rmse: v,
                    min_rmse: v * 0.8,
                    max_rmse: v * 1.3,
                });
            }
        }
        out
    }

    #[test]
    fn contains_expected_structure() {
        let svg = render(&rows(), "trig1d");
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        // only the random curve and its legend sample are dashed
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains(">alc</text>"));
        assert!(svg.contains(">random</text>"));
        assert!(svg.contains("test RMSE"));
        assert!(svg.contains("iteration"));
    }

    #[test]
    fn render_is_deterministic() {
        assert_eq!(render(&rows(), "x"), render(&rows(), "x"));
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(tick_step(50.0, 8), 10.0);
        assert_eq!(tick_step(1.0, 6), 0.2);
        assert_eq!(tick_step(0.37, 6), 0.1);
    }

    #[test]
    fn handles_single_strategy_and_flat_zero() {
        let rows = vec![AggRow {
            strategy: Strategy::Alc,
            iteration: 0,
            mean_rmse: 0.0,
            min_rmse: 0.0,
            max_rmse: 0.0,
        }];
        let svg = render(&rows, "degenerate");
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
