//! Self-contained static SVG plots: one polyline per learner, average loss
//! against a log-scaled time axis. No external renderer; output is
//! deterministic for a given report.

use crate::harness::AggregateReport;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders mean average-loss curves for a set of learners sharing one
/// checkpoint grid.
pub fn render_loss_plot(aggregates: &[AggregateReport], title: &str) -> String {
    let mut out = String::with_capacity(8192);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\">{}</text>\n",
        MARGIN_L,
        escape(title)
    ));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));
    let empty = aggregates
        .first()
        .map(|a| a.checkpoints.is_empty())
        .unwrap_or(true);
    if empty {
        out.push_str("</svg>\n");
        return out;
    }
    let checkpoints = &aggregates[0].checkpoints;
    let x_lo = (checkpoints[0] as f64).log2();
    let x_hi = (*checkpoints.last().expect("non-empty") as f64).log2();
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let x_of = |t: u64| MARGIN_L + ((t as f64).log2() - x_lo) / x_span * plot_w;
    let y_of = |loss: f64| MARGIN_T + (1.0 - loss.clamp(0.0, 1.0)) * plot_h;

    // Loss gridlines at fixed quarters.
    for i in 0..=4 {
        let loss = i as f64 * 0.25;
        let y = y_of(loss);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt(y),
            fmt(WIDTH - MARGIN_R),
            fmt(y)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(y + 4.0),
            fmt(loss)
        ));
    }
    // Time ticks at the checkpoints.
    for &t in checkpoints {
        let x = x_of(t);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
            fmt(x),
            fmt(HEIGHT - MARGIN_B),
            fmt(x),
            fmt(HEIGHT - MARGIN_B + 6.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t}</text>\n",
            fmt(x),
            fmt(HEIGHT - MARGIN_B + 22.0)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">T (log scale)</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 14.0)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\">\
         mean average loss</text>\n",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0)
    ));

    for (i, agg) in aggregates.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = agg
            .checkpoints
            .iter()
            .zip(&agg.mean_loss)
            .map(|(&t, &l)| format!("{},{}", fmt(x_of(t)), fmt(y_of(l))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt(MARGIN_L + 12.0),
            fmt(ly - 4.0),
            fmt(MARGIN_L + 40.0),
            fmt(ly - 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(MARGIN_L + 48.0),
            fmt(ly),
            escape(&agg.learner)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
