//! Minimal SVG line chart: mean coverage over virtual time per variant,
//! with a translucent 95% confidence band.

use smoothfuzz_core::bench::CampaignReport;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

pub fn coverage_chart(report: &CampaignReport) -> String {
    let max_time = report
        .variants
        .iter()
        .flat_map(|v| v.series.iter().map(|p| p.time))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let max_cov = report
        .variants
        .iter()
        .flat_map(|v| v.series.iter().map(|p| p.ci_high))
        .fold(1.0f64, f64::max);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + t / max_time * plot_w;
    let y = |c: f64| MARGIN_TOP + (1.0 - c / max_cov) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-size=\"14\">{} — mean edge coverage over virtual time (95% CI)</text>\n",
        MARGIN_LEFT, report.target
    ));

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(MARGIN_LEFT),
        fmt(HEIGHT - MARGIN_BOTTOM)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(HEIGHT - MARGIN_BOTTOM),
        fmt(WIDTH - MARGIN_RIGHT),
        fmt(HEIGHT - MARGIN_BOTTOM)
    ));
    // Ticks.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let tx = MARGIN_LEFT + frac * plot_w;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(tx),
            fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            (frac * max_time) as u64
        ));
        let ty = MARGIN_TOP + (1.0 - frac) * plot_h;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(ty + 4.0),
            fmt(frac * max_cov)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">virtual time</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 8.0)
    ));

    for (i, v) in report.variants.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if v.series.is_empty() {
            continue;
        }
        // Confidence band: upper edge forward, lower edge backward.
        let mut band = String::from("<polygon points=\"");
        for p in &v.series {
            band.push_str(&format!("{},{} ", fmt(x(p.time as f64)), fmt(y(p.ci_high))));
        }
        for p in v.series.iter().rev() {
            band.push_str(&format!(
                "{},{} ",
                fmt(x(p.time as f64)),
                fmt(y(p.ci_low.max(0.0)))
            ));
        }
        band.push_str(&format!("\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n"));
        out.push_str(&band);

        let mut line = String::from("<polyline points=\"");
        for p in &v.series {
            line.push_str(&format!("{},{} ", fmt(x(p.time as f64)), fmt(y(p.mean))));
        }
        line.push_str(&format!(
            "\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
        out.push_str(&line);

        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            fmt(WIDTH - MARGIN_RIGHT - 150.0),
            fmt(MARGIN_TOP + 18.0 * i as f64)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(WIDTH - MARGIN_RIGHT - 132.0),
            fmt(MARGIN_TOP + 18.0 * i as f64 + 10.0),
            v.variant
        ));
    }
    out.push_str("</svg>\n");
    out
}
