//! Minimal SVG line chart of mean Bures distance against M.

use crate::sweep::SweepResult;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

pub fn sweep_chart(results: &[SweepResult], title: &str) -> String {
    let points = results.iter().flat_map(|r| r.rows.iter());
    let (mut x_max, mut y_max) = (1.0f64, 0.0f64);
    for p in points {
        x_max = x_max.max(p.m as f64);
        if p.mean_bures.is_finite() {
            y_max = y_max.max(p.mean_bures);
        }
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    let sx = |m: f64| PAD + m / x_max * (W - 2.0 * PAD);
    let sy = |b: f64| H - PAD - b / y_max * (H - 2.0 * PAD);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));
    out.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">M</text>\n<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">mean Bures</text>\n",
        W / 2.0,
        H - 10.0,
        H / 2.0,
        H / 2.0
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y_max:.3}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_max}</text>\n",
        PAD - 4.0,
        PAD + 4.0,
        W - PAD,
        H - PAD + 16.0
    ));
    for (k, r) in results.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = r
            .rows
            .iter()
            .filter(|p| p.mean_bures.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.m as f64), sy(p.mean_bures)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            W - PAD - 120.0,
            PAD + 16.0 * k as f64,
            escape(&r.method)
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
