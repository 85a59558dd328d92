//! Self-contained SVG bar chart of WAPDI, worst first.

use std::fmt::Write;

use super::io::provenance_line;
use crate::pdi::MismatchReport;

const ROW: f64 = 18.0;
const LABEL_W: f64 = 170.0;
const PLOT_W: f64 = 480.0;
const VALUE_W: f64 = 90.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per row in report order (most negative WAPDI at the top).
/// Rows with undefined WAPDI are listed without a bar.
pub fn wapdi_svg(report: &MismatchReport, seed: u64) -> String {
    let values: Vec<f64> = report.rows.iter().filter_map(|r| r.summary.wapdi).collect();
    let lo = values.iter().copied().fold(0.0, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| LABEL_W + (v - lo) / span * PLOT_W;
    let width = LABEL_W + PLOT_W + VALUE_W;
    let height = TOP + ROW * report.rows.len() as f64 + 20.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, "<!-- {} -->", provenance_line(seed));
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{LABEL_W}" y="20" font-size="13">WAPDI by datapoint (closer to zero is better)</text>"#
    );
    let zero = x(0.0);
    for (i, row) in report.rows.iter().enumerate() {
        let y = TOP + ROW * i as f64;
        let mid = y + ROW * 0.7;
        let _ = writeln!(svg, r#"<text x="{}" y="{mid}" text-anchor="end">{}</text>"#, LABEL_W - 6.0, escape(&row.id));
        match row.summary.wapdi {
            Some(w) => {
                let (a, b) = if w < 0.0 { (x(w), zero) } else { (zero, x(w)) };
                let _ = writeln!(
                    svg,
                    r##"<rect x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#b2182b"/>"##,
                    y + 2.0,
                    (b - a).max(0.5),
                    ROW - 4.0
                );
                let _ = writeln!(svg, r#"<text x="{}" y="{mid}">{w:.4}</text>"#, LABEL_W + PLOT_W + 6.0);
            }
            None => {
                let _ = writeln!(svg, r#"<text x="{}" y="{mid}">n/a</text>"#, LABEL_W + PLOT_W + 6.0);
            }
        }
    }
    let bottom = TOP + ROW * report.rows.len() as f64;
    let _ = writeln!(svg, r#"<line x1="{zero:.2}" y1="{TOP}" x2="{zero:.2}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<text x="{zero:.2}" y="{}" text-anchor="middle">0</text>"#, bottom + 14.0);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdi::{rank_report, summarize, EstimatorConfig, LogLikMatrix};

    #[test]
    fn worst_row_comes_first_and_ids_are_escaped() {
        let rows = vec![vec![-1.0, -0.1, -3.0], vec![-1.0, -0.2, -1.0]];
        let m = LogLikMatrix::from_rows(vec!["same".into(), "a<b".into(), "far".into()], &rows).unwrap();
        let s = summarize(&m, &EstimatorConfig::default()).unwrap();
        let report = rank_report(&s, m.ids(), None).unwrap();
        let svg = wapdi_svg(&report, 11);
        assert!(svg.contains("seed=11"));
        assert!(svg.contains("a&lt;b"));
        let far = svg.find(">far<").unwrap();
        let same = svg.find(">same<").unwrap();
        assert!(far < same);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
