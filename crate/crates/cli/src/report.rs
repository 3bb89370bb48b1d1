//! Text summary and SVG learning curve for a metrics log.

use std::fmt::Write as _;

use sola_core::sim::{MetricsLog, Summary};

/// Summary plus the curve sampled at every `step` intents.
pub fn text(log: &MetricsLog, window: usize, step: usize) -> String {
    let s = log.summary(window);
    let mut out = crate::summary_line(&s);
    out.push_str("\n\nintent  rolling first-try rate\n");
    let step = step.max(1);
    for (i, r) in s.curve.iter().enumerate() {
        if (i + 1) % step == 0 || i + 1 == s.curve.len() {
            let bar = "#".repeat((r * 40.0).round() as usize);
            let _ = writeln!(out, "{:>6}  {r:.3} {bar}", i + 1);
        }
    }
    out
}

/// The rolling first-try curve as a standalone SVG polyline.
pub fn svg(s: &Summary) -> String {
    let (w, h, pad) = (640.0, 320.0, 40.0);
    let n = s.curve.len().max(2) - 1;
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / n as f64;
    let y = |r: f64| h - pad - (h - 2.0 * pad) * r;
    let points: Vec<String> = s.curve.iter().enumerate().map(|(i, r)| format!("{:.1},{:.1}", x(i), y(*r))).collect();
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for tick in [0.0, 0.5, 1.0] {
        let yy = y(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{pad}" x2="{}" y1="{yy:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="4" y="{:.1}">{tick:.1}</text>"##,
            w - pad,
            yy + 4.0
        );
    }
    let _ = writeln!(out, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##, points.join(" "));
    let _ = writeln!(
        out,
        r#"<text x="{pad}" y="{}">first-try rate, window {}, {} intents</text>"#,
        h - 10.0,
        s.window,
        s.curve.len()
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use sola_core::sim::Summary;

    fn summary(curve: Vec<f64>) -> Summary {
        Summary {
            episodes: curve.len(),
            intents: curve.len(),
            first_try_rate: 0.5,
            window: 2,
            last_window_rate: 1.0,
            curve,
            mean_questions: 0.0,
            contamination_rate: 0.0,
        }
    }

    #[test]
    fn svg_has_one_point_per_intent() {
        let out = svg(&summary(vec![0.0, 0.5, 1.0]));
        assert!(out.starts_with("<svg"));
        let pts = out.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 3);
        assert!(pts.starts_with("40.0,280.0") && pts.ends_with("600.0,40.0"));
    }

    #[test]
    fn empty_log_reports_zero() {
        let t = text(&MetricsLog::default(), 50, 10);
        assert!(t.starts_with("episodes 0"));
    }
}
