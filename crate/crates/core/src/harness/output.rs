//! Curve CSV and a plain SVG line chart rendered from it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::fig1::CurvePoint;
use crate::harness::persist::fmt_real;

pub const CURVE_HEADER: &str = "delta,epsilon,mean_accuracy,standard_error,critical_epsilon";

fn sorted(points: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut points = points.to_vec();
    points.sort_by(|a, b| {
        a.delta_target
            .total_cmp(&b.delta_target)
            .then(a.epsilon.total_cmp(&b.epsilon))
    });
    points
}

/// Rows sorted by `(delta, epsilon)`, reals at 17 significant digits.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in sorted(points) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(p.delta_target),
            fmt_real(p.epsilon),
            fmt_real(p.mean_accuracy),
            fmt_real(p.standard_error),
            fmt_real(p.critical_epsilon)
        );
    }
    out
}

pub fn emit_csv(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_csv(points)).map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Accuracy against log-scaled epsilon, one polyline per gap target, with a
/// dashed vertical line at each target's critical epsilon.
pub fn curve_svg(points: &[CurvePoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;

    let points = sorted(points);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let logs: Vec<f64> = points
        .iter()
        .flat_map(|p| [p.epsilon, p.critical_epsilon])
        .filter(|e| *e > 0.0)
        .map(f64::log10)
        .collect();
    if logs.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let mut hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let x = |eps: f64| LEFT + (eps.log10() - lo) / (hi - lo) * (W - LEFT - RIGHT);
    let y = |acc: f64| TOP + (1.0 - acc) * (H - TOP - BOTTOM);

    let _ = writeln!(
        svg,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for decade in (lo as i32)..=(hi as i32) {
        let px = x(10f64.powi(decade));
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">1e{decade}</text>",
            H - BOTTOM + 16.0
        );
    }
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{tick:.2}</text>",
            LEFT - 6.0,
            y(tick) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">epsilon</text>",
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">accuracy</text>",
        H / 2.0,
        H / 2.0
    );

    let mut deltas: Vec<f64> = points.iter().map(|p| p.delta_target).collect();
    deltas.dedup();
    for (k, delta) in deltas.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let curve: Vec<&CurvePoint> = points.iter().filter(|p| p.delta_target == *delta).collect();
        let path: Vec<String> = curve
            .iter()
            .filter(|p| p.epsilon > 0.0)
            .map(|p| format!("{:.2},{:.2}", x(p.epsilon), y(p.mean_accuracy)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        for p in curve.iter().filter(|p| p.epsilon > 0.0 && p.standard_error > 0.0) {
            let _ = writeln!(
                svg,
                "<line x1=\"{0:.2}\" x2=\"{0:.2}\" y1=\"{1:.2}\" y2=\"{2:.2}\" stroke=\"{color}\"/>",
                x(p.epsilon),
                y((p.mean_accuracy - p.standard_error).max(0.0)),
                y((p.mean_accuracy + p.standard_error).min(1.0))
            );
        }
        if let Some(p) = curve.first() {
            let cx = x(p.critical_epsilon);
            let _ = writeln!(
                svg,
                "<line x1=\"{cx:.2}\" x2=\"{cx:.2}\" y1=\"{TOP}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"5,4\"/>",
                H - BOTTOM
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">delta = {delta}</text>",
            LEFT + 10.0,
            TOP + 16.0 + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_svg(points)).map_err(|e| Error::io(path, e))
}
