use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::report::metrics::{write_metrics, MetricsLine};
use crate::transceiver::ConfusionMatrix;

pub const BER_SVG: &str = "ber_vs_iteration.svg";
pub const CONFUSION_K0_SVG: &str = "confusion_k0.svg";
pub const CONFUSION_FINAL_SVG: &str = "confusion_final.svg";
pub const CONSTELLATION_SVG: &str = "constellation.svg";

/// Cells with a probability above this get the `above` class.
pub const DISPLAY_THRESHOLD: f64 = 0.01;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const STYLE: &str = "<style>text{font-family:sans-serif;font-size:12px}.axis{stroke:#333;fill:none}\
.curve{stroke:#1f5fa8;fill:none;stroke-width:1.5}.marker{fill:#1f5fa8}.grid{stroke:#ddd}\
.cell.above{stroke:#c00;stroke-width:1.5}.point{fill:#1f5fa8}</style>";

fn open_svg(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n{STYLE}\n<title>{title}</title>\n"
    );
}

/// BER against iteration on a logarithmic axis, one marker per line.
pub fn ber_curve_svg(lines: &[MetricsLine]) -> String {
    let mut out = String::new();
    open_svg(&mut out, "BER versus optimization iteration");
    let positive: Vec<f64> = lines.iter().map(|l| l.ber).filter(|&b| b > 0.0).collect();
    let floor = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let ceil = positive.iter().copied().fold(0.0f64, f64::max);
    let (lo, hi) = if positive.is_empty() {
        (-6.0, 0.0)
    } else {
        (
            floor.log10().floor().min(-1.0),
            ceil.log10().ceil().max(floor.log10().floor() + 1.0),
        )
    };
    let k_max = lines.iter().map(|l| l.k).max().unwrap_or(0).max(1) as f64;
    let x = |k: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * k as f64 / k_max;
    // Zero BER is drawn on the bottom edge.
    let y = |ber: f64| {
        let v = if ber > 0.0 { ber.log10().clamp(lo, hi) } else { lo };
        HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo)
    };
    for decade in lo as i32..=hi as i32 {
        let yy = y(10f64.powi(decade));
        let _ = writeln!(
            out,
            "<line class=\"grid\" x1=\"{MARGIN}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{decade}</text>",
            WIDTH - MARGIN,
            MARGIN - 6.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<path class=\"axis\" d=\"M{MARGIN} {MARGIN} V{:.2} H{:.2}\"/>",
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    for l in lines {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            x(l.k),
            HEIGHT - MARGIN + 16.0,
            l.k
        );
    }
    let path: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}{:.2} {:.2}", if i == 0 { 'M' } else { 'L' }, x(l.k), y(l.ber)))
        .collect();
    if !path.is_empty() {
        let _ = writeln!(out, "<path class=\"curve\" d=\"{}\"/>", path.join(" "));
    }
    for l in lines {
        let _ = writeln!(
            out,
            "<circle class=\"marker\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\"><title>k={} BER={:e}</title></circle>",
            x(l.k),
            y(l.ber),
            l.k,
            l.ber
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">iteration k</text><text x=\"14\" y=\"{:.2}\" transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">BER</text>",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Heat map of P(decision | sent).
pub fn confusion_svg(confusion: &ConfusionMatrix, title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, title);
    let order = confusion.order();
    let probs = confusion.probabilities();
    let side = (HEIGHT - 2.0 * MARGIN) / order.max(1) as f64;
    for (t, row) in probs.iter().enumerate() {
        for (d, &p) in row.iter().enumerate() {
            let class = if p > DISPLAY_THRESHOLD { "cell above" } else { "cell" };
            let shade = 255.0 - 255.0 * p.clamp(0.0, 1.0).sqrt();
            let _ = writeln!(
                out,
                "<rect class=\"{class}\" data-sent=\"{}\" data-decided=\"{}\" x=\"{:.2}\" y=\"{:.2}\" width=\"{side:.2}\" height=\"{side:.2}\" fill=\"rgb({s},{s},255)\"><title>P({}|{})={p:.4}</title></rect>",
                t + 1,
                d + 1,
                MARGIN + d as f64 * side,
                MARGIN + t as f64 * side,
                d + 1,
                t + 1,
                s = shade.round() as u8
            );
        }
    }
    for i in 0..order {
        let c = MARGIN + (i as f64 + 0.5) * side;
        let _ = writeln!(
            out,
            "<text x=\"{c:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            MARGIN - 6.0,
            i + 1,
            MARGIN - 6.0,
            c + 4.0,
            i + 1
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\">{title}</text><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">decided (columns) / sent (rows)</text>",
        WIDTH / 2.0,
        MARGIN + order as f64 * side / 2.0,
        HEIGHT - 20.0
    );
    out.push_str("</svg>\n");
    out
}

/// Scatter of 2-D points labelled 1, 2, ... in row order.
pub fn constellation_svg(points: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    open_svg(&mut out, "Transmitted waveforms, principal-component projection");
    let span = points.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let cx = WIDTH / 2.0;
    let cy = HEIGHT / 2.0;
    let r = (HEIGHT - 2.0 * MARGIN) / 2.0;
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{:.2}\" y1=\"{cy}\" x2=\"{:.2}\" y2=\"{cy}\"/><line class=\"axis\" x1=\"{cx}\" y1=\"{MARGIN}\" x2=\"{cx}\" y2=\"{:.2}\"/>",
        cx - r,
        cx + r,
        HEIGHT - MARGIN
    );
    for (i, p) in points.rows().into_iter().enumerate() {
        let px = cx + r * p[0] / span;
        let py = cy - r * p[1] / span;
        let _ = writeln!(
            out,
            "<circle class=\"point\" cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"5\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            px + 7.0,
            py - 7.0,
            i + 1
        );
    }
    out.push_str("</svg>\n");
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// The four figures of a run.
pub fn render_figures(
    lines: &[MetricsLine],
    confusion_k0: &ConfusionMatrix,
    confusion_final: &ConfusionMatrix,
    constellation: ArrayView2<'_, f64>,
    out_dir: &Path,
) -> Result<()> {
    if lines.is_empty() {
        return Err(Error::Usage("cannot render an empty history".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let last_k = lines.last().map(|l| l.k).unwrap_or(0);
    write_file(out_dir, BER_SVG, &ber_curve_svg(lines))?;
    write_file(
        out_dir,
        CONFUSION_K0_SVG,
        &confusion_svg(confusion_k0, "Error probabilities, k = 0"),
    )?;
    write_file(
        out_dir,
        CONFUSION_FINAL_SVG,
        &confusion_svg(confusion_final, &format!("Error probabilities, k = {last_k}")),
    )?;
    write_file(out_dir, CONSTELLATION_SVG, &constellation_svg(constellation))
}

/// Metrics files plus figures.
pub fn render_report(
    lines: &[MetricsLine],
    confusion_k0: &ConfusionMatrix,
    confusion_final: &ConfusionMatrix,
    constellation: ArrayView2<'_, f64>,
    out_dir: &Path,
) -> Result<()> {
    if lines.is_empty() {
        return Err(Error::Usage("cannot render an empty history".into()));
    }
    write_metrics(out_dir, lines)?;
    render_figures(lines, confusion_k0, confusion_final, constellation, out_dir)
}
