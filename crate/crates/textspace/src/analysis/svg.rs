//! Self-contained SVG rendering of a labeled layout.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::projection::Layout;

const CANVAS: f64 = 1000.0;
const MARGIN: f64 = 0.05 * CANVAS;

/// A colorblind-reasonable categorical palette; classes beyond ten cycle.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the layout into a 1000x1000 SVG with a 5% margin, one circle per
/// document colored by class, a legend, and an optional caption. The
/// geometry is scaled uniformly so shapes keep their aspect ratio; a fully
/// degenerate layout collapses to the canvas center.
pub fn export_layout_svg(
    layout: &Layout,
    labels: &[String],
    caption: &str,
    path: &Path,
) -> Result<()> {
    let m = layout.n_points();
    if labels.len() != m {
        return Err(Error::dim(format!(
            "{m} points but {} labels",
            labels.len()
        )));
    }
    if m == 0 {
        return Err(Error::EmptyCorpus);
    }

    let pos = &layout.positions;
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        min_x = min_x.min(pos[[i, 0]]);
        max_x = max_x.max(pos[[i, 0]]);
        min_y = min_y.min(pos[[i, 1]]);
        max_y = max_y.max(pos[[i, 1]]);
    }
    let extent = (max_x - min_x).max(max_y - min_y);
    let scale = if extent < 1e-12 {
        0.0
    } else {
        (CANVAS - 2.0 * MARGIN) / extent
    };
    let center_x = (min_x + max_x) / 2.0;
    let center_y = (min_y + max_y) / 2.0;
    // y flips so larger layout y draws higher on the canvas
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            CANVAS / 2.0 + (x - center_x) * scale,
            CANVAS / 2.0 - (y - center_y) * scale,
        )
    };

    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        let next = classes.len();
        classes.entry(l.as_str()).or_insert(next);
    }

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CANVAS} {CANVAS}\">"
    )
    .unwrap();
    writeln!(
        out,
        "  <rect width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\"/>"
    )
    .unwrap();
    for i in 0..m {
        let (x, y) = to_px(pos[[i, 0]], pos[[i, 1]]);
        let color = PALETTE[classes[labels[i].as_str()] % PALETTE.len()];
        writeln!(
            out,
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{color}\" fill-opacity=\"0.75\"/>"
        )
        .unwrap();
    }
    for (label, &idx) in &classes {
        let y = 24.0 + 20.0 * idx as f64;
        let color = PALETTE[idx % PALETTE.len()];
        writeln!(
            out,
            "  <rect x=\"12\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
            y - 10.0
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"30\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            escape_xml(label)
        )
        .unwrap();
    }
    if !caption.is_empty() {
        writeln!(
            out,
            "  <text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            CANVAS / 2.0,
            CANVAS - 10.0,
            escape_xml(caption)
        )
        .unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
