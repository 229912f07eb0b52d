//! Minimal, dependency-free SVG renderings of the headline charts.
//!
//! Every chart duplicates data that is also written as CSV; the SVG is a
//! quick visual check, not the artifact of record. Output is deterministic:
//! fixed canvas, fixed palette, coordinates rounded to 1/100 px.

use cces::network::{Dendrogram, Histogram};
use cces::propagation::ProfileEntry;

const W: f64 = 720.0;
const H: f64 = 420.0;
const ML: f64 = 64.0;
const MR: f64 = 24.0;
const MT: f64 = 44.0;
const MB: f64 = 56.0;

const AXIS: &str = "#555555";
const TEXT: &str = "#333333";
const BAR: &str = "#4878a8";
const ACCENT: &str = "#c44e52";
const MUTED: &str = "#999999";

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Affine map from data coordinates to the plot rectangle.
struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        // Degenerate ranges still need a finite scale.
        let (xmin, xmax) = pad_if_flat(xmin, xmax);
        let (ymin, ymax) = pad_if_flat(ymin, ymax);
        Frame {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn x(&self, v: f64) -> f64 {
        ML + (v - self.xmin) / (self.xmax - self.xmin) * (W - ML - MR)
    }

    fn y(&self, v: f64) -> f64 {
        H - MB - (v - self.ymin) / (self.ymax - self.ymin) * (H - MT - MB)
    }
}

fn pad_if_flat(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn open_svg(title: &str) -> String {
    let mut s = String::with_capacity(4096);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" fill=\"{TEXT}\">{}</text>\n",
        px(ML),
        escape(title)
    ));
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let x0 = px(ML);
    let x1 = px(W - MR);
    let y0 = px(H - MB);
    let y1 = px(MT);
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"{AXIS}\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"{AXIS}\"/>\n"
    ));
    for (v, anchor, x, y) in [
        (f.xmin, "start", ML, H - MB + 16.0),
        (f.xmax, "end", W - MR, H - MB + 16.0),
    ] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{TEXT}\" text-anchor=\"{anchor}\">{}</text>\n",
            px(x),
            px(y),
            trim_num(v)
        ));
    }
    for v in [f.ymin, f.ymax] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{TEXT}\" text-anchor=\"end\">{}</text>\n",
            px(ML - 6.0),
            px(f.y(v) + 4.0),
            trim_num(v)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{TEXT}\" text-anchor=\"middle\">{}</text>\n",
        px((ML + W - MR) / 2.0),
        px(H - 12.0),
        escape(xlabel)
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" fill=\"{TEXT}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        px((MT + H - MB) / 2.0),
        px((MT + H - MB) / 2.0),
        escape(ylabel)
    ));
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of a histogram.
pub fn histogram_svg(h: &Histogram, title: &str, xlabel: &str) -> String {
    let max_count = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let f = Frame::new(h.edges[0], h.edges[h.edges.len() - 1], 0.0, max_count);
    let mut s = open_svg(title);
    for (i, &count) in h.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let x = f.x(h.edges[i]);
        let w = (f.x(h.edges[i + 1]) - x - 1.0).max(0.5);
        let y = f.y(count as f64);
        let hgt = f.y(0.0) - y;
        s.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{BAR}\"/>\n",
            px(x),
            px(y),
            px(w),
            px(hgt)
        ));
    }
    let mx = f.x(h.mean);
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{ACCENT}\" stroke-dasharray=\"4 3\"/>\n",
        px(mx),
        px(f.y(0.0)),
        px(mx),
        px(MT)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{ACCENT}\">mean {}</text>\n",
        px(mx + 4.0),
        px(MT + 12.0),
        trim_num(h.mean)
    ));
    axes(&mut s, &f, xlabel, "count");
    s.push_str("</svg>\n");
    s
}

/// Polyline with one highlighted point (used for the linearity curve).
pub fn curve_svg(
    points: &[(f64, f64)],
    marker: (f64, f64),
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(xmin, xmax, ymin, ymax);
    let mut s = open_svg(title);
    let path: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{},{}", px(f.x(*x)), px(f.y(*y))))
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{BAR}\" stroke-width=\"1.5\"/>\n",
        path.join(" ")
    ));
    s.push_str(&format!(
        "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{ACCENT}\"/>\n",
        px(f.x(marker.0)),
        px(f.y(marker.1))
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{ACCENT}\">({}, {})</text>\n",
        px(f.x(marker.0) + 6.0),
        px(f.y(marker.1) - 6.0),
        trim_num(marker.0),
        trim_num(marker.1)
    ));
    axes(&mut s, &f, xlabel, ylabel);
    s.push_str("</svg>\n");
    s
}

/// Classic rectangular dendrogram; leaves laid out in `leaf_order`.
pub fn dendrogram_svg(dendro: &Dendrogram, ids: &[String], title: &str) -> String {
    let n = ids.len();
    let max_h = dendro
        .merges
        .iter()
        .map(|m| m.height)
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let f = Frame::new(-0.5, n as f64 - 0.5, 0.0, max_h);
    let mut s = open_svg(title);

    // Position of each cluster: leaves sit at their slot in the leaf order,
    // internal clusters at the midpoint of their children.
    let mut xs = vec![0.0_f64; n + dendro.merges.len()];
    let mut hs = vec![0.0_f64; n + dendro.merges.len()];
    for (slot, &leaf) in dendro.leaf_order.iter().enumerate() {
        xs[leaf] = slot as f64;
    }
    for (k, m) in dendro.merges.iter().enumerate() {
        let (xa, xb) = (xs[m.a], xs[m.b]);
        let (ha, hb) = (hs[m.a], hs[m.b]);
        for (x, h0) in [(xa, ha), (xb, hb)] {
            s.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{BAR}\"/>\n",
                px(f.x(x)),
                px(f.y(h0)),
                px(f.x(x)),
                px(f.y(m.height))
            ));
        }
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{BAR}\"/>\n",
            px(f.x(xa)),
            px(f.y(m.height)),
            px(f.x(xb)),
            px(f.y(m.height))
        ));
        xs[n + k] = (xa + xb) / 2.0;
        hs[n + k] = m.height;
    }

    // Leaf labels get unreadable past a few dozen sectors; fall back to ticks.
    if n <= 32 {
        for (slot, &leaf) in dendro.leaf_order.iter().enumerate() {
            let x = f.x(slot as f64);
            let y = H - MB + 10.0;
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"9\" fill=\"{TEXT}\" text-anchor=\"end\" \
                 transform=\"rotate(-60 {} {})\">{}</text>\n",
                px(x),
                px(y),
                px(x),
                px(y),
                escape(&ids[leaf])
            ));
        }
    } else {
        for slot in 0..n {
            let x = px(f.x(slot as f64));
            s.push_str(&format!(
                "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"{MUTED}\"/>\n",
                px(H - MB),
                px(H - MB + 4.0)
            ));
        }
    }
    axes(&mut s, &f, "sector (leaf order)", "merge height");
    s.push_str("</svg>\n");
    s
}

/// Scatter of `ln |delta v|` along the stream order, one series per
/// baseline. Gains and losses get different glyphs; exact zeros sit hollow
/// on the floor of the plot.
pub fn profile_svg(series: &[(&str, &[ProfileEntry])], title: &str) -> String {
    let finite: Vec<f64> = series
        .iter()
        .flat_map(|(_, entries)| entries.iter().filter_map(|e| e.ln_abs))
        .collect();
    let (ymin, ymax) = match (
        finite.iter().copied().fold(f64::INFINITY, f64::min),
        finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ) {
        (lo, hi) if lo.is_finite() && hi.is_finite() => (lo, hi),
        _ => (-1.0, 1.0),
    };
    let nmax = series.iter().map(|(_, e)| e.len()).max().unwrap_or(1);
    let f = Frame::new(0.0, (nmax.max(2) - 1) as f64, ymin, ymax);
    let palette = [BAR, "#6aa56a", "#8a6bb8"];
    let mut s = open_svg(title);
    for (si, (label, entries)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        for (rank, e) in entries.iter().enumerate() {
            let x = px(f.x(rank as f64));
            match e.ln_abs {
                Some(v) => {
                    let y = px(f.y(v));
                    if e.sign >= 0 {
                        s.push_str(&format!(
                            "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"{color}\"/>\n"
                        ));
                    } else {
                        s.push_str(&format!(
                            "<rect x=\"{}\" y=\"{}\" width=\"5\" height=\"5\" fill=\"{ACCENT}\" \
                             stroke=\"{color}\" stroke-width=\"0.8\"/>\n",
                            px(f.x(rank as f64) - 2.5),
                            px(f.y(v) - 2.5)
                        ));
                    }
                }
                None => {
                    s.push_str(&format!(
                        "<circle cx=\"{x}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"{MUTED}\"/>\n",
                        px(H - MB - 3.0)
                    ));
                }
            }
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            px(W - MR - 150.0),
            px(MT + 14.0 * (si as f64 + 1.0)),
            escape(label)
        ));
    }
    axes(
        &mut s,
        &f,
        "stream position (upstream to downstream)",
        "ln |delta v|",
    );
    s.push_str("</svg>\n");
    s
}
