//! SVG box plots of per-sample MPE, histograms of blocked-feature counts and
//! plain-text tables.
//!
//! Plots carry their axis transform as `data-*` attributes on the `axis`
//! group so values can be recovered from pixel coordinates:
//! `value = v0 + (px - p0) * (v1 - v0) / (p1 - p0)`.

use std::fmt::Write as _;

use crate::metrics::BoxStats;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Linear map from data values to SVG y coordinates (larger values higher).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub v0: f64,
    pub v1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Axis {
    fn fit(lo: f64, hi: f64) -> Self {
        let (mut lo, mut hi) = (lo.min(0.0), hi.max(0.0));
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            v0: lo - pad,
            v1: hi + pad,
            p0: HEIGHT - BOTTOM,
            p1: TOP,
        }
    }

    pub fn px(&self, v: f64) -> f64 {
        self.p0 + (v - self.v0) * (self.p1 - self.p0) / (self.v1 - self.v0)
    }

    pub fn value(&self, px: f64) -> f64 {
        self.v0 + (px - self.p0) * (self.v1 - self.v0) / (self.p1 - self.p0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, axis: &Axis, y_label: &str, x_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<g class="axis" data-v0="{}" data-v1="{}" data-p0="{}" data-p1="{}">"#,
        axis.v0, axis.v1, axis.p0, axis.p1
    );
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        axis.p0, axis.p1
    );
    for k in 0..=5 {
        let v = axis.v0 + (axis.v1 - axis.v0) * k as f64 / 5.0;
        let y = axis.px(v);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    if axis.v0 < 0.0 && axis.v1 > 0.0 {
        let y = axis.px(0.0);
        let _ = writeln!(
            out,
            r##"<line class="zero" x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#999" stroke-dasharray="4 3"/>"##,
            WIDTH - RIGHT
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        (axis.p0 + axis.p1) / 2.0,
        (axis.p0 + axis.p1) / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    out.push_str("</g>\n");
}

/// Box plot with IQR boxes, median lines and whiskers spanning min to max.
pub fn box_plot_svg(title: &str, x_label: &str, y_label: &str, groups: &[(String, BoxStats)]) -> String {
    let lo = groups.iter().map(|(_, s)| s.min).fold(f64::INFINITY, f64::min);
    let hi = groups.iter().map(|(_, s)| s.max).fold(f64::NEG_INFINITY, f64::max);
    let axis = if groups.is_empty() {
        Axis::fit(0.0, 1.0)
    } else {
        Axis::fit(lo, hi)
    };
    let mut out = String::new();
    header(&mut out, title, &axis, y_label, x_label);
    let slot = (WIDTH - LEFT - RIGHT) / groups.len().max(1) as f64;
    let half = (slot * 0.3).min(30.0);
    for (i, (label, s)) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let (x0, x1) = (cx - half, cx + half);
        let label = escape(label);
        let _ = writeln!(out, r#"<g class="group" data-label="{label}" data-n="{}">"#, s.n);
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            axis.px(s.max),
            axis.px(s.q3)
        );
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            axis.px(s.q1),
            axis.px(s.min)
        );
        for (class, v) in [("max", s.max), ("min", s.min)] {
            let y = axis.px(v);
            let _ = writeln!(
                out,
                r#"<line class="{class}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        let top = axis.px(s.q3);
        let bottom = axis.px(s.q1);
        let _ = writeln!(
            out,
            r##"<rect class="box" x="{x0}" y="{top}" width="{}" height="{}" fill="#9ecae1" stroke="black"/>"##,
            x1 - x0,
            bottom - top
        );
        let y = axis.px(s.median);
        let _ = writeln!(
            out,
            r##"<line class="median" x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#d62728" stroke-width="2"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text class="label" x="{cx}" y="{}" text-anchor="middle">{label}</text>"#,
            axis.p0 + 18.0
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: for each group, how many samples had each count of
/// blocked features (index = count).
pub fn histogram_svg(title: &str, x_label: &str, groups: &[(String, Vec<usize>)]) -> String {
    let peak = groups.iter().flat_map(|(_, c)| c.iter().copied()).max().unwrap_or(0);
    let mut axis = Axis::fit(0.0, peak.max(1) as f64);
    axis.v0 = 0.0;
    let mut out = String::new();
    header(&mut out, title, &axis, "samples", x_label);
    let slot = (WIDTH - LEFT - RIGHT) / groups.len().max(1) as f64;
    const COLORS: [&str; 7] = [
        "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#3182bd", "#08519c",
    ];
    for (i, (label, counts)) in groups.iter().enumerate() {
        let x_start = LEFT + slot * i as f64 + slot * 0.1;
        let bar = slot * 0.8 / counts.len().max(1) as f64;
        let label = escape(label);
        let _ = writeln!(out, r#"<g class="group" data-label="{label}">"#);
        for (k, &n) in counts.iter().enumerate() {
            let top = axis.px(n as f64);
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-missing="{k}" data-count="{n}" x="{}" y="{top}" width="{bar}" height="{}" fill="{}" stroke="black"/>"#,
                x_start + bar * k as f64,
                axis.p0 - top,
                COLORS[k.min(COLORS.len() - 1)]
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="label" x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            LEFT + slot * (i as f64 + 0.5),
            axis.p0 + 18.0
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Fixed-width text table; the first row is the header.
pub fn text_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..cols)
            .map(|c| format!("{:<w$}", row.get(c).map(String::as_str).unwrap_or(""), w = widths[c]))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::box_stats;

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!(" {name}=\"");
        let start = tag.find(&key).unwrap() + key.len();
        let end = start + tag[start..].find('"').unwrap();
        tag[start..end].parse().unwrap()
    }

    fn tags<'a>(svg: &'a str, class: &str) -> Vec<&'a str> {
        let key = format!("class=\"{class}\"");
        svg.lines().filter(|l| l.contains(&key)).collect()
    }

    #[test]
    fn box_geometry_inverts_to_stats() {
        let groups: Vec<(String, BoxStats)> = (1..=6)
            .map(|b| {
                let vals: Vec<f64> = (0..50)
                    .map(|i| ((i * 37 + b * 11) % 50) as f64 * 0.1 * b as f64 - 1.0)
                    .collect();
                (format!("β={b}"), box_stats(&vals).unwrap())
            })
            .collect();
        let svg = box_plot_svg("t", "budget", "MPE (%)", &groups);
        let ax = tags(&svg, "axis")[0];
        let axis = Axis {
            v0: attr(ax, "data-v0"),
            v1: attr(ax, "data-v1"),
            p0: attr(ax, "data-p0"),
            p1: attr(ax, "data-p1"),
        };
        let boxes = tags(&svg, "box");
        let medians = tags(&svg, "median");
        assert_eq!(boxes.len(), 6);
        for ((b, m), (_, s)) in boxes.iter().zip(&medians).zip(&groups) {
            let y = attr(b, "y");
            let h = attr(b, "height");
            assert!((axis.value(y) - s.q3).abs() < 1e-9);
            assert!((axis.value(y + h) - s.q1).abs() < 1e-9);
            assert!((axis.value(attr(m, "y1")) - s.median).abs() < 1e-9);
        }
        let maxes = tags(&svg, "max");
        assert!((axis.value(attr(maxes[2], "y1")) - groups[2].1.max).abs() < 1e-9);
    }

    #[test]
    fn histogram_bars_carry_counts() {
        let svg = histogram_svg("h", "budget", &[("1".into(), vec![3, 7]), ("2".into(), vec![1, 4, 5])]);
        let bars = tags(&svg, "bar");
        assert_eq!(bars.len(), 5);
        assert_eq!(attr(bars[1], "data-count"), 7.0);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = box_plot_svg("a<b & c", "x", "y", &[]);
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn table_layout() {
        let t = text_table(&[
            vec!["model".into(), "test MAPE".into()],
            vec!["clean".into(), "1.20".into()],
        ]);
        assert_eq!(t, "model  test MAPE\n-----  ---------\nclean  1.20\n");
    }
}
