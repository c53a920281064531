//! Static SVG charts: grouped bars for predicted vs observed metrics and
//! scatter projections of failure scenarios.

use std::fmt::Write;

use depgrid_core::{BehaviorMode, Dimension, Metrics};

pub const GREEN: &str = "#2ca02c";
pub const BLUE: &str = "#1f77b4";
pub const PINK: &str = "#e377c2";

const PREDICTED_OPACITY: f64 = 0.4;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(width: u32, height: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Grouped bars, one group per metric, predicted (light) next to observed
/// (solid), on a 0–100 % axis.
pub fn comparison_chart(title: &str, predicted: &Metrics, observed: &Metrics) -> String {
    let (width, height) = (640u32, 400u32);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 60.0);
    let plot_w = width as f64 - left - right;
    let plot_h = height as f64 - top - bottom;
    let y_of = |pct: f64| top + plot_h * (1.0 - pct / 100.0);

    let mut s = header(width, height);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        width / 2,
        escape(title)
    );
    for tick in (0..=100).step_by(20) {
        let y = y_of(tick as f64);
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{tick}%</text>",
            left + plot_w,
            left - 6.0,
            y + 4.0
        );
    }
    let groups = [
        (
            "Dependability",
            GREEN,
            predicted.dependability,
            observed.dependability,
        ),
        (
            "Task undependability",
            BLUE,
            predicted.task_undependability,
            observed.task_undependability,
        ),
        (
            "Harmful undependability",
            PINK,
            predicted.harmful_undependability,
            observed.harmful_undependability,
        ),
    ];
    let group_w = plot_w / groups.len() as f64;
    let bar_w = group_w * 0.3;
    for (g, (label, color, pred, obs)) in groups.iter().enumerate() {
        let x0 = left + g as f64 * group_w + group_w * 0.2;
        for (k, (value, opacity, kind)) in [
            (*pred, PREDICTED_OPACITY, "predicted"),
            (*obs, 1.0, "observed"),
        ]
        .into_iter()
        .enumerate()
        {
            let pct = value * 100.0;
            let x = x0 + k as f64 * bar_w;
            let y = y_of(pct);
            let _ = writeln!(
                s,
                "<rect class=\"{kind}\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{:.1}\" \
                 fill=\"{color}\" fill-opacity=\"{opacity}\" stroke=\"{color}\"/>\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{pct:.2}</text>",
                top + plot_h - y,
                x + bar_w / 2.0,
                y - 3.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x0 + bar_w,
            top + plot_h + 18.0,
            escape(label)
        );
    }
    let ly = height as f64 - 16.0;
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"#888888\" fill-opacity=\"{PREDICTED_OPACITY}\"/>\
         <text x=\"{:.1}\" y=\"{ly:.1}\">predicted</text>\
         <rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"#888888\"/>\
         <text x=\"{:.1}\" y=\"{ly:.1}\">observed</text>",
        ly - 10.0,
        left + 16.0,
        left + 100.0,
        ly - 10.0,
        left + 116.0
    );
    s.push_str("</svg>\n");
    s
}

/// A failure scenario projected onto the plotted dimensions.
#[derive(Debug, Clone)]
pub struct FailurePoint {
    pub values: Vec<f64>,
    pub mode: BehaviorMode,
}

fn panel(
    s: &mut String,
    ox: f64,
    oy: f64,
    size: f64,
    dx: &Dimension,
    dy: &Dimension,
    pts: &[(f64, f64, BehaviorMode)],
) {
    let px = |v: f64| ox + (v - dx.min) / (dx.max - dx.min) * size;
    let py = |v: f64| oy + size - (v - dy.min) / (dy.max - dy.min) * size;
    let _ = writeln!(
        s,
        "<rect x=\"{ox:.1}\" y=\"{oy:.1}\" width=\"{size:.1}\" height=\"{size:.1}\" fill=\"none\" stroke=\"#444444\"/>"
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let vx = dx.min + f * (dx.max - dx.min);
        let vy = dy.min + f * (dy.max - dy.min);
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{vx}</text>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{vy}</text>",
            px(vx),
            oy + size + 14.0,
            ox - 4.0,
            py(vy) + 3.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
         <text transform=\"translate({:.1},{:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        ox + size / 2.0,
        oy + size + 32.0,
        escape(&dx.label()),
        ox - 34.0,
        oy + size / 2.0,
        escape(&dy.label())
    );
    for &(x, y, mode) in pts {
        let (color, class) = match mode {
            BehaviorMode::TaskFailure => (BLUE, "task"),
            _ => (PINK, "harmful"),
        };
        let _ = writeln!(
            s,
            "<circle class=\"{class}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"{color}\" fill-opacity=\"0.7\"/>",
            px(x),
            py(y)
        );
    }
}

/// Scatter of failure scenarios. Two dimensions give one panel; three give
/// the three pairwise projections side by side. Successes are not drawn.
pub fn failure_scatter(title: &str, dims: &[Dimension], points: &[FailurePoint]) -> String {
    let pairs: Vec<(usize, usize)> = match dims.len() {
        3 => vec![(0, 1), (0, 2), (1, 2)],
        _ => vec![(0, 1)],
    };
    let size = 300.0;
    let gap = 80.0;
    let width = (gap + pairs.len() as f64 * (size + gap)) as u32;
    let height = (size + 140.0) as u32;
    let mut s = header(width, height);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        width / 2,
        escape(title)
    );
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let pts: Vec<(f64, f64, BehaviorMode)> = points
            .iter()
            .filter(|p| p.mode != BehaviorMode::Success)
            .map(|p| (p.values[a], p.values[b], p.mode))
            .collect();
        panel(
            &mut s,
            gap + k as f64 * (size + gap),
            50.0,
            size,
            &dims[a],
            &dims[b],
            &pts,
        );
    }
    let ly = height as f64 - 20.0;
    let _ = writeln!(
        s,
        "<circle cx=\"{gap}\" cy=\"{:.1}\" r=\"4\" fill=\"{BLUE}\"/><text x=\"{:.1}\" y=\"{ly:.1}\">task failure</text>\
         <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{PINK}\"/><text x=\"{:.1}\" y=\"{ly:.1}\">harmful failure</text>",
        ly - 4.0,
        gap + 10.0,
        gap + 120.0,
        ly - 4.0,
        gap + 130.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parses(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).expect("valid XML")
    }

    #[test]
    fn comparison_chart_is_valid_xml() {
        let m = Metrics {
            dependability: 0.9,
            task_undependability: 0.04,
            harmful_undependability: 0.06,
        };
        let svg = comparison_chart("oc1 <pred> & obs", &m, &m);
        let doc = parses(&svg);
        let bars = doc
            .descendants()
            .filter(|n| n.has_tag_name("rect") && n.attribute("class").is_some())
            .count();
        assert_eq!(bars, 6);
        assert!(svg.contains(GREEN) && svg.contains(BLUE) && svg.contains(PINK));
    }

    #[test]
    fn scatter_omits_successes() {
        let dims = vec![
            Dimension::new("v", 0.0, 10.0).with_unit("in/s"),
            Dimension::new("y", 0.0, 50.0).with_unit("in"),
        ];
        let points = vec![
            FailurePoint {
                values: vec![0.5, 30.0],
                mode: BehaviorMode::TaskFailure,
            },
            FailurePoint {
                values: vec![5.0, 45.0],
                mode: BehaviorMode::HarmfulFailure,
            },
            FailurePoint {
                values: vec![5.0, 10.0],
                mode: BehaviorMode::Success,
            },
        ];
        let svg = failure_scatter("failures", &dims, &points);
        let doc = parses(&svg);
        assert_eq!(
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("task"))
                .count(),
            1
        );
        assert_eq!(
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("harmful"))
                .count(),
            1
        );
        assert!(svg.contains("v [in/s]") && svg.contains("y [in]"));
    }

    #[test]
    fn empty_scatter_is_valid() {
        let dims = vec![
            Dimension::new("v", 0.0, 10.0),
            Dimension::new("t", 0.0, 10.0),
            Dimension::new("y", 0.0, 50.0),
        ];
        let svg = failure_scatter("none", &dims, &[]);
        let doc = parses(&svg);
        assert_eq!(
            doc.descendants()
                .filter(|n| n.has_tag_name("circle"))
                .count(),
            2
        );
    }
}
