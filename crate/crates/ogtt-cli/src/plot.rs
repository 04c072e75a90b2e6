//! Minimal static SVG rendering of the three figure families: fit curves,
//! the classification scatter with its separating line, and marginal
//! densities. Data-first CSV exports stay authoritative; these figures are a
//! convenience layer with no external dependencies.

use std::fmt::Write as _;

use ogtt_core::analysis::MarginalDensity;
use ogtt_core::cohort::{DiagnosticClass, OBSERVATION_MINUTES};
use ogtt_core::oscillator::OscillatorParams;
use ogtt_core::PARAM_NAMES;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 52.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), left: f64, top: f64, width: f64, height: f64) -> Self {
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).abs().max(1e-12);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x_min, x_max) = pad(x.0, x.1);
        let (y_min, y_max) = pad(y.0, y.1);
        Self { x_min, x_max, y_min, y_max, left, top, width, height }
    }

    fn sx(&self, x: f64) -> f64 {
        self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width
    }

    fn sy(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y_min) / (self.y_max - self.y_min) * self.height
    }
}

fn open_svg(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn axes(svg: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let x0 = f.left;
    let y0 = f.top + f.height;
    let x1 = f.left + f.width;
    let y1 = f.top;
    let _ = writeln!(
        svg,
        "<path d=\"M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}\" fill=\"none\" stroke=\"#333\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        f.left + f.width / 2.0,
        y0 + 32.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">{y_label}</text>",
        x0 - 38.0,
        f.top + f.height / 2.0,
        x0 - 38.0,
        f.top + f.height / 2.0
    );
    for (value, place) in [(f.x_min, x0), (f.x_max, x1)] {
        let _ = writeln!(
            svg,
            "<text x=\"{place:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#555\">{value:.3}</text>",
            y0 + 16.0
        );
    }
    for (value, place) in [(f.y_min, y0), (f.y_max, y1)] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{place:.1}\" text-anchor=\"end\" fill=\"#555\">{value:.3}</text>",
            x0 - 6.0
        );
    }
}

fn polyline(svg: &mut String, f: &Frame, points: impl Iterator<Item = (f64, f64)>, stroke: &str) {
    let path: String = points
        .map(|(x, y)| format!("{:.2},{:.2}", f.sx(x), f.sy(y)))
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(
        svg,
        "<polyline points=\"{path}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>"
    );
}

fn class_color(class: DiagnosticClass) -> &'static str {
    match class {
        DiagnosticClass::Healthy => "#1b7837",
        DiagnosticClass::ImpairedFasting => "#f6a800",
        DiagnosticClass::ImpairedTolerance => "#e66101",
        DiagnosticClass::BothImpairments => "#b2182b",
        DiagnosticClass::Diabetes => "#542788",
    }
}

/// Fit figure: MAP deviation curve with the observed shifted samples.
pub fn fit_figure(patient_id: &str, map: &OscillatorParams, observed: &[f64; 4]) -> String {
    let mut y_lo = 0.0_f64;
    let mut y_hi = 0.0_f64;
    let curve: Vec<(f64, f64)> = (0..=120)
        .map(|m| (f64::from(m), map.evaluate(f64::from(m))))
        .collect();
    for &(_, g) in &curve {
        y_lo = y_lo.min(g);
        y_hi = y_hi.max(g);
    }
    for &g in observed {
        y_lo = y_lo.min(g);
        y_hi = y_hi.max(g);
    }
    let f = Frame::new((0.0, 120.0), (y_lo, y_hi), MARGIN, MARGIN / 2.0, WIDTH - 1.5 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let mut svg = open_svg(WIDTH, HEIGHT);
    axes(&mut svg, &f, "t (min)", "glucose deviation (mg/dl)");
    polyline(&mut svg, &f, curve.into_iter(), "#2166ac");
    for (i, &t) in OBSERVATION_MINUTES.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#b2182b\"/>",
            f.sx(t),
            f.sy(observed[i])
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\">{patient_id}: MAP fit</text>",
        MARGIN,
        MARGIN / 2.0 - 8.0
    );
    svg + "</svg>\n"
}

/// Scatter of `(A, alpha)` estimates per class with the separating segment.
pub fn scatter_figure(
    points: &[(f64, f64, DiagnosticClass)],
    segment: Option<[(f64, f64); 2]>,
    accuracy: f64,
) -> String {
    let (mut a_lo, mut a_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut d_lo, mut d_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(a, d, _) in points {
        a_lo = a_lo.min(a);
        a_hi = a_hi.max(a);
        d_lo = d_lo.min(d);
        d_hi = d_hi.max(d);
    }
    let f = Frame::new((a_lo, a_hi), (d_lo, d_hi), MARGIN, MARGIN / 2.0, WIDTH - 1.5 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let mut svg = open_svg(WIDTH, HEIGHT);
    axes(&mut svg, &f, "A (mg/dl)", "alpha (1/min)");
    if let Some([p, q]) = segment {
        polyline(&mut svg, &f, [p, q].into_iter(), "#333");
    }
    for &(a, d, class) in points {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            f.sx(a),
            f.sy(d),
            class_color(class)
        );
    }
    let mut legend_y = MARGIN / 2.0 + 12.0;
    for class in DiagnosticClass::ALL {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{legend_y:.1}\" r=\"4\" fill=\"{}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            WIDTH - 110.0,
            class_color(class),
            WIDTH - 100.0,
            legend_y + 4.0,
            class.label()
        );
        legend_y += 16.0;
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\">training accuracy {accuracy:.3}</text>",
        MARGIN,
        MARGIN / 2.0 - 8.0
    );
    svg + "</svg>\n"
}

/// Four-panel marginal density figure with MAP and CM markers.
pub fn marginals_figure(
    patient_id: &str,
    densities: &[MarginalDensity; 4],
    map: &OscillatorParams,
    cm: &OscillatorParams,
) -> String {
    let map_values = map.as_vector();
    let cm_values = cm.as_vector();
    let panel_w = (WIDTH - 3.0 * MARGIN) / 2.0;
    let panel_h = (HEIGHT - 3.0 * MARGIN) / 2.0;
    let mut svg = open_svg(WIDTH, HEIGHT);
    for (i, density) in densities.iter().enumerate() {
        let col = (i % 2) as f64;
        let row = (i / 2) as f64;
        let left = MARGIN + col * (panel_w + MARGIN);
        let top = MARGIN / 2.0 + row * (panel_h + MARGIN);
        let peak = density
            .smoothed
            .iter()
            .chain(&density.histogram)
            .copied()
            .fold(0.0_f64, f64::max);
        let f = Frame::new(density.interval, (0.0, peak), left, top, panel_w, panel_h);
        axes(&mut svg, &f, PARAM_NAMES[i], "density");
        polyline(
            &mut svg,
            &f,
            density.grid.iter().copied().zip(density.histogram.iter().copied()),
            "#999",
        );
        polyline(
            &mut svg,
            &f,
            density.grid.iter().copied().zip(density.smoothed.iter().copied()),
            "#2166ac",
        );
        for (value, stroke, dash) in [
            (map_values[i], "#b2182b", "none"),
            (cm_values[i], "#1b7837", "4 3"),
        ] {
            if value.is_finite() && value >= f.x_min && value <= f.x_max {
                let _ = writeln!(
                    svg,
                    "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{stroke}\" stroke-dasharray=\"{dash}\"/>",
                    f.top,
                    f.top + f.height,
                    x = f.sx(value)
                );
            }
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\">{patient_id}: marginal posteriors (MAP solid, CM dashed)</text>",
        MARGIN,
        14.0
    );
    svg + "</svg>\n"
}
