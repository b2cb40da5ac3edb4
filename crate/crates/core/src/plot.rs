//! Minimal SVG charts for reports. Pure functions from data to SVG text.

use std::fmt::Write as _;

use crate::docking::{max_speed, DockingConfig};
use crate::metrics::ActionHistogram;
use crate::trajectory::Columns;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 60.0); // left, right, top, bottom
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
pub const SAFE_FILL: &str = "#b7e4b0";
pub const UNSAFE_FILL: &str = "#f4b6b6";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        Self { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            points(pts)
        );
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, opacity: f64, class: &str) {
        let _ = writeln!(
            self.out,
            r#"<polygon class="{class}" points="{}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>"#,
            points(pts)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" stroke="{stroke}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn text_rotated(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
            esc(s)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Data-to-pixel mapping of one panel.
#[derive(Debug, Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(left: f64, top: f64, width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            left,
            top,
            width,
            height,
            x: padded(x),
            y: padded(y),
        }
    }

    fn standard(x: (f64, f64), y: (f64, f64)) -> Self {
        let (l, r, t, b) = MARGIN;
        Self::new(l, t, W - l - r, H - t - b, x, y)
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (self.px(p.0), self.py(p.1))
    }

    fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str, x_ticks: bool) {
        let bottom = self.top + self.height;
        svg.line(self.left, bottom, self.left + self.width, bottom, "black", 1.0);
        svg.line(self.left, self.top, self.left, bottom, "black", 1.0);
        for t in ticks(self.y) {
            let y = self.py(t);
            svg.line(self.left - 4.0, y, self.left, y, "black", 1.0);
            svg.line(self.left, y, self.left + self.width, y, "#e0e0e0", 0.5);
            svg.text(self.left - 6.0, y + 4.0, "end", &fmt_tick(t));
        }
        if x_ticks {
            for t in ticks(self.x) {
                let x = self.px(t);
                svg.line(x, bottom, x, bottom + 4.0, "black", 1.0);
                svg.text(x, bottom + 16.0, "middle", &fmt_tick(t));
            }
        }
        svg.text(self.left + self.width / 2.0, bottom + 40.0, "middle", xlabel);
        svg.text_rotated(self.left - 52.0, self.top + self.height / 2.0, ylabel);
    }
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let d = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - d, hi + d);
    }
    let d = (hi - lo) * 0.05;
    (lo - d, hi + d)
}

fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn range(vals: impl IntoIterator<Item = f64>) -> (f64, f64) {
    vals.into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// One point estimate with its confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub label: String,
    pub iqm: f64,
    pub low: f64,
    pub high: f64,
}

/// IQM markers over categorical x positions with the CI as a shaded band
/// and whiskers.
pub fn interval_plot(title: &str, ylabel: &str, series: &[(String, Vec<Estimate>)]) -> String {
    let n = series.iter().map(|(_, e)| e.len()).max().unwrap_or(0).max(1);
    let yr = range(series.iter().flat_map(|(_, es)| es.iter().flat_map(|e| [e.low, e.high, e.iqm])));
    let frame = Frame::standard((0.0, (n - 1).max(1) as f64), yr);
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);
    frame.axes(&mut svg, "action space", ylabel, false);
    if let Some((_, first)) = series.first() {
        let bottom = frame.top + frame.height;
        for (i, e) in first.iter().enumerate() {
            let x = frame.px(i as f64);
            let _ = writeln!(
                svg.out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="end" transform="rotate(-35 {x:.2} {:.2})">{}</text>"#,
                bottom + 14.0,
                bottom + 14.0,
                esc(&e.label)
            );
        }
    }
    for (si, (name, es)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut band: Vec<(f64, f64)> = es.iter().enumerate().map(|(i, e)| frame.map((i as f64, e.high))).collect();
        band.extend(es.iter().enumerate().rev().map(|(i, e)| frame.map((i as f64, e.low))));
        svg.polygon(&band, color, 0.2, "ci");
        for (i, e) in es.iter().enumerate() {
            let x = frame.px(i as f64);
            svg.line(x, frame.py(e.low), x, frame.py(e.high), color, 1.0);
            svg.circle(x, frame.py(e.iqm), 3.5, color, color);
        }
        let pts: Vec<_> = es.iter().enumerate().map(|(i, e)| frame.map((i as f64, e.iqm))).collect();
        svg.polyline(&pts, color, 1.0);
        legend(&mut svg, si, name, color);
    }
    svg.finish()
}

fn legend(svg: &mut Svg, index: usize, name: &str, color: &str) {
    if name.is_empty() {
        return;
    }
    let y = MARGIN.2 + 12.0 + 16.0 * index as f64;
    let x = W - MARGIN.1 - 150.0;
    svg.rect(x, y - 8.0, 12.0, 8.0, color);
    svg.text(x + 18.0, y, "start", name);
}

/// Per-axis action usage as grouped bars over the value set or bins.
pub fn histogram_plot(title: &str, hist: &ActionHistogram) -> String {
    let total: Vec<f64> = hist
        .counts
        .iter()
        .map(|c| c.iter().sum::<u64>().max(1) as f64)
        .collect();
    let fr = |axis: usize, b: usize| hist.counts[axis][b] as f64 / total[axis];
    let ymax = (0..hist.bins.len())
        .flat_map(|b| (0..3).map(move |a| (a, b)))
        .map(|(a, b)| fr(a, b))
        .fold(0.0, f64::max);
    let n = hist.bins.len();
    let frame = Frame::standard((-0.5, n as f64 - 0.5), (0.0, ymax.max(1e-9)));
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);
    frame.axes(&mut svg, "thrust value (N)", "fraction of steps", false);
    let slot = frame.width / n as f64;
    let bar = slot / 3.5;
    for b in 0..n {
        for a in 0..3 {
            let x = frame.px(b as f64) - 1.5 * bar + a as f64 * bar;
            let top = frame.py(fr(a, b));
            svg.rect(x, top, bar, frame.py(0.0) - top, PALETTE[a]);
        }
    }
    let every = n.div_ceil(10).max(1);
    for b in (0..n).step_by(every) {
        svg.text(
            frame.px(b as f64),
            frame.top + frame.height + 16.0,
            "middle",
            &fmt_tick(hist.bins[b]),
        );
    }
    for (a, name) in ["x", "y", "z"].iter().enumerate() {
        legend(&mut svg, a, name, PALETTE[a]);
    }
    svg.finish()
}

fn column<'a>(cols: &'a Columns, key: &str) -> &'a [f64] {
    cols.get(key).map(Vec::as_slice).unwrap_or(&[])
}

/// Inspection episode: the deputy path projected on the x-y and x-z planes
/// around the chief.
pub fn inspection_trajectory_plot(title: &str, cols: &Columns, chief_radius: f64) -> String {
    let (x, y, z) = (column(cols, "x"), column(cols, "y"), column(cols, "z"));
    let reach = x
        .iter()
        .chain(y)
        .chain(z)
        .fold(chief_radius, |m, v| m.max(v.abs()));
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);
    let side = (W - 2.0 * MARGIN.0 - 20.0) / 2.0;
    let side = side.min(H - MARGIN.2 - MARGIN.3);
    for (pi, (other, label)) in [(y, "y (m)"), (z, "z (m)")].into_iter().enumerate() {
        let left = MARGIN.0 + pi as f64 * (side + MARGIN.0);
        let frame = Frame::new(left, MARGIN.2, side, side, (-reach, reach), (-reach, reach));
        frame.axes(&mut svg, "x (m)", label, true);
        let (cx, cy) = frame.map((0.0, 0.0));
        let r = frame.px(chief_radius) - cx;
        svg.circle(cx, cy, r, "#bbbbbb", "black");
        let pts: Vec<_> = x.iter().zip(other).map(|(a, b)| frame.map((*a, *b))).collect();
        svg.polyline(&pts, PALETTE[0], 1.2);
        if let Some(p) = pts.first() {
            svg.circle(p.0, p.1, 3.0, PALETTE[2], PALETTE[2]);
        }
        if let Some(p) = pts.last() {
            svg.circle(p.0, p.1, 3.0, PALETTE[1], PALETTE[1]);
        }
    }
    svg.finish()
}

/// Docking episode: speed against distance with the speed limit, the safe
/// region below it shaded green and the unsafe region above it red.
pub fn speed_limit_plot(title: &str, cols: &Columns, cfg: &DockingConfig) -> String {
    let (x, y, z) = (column(cols, "x"), column(cols, "y"), column(cols, "z"));
    let speed = column(cols, "speed");
    let dist: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect();
    let rmax = range(dist.iter().copied()).1.max(cfg.dock_radius * 2.0);
    let vmax = range(speed.iter().copied())
        .1
        .max(max_speed(rmax, cfg))
        .max(cfg.max_dock_speed);
    let mut frame = Frame::standard((0.0, rmax), (0.0, vmax));
    frame.x.0 = 0.0;
    frame.y.0 = 0.0;
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);

    let samples = 200;
    let limit: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let r = frame.x.1 * i as f64 / samples as f64;
            (r, max_speed(r, cfg).max(0.0))
        })
        .collect();
    let mut safe: Vec<_> = limit.iter().map(|p| frame.map(*p)).collect();
    safe.push(frame.map((frame.x.1, 0.0)));
    safe.push(frame.map((0.0, 0.0)));
    svg.polygon(&safe, SAFE_FILL, 1.0, "safe");
    let mut unsafe_region: Vec<_> = limit.iter().map(|p| frame.map(*p)).collect();
    unsafe_region.push(frame.map((frame.x.1, frame.y.1)));
    unsafe_region.push(frame.map((0.0, frame.y.1)));
    svg.polygon(&unsafe_region, UNSAFE_FILL, 1.0, "unsafe");
    let dock = frame.px(cfg.dock_radius);
    svg.line(dock, frame.top, dock, frame.top + frame.height, "#555555", 1.0);
    frame.axes(&mut svg, "distance to chief (m)", "speed (m/s)", true);
    let lim_px: Vec<_> = limit.iter().map(|p| frame.map(*p)).collect();
    svg.polyline(&lim_px, "black", 1.5);
    let pts: Vec<_> = dist.iter().zip(speed).map(|(r, v)| frame.map((*r, *v))).collect();
    svg.polyline(&pts, PALETTE[0], 1.2);
    legend(&mut svg, 0, "speed", PALETTE[0]);
    legend(&mut svg, 1, "safe", SAFE_FILL);
    legend(&mut svg, 2, "unsafe", UNSAFE_FILL);
    svg.finish()
}

/// Docking episode path projected on the x-y plane.
pub fn docking_trajectory_plot(title: &str, cols: &Columns, dock_radius: f64) -> String {
    let (x, y) = (column(cols, "x"), column(cols, "y"));
    let reach = x.iter().chain(y).fold(dock_radius, |m, v| m.max(v.abs()));
    let side = H - MARGIN.2 - MARGIN.3;
    let frame = Frame::new(MARGIN.0 + 60.0, MARGIN.2, side, side, (-reach, reach), (-reach, reach));
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);
    frame.axes(&mut svg, "x (m)", "y (m)", true);
    let (cx, cy) = frame.map((0.0, 0.0));
    svg.circle(cx, cy, frame.px(dock_radius) - cx, SAFE_FILL, "black");
    let pts: Vec<_> = x.iter().zip(y).map(|(a, b)| frame.map((*a, *b))).collect();
    svg.polyline(&pts, PALETTE[0], 1.2);
    svg.finish()
}

/// One sample-complexity trace: `(timestep, iqm, low, high)` per evaluation.
pub type Curve = Vec<(f64, f64, f64, f64)>;

pub fn curve_plot(title: &str, ylabel: &str, series: &[(String, Curve)]) -> String {
    let xr = range(series.iter().flat_map(|(_, c)| c.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|(_, c)| c.iter().flat_map(|p| [p.1, p.2, p.3])));
    let frame = Frame::standard((0.0_f64.min(xr.0), xr.1), yr);
    let mut svg = Svg::new(W, H);
    svg.text(W / 2.0, 24.0, "middle", title);
    frame.axes(&mut svg, "timesteps", ylabel, true);
    for (si, (name, c)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut band: Vec<_> = c.iter().map(|p| frame.map((p.0, p.3))).collect();
        band.extend(c.iter().rev().map(|p| frame.map((p.0, p.2))));
        svg.polygon(&band, color, 0.2, "ci");
        let pts: Vec<_> = c.iter().map(|p| frame.map((p.0, p.1))).collect();
        svg.polyline(&pts, color, 1.5);
        legend(&mut svg, si, name, color);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well_formed(s: &str) {
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks((0.0, 1.0)), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert!(ticks((-3.0, 17.0)).contains(&0.0));
    }

    #[test]
    fn speed_limit_has_both_regions() {
        let cfg = DockingConfig::default();
        let mut cols = Columns::new();
        cols.insert("x".into(), vec![120.0, 80.0, 40.0, 9.0]);
        cols.insert("y".into(), vec![0.0; 4]);
        cols.insert("z".into(), vec![0.0; 4]);
        cols.insert("speed".into(), vec![0.3, 0.25, 0.2, 0.1]);
        let s = speed_limit_plot("docking", &cols, &cfg);
        well_formed(&s);
        assert!(s.contains(&format!(r#"class="safe" points"#)));
        assert!(s.contains(SAFE_FILL) && s.contains(UNSAFE_FILL));
        assert_ne!(SAFE_FILL, UNSAFE_FILL);
    }

    #[test]
    fn degenerate_inputs_render() {
        well_formed(&interval_plot("t", "y", &[]));
        well_formed(&curve_plot("t", "y", &[("a".into(), vec![(0.0, 1.0, 1.0, 1.0)])]));
        well_formed(&inspection_trajectory_plot("t", &Columns::new(), 10.0));
        let h = ActionHistogram {
            bins: vec![-1.0, 0.0, 1.0],
            counts: [vec![0, 5, 0], vec![1, 3, 1], vec![0, 0, 5]],
        };
        well_formed(&histogram_plot("h", &h));
        let e = Estimate {
            label: "discrete-3 <a>".into(),
            iqm: 2.0,
            low: 1.0,
            high: 3.0,
        };
        let s = interval_plot("t", "y", &[("s".into(), vec![e.clone(), e])]);
        well_formed(&s);
        assert!(s.contains("&lt;a&gt;"));
    }
}
