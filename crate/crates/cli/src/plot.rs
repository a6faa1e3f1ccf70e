//! SVG figures: the pairwise boundary diagram and the estimator comparison.

use std::fmt::Write as _;

use seqrb::design::{BoundaryKind, DesignPlan};
use seqrb::estimate::EstimateReport;

use crate::error::CliError;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 52.0;

/// Data-to-pixel mapping plus the SVG body being built.
struct Canvas {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Canvas {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            x,
            y,
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let p: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" stroke="none"/>"#,
            p.join(" ")
        )
        .unwrap();
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), style: &str) {
        writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#,
            self.px(a.0),
            self.py(a.1),
            self.px(b.0),
            self.py(b.1)
        )
        .unwrap();
    }

    fn disc(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"#,
            self.px(x),
            self.py(y)
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str) {
        writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="12">{s}</text>"#,
            self.px(x),
            self.py(y)
        )
        .unwrap();
    }

    fn axes(&mut self, xlabel: &str, ylabel: &str, xstep: f64, ystep: f64) {
        let (x0, x1, y0, y1) = (self.x.0, self.x.1, self.y.0, self.y.1);
        let axis = r#"stroke="black" stroke-width="1""#;
        self.line((x0, y0), (x1, y0), axis);
        self.line((x0, y0), (x0, y1), axis);
        let mut t = (x0 / xstep).ceil() * xstep;
        while t <= x1 + 1e-9 {
            let (px, py) = (self.px(t), self.py(y0));
            writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{py:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
                py + 5.0,
                py + 18.0,
                tick(t)
            )
            .unwrap();
            t += xstep;
        }
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 + 1e-9 {
            let (px, py) = (self.px(x0), self.py(t));
            writeln!(
                self.body,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{px:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
                px - 5.0,
                px - 8.0,
                py + 4.0,
                tick(t)
            )
            .unwrap();
            t += ystep;
        }
        writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{xlabel}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0
        )
        .unwrap();
        writeln!(
            self.body,
            r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0
        )
        .unwrap();
    }

    fn finish(self, title: &str) -> String {
        format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{title}</text>
{}</svg>
"#,
            W / 2.0,
            self.body
        )
    }
}

fn tick(t: f64) -> String {
    let r = (t * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

/// Z against V with the decision regions of one pairwise comparison and a
/// disc on each boundary at every planned interim.
pub fn boundary_svg(plan: &DesignPlan) -> String {
    let b = plan.boundary;
    let last = plan.planned_interims as f64 * plan.v_increment_nominal;
    let meet = b
        .apex_information()
        .filter(|v| v.is_finite())
        .unwrap_or(last);
    let close = match b.kind {
        BoundaryKind::TwoArmTriangular => meet,
        // Inner edges meet the outer lines here.
        BoundaryKind::PairwiseDoubleTriangular => {
            let d = b.slope_in - b.slope_out;
            if d > 0.0 {
                2.0 * b.intercept / d
            } else {
                last
            }
        }
    };
    let vmax = (close.max(last) * 1.05).ceil();
    let zmax = (b.upper(vmax) + 2.0).ceil();
    let mut c = Canvas::new((0.0, vmax), (-zmax, zmax));
    let stop = close.min(vmax);
    let (better, worse, nod) = ("#cfe8cf", "#f3d0cf", "#d3dcf2");
    c.polygon(
        &[
            (0.0, b.upper(0.0)),
            (stop, b.upper(stop)),
            (stop, zmax),
            (0.0, zmax),
        ],
        better,
    );
    c.polygon(
        &[
            (0.0, b.lower(0.0)),
            (stop, b.lower(stop)),
            (stop, -zmax),
            (0.0, -zmax),
        ],
        worse,
    );
    let line = r#"stroke="black" stroke-width="1.5""#;
    c.line((0.0, b.upper(0.0)), (stop, b.upper(stop)), line);
    c.line((0.0, b.lower(0.0)), (stop, b.lower(stop)), line);
    match b.kind {
        BoundaryKind::TwoArmTriangular => {
            c.text(
                stop * 0.3,
                b.upper(stop * 0.3) + 2.0,
                "first treatment better",
                "middle",
            );
            c.text(
                stop * 0.3,
                b.lower(stop * 0.3) - 3.0,
                "first treatment not better",
                "middle",
            );
        }
        BoundaryKind::PairwiseDoubleTriangular => {
            if let Some(open) = b.apex_information().filter(|&v| v < stop) {
                c.polygon(
                    &[(open, 0.0), (stop, b.upper(stop)), (stop, -b.upper(stop))],
                    nod,
                );
                let hi = |v: f64| -b.intercept + b.slope_in * v;
                c.line((open, 0.0), (stop, hi(stop)), line);
                c.line((open, 0.0), (stop, -hi(stop)), line);
                c.text(open - 1.5, -0.5, &format!("opens at V = {open:.3}"), "end");
                c.text((open + stop) / 2.0 + 6.0, 0.0, "no difference", "middle");
            }
            c.text(stop * 0.3, b.upper(stop * 0.3) + 2.0, "better", "middle");
            c.text(stop * 0.3, b.lower(stop * 0.3) - 3.0, "worse", "middle");
        }
    }
    for k in 1..=plan.planned_interims {
        let v = k as f64 * plan.v_increment_nominal;
        if v > stop * (1.0 + 1e-3) {
            break;
        }
        c.disc(v, b.upper(v), 3.0, "black");
        c.disc(v, b.lower(v), 3.0, "black");
        if b.kind == BoundaryKind::PairwiseDoubleTriangular && b.no_difference_interval(v).is_some()
        {
            let hi = -b.intercept + b.slope_in * v;
            c.disc(v, hi, 3.0, "#334");
            c.disc(v, -hi, 3.0, "#334");
        }
    }
    c.axes("V", "Z", 10.0, 5.0);
    c.finish("Stopping and elimination boundaries")
}

/// One method's result for a comparison, with that comparison's naive estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPoint {
    pub method: String,
    pub naive: f64,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

/// Pair each non-naive report with the naive report for the same comparison
/// in the same set.
pub fn comparison_points(sets: &[Vec<EstimateReport>]) -> Result<Vec<ComparisonPoint>, CliError> {
    let mut out = Vec::new();
    for set in sets {
        for r in set.iter().filter(|r| r.method != "naive") {
            let naive = set
                .iter()
                .find(|n| n.method == "naive" && n.first == r.first && n.second == r.second)
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "no naive report for T{} vs T{} to compare {} against",
                        r.first, r.second, r.method
                    ))
                })?;
            out.push(ComparisonPoint {
                method: r.method.clone(),
                naive: naive.theta_hat,
                estimate: r.theta_hat,
                low: r.ci_low,
                high: r.ci_high,
            });
        }
    }
    Ok(out)
}

const PALETTE: [&str; 4] = ["#1b6ca8", "#c4432b", "#2e8b57", "#8a5a9e"];

/// Estimates and interval limits minus the naive estimate, against the
/// naive estimate, with a reference line at `reference`.
pub fn estimates_svg(points: &[ComparisonPoint], reference: f64) -> String {
    let mut methods: Vec<&str> = points.iter().map(|p| p.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let xs = points.iter().map(|p| p.naive).chain([reference]);
    let (xlo, xhi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let ys = points
        .iter()
        .flat_map(|p| [p.estimate - p.naive, p.low - p.naive, p.high - p.naive])
        .chain([0.0]);
    let (ylo, yhi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let pad = |lo: f64, hi: f64| {
        let m = ((hi - lo) * 0.08).max(0.05);
        ((lo - m) * 10.0).floor() / 10.0..=((hi + m) * 10.0).ceil() / 10.0
    };
    let (xr, yr) = (pad(xlo, xhi), pad(ylo, yhi));
    let mut c = Canvas::new((*xr.start(), *xr.end()), (*yr.start(), *yr.end()));
    c.line(
        (c.x.0, 0.0),
        (c.x.1, 0.0),
        r#"stroke="gray" stroke-width="1""#,
    );
    c.line(
        (reference, c.y.0),
        (reference, c.y.1),
        r#"stroke="gray" stroke-width="1" stroke-dasharray="6 4""#,
    );
    c.text(
        reference,
        c.y.1 - 0.03 * (c.y.1 - c.y.0),
        &format!("{reference:.4}"),
        "start",
    );
    for p in points {
        let k = methods.iter().position(|m| *m == p.method).unwrap_or(0);
        let colour = PALETTE[k % PALETTE.len()];
        let dx = 0.006 * (c.x.1 - c.x.0);
        for lim in [p.low, p.high] {
            let y = lim - p.naive;
            c.line(
                (p.naive - dx, y),
                (p.naive + dx, y),
                &format!(r#"stroke="{colour}" stroke-width="2""#),
            );
        }
        c.disc(p.naive, p.estimate - p.naive, 3.5, colour);
    }
    for (k, m) in methods.iter().enumerate() {
        let y = c.y.1 - (0.06 + 0.05 * k as f64) * (c.y.1 - c.y.0);
        let x = c.x.0 + 0.04 * (c.x.1 - c.x.0);
        c.disc(x, y, 4.0, PALETTE[k % PALETTE.len()]);
        c.text(
            x + 0.02 * (c.x.1 - c.x.0),
            y - 0.01 * (c.y.1 - c.y.0),
            m,
            "start",
        );
    }
    c.axes(
        "naive estimate",
        "difference from naive estimate",
        tick_step(c.x),
        tick_step(c.y),
    );
    c.finish("Estimates and 95% limits relative to the naive estimate")
}

fn tick_step(r: (f64, f64)) -> f64 {
    let span = r.1 - r.0;
    [0.05, 0.1, 0.2, 0.25, 0.5, 1.0, 2.0, 5.0]
        .into_iter()
        .find(|s| span / s <= 10.0)
        .unwrap_or(10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_arm_diagram_marks_the_wedge_opening() {
        let svg = boundary_svg(&DesignPlan::four_arm_default());
        assert!(svg.contains("opens at V = 29.356"), "{svg}");
        assert!(svg.contains("no difference"));
        assert_eq!(svg.matches("<circle").count(), 2 * 20 + 2 * 14);
        assert!(svg.contains("better") && svg.contains("worse"));
    }

    #[test]
    fn two_arm_diagram_has_no_wedge() {
        let svg = boundary_svg(&DesignPlan::two_arm_default());
        assert!(!svg.contains("no difference"));
        assert!(svg.contains("not better"));
    }

    #[test]
    fn comparison_needs_a_naive_partner() {
        let r = EstimateReport::wald("rb1", 1, 2, 0.3, 0.1);
        assert!(comparison_points(&[vec![r.clone()]]).is_err());
        let n = EstimateReport::wald("naive", 1, 2, 0.5, 0.1);
        let pts = comparison_points(&[vec![n, r]]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].naive, 0.5);
        let svg = estimates_svg(&pts, 0.2462);
        assert!(svg.contains("0.2462"));
    }
}
