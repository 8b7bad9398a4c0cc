//! CSV tables with a provenance header, and a small SVG line plot.

use std::fmt::Write as _;

use crate::asymptotics::CoefficientSet;
use crate::estimate::RatioDiagnostic;
use crate::tailcalc::VerificationReport;

/// Values shared by every header line.
#[derive(Debug, Clone)]
pub struct Provenance<'a> {
    pub config_sha256: &'a str,
    pub seed: u64,
    pub samples: u64,
    pub command: &'a str,
}

impl Provenance<'_> {
    pub fn header(&self) -> String {
        format!(
            "# ruinsim {} config_sha256={} seed={} samples={} command={}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_sha256,
            self.seed,
            self.samples,
            self.command
        )
    }
}

pub fn ratio_csv(prov: &Provenance, rows: &[RatioDiagnostic]) -> String {
    let mut out = prov.header();
    out.push_str("target,horizon,x,p_hat,se,ci_lo,ci_hi,asymptotic,ratio,ratio_lo,ratio_hi,samples,method\n");
    for r in rows {
        let e = &r.estimate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.target.label(),
            e.horizon.label(),
            r.x,
            e.p_hat,
            e.se,
            e.ci_lo,
            e.ci_hi,
            r.asymptotic,
            r.ratio,
            r.ratio_ci.0,
            r.ratio_ci.1,
            e.samples,
            e.method.label()
        );
    }
    out
}

pub fn coeff_csv(prov: &Provenance, rows: &[CoefficientSet]) -> String {
    let mut out = prov.header();
    out.push_str("horizon,alpha,mu_alpha,A,B,C,se_B,se_C\n");
    for c in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.horizon.label(),
            c.alpha,
            c.mu_alpha,
            c.a,
            c.b,
            c.c,
            c.se_b,
            c.se_c
        );
    }
    out
}

pub fn report_csv(prov: &Provenance, report: &VerificationReport) -> String {
    let mut out = prov.header();
    for note in &report.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    out.push_str("lemma_id,label,x,observed,predicted,rel_err,scored\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            report.lemma_id, r.label, r.x, r.observed, r.predicted, r.rel_err, r.scored
        );
    }
    out
}

pub fn report_summary(report: &VerificationReport) -> String {
    let mut line = format!(
        "{} {}: max_rel_err={} tolerance={}",
        report.lemma_id,
        if report.passed() { "PASS" } else { "FAIL" },
        report.max_rel_err,
        report.tolerance
    );
    if let Some(m) = report.monotone {
        let _ = write!(line, " monotone={m}");
    }
    line
}

/// One named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Ratio against `x` on a log-x axis with a dashed reference line at 1.
pub fn ratio_svg(series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 40.0);
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 1.0f64, 1.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |lx: f64| left + (lx - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = left,
        t = top,
        b = h - bottom,
        r = w - right
    );
    for d in x0.ceil() as i32..=x1.floor() as i32 {
        let x = px(d as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{b2}" stroke="black"/><text x="{x:.1}" y="{ty}" font-size="11" text-anchor="middle">1e{d}</text>"#,
            b = h - bottom,
            b2 = h - bottom + 5.0,
            ty = h - bottom + 18.0
        );
    }
    for (y, label) in [(y0, y0), (y1, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{tx}" y="{yy:.1}" font-size="11" text-anchor="end">{label:.3}</text>"#,
            tx = left - 6.0,
            yy = py(y) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{l}" y1="{y:.1}" x2="{r}" y2="{y:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
        l = left,
        r = w - right,
        y = py(1.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">x</text>"#,
        x = (left + w - right) / 2.0,
        y = h - 6.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x.log10()), py(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{name}</text>"#,
            x = w - right - 120.0,
            y = top + 14.0 * (i as f64 + 1.0),
            name = escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
