//! Run outputs: the JSON report, the trajectory CSV and two static SVG
//! plots. Everything is written deterministically so repeated runs with the
//! same configuration produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{ConditionNumber, Orientation, ProofCheck, StepSizes};
use crate::error::Result;
use crate::integrate::{ErrorBudget, Method, Trajectory};
use crate::problems::{
    EnvelopeLipschitz, LipschitzCertificate, PlCertificate, SmoothnessConstants,
};
use crate::verify::{
    ConservationReport, GradcheckReport, LemmaAuditReport, OrderReport, RateReport,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemInfo {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub constants: SmoothnessConstants,
    pub f_lower: Option<f64>,
    pub f_ref_upper: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepsInfo {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub orientation: Orientation,
}

impl From<StepSizes> for StepsInfo {
    fn from(s: StepSizes) -> Self {
        StepsInfo {
            alpha: s.alpha,
            beta: s.beta,
            gamma: s.gamma,
            orientation: s.orientation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorInfo {
    pub method: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub budget: Option<ErrorBudget>,
    pub record_every: usize,
    pub samples: usize,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
}

impl IntegratorInfo {
    pub fn from_trajectory(traj: &Trajectory, budget: Option<ErrorBudget>) -> Self {
        let adaptive = traj.config.method == Method::RK45Adaptive;
        IntegratorInfo {
            method: traj.config.method.to_string(),
            dt: traj.dt,
            horizon: traj.config.horizon,
            budget,
            record_every: traj.record_every,
            samples: traj.samples.len(),
            rel_tol: adaptive.then_some(traj.config.rel_tol),
            abs_tol: adaptive.then_some(traj.config.abs_tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Pl(PlCertificate),
    Lipschitz(LipschitzCertificate),
}

impl Certificate {
    pub fn pass(&self) -> bool {
        match self {
            Certificate::Pl(c) => c.pass,
            Certificate::Lipschitz(c) => c.pass,
        }
    }
}

/// Optional run-level calibration data.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Calibration {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation: Option<ConservationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gradcheck: Vec<GradcheckReport>,
    /// Measured Lipschitz constant of the max-envelope gradient
    /// (informational; not part of the pass decision).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_lipschitz: Option<EnvelopeLipschitz>,
}

impl Calibration {
    pub fn pass(&self) -> bool {
        self.conservation.as_ref().is_none_or(|c| c.pass)
            && self.order.as_ref().is_none_or(|o| o.pass)
            && self.gradcheck.iter().all(|g| g.pass)
    }
}

/// JSON report of one run. The first nine fields form the stable schema;
/// the rest are supplementary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub run_id: String,
    pub problem: ProblemInfo,
    pub regime: Option<String>,
    pub steps: StepsInfo,
    pub integrator: IntegratorInfo,
    pub certificates: Vec<Certificate>,
    pub rate_checks: Vec<RateReport>,
    pub lemma_audits: Vec<LemmaAuditReport>,
    pub pass: bool,
    pub off_schedule: bool,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub condition_number: Option<ConditionNumber>,
    pub proof_identities: Vec<ProofCheck>,
    pub calibration: Calibration,
    pub left_box_at: Option<f64>,
    pub diverged_at: Option<f64>,
    pub notes: Vec<String>,
}

impl Report {
    /// Conjunction of every enabled check.
    pub fn compute_pass(&self) -> bool {
        self.diverged_at.is_none()
            && self.certificates.iter().all(Certificate::pass)
            && self.rate_checks.iter().all(|r| r.pass)
            && self.lemma_audits.iter().all(|a| a.pass)
            && self.proof_identities.iter().all(|c| c.holds)
            && self.calibration.pass()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// 64-bit FNV-1a, used for deterministic run ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory as CSV: `t, x_0.., y_0.., gx_norm, gy_norm, v1, v2, v`, with
/// the Lyapunov columns left empty when unavailable.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let (m, n) = traj
        .samples
        .first()
        .map_or((0, 0), |s| (s.state.x.len(), s.state.y.len()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..m).map(|i| format!("x_{i}")));
    header.extend((0..n).map(|j| format!("y_{j}")));
    header.extend(["gx_norm", "gy_norm", "v1", "v2", "v"].map(String::from));
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut row = vec![num(s.state.t)];
        row.extend(s.state.x.iter().map(|&v| num(v)));
        row.extend(s.state.y.iter().map(|&v| num(v)));
        row.push(num(s.gx_norm));
        row.push(num(s.gy_norm));
        match &s.lyapunov {
            Some(l) => row.extend([num(l.v1), num(l.v2), num(l.v)]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-sample lemma audit data as CSV.
pub fn lemma_csv(audit: &LemmaAuditReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["part", "t", "lhs", "rhs", "slack", "holds"])?;
    let parts = audit.parts.iter().chain(audit.statement_version.iter());
    for part in parts {
        for s in &part.samples {
            w.write_record([
                part.name.clone(),
                num(s.t),
                num(s.lhs),
                num(s.rhs),
                num(s.slack),
                s.holds().to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;

/// Static line chart with a log10 y-axis. Nonpositive values are dropped;
/// each series is thinned to at most 2000 points.
pub fn svg_log_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let thin = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let kept: Vec<(f64, f64)> = pts
            .iter()
            .copied()
            .filter(|&(x, y)| x.is_finite() && y.is_finite() && y > 0.0)
            .collect();
        if kept.len() <= MAX_POINTS {
            return kept;
        }
        let stride = kept.len().div_ceil(MAX_POINTS);
        let mut out: Vec<_> = kept.iter().copied().step_by(stride).collect();
        if out.last() != kept.last() {
            out.push(*kept.last().unwrap());
        }
        out
    };
    let data: Vec<Vec<(f64, f64)>> = series.iter().map(|s| thin(&s.points)).collect();
    let all = data.iter().flatten();
    let (mut x0, mut x1, mut l0, mut l1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        l0 = l0.min(y.log10());
        l1 = l1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, l0, l1) = (0.0, 1.0, -1.0, 0.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let (l0, l1) = (l0.floor(), l1.ceil().max(l0.floor() + 1.0));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (PLOT_W - 2.0 * MARGIN);
    let py = |y: f64| PLOT_H - MARGIN - (y.log10() - l0) / (l1 - l0) * (PLOT_H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        PLOT_W / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, PLOT_W - MARGIN, MARGIN, PLOT_H - MARGIN);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let decades = (l1 - l0) as i64;
    let step = (decades as f64 / 8.0).ceil().max(1.0) as i64;
    for k in (0..=decades).step_by(step as usize) {
        let y = py(10f64.powf(l0 + k as f64));
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{}</text>"#,
            left - 4.0,
            y + 4.0,
            l0 as i64 + k
        );
    }
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(xv),
            bottom + 16.0,
            fmt_tick(xv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        PLOT_W / 2.0,
        PLOT_H - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        PLOT_H / 2.0,
        PLOT_H / 2.0,
        escape(y_label)
    );
    for (i, (s, pts)) in series.iter().zip(&data).enumerate() {
        if !pts.is_empty() {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                s.color,
                path.join(" ")
            );
        }
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            right - 170.0,
            right - 150.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            right - 145.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::schedule_for;
    use crate::dynamics::Orientation;
    use crate::integrate::{integrate, IntegratorConfig};
    use crate::problems::{make_bilinear, make_quadratic_saddle, RegimeTag};

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = schedule_for(RegimeTag::TwoSidedPL, q.constants()).unwrap();
        let tr = integrate(&q, &s, &[1.0], &[1.0], &IntegratorConfig::rk4(0.05, 1e-2)).unwrap();
        let csv = trajectory_csv(&tr).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x_0,y_0,gx_norm,gy_norm,v1,v2,v"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(first.len(), 8);
        assert_eq!(csv.lines().count(), tr.samples.len() + 1);
    }

    #[test]
    fn csv_leaves_lyapunov_empty_when_unavailable() {
        let bl = make_bilinear(2).unwrap();
        let s = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap();
        let tr = integrate(
            &bl,
            &s,
            &[1.0, 0.0],
            &[0.0, 1.0],
            &IntegratorConfig::rk4(0.02, 1e-2),
        )
        .unwrap();
        let csv = trajectory_csv(&tr).unwrap();
        assert!(csv.starts_with("t,x_0,x_1,y_0,y_1,gx_norm,gy_norm,v1,v2,v\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn svg_is_well_formed_and_skips_nonpositive() {
        let s = Series {
            name: "v".into(),
            color: "steelblue",
            dashed: false,
            points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0), (3.0, 1e-3)],
        };
        let svg = svg_log_plot("t < 1 & more", "t", "v", &[s]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t &lt; 1 &amp; more"));
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 3);
    }
}
