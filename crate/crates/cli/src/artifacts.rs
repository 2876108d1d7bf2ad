//! Deterministic artifact writers.
//!
//! Every file a command produces is written here: delimited text with
//! full-precision floats, pretty-printed JSON summaries, and hand-rolled
//! SVG portraits. Identical inputs produce identical bytes, which is what
//! makes rerun-and-compare a meaningful check.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use lyapctl_core::{DomainBox, RoaEstimate, TrainReport, Trajectory, Vector, Verdict};

use crate::error::{io_err, CliError, Result};

/// Full-precision float field, the same shape the library's writers use;
/// parsing it back yields the original bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut doc = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    doc.push('\n');
    write_text(path, &doc)
}

/// One row per scored start: `x0...,verdict,V_running_avg`. The energy
/// column holds the trailing-window mean the verdict compared against
/// the threshold.
pub fn write_roa_csv(path: &Path, est: &RoaEstimate, state_dim: usize) -> Result<()> {
    let mut out = String::new();
    for i in 0..state_dim {
        let _ = write!(out, "x{i},");
    }
    out.push_str("verdict,V_running_avg\n");
    for s in &est.samples {
        for v in &s.x0 {
            let _ = write!(out, "{},", fmt_f64(*v));
        }
        let _ = writeln!(out, "{},{}", s.verdict.as_str(), fmt_f64(s.v_tail_avg));
    }
    write_text(path, &out)
}

/// Verdict grid over the plot plane: `x{i},x{j},verdict,V_running_avg`.
pub fn write_grid_csv(
    path: &Path,
    coords: (usize, usize),
    rows: &[(f64, f64, Verdict, f64)],
) -> Result<()> {
    let mut out = format!("x{},x{},verdict,V_running_avg\n", coords.0, coords.1);
    for (a, b, verdict, v) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(*a),
            fmt_f64(*b),
            verdict.as_str(),
            fmt_f64(*v)
        );
    }
    write_text(path, &out)
}

/// Failure-probability grid: `x{i},x{j},failure_probability`.
pub fn write_mc_csv(path: &Path, coords: (usize, usize), rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut out = format!("x{},x{},failure_probability\n", coords.0, coords.1);
    for (a, b, p) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*a), fmt_f64(*b), fmt_f64(*p));
    }
    write_text(path, &out)
}

/// One rollout: `t,x...,u...,V`. The policy is queried once per step, so
/// the final row repeats the last held input to keep the row shape.
pub fn write_traj_csv(
    path: &Path,
    traj: &Trajectory,
    state_dim: usize,
    input_dim: usize,
) -> Result<()> {
    let mut out = String::from("t,");
    for i in 0..state_dim {
        let _ = write!(out, "x{i},");
    }
    for i in 0..input_dim {
        let _ = write!(out, "u{i},");
    }
    out.push_str("V\n");
    let zeros = vec![0.0; input_dim];
    for (k, t) in traj.times.iter().enumerate() {
        let _ = write!(out, "{},", fmt_f64(*t));
        for v in &traj.states[k] {
            let _ = write!(out, "{},", fmt_f64(*v));
        }
        let u = traj
            .inputs
            .get(k)
            .or_else(|| traj.inputs.last())
            .unwrap_or(&zeros);
        for v in u {
            let _ = write!(out, "{},", fmt_f64(*v));
        }
        let _ = writeln!(out, "{}", fmt_f64(traj.lyap[k]));
    }
    write_text(path, &out)
}

/// Both stages' loss curves: `stage,epoch,train_loss,val_loss`.
pub fn write_losses_csv(path: &Path, ghat: &TrainReport, controller: &TrainReport) -> Result<()> {
    let mut out = String::from("stage,epoch,train_loss,val_loss\n");
    for (stage, report) in [("ghat", ghat), ("controller", controller)] {
        for (e, (tr, va)) in report
            .train_losses
            .iter()
            .zip(report.val_losses.iter())
            .enumerate()
        {
            let _ = writeln!(out, "{stage},{e},{},{}", fmt_f64(*tr), fmt_f64(*va));
        }
    }
    write_text(path, &out)
}

/// `side`-per-axis lattice over the plot plane `(i, j)`; all the other
/// coordinates are zero. Row-major with the second coordinate fastest.
pub fn plane_lattice(domain: &DomainBox, dim: usize, coords: (usize, usize), side: usize) -> Vec<Vector> {
    let (i, j) = coords;
    let step = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (side - 1) as f64;
    let mut points = Vec::with_capacity(side * side);
    for a in 0..side {
        for b in 0..side {
            let mut x = vec![0.0; dim];
            x[i] = step(domain.lo()[i], domain.hi()[i], a);
            x[j] = step(domain.lo()[j], domain.hi()[j], b);
            points.push(x);
        }
    }
    points
}

/// Concentric ellipses of starts in the plot plane, sized as fractions
/// of the domain half-widths; the other coordinates stay zero.
pub fn plane_rings(
    domain: &DomainBox,
    dim: usize,
    coords: (usize, usize),
    fracs: &[f64],
    per_ring: usize,
) -> Vec<Vector> {
    let (i, j) = coords;
    let ci = 0.5 * (domain.lo()[i] + domain.hi()[i]);
    let cj = 0.5 * (domain.lo()[j] + domain.hi()[j]);
    let wi = 0.5 * (domain.hi()[i] - domain.lo()[i]);
    let wj = 0.5 * (domain.hi()[j] - domain.lo()[j]);
    let mut points = Vec::with_capacity(fracs.len() * per_ring);
    for f in fracs {
        for k in 0..per_ring {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / per_ring as f64;
            let mut x = vec![0.0; dim];
            x[i] = ci + f * wi * angle.cos();
            x[j] = cj + f * wj * angle.sin();
            points.push(x);
        }
    }
    points
}

pub fn verdict_color(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "#2a7de1",
        Verdict::LeftDomain => "#d64545",
        Verdict::EnergyAboveThreshold => "#e0a030",
    }
}

/// A 2-D trajectory portrait: axes, the domain rectangle, one polyline
/// per rollout with a dot at its start, and a small legend.
pub struct Portrait<'a> {
    pub title: &'a str,
    pub domain: &'a DomainBox,
    pub coords: (usize, usize),
    /// Projected trajectories with a stroke color each.
    pub paths: Vec<(Vec<(f64, f64)>, &'static str)>,
    /// Legend entries: label and color.
    pub legend: Vec<(&'a str, &'static str)>,
}

const SVG_W: f64 = 860.0;
const SVG_H: f64 = 660.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

pub fn render_portrait(p: &Portrait) -> String {
    let (i, j) = p.coords;
    let (lo_i, hi_i) = (p.domain.lo()[i], p.domain.hi()[i]);
    let (lo_j, hi_j) = (p.domain.lo()[j], p.domain.hi()[j]);
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let px = |a: f64| MARGIN_L + (a - lo_i) / (hi_i - lo_i) * plot_w;
    let py = |b: f64| MARGIN_T + (hi_j - b) / (hi_j - lo_j) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" \
         font-family=\"Helvetica, Arial, sans-serif\">"
    );
    let _ = writeln!(s, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        s,
        "<clipPath id=\"plot\"><rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" \
         height=\"{plot_h}\"/></clipPath>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN_L}\" y=\"30\" font-size=\"17\" fill=\"#222222\">{}</text>",
        xml_escape(p.title)
    );
    // Domain rectangle and axis frame coincide: starts and verdicts are
    // all judged against this box.
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>"
    );

    let ticks = 5;
    for k in 0..ticks {
        let fx = lo_i + (hi_i - lo_i) * k as f64 / (ticks - 1) as f64;
        let x = px(fx);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#444444\"/>",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 6.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#222222\" \
             text-anchor=\"middle\">{fx:.2}</text>",
            MARGIN_T + plot_h + 22.0
        );
        let fy = lo_j + (hi_j - lo_j) * k as f64 / (ticks - 1) as f64;
        let y = py(fy);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"#444444\"/>",
            MARGIN_L - 6.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#222222\" \
             text-anchor=\"end\">{fy:.2}</text>",
            MARGIN_L - 10.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" fill=\"#222222\" \
         text-anchor=\"middle\">x{i}</text>",
        MARGIN_L + plot_w / 2.0,
        SVG_H - 14.0
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{:.2}\" font-size=\"14\" fill=\"#222222\" \
         transform=\"rotate(-90 20 {:.2})\" text-anchor=\"middle\">x{j}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    let _ = writeln!(s, "<g clip-path=\"url(#plot)\">");
    for (path, color) in &p.paths {
        if path.is_empty() {
            continue;
        }
        // Long rollouts carry thousands of near-duplicate points; keep
        // roughly 500 per line plus the endpoint.
        let stride = (path.len() / 500).max(1);
        let mut pts = String::new();
        for (k, (a, b)) in path.iter().enumerate() {
            if k % stride == 0 || k + 1 == path.len() {
                let _ = write!(pts, "{:.2},{:.2} ", px(*a), py(*b));
            }
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" \
             stroke-opacity=\"0.85\"/>",
            pts.trim_end()
        );
        let (a0, b0) = path[0];
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
            px(a0),
            py(b0)
        );
    }
    let _ = writeln!(s, "</g>");

    for (k, (label, color)) in p.legend.iter().enumerate() {
        let y = MARGIN_T + 16.0 + 20.0 * k as f64;
        let x = SVG_W - MARGIN_R - 170.0;
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>",
            x + 24.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#222222\">{}</text>",
            x + 30.0,
            y + 4.0,
            xml_escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Median of an unsorted slice; the even case averages the two middles.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
