//! Plot side channel: SVG pictures of planar runs and CSV curve data.
//! Nothing here feeds back into the numbers.

use std::fmt::Write;

use nalgebra::DVector;

use super::problem::{DataSpec, ProblemFile, ProblemKind};
use super::report::Outcome;
use crate::chebyshev::ChebyshevTask;
use crate::error::Result;

const SIZE: f64 = 480.0;
const CELLS: usize = 96;
const BALL_SEGMENTS: usize = 256;
pub const CURVE_POINTS: usize = 512;

/// SVG of the set, the ball, and the path of centers for planar center
/// problems; `None` otherwise.
pub fn svg(problem: &ProblemFile, outcome: &Outcome) -> Result<Option<String>> {
    if problem.kind != ProblemKind::Cheb {
        return Ok(None);
    }
    let task = problem.chebyshev_task()?;
    if task.set.dim() != 2 || task.maps.is_some() {
        return Ok(None);
    }
    let (Some(center), Some(radius)) = (&outcome.center, outcome.radius) else {
        return Ok(None);
    };
    let view = task.search_box()?;
    let (lo, w) = (view.lower().clone(), view.width());
    let scale = SIZE / w.max().max(1e-12);
    let px = |x: f64, y: f64| ((x - lo[0]) * scale, SIZE - (y - lo[1]) * scale);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    set_cells(&mut s, &task, &lo, &w, scale);
    let c = DVector::from_column_slice(center);
    let mut d = String::new();
    for k in 0..=BALL_SEGMENTS {
        let th = 2.0 * std::f64::consts::PI * k as f64 / BALL_SEGMENTS as f64;
        let dir = [th.cos(), th.sin()];
        let n = task.norm.apply(&dir);
        let (x, y) = px(c[0] + radius * dir[0] / n, c[1] + radius * dir[1] / n);
        let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
    }
    let _ = writeln!(s, r##"<path d="{}" fill="#e8c9a0" fill-opacity="0.35" stroke="#b5651d"/>"##, d.trim_end());
    for path in &outcome.paths {
        let pts: Vec<String> = path
            .rows
            .iter()
            .map(|r| {
                let (x, y) = px(r.x[1], r.x[2]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#444444" stroke-dasharray="3,2"/>"##, pts.join(" "));
    }
    let (x, y) = px(c[0], c[1]);
    let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#b5651d"/>"##);
    s.push_str("</svg>\n");
    Ok(Some(s))
}

fn set_cells(s: &mut String, task: &ChebyshevTask, lo: &DVector<f64>, w: &DVector<f64>, scale: f64) {
    let h = [w[0] / CELLS as f64, w[1] / CELLS as f64];
    for i in 0..CELLS {
        for j in 0..CELLS {
            let u = DVector::from_vec(vec![lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1]]);
            if task.set.contains(&u) {
                let x = i as f64 * h[0] * scale;
                let y = SIZE - (j as f64 + 1.0) * h[1] * scale;
                let _ = writeln!(
                    s,
                    r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#6a7fdb" fill-opacity="0.6"/>"##,
                    h[0] * scale + 0.05,
                    h[1] * scale + 0.05
                );
            }
        }
    }
}

/// `x, target, center` on a uniform grid of `[0, 1]` for learning runs.
pub fn learning_curve(problem: &ProblemFile, outcome: &Outcome) -> Option<String> {
    let l = problem.learning.as_ref()?;
    let c = outcome.center.as_ref()?;
    let degrees = l.search_degrees.as_ref().unwrap_or(&l.model_degrees);
    let mut s = String::from("x,target,center\n");
    for k in 0..CURVE_POINTS {
        let x = k as f64 / (CURVE_POINTS - 1) as f64;
        let target = match &l.data {
            DataSpec::Sine { amplitude, frequency } => {
                format!("{:e}", amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin())
            }
            DataSpec::Values { .. } => String::new(),
        };
        let p: f64 = degrees.iter().zip(c).map(|(&d, a)| a * x.powi(d as i32)).sum();
        let _ = writeln!(s, "{x:e},{target},{p:e}");
    }
    Some(s)
}
