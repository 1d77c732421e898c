//! Boundary control cages: handle selection, mean value coordinates and the
//! linear map `x̄ = W ζ` from handle positions to pattern rest positions.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::math::{cross_2d, Vec2};
use crate::pattern::PatternMesh;
use crate::{Error, Result};

pub const DEFAULT_ANGLE_THRESHOLD_DEG: f64 = 10.0;

/// Indices (into `loop_pts`) of the cage handles, in loop order.
///
/// A vertex is a handle if it is an extreme point of the loop's convex hull
/// or if the boundary turns by more than `angle_threshold_deg` there.
pub fn select_handles(loop_pts: &[Vec2], angle_threshold_deg: f64) -> Vec<usize> {
    let n = loop_pts.len();
    if n < 3 {
        return (0..n).collect();
    }
    let on_hull = hull_flags(loop_pts);
    let thr = angle_threshold_deg.to_radians();
    let mut handles: Vec<usize> = (0..n)
        .filter(|&i| {
            let prev = loop_pts[(i + n - 1) % n];
            let next = loop_pts[(i + 1) % n];
            let a = loop_pts[i] - prev;
            let b = next - loop_pts[i];
            let turn = cross_2d(&a, &b).atan2(a.dot(&b)).abs();
            on_hull[i] || turn > thr
        })
        .collect();
    if handles.len() < 3 {
        let stride = n.div_ceil(8);
        log::warn!("handle selection found {} handles; falling back to every {stride}-th vertex", handles.len());
        handles = (0..n).step_by(stride).collect();
    }
    handles
}

/// Extreme points of the convex hull; collinear hull points are excluded.
fn hull_flags(pts: &[Vec2]) -> Vec<bool> {
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs())).max(1e-300);
    let eps = 1e-10 * scale * scale;
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        pts[a].x.partial_cmp(&pts[b].x).unwrap().then(pts[a].y.partial_cmp(&pts[b].y).unwrap())
    });
    let turn = |o: &Vec2, a: &Vec2, b: &Vec2| cross_2d(&(a - o), &(b - o));
    let chain = |iter: &mut dyn Iterator<Item = usize>| {
        let mut h: Vec<usize> = Vec::new();
        for i in iter {
            while h.len() >= 2 && turn(&pts[h[h.len() - 2]], &pts[h[h.len() - 1]], &pts[i]) <= eps {
                h.pop();
            }
            h.push(i);
        }
        h
    };
    let lower = chain(&mut order.iter().copied());
    let upper = chain(&mut order.iter().rev().copied());
    let mut flags = vec![false; pts.len()];
    for i in lower.into_iter().chain(upper) {
        flags[i] = true;
    }
    flags
}

/// Mean value coordinates of `points` with respect to the closed polygon
/// `cage` (rows: points, columns: cage vertices).
///
/// Errors with the index of the first point found outside the polygon; `panel`
/// only labels the error.
pub fn mvc_weights(points: &[Vec2], cage: &[Vec2], panel: usize) -> Result<DMatrix<f64>> {
    let m = cage.len();
    let mut w = DMatrix::zeros(points.len(), m);
    for (row, p) in points.iter().enumerate() {
        let r = mvc_row(p, cage).ok_or(Error::OutsideCage { vertex: row, panel })?;
        for (k, v) in r.into_iter().enumerate() {
            w[(row, k)] = v;
        }
    }
    Ok(w)
}

const ON_TOL: f64 = 1e-9;

fn mvc_row(p: &Vec2, cage: &[Vec2]) -> Option<Vec<f64>> {
    let m = cage.len();
    let mut row = vec![0.0; m];
    let s: Vec<Vec2> = cage.iter().map(|c| c - p).collect();
    let r: Vec<f64> = s.iter().map(|v| v.norm()).collect();

    // Vertex or edge hits first, within tolerance.
    if let Some(k) = (0..m).find(|&k| r[k] <= ON_TOL) {
        row[k] = 1.0;
        return Some(row);
    }
    for i in 0..m {
        let j = (i + 1) % m;
        let e = cage[j] - cage[i];
        let len2 = e.norm_squared();
        let t = ((p - cage[i]).dot(&e) / len2).clamp(0.0, 1.0);
        if (cage[i] + e * t - p).norm() <= ON_TOL {
            row[i] = 1.0 - t;
            row[j] = t;
            return Some(row);
        }
    }

    let mut winding = 0.0;
    let mut tan_half = vec![0.0; m];
    for i in 0..m {
        let j = (i + 1) % m;
        let a2 = cross_2d(&s[i], &s[j]);
        let d = s[i].dot(&s[j]);
        winding += a2.atan2(d);
        tan_half[i] = (r[i] * r[j] - d) / a2;
    }
    if winding.abs() < std::f64::consts::PI {
        return None;
    }
    let mut total = 0.0;
    for i in 0..m {
        let prev = (i + m - 1) % m;
        row[i] = (tan_half[prev] + tan_half[i]) / r[i];
        total += row[i];
    }
    for v in &mut row {
        *v /= total;
    }
    Some(row)
}

#[derive(Clone, Debug)]
pub struct PanelCage {
    pub panel: usize,
    /// Pattern vertex indices of the handles, in outer-loop order.
    pub handles: Vec<usize>,
    /// Pattern vertices of the panel (rows of `weights`).
    pub vertices: Vec<usize>,
    pub weights: DMatrix<f64>,
}

/// Per-panel cages. The handle vector ζ concatenates the panels' handles.
#[derive(Clone, Debug)]
pub struct ControlCage {
    pub panels: Vec<PanelCage>,
    pub num_vertices: usize,
    pub zeta0: Vec<Vec2>,
}

impl ControlCage {
    /// Build cages from each panel's outer boundary loop. Boundary vertices
    /// that would fall outside the handle polygon are promoted to handles.
    pub fn build(mesh: &PatternMesh, angle_threshold_deg: f64) -> Result<ControlCage> {
        let mut panels = Vec::with_capacity(mesh.num_panels);
        let mut zeta0 = Vec::new();
        for panel in 0..mesh.num_panels {
            let outer = mesh
                .outer_loop(panel)
                .ok_or_else(|| Error::Topology(format!("panel {panel} has no boundary loop")))?;
            let pts: Vec<Vec2> = outer.vertices.iter().map(|&v| mesh.vertices_2d[v]).collect();
            let mut sel: Vec<usize> = select_handles(&pts, angle_threshold_deg);
            loop {
                let cage: Vec<Vec2> = sel.iter().map(|&k| pts[k]).collect();
                let outside: Vec<usize> =
                    (0..pts.len()).filter(|&k| !sel.contains(&k) && mvc_row(&pts[k], &cage).is_none()).collect();
                if outside.is_empty() {
                    break;
                }
                log::warn!("panel {panel}: promoting {} boundary vertices outside the cage to handles", outside.len());
                sel.extend(outside);
                sel.sort_unstable();
            }
            let handles: Vec<usize> = sel.iter().map(|&k| outer.vertices[k]).collect();
            let cage: Vec<Vec2> = handles.iter().map(|&v| mesh.vertices_2d[v]).collect();
            let vertices: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| mesh.panel_of_vertex[v] == panel).collect();
            let pv: Vec<Vec2> = vertices.iter().map(|&v| mesh.vertices_2d[v]).collect();
            let weights = mvc_weights(&pv, &cage, panel).map_err(|e| match e {
                Error::OutsideCage { vertex, panel } => Error::OutsideCage { vertex: vertices[vertex], panel },
                e => e,
            })?;
            zeta0.extend(cage);
            panels.push(PanelCage { panel, handles, vertices, weights });
        }
        Ok(ControlCage { panels, num_vertices: mesh.num_vertices(), zeta0 })
    }

    pub fn num_handles(&self) -> usize {
        self.zeta0.len()
    }

    /// x̄ = W ζ.
    pub fn positions(&self, zeta: &[Vec2]) -> Result<Vec<Vec2>> {
        if zeta.len() != self.num_handles() {
            return Err(Error::Dimension(format!("ζ has {} handles, cage {}", zeta.len(), self.num_handles())));
        }
        let mut out = vec![Vec2::zeros(); self.num_vertices];
        let mut off = 0;
        for pc in &self.panels {
            let h = pc.handles.len();
            for (row, &v) in pc.vertices.iter().enumerate() {
                let mut p = Vec2::zeros();
                for k in 0..h {
                    p += zeta[off + k] * pc.weights[(row, k)];
                }
                out[v] = p;
            }
            off += h;
        }
        Ok(out)
    }

    /// Deform the pattern; rejects any inverted rest triangle.
    pub fn deform(&self, mesh: &PatternMesh, zeta: &[Vec2]) -> Result<PatternMesh> {
        mesh.with_rest_positions(self.positions(zeta)?)
    }

    /// dφ/dζ = Wᵀ dφ/dx̄.
    pub fn chain_gradient(&self, d_xbar: &[Vec2]) -> Vec<Vec2> {
        let mut out = vec![Vec2::zeros(); self.num_handles()];
        let mut off = 0;
        for pc in &self.panels {
            for (row, &v) in pc.vertices.iter().enumerate() {
                for k in 0..pc.handles.len() {
                    out[off + k] += d_xbar[v] * pc.weights[(row, k)];
                }
            }
            off += pc.handles.len();
        }
        out
    }

    /// Handle indices and positions per panel, one record per line.
    pub fn export(&self, zeta: &[Vec2]) -> String {
        let mut s = String::new();
        let mut off = 0;
        for pc in &self.panels {
            let _ = writeln!(s, "panel {} handles {}", pc.panel, pc.handles.len());
            for (k, &h) in pc.handles.iter().enumerate() {
                let z = zeta[off + k];
                let _ = writeln!(s, "handle {h} {} {}", z.x, z.y);
            }
            off += pc.handles.len();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect_loop(nx: usize, ny: usize) -> Vec<Vec2> {
        let mut p = Vec::new();
        for i in 0..nx {
            p.push(Vec2::new(i as f64 / nx as f64 * 2.0, 0.0));
        }
        for j in 0..ny {
            p.push(Vec2::new(2.0, j as f64 / ny as f64));
        }
        for i in 0..nx {
            p.push(Vec2::new(2.0 - i as f64 / nx as f64 * 2.0, 1.0));
        }
        for j in 0..ny {
            p.push(Vec2::new(0.0, 1.0 - j as f64 / ny as f64));
        }
        p
    }

    #[test]
    fn rectangle_selects_corners() {
        let l = rect_loop(6, 3);
        assert_eq!(select_handles(&l, 10.0), vec![0, 6, 9, 15]);
    }

    #[test]
    fn regular_polygon_is_all_hull() {
        let l: Vec<Vec2> = (0..64)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 64.0;
                Vec2::new(t.cos(), t.sin())
            })
            .collect();
        assert_eq!(select_handles(&l, 10.0).len(), 64);
    }

    #[test]
    fn mvc_center_indicator_and_edge() {
        let sq = [Vec2::new(0., 0.), Vec2::new(1., 0.), Vec2::new(1., 1.), Vec2::new(0., 1.)];
        let w = mvc_weights(&[Vec2::new(0.5, 0.5), Vec2::new(1., 0.), Vec2::new(0.25, 1.0)], &sq, 0).unwrap();
        for k in 0..4 {
            assert!((w[(0, k)] - 0.25).abs() < 1e-12);
        }
        assert_eq!(w.row(1).iter().copied().collect::<Vec<_>>(), vec![0., 1., 0., 0.]);
        assert!((w[(2, 2)] - 0.25).abs() < 1e-12 && (w[(2, 3)] - 0.75).abs() < 1e-12);
        assert!(matches!(
            mvc_weights(&[Vec2::new(2.0, 0.5)], &sq, 3),
            Err(Error::OutsideCage { vertex: 0, panel: 3 })
        ));
    }

    proptest! {
        #[test]
        fn mvc_reproduces_interior_points(u in 0.01f64..0.99, v in 0.01f64..0.99) {
            // Concave L-shaped cage.
            let cage = [Vec2::new(0., 0.), Vec2::new(2., 0.), Vec2::new(2., 1.), Vec2::new(1., 1.),
                        Vec2::new(1., 2.), Vec2::new(0., 2.)];
            let p = if u < 0.5 { Vec2::new(2.0 * u * 2.0, v) } else { Vec2::new(v, 1.0 + (u - 0.5) * 2.0) };
            let w = mvc_weights(&[p], &cage, 0).unwrap();
            let sum: f64 = w.row(0).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            let mut q = Vec2::zeros();
            for k in 0..cage.len() { q += cage[k] * w[(0, k)]; }
            prop_assert!((q - p).norm() < 1e-9);
        }

        #[test]
        fn handles_invariant_under_rigid_motion(theta in 0.0f64..6.28, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
            let l = rect_loop(5, 4);
            let (s, c) = theta.sin_cos();
            let moved: Vec<Vec2> = l.iter().map(|p| Vec2::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty)).collect();
            prop_assert_eq!(select_handles(&l, 10.0), select_handles(&moved, 10.0));
        }
    }
}
