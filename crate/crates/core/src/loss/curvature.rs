//! Boundary-curvature regularizer: at every boundary vertex the two outgoing
//! edges are compared with the reference pattern's after the best-fitting
//! scaled rotation `T = [[a, −b], [b, a]]`.

use crate::math::{cross_2d, perp, Vec2};

pub struct CurvatureEval {
    pub value: f64,
    pub grad: Vec<Vec2>,
    pub skipped: usize,
}

/// `loops` are vertex cycles; `weights`, when given, is per pattern vertex.
///
/// The gradient includes the dependence of `T` on the current edges: `T`
/// minimizes the per-edge residuals, not the summed residual penalized
/// here, so no envelope cancellation applies.
pub fn curvature_loss(p: &[Vec2], p_ref: &[Vec2], loops: &[Vec<usize>], weights: Option<&[f64]>) -> CurvatureEval {
    let mut grad = vec![Vec2::zeros(); p.len()];
    let mut value = 0.0;
    let mut skipped = 0;
    for l in loops {
        let n = l.len();
        if n < 3 {
            continue;
        }
        for k in 0..n {
            let (iv, nx, pv) = (l[k], l[(k + 1) % n], l[(k + n - 1) % n]);
            let e = [p[nx] - p[iv], p[pv] - p[iv]];
            let eb = [p_ref[nx] - p_ref[iv], p_ref[pv] - p_ref[iv]];
            let nrm = eb[0].norm_squared() + eb[1].norm_squared();
            if nrm <= 1e-24 {
                skipped += 1;
                log::warn!("curvature stencil at vertex {iv} has zero rest edges; skipped");
                continue;
            }
            let w = weights.map_or(1.0, |w| w[iv]);
            let a = (e[0].dot(&eb[0]) + e[1].dot(&eb[1])) / nrm;
            let b = (cross_2d(&eb[0], &e[0]) + cross_2d(&eb[1], &e[1])) / nrm;
            let s = eb[0] + eb[1];
            let sp = perp(&s);
            let r = e[0] + e[1] - (s * a + sp * b);
            value += w * r.norm_squared();
            let (sr, spr) = (s.dot(&r) / nrm, sp.dot(&r) / nrm);
            let de: Vec<Vec2> = (0..2).map(|j| (r - eb[j] * sr - perp(&eb[j]) * spr) * (2.0 * w)).collect();
            grad[nx] += de[0];
            grad[pv] += de[1];
            grad[iv] -= de[0] + de[1];
        }
    }
    CurvatureEval { value, grad, skipped }
}
