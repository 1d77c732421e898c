//! Seam-length regularizer on the 2D pattern.

use crate::math::Vec2;
use crate::pattern::SeamPair;

pub struct SeamEval {
    pub value: f64,
    pub grad: Vec<Vec2>,
}

/// Per paired edge `d = |e_a|² − |e_b|²`. The default sums `d²`; `signed`
/// sums `d` as literally written for the seam-length term.
pub fn seam_length_loss(p: &[Vec2], seams: &[SeamPair], signed: bool) -> SeamEval {
    let mut grad = vec![Vec2::zeros(); p.len()];
    let mut value = 0.0;
    for s in seams {
        for k in 0..s.edge_count() {
            let (a0, a1) = (s.side_a[k], s.side_a[k + 1]);
            let (b0, b1) = (s.side_b[k], s.side_b[k + 1]);
            let ea = p[a1] - p[a0];
            let eb = p[b1] - p[b0];
            let d = ea.norm_squared() - eb.norm_squared();
            let c = if signed {
                value += d;
                1.0
            } else {
                value += d * d;
                2.0 * d
            };
            grad[a1] += ea * (2.0 * c);
            grad[a0] -= ea * (2.0 * c);
            grad[b1] -= eb * (2.0 * c);
            grad[b0] += eb * (2.0 * c);
        }
    }
    SeamEval { value, grad }
}

/// Largest relative difference of paired chain lengths, measured on the
/// given 2D or 3D positions.
pub fn max_seam_mismatch<const D: usize>(p: &[nalgebra::SVector<f64, D>], seams: &[SeamPair]) -> f64 {
    let chain = |c: &[usize]| -> f64 { c.windows(2).map(|w| (p[w[1]] - p[w[0]]).norm()).sum() };
    seams
        .iter()
        .map(|s| {
            let (la, lb) = (chain(&s.side_a), chain(&s.side_b));
            (la - lb).abs() / la.max(lb)
        })
        .fold(0.0, f64::max)
}
