//! Squared distance of labeled garment boundaries to target polylines.

use crate::math::Vec3;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub label: String,
    pub points: Vec<Vec3>,
    pub closed: bool,
}

impl Polyline {
    /// Closest point on the polyline.
    pub fn closest(&self, q: &Vec3) -> Vec3 {
        let n = self.points.len();
        let segs = if self.closed { n } else { n - 1 };
        let mut best = (f64::INFINITY, self.points[0]);
        for s in 0..segs {
            let a = self.points[s];
            let b = self.points[(s + 1) % n];
            let e = b - a;
            let len2 = e.norm_squared();
            let t = if len2 > 0.0 { ((q - a).dot(&e) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let p = a + e * t;
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, p);
            }
        }
        best.1
    }
}

pub struct BoundaryEval {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

/// Σ over labeled boundary vertices of the squared distance to the target
/// polyline with the same label. Feet are held fixed for the gradient.
pub fn boundary_loss(x: &[Vec3], labeled: &[(String, Vec<usize>)], targets: &[Polyline]) -> Result<BoundaryEval> {
    let missing: Vec<String> = labeled
        .iter()
        .filter(|(l, _)| !targets.iter().any(|t| &t.label == l))
        .map(|(l, _)| l.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnmatchedLabels(missing));
    }
    let mut grad = vec![Vec3::zeros(); x.len()];
    let mut value = 0.0;
    for (label, verts) in labeled {
        let target = targets.iter().find(|t| &t.label == label).expect("checked");
        for &v in verts {
            let foot = target.closest(&x[v]);
            let d = x[v] - foot;
            value += d.norm_squared();
            grad[v] += d * 2.0;
        }
    }
    Ok(BoundaryEval { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn line() -> Polyline {
        Polyline { label: "hem".into(), points: vec![Vec3::zeros(), Vec3::new(1., 0., 0.), Vec3::new(1., 1., 0.)], closed: false }
    }

    #[test]
    fn on_polyline_is_zero() {
        let x = vec![Vec3::new(0.5, 0., 0.), Vec3::new(1., 0.3, 0.)];
        let r = boundary_loss(&x, &[("hem".into(), vec![0, 1])], &[line()]).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn point_off_segment_interior() {
        let d = 0.2;
        let x = vec![Vec3::new(0.4, -d, 0.0)];
        let r = boundary_loss(&x, &[("hem".into(), vec![0])], &[line()]).unwrap();
        assert!((r.value - d * d).abs() < 1e-15);
        assert!((r.grad[0] - Vec3::new(0.0, -2.0 * d, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unmatched_label_errors() {
        let err = boundary_loss(&[Vec3::zeros()], &[("cuff".into(), vec![0])], &[line()]);
        assert!(matches!(err, Err(Error::UnmatchedLabels(l)) if l == vec!["cuff".to_string()]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec3> = (0..8).map(|_| Vec3::new(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5), rng.gen_range(-0.3..0.3))).collect();
        let lab = [("hem".to_string(), (0..8).collect::<Vec<_>>())];
        let r = boundary_loss(&x, &lab, &[line()]).unwrap();
        let h = 1e-6;
        for i in 0..8 {
            for k in 0..3 {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[i][k] += h;
                b[i][k] -= h;
                let fd = (boundary_loss(&a, &lab, &[line()]).unwrap().value - boundary_loss(&b, &lab, &[line()]).unwrap().value) / (2.0 * h);
                assert!((fd - r.grad[i][k]).abs() <= 1e-6 * r.grad[i][k].abs().max(1e-2), "{fd} {}", r.grad[i][k]);
            }
        }
    }
}
