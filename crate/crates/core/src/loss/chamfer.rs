//! Symmetric Chamfer distance with gradients for the first set.

use super::kdtree::{nearest_brute_force, KdTree};
use crate::math::Vec3;

#[derive(Clone, Debug)]
pub struct ChamferEval {
    pub value: f64,
    /// ∂/∂a (matches held fixed).
    pub grad: Vec<Vec3>,
    /// Nearest b for each a, nearest a for each b.
    pub a_to_b: Vec<usize>,
    pub b_to_a: Vec<usize>,
}

/// mean_a min_b |a − b|² + mean_b min_a |a − b|².
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> ChamferEval {
    let tb = KdTree::new(b);
    let ta = KdTree::new(a);
    let ab: Vec<(usize, f64)> = a.iter().map(|p| tb.nearest(p)).collect();
    let ba: Vec<(usize, f64)> = b.iter().map(|p| ta.nearest(p)).collect();
    assemble(a, b, ab, ba)
}

pub fn chamfer_brute_force(a: &[Vec3], b: &[Vec3]) -> ChamferEval {
    let ab = a.iter().map(|p| nearest_brute_force(b, p)).collect();
    let ba = b.iter().map(|p| nearest_brute_force(a, p)).collect();
    assemble(a, b, ab, ba)
}

fn assemble(a: &[Vec3], b: &[Vec3], ab: Vec<(usize, f64)>, ba: Vec<(usize, f64)>) -> ChamferEval {
    assert!(!a.is_empty() && !b.is_empty(), "Chamfer distance needs nonempty sets");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut grad = vec![Vec3::zeros(); a.len()];
    let mut sa = 0.0;
    for (i, &(j, d2)) in ab.iter().enumerate() {
        sa += d2;
        grad[i] += (a[i] - b[j]) * (2.0 / na);
    }
    let mut sb = 0.0;
    for (j, &(i, d2)) in ba.iter().enumerate() {
        sb += d2;
        grad[i] += (a[i] - b[j]) * (2.0 / nb);
    }
    ChamferEval {
        value: sa / na + sb / nb,
        grad,
        a_to_b: ab.into_iter().map(|m| m.0).collect(),
        b_to_a: ba.into_iter().map(|m| m.0).collect(),
    }
}

/// Reporting metric: symmetric Chamfer distance in m².
pub fn metric_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    chamfer(a, b).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = cloud(50, 1);
        let c = chamfer(&a, &a);
        assert_eq!(c.value, 0.0);
        assert!(c.grad.iter().all(|g| *g == Vec3::zeros()));
    }

    #[test]
    fn two_points() {
        let d = 0.3;
        let c = chamfer(&[Vec3::zeros()], &[Vec3::new(d, 0.0, 0.0)]);
        assert!((c.value - 2.0 * d * d).abs() < 1e-15);
    }

    #[test]
    fn accelerated_equals_brute_force_exactly() {
        let (a, b) = (cloud(500, 2), cloud(500, 3));
        let fast = chamfer(&a, &b);
        let slow = chamfer_brute_force(&a, &b);
        assert_eq!(fast.value, slow.value);
        assert_eq!(fast.a_to_b, slow.a_to_b);
        assert_eq!(fast.b_to_a, slow.b_to_a);
    }

    #[test]
    fn symmetric_for_equal_sizes() {
        let (a, b) = (cloud(80, 4), cloud(80, 5));
        assert_eq!(chamfer(&a, &b).value, chamfer(&b, &a).value);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (a, b) = (cloud(30, 6), cloud(40, 7));
        let c = chamfer(&a, &b);
        let h = 1e-7;
        for i in 0..a.len() {
            for k in 0..3 {
                let mut ap = a.clone();
                ap[i][k] += h;
                let mut am = a.clone();
                am[i][k] -= h;
                let fd = (chamfer(&ap, &b).value - chamfer(&am, &b).value) / (2.0 * h);
                assert!((fd - c.grad[i][k]).abs() <= 1e-5 * c.grad[i][k].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn translated_dense_mesh() {
        let mut a = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                a.push(Vec3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let t = Vec3::new(0.0, 0.0, 0.002);
        let b: Vec<Vec3> = a.iter().map(|p| p + t).collect();
        assert!((metric_chamfer(&a, &b) - 2.0 * t.norm_squared()).abs() < 1e-15);
    }
}
