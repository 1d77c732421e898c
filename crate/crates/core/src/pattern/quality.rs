use crate::math::{lift, Vec2, Vec3};

/// Triangle conditioning quality `4√3·A / Σℓ²`: 1 for equilateral, 0 for
/// degenerate.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityStats {
    pub per_face: Vec<f64>,
    pub min: f64,
    pub mean: f64,
}

pub fn triangle_quality(vertices: &[Vec3], faces: &[[usize; 3]]) -> QualityStats {
    let per_face: Vec<f64> = faces
        .iter()
        .map(|f| face_quality(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
        .collect();
    let min = per_face.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = if per_face.is_empty() {
        0.0
    } else {
        per_face.iter().sum::<f64>() / per_face.len() as f64
    };
    QualityStats {
        per_face,
        min: if min.is_finite() { min } else { 0.0 },
        mean,
    }
}

pub fn triangle_quality_2d(vertices: &[Vec2], faces: &[[usize; 3]]) -> QualityStats {
    let lifted: Vec<Vec3> = vertices.iter().map(lift).collect();
    triangle_quality(&lifted, faces)
}

fn face_quality(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let sum_sq = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
    if sum_sq <= 0.0 {
        return 0.0;
    }
    (4.0 * 3f64.sqrt() * area / sum_sq).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let eq = [Vec2::new(0., 0.), Vec2::new(1., 0.), Vec2::new(0.5, 3f64.sqrt() / 2.)];
        assert!((triangle_quality_2d(&eq, &[[0, 1, 2]]).min - 1.0).abs() < 1e-12);
        let flat = [Vec2::new(0., 0.), Vec2::new(1., 0.), Vec2::new(2., 0.)];
        assert_eq!(triangle_quality_2d(&flat, &[[0, 1, 2]]).min, 0.0);
        let right = [Vec2::new(0., 0.), Vec2::new(1., 0.), Vec2::new(0., 1.)];
        // area 0.5, Σℓ² = 4
        let expected = 4.0 * 3f64.sqrt() * 0.5 / 4.0;
        let q = triangle_quality_2d(&right, &[[0, 1, 2]]);
        assert!((q.min - expected).abs() < 1e-12);
        assert!((q.min - 0.866).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn scale_invariant(pts in proptest::collection::vec(-1.0f64..1.0, 6), s in 0.01f64..100.0) {
            let v: Vec<Vec2> = pts.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
            let scaled: Vec<Vec2> = v.iter().map(|p| p * s).collect();
            let a = triangle_quality_2d(&v, &[[0, 1, 2]]).min;
            let b = triangle_quality_2d(&scaled, &[[0, 1, 2]]).min;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
