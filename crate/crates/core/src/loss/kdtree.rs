//! Exact nearest-neighbor queries on 3D point sets.

use crate::math::Vec3;

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Implicit balanced tree: `order[lo..hi]` at each node, split at the median.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> KdTree {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes, 0, points.len());
        KdTree { points: points.to_vec(), order, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point; ties go to the
    /// lowest index so results match a linear scan exactly.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), &mut best);
        best
    }

    fn search(&self, q: &Vec3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, best);
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], axes: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= 1 {
        return;
    }
    let mut lo_b = Vec3::repeat(f64::INFINITY);
    let mut hi_b = Vec3::repeat(f64::NEG_INFINITY);
    for &i in &order[lo..hi] {
        lo_b = lo_b.inf(&points[i]);
        hi_b = hi_b.sup(&points[i]);
    }
    let axis = (hi_b - lo_b).imax();
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a][axis].partial_cmp(&points[b][axis]).unwrap().then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build(points, order, axes, lo, mid);
    build(points, order, axes, mid + 1, hi);
}

pub fn nearest_brute_force(points: &[Vec3], q: &Vec3) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d2 = (p - q).norm_squared();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force_including_duplicates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut pts: Vec<Vec3> = (0..300).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        // Exact duplicates and a lattice create ties.
        pts.extend(pts[..20].to_vec());
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Vec3::new(i as f64 * 0.25, j as f64 * 0.25, 0.5));
            }
        }
        let tree = KdTree::new(&pts);
        for k in 0..500 {
            let q = if k % 5 == 0 {
                Vec3::new(0.125 * (k % 9) as f64, 0.125, 0.5)
            } else {
                Vec3::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2))
            };
            assert_eq!(tree.nearest(&q), nearest_brute_force(&pts, &q));
        }
    }
}
