//! Closest-point queries on a posed body mesh with signed distance from
//! angle-weighted pseudo-normals.

use std::collections::HashMap;

use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub point: Vec3,
    /// Outward unit normal at the hit (direction to the query when away
    /// from the surface, else the pseudo-normal of the closest feature).
    pub normal: Vec3,
    pub face: usize,
    pub bary: [f64; 3],
    pub signed_distance: f64,
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb { lo: Vec3::repeat(f64::INFINITY), hi: Vec3::repeat(f64::NEG_INFINITY) }
    }
    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }
    fn dist2(&self, p: &Vec3) -> f64 {
        let d = (self.lo - p).sup(&(p - self.hi)).sup(&Vec3::zeros());
        d.norm_squared()
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bbox: Aabb, faces: Vec<usize> },
    Inner { bbox: Aabb, left: usize, right: usize },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

/// Feature of a triangle that contains the closest point.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Feature {
    Face,
    Edge(usize, usize),
    Vertex(usize),
}

/// Posed body with normals and a bounding-volume hierarchy.
#[derive(Clone, Debug)]
pub struct PosedBody {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    edge_normals: HashMap<(usize, usize), Vec3>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl PosedBody {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> PosedBody {
        let face_normals: Vec<Vec3> = faces
            .iter()
            .map(|f| {
                let n = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
                let l = n.norm();
                if l > 0.0 {
                    n / l
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
        let mut vertex_normals = vec![Vec3::zeros(); vertices.len()];
        let mut edge_normals: HashMap<(usize, usize), Vec3> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let u = (vertices[b] - vertices[a]).normalize();
                let v = (vertices[c] - vertices[a]).normalize();
                let angle = u.dot(&v).clamp(-1.0, 1.0).acos();
                if angle.is_finite() {
                    vertex_normals[a] += face_normals[fi] * angle;
                }
                *edge_normals.entry((a.min(b), a.max(b))).or_insert_with(Vec3::zeros) += face_normals[fi];
            }
        }
        for n in vertex_normals.iter_mut().chain(edge_normals.values_mut()) {
            let l = n.norm();
            if l > 0.0 {
                *n /= l;
            }
        }
        let mut body = PosedBody { vertices, faces, face_normals, vertex_normals, edge_normals, nodes: Vec::new() };
        let mut ids: Vec<usize> = (0..body.faces.len()).collect();
        if !ids.is_empty() {
            body.build(&mut ids);
        }
        body
    }

    fn face_box(&self, f: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &v in &self.faces[f] {
            b.grow(&self.vertices[v]);
        }
        b
    }

    fn build(&mut self, ids: &mut [usize]) -> usize {
        let mut bbox = Aabb::empty();
        for &f in ids.iter() {
            let fb = self.face_box(f);
            bbox.grow(&fb.lo);
            bbox.grow(&fb.hi);
        }
        if ids.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bbox, faces: ids.to_vec() });
            return self.nodes.len() - 1;
        }
        let ext = bbox.hi - bbox.lo;
        let axis = ext.imax();
        let centroid = |f: usize| -> f64 { self.faces[f].iter().map(|&v| self.vertices[v][axis]).sum::<f64>() };
        ids.sort_by(|&a, &b| centroid(a).partial_cmp(&centroid(b)).unwrap().then(a.cmp(&b)));
        let mid = ids.len() / 2;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { bbox, faces: Vec::new() });
        let (l, r) = ids.split_at_mut(mid);
        let left = self.build(l);
        let right = self.build(r);
        self.nodes[slot] = Node::Inner { bbox, left, right };
        slot
    }

    fn face_closest(&self, f: usize, q: &Vec3) -> (Vec3, [f64; 3], Feature) {
        let [a, b, c] = self.faces[f];
        closest_on_triangle(q, &self.vertices[a], &self.vertices[b], &self.vertices[c], [a, b, c])
    }

    pub fn closest_point(&self, q: &Vec3) -> ClosestHit {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros(), [0.0; 3], Feature::Face);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bbox().dist2(q) >= best.0 {
                continue;
            }
            match node {
                Node::Leaf { faces, .. } => {
                    for &f in faces {
                        let (p, bary, feat) = self.face_closest(f, q);
                        let d2 = (p - q).norm_squared();
                        if d2 < best.0 || (d2 == best.0 && f < best.1) {
                            best = (d2, f, p, bary, feat);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let (dl, dr) = (self.nodes[*left].bbox().dist2(q), self.nodes[*right].bbox().dist2(q));
                    if dl < dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        self.make_hit(q, best.1, best.2, best.3, best.4)
    }

    fn pseudo_normal(&self, face: usize, feat: Feature) -> Vec3 {
        match feat {
            Feature::Face => self.face_normals[face],
            Feature::Edge(a, b) => self.edge_normals[&(a.min(b), a.max(b))],
            Feature::Vertex(v) => self.vertex_normals[v],
        }
    }

    fn make_hit(&self, q: &Vec3, face: usize, point: Vec3, bary: [f64; 3], feat: Feature) -> ClosestHit {
        let pn = self.pseudo_normal(face, feat);
        let diff = q - point;
        let dist = diff.norm();
        let sign = if diff.dot(&pn) < 0.0 { -1.0 } else { 1.0 };
        let normal = if dist > 1e-12 { diff / dist * sign } else { pn };
        ClosestHit { point, normal, face, bary, signed_distance: sign * dist }
    }

    /// Angle-weighted unit vertex normals.
    pub fn vertex_normals_unit(&self) -> Vec<Vec3> {
        self.vertex_normals.clone()
    }

    /// Point on `face` with barycentric coordinates `bary`.
    pub fn surface_point(&self, face: usize, bary: &[f64; 3]) -> Vec3 {
        let f = self.faces[face];
        self.vertices[f[0]] * bary[0] + self.vertices[f[1]] * bary[1] + self.vertices[f[2]] * bary[2]
    }
}

/// O(#faces) reference query used to validate the hierarchy.
pub fn closest_point_brute_force(body: &PosedBody, q: &Vec3) -> ClosestHit {
    let mut best = (f64::INFINITY, 0, Vec3::zeros(), [0.0; 3], Feature::Face);
    for f in 0..body.faces.len() {
        let (p, bary, feat) = body.face_closest(f, q);
        let d2 = (p - q).norm_squared();
        if d2 < best.0 {
            best = (d2, f, p, bary, feat);
        }
    }
    body.make_hit(q, best.1, best.2, best.3, best.4)
}

/// Closest point on triangle (a, b, c) by Voronoi-region classification.
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, ids: [usize; 3]) -> (Vec3, [f64; 3], Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0], Feature::Vertex(ids[0]));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0], Feature::Vertex(ids[1]));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0], Feature::Edge(ids[0], ids[1]));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0], Feature::Vertex(ids[2]));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w], Feature::Edge(ids[0], ids[2]));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w], Feature::Edge(ids[1], ids[2]));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w], Feature::Face)
}

#[cfg(test)]
pub(crate) fn uv_sphere(radius: f64, center: Vec3, rings: usize, segs: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    super::humanoid::sphere(center, radius, rings, segs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sphere_body() -> PosedBody {
        let (v, f) = uv_sphere(1.0, Vec3::zeros(), 24, 48);
        PosedBody::new(v, f)
    }

    #[test]
    fn vertex_query_has_zero_distance() {
        let b = sphere_body();
        let h = b.closest_point(&b.vertices[30]);
        assert!(h.signed_distance.abs() < 1e-12);
    }

    #[test]
    fn sphere_distance_matches_analytic() {
        let b = sphere_body();
        let h = b.closest_point(&Vec3::new(2.0, 0.0, 0.0));
        assert!((h.signed_distance - 1.0).abs() < 0.01, "{}", h.signed_distance);
        assert!((h.normal - Vec3::x()).norm() < 1e-9);
        let inside = b.closest_point(&Vec3::new(0.0, 0.3, 0.1));
        assert!(inside.signed_distance < 0.0);
        assert!(inside.normal.y > 0.9);
    }

    #[test]
    fn bvh_matches_brute_force() {
        let b = crate::body::humanoid().pose(&[0.0; 4], &vec![0.0; 50]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let q = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.4..0.4), rng.gen_range(0.0..1.8));
            let a = b.closest_point(&q);
            let r = closest_point_brute_force(&b, &q);
            assert!((a.signed_distance - r.signed_distance).abs() < 1e-12);
            assert!((a.point - r.point).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn distance_is_one_lipschitz(a in proptest::collection::vec(-2.0f64..2.0, 3),
                                     b in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let body = sphere_body();
            let (p, q) = (Vec3::new(a[0], a[1], a[2]), Vec3::new(b[0], b[1], b[2]));
            let dp = body.closest_point(&p).signed_distance;
            let dq = body.closest_point(&q).signed_distance;
            prop_assert!((dp - dq).abs() <= (p - q).norm() + 1e-12);
        }
    }
}
