//! Sewing patterns: 2D panels sharing one triangulation, seams, boundary
//! loops and the rest-shape matrices the simulator consumes.

mod io;
mod quality;

use std::collections::{BTreeMap, HashMap};

pub use io::{load_pattern, read_obj, read_sidecar, save_pattern, write_obj, write_points_obj, write_sidecar, ObjMesh, PatternSidecar};
pub use quality::{triangle_quality, triangle_quality_2d, QualityStats};

use crate::math::{signed_area_2d, Mat2, Vec2, Vec3};
use crate::{Error, Result};

/// Minimum |det D̄| (m²) for a face to count as non-degenerate.
pub const DEGENERATE_DET: f64 = 1e-12;

/// Two boundary chains of (usually different) panels sewn together
/// vertex-for-vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct SeamPair {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
}

impl SeamPair {
    pub fn new(side_a: Vec<usize>, side_b: Vec<usize>) -> Self {
        Self { side_a, side_b }
    }

    pub fn edge_count(&self) -> usize {
        self.side_a.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLoop {
    pub panel: usize,
    /// Vertex cycle; the closing edge is implied. Outer loops run
    /// counter-clockwise, hole loops clockwise.
    pub vertices: Vec<usize>,
}

/// A validated sewing pattern.
#[derive(Clone, Debug)]
pub struct PatternMesh {
    pub vertices_2d: Vec<Vec2>,
    /// Optional initial 3D placement, one point per pattern vertex.
    pub embedding: Option<Vec<Vec3>>,
    pub faces: Vec<[usize; 3]>,
    pub panel_of_face: Vec<usize>,
    pub panel_of_vertex: Vec<usize>,
    pub num_panels: usize,
    pub seams: Vec<SeamPair>,
    pub boundary_loops: Vec<BoundaryLoop>,
}

impl PatternMesh {
    /// Validate the inputs and derive panels and boundary loops.
    pub fn new(
        vertices_2d: Vec<Vec2>,
        faces: Vec<[usize; 3]>,
        seams: Vec<SeamPair>,
        embedding: Option<Vec<Vec3>>,
    ) -> Result<Self> {
        let nv = vertices_2d.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!("face {fi} references a missing vertex")));
            }
            let area = signed_area_2d(&vertices_2d[f[0]], &vertices_2d[f[1]], &vertices_2d[f[2]]);
            if area <= 0.0 {
                return Err(Error::InvertedFace { face: fi, area });
            }
        }
        if let Some(e) = &embedding {
            if e.len() != nv {
                return Err(Error::Dimension(format!(
                    "embedding has {} points for {nv} vertices",
                    e.len()
                )));
            }
        }
        let (panel_of_face, panel_of_vertex, num_panels) = connected_panels(nv, &faces);
        let mut mesh = PatternMesh {
            vertices_2d,
            embedding,
            faces,
            panel_of_face,
            panel_of_vertex,
            num_panels,
            seams: Vec::new(),
            boundary_loops: Vec::new(),
        };
        mesh.boundary_loops = mesh.extract_boundary_loops()?;
        for (i, s) in seams.iter().enumerate() {
            mesh.validate_seam(i, s)?;
        }
        mesh.seams = seams;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices_2d.len()
    }

    /// Same topology, new rest coordinates. Fails with the list of faces that
    /// would become inverted.
    pub fn with_rest_positions(&self, positions: Vec<Vec2>) -> Result<PatternMesh> {
        if positions.len() != self.num_vertices() {
            return Err(Error::Dimension(format!(
                "{} rest positions for {} vertices",
                positions.len(),
                self.num_vertices()
            )));
        }
        let inverted = inverted_faces(&positions, &self.faces);
        if !inverted.is_empty() {
            return Err(Error::InvertedAfterDeform(inverted));
        }
        let mut mesh = self.clone();
        mesh.vertices_2d = positions;
        Ok(mesh)
    }

    /// Ordered boundary cycles, grouped by panel, each starting at its lowest
    /// vertex index.
    pub fn extract_boundary_loops(&self) -> Result<Vec<BoundaryLoop>> {
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut sorted: Vec<_> = edge_count.iter().filter(|(_, &c)| c > 2).collect();
        sorted.sort();
        if let Some((&(a, b), &count)) = sorted.first() {
            return Err(Error::NonManifoldEdge { a, b, count });
        }
        // Directed boundary half-edges following face orientation.
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if edge_count[&(a.min(b), a.max(b))] == 1 && next.insert(a, b).is_some() {
                    return Err(Error::NonManifoldVertex { vertex: a });
                }
            }
        }
        let mut loops = Vec::new();
        while let Some((&start, _)) = next.iter().next() {
            let mut cycle = vec![start];
            let mut cur = next.remove(&start).expect("present");
            while cur != start {
                cycle.push(cur);
                cur = next
                    .remove(&cur)
                    .ok_or(Error::NonManifoldVertex { vertex: cur })?;
            }
            loops.push(BoundaryLoop {
                panel: self.panel_of_vertex[start],
                vertices: cycle,
            });
        }
        loops.sort_by_key(|l| (l.panel, l.vertices[0]));
        Ok(loops)
    }

    /// Boundary edge count (edges with exactly one incident face).
    pub fn boundary_edge_count(&self) -> usize {
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edge_count.values().filter(|&&c| c == 1).count()
    }

    /// Outer (counter-clockwise, largest) boundary loop of each panel.
    pub fn outer_loop(&self, panel: usize) -> Option<&BoundaryLoop> {
        self.boundary_loops
            .iter()
            .filter(|l| l.panel == panel)
            .max_by(|a, b| {
                self.loop_area(a)
                    .partial_cmp(&self.loop_area(b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    }

    /// Signed area enclosed by a loop.
    pub fn loop_area(&self, l: &BoundaryLoop) -> f64 {
        polygon_area(l.vertices.iter().map(|&i| self.vertices_2d[i]))
    }

    pub fn panel_area(&self, panel: usize) -> f64 {
        self.faces
            .iter()
            .zip(&self.panel_of_face)
            .filter(|(_, &p)| p == panel)
            .map(|(f, _)| self.face_area(f))
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(|f| self.face_area(f)).sum()
    }

    fn face_area(&self, f: &[usize; 3]) -> f64 {
        signed_area_2d(&self.vertices_2d[f[0]], &self.vertices_2d[f[1]], &self.vertices_2d[f[2]])
    }

    fn validate_seam(&self, index: usize, seam: &SeamPair) -> Result<()> {
        let fail = |msg: String| Error::InvalidSeam { index, msg };
        if seam.side_a.len() != seam.side_b.len() {
            return Err(fail(format!(
                "chain lengths differ ({} vs {})",
                seam.side_a.len(),
                seam.side_b.len()
            )));
        }
        if seam.side_a.len() < 2 {
            return Err(fail("chains need at least 2 vertices".into()));
        }
        let nv = self.num_vertices();
        let mut boundary_edges = std::collections::HashSet::new();
        for l in &self.boundary_loops {
            for k in 0..l.vertices.len() {
                let (a, b) = (l.vertices[k], l.vertices[(k + 1) % l.vertices.len()]);
                boundary_edges.insert((a.min(b), a.max(b)));
            }
        }
        for chain in [&seam.side_a, &seam.side_b] {
            if chain.iter().any(|&v| v >= nv) {
                return Err(fail("chain references a missing vertex".into()));
            }
            for w in chain.windows(2) {
                if !boundary_edges.contains(&(w[0].min(w[1]), w[0].max(w[1]))) {
                    return Err(fail(format!("({}, {}) is not a boundary edge", w[0], w[1])));
                }
            }
        }
        let interior = |c: &Vec<usize>| c[1..c.len() - 1].to_vec();
        let a_int = interior(&seam.side_a);
        if seam.side_b.iter().any(|v| a_int.contains(v)) || interior(&seam.side_b).iter().any(|v| seam.side_a.contains(v)) {
            return Err(fail("chains share interior vertices".into()));
        }
        Ok(())
    }

    /// Rest-space edge matrices, areas and lumped masses.
    pub fn build_rest_shape(&self, density: f64) -> Result<RestShapeData> {
        build_rest_shape(self, density)
    }
}

/// Per-face rest data plus per-vertex lumped mass.
#[derive(Clone, Debug)]
pub struct RestShapeData {
    /// D̄ = [x̄₀ − x̄₂ | x̄₁ − x̄₂]
    pub dm: Vec<Mat2>,
    pub dm_inv: Vec<Mat2>,
    pub area: Vec<f64>,
    pub mass: Vec<f64>,
    pub density: f64,
}

pub fn rest_matrix(a: &Vec2, b: &Vec2, c: &Vec2) -> Mat2 {
    let e0 = a - c;
    let e1 = b - c;
    Mat2::new(e0.x, e1.x, e0.y, e1.y)
}

pub fn build_rest_shape(mesh: &PatternMesh, density: f64) -> Result<RestShapeData> {
    if !(density > 0.0) {
        return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
    }
    let mut dm = Vec::with_capacity(mesh.faces.len());
    let mut dm_inv = Vec::with_capacity(mesh.faces.len());
    let mut area = Vec::with_capacity(mesh.faces.len());
    let mut mass = vec![0.0; mesh.num_vertices()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let x = &mesh.vertices_2d;
        let m = rest_matrix(&x[f[0]], &x[f[1]], &x[f[2]]);
        let det = m.determinant();
        if det.abs() < DEGENERATE_DET {
            return Err(Error::DegenerateFace { face: fi, det });
        }
        let a = 0.5 * det.abs();
        for &v in f {
            mass[v] += density * a / 3.0;
        }
        dm.push(m);
        dm_inv.push(m.try_inverse().expect("non-degenerate"));
        area.push(a);
    }
    Ok(RestShapeData {
        dm,
        dm_inv,
        area,
        mass,
        density,
    })
}

pub fn inverted_faces(positions: &[Vec2], faces: &[[usize; 3]]) -> Vec<usize> {
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| signed_area_2d(&positions[f[0]], &positions[f[1]], &positions[f[2]]) <= 0.0)
        .map(|(i, _)| i)
        .collect()
}

pub fn polygon_area(points: impl Iterator<Item = Vec2>) -> f64 {
    let pts: Vec<Vec2> = points.collect();
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
        * 0.5
}

/// Panels are connected components of faces; numbered by lowest face index.
fn connected_panels(nv: usize, faces: &[[usize; 3]]) -> (Vec<usize>, Vec<usize>, usize) {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for f in faces {
        for k in 1..3 {
            let (a, b) = (find(&mut parent, f[0]), find(&mut parent, f[k]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label: HashMap<usize, usize> = HashMap::new();
    let mut panel_of_face = Vec::with_capacity(faces.len());
    for f in faces {
        let root = find(&mut parent, f[0]);
        let next = label.len();
        panel_of_face.push(*label.entry(root).or_insert(next));
    }
    let mut panel_of_vertex = vec![usize::MAX; nv];
    for (f, &p) in faces.iter().zip(&panel_of_face) {
        for &v in f {
            panel_of_vertex[v] = p;
        }
    }
    (panel_of_face, panel_of_vertex, label.len())
}
