//! Bundled scenes: a cantilever strip, a four-gore skirt, a two-panel top,
//! a small head-cap for gradient checks and a two-triangle square. All are
//! sized to run in seconds on one core.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::body::{humanoid, BodyModel, PosedBody};
use crate::math::{Vec2, Vec3};
use crate::pattern::{PatternMesh, SeamPair};
use crate::sim::{Cloth, Material, RestState, SimConfig, SimState};
use crate::{Error, Result};

/// A labeled boundary curve of the garment: pattern vertex ids in order.
#[derive(Clone, Debug)]
pub struct Label {
    pub name: String,
    pub vertices: Vec<usize>,
    pub closed: bool,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub pattern: PatternMesh,
    pub pins: Vec<usize>,
    pub labels: Vec<Label>,
    pub body: Option<BodyModel>,
    pub nu: Vec<f64>,
    pub psi: Vec<f64>,
    pub material: Material,
    pub config: SimConfig,
    /// Fixed step count used for optimization so the objective is smooth.
    pub steps: usize,
}

impl Scene {
    pub fn initial_positions(&self) -> Vec<Vec3> {
        self.pattern.embedding.clone().expect("bundled scenes carry an embedding")
    }

    pub fn initial_state(&self) -> SimState {
        SimState::at_rest(self.initial_positions())
    }

    pub fn cloth(&self) -> Result<Cloth> {
        Cloth::new(&self.pattern, &self.pins)
    }

    pub fn rest(&self, cloth: &Cloth) -> Result<RestState> {
        RestState::new(cloth, &self.pattern, self.material.density)
    }

    pub fn posed_body(&self) -> Option<PosedBody> {
        self.body.as_ref().map(|b| b.pose(&self.nu, &self.psi))
    }

    /// Same scene with every panel scaled about the centroid of its pinned
    /// vertices (or of the whole panel when it has none).
    pub fn with_scaled_panels(&self, factor: f64) -> Result<Scene> {
        let mut out = self.clone();
        out.pattern = scale_panels(&self.pattern, &self.pins, factor)?;
        Ok(out)
    }
}

pub fn scale_panels(mesh: &PatternMesh, pins: &[usize], factor: f64) -> Result<PatternMesh> {
    scale_panels_by(mesh, pins, &vec![factor; mesh.num_panels])
}

/// Like `scale_panels` with one factor per panel.
pub fn scale_panels_by(mesh: &PatternMesh, pins: &[usize], factors: &[f64]) -> Result<PatternMesh> {
    if factors.len() != mesh.num_panels {
        return Err(Error::Dimension(format!("{} scale factors for {} panels", factors.len(), mesh.num_panels)));
    }
    let mut pos = mesh.vertices_2d.clone();
    for (panel, &factor) in factors.iter().enumerate() {
        let ids: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| mesh.panel_of_vertex[v] == panel).collect();
        let anchor: Vec<usize> = ids.iter().copied().filter(|v| pins.contains(v)).collect();
        let set = if anchor.is_empty() { &ids } else { &anchor };
        let c: Vec2 = set.iter().map(|&v| mesh.vertices_2d[v]).sum::<Vec2>() / set.len() as f64;
        for &v in &ids {
            pos[v] = c + (mesh.vertices_2d[v] - c) * factor;
        }
    }
    mesh.with_rest_positions(pos)
}

/// Structured `nu × nv` grid panel; `map(i, j)` gives (2D, 3D) positions
/// with 2D x increasing in i and y increasing in j.
struct Grid {
    nu: usize,
    base: usize,
}

impl Grid {
    fn id(&self, i: usize, j: usize) -> usize {
        self.base + j * self.nu + i
    }
}

fn add_grid(
    v2: &mut Vec<Vec2>,
    v3: &mut Vec<Vec3>,
    faces: &mut Vec<[usize; 3]>,
    nu: usize,
    nv: usize,
    map: impl Fn(usize, usize) -> (Vec2, Vec3),
) -> Grid {
    let g = Grid { nu, base: v2.len() };
    for j in 0..nv {
        for i in 0..nu {
            let (a, b) = map(i, j);
            v2.push(a);
            v3.push(b);
        }
    }
    for j in 0..nv - 1 {
        for i in 0..nu - 1 {
            let (a, b, c, d) = (g.id(i, j), g.id(i + 1, j), g.id(i + 1, j + 1), g.id(i, j + 1));
            // Alternate diagonals to avoid a directional bias.
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    g
}

fn column(g: &Grid, i: usize, nv: usize) -> Vec<usize> {
    (0..nv).rev().map(|j| g.id(i, j)).collect()
}

fn row(g: &Grid, j: usize) -> Vec<usize> {
    (0..g.nu).map(|i| g.id(i, j)).collect()
}

/// 0.30 m × 0.05 m strip clamped along its first two columns, no body.
pub fn strip() -> Scene {
    let (nu, nv) = (13, 3);
    let (len, wid) = (0.30, 0.05);
    let (mut v2, mut v3, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let g = add_grid(&mut v2, &mut v3, &mut f, nu, nv, |i, j| {
        let p = Vec2::new(len * i as f64 / (nu - 1) as f64, wid * j as f64 / (nv - 1) as f64);
        (p, Vec3::new(p.x, p.y, 1.0))
    });
    let pins: Vec<usize> = (0..nv).flat_map(|j| [g.id(0, j), g.id(1, j)]).collect();
    let tip: Vec<usize> = (0..nv).map(|j| g.id(nu - 1, j)).collect();
    let pattern = PatternMesh::new(v2, f, vec![], Some(v3)).expect("strip pattern");
    Scene {
        name: "strip".into(),
        pattern,
        pins,
        labels: vec![Label { name: "tip".into(), vertices: tip, closed: false }],
        body: None,
        nu: vec![],
        psi: vec![],
        material: Material { bend: 2000.0, ..Material::default() },
        config: SimConfig { damping: 0.97, ..SimConfig::default() },
        steps: 150,
    }
}

/// Four flat trapezoidal gores with arced hems, pre-sewn as a square
/// frustum around the hips and hung from the middle of each gore's waist.
pub fn skirt() -> Scene {
    let (nu, nv) = (5, 7);
    let (a_top, a_bot) = (0.15, 0.24);
    let (z_top, z_bot): (f64, f64) = (1.02, 0.52);
    let bulge = 0.03;
    let slant = (z_top - z_bot).hypot(a_bot - a_top);
    let (mut v2, mut v3, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let mut grids = Vec::new();
    for k in 0..4 {
        let th = FRAC_PI_2 * k as f64;
        let d = Vec3::new(th.cos(), th.sin(), 0.0);
        let t = Vec3::new(-th.sin(), th.cos(), 0.0);
        let c_top = d * a_top + Vec3::z() * z_top;
        let s = (d * a_bot + Vec3::z() * z_bot - c_top).normalize();
        let offset = Vec2::new(0.7 * k as f64, 0.0);
        grids.push(add_grid(&mut v2, &mut v3, &mut f, nu, nv, |i, j| {
            let xi = 2.0 * i as f64 / (nu - 1) as f64 - 1.0;
            let tt = j as f64 / (nv - 1) as f64;
            let half = a_bot + (a_top - a_bot) * tt;
            let u = xi * half;
            let y = -(1.0 - tt) * (slant + bulge * (1.0 - xi * xi));
            (offset + Vec2::new(u, y), c_top + t * u - s * y)
        }));
    }
    let seams = (0..4)
        .map(|k| SeamPair::new(column(&grids[k], nu - 1, nv), column(&grids[(k + 1) % 4], 0, nv)))
        .collect();
    // One waist point per gore: a pinned waist band would be compressed (and
    // buckle) as soon as the pattern grows.
    let pins = grids.iter().map(|g| g.id(nu / 2, nv - 1)).collect();
    let hem = grids.iter().flat_map(|g| row(g, 0)).collect();
    let pattern = PatternMesh::new(v2, f, seams, Some(v3)).expect("skirt pattern");
    let body = humanoid();
    let psi = body.identity_pose();
    Scene {
        name: "skirt".into(),
        pattern,
        pins,
        labels: vec![Label { name: "hem".into(), vertices: hem, closed: true }],
        nu: vec![0.0; body.num_shape()],
        psi,
        body: Some(body),
        material: Material::default(),
        config: SimConfig { damping: 0.9, ..SimConfig::default() },
        steps: 120,
    }
}

/// Front and back rectangles wrapped isometrically on a vertical cylinder,
/// sewn at the sides and held by four strap points each. Arms are raised so
/// the side seams clear them.
pub fn top() -> Scene {
    let (nu, nv) = (9, 6);
    let r = 0.2;
    let (z0, z1) = (1.0, 1.30);
    let width = PI * r;
    let (mut v2, mut v3, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let mut grids = Vec::new();
    for (k, sign) in [(0usize, 1.0), (1, -1.0)] {
        let offset = Vec2::new(0.8 * k as f64, 0.0);
        grids.push(add_grid(&mut v2, &mut v3, &mut f, nu, nv, |i, j| {
            let u = width * (i as f64 / (nu - 1) as f64 - 0.5);
            let z = z0 + (z1 - z0) * j as f64 / (nv - 1) as f64;
            let phi = u / r;
            (offset + Vec2::new(u, z - z0), Vec3::new(sign * r * phi.sin(), -sign * r * phi.cos(), z))
        }));
    }
    let seams = vec![
        SeamPair::new(column(&grids[0], nu - 1, nv), column(&grids[1], 0, nv)),
        SeamPair::new(column(&grids[1], nu - 1, nv), column(&grids[0], 0, nv)),
    ];
    let pins = grids.iter().flat_map(|g| [2, 3, 5, 6].map(|i| g.id(i, nv - 1))).collect();
    let hem = [&grids[0], &grids[1]].iter().flat_map(|g| row(g, 0)).collect();
    let pattern = PatternMesh::new(v2, f, seams, Some(v3)).expect("top pattern");
    let body = humanoid();
    let mut psi = body.identity_pose();
    for (name, angle) in [("l_shoulder", -1.2), ("r_shoulder", 1.2)] {
        let j = body.joint_index(name).expect("bundled joint");
        psi[body.pose_offset(j) + 1] = angle;
    }
    Scene {
        name: "top".into(),
        pattern,
        pins,
        labels: vec![Label { name: "hem".into(), vertices: hem, closed: true }],
        nu: vec![0.0; body.num_shape()],
        psi,
        body: Some(body),
        material: Material::default(),
        config: SimConfig { damping: 0.9, ..SimConfig::default() },
        steps: 120,
    }
}

/// Two 4×4 panels sewn along one edge, dropped flat onto the head:
/// 32 vertices, used for end-to-end gradient checks.
pub fn head_cap() -> Scene {
    let n = 4;
    let side = 0.12;
    let z = 1.715;
    let (mut v2, mut v3, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let mut grids = Vec::new();
    // Centred but turned off the head mesh's mirror planes: seam vertices on
    // one of them sit on a tie between closest faces.
    for k in 0..2 {
        let x0 = -side + side * k as f64;
        grids.push(add_grid(&mut v2, &mut v3, &mut f, n, n, |i, j| {
            let p = Vec2::new(side * i as f64 / (n - 1) as f64, side * j as f64 / (n - 1) as f64);
            let (sn, cs) = 5f64.to_radians().sin_cos();
            let (x, y) = (x0 + p.x, p.y - 0.5 * side);
            (p + Vec2::new(0.3 * k as f64, 0.0), Vec3::new(cs * x - sn * y, sn * x + cs * y, z))
        }));
    }
    let seams = vec![SeamPair::new(column(&grids[0], n - 1, n), column(&grids[1], 0, n))];
    let pattern = PatternMesh::new(v2, f, seams, Some(v3)).expect("cap pattern");
    small_body_scene("head_cap", pattern)
}

/// One square, two triangles, dropped onto the head.
pub fn two_triangles() -> Scene {
    let s = 0.1;
    let v2 = vec![Vec2::new(0.0, 0.0), Vec2::new(s, 0.0), Vec2::new(s, s), Vec2::new(0.0, s)];
    let v3 = v2.iter().map(|p| Vec3::new(p.x - 0.5 * s + 0.01, p.y - 0.5 * s, 1.712)).collect();
    let pattern = PatternMesh::new(v2, vec![[0, 1, 2], [0, 2, 3]], vec![], Some(v3)).expect("square");
    small_body_scene("two_triangles", pattern)
}

fn small_body_scene(name: &str, pattern: PatternMesh) -> Scene {
    let body = humanoid();
    Scene {
        name: name.into(),
        pattern,
        pins: vec![],
        labels: vec![],
        nu: vec![0.0; body.num_shape()],
        psi: body.identity_pose(),
        body: Some(body),
        material: Material { stretch: [5e-3, 5e-3, 1e-2], bend: 50.0, ..Material::default() },
        config: SimConfig { damping: 1.0, ..SimConfig::default() },
        steps: 30,
    }
}

pub const NAMES: [&str; 5] = ["strip", "skirt", "top", "head_cap", "two_triangles"];

pub fn by_name(name: &str) -> Result<Scene> {
    match name {
        "strip" => Ok(strip()),
        "skirt" => Ok(skirt()),
        "top" => Ok(top()),
        "head_cap" => Ok(head_cap()),
        "two_triangles" => Ok(two_triangles()),
        _ => Err(Error::InvalidParameter(format!("unknown scene {name:?}; bundled: {}", NAMES.join(", ")))),
    }
}
