//! Parametric body: rest mesh plus linear shape basis, a joint tree with
//! linear blend skinning, and analytic Jacobians of the posed vertices.
//!
//! Pose vector ψ: the root joint has `[tx, ty, tz, rx, ry, rz]`, every other
//! joint `[ax, ay, az, s]` (intrinsic XYZ Euler angles and a relative bone
//! length change `s`, which scales the offset to the parent).

mod bvh;
mod fit;
pub(crate) mod humanoid;
mod io;

pub use bvh::{closest_point_brute_force, ClosestHit, PosedBody};
pub use fit::{init_fit, FitOptions, FitResult};
pub use humanoid::humanoid;
pub use io::{load_body, save_body};

use crate::math::{Mat3, Vec3};
use crate::{Error, Result};

pub const ROOT_DOF: usize = 6;
pub const JOINT_DOF: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest position of the joint in world space.
    pub origin: Vec3,
}

#[derive(Clone, Debug)]
pub struct BodyModel {
    pub rest_vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub basis_names: Vec<String>,
    /// `basis[k][i]`: displacement of vertex i per unit ν_k.
    pub basis: Vec<Vec<Vec3>>,
    /// Joints in topological order (parents before children); joint 0 is the root.
    pub joints: Vec<Joint>,
    /// Sparse convex skinning weights per vertex.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// Box limits per pose coordinate.
    pub pose_limits: Vec<(f64, f64)>,
}

/// Affine map `x ↦ m x + t`.
#[derive(Clone, Copy, Debug)]
struct Affine {
    m: Mat3,
    t: Vec3,
}

impl Affine {
    fn then(&self, inner: &Affine) -> Affine {
        Affine { m: self.m * inner.m, t: self.m * inner.t + self.t }
    }
    fn apply(&self, x: &Vec3) -> Vec3 {
        self.m * x + self.t
    }
    /// Inverse of a rigid map.
    fn rigid_inverse(&self) -> Affine {
        let mt = self.m.transpose();
        Affine { m: mt, t: -(mt * self.t) }
    }
}

fn rot_x(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(1., 0., 0., 0., c, -s, 0., s, c),
        Mat3::new(0., 0., 0., 0., -s, -c, 0., c, -s),
    )
}
fn rot_y(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(c, 0., s, 0., 1., 0., -s, 0., c),
        Mat3::new(-s, 0., c, 0., 0., 0., -c, 0., -s),
    )
}
fn rot_z(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(c, -s, 0., s, c, 0., 0., 0., 1.),
        Mat3::new(-s, -c, 0., c, -s, 0., 0., 0., 0.),
    )
}

/// Rotation `Rx Ry Rz` and its three partial derivatives.
fn euler_xyz(a: f64, b: f64, c: f64) -> (Mat3, [Mat3; 3]) {
    let (rx, dx) = rot_x(a);
    let (ry, dy) = rot_y(b);
    let (rz, dz) = rot_z(c);
    (rx * ry * rz, [dx * ry * rz, rx * dy * rz, rx * ry * dz])
}

/// Forward kinematics result.
#[derive(Clone, Debug)]
pub struct Kinematics {
    world: Vec<Affine>,
    local_derivs: Vec<Vec<Affine>>,
}

impl Kinematics {
    pub fn rotation(&self, j: usize) -> Mat3 {
        self.world[j].m
    }
}

impl BodyModel {
    pub fn num_vertices(&self) -> usize {
        self.rest_vertices.len()
    }
    pub fn num_shape(&self) -> usize {
        self.basis.len()
    }
    pub fn num_pose(&self) -> usize {
        ROOT_DOF + JOINT_DOF * (self.joints.len() - 1)
    }

    /// Offset of joint `j` into ψ.
    pub fn pose_offset(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            ROOT_DOF + JOINT_DOF * (j - 1)
        }
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Check the type invariants.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vertices();
        if self.weights.len() != nv {
            return Err(Error::Dimension(format!("{} weight rows for {nv} vertices", self.weights.len())));
        }
        for (i, row) in self.weights.iter().enumerate() {
            let s: f64 = row.iter().map(|w| w.1).sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|w| w.1 < 0.0 || w.0 >= self.joints.len()) {
                return Err(Error::InvalidParameter(format!("skinning weights of vertex {i} are not convex")));
            }
        }
        for b in &self.basis {
            if b.len() != nv {
                return Err(Error::Dimension("basis field length".into()));
            }
        }
        if self.joints.is_empty() || self.joints[0].parent.is_some() {
            return Err(Error::Topology("joint 0 must be the root".into()));
        }
        for (j, joint) in self.joints.iter().enumerate().skip(1) {
            match joint.parent {
                Some(p) if p < j => {}
                _ => return Err(Error::Topology(format!("joint {j} must have an earlier parent"))),
            }
        }
        if self.pose_limits.len() != self.num_pose() {
            return Err(Error::Dimension("pose limit count".into()));
        }
        Ok(())
    }

    pub fn identity_pose(&self) -> Vec<f64> {
        vec![0.0; self.num_pose()]
    }

    /// V₀ + Σ ν_k V_k.
    pub fn shape(&self, nu: &[f64]) -> Vec<Vec3> {
        assert_eq!(nu.len(), self.num_shape(), "shape coefficient count");
        let mut v = self.rest_vertices.clone();
        for (k, &c) in nu.iter().enumerate() {
            if c != 0.0 {
                for (p, d) in v.iter_mut().zip(&self.basis[k]) {
                    *p += d * c;
                }
            }
        }
        v
    }

    pub fn kinematics(&self, psi: &[f64]) -> Kinematics {
        assert_eq!(psi.len(), self.num_pose(), "pose coordinate count");
        let nj = self.joints.len();
        let mut world: Vec<Affine> = Vec::with_capacity(nj);
        let mut local_derivs = Vec::with_capacity(nj);
        for (j, joint) in self.joints.iter().enumerate() {
            let o = self.pose_offset(j);
            let (local, derivs) = if j == 0 {
                let (r, dr) = euler_xyz(psi[3], psi[4], psi[5]);
                let t = joint.origin + Vec3::new(psi[0], psi[1], psi[2]);
                let mut d = Vec::with_capacity(ROOT_DOF);
                for axis in 0..3 {
                    d.push(Affine { m: Mat3::zeros(), t: Vec3::ith(axis, 1.0) });
                }
                for dr in dr {
                    d.push(Affine { m: dr, t: Vec3::zeros() });
                }
                (Affine { m: r, t }, d)
            } else {
                let parent = joint.parent.expect("validated tree");
                let offset = joint.origin - self.joints[parent].origin;
                let (r, dr) = euler_xyz(psi[o], psi[o + 1], psi[o + 2]);
                let mut d: Vec<Affine> = dr.iter().map(|&m| Affine { m, t: Vec3::zeros() }).collect();
                d.push(Affine { m: Mat3::zeros(), t: offset });
                (Affine { m: r, t: offset * (1.0 + psi[o + 3]) }, d)
            };
            let g = match joint.parent {
                Some(p) => world[p].then(&local),
                None => local,
            };
            world.push(g);
            local_derivs.push(derivs);
        }
        Kinematics { world, local_derivs }
    }

    /// Skin given rest vertices: x_i = Σ_j w_ij G_j (x̄_i − r_j).
    pub fn skin_vertices(&self, rest: &[Vec3], kin: &Kinematics) -> Vec<Vec3> {
        rest.iter()
            .zip(&self.weights)
            .map(|(x, row)| {
                row.iter()
                    .map(|&(j, w)| kin.world[j].apply(&(x - self.joints[j].origin)) * w)
                    .sum()
            })
            .collect()
    }

    pub fn posed_vertices(&self, nu: &[f64], psi: &[f64]) -> Vec<Vec3> {
        let kin = self.kinematics(psi);
        self.skin_vertices(&self.shape(nu), &kin)
    }

    pub fn pose(&self, nu: &[f64], psi: &[f64]) -> PosedBody {
        PosedBody::new(self.posed_vertices(nu, psi), self.faces.clone())
    }

    fn is_ancestor_or_self(&self, a: usize, mut k: usize) -> bool {
        loop {
            if k == a {
                return true;
            }
            match self.joints[k].parent {
                Some(p) => k = p,
                None => return false,
            }
        }
    }

    /// Dense Jacobians: `d_nu[k][i]` = ∂x_i/∂ν_k, `d_psi[p][i]` = ∂x_i/∂ψ_p.
    pub fn jacobians(&self, nu: &[f64], psi: &[f64]) -> BodyJacobians {
        let kin = self.kinematics(psi);
        let rest = self.shape(nu);
        let nv = self.num_vertices();
        let d_nu: Vec<Vec<Vec3>> = self
            .basis
            .iter()
            .map(|field| {
                (0..nv)
                    .map(|i| self.weights[i].iter().map(|&(j, w)| kin.world[j].m * field[i] * w).sum())
                    .collect()
            })
            .collect();
        let mut d_psi = vec![vec![Vec3::zeros(); nv]; self.num_pose()];
        let inv: Vec<Affine> = kin.world.iter().map(|g| g.rigid_inverse()).collect();
        for i in 0..nv {
            let contrib: Vec<(usize, f64, Vec3)> = self.weights[i]
                .iter()
                .map(|&(k, w)| (k, w, kin.world[k].apply(&(rest[i] - self.joints[k].origin))))
                .collect();
            for j in 0..self.joints.len() {
                let mut z = Vec3::zeros();
                let mut wsum = 0.0;
                for &(k, w, y) in &contrib {
                    if self.is_ancestor_or_self(j, k) {
                        z += inv[j].apply(&y) * w;
                        wsum += w;
                    }
                }
                if wsum == 0.0 {
                    continue;
                }
                let gp = match self.joints[j].parent {
                    Some(p) => kin.world[p].m,
                    None => Mat3::identity(),
                };
                let off = self.pose_offset(j);
                for (q, dl) in kin.local_derivs[j].iter().enumerate() {
                    d_psi[off + q][i] = gp * (dl.m * z + dl.t * wsum);
                }
            }
        }
        BodyJacobians { d_nu, d_psi }
    }

    pub fn clamp_pose(&self, psi: &mut [f64]) {
        for (p, &(lo, hi)) in psi.iter_mut().zip(&self.pose_limits) {
            *p = p.clamp(lo, hi);
        }
    }
}

#[derive(Clone, Debug)]
pub struct BodyJacobians {
    pub d_nu: Vec<Vec<Vec3>>,
    pub d_psi: Vec<Vec<Vec3>>,
}

impl BodyJacobians {
    /// Contract per-vertex adjoints ŷ with the Jacobians.
    pub fn vjp(&self, y_hat: &[Vec3]) -> (Vec<f64>, Vec<f64>) {
        let c = |cols: &Vec<Vec<Vec3>>| -> Vec<f64> {
            cols.iter().map(|col| col.iter().zip(y_hat).map(|(a, b)| a.dot(b)).sum()).collect()
        };
        (c(&self.d_nu), c(&self.d_psi))
    }
}
