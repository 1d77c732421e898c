//! Procedural low-resolution humanoid: a union of closed meshes (torso,
//! head, arms, legs), 12 joints and four shape fields.

use std::f64::consts::{PI, TAU};

use super::{BodyModel, Joint, PosedBody, JOINT_DOF, ROOT_DOF};
use crate::math::Vec3;

type Mesh = (Vec<Vec3>, Vec<[usize; 3]>);

/// Closed tube through ring centers running along `axis`, with flat caps.
/// `radii[r] = (ra, rb)` are the semi-axes along `u` and `axis × u`.
fn tube(centers: &[Vec3], radii: &[(f64, f64)], axis: Vec3, u: Vec3, segs: usize) -> Mesh {
    let w = axis.cross(&u);
    let mut v = Vec::new();
    let mut f = Vec::new();
    for (c, &(ra, rb)) in centers.iter().zip(radii) {
        for k in 0..segs {
            let t = TAU * k as f64 / segs as f64;
            v.push(c + u * (ra * t.cos()) + w * (rb * t.sin()));
        }
    }
    let idx = |r: usize, k: usize| r * segs + k % segs;
    for r in 0..centers.len() - 1 {
        for k in 0..segs {
            f.push([idx(r, k), idx(r, k + 1), idx(r + 1, k + 1)]);
            f.push([idx(r, k), idx(r + 1, k + 1), idx(r + 1, k)]);
        }
    }
    let bottom = v.len();
    v.push(centers[0]);
    let top = v.len();
    v.push(*centers.last().unwrap());
    let last = centers.len() - 1;
    for k in 0..segs {
        f.push([bottom, idx(0, k + 1), idx(0, k)]);
        f.push([top, idx(last, k), idx(last, k + 1)]);
    }
    (v, f)
}

/// UV sphere with outward winding.
pub(crate) fn sphere(center: Vec3, radius: f64, rings: usize, segs: usize) -> Mesh {
    let mut v = vec![center + Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let phi = PI * r as f64 / rings as f64;
        for k in 0..segs {
            let t = TAU * k as f64 / segs as f64;
            v.push(center + Vec3::new(phi.sin() * t.cos(), phi.sin() * t.sin(), phi.cos()) * radius);
        }
    }
    let south = v.len();
    v.push(center - Vec3::new(0.0, 0.0, radius));
    let idx = |r: usize, k: usize| 1 + (r - 1) * segs + k % segs;
    let mut f = Vec::new();
    for k in 0..segs {
        f.push([0, idx(1, k), idx(1, k + 1)]);
        f.push([idx(rings - 1, k), south, idx(rings - 1, k + 1)]);
    }
    for r in 1..rings - 1 {
        for k in 0..segs {
            f.push([idx(r, k), idx(r + 1, k), idx(r + 1, k + 1)]);
            f.push([idx(r, k), idx(r + 1, k + 1), idx(r, k + 1)]);
        }
    }
    (v, f)
}

fn lerp_table(table: &[(f64, f64, f64)], z: f64) -> (f64, f64) {
    for w in table.windows(2) {
        let (z0, a0, b0) = w[0];
        let (z1, a1, b1) = w[1];
        if z <= z1 {
            let t = ((z - z0) / (z1 - z0)).clamp(0.0, 1.0);
            return (a0 + t * (a1 - a0), b0 + t * (b1 - b0));
        }
    }
    let l = table.last().unwrap();
    (l.1, l.2)
}

fn smooth_blend(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Two-joint blend: `lo` below `z0`, `hi` above `z1`.
fn blend2(lo: usize, hi: usize, z: f64, z0: f64, z1: f64) -> Vec<(usize, f64)> {
    let t = smooth_blend((z - z0) / (z1 - z0));
    if t <= 0.0 {
        vec![(lo, 1.0)]
    } else if t >= 1.0 {
        vec![(hi, 1.0)]
    } else {
        vec![(lo, 1.0 - t), (hi, t)]
    }
}

/// Bundled body asset (~1.1k vertices, 12 joints, K = 4 shape fields:
/// inflate along normals, torso girth, height, width).
pub fn humanoid() -> BodyModel {
    let joints_spec: [(&str, Option<usize>, Vec3); 12] = [
        ("pelvis", None, Vec3::new(0.0, 0.0, 0.95)),
        ("spine", Some(0), Vec3::new(0.0, 0.0, 1.10)),
        ("chest", Some(1), Vec3::new(0.0, 0.0, 1.30)),
        ("neck", Some(2), Vec3::new(0.0, 0.0, 1.48)),
        ("l_shoulder", Some(2), Vec3::new(0.20, 0.0, 1.42)),
        ("l_elbow", Some(4), Vec3::new(0.255, 0.0, 1.115)),
        ("r_shoulder", Some(2), Vec3::new(-0.20, 0.0, 1.42)),
        ("r_elbow", Some(6), Vec3::new(-0.255, 0.0, 1.115)),
        ("l_hip", Some(0), Vec3::new(0.09, 0.0, 0.88)),
        ("l_knee", Some(8), Vec3::new(0.09, 0.0, 0.47)),
        ("r_hip", Some(0), Vec3::new(-0.09, 0.0, 0.88)),
        ("r_knee", Some(10), Vec3::new(-0.09, 0.0, 0.47)),
    ];
    let joints: Vec<Joint> = joints_spec
        .iter()
        .map(|(n, p, o)| Joint { name: n.to_string(), parent: *p, origin: *o })
        .collect();

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut weights: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut is_torso: Vec<bool> = Vec::new();
    let mut append = |mesh: Mesh, w: &dyn Fn(&Vec3, usize) -> Vec<(usize, f64)>, torso: bool| {
        let base = vertices.len();
        for (i, p) in mesh.0.iter().enumerate() {
            weights.push(w(p, i));
            is_torso.push(torso);
        }
        vertices.extend(mesh.0);
        faces.extend(mesh.1.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    };

    // Torso: elliptical sections (lateral, depth) from crotch to neck.
    let profile = [
        (0.80, 0.150, 0.110),
        (0.90, 0.175, 0.125),
        (1.00, 0.150, 0.110),
        (1.05, 0.135, 0.100),
        (1.15, 0.145, 0.105),
        (1.30, 0.170, 0.120),
        (1.40, 0.180, 0.110),
        (1.46, 0.100, 0.075),
        (1.48, 0.070, 0.060),
    ];
    let torso_rings = 20;
    let zs: Vec<f64> = (0..torso_rings).map(|r| 0.80 + 0.68 * r as f64 / (torso_rings - 1) as f64).collect();
    let centers: Vec<Vec3> = zs.iter().map(|&z| Vec3::new(0.0, 0.0, z)).collect();
    let radii: Vec<(f64, f64)> = zs.iter().map(|&z| lerp_table(&profile, z)).collect();
    append(
        tube(&centers, &radii, Vec3::z(), Vec3::x(), 24),
        &|p, _| {
            if p.z < 1.15 {
                blend2(0, 1, p.z, 1.0, 1.1)
            } else {
                blend2(1, 2, p.z, 1.2, 1.3)
            }
        },
        true,
    );

    append(sphere(Vec3::new(0.0, 0.0, 1.60), 0.10, 8, 12), &|_, _| vec![(3, 1.0)], false);

    for (side, shoulder, elbow) in [(1.0, 4usize, 5usize), (-1.0, 6, 7)] {
        let wrist = Vec3::new(0.31 * side, 0.0, 0.80);
        let top = Vec3::new(0.20 * side, 0.0, 1.43);
        let n = 10;
        let centers: Vec<Vec3> = (0..n).map(|r| wrist + (top - wrist) * (r as f64 / (n - 1) as f64)).collect();
        let radii: Vec<(f64, f64)> = (0..n)
            .map(|r| {
                let rr = 0.035 + 0.015 * r as f64 / (n - 1) as f64;
                (rr, rr)
            })
            .collect();
        let axis = (top - wrist).normalize();
        let u = Vec3::y().cross(&axis).normalize();
        let (ws, we) = (wrist, top);
        append(
            tube(&centers, &radii, axis, u, 10),
            &move |p, _| {
                let t = (p - ws).dot(&(we - ws)) / (we - ws).norm_squared();
                blend2(elbow, shoulder, t, 0.4, 0.6)
            },
            false,
        );
    }

    for (side, hip, knee) in [(1.0, 8usize, 9usize), (-1.0, 10, 11)] {
        let n = 12;
        let centers: Vec<Vec3> =
            (0..n).map(|r| Vec3::new(0.09 * side, 0.0, 0.05 + 0.83 * r as f64 / (n - 1) as f64)).collect();
        let radii: Vec<(f64, f64)> = (0..n)
            .map(|r| {
                let rr = 0.045 + 0.035 * r as f64 / (n - 1) as f64;
                (rr, rr)
            })
            .collect();
        append(tube(&centers, &radii, Vec3::z(), Vec3::x(), 12), &move |p, _| blend2(knee, hip, p.z, 0.40, 0.55), false);
    }

    let normals = PosedBody::new(vertices.clone(), faces.clone()).vertex_normals_unit();
    let girth: Vec<Vec3> = vertices
        .iter()
        .zip(&is_torso)
        .map(|(p, &t)| {
            let r = Vec3::new(p.x, p.y, 0.0);
            if t && r.norm() > 1e-9 {
                r.normalize()
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    let height: Vec<Vec3> = vertices.iter().map(|p| Vec3::new(0.0, 0.0, p.z)).collect();
    let width: Vec<Vec3> = vertices.iter().map(|p| Vec3::new(p.x, 0.0, 0.0)).collect();

    let nj = joints.len();
    let mut pose_limits = Vec::with_capacity(ROOT_DOF + JOINT_DOF * (nj - 1));
    pose_limits.extend([(-0.5, 0.5); 3]);
    pose_limits.extend([(-PI, PI); 3]);
    for _ in 1..nj {
        pose_limits.extend([(-1.5, 1.5); 3]);
        pose_limits.push((-0.3, 0.3));
    }

    let body = BodyModel {
        rest_vertices: vertices,
        faces,
        basis_names: vec!["inflate".into(), "girth".into(), "height".into(), "width".into()],
        basis: vec![normals, girth, height, width],
        joints,
        weights,
        pose_limits,
    };
    debug_assert!(body.validate().is_ok());
    body
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn humanoid_is_valid_and_closed() {
        let b = humanoid();
        b.validate().unwrap();
        assert!(b.num_vertices() > 1000 && b.num_vertices() < 2000, "{}", b.num_vertices());
        assert_eq!(b.num_pose(), 50);
        // Every edge of the union is shared by exactly two faces.
        let mut counts = std::collections::HashMap::new();
        for f in &b.faces {
            for k in 0..3 {
                let (a, c) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(c), a.max(c))).or_insert(0) += 1;
            }
        }
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn outward_orientation() {
        let b = humanoid();
        let posed = b.pose(&[0.0; 4], &b.identity_pose());
        // Far outside points are outside, joint centers inside.
        assert!(posed.closest_point(&Vec3::new(0.0, 1.0, 1.0)).signed_distance > 0.5);
        assert!(posed.closest_point(&Vec3::new(0.0, 0.0, 1.2)).signed_distance < 0.0);
        assert!(posed.closest_point(&Vec3::new(0.0, 0.0, 1.6)).signed_distance < 0.0);
    }
}
