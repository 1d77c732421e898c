//! Body asset: an OBJ mesh (`v`, `f`) plus a JSON sidecar
//!
//! ```json
//! { "joints": [{"name": "pelvis", "parent": null, "origin": [0, 0, 0.95]}, ...],
//!   "weights": [[[joint, w], ...], ...],          // one row per vertex
//!   "basis": [{"name": "inflate", "field": [[dx, dy, dz], ...]}, ...],
//!   "pose_limits": [[lo, hi], ...] }               // one per pose coordinate
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BodyModel, Joint};
use crate::math::Vec3;
use crate::pattern::read_obj;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct JointRecord {
    name: String,
    parent: Option<usize>,
    origin: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct BasisRecord {
    name: String,
    field: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    joints: Vec<JointRecord>,
    weights: Vec<Vec<(usize, f64)>>,
    basis: Vec<BasisRecord>,
    pose_limits: Vec<(f64, f64)>,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn save_body(body: &BodyModel, obj: &Path, sidecar: &Path) -> Result<()> {
    let mut s = String::new();
    for p in &body.rest_vertices {
        s.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
    }
    for f in &body.faces {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    std::fs::write(obj, s).map_err(|e| Error::io(obj, e))?;
    let side = Sidecar {
        joints: body
            .joints
            .iter()
            .map(|j| JointRecord { name: j.name.clone(), parent: j.parent, origin: arr(&j.origin) })
            .collect(),
        weights: body.weights.clone(),
        basis: body
            .basis_names
            .iter()
            .zip(&body.basis)
            .map(|(n, f)| BasisRecord { name: n.clone(), field: f.iter().map(arr).collect() })
            .collect(),
        pose_limits: body.pose_limits.clone(),
    };
    let json = serde_json::to_string(&side).expect("serializable");
    std::fs::write(sidecar, json).map_err(|e| Error::io(sidecar, e))
}

pub fn load_body(obj: &Path, sidecar: &Path) -> Result<BodyModel> {
    let mesh = read_obj(obj)?;
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let side: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&sidecar.display().to_string(), e.line(), e.to_string()))?;
    let v3 = |a: &[f64; 3]| Vec3::new(a[0], a[1], a[2]);
    let body = BodyModel {
        rest_vertices: mesh.positions,
        faces: mesh.faces.iter().map(|f| [f[0].0, f[1].0, f[2].0]).collect(),
        basis_names: side.basis.iter().map(|b| b.name.clone()).collect(),
        basis: side.basis.iter().map(|b| b.field.iter().map(v3).collect()).collect(),
        joints: side
            .joints
            .iter()
            .map(|j| Joint { name: j.name.clone(), parent: j.parent, origin: v3(&j.origin) })
            .collect(),
        weights: side.weights,
        pose_limits: side.pose_limits,
    };
    body.validate()?;
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = crate::body::humanoid();
        let (o, s) = (dir.path().join("body.obj"), dir.path().join("body.json"));
        save_body(&b, &o, &s).unwrap();
        let back = load_body(&o, &s).unwrap();
        assert_eq!(back.faces, b.faces);
        assert_eq!(back.joints, b.joints);
        assert_eq!(back.weights, b.weights);
        for (p, q) in back.rest_vertices.iter().zip(&b.rest_vertices) {
            assert!((p - q).norm() < 1e-12);
        }
    }
}
