//! OBJ reading/writing and the pattern sidecar format.
//!
//! Pattern OBJ: `vt` lines carry 2D rest coordinates (meters) and `v` lines an
//! optional initial 3D embedding. Pattern vertex `i` is texture coordinate `i`.
//!
//! Sidecar lines:
//! ```text
//! seam <panel_a> <i0 i1 ...> <panel_b> <j0 j1 ...>
//! pin <v0 v1 ...>
//! boundary <label> <v0 v1 ...>
//! ```
//! Both chains of a seam have the same length, so the split is implied by
//! the token count. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::{PatternMesh, SeamPair};
use crate::math::{Vec2, Vec3};
use crate::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct ObjMesh {
    pub positions: Vec<Vec3>,
    pub texcoords: Vec<Vec2>,
    /// Per corner: (position index, texcoord index).
    pub faces: Vec<[(usize, Option<usize>); 3]>,
}

pub fn read_obj(path: &Path) -> Result<ObjMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

pub(crate) fn parse_obj(text: &str, name: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let nums = |tok: std::str::SplitWhitespace, n: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = tok
                .take(n)
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(name, ln + 1, format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() < n {
                return Err(Error::parse(name, ln + 1, "too few coordinates"));
            }
            Ok(vals)
        };
        match kind {
            "v" => {
                let c = nums(tok, 3)?;
                mesh.positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                let c = nums(tok, 2)?;
                mesh.texcoords.push(Vec2::new(c[0], c[1]));
            }
            "f" => {
                let corners: Vec<(usize, Option<usize>)> = tok
                    .map(|t| parse_corner(t, mesh.positions.len(), mesh.texcoords.len(), name, ln + 1))
                    .collect::<Result<_>>()?;
                if corners.len() < 3 {
                    return Err(Error::parse(name, ln + 1, "face with fewer than 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    mesh.faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

fn parse_corner(t: &str, nv: usize, nvt: usize, name: &str, line: usize) -> Result<(usize, Option<usize>)> {
    let mut parts = t.split('/');
    let resolve = |s: &str, n: usize| -> Result<usize> {
        let i: i64 = s.parse().map_err(|_| Error::parse(name, line, format!("bad index {s:?}")))?;
        let idx = if i < 0 { n as i64 + i } else { i - 1 };
        if idx < 0 || idx as usize >= n {
            return Err(Error::parse(name, line, format!("index {i} out of range")));
        }
        Ok(idx as usize)
    };
    let v = resolve(parts.next().unwrap_or(""), nv)?;
    let vt = match parts.next() {
        Some(s) if !s.is_empty() => Some(resolve(s, nvt)?),
        _ => None,
    };
    Ok((v, vt))
}

/// Seams, pins and labeled garment boundaries stored next to a pattern OBJ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternSidecar {
    pub seams: Vec<(usize, SeamPair, usize)>,
    pub pins: Vec<usize>,
    pub boundaries: Vec<(String, Vec<usize>)>,
}

pub fn read_sidecar(path: &Path) -> Result<PatternSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sidecar(&text, &path.display().to_string())
}

pub(crate) fn parse_sidecar(text: &str, name: &str) -> Result<PatternSidecar> {
    let mut out = PatternSidecar::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let ints = |tok: std::str::SplitWhitespace| -> Result<Vec<usize>> {
            tok.map(|t| t.parse::<usize>().map_err(|_| Error::parse(name, ln + 1, format!("bad index {t:?}"))))
                .collect()
        };
        match kind {
            "seam" => {
                let v = ints(tok)?;
                if v.len() < 6 || v.len() % 2 != 0 {
                    return Err(Error::parse(name, ln + 1, "seam needs two equal-length chains of >= 2 vertices"));
                }
                let n = (v.len() - 2) / 2;
                let side_a = v[1..1 + n].to_vec();
                let side_b = v[2 + n..].to_vec();
                out.seams.push((v[0], SeamPair::new(side_a, side_b), v[1 + n]));
            }
            "pin" => out.pins.extend(ints(tok)?),
            "boundary" => {
                let label = tok
                    .next()
                    .ok_or_else(|| Error::parse(name, ln + 1, "boundary needs a label"))?
                    .to_string();
                out.boundaries.push((label, ints(tok)?));
            }
            other => return Err(Error::parse(name, ln + 1, format!("unknown record {other:?}"))),
        }
    }
    Ok(out)
}

pub fn write_sidecar(sidecar: &PatternSidecar) -> String {
    let mut s = String::new();
    for (pa, seam, pb) in &sidecar.seams {
        let a: Vec<String> = seam.side_a.iter().map(|v| v.to_string()).collect();
        let b: Vec<String> = seam.side_b.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "seam {pa} {} {pb} {}", a.join(" "), b.join(" "));
    }
    if !sidecar.pins.is_empty() {
        let p: Vec<String> = sidecar.pins.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "pin {}", p.join(" "));
    }
    for (label, verts) in &sidecar.boundaries {
        let p: Vec<String> = verts.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "boundary {label} {}", p.join(" "));
    }
    s
}

/// Load a pattern OBJ and, optionally, its sidecar (seams are attached to the
/// mesh; pins and boundaries are returned in the sidecar).
pub fn load_pattern(obj: &Path, sidecar: Option<&Path>) -> Result<(PatternMesh, PatternSidecar)> {
    let raw = read_obj(obj)?;
    let side = match sidecar {
        Some(p) => read_sidecar(p)?,
        None => PatternSidecar::default(),
    };
    let mesh = pattern_from_obj(&raw, &side, &obj.display().to_string())?;
    Ok((mesh, side))
}

pub(crate) fn pattern_from_obj(raw: &ObjMesh, side: &PatternSidecar, name: &str) -> Result<PatternMesh> {
    let use_vt = !raw.texcoords.is_empty();
    let nv = if use_vt { raw.texcoords.len() } else { raw.positions.len() };
    let mut embedding: Vec<Option<Vec3>> = vec![None; nv];
    let mut faces = Vec::with_capacity(raw.faces.len());
    for (fi, f) in raw.faces.iter().enumerate() {
        let mut tri = [0usize; 3];
        for (k, &(v, vt)) in f.iter().enumerate() {
            let idx = if use_vt {
                vt.ok_or_else(|| Error::parse(name, 0, format!("face {fi} lacks texture coordinates")))?
            } else {
                v
            };
            let p = raw.positions[v];
            match embedding[idx] {
                Some(q) if q != p => {
                    return Err(Error::parse(
                        name,
                        0,
                        format!("texture vertex {idx} maps to two different 3D positions"),
                    ))
                }
                _ => embedding[idx] = Some(p),
            }
            tri[k] = idx;
        }
        faces.push(tri);
    }
    let verts_2d: Vec<Vec2> = if use_vt {
        raw.texcoords.clone()
    } else {
        raw.positions.iter().map(|p| Vec2::new(p.x, p.y)).collect()
    };
    let embedding = if !raw.positions.is_empty() && embedding.iter().all(|e| e.is_some()) {
        Some(embedding.into_iter().map(|e| e.expect("checked")).collect())
    } else {
        None
    };
    let seams: Vec<SeamPair> = side.seams.iter().map(|(_, s, _)| s.clone()).collect();
    let mesh = PatternMesh::new(verts_2d, faces, seams, embedding)?;
    for (i, (pa, s, pb)) in side.seams.iter().enumerate() {
        let ok_a = s.side_a.iter().all(|&v| mesh.panel_of_vertex[v] == *pa);
        let ok_b = s.side_b.iter().all(|&v| mesh.panel_of_vertex[v] == *pb);
        if !(ok_a && ok_b) {
            return Err(Error::InvalidSeam {
                index: i,
                msg: format!("chain vertices do not belong to panels {pa} and {pb}"),
            });
        }
    }
    Ok(mesh)
}

/// OBJ with `v` and `vt`; `v` is the embedding when present, else the rest
/// coordinates at z = 0.
pub fn write_obj(mesh: &PatternMesh, positions: Option<&[Vec3]>) -> String {
    let mut s = String::new();
    let pos: Vec<Vec3> = match (positions, &mesh.embedding) {
        (Some(p), _) => p.to_vec(),
        (None, Some(e)) => e.clone(),
        (None, None) => mesh.vertices_2d.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect(),
    };
    for p in &pos {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for t in &mesh.vertices_2d {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {0}/{0} {1}/{1} {2}/{2}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

/// Write a pattern OBJ plus its seam sidecar (only when it has seams or
/// extra records).
pub fn save_pattern(mesh: &PatternMesh, sidecar: &PatternSidecar, obj: &Path, side_path: Option<&Path>) -> Result<()> {
    std::fs::write(obj, write_obj(mesh, None)).map_err(|e| Error::io(obj, e))?;
    if let Some(p) = side_path {
        std::fs::write(p, write_sidecar(sidecar)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

pub fn write_points_obj(points: &[Vec3]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    s
}
