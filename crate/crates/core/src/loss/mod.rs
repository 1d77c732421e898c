//! Garment-matching loss φ = ρ·boundary + σ·interior + α·seam + β·curvature
//! with analytic partials in the simulated positions x and the pattern p.

mod boundary;
mod chamfer;
mod curvature;
mod kdtree;
mod seam;

pub use boundary::{boundary_loss, BoundaryEval, Polyline};
pub use chamfer::{chamfer, chamfer_brute_force, metric_chamfer, ChamferEval};
pub use curvature::{curvature_loss, CurvatureEval};
pub use kdtree::{nearest_brute_force, KdTree};
pub use seam::{max_seam_mismatch, seam_length_loss, SeamEval};

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::math::{Vec2, Vec3};
use crate::pattern::{read_obj, write_points_obj, SeamPair};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub boundary: f64,
    pub interior: f64,
    pub seam: f64,
    pub curvature: f64,
    /// Per pattern vertex; uniform 1 when absent.
    pub curvature_weights: Option<Vec<f64>>,
    pub seam_signed: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { boundary: 1.0, interior: 1.0, seam: 0.1, curvature: 0.1, curvature_weights: None, seam_signed: false }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.boundary, self.interior, self.seam, self.curvature].iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("loss weights must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TargetGarment {
    pub interior: Vec<Vec3>,
    pub boundaries: Vec<Polyline>,
    pub mask: Option<Vec<bool>>,
}

impl TargetGarment {
    pub fn valid_interior(&self) -> Vec<Vec3> {
        match &self.mask {
            Some(m) => self.interior.iter().zip(m).filter(|(_, &k)| k).map(|(p, _)| *p).collect(),
            None => self.interior.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.valid_interior().is_empty() {
            return Err(Error::InvalidParameter("target has no interior points".into()));
        }
        if let Some(b) = self.boundaries.iter().find(|b| b.points.len() < 2) {
            return Err(Error::InvalidParameter(format!("target polyline {:?} has fewer than 2 points", b.label)));
        }
        Ok(())
    }

    /// Sample a target from simulated positions. `noise` is the RMS length
    /// of an isotropic Gaussian displacement per point (so the expected
    /// Chamfer distance to the clean points is about 2·noise²); `dropout`
    /// removes that fraction of interior points.
    pub fn from_drape(
        x: &[Vec3],
        labeled: &[(String, Vec<usize>)],
        closed: &[bool],
        noise: f64,
        dropout: f64,
        seed: u64,
    ) -> TargetGarment {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut interior = x.to_vec();
        if noise > 0.0 {
            let n = Normal::new(0.0, noise / 3f64.sqrt()).expect("finite sigma");
            for p in &mut interior {
                *p += Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
        }
        if dropout > 0.0 {
            let drop = ((dropout.clamp(0.0, 1.0)) * interior.len() as f64).round() as usize;
            let mut idx: Vec<usize> = (0..interior.len()).collect();
            idx.shuffle(&mut rng);
            let mut keep = vec![true; interior.len()];
            for &i in &idx[..drop.min(interior.len().saturating_sub(1))] {
                keep[i] = false;
            }
            interior = interior.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| p).collect();
        }
        let boundaries = labeled
            .iter()
            .zip(closed.iter().chain(std::iter::repeat(&false)))
            .map(|((label, verts), &c)| Polyline { label: label.clone(), points: verts.iter().map(|&v| x[v]).collect(), closed: c })
            .collect();
        TargetGarment { interior, boundaries, mask: None }
    }

    /// Interior points as OBJ and boundaries as `boundary <label>
    /// <closed|open> <n>` followed by `n` lines of `x y z`.
    pub fn save(&self, points_obj: &Path, polylines: &Path) -> Result<()> {
        std::fs::write(points_obj, write_points_obj(&self.valid_interior())).map_err(|e| Error::io(points_obj, e))?;
        let mut s = String::new();
        for b in &self.boundaries {
            let _ = writeln!(s, "boundary {} {} {}", b.label, if b.closed { "closed" } else { "open" }, b.points.len());
            for p in &b.points {
                let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
            }
        }
        std::fs::write(polylines, s).map_err(|e| Error::io(polylines, e))
    }

    pub fn load(points_obj: &Path, polylines: &Path) -> Result<TargetGarment> {
        let interior = read_obj(points_obj)?.positions;
        let text = std::fs::read_to_string(polylines).map_err(|e| Error::io(polylines, e))?;
        let name = polylines.display().to_string();
        let mut boundaries = Vec::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        while let Some((ln, l)) = lines.next() {
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 4 || tok[0] != "boundary" {
                return Err(Error::parse(&name, ln + 1, "expected `boundary <label> <closed|open> <n>`"));
            }
            let closed = match tok[2] {
                "closed" => true,
                "open" => false,
                o => return Err(Error::parse(&name, ln + 1, format!("expected closed|open, got {o:?}"))),
            };
            let n: usize = tok[3].parse().map_err(|_| Error::parse(&name, ln + 1, "bad point count"))?;
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, l) = lines.next().ok_or_else(|| Error::parse(&name, ln + 1, "truncated polyline"))?;
                let c: Vec<f64> = l
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::parse(&name, ln + 1, format!("bad number {t:?}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::parse(&name, ln + 1, "expected 3 coordinates"));
                }
                points.push(Vec3::new(c[0], c[1], c[2]));
            }
            boundaries.push(Polyline { label: tok[1].to_string(), points, closed });
        }
        let t = TargetGarment { interior, boundaries, mask: None };
        t.validate()?;
        Ok(t)
    }
}

/// Everything the loss reads from the current iterate.
pub struct LossInputs<'a> {
    /// Simulated garment vertex positions (all vertices enter the Chamfer term).
    pub x: &'a [Vec3],
    pub labeled: &'a [(String, Vec<usize>)],
    pub pattern: &'a [Vec2],
    pub reference: &'a [Vec2],
    pub loops: &'a [Vec<usize>],
    pub seams: &'a [SeamPair],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub boundary: f64,
    pub interior: f64,
    pub seam: f64,
    pub curvature: f64,
}

#[derive(Clone, Debug)]
pub struct LossEval {
    pub value: f64,
    /// Unweighted term values.
    pub terms: LossTerms,
    pub dx: Vec<Vec3>,
    pub dp: Vec<Vec2>,
}

pub fn total_loss(inp: &LossInputs, target: &TargetGarment, cfg: &LossConfig) -> Result<LossEval> {
    let mut dx = vec![Vec3::zeros(); inp.x.len()];
    let mut dp = vec![Vec2::zeros(); inp.pattern.len()];
    let mut terms = LossTerms::default();
    if cfg.boundary > 0.0 {
        let b = boundary_loss(inp.x, inp.labeled, &target.boundaries)?;
        terms.boundary = b.value;
        for (d, g) in dx.iter_mut().zip(&b.grad) {
            *d += g * cfg.boundary;
        }
    }
    if cfg.interior > 0.0 {
        let c = chamfer(inp.x, &target.valid_interior());
        terms.interior = c.value;
        for (d, g) in dx.iter_mut().zip(&c.grad) {
            *d += g * cfg.interior;
        }
    }
    if cfg.seam > 0.0 {
        let s = seam_length_loss(inp.pattern, inp.seams, cfg.seam_signed);
        terms.seam = s.value;
        for (d, g) in dp.iter_mut().zip(&s.grad) {
            *d += g * cfg.seam;
        }
    }
    if cfg.curvature > 0.0 {
        let c = curvature_loss(inp.pattern, inp.reference, inp.loops, cfg.curvature_weights.as_deref());
        terms.curvature = c.value;
        for (d, g) in dp.iter_mut().zip(&c.grad) {
            *d += g * cfg.curvature;
        }
    }
    let value =
        cfg.boundary * terms.boundary + cfg.interior * terms.interior + cfg.seam * terms.seam + cfg.curvature * terms.curvature;
    Ok(LossEval { value, terms, dx, dp })
}
