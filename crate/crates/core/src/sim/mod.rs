//! XPBD cloth simulation: orthotropic Green-strain triangles, dihedral
//! hinges, zero-length seam stitches and unilateral cloth–body contact,
//! solved with a fixed-order colored Gauss-Seidel sweep.
//!
//! Every step can be re-run exactly from its stored start state and contact
//! record, which is what the adjoint relies on: it replays one step at a time
//! with a projection tape instead of storing all inner iterations.

pub mod constraints;
mod schedule;

use std::path::Path;

use crate::body::PosedBody;
use crate::math::{Mat2, Vec3};
use crate::pattern::PatternMesh;
use crate::{Error, Result};
pub use constraints::{
    deformation_gradient, df_dxbar, dihedral_constraint, green_strain, Contact, HingeInput, StitchInput,
    StrainInput,
};
pub use schedule::color_order;

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    /// Compliance of [ε00, ε11, ε01] (weft, warp, shear), in 1/(N/m).
    pub stretch: [f64; 3],
    /// Hinge compliance, in 1/(N·m).
    pub bend: f64,
    /// Areal density, kg/m².
    pub density: f64,
    /// Collision thickness r, m.
    pub thickness: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { stretch: [1e-3, 1e-3, 3e-3], bend: 200.0, density: 0.15, thickness: 0.004 }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let ok = self.stretch.iter().all(|a| *a >= 0.0 && a.is_finite())
            && self.bend >= 0.0
            && self.bend.is_finite()
            && self.density > 0.0
            && self.thickness >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid material {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub iterations: usize,
    /// Velocity multiplier applied after each step; 1 disables damping.
    pub damping: f64,
    pub gravity: Vec3,
    pub stitch_compliance: f64,
    /// Contacts are created when the predicted distance is below r·(1 + margin).
    pub contact_margin: f64,
    pub v_tol: f64,
    pub max_steps: usize,
    /// Equilibrium is not declared before this many steps.
    pub min_steps: usize,
    /// Consecutive steps below `v_tol` required, so the turning point of a
    /// slow swing is not mistaken for rest.
    pub settle_steps: usize,
    pub max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            iterations: 20,
            damping: 0.998,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            stitch_compliance: 1e-8,
            contact_margin: 0.5,
            v_tol: 1e-3,
            max_steps: 400,
            min_steps: 0,
            settle_steps: 5,
            max_speed: 1e3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.iterations == 0 || self.max_steps == 0 || !(self.damping > 0.0 && self.damping <= 1.0)
        {
            return Err(Error::InvalidParameter(format!("invalid simulation config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hinge {
    /// Shared edge (0, 1); 2 is opposite in face (0, 1, 2), 3 in (1, 0, 3).
    pub v: [usize; 4],
    pub rest_angle: f64,
}

/// Topology and fixed structure of a garment: constraints, pins and the
/// projection order.
#[derive(Clone, Debug)]
pub struct Cloth {
    pub num_vertices: usize,
    pub faces: Vec<[usize; 3]>,
    pub hinges: Vec<Hinge>,
    pub stitches: Vec<[usize; 2]>,
    pub pinned: Vec<bool>,
    pub strain_order: Vec<usize>,
    pub hinge_order: Vec<usize>,
    pub stitch_order: Vec<usize>,
    pub colors: [usize; 3],
}

impl Cloth {
    pub fn new(mesh: &PatternMesh, pins: &[usize]) -> Result<Cloth> {
        let n = mesh.num_vertices();
        let mut pinned = vec![false; n];
        for &p in pins {
            if p >= n {
                return Err(Error::Dimension(format!("pin {p} out of range ({n} vertices)")));
            }
            pinned[p] = true;
        }
        // Directed edge → (face, opposite vertex).
        let mut directed = std::collections::HashMap::new();
        for f in &mesh.faces {
            for k in 0..3 {
                directed.insert((f[k], f[(k + 1) % 3]), f[(k + 2) % 3]);
            }
        }
        let mut hinges = Vec::new();
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a < b {
                    if let Some(&d) = directed.get(&(b, a)) {
                        hinges.push(Hinge { v: [a, b, f[(k + 2) % 3], d], rest_angle: std::f64::consts::PI });
                    }
                }
            }
        }
        let mut stitches: Vec<[usize; 2]> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for s in &mesh.seams {
            for (&a, &b) in s.side_a.iter().zip(&s.side_b) {
                if a != b && seen.insert((a.min(b), a.max(b))) {
                    stitches.push([a, b]);
                }
            }
        }
        let (strain_order, c0) = color_order(mesh.faces.iter().map(|f| f.to_vec()), n);
        let (hinge_order, c1) = color_order(hinges.iter().map(|h| h.v.to_vec()), n);
        let (stitch_order, c2) = color_order(stitches.iter().map(|s| s.to_vec()), n);
        Ok(Cloth {
            num_vertices: n,
            faces: mesh.faces.clone(),
            hinges,
            stitches,
            pinned,
            strain_order,
            hinge_order,
            stitch_order,
            colors: [c0, c1, c2],
        })
    }
}

/// Rest-shape dependent quantities: D̄⁻¹ and area per face, inverse lumped
/// mass per vertex (zero for pins).
#[derive(Clone, Debug)]
pub struct RestState {
    pub dm_inv: Vec<Mat2>,
    pub area: Vec<f64>,
    pub inv_mass: Vec<f64>,
    pub density: f64,
}

impl RestState {
    pub fn new(cloth: &Cloth, mesh: &PatternMesh, density: f64) -> Result<RestState> {
        let r = mesh.build_rest_shape(density)?;
        let inv_mass = r
            .mass
            .iter()
            .zip(&cloth.pinned)
            .map(|(&m, &p)| if p || m <= 0.0 { 0.0 } else { 1.0 / m })
            .collect();
        Ok(RestState { dm_inv: r.dm_inv, area: r.area, inv_mass, density })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub n: usize,
}

impl SimState {
    pub fn at_rest(x: Vec<Vec3>) -> SimState {
        let v = vec![Vec3::zeros(); x.len()];
        SimState { x, v, n: 0 }
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Everything a step needs to be replayed: contact frames, per-iteration
/// contact activity and the final multipliers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepRecord {
    pub contacts: Vec<Contact>,
    /// `active[it * contacts.len() + k]`
    pub active: Vec<bool>,
    pub lambda_strain: Vec<Vec3>,
    pub lambda_bend: Vec<f64>,
    pub lambda_stitch: Vec<Vec3>,
    pub skipped: usize,
}

impl StepRecord {
    pub fn num_active_contacts(&self, iterations: usize) -> usize {
        let nc = self.contacts.len();
        if nc == 0 {
            return 0;
        }
        let last = &self.active[(iterations - 1) * nc..];
        last.iter().filter(|a| **a).count()
    }
}

#[derive(Clone, Debug)]
pub enum TapeEntry {
    Strain(usize, StrainInput),
    Hinge(usize, HingeInput),
    Stitch(usize, StitchInput),
    Contact(usize),
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<SimState>,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn num_steps(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> &SimState {
        self.states.last().expect("trajectory has a start state")
    }

    /// One OBJ per state, `frame_0000.obj` onwards.
    pub fn export_obj_sequence(&self, mesh: &PatternMesh, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, s) in self.states.iter().enumerate() {
            let p = dir.join(format!("frame_{i:04}.obj"));
            std::fs::write(&p, crate::pattern::write_obj(mesh, Some(&s.x))).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    Fixed(usize),
    /// Stop when max speed < v_tol (after `min_steps`) or at `max_steps`.
    Equilibrium,
}

/// A simulation context: borrowed cloth, rest state, material, config and an
/// optional posed body.
#[derive(Clone, Copy)]
pub struct Simulator<'a> {
    pub cloth: &'a Cloth,
    pub rest: &'a RestState,
    pub material: &'a Material,
    pub config: &'a SimConfig,
    pub body: Option<&'a PosedBody>,
}

impl<'a> Simulator<'a> {
    pub fn strain_alpha(&self, face: usize) -> Vec3 {
        let s = 1.0 / (self.rest.area[face] * self.config.dt * self.config.dt);
        Vec3::new(self.material.stretch[0] * s, self.material.stretch[1] * s, self.material.stretch[2] * s)
    }

    pub fn bend_alpha(&self) -> f64 {
        self.material.bend / (self.config.dt * self.config.dt)
    }

    pub fn stitch_alpha(&self) -> f64 {
        self.config.stitch_compliance / (self.config.dt * self.config.dt)
    }

    fn detect_contacts(&self, x: &[Vec3]) -> Vec<Contact> {
        let Some(body) = self.body else { return Vec::new() };
        let r = self.material.thickness;
        let reach = r * (1.0 + self.config.contact_margin);
        let mut out = Vec::new();
        for (i, p) in x.iter().enumerate() {
            if self.rest.inv_mass[i] == 0.0 {
                continue;
            }
            let hit = body.closest_point(p);
            if hit.signed_distance < reach {
                out.push(Contact { vertex: i, face: hit.face, bary: hit.bary, normal: hit.normal });
            }
        }
        out
    }

    /// Advance one step. With `frozen`, the contact set and per-iteration
    /// activity are taken from that record instead of being detected.
    pub fn step(
        &self,
        state: &SimState,
        frozen: Option<&StepRecord>,
        mut tape: Option<&mut Vec<TapeEntry>>,
    ) -> Result<(SimState, StepRecord)> {
        let cfg = self.config;
        let dt = cfg.dt;
        let w = &self.rest.inv_mass;
        let mut x: Vec<Vec3> = state
            .x
            .iter()
            .zip(&state.v)
            .zip(w)
            .map(|((x, v), &wi)| if wi > 0.0 { x + v * dt + cfg.gravity * (dt * dt) } else { *x })
            .collect();

        let contacts = match frozen {
            Some(r) => r.contacts.clone(),
            None => self.detect_contacts(&x),
        };
        let nc = contacts.len();
        let mut active = Vec::with_capacity(nc * cfg.iterations);
        let body_points: Vec<Vec3> = match self.body {
            Some(b) => contacts.iter().map(|c| c.surface_point(&b.vertices, &b.faces)).collect(),
            None => Vec::new(),
        };
        if nc > 0 && self.body.is_none() {
            return Err(Error::InvalidParameter("contact record without a body".into()));
        }

        let cloth = self.cloth;
        let mut l_strain = vec![Vec3::zeros(); cloth.faces.len()];
        let mut l_bend = vec![0.0; cloth.hinges.len()];
        let mut l_stitch = vec![Vec3::zeros(); cloth.stitches.len()];
        let alpha_b = self.bend_alpha();
        let alpha_s = self.stitch_alpha();
        let r = self.material.thickness;
        let mut skipped = 0;

        for it in 0..cfg.iterations {
            for &fi in &cloth.strain_order {
                let f = cloth.faces[fi];
                let inp = StrainInput {
                    x: [x[f[0]], x[f[1]], x[f[2]]],
                    lambda: l_strain[fi],
                    dm_inv: self.rest.dm_inv[fi],
                    alpha: self.strain_alpha(fi),
                    w: [w[f[0]], w[f[1]], w[f[2]]],
                };
                match constraints::strain_project(&inp) {
                    Some((dx, dl)) => {
                        for k in 0..3 {
                            x[f[k]] += dx[k];
                        }
                        l_strain[fi] += dl;
                        if let Some(t) = tape.as_deref_mut() {
                            t.push(TapeEntry::Strain(fi, inp));
                        }
                    }
                    None => skipped += 1,
                }
            }
            for &hi in &cloth.hinge_order {
                let h = cloth.hinges[hi];
                let inp = HingeInput {
                    x: h.v.map(|i| x[i]),
                    lambda: l_bend[hi],
                    rest_angle: h.rest_angle,
                    alpha: alpha_b,
                    w: h.v.map(|i| w[i]),
                };
                match constraints::hinge_project(&inp) {
                    Some((dx, dl)) => {
                        for k in 0..4 {
                            x[h.v[k]] += dx[k];
                        }
                        l_bend[hi] += dl;
                        if let Some(t) = tape.as_deref_mut() {
                            t.push(TapeEntry::Hinge(hi, inp));
                        }
                    }
                    None => skipped += 1,
                }
            }
            for &si in &cloth.stitch_order {
                let [a, b] = cloth.stitches[si];
                let inp = StitchInput { x: [x[a], x[b]], lambda: l_stitch[si], alpha: alpha_s, w: [w[a], w[b]] };
                match constraints::stitch_project(&inp) {
                    Some((dx, dl)) => {
                        x[a] += dx[0];
                        x[b] += dx[1];
                        l_stitch[si] += dl;
                        if let Some(t) = tape.as_deref_mut() {
                            t.push(TapeEntry::Stitch(si, inp));
                        }
                    }
                    None => skipped += 1,
                }
            }
            for (k, c) in contacts.iter().enumerate() {
                let p = &body_points[k];
                let value = constraints::contact_value(&x[c.vertex], p, &c.normal, r);
                let on = match frozen {
                    Some(rec) => rec.active[it * nc + k],
                    None => value < 0.0,
                };
                active.push(on);
                if on {
                    x[c.vertex] -= c.normal * value;
                    if let Some(t) = tape.as_deref_mut() {
                        t.push(TapeEntry::Contact(k));
                    }
                }
            }
        }

        let inv_dt = cfg.damping / dt;
        let v: Vec<Vec3> = x.iter().zip(&state.x).map(|(a, b)| (a - b) * inv_dt).collect();
        let mut speed: f64 = 0.0;
        for (p, vi) in x.iter().zip(&v) {
            if !(p.iter().all(|c| c.is_finite()) && vi.iter().all(|c| c.is_finite())) {
                return Err(Error::NonFinite { step: state.n });
            }
            speed = speed.max(vi.norm());
        }
        if speed > cfg.max_speed {
            return Err(Error::Diverged { step: state.n, speed });
        }
        let record = StepRecord {
            contacts,
            active,
            lambda_strain: l_strain,
            lambda_bend: l_bend,
            lambda_stitch: l_stitch,
            skipped,
        };
        Ok((SimState { x, v, n: state.n + 1 }, record))
    }

    pub fn run(&self, state0: SimState, stop: StopRule) -> Result<Trajectory> {
        self.run_inner(state0, stop, None)
    }

    /// Re-run the trajectory from its first state with its contact records.
    pub fn replay(&self, base: &Trajectory) -> Result<Trajectory> {
        self.run_inner(base.states[0].clone(), StopRule::Fixed(base.num_steps()), Some(base))
    }

    /// Same as [`Simulator::replay`] for a different start state.
    pub fn run_frozen(&self, state0: SimState, base: &Trajectory) -> Result<Trajectory> {
        self.run_inner(state0, StopRule::Fixed(base.num_steps()), Some(base))
    }

    pub fn drape_to_equilibrium(&self, state0: SimState) -> Result<Trajectory> {
        self.run(state0, StopRule::Equilibrium)
    }

    fn run_inner(&self, state0: SimState, stop: StopRule, frozen: Option<&Trajectory>) -> Result<Trajectory> {
        self.config.validate()?;
        self.material.validate()?;
        if state0.x.len() != self.cloth.num_vertices || state0.v.len() != self.cloth.num_vertices {
            return Err(Error::Dimension(format!(
                "state has {} vertices, cloth {}",
                state0.x.len(),
                self.cloth.num_vertices
            )));
        }
        let max = match stop {
            StopRule::Fixed(n) => n,
            StopRule::Equilibrium => self.config.max_steps,
        };
        let mut traj = Trajectory { states: vec![state0], records: Vec::new() };
        let mut slow = 0;
        for n in 0..max {
            let rec = frozen.map(|t| &t.records[n]);
            let (next, record) = self.step(traj.last(), rec, None)?;
            slow = if next.max_speed() < self.config.v_tol { slow + 1 } else { 0 };
            let done = stop == StopRule::Equilibrium
                && n + 1 >= self.config.min_steps
                && slow >= self.config.settle_steps.max(1);
            traj.states.push(next);
            traj.records.push(record);
            if done {
                break;
            }
        }
        Ok(traj)
    }
}

pub fn kinetic_energy(state: &SimState, rest: &RestState) -> f64 {
    state
        .v
        .iter()
        .zip(&rest.inv_mass)
        .map(|(v, &w)| if w > 0.0 { 0.5 * v.norm_squared() / w } else { 0.0 })
        .sum()
}

/// XPBD-consistent elastic energy Σ A·½ Σ_k ε_k²/α_k over faces plus the
/// hinge energy Σ ½ C²/λ_bend.
pub fn elastic_energy(x: &[Vec3], cloth: &Cloth, rest: &RestState, material: &Material) -> f64 {
    let mut e = 0.0;
    for (fi, f) in cloth.faces.iter().enumerate() {
        let eps = green_strain(&deformation_gradient(&[x[f[0]], x[f[1]], x[f[2]]], &rest.dm_inv[fi]));
        for k in 0..3 {
            if material.stretch[k] > 0.0 {
                e += rest.area[fi] * 0.5 * eps[k] * eps[k] / material.stretch[k];
            }
        }
    }
    if material.bend > 0.0 {
        for h in &cloth.hinges {
            if let Some((c, _)) = dihedral_constraint(&h.v.map(|i| x[i]), h.rest_angle) {
                e += 0.5 * c * c / material.bend;
            }
        }
    }
    e
}

pub fn max_strain(x: &[Vec3], cloth: &Cloth, rest: &RestState) -> f64 {
    cloth
        .faces
        .iter()
        .enumerate()
        .map(|(fi, f)| green_strain(&deformation_gradient(&[x[f[0]], x[f[1]], x[f[2]]], &rest.dm_inv[fi])).amax())
        .fold(0.0, f64::max)
}

/// Area-weighted squared strain Σ A |ε|² with its partials with respect to
/// positions, D̄⁻¹ and area.
pub struct StrainMeasure {
    pub value: f64,
    pub dx: Vec<Vec3>,
    pub d_dm_inv: Vec<Mat2>,
    pub d_area: Vec<f64>,
}

pub fn strain_measure(x: &[Vec3], cloth: &Cloth, rest: &RestState) -> StrainMeasure {
    let mut m = StrainMeasure {
        value: 0.0,
        dx: vec![Vec3::zeros(); x.len()],
        d_dm_inv: vec![Mat2::zeros(); cloth.faces.len()],
        d_area: vec![0.0; cloth.faces.len()],
    };
    for (fi, f) in cloth.faces.iter().enumerate() {
        let b = rest.dm_inv[fi];
        let d = crate::math::Mat32::from_columns(&[x[f[0]] - x[f[2]], x[f[1]] - x[f[2]]]);
        let ff = d * b;
        let eps = green_strain(&ff);
        let a = rest.area[fi];
        m.value += a * eps.norm_squared();
        m.d_area[fi] = eps.norm_squared();
        let e_hat = eps * (2.0 * a);
        let f0 = ff.column(0).into_owned();
        let f1 = ff.column(1).into_owned();
        let f_hat = crate::math::Mat32::from_columns(&[
            f0 * e_hat[0] + f1 * (0.5 * e_hat[2]),
            f1 * e_hat[1] + f0 * (0.5 * e_hat[2]),
        ]);
        let d_hat = f_hat * b.transpose();
        m.d_dm_inv[fi] = d.transpose() * f_hat;
        let d0: Vec3 = d_hat.column(0).into_owned();
        let d1: Vec3 = d_hat.column(1).into_owned();
        m.dx[f[0]] += d0;
        m.dx[f[1]] += d1;
        m.dx[f[2]] -= d0 + d1;
    }
    m
}
