//! Reverse pass over a stored trajectory.
//!
//! The forward step is a fixed composition of local projections, so its
//! transpose is applied exactly: each step is replayed from its stored start
//! state and contact record with a projection tape, and the tape is walked
//! backwards through the constraint VJPs. The per-step linear system of the
//! continuous adjoint formulation is therefore never formed; its solution is
//! what this sweep computes.

mod check;

use crate::body::BodyModel;
use crate::cage::ControlCage;
use crate::math::{Mat2, Vec2, Vec3};
use crate::pattern::PatternMesh;
use crate::sim::constraints::{hinge_project_vjp, stitch_project_vjp, strain_project_vjp};
use crate::sim::{Simulator, TapeEntry, Trajectory};
use crate::{Error, Result};
pub use check::{finite_difference_check, CheckOptions, CheckReport, CheckRow};

#[derive(Clone, Debug, PartialEq)]
pub struct AdjointState {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub n: usize,
}

/// ∂φ/∂xₙ and ∂φ/∂vₙ per state; an empty vector means zero.
#[derive(Clone, Debug, Default)]
pub struct LossPartials {
    pub dx: Vec<Vec<Vec3>>,
    pub dv: Vec<Vec<Vec3>>,
}

impl LossPartials {
    /// Loss on the final state only.
    pub fn final_state(num_states: usize, dx: Vec<Vec3>) -> LossPartials {
        let mut p = LossPartials { dx: vec![Vec::new(); num_states], dv: vec![Vec::new(); num_states] };
        p.dx[num_states - 1] = dx;
        p
    }
}

/// Adjoints of everything the forward pass read besides the states.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamAdjoints {
    pub dm_inv: Vec<Mat2>,
    /// Explicit area adjoint (from losses acting on the rest shape).
    pub area: Vec<f64>,
    pub inv_mass: Vec<f64>,
    /// Adjoint of the scaled compliance α̃ per face.
    pub strain_alpha: Vec<Vec3>,
    pub bend_alpha: f64,
    pub body_vertices: Vec<Vec3>,
}

impl ParamAdjoints {
    fn zeros(faces: usize, verts: usize, body_verts: usize) -> ParamAdjoints {
        ParamAdjoints {
            dm_inv: vec![Mat2::zeros(); faces],
            area: vec![0.0; faces],
            inv_mass: vec![0.0; verts],
            strain_alpha: vec![Vec3::zeros(); faces],
            bend_alpha: 0.0,
            body_vertices: vec![Vec3::zeros(); body_verts],
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdjointResult {
    /// `states[n]` is the adjoint of trajectory state n.
    pub states: Vec<AdjointState>,
    pub params: ParamAdjoints,
}

/// Backward sweep. Steps are replayed from the trajectory's own states and
/// records, so the result is exact for the recorded forward computation.
pub fn adjoint_sweep(sim: &Simulator, traj: &Trajectory, partials: &LossPartials) -> Result<AdjointResult> {
    let n_states = traj.states.len();
    let nv = sim.cloth.num_vertices;
    if partials.dx.len() != n_states || partials.dv.len() != n_states {
        return Err(Error::Dimension(format!(
            "loss partials for {} / {} states, trajectory has {n_states}",
            partials.dx.len(),
            partials.dv.len()
        )));
    }
    for d in partials.dx.iter().chain(&partials.dv) {
        if !d.is_empty() && d.len() != nv {
            return Err(Error::Dimension(format!("loss partial with {} entries for {nv} vertices", d.len())));
        }
    }
    let body_verts = sim.body.map_or(0, |b| b.vertices.len());
    let mut params = ParamAdjoints::zeros(sim.cloth.faces.len(), nv, body_verts);
    let zero = vec![Vec3::zeros(); nv];
    let add = |a: &mut Vec<Vec3>, b: &Vec<Vec3>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    };

    let mut states = vec![AdjointState { x: zero.clone(), v: zero.clone(), n: 0 }; n_states];
    let mut xh = zero.clone();
    let mut vh = zero.clone();
    add(&mut xh, &partials.dx[n_states - 1]);
    add(&mut vh, &partials.dv[n_states - 1]);
    states[n_states - 1] = AdjointState { x: xh.clone(), v: vh.clone(), n: n_states - 1 };

    let cfg = sim.config;
    let c = cfg.damping / cfg.dt;
    let w = &sim.rest.inv_mass;
    let mut tape = Vec::new();
    for n in (0..traj.num_steps()).rev() {
        tape.clear();
        let rec = &traj.records[n];
        let (replayed, _) = sim.step(&traj.states[n], Some(rec), Some(&mut tape))?;
        debug_assert_eq!(replayed.x, traj.states[n + 1].x, "replay mismatch at step {n}");

        // v_{n+1} = c (x* − xₙ), x_{n+1} = x*
        let mut xs: Vec<Vec3> = xh.iter().zip(&vh).map(|(a, b)| a + b * c).collect();
        let mut x_prev: Vec<Vec3> = vh.iter().map(|b| -b * c).collect();

        let mut l_strain = vec![Vec3::zeros(); sim.cloth.faces.len()];
        let mut l_bend = vec![0.0; sim.cloth.hinges.len()];
        let mut l_stitch = vec![Vec3::zeros(); sim.cloth.stitches.len()];
        for entry in tape.iter().rev() {
            match entry {
                TapeEntry::Contact(k) => {
                    let ct = &rec.contacts[*k];
                    let s = ct.normal.dot(&xs[ct.vertex]);
                    xs[ct.vertex] -= ct.normal * s;
                    let body = sim.body.expect("contacts imply a body");
                    let f = body.faces[ct.face];
                    for j in 0..3 {
                        params.body_vertices[f[j]] += ct.normal * (s * ct.bary[j]);
                    }
                }
                TapeEntry::Stitch(si, inp) => {
                    let [a, b] = sim.cloth.stitches[*si];
                    let adj = stitch_project_vjp(inp, &[xs[a], xs[b]], &l_stitch[*si]);
                    xs[a] = adj.x[0];
                    xs[b] = adj.x[1];
                    l_stitch[*si] = adj.lambda;
                    params.inv_mass[a] += adj.w[0];
                    params.inv_mass[b] += adj.w[1];
                }
                TapeEntry::Hinge(hi, inp) => {
                    let v = sim.cloth.hinges[*hi].v;
                    let adj = hinge_project_vjp(inp, &v.map(|i| xs[i]), l_bend[*hi]);
                    for k in 0..4 {
                        xs[v[k]] = adj.x[k];
                        params.inv_mass[v[k]] += adj.w[k];
                    }
                    l_bend[*hi] = adj.lambda;
                    params.bend_alpha += adj.alpha;
                }
                TapeEntry::Strain(fi, inp) => {
                    let f = sim.cloth.faces[*fi];
                    let adj = strain_project_vjp(inp, &f.map(|i| xs[i]), &l_strain[*fi]);
                    for k in 0..3 {
                        xs[f[k]] = adj.x[k];
                        params.inv_mass[f[k]] += adj.w[k];
                    }
                    l_strain[*fi] = adj.lambda;
                    params.dm_inv[*fi] += adj.dm_inv;
                    params.strain_alpha[*fi] += adj.alpha;
                }
            }
        }
        // Prediction x̃ = xₙ + Δt vₙ + Δt² g for free vertices.
        let mut v_prev = zero.clone();
        for i in 0..nv {
            x_prev[i] += xs[i];
            if w[i] > 0.0 {
                v_prev[i] = xs[i] * cfg.dt;
            }
        }
        add(&mut x_prev, &partials.dx[n]);
        add(&mut v_prev, &partials.dv[n]);
        xh = x_prev;
        vh = v_prev;
        if xh.iter().chain(&vh).any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite { step: n });
        }
        states[n] = AdjointState { x: xh.clone(), v: vh.clone(), n };
    }
    Ok(AdjointResult { states, params })
}

/// dφ/dx̄ through D̄⁻¹, face areas (compliance scaling and, with
/// `mass_terms`, lumped masses).
pub fn grad_wrt_rest(sim: &Simulator, mesh: &PatternMesh, adj: &ParamAdjoints, mass_terms: bool) -> Vec<Vec2> {
    let rest = sim.rest;
    let dt2 = sim.config.dt * sim.config.dt;
    let mut area_hat = adj.area.clone();
    for (fi, a) in rest.area.iter().enumerate() {
        let alpha = sim.strain_alpha(fi);
        area_hat[fi] -= adj.strain_alpha[fi].dot(&alpha) / a;
        debug_assert!((alpha[0] - sim.material.stretch[0] / (a * dt2)).abs() <= 1e-12 * alpha[0].abs());
    }
    if mass_terms {
        // w = 1/m, m = ρ Σ A/3  ⇒  ∂w/∂A = −w² ρ / 3 for every free vertex of the face.
        for (fi, f) in sim.cloth.faces.iter().enumerate() {
            for &v in f {
                let w = rest.inv_mass[v];
                if w > 0.0 {
                    area_hat[fi] -= adj.inv_mass[v] * w * w * rest.density / 3.0;
                }
            }
        }
    }
    let mut out = vec![Vec2::zeros(); mesh.num_vertices()];
    for (fi, f) in sim.cloth.faces.iter().enumerate() {
        let b = rest.dm_inv[fi];
        let bt = b.transpose();
        let dm_hat = -bt * adj.dm_inv[fi] * bt + bt * (area_hat[fi] * rest.area[fi]);
        let c0 = Vec2::new(dm_hat[(0, 0)], dm_hat[(1, 0)]);
        let c1 = Vec2::new(dm_hat[(0, 1)], dm_hat[(1, 1)]);
        out[f[0]] += c0;
        out[f[1]] += c1;
        out[f[2]] -= c0 + c1;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaterialGradient {
    pub stretch: [f64; 3],
    pub bend: f64,
}

pub fn grad_wrt_material(sim: &Simulator, adj: &ParamAdjoints) -> MaterialGradient {
    let dt2 = sim.config.dt * sim.config.dt;
    let mut stretch = [0.0; 3];
    for (fi, a) in sim.rest.area.iter().enumerate() {
        for k in 0..3 {
            stretch[k] += adj.strain_alpha[fi][k] / (a * dt2);
        }
    }
    MaterialGradient { stretch, bend: adj.bend_alpha / dt2 }
}

pub fn grad_wrt_body(adj: &ParamAdjoints, body: &BodyModel, nu: &[f64], psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    if adj.body_vertices.iter().all(|v| *v == Vec3::zeros()) {
        return (vec![0.0; body.num_shape()], vec![0.0; body.num_pose()]);
    }
    body.jacobians(nu, psi).vjp(&adj.body_vertices)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub rest: Vec<Vec2>,
    pub zeta: Option<Vec<Vec2>>,
    pub stretch: [f64; 3],
    pub bend: f64,
    pub nu: Vec<f64>,
    pub psi: Vec<f64>,
    /// Adjoint of the initial positions.
    pub x0: Vec<Vec3>,
}

impl GradientBundle {
    pub fn is_finite(&self) -> bool {
        let f = |v: f64| v.is_finite();
        self.rest.iter().all(|p| f(p.x) && f(p.y))
            && self.zeta.iter().flatten().all(|p| f(p.x) && f(p.y))
            && self.stretch.iter().copied().all(f)
            && f(self.bend)
            && self.nu.iter().copied().all(f)
            && self.psi.iter().copied().all(f)
    }
}

/// Explicit ∂φ/∂θ terms (regularizers acting directly on parameters).
#[derive(Clone, Debug, Default)]
pub struct ExplicitPartials {
    pub rest: Option<Vec<Vec2>>,
    pub nu: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
}

pub struct BodyParams<'a> {
    pub model: &'a BodyModel,
    pub nu: &'a [f64],
    pub psi: &'a [f64],
}

/// dφ/dθ = Q̂ᵀ ∂Q/∂θ + ∂φ/∂θ for every group, with the cage chain when given.
pub fn total_gradient(
    sim: &Simulator,
    mesh: &PatternMesh,
    adj: &AdjointResult,
    body: Option<BodyParams>,
    explicit: &ExplicitPartials,
    cage: Option<&ControlCage>,
    mass_terms: bool,
) -> Result<GradientBundle> {
    let mut rest = grad_wrt_rest(sim, mesh, &adj.params, mass_terms);
    if let Some(e) = &explicit.rest {
        if e.len() != rest.len() {
            return Err(Error::Dimension(format!("explicit rest partial {} vs {}", e.len(), rest.len())));
        }
        for (a, b) in rest.iter_mut().zip(e) {
            *a += b;
        }
    }
    let mat = grad_wrt_material(sim, &adj.params);
    let (mut nu, mut psi) = match &body {
        Some(b) => grad_wrt_body(&adj.params, b.model, b.nu, b.psi),
        None => (Vec::new(), Vec::new()),
    };
    for (g, e) in [(&mut nu, &explicit.nu), (&mut psi, &explicit.psi)] {
        if let Some(e) = e {
            if e.len() != g.len() {
                return Err(Error::Dimension(format!("explicit body partial {} vs {}", e.len(), g.len())));
            }
            for (a, b) in g.iter_mut().zip(e) {
                *a += b;
            }
        }
    }
    let zeta = cage.map(|c| c.chain_gradient(&rest));
    let out = GradientBundle { rest, zeta, stretch: mat.stretch, bend: mat.bend, nu, psi, x0: adj.states[0].x.clone() };
    if !out.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(out)
}
