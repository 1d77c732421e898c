//! One garment inverse problem: parameters → rest pattern, material and body
//! → fixed-length drape → loss, and the adjoint gradient back to the packed
//! parameter array.

use crate::adjoint::{adjoint_sweep, total_gradient, BodyParams, ExplicitPartials, GradientBundle, LossPartials};
use crate::body::PosedBody;
use crate::cage::{ControlCage, DEFAULT_ANGLE_THRESHOLD_DEG};
use crate::loss::{total_loss, LossConfig, LossEval, LossInputs, LossTerms, TargetGarment};
use crate::math::{Vec2, Vec3};
use crate::optim::params::{Group, ParameterVector};
use crate::pattern::PatternMesh;
use crate::scenes::Scene;
use crate::sim::{Cloth, Material, RestState, SimState, Simulator, StopRule, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub enum Objective {
    /// Fit a measured or synthesized garment.
    Garment { target: TargetGarment, loss: LossConfig },
    /// `½ Σ |x_i − t_i|²` on the final state plus the pattern regularizers
    /// of `loss` (its boundary and interior weights are ignored). Smooth,
    /// unlike the nearest-neighbour terms, and used for gradient checks.
    Probe { target: Vec<Vec3>, loss: LossConfig },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternMode {
    /// Rest positions follow the control cage.
    Cage,
    /// Rest positions are free parameters.
    Direct,
}

pub struct Problem {
    pub scene: Scene,
    pub cloth: Cloth,
    pub cage: ControlCage,
    pub objective: Objective,
    pub mode: PatternMode,
    /// Include the dependence of vertex masses on rest areas.
    pub mass_terms: bool,
    pub steps: usize,
    /// Start every drape from this state instead of the scene embedding.
    pub initial: Option<SimState>,
    labeled: Vec<(String, Vec<usize>)>,
    loops: Vec<Vec<usize>>,
}

/// Parameters turned into simulator inputs.
pub struct Realized {
    pub mesh: PatternMesh,
    pub rest: RestState,
    pub material: Material,
    pub body: Option<PosedBody>,
}

pub struct Forward {
    pub realized: Realized,
    pub trajectory: Trajectory,
}

pub struct Evaluation {
    pub value: f64,
    pub terms: LossTerms,
    /// Packed like `ParameterVector::pack`.
    pub grad: Vec<f64>,
    pub bundle: GradientBundle,
    pub forward: Forward,
}

impl Problem {
    pub fn new(scene: Scene, objective: Objective, mode: PatternMode) -> Result<Problem> {
        let cloth = scene.cloth()?;
        let cage = ControlCage::build(&scene.pattern, DEFAULT_ANGLE_THRESHOLD_DEG)?;
        if let Objective::Garment { target, loss } = &objective {
            target.validate()?;
            loss.validate()?;
        }
        if let Objective::Probe { target, .. } = &objective {
            if target.len() != cloth.num_vertices {
                return Err(Error::Dimension(format!("probe target {} vs {} vertices", target.len(), cloth.num_vertices)));
            }
        }
        let labeled = scene.labels.iter().map(|l| (l.name.clone(), l.vertices.clone())).collect();
        let loops = scene.pattern.boundary_loops.iter().map(|l| l.vertices.clone()).collect();
        let steps = scene.steps;
        Ok(Problem { scene, cloth, cage, objective, mode, mass_terms: true, steps, initial: None, labeled, loops })
    }

    /// Scene values as a parameter vector with the groups that fit `mode`
    /// (and the body, if any) listed in `groups` enabled.
    pub fn initial_parameters(&self, groups: &[Group]) -> ParameterVector {
        let s = &self.scene;
        let mut p = ParameterVector::new(
            self.cage.zeta0.clone(),
            s.pattern.vertices_2d.clone(),
            s.material.bend,
            s.material.stretch,
            if s.body.is_some() { s.nu.clone() } else { Vec::new() },
            if s.body.is_some() { s.psi.clone() } else { Vec::new() },
        );
        for &g in groups {
            let ok = match g {
                Group::Zeta => self.mode == PatternMode::Cage,
                Group::Rest => self.mode == PatternMode::Direct,
                Group::Nu | Group::Psi => s.body.is_some(),
                _ => true,
            };
            p.set_enabled(g, ok);
        }
        p
    }

    pub fn labeled(&self) -> &[(String, Vec<usize>)] {
        &self.labeled
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn rest_positions(&self, p: &ParameterVector) -> Result<Vec<Vec2>> {
        match self.mode {
            PatternMode::Cage => self.cage.positions(&p.zeta),
            PatternMode::Direct => Ok(p.rest.clone()),
        }
    }

    /// Fails with `InvertedAfterDeform` when the rest pattern is invalid.
    pub fn realize(&self, p: &ParameterVector) -> Result<Realized> {
        let mesh = self.scene.pattern.with_rest_positions(self.rest_positions(p)?)?;
        let material = Material { bend: p.bend(), stretch: p.stretch(), ..self.scene.material.clone() };
        material.validate()?;
        let rest = RestState::new(&self.cloth, &mesh, material.density)?;
        let body = self.scene.body.as_ref().map(|b| b.pose(&p.nu, &p.psi));
        Ok(Realized { mesh, rest, material, body })
    }

    pub fn simulator<'a>(&'a self, r: &'a Realized) -> Simulator<'a> {
        Simulator { cloth: &self.cloth, rest: &r.rest, material: &r.material, config: &self.scene.config, body: r.body.as_ref() }
    }

    pub fn initial_state(&self) -> SimState {
        self.initial.clone().unwrap_or_else(|| self.scene.initial_state())
    }

    /// Drape for `steps` steps; with `frozen`, contacts come from that run.
    pub fn forward(&self, p: &ParameterVector, frozen: Option<&Trajectory>) -> Result<Forward> {
        let realized = self.realize(p)?;
        let sim = self.simulator(&realized);
        let trajectory = match frozen {
            Some(base) => sim.run_frozen(self.initial_state(), base)?,
            None => sim.run(self.initial_state(), StopRule::Fixed(self.steps))?,
        };
        Ok(Forward { realized, trajectory })
    }

    pub fn loss(&self, f: &Forward) -> Result<LossEval> {
        let x = &f.trajectory.last().x;
        let pattern = &f.realized.mesh.vertices_2d;
        let inp = LossInputs {
            x,
            labeled: &self.labeled,
            pattern,
            reference: &self.scene.pattern.vertices_2d,
            loops: &self.loops,
            seams: &self.scene.pattern.seams,
        };
        match &self.objective {
            Objective::Garment { target, loss } => total_loss(&inp, target, loss),
            Objective::Probe { target, loss } => {
                let cfg = LossConfig { boundary: 0.0, interior: 0.0, ..loss.clone() };
                let empty = TargetGarment { interior: Vec::new(), boundaries: Vec::new(), mask: None };
                let mut e = total_loss(&inp, &empty, &cfg)?;
                let mut probe = 0.0;
                for (i, (a, t)) in x.iter().zip(target).enumerate() {
                    let r = a - t;
                    probe += 0.5 * r.norm_squared();
                    e.dx[i] += r;
                }
                e.terms.interior = probe;
                e.value += probe;
                Ok(e)
            }
        }
    }

    /// Adjoint gradient of the loss at `f`, packed for `p`.
    pub fn gradient(&self, p: &ParameterVector, f: &Forward, e: &LossEval) -> Result<(Vec<f64>, GradientBundle)> {
        let sim = self.simulator(&f.realized);
        let traj = &f.trajectory;
        let adj = adjoint_sweep(&sim, traj, &LossPartials::final_state(traj.states.len(), e.dx.clone()))?;
        let body = self.scene.body.as_ref().map(|model| BodyParams { model, nu: &p.nu, psi: &p.psi });
        let explicit = ExplicitPartials { rest: Some(e.dp.clone()), ..Default::default() };
        let cage = (self.mode == PatternMode::Cage).then_some(&self.cage);
        let b = total_gradient(&sim, &f.realized.mesh, &adj, body, &explicit, cage, self.mass_terms)?;
        Ok((pack_gradient(p, &b), b))
    }

    pub fn evaluate(&self, p: &ParameterVector) -> Result<Evaluation> {
        let forward = self.forward(p, None)?;
        let e = self.loss(&forward)?;
        let (grad, bundle) = self.gradient(p, &forward, &e)?;
        Ok(Evaluation { value: e.value, terms: e.terms, grad, bundle, forward })
    }

    /// Loss value with contacts frozen to `base` (finite-difference probe).
    pub fn value_frozen(&self, p: &ParameterVector, base: &Trajectory) -> Result<f64> {
        let f = self.forward(p, Some(base))?;
        Ok(self.loss(&f)?.value)
    }
}

/// Gradient bundle in the packed layout; material entries are with respect
/// to log compliances.
pub fn pack_gradient(p: &ParameterVector, b: &GradientBundle) -> Vec<f64> {
    let flat2 = |v: &[Vec2]| v.iter().flat_map(|q| [q.x, q.y]).collect::<Vec<f64>>();
    let mut out = Vec::with_capacity(p.dim());
    for g in p.enabled_groups() {
        match g {
            Group::Zeta => out.extend(flat2(b.zeta.as_deref().unwrap_or(&[]))),
            Group::Rest => out.extend(flat2(&b.rest)),
            Group::Bend => out.push(p.bend() * b.bend),
            Group::Stretch => out.extend((0..3).map(|k| p.stretch()[k] * b.stretch[k])),
            Group::Nu => out.extend(&b.nu),
            Group::Psi => out.extend(&b.psi),
        }
    }
    out
}

/// Drape `scene` with its own parameters for `scene.steps` steps and sample
/// a target from the final state.
pub fn synthesize_target(scene: &Scene, noise: f64, dropout: f64, seed: u64) -> Result<(TargetGarment, Trajectory)> {
    let cloth = scene.cloth()?;
    let rest = scene.rest(&cloth)?;
    let body = scene.posed_body();
    let sim = Simulator { cloth: &cloth, rest: &rest, material: &scene.material, config: &scene.config, body: body.as_ref() };
    let traj = sim.run(scene.initial_state(), StopRule::Fixed(scene.steps))?;
    let labeled: Vec<(String, Vec<usize>)> = scene.labels.iter().map(|l| (l.name.clone(), l.vertices.clone())).collect();
    let closed: Vec<bool> = scene.labels.iter().map(|l| l.closed).collect();
    let t = TargetGarment::from_drape(&traj.last().x, &labeled, &closed, noise, dropout, seed);
    Ok((t, traj))
}

/// Next drape starts from the previous equilibrium at rest.
pub fn warm_start(previous: &Trajectory, cloth: &Cloth) -> Result<SimState> {
    let last = previous.last();
    if last.x.len() != cloth.num_vertices {
        return Err(Error::Topology(format!(
            "previous trajectory has {} vertices, cloth {}",
            last.x.len(),
            cloth.num_vertices
        )));
    }
    Ok(SimState::at_rest(last.x.clone()))
}
