use crate::adjoint::{finite_difference_check, CheckOptions, CheckReport};
use crate::loss::LossConfig;
use crate::math::Vec3;
use crate::optim::params::Group;
use crate::optim::problem::{Objective, PatternMode, Problem};
use crate::scenes::Scene;
use crate::Result;

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub check: CheckOptions,
    /// Per group, the error denominator is at least this fraction of the
    /// largest analytic entry of the group.
    pub floor_fraction: f64,
    /// Test hook: scale the analytic gradient by `1 + corrupt`.
    pub corrupt: f64,
    /// Overrides the scene's step count.
    pub steps: Option<usize>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { check: CheckOptions::default(), floor_fraction: 1e-3, corrupt: 0.0, steps: None }
    }
}

/// Smooth target for the probe objective: the initial embedding moved down
/// and sideways with a vertex-dependent wobble.
pub fn probe_target(scene: &Scene) -> Vec<Vec3> {
    scene
        .initial_positions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = i as f64;
            p + Vec3::new(0.01 + 0.004 * (0.7 * s).sin(), -0.006 + 0.003 * (1.3 * s).cos(), -0.03)
        })
        .collect()
}

fn entry_name(g: Group, k: usize) -> String {
    match g {
        Group::Zeta | Group::Rest => format!("{g}[{}].{}", k / 2, if k % 2 == 0 { "x" } else { "y" }),
        Group::Bend => "log_bend".to_string(),
        Group::Stretch => format!("log_stretch[{k}]"),
        Group::Nu | Group::Psi => format!("{g}[{k}]"),
    }
}

/// Adjoint vs central differences with contacts frozen to the nominal run,
/// for each requested group. The cage group runs in cage mode, all others
/// with rest positions as direct parameters.
pub fn gradcheck(scene: &Scene, groups: &[Group], opts: &GradcheckOptions) -> Result<CheckReport> {
    let mut scene = scene.clone();
    if let Some(n) = opts.steps {
        scene.steps = n;
    }
    let loss = LossConfig { seam: 1.0, curvature: 1.0, ..Default::default() };
    let objective = Objective::Probe { target: probe_target(&scene), loss };
    let mut rows = Vec::new();
    for mode in [PatternMode::Cage, PatternMode::Direct] {
        let sel: Vec<Group> = groups
            .iter()
            .copied()
            .filter(|&g| (g == Group::Zeta) == (mode == PatternMode::Cage))
            .collect();
        if sel.is_empty() {
            continue;
        }
        let problem = Problem::new(scene.clone(), objective.clone(), mode)?;
        let p = problem.initial_parameters(&sel);
        let eval = problem.evaluate(&p)?;
        let base = &eval.forward.trajectory;
        let analytic: Vec<f64> = eval.grad.iter().map(|g| g * (1.0 + opts.corrupt)).collect();
        let x = p.pack();
        for (g, start, n) in p.offsets() {
            let gmax = analytic[start..start + n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let copts = CheckOptions { floor: opts.check.floor.max(opts.floor_fraction * gmax), ..opts.check.clone() };
            let params: Vec<(String, String, usize)> =
                (0..n).map(|k| (g.name().to_string(), entry_name(g, k), start + k)).collect();
            let phi = |flat: &[f64]| problem.value_frozen(&p.with_flat(flat)?, base);
            rows.extend(finite_difference_check(&x, &analytic, &params, phi, &copts)?.rows);
        }
    }
    Ok(CheckReport { rows })
}
