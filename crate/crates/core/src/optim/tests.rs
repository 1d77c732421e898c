use super::*;
use crate::adjoint::CheckOptions;
use crate::loss::LossConfig;
use crate::math::Vec2;
use crate::scenes;
use crate::sim::{Simulator, StopRule};

fn strip_problem(noise: f64) -> Problem {
    let scene = scenes::strip();
    let (target, _) = synthesize_target(&scene, noise, 0.0, 7).unwrap();
    Problem::new(scene, Objective::Garment { target, loss: LossConfig::default() }, PatternMode::Cage).unwrap()
}

#[test]
fn fixed_point_target_stops_at_once() {
    let mut pr = strip_problem(0.0);
    let p0 = pr.initial_parameters(&[Group::Bend, Group::Zeta]);
    let (p, rep) = co_optimize(&mut pr, &p0, &OptimConfig::default()).unwrap();
    assert!(rep.initial_value() < 1e-20, "{}", rep.initial_value());
    assert_eq!(rep.stop, Stop::GradientTolerance);
    assert_eq!(rep.iterations.len(), 1);
    assert_eq!(p, p0);
}

#[test]
fn no_groups_is_a_noop() {
    let mut pr = strip_problem(0.0);
    let mut p0 = pr.initial_parameters(&[]);
    p0.log_bend += 1.0;
    let (p, rep) = co_optimize(&mut pr, &p0, &OptimConfig::default()).unwrap();
    assert_eq!(p, p0);
    assert!(rep.noop && rep.stop == Stop::NoParameters);
    assert!(rep.to_text().contains("unchanged"));
}

#[test]
fn zero_iterations_keep_the_start() {
    let mut pr = strip_problem(0.0);
    let mut p0 = pr.initial_parameters(&[Group::Bend]);
    p0.log_bend += 1.0;
    let cfg = OptimConfig { max_iters: 0, ..Default::default() };
    let (p, rep) = co_optimize(&mut pr, &p0, &cfg).unwrap();
    assert_eq!(p, p0);
    assert_eq!(rep.iterations.len(), 1);
}

#[test]
fn accepted_values_decrease_and_runs_repeat() {
    let run = || {
        let mut pr = strip_problem(0.0);
        let mut p0 = pr.initial_parameters(&[Group::Bend, Group::Stretch]);
        p0.log_bend += 1.5;
        let cfg = OptimConfig { max_iters: 6, ..Default::default() };
        co_optimize(&mut pr, &p0, &cfg).unwrap()
    };
    let (p, rep) = run();
    assert!(rep.is_monotone());
    assert!(rep.final_value() < rep.initial_value());
    assert!(p.log_bend < 2000f64.ln() + 1.5);
    let (p2, rep2) = run();
    assert_eq!(p, p2);
    assert_eq!(rep.iterations, rep2.iterations);
}

#[test]
fn zero_gradient_entries_never_move() {
    let scene = scenes::head_cap();
    let target = probe_target(&scene);
    let mut pr = Problem::new(scene, Objective::Probe { target, loss: LossConfig::default() }, PatternMode::Cage).unwrap();
    let p0 = pr.initial_parameters(&[Group::Psi]);
    let cfg = OptimConfig { max_iters: 3, ..Default::default() };
    let (p, rep) = co_optimize(&mut pr, &p0, &cfg).unwrap();
    assert!(rep.iterations.len() > 1);
    let body = pr.scene.body.as_ref().unwrap();
    let knee = body.pose_offset(body.joint_index("l_knee").unwrap());
    assert_eq!(p.psi[knee..knee + 3], p0.psi[knee..knee + 3]);
    assert_ne!(p.psi, p0.psi);
    assert_eq!(p.zeta, p0.zeta);
}

#[test]
fn gradcheck_passes_on_two_triangles_and_flags_corruption() {
    let scene = scenes::two_triangles();
    let groups = Group::ALL.to_vec();
    let opts = GradcheckOptions { check: CheckOptions::default(), ..Default::default() };
    let rep = gradcheck(&scene, &groups, &opts).unwrap();
    assert!(rep.passed(), "{}", rep.to_text());
    assert_eq!(rep.groups().len(), 6);
    let bad = gradcheck(&scene, &[Group::Bend, Group::Stretch], &GradcheckOptions { corrupt: 0.05, ..opts }).unwrap();
    assert!(!bad.passed());
    assert!(bad.groups().iter().all(|g| g == "bend" || g == "stretch"));
}

#[test]
fn warm_start_reuses_the_equilibrium() {
    let scene = scenes::skirt();
    let cloth = scene.cloth().unwrap();
    let rest = scene.rest(&cloth).unwrap();
    let body = scene.posed_body();
    // Tight enough that the drape has really stopped, not paused mid-swing.
    let cfg = crate::sim::SimConfig { v_tol: 1e-5, max_steps: 1000, ..scene.config.clone() };
    let sim = Simulator { cloth: &cloth, rest: &rest, material: &scene.material, config: &cfg, body: body.as_ref() };
    let cold = sim.drape_to_equilibrium(scene.initial_state()).unwrap();
    let again = sim.drape_to_equilibrium(warm_start(&cold, &cloth).unwrap()).unwrap();
    assert!(again.num_steps() <= cfg.settle_steps + 2, "{}", again.num_steps());
    // Slightly larger panels settle faster from the old drape than cold.
    let cage = crate::cage::ControlCage::build(&scene.pattern, crate::cage::DEFAULT_ANGLE_THRESHOLD_DEG).unwrap();
    let zeta: Vec<Vec2> = cage.zeta0.iter().map(|z| z * 1.01).collect();
    let mesh = cage.deform(&scene.pattern, &zeta).unwrap();
    let rest2 = crate::sim::RestState::new(&cloth, &mesh, scene.material.density).unwrap();
    let sim2 = Simulator { rest: &rest2, ..sim };
    let cold2 = sim2.drape_to_equilibrium(scene.initial_state()).unwrap();
    let warm2 = sim2.drape_to_equilibrium(warm_start(&cold, &cloth).unwrap()).unwrap();
    assert!(warm2.num_steps() < cold2.num_steps(), "{} vs {}", warm2.num_steps(), cold2.num_steps());
    let other = scenes::strip().cloth().unwrap();
    assert!(warm_start(&cold, &other).is_err());
    let _ = sim.run(scene.initial_state(), StopRule::Fixed(1)).unwrap();
}

