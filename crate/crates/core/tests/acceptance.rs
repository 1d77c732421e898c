//! Acceptance criteria, one line per criterion. Run a subset by passing
//! criterion numbers: `cargo test --test acceptance -- 3 4`.

use std::time::Instant;

use std::sync::OnceLock;

use drapefit::adjoint::CheckOptions;
use drapefit::loss::{curvature_loss, max_seam_mismatch, LossConfig, TargetGarment};
use drapefit::math::{Vec2, Vec3};
use drapefit::optim::{
    co_optimize, gradcheck, synthesize_target, GradcheckOptions, Group, Objective, OptimConfig, OptimizationReport,
    ParameterVector, PatternMode, Problem,
};
use drapefit::pattern::PatternMesh;
use drapefit::scenes::{self, Scene};
use drapefit::sim::constraints::{contact_value, hinge_project, stitch_project, strain_project};
use drapefit::sim::{max_strain, Cloth, HingeInput, SimConfig, SimState, Simulator, StitchInput, StopRule, StrainInput};

struct Outcome {
    pass: bool,
    detail: String,
}

fn garment_problem(template: Scene, target: TargetGarment, loss: LossConfig, mode: PatternMode) -> Problem {
    Problem::new(template, Objective::Garment { target, loss }, mode).expect("problem")
}

struct Run {
    params: ParameterVector,
    mesh: PatternMesh,
    report: OptimizationReport,
}

fn optimize(template: Scene, truth: &Scene, loss: LossConfig, mode: PatternMode, groups: &[Group], iters: usize) -> Run {
    let t = Instant::now();
    let (target, _) = synthesize_target(truth, 0.0, 0.0, 11).unwrap();
    let mut pr = garment_problem(template, target, loss, mode);
    let p0 = pr.initial_parameters(groups);
    let cfg = OptimConfig { max_iters: iters, ..Default::default() };
    let (p, report) = co_optimize(&mut pr, &p0, &cfg).unwrap();
    let mesh = pr.realize(&p).unwrap().mesh;
    eprintln!(
        "  [{} {mode:?} {groups:?}: {} iterations, stop {:?}, phi {:.3e} -> {:.3e}, {:.0} s]",
        truth.name,
        report.iterations.len() - 1,
        report.stop,
        report.initial_value(),
        report.final_value(),
        t.elapsed().as_secs_f64()
    );
    Run { params: p, mesh, report }
}

fn skirt_truth() -> Scene {
    scenes::skirt().with_scaled_panels(1.15).unwrap()
}

/// Cage-mode recovery of the 1.15× skirt with the full loss; shared by
/// criteria 4, 5 and 6.
fn skirt_recovery() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        optimize(scenes::skirt(), &skirt_truth(), LossConfig::default(), PatternMode::Cage, &[Group::Zeta], 150)
    })
}

fn curvature_metric(scene: &Scene, mesh: &PatternMesh) -> f64 {
    let loops: Vec<Vec<usize>> = scene.pattern.boundary_loops.iter().map(|l| l.vertices.clone()).collect();
    curvature_loss(&mesh.vertices_2d, &scene.pattern.vertices_2d, &loops, None).value
}

fn max_rel(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max)
}

/// Adjoint vs central differences, every group, head cap (≤ 50 vertices),
/// 30 steps, contacts frozen.
fn gradient_correctness() -> Outcome {
    let scene = scenes::head_cap();
    let nv = scene.pattern.num_vertices();
    let opts = GradcheckOptions {
        check: CheckOptions { steps: vec![1e-4, 1e-5, 1e-6], tolerance: 1e-3, ..Default::default() },
        steps: Some(30),
        ..Default::default()
    };
    let t = Instant::now();
    let rep = gradcheck(&scene, &Group::ALL, &opts).unwrap();
    let secs = t.elapsed().as_secs_f64();
    eprintln!("{}", rep.to_text());
    let per_group: Vec<String> =
        rep.groups().iter().map(|g| format!("{g} {:.1e}", rep.group_max_error(g))).collect();
    let failing = rep.rows.iter().filter(|r| !r.pass).count();
    Outcome {
        pass: rep.passed() && rep.groups().len() == 6 && nv <= 50 && secs < 120.0,
        detail: format!(
            "{nv} vertices, {} coordinates, {failing} above 1e-3; worst per group: {}; {secs:.1} s (< 120 s)",
            rep.rows.len(),
            per_group.join(", ")
        ),
    }
}

fn physics_invariants() -> Outcome {
    // Momentum of every local projection on a mid-drape skirt state.
    let scene = scenes::skirt();
    let cloth = scene.cloth().unwrap();
    let rest = scene.rest(&cloth).unwrap();
    let body = scene.posed_body().unwrap();
    let sim = Simulator { cloth: &cloth, rest: &rest, material: &scene.material, config: &scene.config, body: Some(&body) };
    let mid = sim.run(scene.initial_state(), StopRule::Fixed(30)).unwrap();
    let x = &mid.last().x;
    let w = &rest.inv_mass;
    let mut momentum = 0.0f64;
    let mut ratio = |dx: &[Vec3], ws: &[f64]| {
        let p: Vec3 = dx.iter().zip(ws).map(|(d, w)| d / *w).sum();
        let s: f64 = dx.iter().zip(ws).map(|(d, w)| (d / *w).norm()).sum();
        if s > 0.0 {
            momentum = momentum.max(p.norm() / s);
        }
    };
    for (fi, f) in cloth.faces.iter().enumerate() {
        let ws = f.map(|v| w[v]);
        if ws.contains(&0.0) {
            continue;
        }
        let inp = StrainInput {
            x: f.map(|v| x[v]),
            lambda: Vec3::zeros(),
            dm_inv: rest.dm_inv[fi],
            alpha: sim.strain_alpha(fi),
            w: ws,
        };
        if let Some((dx, _)) = strain_project(&inp) {
            ratio(&dx, &ws);
        }
    }
    for h in &cloth.hinges {
        let ws = h.v.map(|v| w[v]);
        if ws.contains(&0.0) {
            continue;
        }
        let inp = HingeInput { x: h.v.map(|v| x[v]), lambda: 0.0, rest_angle: h.rest_angle, alpha: sim.bend_alpha(), w: ws };
        if let Some((dx, _)) = hinge_project(&inp) {
            ratio(&dx, &ws);
        }
    }
    for s in &cloth.stitches {
        let ws = s.map(|v| w[v]);
        if ws.contains(&0.0) {
            continue;
        }
        let inp = StitchInput { x: s.map(|v| x[v]), lambda: Vec3::zeros(), alpha: sim.stitch_alpha(), w: ws };
        if let Some((dx, _)) = stitch_project(&inp) {
            ratio(&dx, &ws);
        }
    }

    // Flat rest embedding of every bundled panel stays strain free (seams
    // open: in the layout, sewn edges lie apart).
    let mut rest_strain = 0.0f64;
    for name in scenes::NAMES {
        let sc = scenes::by_name(name).unwrap();
        let open = PatternMesh::new(sc.pattern.vertices_2d.clone(), sc.pattern.faces.clone(), Vec::new(), None).unwrap();
        let cl = Cloth::new(&open, &sc.pins).unwrap();
        let rs = sc.rest(&cl).unwrap();
        let cfg = SimConfig { gravity: Vec3::zeros(), ..sc.config.clone() };
        let s = Simulator { cloth: &cl, rest: &rs, material: &sc.material, config: &cfg, body: None };
        let flat: Vec<Vec3> = sc.pattern.vertices_2d.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
        let t = s.run(SimState::at_rest(flat), StopRule::Fixed(5)).unwrap();
        rest_strain = rest_strain.max(max_strain(&t.last().x, &cl, &rs));
    }

    // Contacts at equilibrium and replay.
    let eq = sim.drape_to_equilibrium(scene.initial_state()).unwrap();
    let rec = eq.records.last().unwrap();
    let nc = rec.contacts.len();
    let mut penetration = 0.0f64;
    let mut active = 0;
    for (k, c) in rec.contacts.iter().enumerate() {
        if rec.active[(scene.config.iterations - 1) * nc + k] {
            active += 1;
            let p = c.surface_point(&body.vertices, &body.faces);
            let v = contact_value(&eq.last().x[c.vertex], &p, &c.normal, scene.material.thickness);
            penetration = penetration.max(-v);
        }
    }
    // Geometric check on every vertex against the body surface itself.
    let depth = eq.last().x.iter().map(|q| -body.closest_point(q).signed_distance).fold(0.0, f64::max);
    let shell = eq.last().x.iter().map(|q| scene.material.thickness - body.closest_point(q).signed_distance).fold(0.0, f64::max);
    let replay = sim.replay(&eq).unwrap();
    let replay_err = eq.states.iter().zip(&replay.states).map(|(a, b)| max_rel(&a.x, &b.x).max(max_rel(&a.v, &b.v))).fold(0.0, f64::max);
    Outcome {
        pass: momentum < 1e-9 && rest_strain < 1e-10 && penetration <= 1e-6 && depth <= 1e-6 && active > 0 && replay_err <= 1e-12,
        detail: format!(
            "momentum drift {momentum:.1e} (< 1e-9), rest strain {rest_strain:.1e} (< 1e-10), penetration {penetration:.1e} m over {active} active contacts and {depth:.1e} m into the body (<= 1e-6; thickness shell {shell:.1e} m), replay {replay_err:.1e} (<= 1e-12)"
        ),
    }
}

/// Bending compliance from a drape target, starting at 10× truth.
fn material_recovery() -> Outcome {
    let truth = scenes::strip();
    let mut template = truth.clone();
    template.material.bend *= 10.0;
    let run = optimize(template, &truth, LossConfig::default(), PatternMode::Cage, &[Group::Bend], 100);
    let rep = &run.report;
    let bend = run.params.bend();
    let err = (bend - truth.material.bend).abs() / truth.material.bend;
    let iters = rep.iterations.len() - 1;
    Outcome {
        pass: err < 0.25 && iters <= 100 && rep.wall_time < 600.0,
        detail: format!(
            "bend {:.1} -> {bend:.1}, truth {:.1}, error {:.1}% (< 25%), {iters} iterations, {:.0} s",
            truth.material.bend * 10.0,
            truth.material.bend,
            100.0 * err,
            rep.wall_time
        ),
    }
}

/// Synthetic pattern recovery: skirt panels scaled 1.15×, cage only.
fn pattern_recovery() -> Outcome {
    let truth = skirt_truth();
    let run = skirt_recovery();
    let (mesh, rep) = (&run.mesh, &run.report);
    let area_err = (mesh.total_area() - truth.pattern.total_area()).abs() / truth.pattern.total_area();
    let c0 = rep.iterations[0].terms.interior;
    let c1 = rep.iterations.last().unwrap().terms.interior;
    let iters = rep.iterations.len() - 1;
    Outcome {
        pass: area_err < 0.05 && c0 / c1 >= 10.0 && iters <= 150 && rep.wall_time < 1800.0,
        detail: format!(
            "area error {:.2}% (< 5%), interior Chamfer {:.3e} -> {:.3e} ({:.1}x, >= 10x), {iters} iterations, {:.0} s",
            100.0 * area_err,
            c0,
            c1,
            c0 / c1,
            rep.wall_time
        ),
    }
}

fn ablations() -> Outcome {
    let template = scenes::skirt();
    let truth = skirt_truth();

    // (a) Direct rest positions vs the cage, same budget as the recovery run.
    let direct = optimize(template.clone(), &truth, LossConfig::default(), PatternMode::Direct, &[Group::Rest], 150);
    let cage = skirt_recovery();
    let inv_direct = direct.report.inverted_proposals;
    let inv_cage = cage.report.inverted_proposals;
    // A direct run is also rejected when its pattern fails the quality gate.
    let q0 = direct.report.initial_quality.min;
    let q_direct = direct.report.final_quality.min;
    let rejected = direct.report.stop != drapefit::optim::Stop::MaxIterations || q_direct < 0.9 * q0;
    let a = (inv_direct >= 1 || rejected) && inv_cage == 0;

    // (b) Gores alternately scaled, so the truth itself has mismatched seams.
    let mut alt = template.clone();
    alt.pattern = scenes::scale_panels_by(&template.pattern, &template.pins, &[1.15, 1.0, 1.15, 1.0]).unwrap();
    let seams = &template.pattern.seams;
    let off = LossConfig { seam: 0.0, ..SEAM_LOSS };
    let no_seam = optimize(template.clone(), &alt, off, PatternMode::Cage, &[Group::Zeta], 80);
    let full = optimize(template.clone(), &alt, SEAM_LOSS, PatternMode::Cage, &[Group::Zeta], 80);
    let m_off = max_seam_mismatch(&no_seam.mesh.vertices_2d, seams);
    let m_full = max_seam_mismatch(&full.mesh.vertices_2d, seams);
    let b = m_off > 0.05 && m_full < 0.01;

    // (c) Curvature term off on the recovery scene.
    let off = LossConfig { curvature: 0.0, ..LossConfig::default() };
    let no_curv = optimize(template.clone(), &truth, off, PatternMode::Cage, &[Group::Zeta], 150);
    let k_off = curvature_metric(&template, &no_curv.mesh);
    let k_full = curvature_metric(&template, &cage.mesh);
    let c = k_off >= 2.0 * k_full;
    Outcome {
        pass: a && b && c,
        detail: format!(
            "(a) {} inverted proposals direct ({:?}, min quality {q0:.3} -> {q_direct:.3}) vs {inv_cage} cage: {}; (b) seam mismatch {:.2}% off (> 5%) vs {:.2}% full (< 1%): {}; \
             (c) curvature metric {k_off:.3e} off vs {k_full:.3e} full ({:.1}x, >= 2x): {}",
            inv_direct,
            direct.report.stop,
            verdict(a),
            100.0 * m_off,
            100.0 * m_full,
            verdict(b),
            k_off / k_full,
            verdict(c)
        ),
    }
}

/// Seam weight for the seam ablation: with mismatched truth gores the
/// default weight is too weak against the Chamfer terms.
const SEAM_LOSS: LossConfig =
    LossConfig { boundary: 1.0, interior: 1.0, seam: 1e4, curvature: 0.1, curvature_weights: None, seam_signed: false };

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Short cage-only fits of every bundled scene to a 1.05× version of
/// itself; the skirt reuses the recovery run.
fn mesh_quality() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in scenes::NAMES {
        let scene = scenes::by_name(name).unwrap();
        let rep = if name == "skirt" {
            skirt_recovery().report.clone()
        } else {
            let truth = scene.with_scaled_panels(1.05).unwrap();
            optimize(scene.clone(), &truth, LossConfig::default(), PatternMode::Cage, &[Group::Zeta], 20).report
        };
        let (q0, q1) = (rep.initial_quality.min, rep.final_quality.min);
        let good = q1 > 0.0 && q1 >= 0.9 * q0;
        ok &= good;
        parts.push(format!("{name} {q0:.3} -> {q1:.3}{}", if good { "" } else { " FAIL" }));
    }
    Outcome { pass: ok, detail: format!("min quality (>= 0.9x initial, > 0): {}", parts.join(", ")) }
}

/// Inflated body (+0.02 m along normals) under the skirt; shape group only.
/// The body keeps just the inflate field: under a skirt, inflate and girth
/// move the hips alike and cannot be told apart from the drape.
fn body_recovery() -> Outcome {
    let mut template = scenes::skirt();
    let body = template.body.as_mut().unwrap();
    body.basis.truncate(1);
    body.basis_names.truncate(1);
    template.nu = vec![0.0];
    let mut truth = template.clone();
    truth.nu[0] = 0.02;
    let run = optimize(template, &truth, LossConfig::default(), PatternMode::Cage, &[Group::Nu], 60);
    let nu = &run.params.nu;
    let err = (nu[0] - 0.02).abs() / 0.02;
    Outcome {
        pass: err < 0.2,
        detail: format!(
            "nu {:?} (truth [0.02], inflate field only), error {:.1}% (< 20%), {} iterations",
            nu.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            100.0 * err,
            run.report.iterations.len() - 1
        ),
    }
}

fn loss_units() -> Outcome {
    use drapefit::loss::{boundary_loss, chamfer, chamfer_brute_force, seam_length_loss, Polyline};
    use drapefit::pattern::SeamPair;
    use rand::{Rng, SeedableRng};

    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let o = v(0.0, 0.0, 0.0);
    checks.push(("chamfer identical", close(chamfer(&[o, v(1.0, 2.0, 3.0)], &[o, v(1.0, 2.0, 3.0)]).value, 0.0)));
    checks.push(("chamfer single pair", close(chamfer(&[o], &[v(1.0, 0.0, 0.0)]).value, 2.0)));
    checks.push(("chamfer asymmetric sets", close(chamfer(&[o, v(2.0, 0.0, 0.0)], &[v(1.0, 0.0, 0.0)]).value, 2.0)));

    let line = |closed| Polyline { label: "hem".into(), points: vec![o, v(1.0, 0.0, 0.0), v(1.0, 1.0, 0.0)], closed };
    let lab = vec![("hem".to_string(), vec![0])];
    let bl = |x: Vec3, closed| boundary_loss(&[x], &lab, &[line(closed)]).unwrap().value;
    checks.push(("boundary on the line", close(bl(v(0.5, 0.0, 0.0), false), 0.0)));
    checks.push(("boundary above a segment", close(bl(v(0.5, 0.0, 1.0), false), 1.0)));
    checks.push(("boundary closing segment", close(bl(v(0.5, 0.5, 0.0), true), 0.0) && close(bl(v(0.5, 0.5, 0.0), false), 0.25)));

    let p2 = |x: f64, y: f64| Vec2::new(x, y);
    let pts = vec![p2(0.0, 0.0), p2(0.0, 1.0), p2(3.0, 0.0), p2(3.0, 2.0)];
    let seam = |a: Vec<usize>, b: Vec<usize>| vec![SeamPair::new(a, b)];
    checks.push(("seam equal chains", close(seam_length_loss(&pts, &seam(vec![0, 1], vec![0, 1]), false).value, 0.0)));
    checks.push(("seam squared", close(seam_length_loss(&pts, &seam(vec![0, 1], vec![2, 3]), false).value, 9.0)));
    checks.push(("seam signed", close(seam_length_loss(&pts, &seam(vec![0, 1], vec![2, 3]), true).value, -3.0)));

    let square = vec![p2(0.0, 0.0), p2(1.0, 0.0), p2(1.0, 1.0), p2(0.0, 1.0)];
    let loops = vec![vec![0, 1, 2, 3]];
    let similar: Vec<Vec2> = square.iter().map(|p| p2(2.0 * p.y + 5.0, -2.0 * p.x)).collect();
    let mut bent = square.clone();
    bent[2] = p2(1.3, 1.0);
    checks.push(("curvature identity", close(curvature_loss(&square, &square, &loops, None).value, 0.0)));
    checks.push(("curvature similarity", curvature_loss(&similar, &square, &loops, None).value < 1e-20));
    checks.push(("curvature bent corner", curvature_loss(&bent, &square, &loops, None).value > 1e-3));

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut cloud = |n| (0..n).map(|_| v(rng.gen(), rng.gen(), rng.gen())).collect::<Vec<_>>();
    let (a, b) = (cloud(500), cloud(500));
    let (fast, brute) = (chamfer(&a, &b), chamfer_brute_force(&a, &b));
    let exact = fast.value == brute.value && fast.grad == brute.grad && fast.a_to_b == brute.a_to_b && fast.b_to_a == brute.b_to_a;

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome {
        pass: failed.is_empty() && exact,
        detail: format!(
            "{}/{} loss examples pass{}; kd-tree Chamfer on 500 points {} brute force ({:.6e})",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) },
            if exact { "==" } else { "!=" },
            fast.value
        ),
    }
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "gradient correctness", gradient_correctness),
        (2, "physics invariants", physics_invariants),
        (3, "material recovery", material_recovery),
        (4, "pattern recovery", pattern_recovery),
        (5, "ablations", ablations),
        (6, "mesh quality", mesh_quality),
        (7, "body recovery", body_recovery),
        (8, "loss units", loss_units),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {n} ({name}): {} — {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
