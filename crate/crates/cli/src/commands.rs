use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use drapefit::adjoint::CheckOptions;
use drapefit::body::{load_body, save_body};
use drapefit::loss::{metric_chamfer, LossConfig, TargetGarment};
use drapefit::optim::{
    co_optimize, gradcheck, parse_groups, synthesize_target, GradcheckOptions, Group, Objective, OptimConfig, PatternMode,
    Problem, Stage, Stop,
};
use drapefit::pattern::{load_pattern, save_pattern, triangle_quality, triangle_quality_2d, write_obj, PatternMesh, PatternSidecar};
use drapefit::scenes::{self, scale_panels, Label, Scene};
use drapefit::sim::{elastic_energy, kinetic_energy, max_strain, Material, SimConfig, Simulator, StopRule};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    /// The run completed its setup but failed numerically.
    Numeric(String),
    Core(drapefit::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        use drapefit::Error as E;
        match self {
            CmdError::Config(_) => 2,
            CmdError::Numeric(_) => 1,
            CmdError::Core(E::Diverged { .. } | E::NonFinite { .. } | E::InvertedAfterDeform(_)) => 1,
            CmdError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(e) => write!(f, "{e}"),
            CmdError::Numeric(m) => f.write_str(m),
            CmdError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

impl From<drapefit::Error> for CmdError {
    fn from(e: drapefit::Error) -> Self {
        CmdError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CmdError>;

fn config_err(msg: impl Into<String>) -> CmdError {
    CmdError::Config(ConfigError(msg.into()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn loop_closed(mesh: &PatternMesh, verts: &[usize]) -> bool {
    mesh.boundary_loops.iter().any(|l| {
        l.vertices.len() == verts.len() && verts.iter().all(|v| l.vertices.contains(v))
    })
}

fn scene_from_files(cfg: &RunConfig, pattern: &Path) -> Result<Scene> {
    let (mesh, side) = load_pattern(pattern, cfg.paths.seams.as_deref())?;
    if mesh.embedding.is_none() {
        return Err(config_err(format!("paths.pattern: {} has no 3D `v` positions for the initial placement", pattern.display())));
    }
    let body = match (&cfg.paths.body, &cfg.paths.body_sidecar) {
        (Some(o), Some(s)) => Some(load_body(o, s)?),
        _ => None,
    };
    let labels = side
        .boundaries
        .iter()
        .map(|(name, v)| Label { name: name.clone(), vertices: v.clone(), closed: loop_closed(&mesh, v) })
        .collect();
    let (nu, psi) = body.as_ref().map_or((Vec::new(), Vec::new()), |b| (vec![0.0; b.num_shape()], b.identity_pose()));
    Ok(Scene {
        name: pattern.file_stem().map_or("pattern".into(), |s| s.to_string_lossy().into_owned()),
        pattern: mesh,
        pins: side.pins,
        labels,
        body,
        nu,
        psi,
        material: Material::default(),
        config: SimConfig::default(),
        steps: 120,
    })
}

fn check_len(key: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(config_err(format!("{key}: expected {n} values, got {}", v.len())));
    }
    Ok(())
}

/// Scene with the config applied; unset config values are filled from the
/// scene so the echoed config is complete.
pub fn resolve_scene(cfg: &mut RunConfig) -> Result<Scene> {
    let mut scene = match &cfg.paths.pattern {
        Some(p) => scene_from_files(cfg, &p.clone())?,
        None => scenes::by_name(&cfg.scene).map_err(|_| {
            config_err(format!("scene: unknown bundled scene {:?} (one of {})", cfg.scene, scenes::NAMES.join(", ")))
        })?,
    };
    let s = &mut cfg.sim;
    let c = &mut scene.config;
    c.dt = *s.dt.get_or_insert(c.dt);
    c.iterations = *s.iterations.get_or_insert(c.iterations);
    c.max_steps = *s.max_steps.get_or_insert(c.max_steps);
    c.v_tol = *s.v_tol.get_or_insert(c.v_tol);
    c.damping = *s.damping.get_or_insert(c.damping);
    scene.steps = *s.steps.get_or_insert(scene.steps);
    let m = &mut cfg.material;
    let mat = &mut scene.material;
    mat.bend = *m.bend.get_or_insert(mat.bend);
    mat.stretch = *m.stretch.get_or_insert(mat.stretch);
    mat.density = *m.density.get_or_insert(mat.density);
    mat.thickness = *m.thickness.get_or_insert(mat.thickness);
    mat.validate()?;
    scene.config.validate()?;
    if scene.body.is_some() {
        let nu = cfg.body.nu.get_or_insert(scene.nu.clone()).clone();
        let psi = cfg.body.psi.get_or_insert(scene.psi.clone()).clone();
        check_len("body.nu", &nu, scene.nu.len())?;
        check_len("body.psi", &psi, scene.psi.len())?;
        scene.nu = nu;
        scene.psi = psi;
    } else if cfg.body.nu.is_some() || cfg.body.psi.is_some() {
        return Err(config_err("body.nu / body.psi given but the scene has no body"));
    }
    Ok(scene)
}

fn prepare(cfg: &mut RunConfig) -> Result<(Scene, PathBuf)> {
    let scene = resolve_scene(cfg)?;
    let out = cfg.output.clone();
    std::fs::create_dir_all(&out).map_err(|e| config_err(format!("output: {}: {e}", out.display())))?;
    write(&out.join("config.toml"), &cfg.to_toml())?;
    Ok((scene, out))
}

pub fn sidecar_of(scene: &Scene) -> PatternSidecar {
    let p = &scene.pattern;
    PatternSidecar {
        seams: p
            .seams
            .iter()
            .map(|s| (p.panel_of_vertex[s.side_a[0]], s.clone(), p.panel_of_vertex[s.side_b[0]]))
            .collect(),
        pins: scene.pins.clone(),
        boundaries: scene.labels.iter().map(|l| (l.name.clone(), l.vertices.clone())).collect(),
    }
}

fn save_scene_pattern(scene: &Scene, mesh: &PatternMesh, dir: &Path, stem: &str) -> Result<()> {
    let mesh = PatternMesh { embedding: scene.pattern.embedding.clone(), ..mesh.clone() };
    save_pattern(&mesh, &sidecar_of(scene), &dir.join(format!("{stem}.obj")), Some(&dir.join(format!("{stem}.seams"))))?;
    Ok(())
}

fn quality_report(scene: &Scene, x: &[drapefit::math::Vec3]) -> String {
    let q2 = triangle_quality_2d(&scene.pattern.vertices_2d, &scene.pattern.faces);
    let q3 = triangle_quality(x, &scene.pattern.faces);
    let mut s = String::new();
    let _ = writeln!(s, "rest_quality_min={:.6} rest_quality_mean={:.6}", q2.min, q2.mean);
    let _ = writeln!(s, "drape_quality_min={:.6} drape_quality_mean={:.6}", q3.min, q3.mean);
    s.push_str("# face rest drape\n");
    for (f, (a, b)) in q2.per_face.iter().zip(&q3.per_face).enumerate() {
        let _ = writeln!(s, "{f} {a:.6} {b:.6}");
    }
    s
}

pub fn cmd_drape(cfg: &mut RunConfig) -> Result<()> {
    let (scene, out) = prepare(cfg)?;
    let cloth = scene.cloth()?;
    let rest = scene.rest(&cloth)?;
    let body = scene.posed_body();
    let sim = Simulator { cloth: &cloth, rest: &rest, material: &scene.material, config: &scene.config, body: body.as_ref() };
    let traj = match cfg.drape.steps {
        Some(n) => sim.run(scene.initial_state(), StopRule::Fixed(n))?,
        None => sim.drape_to_equilibrium(scene.initial_state())?,
    };
    let last = traj.last();
    write(&out.join("drape.obj"), &write_obj(&scene.pattern, Some(&last.x)))?;
    let mut log = String::from("# step kinetic_J elastic_J max_speed active_contacts\n");
    for (i, s) in traj.states.iter().enumerate() {
        let contacts = if i == 0 { 0 } else { traj.records[i - 1].num_active_contacts(scene.config.iterations) };
        let _ = writeln!(
            log,
            "{i} {:.9e} {:.9e} {:.6e} {contacts}",
            kinetic_energy(s, &rest),
            elastic_energy(&s.x, &cloth, &rest, &scene.material),
            s.max_speed()
        );
    }
    write(&out.join("energy.txt"), &log)?;
    write(&out.join("quality.txt"), &quality_report(&scene, &last.x))?;
    if cfg.drape.export_frames {
        traj.export_obj_sequence(&scene.pattern, &out.join("trajectory"))?;
    }
    let strain = max_strain(&last.x, &cloth, &rest);
    println!("scene={} steps={} states={} max_speed={:.3e} max_strain={strain:.4e}", scene.name, traj.num_steps(), traj.states.len(), last.max_speed());
    if !(strain <= cfg.drape.max_strain) {
        return Err(CmdError::Numeric(format!("max strain {strain:.4e} exceeds drape.max_strain {}", cfg.drape.max_strain)));
    }
    Ok(())
}

fn loss_config(cfg: &RunConfig) -> LossConfig {
    let l = &cfg.loss;
    LossConfig { boundary: l.boundary, interior: l.interior, seam: l.seam, curvature: l.curvature, ..Default::default() }
}

fn groups(key: &str, s: &str) -> Result<Vec<Group>> {
    parse_groups(s).map_err(|e| config_err(format!("{key}: {e}")))
}

pub fn cmd_optimize(cfg: &mut RunConfig) -> Result<()> {
    let (target_pts, target_lines) = match (&cfg.paths.target_points, &cfg.paths.target_polylines) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => return Err(config_err("paths.target_points: optimize needs a target (see synth-target)")),
    };
    let (scene, out) = prepare(cfg)?;
    let target = TargetGarment::load(&target_pts, &target_lines)?;
    let mode = if cfg.optim.mode == "direct" { PatternMode::Direct } else { PatternMode::Cage };
    let mut problem = Problem::new(scene.clone(), Objective::Garment { target, loss: loss_config(cfg) }, mode)?;
    let mut p0 = problem.initial_parameters(&groups("optim.groups", &cfg.optim.groups)?);
    let r = &cfg.optim.rates;
    for (g, v) in [(Group::Zeta, r.zeta), (Group::Rest, r.rest), (Group::Bend, r.bend), (Group::Stretch, r.stretch), (Group::Nu, r.nu), (Group::Psi, r.psi)] {
        p0.set_rate(g, v);
    }
    let mut stages = Vec::new();
    for (i, s) in cfg.optim.stages.iter().enumerate() {
        stages.push(Stage { groups: groups(&format!("optim.stages[{i}].groups"), &s.groups)?, iters: s.iters });
    }
    let oc = OptimConfig {
        max_iters: cfg.optim.max_iters,
        grad_tol: cfg.optim.grad_tol,
        min_step: cfg.optim.min_step,
        warm_start: cfg.optim.warm_start,
        stages,
        ..Default::default()
    };
    p0.validate().map_err(|e| config_err(format!("optim.rates: {e}")))?;
    oc.validate().map_err(|e| config_err(format!("optim: {e}")))?;
    let (p, report) = co_optimize(&mut problem, &p0, &oc)?;
    // Unchanged parameters reproduce the input pattern bit for bit.
    let mesh = if p == p0 { scene.pattern.clone() } else { problem.realize(&p)?.mesh };
    save_scene_pattern(&scene, &mesh, &out, "pattern")?;
    let drape = problem.forward(&p, None)?;
    write(&out.join("drape.obj"), &write_obj(&scene.pattern, Some(&drape.trajectory.last().x)))?;
    let mut text = report.to_text();
    let _ = writeln!(text, "bend={:.9e} stretch={:?}", p.bend(), p.stretch());
    if !p.nu.is_empty() {
        let _ = writeln!(text, "nu={:?}", p.nu);
        let _ = writeln!(text, "psi={:?}", p.psi);
    }
    let _ = writeln!(text, "pattern_area={:.9e} initial_area={:.9e}", mesh.total_area(), scene.pattern.total_area());
    write(&out.join("report.txt"), &text)?;
    println!(
        "iterations={} stop={:?} phi {:.6e} -> {:.6e} inverted_proposals={}{}",
        report.iterations.len() - 1,
        report.stop,
        report.initial_value(),
        report.final_value(),
        report.inverted_proposals,
        if report.noop { " (no parameter groups enabled; nothing changed)" } else { "" }
    );
    if report.stop == Stop::Diverged {
        return Err(CmdError::Numeric("forward simulation diverged twice in one iteration".into()));
    }
    Ok(())
}

pub fn cmd_gradcheck(cfg: &mut RunConfig) -> Result<()> {
    let (scene, out) = prepare(cfg)?;
    let g = &cfg.gradcheck;
    let opts = GradcheckOptions {
        check: CheckOptions { tolerance: g.tolerance, ..Default::default() },
        corrupt: g.corrupt_jacobian,
        steps: Some(g.steps),
        ..Default::default()
    };
    let rep = gradcheck(&scene, &groups("gradcheck.groups", &g.groups)?, &opts)?;
    write(&out.join("gradcheck.txt"), &rep.to_text())?;
    for grp in rep.groups() {
        let n = rep.rows.iter().filter(|r| r.group == grp).count();
        println!("{grp}: {n} coordinates, max relative error {:.3e}", rep.group_max_error(&grp));
    }
    let bad = rep.rows.iter().filter(|r| !r.pass).count();
    if bad > 0 {
        let w = rep.worst().expect("rows");
        return Err(CmdError::Numeric(format!(
            "{bad} coordinates exceed {:.0e}; worst {} {} ({:.3e})",
            g.tolerance, w.group, w.name, w.rel_error
        )));
    }
    println!("gradcheck passed ({} coordinates)", rep.rows.len());
    Ok(())
}

pub fn cmd_synth_target(cfg: &mut RunConfig) -> Result<()> {
    let (scene, out) = prepare(cfg)?;
    let s = &cfg.synth;
    let mut truth = scene.clone();
    if let Some(f) = s.panel_scale {
        truth.pattern = scale_panels(&scene.pattern, &scene.pins, f)?;
    }
    if let Some(b) = s.bend {
        truth.material.bend = b;
    }
    if let Some(st) = s.stretch {
        truth.material.stretch = st;
    }
    truth.material.validate()?;
    if let Some(nu) = &s.nu {
        check_len("synth.nu", nu, scene.nu.len())?;
        truth.nu = nu.clone();
    }
    if let Some(psi) = &s.psi {
        check_len("synth.psi", psi, scene.psi.len())?;
        truth.psi = psi.clone();
    }
    let (target, traj) = synthesize_target(&truth, s.noise, s.dropout, cfg.seed)?;
    let (pts, lines) = (out.join("target_points.obj"), out.join("target_polylines.txt"));
    target.save(&pts, &lines)?;
    save_scene_pattern(&truth, &truth.pattern, &out, "truth_pattern")?;
    let x = &traj.last().x;
    write(&out.join("truth_drape.obj"), &write_obj(&truth.pattern, Some(x)))?;
    let chamfer = metric_chamfer(&target.interior, x);
    let text = format!(
        "points={} of {} dropout={} noise={} seed={}\nchamfer_to_truth={chamfer:.9e}\n",
        target.interior.len(),
        x.len(),
        s.dropout,
        s.noise,
        cfg.seed
    );
    write(&out.join("synth.txt"), &text)?;
    print!("{text}");
    println!("next: --paths.target_points {} --paths.target_polylines {}", pts.display(), lines.display());
    Ok(())
}

/// Bundled scene as pattern, sidecar and body files.
pub fn cmd_export_scene(cfg: &mut RunConfig) -> Result<()> {
    let (scene, out) = prepare(cfg)?;
    save_scene_pattern(&scene, &scene.pattern, &out, &scene.name)?;
    if let Some(b) = &scene.body {
        save_body(b, &out.join("body.obj"), &out.join("body.json"))?;
    }
    println!("wrote {} to {}", scene.name, out.display());
    Ok(())
}
