//! wasm-bindgen surface for `www/index.html`. Each export wraps a plain
//! function so the same code runs in native tests.

use drapefit::cage::{ControlCage, DEFAULT_ANGLE_THRESHOLD_DEG};
use drapefit::math::Vec2;
use drapefit::optim::{gradcheck, parse_groups, GradcheckOptions};
use drapefit::pattern::triangle_quality_2d;
use drapefit::scenes;
use drapefit::sim::{max_strain, Simulator, StopRule};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct DrapeView {
    positions: Vec<f64>,
    faces: Vec<u32>,
    steps: usize,
    max_strain: f64,
}

#[wasm_bindgen]
impl DrapeView {
    /// xyz per vertex.
    #[wasm_bindgen(getter)]
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn faces(&self) -> Vec<u32> {
        self.faces.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[wasm_bindgen(getter, js_name = maxStrain)]
    pub fn max_strain(&self) -> f64 {
        self.max_strain
    }
}

#[wasm_bindgen]
pub struct CageView {
    rest: Vec<f64>,
    handles: Vec<f64>,
    faces: Vec<u32>,
    min_quality: f64,
    inverted: bool,
}

#[wasm_bindgen]
impl CageView {
    /// xy per pattern vertex after the handle move.
    #[wasm_bindgen(getter)]
    pub fn rest(&self) -> Vec<f64> {
        self.rest.clone()
    }

    /// xy per cage handle, all panels concatenated.
    #[wasm_bindgen(getter)]
    pub fn handles(&self) -> Vec<f64> {
        self.handles.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn faces(&self) -> Vec<u32> {
        self.faces.clone()
    }

    #[wasm_bindgen(getter, js_name = minQuality)]
    pub fn min_quality(&self) -> f64 {
        self.min_quality
    }

    #[wasm_bindgen(getter)]
    pub fn inverted(&self) -> bool {
        self.inverted
    }
}

fn faces_u32(f: &[[usize; 3]]) -> Vec<u32> {
    f.iter().flatten().map(|&i| i as u32).collect()
}

/// `steps == 0` drapes to equilibrium.
pub fn drape_scene(name: &str, steps: usize) -> Result<DrapeView, String> {
    let scene = scenes::by_name(name).map_err(|e| e.to_string())?;
    let cloth = scene.cloth().map_err(|e| e.to_string())?;
    let rest = scene.rest(&cloth).map_err(|e| e.to_string())?;
    let body = scene.posed_body();
    let sim = Simulator { cloth: &cloth, rest: &rest, material: &scene.material, config: &scene.config, body: body.as_ref() };
    let traj = if steps == 0 {
        sim.drape_to_equilibrium(scene.initial_state())
    } else {
        sim.run(scene.initial_state(), StopRule::Fixed(steps))
    }
    .map_err(|e| e.to_string())?;
    let x = &traj.last().x;
    Ok(DrapeView {
        positions: x.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
        faces: faces_u32(&scene.pattern.faces),
        steps: traj.num_steps(),
        max_strain: max_strain(x, &cloth, &rest),
    })
}

/// Move one cage handle by (dx, dy) and report the deformed pattern.
pub fn move_handle(name: &str, handle: usize, dx: f64, dy: f64) -> Result<CageView, String> {
    let scene = scenes::by_name(name).map_err(|e| e.to_string())?;
    let cage = ControlCage::build(&scene.pattern, DEFAULT_ANGLE_THRESHOLD_DEG).map_err(|e| e.to_string())?;
    let mut zeta = cage.zeta0.clone();
    let h = zeta.get_mut(handle).ok_or_else(|| format!("handle {handle} out of range (0..{})", cage.num_handles()))?;
    *h += Vec2::new(dx, dy);
    let rest = cage.positions(&zeta).map_err(|e| e.to_string())?;
    let q = triangle_quality_2d(&rest, &scene.pattern.faces);
    let inverted = scene.pattern.with_rest_positions(rest.clone()).is_err();
    Ok(CageView {
        rest: rest.iter().flat_map(|p| [p.x, p.y]).collect(),
        handles: zeta.iter().flat_map(|p| [p.x, p.y]).collect(),
        faces: faces_u32(&scene.pattern.faces),
        min_quality: q.min,
        inverted,
    })
}

/// Adjoint vs central differences on the two-triangle scene.
pub fn gradcheck_text(groups: &str) -> Result<String, String> {
    let groups = parse_groups(groups).map_err(|e| e.to_string())?;
    let scene = scenes::two_triangles();
    let rep = gradcheck(&scene, &groups, &GradcheckOptions::default()).map_err(|e| e.to_string())?;
    let verdict = if rep.passed() { "all coordinates within 1e-3" } else { "FAILED" };
    Ok(format!("{}\n{verdict}\n", rep.to_text()))
}

#[wasm_bindgen]
pub fn drape(name: &str, steps: usize) -> Result<DrapeView, JsError> {
    drape_scene(name, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = moveHandle)]
pub fn move_handle_js(name: &str, handle: usize, dx: f64, dy: f64) -> Result<CageView, JsError> {
    move_handle(name, handle, dx, dy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = gradcheck)]
pub fn gradcheck_js(groups: &str) -> Result<String, JsError> {
    gradcheck_text(groups).map_err(|e| JsError::new(&e))
}
