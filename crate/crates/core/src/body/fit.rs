//! Geometric initialization: fit ν and ψ to a target point cloud by
//! minimizing the symmetric Chamfer distance to the posed body vertices.

use super::BodyModel;
use crate::loss::chamfer;
use crate::math::Vec3;
use crate::optim::linesearch::{descend, scaled_direction, DescentOptions, StopReason};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub iterations: usize,
    /// Free coordinates over `[ν, ψ]`; `None` frees all of them.
    pub mask: Option<Vec<bool>>,
    /// Step scale for shape coefficients (m) and pose coordinates.
    pub shape_scale: f64,
    pub pose_scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { iterations: 200, mask: None, shape_scale: 0.01, pose_scale: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub nu: Vec<f64>,
    pub psi: Vec<f64>,
    /// Chamfer value at every accepted iterate.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

pub fn init_fit(target: &[Vec3], body: &BodyModel, nu0: &[f64], psi0: &[f64], opts: &FitOptions) -> Result<FitResult> {
    if target.is_empty() {
        return Err(Error::InvalidParameter("init_fit needs a nonempty target".into()));
    }
    let (k, p) = (body.num_shape(), body.num_pose());
    let mask = opts.mask.clone().unwrap_or_else(|| vec![true; k + p]);
    if mask.len() != k + p || nu0.len() != k || psi0.len() != p {
        return Err(Error::Dimension("init_fit parameter sizes".into()));
    }
    let scale: Vec<f64> = (0..k + p).map(|i| if i < k { opts.shape_scale } else { opts.pose_scale }).collect();
    let eval = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (nu, psi) = x.split_at(k);
        let verts = body.posed_vertices(nu, psi);
        let c = chamfer(&verts, target);
        if !c.value.is_finite() {
            return None;
        }
        let jac = body.jacobians(nu, psi);
        let (gn, gp) = jac.vjp(&c.grad);
        Some((c.value, gn.into_iter().chain(gp).collect()))
    };
    let project = |x: &mut [f64]| body.clamp_pose(&mut x[k..]);
    let descent = DescentOptions { max_iters: opts.iterations, step: 1.0, min_step: 1e-6, grad_tol: 1e-12, ..Default::default() };
    let x0: Vec<f64> = nu0.iter().chain(psi0).copied().collect();
    let r = descend(x0.clone(), eval, |g| scaled_direction(g, &scale, &mask), project, &descent);
    if r.stop == StopReason::InitialFailure {
        log::warn!("init_fit: initial evaluation failed; returning the start point");
        return Ok(FitResult { nu: nu0.to_vec(), psi: psi0.to_vec(), history: vec![], stop: r.stop });
    }
    let (nu, psi) = r.x.split_at(k);
    Ok(FitResult { nu: nu.to_vec(), psi: psi.to_vec(), history: r.history.iter().map(|h| h.value).collect(), stop: r.stop })
}
