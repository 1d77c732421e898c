//! Constraint kernels: forward XPBD projections and their exact
//! vector-Jacobian products. Each projection maps the stencil positions and
//! the accumulated multiplier to corrected positions and multiplier; the
//! `*_vjp` functions pull output adjoints back to every input, including the
//! rest shape, compliance and inverse masses.

use crate::dual::{Dual, Scalar, V3};
use crate::math::{Mat2, Mat3, Mat32, Vec3};

/// Faces with `|n|² = (2A)²` below this are treated as degenerate hinges.
const DEGENERATE_NORMAL2: f64 = 4e-24;

pub fn deformation_gradient(x: &[Vec3; 3], dm_inv: &Mat2) -> Mat32 {
    Mat32::from_columns(&[x[0] - x[2], x[1] - x[2]]) * dm_inv
}

pub fn green_strain(f: &Mat32) -> Vec3 {
    let f0 = f.column(0);
    let f1 = f.column(1);
    Vec3::new(0.5 * (f0.dot(&f0) - 1.0), 0.5 * (f1.dot(&f1) - 1.0), 0.5 * f0.dot(&f1))
}

/// ∂F/∂x̄ for the three rest vertices: `out[v][n]` is the 3×2 derivative of F
/// with respect to coordinate `n` of rest vertex `v`.
pub fn df_dxbar(d: &Mat32, dm_inv: &Mat2) -> [[Mat32; 2]; 3] {
    let mut out = [[Mat32::zeros(); 2]; 3];
    // ∂F_ij/∂x̄_mn = −D_ik B_km B_nj, with m the coordinate and n the vertex.
    for m in 0..2 {
        for n in 0..2 {
            let mut t = Mat32::zeros();
            for i in 0..3 {
                for j in 0..2 {
                    let dk: f64 = (0..2).map(|k| d[(i, k)] * dm_inv[(k, m)]).sum();
                    t[(i, j)] = -dk * dm_inv[(n, j)];
                }
            }
            out[n][m] = t;
        }
    }
    for n in 0..2 {
        out[2][n] = -(out[0][n] + out[1][n]);
    }
    out
}

struct StrainTerms {
    d: Mat32,
    f: Mat32,
    c: Vec3,
    p: [Mat32; 3],
    /// `g[v]` has ∇_v C_k as column k.
    g: [Mat3; 3],
}

fn strain_terms(x: &[Vec3; 3], b: &Mat2) -> StrainTerms {
    let d = Mat32::from_columns(&[x[0] - x[2], x[1] - x[2]]);
    let f = d * b;
    let f0: Vec3 = f.column(0).into_owned();
    let f1: Vec3 = f.column(1).into_owned();
    let z = Vec3::zeros();
    let p = [
        Mat32::from_columns(&[f0, z]),
        Mat32::from_columns(&[z, f1]),
        Mat32::from_columns(&[f1 * 0.5, f0 * 0.5]),
    ];
    let m = p.map(|pc| pc * b.transpose());
    let mut g = [Mat3::zeros(); 3];
    for (k, mk) in m.iter().enumerate() {
        let a: Vec3 = mk.column(0).into_owned();
        let c: Vec3 = mk.column(1).into_owned();
        g[0].set_column(k, &a);
        g[1].set_column(k, &c);
        g[2].set_column(k, &(-(a + c)));
    }
    let c = green_strain(&f);
    StrainTerms { d, f, c, p, g }
}

#[derive(Clone, Debug)]
pub struct StrainInput {
    pub x: [Vec3; 3],
    pub lambda: Vec3,
    pub dm_inv: Mat2,
    /// Time-step scaled compliance α̃ per strain component.
    pub alpha: Vec3,
    pub w: [f64; 3],
}

#[derive(Clone, Debug, Default)]
pub struct StrainAdjoint {
    pub x: [Vec3; 3],
    pub lambda: Vec3,
    pub dm_inv: Mat2,
    pub alpha: Vec3,
    pub w: [f64; 3],
}

fn strain_system(t: &StrainTerms, inp: &StrainInput) -> Mat3 {
    let mut j = Mat3::from_diagonal(&inp.alpha);
    for v in 0..3 {
        j += t.g[v].transpose() * t.g[v] * inp.w[v];
    }
    j
}

/// Returns position corrections and Δλ, or `None` when the local system is
/// singular and the constraint is skipped.
pub fn strain_project(inp: &StrainInput) -> Option<([Vec3; 3], Vec3)> {
    let t = strain_terms(&inp.x, &inp.dm_inv);
    let j_inv = strain_system(&t, inp).try_inverse()?;
    let rhs = -t.c - inp.alpha.component_mul(&inp.lambda);
    let dl = j_inv * rhs;
    let dx = [0, 1, 2].map(|v| t.g[v] * dl * inp.w[v]);
    Some((dx, dl))
}

/// Pulls back adjoints of `(x', λ')` through one strain projection. Must only
/// be called for projections that were not skipped.
pub fn strain_project_vjp(inp: &StrainInput, x_hat: &[Vec3; 3], l_hat: &Vec3) -> StrainAdjoint {
    let t = strain_terms(&inp.x, &inp.dm_inv);
    let j = strain_system(&t, inp);
    let j_inv = j.try_inverse().expect("vjp of a skipped strain projection");
    let rhs = -t.c - inp.alpha.component_mul(&inp.lambda);
    let dl = j_inv * rhs;

    let mut out = StrainAdjoint { x: *x_hat, lambda: *l_hat, ..Default::default() };
    let mut dl_hat = *l_hat;
    let mut g_hat = [Mat3::zeros(); 3];
    for v in 0..3 {
        dl_hat += t.g[v].transpose() * x_hat[v] * inp.w[v];
        g_hat[v] = x_hat[v] * dl.transpose() * inp.w[v];
        out.w[v] = x_hat[v].dot(&(t.g[v] * dl));
    }
    let b_hat = j_inv * dl_hat;
    let j_hat = -b_hat * dl.transpose();
    let j_sym = j_hat + j_hat.transpose();
    for v in 0..3 {
        g_hat[v] += t.g[v] * j_sym * inp.w[v];
        out.w[v] += j_hat.dot(&(t.g[v].transpose() * t.g[v]));
    }
    out.alpha = j_hat.diagonal() - inp.lambda.component_mul(&b_hat);
    out.lambda -= inp.alpha.component_mul(&b_hat);
    let c_hat = -b_hat;

    // Back through G_v = P_k Bᵀ columns and C(F).
    let bm = &inp.dm_inv;
    let mut f_hat = Mat32::zeros();
    let mut bm_hat = Mat2::zeros();
    for k in 0..3 {
        let u = Mat32::from_columns(&[
            g_hat[0].column(k) - g_hat[2].column(k),
            g_hat[1].column(k) - g_hat[2].column(k),
        ]);
        let p_hat = u * bm;
        bm_hat += u.transpose() * t.p[k];
        match k {
            0 => f_hat.set_column(0, &(f_hat.column(0) + p_hat.column(0))),
            1 => f_hat.set_column(1, &(f_hat.column(1) + p_hat.column(1))),
            _ => {
                let c0 = f_hat.column(0) + p_hat.column(1) * 0.5;
                let c1 = f_hat.column(1) + p_hat.column(0) * 0.5;
                f_hat.set_column(0, &c0);
                f_hat.set_column(1, &c1);
            }
        }
    }
    let f0 = t.f.column(0).into_owned();
    let f1 = t.f.column(1).into_owned();
    let c0 = f_hat.column(0) + f0 * c_hat[0] + f1 * (0.5 * c_hat[2]);
    let c1 = f_hat.column(1) + f1 * c_hat[1] + f0 * (0.5 * c_hat[2]);
    f_hat.set_column(0, &c0);
    f_hat.set_column(1, &c1);

    let d_hat = f_hat * bm.transpose();
    bm_hat += t.d.transpose() * f_hat;
    let d0: Vec3 = d_hat.column(0).into_owned();
    let d1: Vec3 = d_hat.column(1).into_owned();
    out.x[0] += d0;
    out.x[1] += d1;
    out.x[2] -= d0 + d1;
    out.dm_inv = bm_hat;
    out
}

/// Signed dihedral angle φ of the hinge (x0, x1 shared; faces (x0, x1, x2)
/// and (x1, x0, x3)); zero when flat. `None` for degenerate faces.
pub fn dihedral_angle(x: &[Vec3; 4]) -> Option<f64> {
    let e = x[1] - x[0];
    let na = e.cross(&(x[2] - x[0]));
    let nb = (x[3] - x[0]).cross(&e);
    if na.norm_squared() < DEGENERATE_NORMAL2 || nb.norm_squared() < DEGENERATE_NORMAL2 {
        return None;
    }
    let s = na.cross(&nb).dot(&e) / e.norm();
    Some(s.atan2(na.dot(&nb)))
}

/// ∇φ for each hinge vertex, generic so that dual numbers give exact
/// Hessian-vector products.
pub fn dihedral_angle_grad<T: Scalar>(x: &[V3<T>; 4]) -> [V3<T>; 4] {
    let e = x[1] - x[0];
    let a = x[2] - x[0];
    let b = x[3] - x[0];
    let na = e.cross(&a);
    let nb = b.cross(&e);
    let eh = e.scale(T::from_f64(1.0) / e.norm());
    let s = na.cross(&nb).dot(&eh);
    let c = na.dot(&nb);
    let q = s * s + c * c;
    let ks = c / q;
    let kc = -s / q;
    let g_na = nb.cross(&eh).scale(ks) + nb.scale(kc);
    let g_nb = eh.cross(&na).scale(ks) + na.scale(kc);
    let de = a.cross(&g_na) + g_nb.cross(&b);
    let da = g_na.cross(&e);
    let db = e.cross(&g_nb);
    [-(de + da + db), de, da, db]
}

/// C = θ − θ̄ with θ = π − φ, i.e. C = 0 for a flat hinge and `rest_angle = π`.
pub fn dihedral_constraint(x: &[Vec3; 4], rest_angle: f64) -> Option<(f64, [Vec3; 4])> {
    let phi = dihedral_angle(x)?;
    let g = dihedral_angle_grad(&x.map(|p| V3::from_vec(&p)));
    Some((std::f64::consts::PI - phi - rest_angle, g.map(|v| -v.to_vec())))
}

#[derive(Clone, Debug)]
pub struct HingeInput {
    pub x: [Vec3; 4],
    pub lambda: f64,
    pub rest_angle: f64,
    pub alpha: f64,
    pub w: [f64; 4],
}

#[derive(Clone, Debug, Default)]
pub struct HingeAdjoint {
    pub x: [Vec3; 4],
    pub lambda: f64,
    pub alpha: f64,
    pub w: [f64; 4],
}

pub fn hinge_project(inp: &HingeInput) -> Option<([Vec3; 4], f64)> {
    let (c, g) = dihedral_constraint(&inp.x, inp.rest_angle)?;
    let j = inp.alpha + (0..4).map(|v| inp.w[v] * g[v].norm_squared()).sum::<f64>();
    if j == 0.0 {
        return None;
    }
    let dl = (-c - inp.alpha * inp.lambda) / j;
    Some(([0, 1, 2, 3].map(|v| g[v] * (inp.w[v] * dl)), dl))
}

pub fn hinge_project_vjp(inp: &HingeInput, x_hat: &[Vec3; 4], l_hat: f64) -> HingeAdjoint {
    let (c, g) = dihedral_constraint(&inp.x, inp.rest_angle).expect("vjp of a skipped hinge");
    let j = inp.alpha + (0..4).map(|v| inp.w[v] * g[v].norm_squared()).sum::<f64>();
    let dl = (-c - inp.alpha * inp.lambda) / j;

    let mut out = HingeAdjoint { x: *x_hat, lambda: l_hat, ..Default::default() };
    let mut dl_hat = l_hat;
    let mut g_hat = [Vec3::zeros(); 4];
    for v in 0..4 {
        dl_hat += inp.w[v] * g[v].dot(&x_hat[v]);
        g_hat[v] = x_hat[v] * (inp.w[v] * dl);
        out.w[v] = dl * x_hat[v].dot(&g[v]);
    }
    let b_hat = dl_hat / j;
    let j_hat = -b_hat * dl;
    for v in 0..4 {
        g_hat[v] += g[v] * (2.0 * inp.w[v] * j_hat);
        out.w[v] += j_hat * g[v].norm_squared();
    }
    out.alpha = j_hat - inp.lambda * b_hat;
    out.lambda -= inp.alpha * b_hat;
    let c_hat = -b_hat;
    // G = −∇φ, so Ĝ·dG = −(Hφ Ĝ)·dx; C = −φ + const gives −∇φ Ĉ.
    let seeded = [0, 1, 2, 3].map(|v| V3::<Dual>::seeded(&inp.x[v], &g_hat[v]));
    let hvp = dihedral_angle_grad(&seeded);
    for v in 0..4 {
        out.x[v] += g[v] * c_hat - hvp[v].eps_vec();
    }
    out
}

#[derive(Clone, Debug)]
pub struct StitchInput {
    pub x: [Vec3; 2],
    pub lambda: Vec3,
    pub alpha: f64,
    pub w: [f64; 2],
}

#[derive(Clone, Debug, Default)]
pub struct StitchAdjoint {
    pub x: [Vec3; 2],
    pub lambda: Vec3,
    pub w: [f64; 2],
}

/// Zero-rest-length vector constraint C = x_a − x_b joining seam partners.
pub fn stitch_project(inp: &StitchInput) -> Option<([Vec3; 2], Vec3)> {
    let s = inp.w[0] + inp.w[1] + inp.alpha;
    if s == 0.0 {
        return None;
    }
    let c = inp.x[0] - inp.x[1];
    let dl = -(c + inp.lambda * inp.alpha) / s;
    Some(([dl * inp.w[0], -dl * inp.w[1]], dl))
}

pub fn stitch_project_vjp(inp: &StitchInput, x_hat: &[Vec3; 2], l_hat: &Vec3) -> StitchAdjoint {
    let s = inp.w[0] + inp.w[1] + inp.alpha;
    let c = inp.x[0] - inp.x[1];
    let dl = -(c + inp.lambda * inp.alpha) / s;
    let dl_hat = l_hat + x_hat[0] * inp.w[0] - x_hat[1] * inp.w[1];
    let b_hat = dl_hat / s;
    let s_hat = -b_hat.dot(&dl);
    let c_hat = -b_hat;
    StitchAdjoint {
        x: [x_hat[0] + c_hat, x_hat[1] - c_hat],
        lambda: l_hat - b_hat * inp.alpha,
        w: [x_hat[0].dot(&dl) + s_hat, -x_hat[1].dot(&dl) + s_hat],
    }
}

/// Cached cloth–body contact frame for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Contact {
    pub vertex: usize,
    pub face: usize,
    pub bary: [f64; 3],
    pub normal: Vec3,
}

impl Contact {
    pub fn surface_point(&self, body_vertices: &[Vec3], body_faces: &[[usize; 3]]) -> Vec3 {
        let f = body_faces[self.face];
        (0..3).map(|k| body_vertices[f[k]] * self.bary[k]).sum()
    }
}

/// Unilateral contact value C = n·(x − p) − r.
pub fn contact_value(x: &Vec3, p: &Vec3, n: &Vec3, r: f64) -> f64 {
    n.dot(&(x - p)) - r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
        Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
    }

    #[test]
    fn undeformed_lift_and_doubling() {
        let b = Mat2::identity();
        let x = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        // D = [x0 − x2, x1 − x2] with D̄ = I means rest x̄0 − x̄2 = (1,0), x̄1 − x̄2 = (0,1)
        let x = [x[1], x[2], x[0]];
        let f = deformation_gradient(&x, &b);
        assert_eq!(f, Mat32::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0));
        let f2 = deformation_gradient(&x.map(|p| p * 2.0), &b);
        assert_eq!(f2, Mat32::new(2.0, 0.0, 0.0, 2.0, 0.0, 0.0));
        assert_eq!(green_strain(&f), Vec3::zeros());
        assert!((green_strain(&f2) - Vec3::new(1.5, 1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn shear_strain_by_hand() {
        let f = Mat32::new(1.0, 0.3, 0.0, 1.0, 0.0, 0.0);
        let e = green_strain(&f);
        assert!(e[0].abs() < 1e-15);
        assert!((e[1] - 0.045).abs() < 1e-12);
        assert!((e[2] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn f_reproduces_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let xb = [0, 1, 2].map(|_| crate::math::Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let dm = crate::pattern::rest_matrix(&xb[0], &xb[1], &xb[2]);
            let Some(b) = dm.try_inverse() else { continue };
            let x = [0, 1, 2].map(|_| rv(&mut rng, 1.0));
            let f = deformation_gradient(&x, &b);
            for k in 0..2 {
                let e2 = xb[k] - xb[2];
                assert!((f * e2 - (x[k] - x[2])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn df_dxbar_by_hand_sum_rule_and_fd() {
        let d = Mat32::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let t = df_dxbar(&d, &Mat2::identity());
        assert_eq!(t[0][0][(0, 0)], -1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xb = [crate::math::Vec2::new(0.1, -0.2), crate::math::Vec2::new(0.9, 0.1), crate::math::Vec2::new(0.3, 0.7)];
        let x = [0, 1, 2].map(|_| rv(&mut rng, 1.0));
        let f_of = |xb: &[crate::math::Vec2; 3]| {
            let b = crate::pattern::rest_matrix(&xb[0], &xb[1], &xb[2]).try_inverse().unwrap();
            deformation_gradient(&x, &b)
        };
        let b = crate::pattern::rest_matrix(&xb[0], &xb[1], &xb[2]).try_inverse().unwrap();
        let dd = Mat32::from_columns(&[x[0] - x[2], x[1] - x[2]]);
        let t = df_dxbar(&dd, &b);
        assert_eq!(t[0][0] + t[1][0] + t[2][0], Mat32::zeros());
        let h = 1e-7;
        for v in 0..3 {
            for n in 0..2 {
                let mut p = xb;
                let mut m = xb;
                p[v][n] += h;
                m[v][n] -= h;
                let fd = (f_of(&p) - f_of(&m)) / (2.0 * h);
                assert!((fd - t[v][n]).amax() < 1e-6, "{v} {n}");
            }
        }
    }

    #[test]
    fn dihedral_flat_fd_and_invariance() {
        let flat = [Vec3::zeros(), Vec3::x(), Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.5, -1.0, 0.0)];
        let (c, g) = dihedral_constraint(&flat, std::f64::consts::PI).unwrap();
        assert!(c.abs() < 1e-15);
        let sum: Vec3 = g.iter().sum();
        assert!(sum.norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut x = flat;
            for p in x.iter_mut() {
                *p += rv(&mut rng, 0.3);
            }
            let (c, g) = dihedral_constraint(&x, 2.5).unwrap();
            let h = 1e-6;
            for v in 0..4 {
                for a in 0..3 {
                    let mut p = x;
                    let mut m = x;
                    p[v][a] += h;
                    m[v][a] -= h;
                    let fd = (dihedral_constraint(&p, 2.5).unwrap().0 - dihedral_constraint(&m, 2.5).unwrap().0) / (2.0 * h);
                    assert!((fd - g[v][a]).abs() <= 1e-5 * fd.abs().max(1.0), "{fd} {}", g[v][a]);
                }
            }
            let t = rv(&mut rng, 5.0);
            let c2 = dihedral_constraint(&x.map(|p| p + t), 2.5).unwrap().0;
            assert!((c - c2).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_hinge_is_skipped() {
        let x = [Vec3::zeros(), Vec3::x(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.5, -1.0, 0.0)];
        assert!(dihedral_constraint(&x, std::f64::consts::PI).is_none());
    }

    #[test]
    fn satisfied_constraints_do_nothing() {
        let inp = StrainInput {
            x: [Vec3::x(), Vec3::y(), Vec3::zeros()],
            lambda: Vec3::zeros(),
            dm_inv: Mat2::identity(),
            alpha: Vec3::repeat(1e-3),
            w: [1.0; 3],
        };
        let (dx, dl) = strain_project(&inp).unwrap();
        assert!(dx.iter().all(|d| d.norm() < 1e-15) && dl.norm() < 1e-15);
    }

    #[test]
    fn stitch_solves_linear_constraint_in_one_projection() {
        let inp = StitchInput { x: [Vec3::new(1.0, 2.0, 3.0), Vec3::zeros()], lambda: Vec3::zeros(), alpha: 0.0, w: [1.0, 1.0] };
        let (dx, _) = stitch_project(&inp).unwrap();
        assert!(((inp.x[0] + dx[0]) - (inp.x[1] + dx[1])).norm() < 1e-15);
        // Equal masses meet halfway, momentum unchanged.
        assert!((dx[0] + dx[1]).norm() < 1e-15);
        // Infinitely compliant: no correction.
        let soft = StitchInput { alpha: 1e30, ..inp };
        assert!(stitch_project(&soft).unwrap().0[0].norm() < 1e-25);
        let pinned = StitchInput { w: [0.0, 0.0], ..inp.clone() };
        assert!(stitch_project(&pinned).is_none());
    }

    #[test]
    fn strain_and_hinge_conserve_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let w = [0, 1, 2].map(|_| rng.gen_range(0.5..2.0));
            let inp = StrainInput {
                x: [Vec3::x(), Vec3::y(), Vec3::zeros()].map(|p| p + rv(&mut rng, 0.2)),
                lambda: rv(&mut rng, 0.1),
                dm_inv: Mat2::identity(),
                alpha: Vec3::repeat(0.01),
                w,
            };
            let (dx, _) = strain_project(&inp).unwrap();
            let p: Vec3 = (0..3).map(|v| dx[v] / w[v]).sum();
            let scale: f64 = (0..3).map(|v| (dx[v] / w[v]).norm()).sum();
            assert!(p.norm() <= 1e-9 * scale);
            let wh = [0, 1, 2, 3].map(|_| rng.gen_range(0.5..2.0));
            let hin = HingeInput {
                x: [Vec3::zeros(), Vec3::x(), Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.5, -1.0, 0.0)].map(|p| p + rv(&mut rng, 0.2)),
                lambda: 0.0,
                rest_angle: std::f64::consts::PI,
                alpha: 0.1,
                w: wh,
            };
            let (dx, _) = hinge_project(&hin).unwrap();
            let p: Vec3 = (0..4).map(|v| dx[v] / wh[v]).sum();
            let scale: f64 = (0..4).map(|v| (dx[v] / wh[v]).norm()).sum();
            assert!(p.norm() <= 1e-9 * scale.max(1e-300));
        }
    }

    /// Directional FD of a scalar probe ⟨x̂, x'⟩ + ⟨λ̂, λ'⟩ against the VJP.
    fn check(analytic: f64, fd: f64) {
        assert!((analytic - fd).abs() <= 1e-6 * analytic.abs().max(fd.abs()).max(1e-3), "analytic {analytic} fd {fd}");
    }

    #[test]
    fn strain_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let inp = StrainInput {
                x: [Vec3::x(), Vec3::y(), Vec3::zeros()].map(|p| p + rv(&mut rng, 0.2)),
                lambda: rv(&mut rng, 0.1),
                dm_inv: Mat2::new(1.1, 0.2, -0.1, 0.9),
                alpha: Vec3::new(0.01, 0.02, 0.05),
                w: [1.0, 0.7, 1.3],
            };
            let xh = [0, 1, 2].map(|_| rv(&mut rng, 1.0));
            let lh = rv(&mut rng, 1.0);
            let probe = |i: &StrainInput| {
                let (dx, dl) = strain_project(i).unwrap();
                (0..3).map(|v| (i.x[v] + dx[v]).dot(&xh[v])).sum::<f64>() + (i.lambda + dl).dot(&lh)
            };
            let adj = strain_project_vjp(&inp, &xh, &lh);
            let dir = StrainInput {
                x: [0, 1, 2].map(|_| rv(&mut rng, 1.0)),
                lambda: rv(&mut rng, 1.0),
                dm_inv: Mat2::new(rng.gen(), rng.gen(), rng.gen(), rng.gen()),
                alpha: rv(&mut rng, 0.01),
                w: [rng.gen(), rng.gen(), rng.gen()],
            };
            let shift = |s: f64| StrainInput {
                x: [0, 1, 2].map(|v| inp.x[v] + dir.x[v] * s),
                lambda: inp.lambda + dir.lambda * s,
                dm_inv: inp.dm_inv + dir.dm_inv * s,
                alpha: inp.alpha + dir.alpha * s,
                w: [0, 1, 2].map(|v| inp.w[v] + dir.w[v] * s),
            };
            let h = 1e-6;
            let fd = (probe(&shift(h)) - probe(&shift(-h))) / (2.0 * h);
            let an = (0..3).map(|v| adj.x[v].dot(&dir.x[v]) + adj.w[v] * dir.w[v]).sum::<f64>()
                + adj.lambda.dot(&dir.lambda)
                + adj.dm_inv.dot(&dir.dm_inv)
                + adj.alpha.dot(&dir.alpha);
            check(an, fd);
        }
    }

    #[test]
    fn hinge_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let inp = HingeInput {
                x: [Vec3::zeros(), Vec3::x(), Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.5, -1.0, 0.0)].map(|p| p + rv(&mut rng, 0.3)),
                lambda: rng.gen_range(-0.1..0.1),
                rest_angle: 2.8,
                alpha: 0.05,
                w: [1.0, 0.5, 1.5, 0.8],
            };
            let xh = [0, 1, 2, 3].map(|_| rv(&mut rng, 1.0));
            let lh: f64 = rng.gen_range(-1.0..1.0);
            let probe = |i: &HingeInput| {
                let (dx, dl) = hinge_project(i).unwrap();
                (0..4).map(|v| (i.x[v] + dx[v]).dot(&xh[v])).sum::<f64>() + (i.lambda + dl) * lh
            };
            let adj = hinge_project_vjp(&inp, &xh, lh);
            let dx = [0, 1, 2, 3].map(|_| rv(&mut rng, 1.0));
            let (dlam, dal): (f64, f64) = (rng.gen(), rng.gen::<f64>() * 0.01);
            let dw = [0, 1, 2, 3].map(|_| rng.gen::<f64>());
            let shift = |s: f64| HingeInput {
                x: [0, 1, 2, 3].map(|v| inp.x[v] + dx[v] * s),
                lambda: inp.lambda + dlam * s,
                alpha: inp.alpha + dal * s,
                w: [0, 1, 2, 3].map(|v| inp.w[v] + dw[v] * s),
                ..inp.clone()
            };
            let h = 1e-6;
            let fd = (probe(&shift(h)) - probe(&shift(-h))) / (2.0 * h);
            let an = (0..4).map(|v| adj.x[v].dot(&dx[v]) + adj.w[v] * dw[v]).sum::<f64>() + adj.lambda * dlam + adj.alpha * dal;
            check(an, fd);
        }
    }

    #[test]
    fn stitch_vjp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let inp = StitchInput { x: [rv(&mut rng, 1.0), rv(&mut rng, 1.0)], lambda: rv(&mut rng, 0.1), alpha: 0.3, w: [1.0, 2.0] };
            let xh = [rv(&mut rng, 1.0), rv(&mut rng, 1.0)];
            let lh = rv(&mut rng, 1.0);
            let probe = |i: &StitchInput| {
                let (dx, dl) = stitch_project(i).unwrap();
                (i.x[0] + dx[0]).dot(&xh[0]) + (i.x[1] + dx[1]).dot(&xh[1]) + (i.lambda + dl).dot(&lh)
            };
            let adj = stitch_project_vjp(&inp, &xh, &lh);
            let dx = [rv(&mut rng, 1.0), rv(&mut rng, 1.0)];
            let dlam = rv(&mut rng, 1.0);
            let dw = [rng.gen::<f64>(), rng.gen::<f64>()];
            let shift = |s: f64| StitchInput {
                x: [inp.x[0] + dx[0] * s, inp.x[1] + dx[1] * s],
                lambda: inp.lambda + dlam * s,
                w: [inp.w[0] + dw[0] * s, inp.w[1] + dw[1] * s],
                ..inp.clone()
            };
            let h = 1e-6;
            let fd = (probe(&shift(h)) - probe(&shift(-h))) / (2.0 * h);
            let an = adj.x[0].dot(&dx[0]) + adj.x[1].dot(&dx[1]) + adj.lambda.dot(&dlam) + adj.w[0] * dw[0] + adj.w[1] * dw[1];
            check(an, fd);
        }
    }
}
