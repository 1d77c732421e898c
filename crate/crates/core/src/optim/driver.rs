use std::fmt::Write as _;
use std::time::Instant;

use crate::loss::LossTerms;
use crate::optim::params::{Group, ParameterVector};
use crate::optim::problem::{warm_start, Problem};
use crate::pattern::{triangle_quality_2d, QualityStats};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub groups: Vec<Group>,
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Stop when every group's `rate · |g|` falls below this.
    pub grad_tol: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Smallest global step factor before giving up.
    pub min_step: f64,
    pub max_step: f64,
    /// Empty: all enabled groups every iteration.
    pub stages: Vec<Stage>,
    /// Start each drape from the last accepted one. Off by default: it makes
    /// the objective depend on the iterate history.
    pub warm_start: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iters: 200,
            grad_tol: 1e-6,
            grow: 1.5,
            shrink: 0.5,
            min_step: 1e-3,
            max_step: 100.0,
            stages: Vec::new(),
            warm_start: false,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol >= 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.grow >= 1.0
            && self.min_step > 0.0
            && self.max_step >= self.min_step;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid optimizer config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    MaxIterations,
    GradientTolerance,
    MinStep,
    Diverged,
    NoParameters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    pub terms: LossTerms,
    pub grad_norms: Vec<(Group, f64)>,
    /// Global step factor of the accepted update (0 for the start point).
    pub step: f64,
    pub rejected_increase: usize,
    pub rejected_inverted: usize,
    pub rejected_diverged: usize,
}

#[derive(Clone, Debug)]
pub struct OptimizationReport {
    pub iterations: Vec<IterationRecord>,
    pub stop: Stop,
    pub inverted_proposals: usize,
    pub divergences: usize,
    pub wall_time: f64,
    pub initial_quality: QualityStats,
    pub final_quality: QualityStats,
    pub noop: bool,
}

impl OptimizationReport {
    pub fn initial_value(&self) -> f64 {
        self.iterations.first().map_or(f64::NAN, |r| r.value)
    }

    pub fn final_value(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.value)
    }

    pub fn is_monotone(&self) -> bool {
        self.iterations.windows(2).all(|w| w[1].value <= w[0].value)
    }

    /// Line-oriented `key=value` text; wall time is reported on its own
    /// line so the rest is reproducible.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.iterations {
            let _ = write!(
                s,
                "iter={} phi={:.9e} boundary={:.6e} interior={:.6e} seam={:.6e} curvature={:.6e} step={:.4e} \
                 rejected_increase={} rejected_inverted={} rejected_diverged={}",
                r.iter,
                r.value,
                r.terms.boundary,
                r.terms.interior,
                r.terms.seam,
                r.terms.curvature,
                r.step,
                r.rejected_increase,
                r.rejected_inverted,
                r.rejected_diverged
            );
            for (g, n) in &r.grad_norms {
                let _ = write!(s, " grad_{g}={n:.4e}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "stop={:?}", self.stop);
        let _ = writeln!(s, "inverted_proposals={} divergences={}", self.inverted_proposals, self.divergences);
        let _ = writeln!(s, "quality_min initial={:.6} final={:.6}", self.initial_quality.min, self.final_quality.min);
        let _ = writeln!(s, "quality_mean initial={:.6} final={:.6}", self.initial_quality.mean, self.final_quality.mean);
        if self.noop {
            s.push_str("note=no parameter groups enabled; parameters unchanged\n");
        }
        let _ = writeln!(s, "wall_time_s={:.3}", self.wall_time);
        s
    }
}

/// Per-group steepest descent: each group moves `rate·√n` along its own
/// normalized gradient, so groups with different units share one step
/// factor.
fn direction(p: &ParameterVector, g: &[f64]) -> (Vec<f64>, Vec<(Group, f64)>) {
    let mut d = vec![0.0; g.len()];
    let mut norms = Vec::new();
    for (grp, start, n) in p.offsets() {
        let gs = &g[start..start + n];
        let norm = gs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rate = p.rate(grp);
        norms.push((grp, rate * norm));
        if norm > 0.0 {
            let scale = rate * (n as f64).sqrt() / norm;
            for (di, gi) in d[start..start + n].iter_mut().zip(gs) {
                *di = -gi * scale;
            }
        }
    }
    (d, norms)
}

fn quality(problem: &Problem, p: &ParameterVector) -> Result<QualityStats> {
    Ok(triangle_quality_2d(&problem.rest_positions(p)?, &problem.scene.pattern.faces))
}

/// Gradient descent with backtracking on φ. Trial points that invert a rest
/// triangle or diverge count as rejections; a divergence halves the step
/// once more and a second one in the same iteration aborts.
pub fn co_optimize(problem: &mut Problem, p0: &ParameterVector, cfg: &OptimConfig) -> Result<(ParameterVector, OptimizationReport)> {
    cfg.validate()?;
    p0.validate()?;
    let start = Instant::now();
    let initial_quality = quality(problem, p0)?;
    let stages = if cfg.stages.is_empty() {
        vec![Stage { groups: p0.enabled_groups(), iters: cfg.max_iters }]
    } else {
        cfg.stages.clone()
    };
    let mut report = OptimizationReport {
        iterations: Vec::new(),
        stop: Stop::MaxIterations,
        inverted_proposals: 0,
        divergences: 0,
        wall_time: 0.0,
        initial_quality: initial_quality.clone(),
        final_quality: initial_quality,
        noop: p0.enabled_groups().is_empty(),
    };
    let mut p = p0.clone();
    for stage in &stages {
        let mut q = p.clone();
        for g in Group::ALL {
            q.set_enabled(g, p0.is_enabled(g) && stage.groups.contains(&g));
        }
        let (out, stop) = run_stage(problem, q, stage.iters, cfg, &mut report)?;
        p = ParameterVector { enabled: p0.enabled, ..out };
        report.stop = stop;
        if stop == Stop::Diverged {
            break;
        }
    }
    report.final_quality = quality(problem, &p)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((p, report))
}

fn run_stage(
    problem: &mut Problem,
    mut p: ParameterVector,
    iters: usize,
    cfg: &OptimConfig,
    report: &mut OptimizationReport,
) -> Result<(ParameterVector, Stop)> {
    let base_iter = report.iterations.last().map_or(0, |r| r.iter + 1);
    let mut eval = problem.evaluate(&p)?;
    let (mut d, norms) = direction(&p, &eval.grad);
    report.iterations.push(IterationRecord {
        iter: base_iter,
        value: eval.value,
        terms: eval.terms,
        grad_norms: norms.clone(),
        step: 0.0,
        rejected_increase: 0,
        rejected_inverted: 0,
        rejected_diverged: 0,
    });
    if p.dim() == 0 {
        return Ok((p, Stop::NoParameters));
    }
    let mut norms = norms;
    let mut t = 1.0f64;
    for it in 1..=iters {
        if norms.iter().all(|(_, n)| *n < cfg.grad_tol) {
            return Ok((p, Stop::GradientTolerance));
        }
        let x = p.pack();
        let (mut inc, mut inv, mut div) = (0, 0, 0);
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let q = p.with_flat(&trial)?;
            let outcome = problem.forward(&q, None).and_then(|f| problem.loss(&f).map(|e| (f, e)));
            match outcome {
                Ok((f, e)) if e.value < eval.value => break Some((q, f, e)),
                Ok(_) => inc += 1,
                Err(Error::InvertedAfterDeform(_)) => {
                    inv += 1;
                    report.inverted_proposals += 1;
                }
                Err(Error::Diverged { .. } | Error::NonFinite { .. }) => {
                    div += 1;
                    report.divergences += 1;
                    if div > 1 {
                        log::error!("forward simulation diverged twice at iteration {it}; aborting");
                        return Ok((p, Stop::Diverged));
                    }
                }
                Err(e) => return Err(e),
            }
            t *= cfg.shrink;
            if t < cfg.min_step {
                break None;
            }
        };
        let Some((q, f, e)) = accepted else {
            report.iterations.push(IterationRecord {
                iter: base_iter + it,
                value: eval.value,
                terms: eval.terms,
                grad_norms: norms,
                step: 0.0,
                rejected_increase: inc,
                rejected_inverted: inv,
                rejected_diverged: div,
            });
            return Ok((p, Stop::MinStep));
        };
        let (grad, bundle) = problem.gradient(&q, &f, &e)?;
        if cfg.warm_start {
            problem.initial = Some(warm_start(&f.trajectory, &problem.cloth)?);
        }
        p = q;
        eval = crate::optim::problem::Evaluation { value: e.value, terms: e.terms, grad, bundle, forward: f };
        (d, norms) = direction(&p, &eval.grad);
        report.iterations.push(IterationRecord {
            iter: base_iter + it,
            value: eval.value,
            terms: eval.terms,
            grad_norms: norms.clone(),
            step: t,
            rejected_increase: inc,
            rejected_inverted: inv,
            rejected_diverged: div,
        });
        log::debug!("iteration {it}: phi {:.6e} step {t:.3e}", eval.value);
        t = (t * cfg.grow).min(cfg.max_step);
    }
    Ok((p, Stop::MaxIterations))
}
