//! Backtracking gradient descent shared by the body initializer and the
//! co-optimization loop.

#[derive(Clone, Debug)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Initial global step factor.
    pub step: f64,
    pub grow: f64,
    pub shrink: f64,
    pub min_step: f64,
    /// Stop when the (direction-normalized) gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { max_iters: 200, step: 1.0, grow: 1.5, shrink: 0.5, min_step: 1e-4, grad_tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    MinStep,
    InitialFailure,
}

#[derive(Clone, Debug)]
pub struct Iterate {
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub rejected: usize,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Accepted iterates, starting with the initial point.
    pub history: Vec<Iterate>,
    pub stop: StopReason,
}

/// Minimize with steps `x + t·d(g)`, growing `t` on acceptance and shrinking
/// it on rejection. `eval` returning `None` (e.g. invalid or diverged
/// parameters) counts as a rejection. `direction` maps a gradient to a descent
/// direction and its norm used for the tolerance test; `project` enforces box
/// constraints.
pub fn descend<E, D, P>(x0: Vec<f64>, mut eval: E, direction: D, project: P, opts: &DescentOptions) -> DescentResult
where
    E: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    D: Fn(&[f64]) -> (Vec<f64>, f64),
    P: Fn(&mut [f64]),
{
    let Some((mut fx, mut g)) = eval(&x0) else {
        return DescentResult { x: x0, value: f64::NAN, history: vec![], stop: StopReason::InitialFailure };
    };
    let mut x = x0;
    let mut t = opts.step;
    let (mut d, mut gn) = direction(&g);
    let mut history = vec![Iterate { value: fx, grad_norm: gn, step: 0.0, rejected: 0 }];
    let mut stop = StopReason::MaxIterations;
    for _ in 0..opts.max_iters {
        if gn < opts.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut rejected = 0;
        let accepted = loop {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut trial);
            match eval(&trial) {
                Some((f, gt)) if f < fx => break Some((trial, f, gt)),
                _ => {
                    rejected += 1;
                    t *= opts.shrink;
                    if t < opts.min_step {
                        break None;
                    }
                }
            }
        };
        let Some((xn, f, gt)) = accepted else {
            stop = StopReason::MinStep;
            break;
        };
        x = xn;
        fx = f;
        g = gt;
        (d, gn) = direction(&g);
        history.push(Iterate { value: fx, grad_norm: gn, step: t, rejected });
        t *= opts.grow;
    }
    DescentResult { x, value: fx, history, stop }
}

/// Unit-norm steepest descent in the metric scaled by `scale`; masked
/// coordinates stay fixed.
pub fn scaled_direction(g: &[f64], scale: &[f64], mask: &[bool]) -> (Vec<f64>, f64) {
    let n: f64 = g
        .iter()
        .zip(scale)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((g, s), _)| (g * s).powi(2))
        .sum::<f64>()
        .sqrt();
    if n == 0.0 {
        return (vec![0.0; g.len()], 0.0);
    }
    let d = g
        .iter()
        .zip(scale)
        .zip(mask)
        .map(|((g, s), &m)| if m { -g * s * s / n } else { 0.0 })
        .collect();
    (d, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic_monotonically() {
        let f = |x: &[f64]| Some(((x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2), vec![2.0 * (x[0] - 1.0), 20.0 * (x[1] + 2.0)]));
        let opts = DescentOptions { max_iters: 500, min_step: 1e-12, grad_tol: 1e-8, ..Default::default() };
        let r = descend(vec![0.0, 0.0], f, |g| scaled_direction(g, &[1.0, 1.0], &[true, true]), |_| {}, &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6, "{:?}", r.x);
        assert!(r.history.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn masked_coordinates_never_move() {
        let f = |x: &[f64]| Some((x[0] * x[0] + x[1] * x[1], vec![2.0 * x[0], 2.0 * x[1]]));
        let r = descend(vec![1.0, 1.0], f, |g| scaled_direction(g, &[1.0, 1.0], &[true, false]), |_| {}, &DescentOptions::default());
        assert_eq!(r.x[1], 1.0);
        assert!(r.x[0].abs() < 1e-3);
    }
}
