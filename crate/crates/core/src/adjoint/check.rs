use std::fmt::Write as _;

use crate::math::relative_error;
use crate::Result;

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub steps: Vec<f64>,
    pub tolerance: f64,
    /// Relative errors use `max(|a|, |fd|, floor)` as denominator.
    pub floor: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { steps: vec![1e-4, 1e-5, 1e-6], tolerance: 1e-3, floor: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub group: String,
    pub analytic: f64,
    pub fd: f64,
    pub rel_error: f64,
    pub best_h: f64,
    /// The error was not monotone in h and the best one failed.
    pub noisy: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst(&self) -> Option<&CheckRow> {
        self.rows.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = Vec::new();
        for r in &self.rows {
            if !g.contains(&r.group) {
                g.push(r.group.clone());
            }
        }
        g
    }

    pub fn group_max_error(&self, group: &str) -> f64 {
        self.rows.iter().filter(|r| r.group == group).map(|r| r.rel_error).fold(0.0, f64::max)
    }

    /// One line per parameter: `group name analytic fd rel_error h verdict`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# group parameter analytic fd rel_error best_h verdict\n");
        for r in &self.rows {
            let verdict = match (r.pass, r.noisy) {
                (true, _) => "ok",
                (false, true) => "FAIL(noisy)",
                (false, false) => "FAIL",
            };
            let _ = writeln!(
                s,
                "{} {} {:.9e} {:.9e} {:.3e} {:.0e} {}",
                r.group, r.name, r.analytic, r.fd, r.rel_error, r.best_h, verdict
            );
        }
        s
    }
}

/// Central differences of `phi` around `x` for the selected coordinates,
/// compared with `analytic`. `params` gives (group, name, index) per row.
pub fn finite_difference_check(
    x: &[f64],
    analytic: &[f64],
    params: &[(String, String, usize)],
    mut phi: impl FnMut(&[f64]) -> Result<f64>,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut rows = Vec::with_capacity(params.len());
    let mut xp = x.to_vec();
    for (group, name, i) in params {
        let i = *i;
        let mut errs = Vec::with_capacity(opts.steps.len());
        for &h in &opts.steps {
            xp[i] = x[i] + h;
            let fp = phi(&xp)?;
            xp[i] = x[i] - h;
            let fm = phi(&xp)?;
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            errs.push((relative_error(analytic[i], fd, opts.floor), fd, h));
        }
        let (rel_error, fd, best_h) = errs.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one step");
        let monotone = errs.windows(2).all(|w| w[1].0 <= w[0].0) || errs.windows(2).all(|w| w[1].0 >= w[0].0);
        let pass = rel_error < opts.tolerance;
        rows.push(CheckRow {
            name: name.clone(),
            group: group.clone(),
            analytic: analytic[i],
            fd,
            rel_error,
            best_h,
            noisy: !pass && !monotone,
            pass,
        });
    }
    Ok(CheckReport { rows })
}
