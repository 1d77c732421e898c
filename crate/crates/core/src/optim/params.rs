use std::fmt;
use std::str::FromStr;

use crate::math::Vec2;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    /// Cage handle positions.
    Zeta,
    /// Rest positions optimized directly (cage bypassed).
    Rest,
    /// log bending compliance.
    Bend,
    /// log stretch compliances (warp, weft, shear).
    Stretch,
    Nu,
    Psi,
}

impl Group {
    pub const ALL: [Group; 6] = [Group::Zeta, Group::Rest, Group::Bend, Group::Stretch, Group::Nu, Group::Psi];

    pub fn name(self) -> &'static str {
        match self {
            Group::Zeta => "zeta",
            Group::Rest => "rest",
            Group::Bend => "bend",
            Group::Stretch => "stretch",
            Group::Nu => "nu",
            Group::Psi => "psi",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Default step length per coordinate (m, log units or rad).
    pub fn default_rate(self) -> f64 {
        match self {
            Group::Zeta | Group::Rest => 1e-3,
            Group::Bend | Group::Stretch => 0.1,
            Group::Nu | Group::Psi => 1e-2,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Group> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown parameter group {s:?}")))
    }
}

/// Parse `"zeta,bend"`-style lists; `"material"` expands to bend + stretch
/// and `"body"` to nu + psi.
pub fn parse_groups(s: &str) -> Result<Vec<Group>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let gs: Vec<Group> = match tok {
            "all" => Group::ALL.to_vec(),
            "material" => vec![Group::Bend, Group::Stretch],
            "body" => vec![Group::Nu, Group::Psi],
            "pattern" => vec![Group::Zeta, Group::Rest],
            t => vec![t.parse()?],
        };
        for g in gs {
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub zeta: Vec<Vec2>,
    pub rest: Vec<Vec2>,
    pub log_bend: f64,
    pub log_stretch: [f64; 3],
    pub nu: Vec<f64>,
    pub psi: Vec<f64>,
    pub enabled: [bool; 6],
    pub rates: [f64; 6],
}

impl ParameterVector {
    pub fn new(zeta: Vec<Vec2>, rest: Vec<Vec2>, bend: f64, stretch: [f64; 3], nu: Vec<f64>, psi: Vec<f64>) -> Self {
        ParameterVector {
            zeta,
            rest,
            log_bend: bend.ln(),
            log_stretch: stretch.map(f64::ln),
            nu,
            psi,
            enabled: [false; 6],
            rates: Group::ALL.map(Group::default_rate),
        }
    }

    pub fn bend(&self) -> f64 {
        self.log_bend.exp()
    }

    pub fn stretch(&self) -> [f64; 3] {
        self.log_stretch.map(f64::exp)
    }

    pub fn is_enabled(&self, g: Group) -> bool {
        self.enabled[g.index()]
    }

    pub fn set_enabled(&mut self, g: Group, on: bool) {
        self.enabled[g.index()] = on;
    }

    pub fn rate(&self, g: Group) -> f64 {
        self.rates[g.index()]
    }

    pub fn set_rate(&mut self, g: Group, r: f64) {
        self.rates[g.index()] = r;
    }

    pub fn enabled_groups(&self) -> Vec<Group> {
        Group::ALL.into_iter().filter(|&g| self.is_enabled(g)).collect()
    }

    pub fn group_len(&self, g: Group) -> usize {
        match g {
            Group::Zeta => 2 * self.zeta.len(),
            Group::Rest => 2 * self.rest.len(),
            Group::Bend => 1,
            Group::Stretch => 3,
            Group::Nu => self.nu.len(),
            Group::Psi => self.psi.len(),
        }
    }

    /// (group, start, len) of every enabled group in the flat array.
    pub fn offsets(&self) -> Vec<(Group, usize, usize)> {
        let mut off = 0;
        self.enabled_groups()
            .into_iter()
            .map(|g| {
                let n = self.group_len(g);
                off += n;
                (g, off - n, n)
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.offsets().iter().map(|o| o.2).sum()
    }

    pub fn group_values(&self, g: Group) -> Vec<f64> {
        match g {
            Group::Zeta => flatten(&self.zeta),
            Group::Rest => flatten(&self.rest),
            Group::Bend => vec![self.log_bend],
            Group::Stretch => self.log_stretch.to_vec(),
            Group::Nu => self.nu.clone(),
            Group::Psi => self.psi.clone(),
        }
    }

    fn set_group_values(&mut self, g: Group, v: &[f64]) {
        match g {
            Group::Zeta => unflatten(v, &mut self.zeta),
            Group::Rest => unflatten(v, &mut self.rest),
            Group::Bend => self.log_bend = v[0],
            Group::Stretch => self.log_stretch.copy_from_slice(v),
            Group::Nu => self.nu.copy_from_slice(v),
            Group::Psi => self.psi.copy_from_slice(v),
        }
    }

    /// Enabled groups, concatenated in `Group::ALL` order.
    pub fn pack(&self) -> Vec<f64> {
        self.enabled_groups().into_iter().flat_map(|g| self.group_values(g)).collect()
    }

    /// Inverse of `pack`; disabled groups are untouched.
    pub fn unpack(&mut self, flat: &[f64]) -> Result<()> {
        let dim = self.dim();
        if flat.len() != dim {
            return Err(Error::Dimension(format!("flat parameter array has {} entries, expected {dim}", flat.len())));
        }
        if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter at flat index {i}")));
        }
        for (g, start, n) in self.offsets() {
            self.set_group_values(g, &flat[start..start + n]);
        }
        Ok(())
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<ParameterVector> {
        let mut p = self.clone();
        p.unpack(flat)?;
        Ok(p)
    }

    /// Per-coordinate rates laid out like `pack`.
    pub fn rate_vector(&self) -> Vec<f64> {
        self.offsets().into_iter().flat_map(|(g, _, n)| std::iter::repeat(self.rate(g)).take(n)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_enabled(Group::Zeta) && self.is_enabled(Group::Rest) {
            return Err(Error::InvalidParameter("zeta and rest groups are mutually exclusive".into()));
        }
        for g in self.enabled_groups() {
            if self.group_values(g).iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("group {g} has non-finite values")));
            }
            let r = self.rate(g);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("group {g} rate must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(flat: &[f64], out: &mut [Vec2]) {
    for (p, c) in out.iter_mut().zip(flat.chunks_exact(2)) {
        *p = Vec2::new(c[0], c[1]);
    }
}
