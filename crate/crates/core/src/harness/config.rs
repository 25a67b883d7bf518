//! Plain `key = value` configuration with `[section]` headers. Keys are
//! addressed as `section.key`; later overrides win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use super::experiments::RunConfig;
use crate::error::{Error, Result};
use crate::grid::LogGrid;
use crate::radial_pde::{ReactionScheme, RightBoundary};

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "problem.n",
    "problem.p",
    "grid.s_min",
    "grid.s_max",
    "grid.points",
    "grid.right",
    "time.t0",
    "time.t1",
    "time.dt0",
    "time.growth",
    "time.theta",
    "time.scheme",
    "time.samples",
    "experiment.kind",
    "experiment.ell",
    "experiment.b",
    "experiment.k",
    "experiment.tolerance",
    "experiment.r_lo",
    "experiment.r_hi",
    "experiment.rho",
    "experiment.r_max",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{}.{}", s.trim(), k.trim()),
                    None => k.trim().to_string(),
                };
                cfg.set(&key, v.trim())?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Later entries replace earlier ones.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}` = `{v}` is not a valid value"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Applies grid and time keys on top of `base`. `time.t0`/`time.t1` set
    /// the sampled window; evolutions always start from the data at `t = 0`.
    pub fn run_config(&self, base: RunConfig) -> Result<RunConfig> {
        let mut rc = base;
        let g = rc.setup.grid;
        let s_min = self.get_or("grid.s_min", g.s_min)?;
        let s_max = self.get_or("grid.s_max", g.s_max)?;
        let points = self.get_or("grid.points", g.points)?;
        rc.setup.grid = LogGrid::new(s_min, s_max, points).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(right) = self.raw("grid.right") {
            rc.setup.right = match right {
                "dirichlet" => RightBoundary::Dirichlet,
                "zero_flux" | "neumann" => RightBoundary::ZeroFlux,
                other => return Err(Error::Config(format!("grid.right = `{other}`: use dirichlet or zero_flux"))),
            };
        }
        if let Some(scheme) = self.raw("time.scheme") {
            rc.setup.scheme = match scheme {
                "implicit" => ReactionScheme::Implicit,
                "semi_implicit" => ReactionScheme::SemiImplicit,
                other => return Err(Error::Config(format!("time.scheme = `{other}`: use implicit or semi_implicit"))),
            };
        }
        rc.setup.dt0 = self.get_or("time.dt0", rc.setup.dt0)?;
        rc.setup.growth = self.get_or("time.growth", rc.setup.growth)?;
        rc.setup.theta = self.get_or("time.theta", rc.setup.theta)?;
        rc.window = (self.get_or("time.t0", rc.window.0)?, self.get_or("time.t1", rc.window.1)?);
        rc.samples = self.get_or("time.samples", rc.samples)?;
        rc.tolerance = self.get("experiment.tolerance")?.or(rc.tolerance);
        validate(&rc)?;
        Ok(rc)
    }
}

fn validate(rc: &RunConfig) -> Result<()> {
    let (t0, t1) = rc.window;
    if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
        return Err(Error::Config(format!("time window [{t0}, {t1}] needs 0 < t0 < t1")));
    }
    if rc.samples < 4 {
        return Err(Error::Config(format!("time.samples = {} is below 4", rc.samples)));
    }
    let needed = (20.0 * t1.sqrt()).ln();
    if rc.setup.grid.s_max < needed {
        return Err(Error::Config(format!(
            "grid.s_max = {:.4} is below ln(20·√t1) = {needed:.4}",
            rc.setup.grid.s_max
        )));
    }
    rc.setup.config(&[t1]).map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_overrides() {
        let mut c = Config::parse("[problem]\nn = 11\np = 7\n\n[time]\nt1 = 1000\n").unwrap();
        assert_eq!(c.get::<u32>("problem.n").unwrap(), Some(11));
        c.apply_override("time.t1=2000").unwrap();
        let rc = c.run_config(RunConfig::default()).unwrap();
        assert_eq!(rc.window, (10.0, 2000.0));
        assert!(c.apply_override("time.nope=1").is_err());
        assert!(Config::parse("[grid]\nbogus = 1\n").is_err());
    }

    #[test]
    fn domain_size_rule() {
        let mut c = Config::default();
        c.set("time.t1", "1e8").unwrap();
        assert!(matches!(c.run_config(RunConfig::default()), Err(Error::Config(_))));
        c.set("grid.s_max", "13").unwrap();
        assert!(c.run_config(RunConfig::default()).is_ok());
    }

    #[test]
    fn bad_values() {
        let mut c = Config::default();
        c.set("grid.points", "many").unwrap();
        assert!(c.run_config(RunConfig::default()).is_err());
        let mut c = Config::default();
        c.set("time.growth", "1.5").unwrap();
        assert!(c.run_config(RunConfig::default()).is_err());
    }
}
