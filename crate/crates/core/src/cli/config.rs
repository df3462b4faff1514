//! `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated.
//! Every scenario key is required. Power levels can be given in watts
//! (`noise_power`) or dBm (`noise_power_dbm`). A list with one entry is
//! repeated for every target or user. Solver keys are optional.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifold::Projection;
use crate::model::{dbm_to_watts, Disc, ScenarioConfig};
use crate::optimizer::{FpWeighting, Init, Method, Scaling, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub solver: SolverOptions,
}

const SCENARIO_KEYS: &[&str] = &[
    "carrier_frequency",
    "num_antennas",
    "num_users",
    "num_targets",
    "noise_power",
    "noise_power_dbm",
    "max_power",
    "max_power_dbm",
    "beampattern_thresholds",
    "beampattern_thresholds_dbm",
    "rate_thresholds",
    "user_region_center",
    "user_region_radius",
    "target_angles",
    "target_range_min",
    "target_range_max",
    "rng_seed",
];

const SOLVER_KEYS: &[&str] = &[
    "method",
    "init",
    "step0",
    "decay",
    "batch_fraction",
    "max_displacement",
    "max_inner",
    "max_outer",
    "max_alm_rounds",
    "grad_tol_initial",
    "grad_tol_final",
    "feasibility_tol",
    "rate_tol",
    "check_interval",
    "projection",
    "scaling",
    "fp_weighting",
    "rho0",
    "multiplier_cadence",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(line, v)| (*line, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key)
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, line: usize, value: &str) -> Result<T> {
        value
            .trim()
            .parse()
            .map_err(|_| config_err(format!("line {line}: cannot parse '{value}' for key '{key}'")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.required(key)?;
        self.parse(key, line, v)
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            Some((line, v)) => self.parse(key, line, v).map(Some),
            None => Ok(None),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self.required(key)?;
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|item| self.parse(key, line, item)).collect()
    }

    /// Watts from `key` or dBm from `key_dbm`; exactly one must be present.
    fn power(&self, key: &str) -> Result<f64> {
        let dbm_key = format!("{key}_dbm");
        match (self.raw(key).is_some(), self.raw(&dbm_key).is_some()) {
            (true, true) => Err(config_err(format!("give either '{key}' or '{dbm_key}', not both"))),
            (true, false) => self.number(key),
            (false, true) => self.number::<f64>(&dbm_key).map(dbm_to_watts),
            (false, false) => Err(config_err(format!("missing required key '{key}' (or '{dbm_key}')"))),
        }
    }

    fn power_list(&self, key: &str) -> Result<Vec<f64>> {
        let dbm_key = format!("{key}_dbm");
        match (self.raw(key).is_some(), self.raw(&dbm_key).is_some()) {
            (true, true) => Err(config_err(format!("give either '{key}' or '{dbm_key}', not both"))),
            (true, false) => self.list(key),
            (false, true) => Ok(self.list(&dbm_key)?.into_iter().map(dbm_to_watts).collect()),
            (false, false) => Err(config_err(format!("missing required key '{key}' (or '{dbm_key}')"))),
        }
    }
}

fn broadcast(key: &str, values: Vec<f64>, len: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; len]),
        n if n == len => Ok(values),
        n => Err(config_err(format!("'{key}' has {n} entries, expected 1 or {len}"))),
    }
}

fn parse_entries(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {line_no}: expected 'key = value'")))?;
        let key = key.trim().to_ascii_lowercase();
        if !SCENARIO_KEYS.contains(&key.as_str()) && !SOLVER_KEYS.contains(&key.as_str()) {
            return Err(config_err(format!("line {line_no}: unknown key '{key}'")));
        }
        if map.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
            return Err(config_err(format!("line {line_no}: duplicate key '{key}'")));
        }
    }
    Ok(Entries(map))
}

fn parse_projection(s: &str) -> Option<Projection> {
    match s.trim().to_ascii_lowercase().as_str() {
        "sphere" => Some(Projection::Sphere),
        "hadamard" => Some(Projection::Hadamard),
        _ => None,
    }
}

fn parse_scaling(s: &str) -> Option<Scaling> {
    match s.trim().to_ascii_lowercase().as_str() {
        "unit" => Some(Scaling::Unit),
        "relative" => Some(Scaling::Relative),
        _ => None,
    }
}

fn solver_options(e: &Entries) -> Result<SolverOptions> {
    let mut o = SolverOptions::default();
    if let Some(m) = e.optional::<Method>("method")? {
        o.method = m;
    }
    if let Some(i) = e.optional::<Init>("init")? {
        o.init = i;
    }
    if let Some(w) = e.optional::<FpWeighting>("fp_weighting")? {
        o.fp_weighting = w;
    }
    if let Some((line, v)) = e.raw("projection") {
        o.projection = parse_projection(v)
            .ok_or_else(|| config_err(format!("line {line}: projection must be 'sphere' or 'hadamard'")))?;
    }
    if let Some((line, v)) = e.raw("scaling") {
        o.scaling = parse_scaling(v)
            .ok_or_else(|| config_err(format!("line {line}: scaling must be 'unit' or 'relative'")))?;
    }
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = e.optional(stringify!($field))? {
                o.$field = v;
            })*
        };
    }
    set!(
        step0,
        decay,
        batch_fraction,
        max_displacement,
        max_inner,
        max_outer,
        max_alm_rounds,
        grad_tol_initial,
        grad_tol_final,
        feasibility_tol,
        rate_tol,
        check_interval,
        rho0,
        multiplier_cadence
    );
    o.validate().map_err(|err| config_err(err.to_string()))?;
    Ok(o)
}

fn scenario_config(e: &Entries) -> Result<ScenarioConfig> {
    let num_users: usize = e.number("num_users")?;
    let num_targets: usize = e.number("num_targets")?;
    let center = e.list("user_region_center")?;
    if center.len() != 2 {
        return Err(config_err("'user_region_center' needs two values: x, y"));
    }
    let target_angles = e.list("target_angles")?;
    let cfg = ScenarioConfig {
        carrier_frequency: e.number("carrier_frequency")?,
        num_antennas: e.number("num_antennas")?,
        num_users,
        num_targets,
        noise_power: e.power("noise_power")?,
        max_power: e.power("max_power")?,
        beampattern_thresholds: if num_targets == 0 {
            Vec::new()
        } else {
            broadcast("beampattern_thresholds", e.power_list("beampattern_thresholds")?, num_targets)?
        },
        rate_thresholds: broadcast("rate_thresholds", e.list("rate_thresholds")?, num_users)?,
        user_region: Disc {
            center: (center[0], center[1]),
            radius: e.number("user_region_radius")?,
        },
        target_angles,
        target_range_interval: (e.number("target_range_min")?, e.number("target_range_max")?),
        rng_seed: e.optional("rng_seed")?.unwrap_or(0),
    };
    cfg.validate().map_err(|err| config_err(err.to_string()))?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = parse_entries(text)?;
    Ok(RunConfig {
        scenario: scenario_config(&entries)?,
        solver: solver_options(&entries)?,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| config_err(format!("cannot read {}: {err}", path.display())))?;
    parse_config(&text)
}
