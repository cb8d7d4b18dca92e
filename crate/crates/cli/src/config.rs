//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use birkhoff_core::integrator::{Grid, Scheme, SchemeConfig};
use birkhoff_core::problems::DampedWaveProblem;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: DampedWaveProblem,
    pub scheme: Scheme,
    pub nx: usize,
    /// `None` means `dx / 2`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Refinement levels for `converge` (each halves dx and dt).
    pub levels: usize,
    pub solver_tol: f64,
    /// Pass tolerance for the self-adjointness check.
    pub adjoint_tol: f64,
    /// Pass tolerance for the discrete dissipation residual.
    pub dissipation_tol: f64,
    /// Adds 0.1 to `M[1][1]` in the self-adjointness check.
    pub debug_perturb_m: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: DampedWaveProblem::default(),
            scheme: Scheme::Box,
            nx: 64,
            dt: None,
            t_end: 1.0,
            seed: 0,
            out_dir: PathBuf::from("out"),
            levels: 3,
            solver_tol: 1e-10,
            adjoint_tol: 1e-8,
            dissipation_tol: 1e-10,
            debug_perturb_m: false,
        }
    }
}

const KEYS: &[&str] = &[
    "alpha",
    "beta",
    "mode_k",
    "amplitude",
    "phase",
    "scheme",
    "nx",
    "dt",
    "t_end",
    "seed",
    "out_dir",
    "levels",
    "solver_tol",
    "adjoint_tol",
    "dissipation_tol",
    "debug_perturb_m",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("invalid value `{value}` for key `{key}` (expected true/false)"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "alpha" => self.problem.alpha = parse(key, value)?,
            "beta" => self.problem.beta = parse(key, value)?,
            "mode_k" => self.problem.mode_k = parse(key, value)?,
            "amplitude" => self.problem.amplitude = parse(key, value)?,
            "phase" => self.problem.phase = parse(key, value)?,
            "scheme" => {
                self.scheme = value
                    .parse()
                    .map_err(|_| CliError::Config(format!("invalid value `{value}` for key `scheme` (box|leapfrog)")))?
            }
            "nx" => self.nx = parse(key, value)?,
            "dt" => self.dt = Some(parse(key, value)?),
            "t_end" => self.t_end = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "levels" => self.levels = parse(key, value)?,
            "solver_tol" => self.solver_tol = parse(key, value)?,
            "adjoint_tol" => self.adjoint_tol = parse(key, value)?,
            "dissipation_tol" => self.dissipation_tol = parse(key, value)?,
            "debug_perturb_m" => self.debug_perturb_m = parse_bool(key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: String| Err(CliError::Config(format!("`{key}`: {why}")));
        let p = &self.problem;
        if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
            return bad("alpha", format!("must be finite and >= 0, got {}", p.alpha));
        }
        if !p.beta.is_finite() {
            return bad("beta", format!("must be finite, got {}", p.beta));
        }
        if p.mode_k == 0 {
            return bad("mode_k", "must be a positive integer".into());
        }
        if !p.amplitude.is_finite() || !p.phase.is_finite() {
            return bad("amplitude", "amplitude and phase must be finite".into());
        }
        if self.nx < 2 {
            return bad("nx", format!("must be at least 2, got {}", self.nx));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad("dt", format!("must be positive, got {dt}"));
            }
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if self.nt() == 0 {
            return bad("t_end", format!("t_end = {} is shorter than half a step (dt = {})", self.t_end, self.dt()));
        }
        for (key, v) in [
            ("solver_tol", self.solver_tol),
            ("adjoint_tol", self.adjoint_tol),
            ("dissipation_tol", self.dissipation_tol),
        ] {
            if !(v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        TAU / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.5 * self.dx())
    }

    pub fn nt(&self) -> usize {
        (self.t_end / self.dt()).round() as usize
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::periodic(self.nx, self.dt(), self.nt())?)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme,
            alpha: self.problem.alpha,
            beta: self.problem.beta,
            solver_tol: self.solver_tol,
        }
    }
}
