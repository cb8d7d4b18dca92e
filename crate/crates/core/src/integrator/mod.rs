//! Time integration of the damped wave family
//! `u_tt - u_xx + u + alpha u_t + beta u_x = 0` in first-order form
//! `u_t = p`, `u_x = q`, `p_t - q_x + u + alpha p + beta q = 0` on a periodic
//! lattice.

mod banded;
mod box_scheme;
mod leapfrog;

use std::f64::consts::TAU;

pub use banded::{AlmostBanded, AlmostBandedLu};
pub use box_scheme::{assemble_step_system, step_box, BoxOperator, BoxStepper, CellBlocks, CyclicBlockMatrix};
pub use leapfrog::{cfl_warning, leapfrog_start, step_leapfrog};

use crate::error::{Error, Result};

/// State `(u, p, q)` at one lattice node.
pub type Node = [f64; 3];

pub const U: usize = 0;
pub const P: usize = 1;
pub const Q: usize = 2;

/// Uniform space-time lattice, periodic in space (node `nx` is node 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub dt: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(x0: f64, x1: f64, nx: usize, dt: f64, nt: usize) -> Result<Self> {
        if nx < 2 {
            return Err(Error::Usage(format!("nx must be at least 2, got {nx}")));
        }
        if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(Error::Usage(format!("invalid interval [{x0}, {x1})")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Usage(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { x0, x1, nx, dt, nt })
    }

    /// Grid on `[0, 2 pi)`.
    pub fn periodic(nx: usize, dt: f64, nt: usize) -> Result<Self> {
        Self::new(0.0, TAU, nx, dt, nt)
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    /// Node coordinate; indices past `nx - 1` are not wrapped.
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nt)
    }

    pub fn with_steps(&self, nt: usize) -> Self {
        Self { nt, ..*self }
    }
}

/// Node values at time level `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLevel {
    pub j: usize,
    pub z: Vec<Node>,
}

impl StateLevel {
    pub fn zeros(j: usize, nx: usize) -> Self {
        Self { j, z: vec![[0.0; 3]; nx] }
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().flatten().all(|v| v.is_finite())
    }

    /// `a * self + b * other`, keeping `self.j`.
    pub fn combine(&self, a: f64, other: &StateLevel, b: f64) -> StateLevel {
        let z = self
            .z
            .iter()
            .zip(&other.z)
            .map(|(s, o)| [a * s[0] + b * o[0], a * s[1] + b * o[1], a * s[2] + b * o[2]])
            .collect();
        StateLevel { j: self.j, z }
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.z.iter().map(|n| n[c]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Box,
    Leapfrog,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Scheme::Box),
            "leapfrog" => Ok(Scheme::Leapfrog),
            other => Err(Error::Usage(format!("unknown scheme '{other}' (expected box or leapfrog)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Box => "box",
            Scheme::Leapfrog => "leapfrog",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Time damping coefficient, `>= 0`.
    pub alpha: f64,
    /// Space drift coefficient.
    pub beta: f64,
    /// Bound on the scaled residual of the cell equations after each solve.
    pub solver_tol: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Box, alpha: 2.0, beta: 0.0, solver_tol: 1e-10 }
    }
}

impl SchemeConfig {
    pub fn boxed(alpha: f64, beta: f64) -> Self {
        Self { scheme: Scheme::Box, alpha, beta, ..Self::default() }
    }

    pub fn leapfrog(alpha: f64, beta: f64) -> Self {
        Self { scheme: Scheme::Leapfrog, alpha, beta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.solver_tol > 0.0) {
            return Err(Error::Usage(format!("solver_tol must be positive, got {}", self.solver_tol)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Usage(format!("alpha must be finite and non-negative, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Usage(format!("beta must be finite, got {}", self.beta)));
        }
        Ok(())
    }
}

pub(crate) fn check_level(grid: &Grid, level: &StateLevel) -> Result<()> {
    if level.z.len() != grid.nx {
        return Err(Error::Usage(format!(
            "level has {} nodes, grid has nx = {}",
            level.z.len(),
            grid.nx
        )));
    }
    if !level.is_finite() {
        return Err(Error::Divergence);
    }
    Ok(())
}

fn wrap_step(index: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Step { index, source: Box::new(e) }
}

/// Runs `grid.nt` steps from `init` (which must be level 0) and returns all
/// `nt + 1` levels.
pub fn run_simulation(cfg: &SchemeConfig, grid: &Grid, init: &StateLevel) -> Result<Vec<StateLevel>> {
    cfg.validate()?;
    if init.j != 0 {
        return Err(Error::Usage(format!("initial level must have j = 0, got {}", init.j)));
    }
    check_level(grid, init)?;
    let mut levels = Vec::with_capacity(grid.nt + 1);
    levels.push(init.clone());
    if grid.nt == 0 {
        return Ok(levels);
    }
    match cfg.scheme {
        Scheme::Box => {
            let stepper = BoxStepper::forward(cfg, grid).map_err(wrap_step(0))?;
            for j in 0..grid.nt {
                let next = stepper.step(&levels[j]).map_err(wrap_step(j))?;
                levels.push(next);
            }
        }
        Scheme::Leapfrog => {
            if let Some(w) = cfl_warning(grid) {
                log::warn!("{w}");
            }
            levels.push(leapfrog_start(cfg, grid, init).map_err(wrap_step(0))?);
            for j in 1..grid.nt {
                let next = step_leapfrog(cfg, grid, (&levels[j - 1], &levels[j])).map_err(wrap_step(j))?;
                levels.push(next);
            }
        }
    }
    Ok(levels)
}
