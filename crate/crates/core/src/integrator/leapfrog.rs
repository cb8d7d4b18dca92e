//! Explicit central-difference comparator. Not structure preserving.

use super::{check_level, Grid, Node, SchemeConfig, StateLevel, P, U};
use crate::error::{Error, Result};

pub fn cfl_warning(grid: &Grid) -> Option<String> {
    let dx = grid.dx();
    (grid.dt > dx).then(|| format!("leapfrog CFL condition violated: dt = {} > dx = {dx}", grid.dt))
}

/// `u_xx - u - beta u_x` with central differences, the spatial part of `u_tt + alpha u_t`.
fn spatial_operator(beta: f64, dx: f64, u: &[f64]) -> Vec<f64> {
    let nx = u.len();
    (0..nx)
        .map(|i| {
            let (l, c, r) = (u[(i + nx - 1) % nx], u[i], u[(i + 1) % nx]);
            (r - 2.0 * c + l) / (dx * dx) - c - beta * (r - l) / (2.0 * dx)
        })
        .collect()
}

fn central_x(u: &[f64], dx: f64) -> Vec<f64> {
    let nx = u.len();
    (0..nx).map(|i| (u[(i + 1) % nx] - u[(i + nx - 1) % nx]) / (2.0 * dx)).collect()
}

fn finish(j: usize, u: Vec<f64>, p: Vec<f64>, dx: f64) -> Result<StateLevel> {
    let q = central_x(&u, dx);
    let z: Vec<Node> = (0..u.len()).map(|i| [u[i], p[i], q[i]]).collect();
    let level = StateLevel { j, z };
    if level.is_finite() {
        Ok(level)
    } else {
        Err(Error::Divergence)
    }
}

/// Level 1 from a second-order Taylor start.
pub fn leapfrog_start(cfg: &SchemeConfig, grid: &Grid, init: &StateLevel) -> Result<StateLevel> {
    check_level(grid, init)?;
    let (dt, dx) = (grid.dt, grid.dx());
    let u0 = init.component(U);
    let p0 = init.component(P);
    let lu = spatial_operator(cfg.beta, dx, &u0);
    let utt: Vec<f64> = lu.iter().zip(&p0).map(|(l, p)| l - cfg.alpha * p).collect();
    let u1 = (0..grid.nx).map(|i| u0[i] + dt * p0[i] + 0.5 * dt * dt * utt[i]).collect();
    let p1 = (0..grid.nx).map(|i| p0[i] + dt * utt[i]).collect();
    finish(init.j + 1, u1, p1, dx)
}

/// `u[j+1] = (2 u[j] - (1 - alpha dt/2) u[j-1] + dt^2 (u_xx - u - beta u_x)) / (1 + alpha dt/2)`.
/// `p` at the new level uses the one-sided second-order difference
/// `(3 u[j+1] - 4 u[j] + u[j-1]) / (2 dt)`, `q` the central difference in space.
pub fn step_leapfrog(
    cfg: &SchemeConfig,
    grid: &Grid,
    levels: (&StateLevel, &StateLevel),
) -> Result<StateLevel> {
    let (prev, cur) = levels;
    check_level(grid, prev)?;
    check_level(grid, cur)?;
    if cur.j != prev.j + 1 {
        return Err(Error::Usage(format!(
            "leapfrog needs consecutive levels, got {} and {}",
            prev.j, cur.j
        )));
    }
    let (dt, dx) = (grid.dt, grid.dx());
    let half = 0.5 * cfg.alpha * dt;
    let um = prev.component(U);
    let u = cur.component(U);
    let lu = spatial_operator(cfg.beta, dx, &u);
    let un: Vec<f64> = (0..grid.nx)
        .map(|i| (2.0 * u[i] - (1.0 - half) * um[i] + dt * dt * lu[i]) / (1.0 + half))
        .collect();
    let pn = (0..grid.nx).map(|i| (3.0 * un[i] - 4.0 * u[i] + um[i]) / (2.0 * dt)).collect();
    finish(cur.j + 1, un, pn, dx)
}
