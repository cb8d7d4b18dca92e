//! Conformal box scheme.
//!
//! With `a = exp(alpha dt / 2)` and `b = exp(beta dx / 2)`, cell `i` (nodes
//! `i`, `i + 1`) between levels `j` and `j + 1` satisfies
//!
//! ```text
//! (a p[i+1/2, j+1] - p[i+1/2, j] / a) / dt - (q[i+1, j+1/2] / b - b q[i, j+1/2]) / dx = -u[c]
//! (u[i+1/2, j+1] - u[i+1/2, j]) / dt = p[c]
//! (u[i+1, j+1/2] - u[i, j+1/2]) / dx = q[c]
//! ```
//!
//! where edge values are two-point averages, `u[c]` is the four-corner
//! average and the centre averages of `p` and `q` carry the conformal
//! weights: `p[c] = a/4 (p[i+1,j+1] + p[i,j+1]) + 1/(4a) (p[i+1,j] + p[i,j])`,
//! `q[c] = 1/(4b) (q[i+1,j+1] + q[i+1,j]) + b/4 (q[i,j+1] + q[i,j])`.
//!
//! In the rescaled variables `P = a^(+-1) p`, `Q = b^(-+1) q` this is the
//! standard Preissman box scheme, so the weighted two-form telescopes exactly.
//!
//! On a periodic lattice with an even number of cells the step matrix has a
//! one-dimensional kernel: the checkerboard `p_i = (-1)^i` (p only enters
//! through neighbour sums). The system stays consistent, `u` and `q` are
//! unique, and the checkerboard amplitude of `p` is carried over with the
//! conformal decay factor `exp(-alpha dt)`.

use nalgebra::DMatrix;

use super::banded::{AlmostBanded, AlmostBandedLu};
use super::{check_level, Grid, Node, SchemeConfig, StateLevel, P};
use crate::error::{Error, Result};

type Block = [[f64; 3]; 3];

/// Coefficients of the three cell equations on the two nodes of a cell at
/// one time level. Rows are equations, columns are `(u, p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBlocks {
    pub left: Block,
    pub right: Block,
}

impl CellBlocks {
    fn apply(&self, z: &[Node]) -> Vec<f64> {
        let nx = z.len();
        let mut out = vec![0.0; 3 * nx];
        for i in 0..nx {
            let (zl, zr) = (&z[i], &z[(i + 1) % nx]);
            for e in 0..3 {
                let mut s = 0.0;
                for c in 0..3 {
                    s += self.left[e][c] * zl[c] + self.right[e][c] * zr[c];
                }
                out[3 * i + e] = s;
            }
        }
        out
    }
}

/// The cell equations of one box step: `upper . z[j+1] + lower . z[j] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOperator {
    pub upper: CellBlocks,
    pub lower: CellBlocks,
    /// `exp(alpha dt / 2)`.
    pub time_factor: f64,
    /// `exp(beta dx / 2)`.
    pub space_factor: f64,
}

impl BoxOperator {
    pub fn new(cfg: &SchemeConfig, grid: &Grid) -> Self {
        let (dt, dx) = (grid.dt, grid.dx());
        let a = (0.5 * cfg.alpha * dt).exp();
        let b = (0.5 * cfg.beta * dx).exp();
        // `sign` is +1 on the new level and -1 on the old one; `w` is the
        // conformal weight of p on that level (a or 1/a).
        let level = |sign: f64, w: f64| {
            let e1 = [0.25, sign * w / (2.0 * dt)];
            let e2 = [sign / (2.0 * dt), -0.25 * w];
            CellBlocks {
                left: [
                    [e1[0], e1[1], b / (2.0 * dx)],
                    [e2[0], e2[1], 0.0],
                    [-1.0 / (2.0 * dx), 0.0, -0.25 * b],
                ],
                right: [
                    [e1[0], e1[1], -1.0 / (2.0 * b * dx)],
                    [e2[0], e2[1], 0.0],
                    [1.0 / (2.0 * dx), 0.0, -0.25 / b],
                ],
            }
        };
        Self {
            upper: level(1.0, a),
            lower: level(-1.0, 1.0 / a),
            time_factor: a,
            space_factor: b,
        }
    }

    /// Residuals of all `3 nx` cell equations, ordered by cell.
    pub fn residual(&self, lower: &StateLevel, upper: &StateLevel) -> Vec<f64> {
        let mut r = self.upper.apply(&upper.z);
        for (ri, li) in r.iter_mut().zip(self.lower.apply(&lower.z)) {
            *ri += li;
        }
        r
    }
}

/// Block-cyclic matrix of one time level: cell `i` couples nodes `i` and
/// `i + 1 (mod nx)`. Rows and columns are ordered `3 i + component`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicBlockMatrix {
    pub nx: usize,
    pub blocks: CellBlocks,
}

impl CyclicBlockMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = 3 * self.nx;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..self.nx {
            let k = (i + 1) % self.nx;
            for e in 0..3 {
                for c in 0..3 {
                    a[(3 * i + e, 3 * i + c)] += self.blocks.left[e][c];
                    a[(3 * i + e, 3 * k + c)] += self.blocks.right[e][c];
                }
            }
        }
        a
    }

    pub fn apply(&self, z: &[Node]) -> Vec<f64> {
        self.blocks.apply(z)
    }
}

/// `A z[j+1] = b` for one box step. `A` depends only on `(dt, dx, alpha, beta)`.
pub fn assemble_step_system(
    cfg: &SchemeConfig,
    grid: &Grid,
    level: &StateLevel,
) -> Result<(CyclicBlockMatrix, Vec<f64>)> {
    cfg.validate()?;
    check_level(grid, level)?;
    let op = BoxOperator::new(cfg, grid);
    let b = op.lower.apply(&level.z).into_iter().map(|v| -v).collect();
    Ok((CyclicBlockMatrix { nx: grid.nx, blocks: op.upper }, b))
}

/// Amplitude of the checkerboard `(-1)^i` component of `p`.
pub(crate) fn checkerboard(z: &[Node]) -> f64 {
    let s: f64 = z
        .iter()
        .enumerate()
        .map(|(i, n)| if i % 2 == 0 { n[P] } else { -n[P] })
        .sum();
    s / z.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// A factored box step, reusable while `(dt, dx, alpha, beta)` are fixed.
#[derive(Debug, Clone)]
pub struct BoxStepper {
    op: BoxOperator,
    direction: Direction,
    lu: AlmostBandedLu,
    nx: usize,
    /// Ratio of new to old checkerboard amplitude (even `nx` only).
    gauge_ratio: Option<f64>,
    solver_tol: f64,
}

impl BoxStepper {
    /// Stepper advancing level `j` to `j + 1`.
    pub fn forward(cfg: &SchemeConfig, grid: &Grid) -> Result<Self> {
        Self::build(cfg, grid, Direction::Forward)
    }

    /// Stepper recovering level `j - 1` from level `j` (the same cell
    /// equations solved for the lower level).
    pub fn backward(cfg: &SchemeConfig, grid: &Grid) -> Result<Self> {
        Self::build(cfg, grid, Direction::Backward)
    }

    fn build(cfg: &SchemeConfig, grid: &Grid, direction: Direction) -> Result<Self> {
        cfg.validate()?;
        let op = BoxOperator::new(cfg, grid);
        let nx = grid.nx;
        let n = 3 * nx;
        let unknown = match direction {
            Direction::Forward => op.upper,
            Direction::Backward => op.lower,
        };
        // Rows are rotated by one cell so the periodic wrap of the last cell
        // becomes the top rows, with its right-node block in the border.
        let mut a = AlmostBanded::zeros(n, 5, 2, 3);
        for i in 0..nx {
            let row0 = 3 * ((i + 1) % nx);
            let k = (i + 1) % nx;
            for e in 0..3 {
                for c in 0..3 {
                    a.add(row0 + e, 3 * i + c, unknown.left[e][c]);
                    a.add(row0 + e, 3 * k + c, unknown.right[e][c]);
                }
            }
        }
        let gauge_ratio = if nx % 2 == 0 {
            // The u_t = p equation of the last cell is redundant; pin
            // p[nx-1] instead and restore the gauge after the solve.
            a.clear_row(1);
            a.add(1, 3 * (nx - 1) + P, 1.0);
            let decay = (cfg.alpha * grid.dt).exp();
            Some(match direction {
                Direction::Forward => 1.0 / decay,
                Direction::Backward => decay,
            })
        } else {
            None
        };
        let lu = a
            .factor()
            .map_err(|_| Error::SingularStep { dt: grid.dt, dx: grid.dx() })?;
        Ok(Self { op, direction, lu, nx, gauge_ratio, solver_tol: cfg.solver_tol })
    }

    pub fn operator(&self) -> &BoxOperator {
        &self.op
    }

    pub fn step(&self, level: &StateLevel) -> Result<StateLevel> {
        let nx = self.nx;
        if level.z.len() != nx {
            return Err(Error::Usage(format!("level has {} nodes, expected {nx}", level.z.len())));
        }
        if !level.is_finite() {
            return Err(Error::Divergence);
        }
        let (known, j) = match self.direction {
            Direction::Forward => (&self.op.lower, level.j + 1),
            Direction::Backward => {
                if level.j == 0 {
                    return Err(Error::Usage("cannot step backward from level 0".into()));
                }
                (&self.op.upper, level.j - 1)
            }
        };
        let known_part = known.apply(&level.z);
        let mut rhs = vec![0.0; 3 * nx];
        for i in 0..nx {
            let row0 = 3 * ((i + 1) % nx);
            for e in 0..3 {
                rhs[row0 + e] = -known_part[3 * i + e];
            }
        }
        if self.gauge_ratio.is_some() {
            rhs[1] = 0.0;
        }
        let x = self.lu.solve(&rhs);
        let mut z: Vec<Node> = x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if let Some(ratio) = self.gauge_ratio {
            let shift = ratio * checkerboard(&level.z) - checkerboard(&z);
            for (i, node) in z.iter_mut().enumerate() {
                node[P] += if i % 2 == 0 { shift } else { -shift };
            }
        }
        let next = StateLevel { j, z };
        if !next.is_finite() {
            return Err(Error::Divergence);
        }

        let (lo, hi) = match self.direction {
            Direction::Forward => (level, &next),
            Direction::Backward => (&next, level),
        };
        let scale = known_part.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let residual = self.op.residual(lo, hi).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale;
        if !(residual <= self.solver_tol) {
            return Err(Error::SolverTolerance { residual, tol: self.solver_tol });
        }
        Ok(next)
    }
}

/// One box step from `level` (convenience wrapper that factors on every call).
pub fn step_box(cfg: &SchemeConfig, grid: &Grid, level: &StateLevel) -> Result<StateLevel> {
    if level.j >= grid.nt {
        return Err(Error::Usage(format!(
            "level {} is already the last level (nt = {})",
            level.j, grid.nt
        )));
    }
    check_level(grid, level)?;
    BoxStepper::forward(cfg, grid)?.step(level)
}
