//! The damped wave family `u_tt - u_xx + u + alpha u_t + beta u_x = 0` as a
//! Birkhoffian system, with exact standing-wave solutions for `beta = 0`.
//!
//! With `z = (u, p, q)` and weight `w = exp(alpha t - beta x)`:
//!
//! ```text
//! F = w/2 (-p, u, 0)     G = w/2 (q, 0, -u)
//! B = -w/2 (u^2 + p^2 - q^2 + alpha u p + beta u q)
//! ```
//!
//! which gives `M = w [[0,1,0],[-1,0,0],[0,0,0]]`, `K = w [[0,0,-1],[0,0,0],[1,0,0]]`
//! and the first-order form `u_t = p`, `u_x = q`, `p_t - q_x + u + alpha p + beta q = 0`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{run_simulation, Grid, Node, SchemeConfig, StateLevel, U};
use crate::structure::{BirkhoffSystem, CovariantSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedWaveProblem {
    pub alpha: f64,
    pub beta: f64,
    /// Spatial wavenumber on `[0, 2 pi)`.
    pub mode_k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

impl Default for DampedWaveProblem {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 0.0, mode_k: 1, amplitude: 1.0, phase: 0.0 }
    }
}

impl DampedWaveProblem {
    pub fn new(alpha: f64, beta: f64, mode_k: u32, amplitude: f64, phase: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Usage(format!("alpha must be finite and non-negative, got {alpha}")));
        }
        if !beta.is_finite() || !amplitude.is_finite() || !phase.is_finite() {
            return Err(Error::Usage("beta, amplitude and phase must be finite".into()));
        }
        if mode_k == 0 {
            return Err(Error::Usage("mode_k must be a positive integer".into()));
        }
        Ok(Self { alpha, beta, mode_k, amplitude, phase })
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig::boxed(self.alpha, self.beta)
    }

    pub fn as_birkhoff_system(&self) -> DampedWaveSystem {
        DampedWaveSystem { alpha: self.alpha, beta: self.beta }
    }

    /// Covariant form with every derivative in closed form.
    pub fn covariant_system(&self) -> DampedWaveCovariant {
        DampedWaveCovariant { alpha: self.alpha, beta: self.beta }
    }

    /// Oscillation frequency `sqrt(1 + k^2 - alpha^2 / 4)` of the standing wave.
    pub fn frequency(&self) -> Result<f64> {
        let k = f64::from(self.mode_k);
        let w2 = 1.0 + k * k - 0.25 * self.alpha * self.alpha;
        if w2 > 0.0 {
            Ok(w2.sqrt())
        } else {
            Err(Error::Unsupported(format!(
                "overdamped mode: alpha^2 = {} >= 4 (1 + k^2) = {}",
                self.alpha * self.alpha,
                4.0 * (1.0 + k * k)
            )))
        }
    }

    fn require_exact(&self) -> Result<f64> {
        if self.beta != 0.0 {
            return Err(Error::Unsupported(format!(
                "exact solutions are only available for beta = 0 (got beta = {})",
                self.beta
            )));
        }
        self.frequency()
    }

    /// `u = A exp(-alpha t / 2) cos(k x) cos(Omega t + phi)` with `p = u_t`, `q = u_x`.
    pub fn exact_solution(&self, x: f64, t: f64) -> Result<Node> {
        self.require_exact()?;
        self.standing_wave(x, t)
    }

    /// The standing-wave formula, regardless of `beta`. Only a solution when
    /// `beta = 0`; for `beta != 0` it is used as initial data.
    fn standing_wave(&self, x: f64, t: f64) -> Result<Node> {
        let omega = self.frequency()?;
        let k = f64::from(self.mode_k);
        let env = self.amplitude * (-0.5 * self.alpha * t).exp();
        let (s, c) = (omega * t + self.phase).sin_cos();
        let (sx, cx) = (k * x).sin_cos();
        Ok([
            env * cx * c,
            env * cx * (-0.5 * self.alpha * c - omega * s),
            -env * k * sx * c,
        ])
    }

    /// Exact `(u_t, p_t, q_t)` and `(u_x, p_x, q_x)` at a point.
    pub fn exact_derivatives(&self, x: f64, t: f64) -> Result<(Node, Node)> {
        let omega = self.require_exact()?;
        let k = f64::from(self.mode_k);
        let h = 0.5 * self.alpha;
        let env = self.amplitude * (-h * t).exp();
        let (s, c) = (omega * t + self.phase).sin_cos();
        let (sx, cx) = (k * x).sin_cos();
        // g(t) = e^{-ht} cos(Wt+phi), g' = e^{-ht}(-h c - W s),
        // g'' = e^{-ht}((h^2 - W^2) c + 2 h W s)
        let g1 = -h * c - omega * s;
        let g2 = (h * h - omega * omega) * c + 2.0 * h * omega * s;
        let dt = [env * cx * g1, env * cx * g2, -env * k * sx * g1];
        let dx = [-env * k * sx * c, -env * k * sx * g1, -env * k * k * cx * c];
        Ok((dt, dx))
    }

    fn check_commensurate(&self, grid: &Grid) -> Result<()> {
        let periods = f64::from(self.mode_k) * (grid.x1 - grid.x0) / TAU;
        if (periods - periods.round()).abs() > 1e-9 || periods.round() < 1.0 {
            return Err(Error::Usage(format!(
                "mode k = {} is not periodic on [{}, {})",
                self.mode_k, grid.x0, grid.x1
            )));
        }
        Ok(())
    }

    /// Standing wave sampled at `t = 0`; the exact initial data when
    /// `beta = 0`, and a smooth start for any `beta`.
    pub fn initial_level(&self, grid: &Grid) -> Result<StateLevel> {
        self.check_commensurate(grid)?;
        let z = (0..grid.nx).map(|i| self.standing_wave(grid.x(i), 0.0)).collect::<Result<_>>()?;
        Ok(StateLevel { j: 0, z })
    }

    /// Exact solution sampled at level `j`.
    pub fn level_at(&self, grid: &Grid, j: usize) -> Result<StateLevel> {
        self.check_commensurate(grid)?;
        let t = grid.t(j);
        let z = (0..grid.nx).map(|i| self.exact_solution(grid.x(i), t)).collect::<Result<_>>()?;
        Ok(StateLevel { j, z })
    }

    /// `sqrt(dx * sum_i (u_i - u_exact(x_i, t_j))^2)`.
    pub fn error_norm(&self, grid: &Grid, numeric: &StateLevel) -> Result<f64> {
        if numeric.z.len() != grid.nx {
            return Err(Error::Usage("level size does not match the grid".into()));
        }
        let t = grid.t(numeric.j);
        let mut acc = 0.0;
        for (i, node) in numeric.z.iter().enumerate() {
            let e = node[U] - self.exact_solution(grid.x(i), t)?[U];
            acc += e * e;
        }
        Ok((grid.dx() * acc).sqrt())
    }

    /// Runs `cfg` on every `(nx, dt)` refinement up to `t_end` and tabulates
    /// the final-time L2 error of `u` with observed orders.
    pub fn convergence_study(
        &self,
        cfg: &SchemeConfig,
        refinements: &[(usize, f64)],
        t_end: f64,
    ) -> Result<Vec<ConvergenceRow>> {
        if refinements.len() < 3 {
            return Err(Error::Usage(format!(
                "convergence study needs at least 3 refinement levels, got {}",
                refinements.len()
            )));
        }
        if !(t_end > 0.0) {
            return Err(Error::Usage(format!("t_end must be positive, got {t_end}")));
        }
        self.require_exact()?;
        let mut measured = Vec::with_capacity(refinements.len());
        for &(nx, dt) in refinements {
            let nt = (t_end / dt).round() as usize;
            let grid = Grid::periodic(nx, dt, nt)?;
            let levels = run_simulation(cfg, &grid, &self.initial_level(&grid)?)?;
            let err = self.error_norm(&grid, levels.last().expect("nt + 1 levels"))?;
            measured.push((nx, grid.dx(), dt, err));
        }
        let pairs: Vec<(f64, f64)> = measured.iter().map(|m| (m.1, m.3)).collect();
        let orders = observed_orders(&pairs);
        Ok(measured
            .into_iter()
            .zip(orders)
            .map(|((nx, dx, dt, l2_error), observed_order)| ConvergenceRow { nx, dx, dt, l2_error, observed_order })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub l2_error: f64,
    /// `None` on the coarsest level and wherever an error is zero.
    pub observed_order: Option<f64>,
}

/// `ln(e_coarse / e_fine) / ln(h_coarse / h_fine)` between consecutive
/// `(h, error)` entries; the first entry has no order.
pub fn observed_orders(levels: &[(f64, f64)]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in levels.windows(2) {
        let ((hc, ec), (hf, ef)) = (w[0], w[1]);
        let order = (ec > 0.0 && ef > 0.0 && hc != hf).then(|| (ec / ef).ln() / (hc / hf).ln());
        out.push(order.filter(|o| o.is_finite()));
    }
    out.truncate(levels.len());
    out
}

/// The damped wave family as a Birkhoffian system, with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedWaveSystem {
    pub alpha: f64,
    pub beta: f64,
}

impl DampedWaveSystem {
    pub fn weight(&self, x: f64, t: f64) -> f64 {
        (self.alpha * t - self.beta * x).exp()
    }
}

impl BirkhoffSystem for DampedWaveSystem {
    fn dim(&self) -> usize {
        3
    }

    fn time_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        let h = 0.5 * self.weight(x, t);
        DVector::from_vec(vec![-h * z[1], h * z[0], 0.0])
    }

    fn space_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        let h = 0.5 * self.weight(x, t);
        DVector::from_vec(vec![h * z[2], 0.0, -h * z[0]])
    }

    fn birkhoffian(&self, z: &DVector<f64>, x: f64, t: f64) -> f64 {
        let (u, p, q) = (z[0], z[1], z[2]);
        -0.5 * self.weight(x, t) * (u * u + p * p - q * q + self.alpha * u * p + self.beta * u * q)
    }

    fn time_form_jacobian(&self, _z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        let h = 0.5 * self.weight(x, t);
        Some(DMatrix::from_row_slice(3, 3, &[0.0, -h, 0.0, h, 0.0, 0.0, 0.0, 0.0, 0.0]))
    }

    fn space_form_jacobian(&self, _z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        let h = 0.5 * self.weight(x, t);
        Some(DMatrix::from_row_slice(3, 3, &[0.0, 0.0, h, 0.0, 0.0, 0.0, -h, 0.0, 0.0]))
    }

    fn time_form_dt(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DVector<f64>> {
        Some(self.time_form(z, x, t) * self.alpha)
    }

    fn space_form_dx(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DVector<f64>> {
        Some(self.space_form(z, x, t) * -self.beta)
    }

    fn birkhoffian_gradient(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DVector<f64>> {
        let (u, p, q) = (z[0], z[1], z[2]);
        let h = -0.5 * self.weight(x, t);
        Some(DVector::from_vec(vec![
            h * (2.0 * u + self.alpha * p + self.beta * q),
            h * (2.0 * p + self.alpha * u),
            h * (-2.0 * q + self.beta * u),
        ]))
    }
}

const M0: [f64; 9] = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
const K0: [f64; 9] = [0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];

/// `M z_t + K z_x + D = 0` for the damped wave family, with
/// `D = w (u + alpha p + beta q, p, -q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedWaveCovariant {
    pub alpha: f64,
    pub beta: f64,
}

impl DampedWaveCovariant {
    fn weight(&self, x: f64, t: f64) -> f64 {
        (self.alpha * t - self.beta * x).exp()
    }
}

impl CovariantSystem for DampedWaveCovariant {
    fn dim(&self) -> usize {
        3
    }

    fn time_structure(&self, _z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &M0) * self.weight(x, t)
    }

    fn space_structure(&self, _z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &K0) * self.weight(x, t)
    }

    fn force(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        let w = self.weight(x, t);
        DVector::from_vec(vec![
            w * (z[0] + self.alpha * z[1] + self.beta * z[2]),
            w * z[1],
            -w * z[2],
        ])
    }

    fn time_structure_dz(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::zeros(3, 3); 3])
    }

    fn space_structure_dz(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::zeros(3, 3); 3])
    }

    fn time_structure_dt(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        Some(self.time_structure(z, x, t) * self.alpha)
    }

    fn space_structure_dx(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        Some(self.space_structure(z, x, t) * -self.beta)
    }

    fn force_jacobian(&self, _z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        let w = self.weight(x, t);
        Some(DMatrix::from_row_slice(
            3,
            3,
            &[w, w * self.alpha, w * self.beta, 0.0, w, 0.0, 0.0, 0.0, -w],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn birkhoffian_at_unit_state() {
        let sys = DampedWaveProblem::default().as_birkhoff_system();
        let z = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert_eq!(sys.birkhoffian(&z, 0.0, 0.0), -1.5);
    }

    #[test]
    fn exact_solution_initial_values() {
        let prob = DampedWaveProblem::default();
        for x in [0.0, 0.7, 2.5] {
            let z = prob.exact_solution(x, 0.0).unwrap();
            assert_relative_eq!(z[0], x.cos(), epsilon = 1e-15);
            assert_relative_eq!(z[1], -x.cos(), epsilon = 1e-15);
            assert_relative_eq!(z[2], -x.sin(), epsilon = 1e-15);
        }
        // alpha = 2, k = 1: Omega = 1, so u(0, t) = e^{-t} cos t.
        assert_eq!(prob.frequency().unwrap(), 1.0);
        let u = prob.exact_solution(0.0, std::f64::consts::FRAC_PI_2).unwrap()[0];
        assert!(u.abs() < 1e-16);
    }

    #[test]
    fn exact_solution_rejects_drift_and_overdamping() {
        let drift = DampedWaveProblem { beta: 0.3, ..Default::default() };
        assert!(matches!(drift.exact_solution(0.0, 0.0), Err(Error::Unsupported(_))));
        let over = DampedWaveProblem { alpha: 3.0, ..Default::default() };
        assert!(matches!(over.exact_solution(0.0, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn drift_still_has_initial_data() {
        let drift = DampedWaveProblem { beta: 0.3, ..Default::default() };
        let grid = Grid::periodic(8, 0.1, 1).unwrap();
        let l = drift.initial_level(&grid).unwrap();
        assert_eq!(l.z[0], [1.0, -1.0, 0.0]);
    }

    #[test]
    fn non_commensurate_domain_is_rejected() {
        let prob = DampedWaveProblem::default();
        let grid = Grid::new(0.0, 5.0, 16, 0.1, 1).unwrap();
        assert!(matches!(prob.initial_level(&grid), Err(Error::Usage(_))));
        let two_periods = Grid::new(0.0, 2.0 * TAU, 16, 0.1, 1).unwrap();
        assert!(prob.initial_level(&two_periods).is_ok());
    }

    #[test]
    fn orders_for_zero_errors_are_undefined() {
        let orders = observed_orders(&[(0.4, 0.0), (0.2, 0.0), (0.1, 0.0)]);
        assert_eq!(orders, vec![None, None, None]);
        let orders = observed_orders(&[(0.4, 16.0), (0.2, 4.0), (0.1, 1.0)]);
        assert_eq!(orders, vec![None, Some(2.0), Some(2.0)]);
    }

    #[test]
    fn study_needs_three_levels() {
        let prob = DampedWaveProblem::default();
        let cfg = prob.scheme_config();
        let r = prob.convergence_study(&cfg, &[(8, 0.1), (16, 0.05)], 1.0);
        assert!(matches!(r, Err(Error::Usage(_))));
    }
}
