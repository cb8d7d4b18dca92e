//! Birkhoffian systems, their structure matrices and the self-adjointness
//! (Helmholtz-type) conditions of the covariant first-order form.
//!
//! Index conventions: Jacobians are stored as `J[(nu, mu)] = d F_nu / d z^mu`.
//! The structure matrices are
//!
//! ```text
//! M[(mu, nu)] = dF_nu/dz^mu - dF_mu/dz^nu      K[(mu, nu)] = dG_nu/dz^mu - dG_mu/dz^nu
//! ```
//!
//! and the covariant force is `D = -(grad_z B + F_t + G_x)`, so every system
//! reads `M z_t + K z_x + D = 0`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;

/// A PDE system given by one-form components `F`, `G` and a Birkhoffian `B`.
///
/// Analytic derivatives are optional; every `None` falls back to central
/// finite differences (see [`crate::fd`]).
pub trait BirkhoffSystem: Send + Sync {
    fn dim(&self) -> usize;

    /// Time one-form component `F(z, x, t)`.
    fn time_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64>;

    /// Space one-form component `G(z, x, t)`.
    fn space_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64>;

    fn birkhoffian(&self, z: &DVector<f64>, x: f64, t: f64) -> f64;

    fn time_form_jacobian(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DMatrix<f64>> {
        None
    }

    fn space_form_jacobian(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DMatrix<f64>> {
        None
    }

    /// Explicit partial `dF/dt` at fixed `z`.
    fn time_form_dt(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DVector<f64>> {
        None
    }

    /// Explicit partial `dG/dx` at fixed `z`.
    fn space_form_dx(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DVector<f64>> {
        None
    }

    fn birkhoffian_gradient(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DVector<f64>> {
        None
    }
}

/// All first derivatives of a Birkhoffian system at one point.
#[derive(Debug, Clone)]
pub struct OneFormDerivatives {
    pub time_jacobian: DMatrix<f64>,
    pub space_jacobian: DMatrix<f64>,
    pub time_form_dt: DVector<f64>,
    pub space_form_dx: DVector<f64>,
    pub birkhoffian_gradient: DVector<f64>,
}

fn time_jacobian<S: BirkhoffSystem + ?Sized>(sys: &S, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
    sys.time_form_jacobian(z, x, t)
        .unwrap_or_else(|| fd::jacobian(|w| sys.time_form(w, x, t), z))
}

fn space_jacobian<S: BirkhoffSystem + ?Sized>(sys: &S, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
    sys.space_form_jacobian(z, x, t)
        .unwrap_or_else(|| fd::jacobian(|w| sys.space_form(w, x, t), z))
}

fn force_terms<S: BirkhoffSystem + ?Sized>(sys: &S, z: &DVector<f64>, x: f64, t: f64) -> [DVector<f64>; 3] {
    let grad_b = sys
        .birkhoffian_gradient(z, x, t)
        .unwrap_or_else(|| fd::gradient(|w| sys.birkhoffian(w, x, t), z));
    let f_t = sys
        .time_form_dt(z, x, t)
        .unwrap_or_else(|| fd::vector_derivative(|s| sys.time_form(z, x, s), t));
    let g_x = sys
        .space_form_dx(z, x, t)
        .unwrap_or_else(|| fd::vector_derivative(|s| sys.space_form(z, s, t), x));
    [grad_b, f_t, g_x]
}

fn ensure_finite<'a, I>(values: I, what: &str) -> Result<()>
where
    I: IntoIterator<Item = &'a f64>,
{
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite {what}")))
    }
}

fn check_point(n: usize, z: &DVector<f64>) -> Result<()> {
    if z.len() != n {
        return Err(Error::Usage(format!("state has length {}, system dimension is {n}", z.len())));
    }
    Ok(())
}

/// Derivatives of `F`, `G`, `B` at a point, analytic where the system
/// provides them.
pub fn one_form_derivatives<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    x: f64,
    t: f64,
) -> Result<OneFormDerivatives> {
    check_point(sys.dim(), z)?;
    let time_jacobian = time_jacobian(sys, z, x, t);
    let space_jacobian = space_jacobian(sys, z, x, t);
    let [birkhoffian_gradient, time_form_dt, space_form_dx] = force_terms(sys, z, x, t);
    ensure_finite(time_jacobian.iter(), "time one-form Jacobian")?;
    ensure_finite(space_jacobian.iter(), "space one-form Jacobian")?;
    ensure_finite(
        birkhoffian_gradient.iter().chain(time_form_dt.iter()).chain(space_form_dx.iter()),
        "force term",
    )?;
    Ok(OneFormDerivatives {
        time_jacobian,
        space_jacobian,
        time_form_dt,
        space_form_dx,
        birkhoffian_gradient,
    })
}

/// Skew structure matrices `M`, `K` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    pub m: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

/// `A[(mu, nu)] = J[(nu, mu)] - J[(mu, nu)]`, built from the upper triangle
/// so the result is skew bit for bit.
fn curl(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let mut a = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in (mu + 1)..n {
            let v = j[(nu, mu)] - j[(mu, nu)];
            a[(mu, nu)] = v;
            a[(nu, mu)] = -v;
        }
    }
    a
}

pub fn assemble_structure<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    x: f64,
    t: f64,
) -> Result<StructureMatrices> {
    check_point(sys.dim(), z)?;
    let jf = time_jacobian(sys, z, x, t);
    let jg = space_jacobian(sys, z, x, t);
    ensure_finite(jf.iter().chain(jg.iter()), "one-form Jacobian")?;
    Ok(StructureMatrices { m: curl(&jf), k: curl(&jg) })
}

/// `D = -(grad_z B + dF/dt + dG/dx)`.
pub fn covariant_force<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    x: f64,
    t: f64,
) -> Result<DVector<f64>> {
    check_point(sys.dim(), z)?;
    let [grad_b, f_t, g_x] = force_terms(sys, z, x, t);
    let d = -(grad_b + f_t + g_x);
    ensure_finite(d.iter(), "covariant force")?;
    Ok(d)
}

/// `M z_t + K z_x - grad_z B - F_t - G_x`; vanishes on solutions.
pub fn birkhoff_residual<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    z_t: &DVector<f64>,
    z_x: &DVector<f64>,
    x: f64,
    t: f64,
) -> Result<DVector<f64>> {
    let n = sys.dim();
    check_point(n, z_t)?;
    check_point(n, z_x)?;
    let s = assemble_structure(sys, z, x, t)?;
    let d = covariant_force(sys, z, x, t)?;
    Ok(&s.m * z_t + &s.k * z_x + d)
}

/// Smoothness probe: observed convergence order of the finite-difference
/// time-form Jacobian under step halving (steps 1e-2, 5e-3, 2.5e-3).
///
/// Returns `None` when the differences sit at rounding level, which happens
/// for forms of degree at most two in `z` (the central difference is exact).
pub fn jacobian_refinement_order<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    x: f64,
    t: f64,
) -> Option<f64> {
    let n = z.len();
    let with_step = |h: f64| {
        let mut zp = z.clone();
        DMatrix::from_fn(n, n, |r, c| {
            zp[c] = z[c] + h;
            let fp = sys.time_form(&zp, x, t)[r];
            zp[c] = z[c] - h;
            let fm = sys.time_form(&zp, x, t)[r];
            zp[c] = z[c];
            (fp - fm) / (2.0 * h)
        })
    };
    let j1 = with_step(1e-2);
    let j2 = with_step(5e-3);
    let j3 = with_step(2.5e-3);
    let d12 = (&j1 - &j2).amax();
    let d23 = (&j2 - &j3).amax();
    let scale = j3.amax().max(1.0);
    if d23 <= 1e-11 * scale || d12 <= 1e-11 * scale {
        return None;
    }
    Some((d12 / d23).log2())
}

/// Largest relative disagreement between the analytic derivatives a system
/// supplies and central finite differences, over the samples.
pub fn verify_jacobians<S: BirkhoffSystem + ?Sized>(sys: &S, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Usage("no sample points".into()));
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst = 0.0_f64;
    for s in samples {
        check_point(sys.dim(), &s.z)?;
        let (z, x, t) = (&s.z, s.x, s.t);
        let pairs: [(Option<DMatrix<f64>>, DMatrix<f64>); 2] = [
            (sys.time_form_jacobian(z, x, t), fd::jacobian(|w| sys.time_form(w, x, t), z)),
            (sys.space_form_jacobian(z, x, t), fd::jacobian(|w| sys.space_form(w, x, t), z)),
        ];
        for (analytic, numeric) in pairs {
            if let Some(a) = analytic {
                for (av, nv) in a.iter().zip(numeric.iter()) {
                    worst = worst.max(rel(*av, *nv));
                }
            }
        }
        let vecs: [(Option<DVector<f64>>, DVector<f64>); 3] = [
            (sys.time_form_dt(z, x, t), fd::vector_derivative(|v| sys.time_form(z, x, v), t)),
            (sys.space_form_dx(z, x, t), fd::vector_derivative(|v| sys.space_form(z, v, t), x)),
            (sys.birkhoffian_gradient(z, x, t), fd::gradient(|w| sys.birkhoffian(w, x, t), z)),
        ];
        for (analytic, numeric) in vecs {
            if let Some(a) = analytic {
                for (av, nv) in a.iter().zip(numeric.iter()) {
                    worst = worst.max(rel(*av, *nv));
                }
            }
        }
    }
    ensure_finite([worst].iter(), "Jacobian comparison")?;
    Ok(worst)
}

/// A raw first-order system `M z_t + K z_x + D = 0`, not necessarily
/// self-adjoint.
pub trait CovariantSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn time_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64>;
    fn space_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64>;
    fn force(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64>;

    /// `dM/dz^tau` for each `tau`.
    fn time_structure_dz(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<Vec<DMatrix<f64>>> {
        None
    }
    fn space_structure_dz(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<Vec<DMatrix<f64>>> {
        None
    }
    fn time_structure_dt(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DMatrix<f64>> {
        None
    }
    fn space_structure_dx(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DMatrix<f64>> {
        None
    }
    /// `J[(mu, nu)] = dD_mu / dz^nu`.
    fn force_jacobian(&self, _z: &DVector<f64>, _x: f64, _t: f64) -> Option<DMatrix<f64>> {
        None
    }
}

/// Covariant form of a Birkhoffian system. Structure and force come from
/// [`assemble_structure`] and [`covariant_force`]; their derivatives are
/// finite differences.
pub struct BirkhoffCovariant<'a, S: BirkhoffSystem + ?Sized>(pub &'a S);

impl<S: BirkhoffSystem + ?Sized> CovariantSystem for BirkhoffCovariant<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn time_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        curl(&time_jacobian(self.0, z, x, t))
    }

    fn space_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        curl(&space_jacobian(self.0, z, x, t))
    }

    fn force(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        let [grad_b, f_t, g_x] = force_terms(self.0, z, x, t);
        -(grad_b + f_t + g_x)
    }
}

/// Deliberate violations of the self-adjointness conditions, used to
/// exercise the checker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Adds `value` to the single entry `M[(row, col)]`.
    TimeStructureEntry { row: usize, col: usize, value: f64 },
    /// Adds `strength * z^2` to `M[(0, 1)]` and subtracts it from `M[(1, 0)]`:
    /// still skew, but no longer closed.
    ClosureTwist { strength: f64 },
    /// Multiplies the covariant force by `factor`.
    ForceScale { factor: f64 },
}

pub struct Perturbed<C> {
    pub inner: C,
    pub perturbation: Perturbation,
}

impl<C: CovariantSystem> CovariantSystem for Perturbed<C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn time_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        let mut m = self.inner.time_structure(z, x, t);
        match self.perturbation {
            Perturbation::TimeStructureEntry { row, col, value } => m[(row, col)] += value,
            Perturbation::ClosureTwist { strength } => {
                m[(0, 1)] += strength * z[2];
                m[(1, 0)] -= strength * z[2];
            }
            Perturbation::ForceScale { .. } => {}
        }
        m
    }

    fn space_structure(&self, z: &DVector<f64>, x: f64, t: f64) -> DMatrix<f64> {
        self.inner.space_structure(z, x, t)
    }

    fn force(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        let d = self.inner.force(z, x, t);
        match self.perturbation {
            Perturbation::ForceScale { factor } => d * factor,
            _ => d,
        }
    }

    fn time_structure_dz(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<Vec<DMatrix<f64>>> {
        let mut dm = self.inner.time_structure_dz(z, x, t)?;
        if let Perturbation::ClosureTwist { strength } = self.perturbation {
            dm[2][(0, 1)] += strength;
            dm[2][(1, 0)] -= strength;
        }
        Some(dm)
    }

    fn space_structure_dz(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<Vec<DMatrix<f64>>> {
        self.inner.space_structure_dz(z, x, t)
    }

    fn time_structure_dt(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        self.inner.time_structure_dt(z, x, t)
    }

    fn space_structure_dx(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        self.inner.space_structure_dx(z, x, t)
    }

    fn force_jacobian(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        let j = self.inner.force_jacobian(z, x, t)?;
        Some(match self.perturbation {
            Perturbation::ForceScale { factor } => j * factor,
            _ => j,
        })
    }
}

/// A sample point `(z, x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub z: DVector<f64>,
    pub x: f64,
    pub t: f64,
}

impl Sample {
    pub fn new(z: Vec<f64>, x: f64, t: f64) -> Self {
        Self { z: DVector::from_vec(z), x, t }
    }
}

/// Default pass tolerance when every derivative is analytic.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Default pass tolerance when finite differences are involved.
pub const FINITE_DIFFERENCE_TOLERANCE: f64 = 1e-5;

/// One of the self-adjointness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    SkewTime,
    SkewSpace,
    ClosureTime,
    ClosureSpace,
    Compatibility,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::SkewTime => "skewness of M",
            Condition::SkewSpace => "skewness of K",
            Condition::ClosureTime => "closure of M",
            Condition::ClosureSpace => "closure of K",
            Condition::Compatibility => "time/space compatibility",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfAdjointnessReport {
    pub skew_m_max: f64,
    pub skew_k_max: f64,
    pub closure_m_max: f64,
    pub closure_k_max: f64,
    pub compat_max: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SelfAdjointnessReport {
    pub fn value(&self, condition: Condition) -> f64 {
        match condition {
            Condition::SkewTime => self.skew_m_max,
            Condition::SkewSpace => self.skew_k_max,
            Condition::ClosureTime => self.closure_m_max,
            Condition::ClosureSpace => self.closure_k_max,
            Condition::Compatibility => self.compat_max,
        }
    }

    /// Conditions whose maximum violation exceeds the tolerance.
    pub fn failures(&self) -> Vec<Condition> {
        [
            Condition::SkewTime,
            Condition::SkewSpace,
            Condition::ClosureTime,
            Condition::ClosureSpace,
            Condition::Compatibility,
        ]
        .into_iter()
        .filter(|c| !(self.value(*c) <= self.tolerance))
        .collect()
    }
}

fn skew_violation(a: &DMatrix<f64>) -> f64 {
    (a + a.transpose()).amax()
}

/// Max over index triples of `|dA_{mu nu}/dz^tau + dA_{nu tau}/dz^mu + dA_{tau mu}/dz^nu|`.
fn closure_violation(da: &[DMatrix<f64>]) -> f64 {
    let n = da.len();
    let mut worst = 0.0_f64;
    for mu in 0..n {
        for nu in 0..n {
            for tau in 0..n {
                let s = da[tau][(mu, nu)] + da[mu][(nu, tau)] + da[nu][(tau, mu)];
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// Evaluates the self-adjointness conditions at every sample:
///
/// * skewness `M + M^T = 0`, `K + K^T = 0`;
/// * closure: cyclic sums of `dM/dz` and `dK/dz` vanish;
/// * compatibility: `dM_{mu nu}/dt + dK_{mu nu}/dx = dD_mu/dz^nu - dD_nu/dz^mu`.
pub fn check_self_adjointness<C: CovariantSystem + ?Sized>(
    sys: &C,
    samples: &[Sample],
    tol: f64,
) -> Result<SelfAdjointnessReport> {
    if samples.is_empty() {
        return Err(Error::Usage("self-adjointness check needs at least one sample".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let n = sys.dim();
    let mut report = SelfAdjointnessReport {
        skew_m_max: 0.0,
        skew_k_max: 0.0,
        closure_m_max: 0.0,
        closure_k_max: 0.0,
        compat_max: 0.0,
        tolerance: tol,
        passed: false,
    };
    for s in samples {
        check_point(n, &s.z)?;
        let (z, x, t) = (&s.z, s.x, s.t);
        let m = sys.time_structure(z, x, t);
        let k = sys.space_structure(z, x, t);
        let dm_dz = sys
            .time_structure_dz(z, x, t)
            .unwrap_or_else(|| fd::matrix_z_derivatives(|w| sys.time_structure(w, x, t), z));
        let dk_dz = sys
            .space_structure_dz(z, x, t)
            .unwrap_or_else(|| fd::matrix_z_derivatives(|w| sys.space_structure(w, x, t), z));
        let dm_dt = sys
            .time_structure_dt(z, x, t)
            .unwrap_or_else(|| fd::matrix_derivative(|v| sys.time_structure(z, x, v), t));
        let dk_dx = sys
            .space_structure_dx(z, x, t)
            .unwrap_or_else(|| fd::matrix_derivative(|v| sys.space_structure(z, v, t), x));
        let jd = sys
            .force_jacobian(z, x, t)
            .unwrap_or_else(|| fd::jacobian(|w| sys.force(w, x, t), z));

        let all = m
            .iter()
            .chain(k.iter())
            .chain(dm_dz.iter().flat_map(|a| a.iter()))
            .chain(dk_dz.iter().flat_map(|a| a.iter()))
            .chain(dm_dt.iter())
            .chain(dk_dx.iter())
            .chain(jd.iter());
        ensure_finite(all, "structure or force derivative")?;

        report.skew_m_max = report.skew_m_max.max(skew_violation(&m));
        report.skew_k_max = report.skew_k_max.max(skew_violation(&k));
        report.closure_m_max = report.closure_m_max.max(closure_violation(&dm_dz));
        report.closure_k_max = report.closure_k_max.max(closure_violation(&dk_dz));
        let compat = dm_dt + dk_dx - (&jd - jd.transpose());
        report.compat_max = report.compat_max.max(compat.amax());
    }
    report.passed = report.failures().is_empty();
    Ok(report)
}
