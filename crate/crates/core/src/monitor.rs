//! Multisymplectic dissipation monitor.
//!
//! Two tangent solutions `U`, `V` of the linearised scheme define
//! `omega = <M U, V>` and `kappa = <K U, V>`. For the box scheme the
//! staggered values (omega on horizontal cell edges, kappa on vertical ones)
//! satisfy `delta_t omega + delta_x kappa = 0` in every box to rounding.
//! For the damped string, `omega = w dp^du` and `kappa = -w dq^du`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrator::{run_simulation, Grid, Node, SchemeConfig, StateLevel, P, Q, U};
use crate::problems::observed_orders;
use crate::structure::{assemble_structure, one_form_derivatives, BirkhoffSystem};
use crate::sum::compensated_sum;

/// Two tangent trajectories over the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub first: Vec<StateLevel>,
    pub second: Vec<StateLevel>,
}

fn check_trajectory(grid: &Grid, levels: &[StateLevel], what: &str) -> Result<()> {
    if levels.len() != grid.nt + 1 {
        return Err(Error::Usage(format!(
            "{what} has {} levels, expected nt + 1 = {}",
            levels.len(),
            grid.nt + 1
        )));
    }
    for (j, l) in levels.iter().enumerate() {
        if l.z.len() != grid.nx || l.j != j {
            return Err(Error::Usage(format!("{what} level {j} does not match the grid")));
        }
    }
    Ok(())
}

/// Propagates two tangent initial levels with the same scheme as the base
/// run. The schemes are linear, so the tangent of a run is a run.
pub fn propagate_tangents(
    cfg: &SchemeConfig,
    grid: &Grid,
    base: &[StateLevel],
    du0: &StateLevel,
    dv0: &StateLevel,
) -> Result<TangentPair> {
    check_trajectory(grid, base, "base trajectory")?;
    for (name, l) in [("first tangent", du0), ("second tangent", dv0)] {
        if l.z.len() != grid.nx {
            return Err(Error::Usage(format!(
                "{name} has {} nodes, base trajectory has {}",
                l.z.len(),
                grid.nx
            )));
        }
        if l.j != 0 {
            return Err(Error::Usage(format!("{name} must start at level 0")));
        }
    }
    Ok(TangentPair {
        first: run_simulation(cfg, grid, du0)?,
        second: run_simulation(cfg, grid, dv0)?,
    })
}

fn dvec(n: &Node) -> DVector<f64> {
    DVector::from_column_slice(n)
}

fn avg(a: &Node, b: &Node) -> Node {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

/// `<A u, v>` for skew `A`, summed over the upper triangle so that swapping
/// `u` and `v` flips the sign bit for bit.
fn skew_pairing(a: &DMatrix<f64>, u: &Node, v: &Node) -> f64 {
    let mut s = 0.0;
    for mu in 0..3 {
        for nu in (mu + 1)..3 {
            s += a[(mu, nu)] * (v[mu] * u[nu] - v[nu] * u[mu]);
        }
    }
    s
}

/// `(<M U, V>, <K U, V>)` at one point.
fn pair_forms<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    z: &Node,
    u: &Node,
    v: &Node,
    x: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let s = assemble_structure(sys, &dvec(z), x, t)?;
    Ok((skew_pairing(&s.m, u, v), skew_pairing(&s.k, u, v)))
}

/// Nodal values of the two forms, indexed `[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormSeries {
    pub omega: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
}

pub fn evaluate_forms<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    grid: &Grid,
    base: &[StateLevel],
    tangents: &TangentPair,
) -> Result<FormSeries> {
    check_dims(sys)?;
    check_trajectory(grid, base, "base trajectory")?;
    check_trajectory(grid, &tangents.first, "first tangent")?;
    check_trajectory(grid, &tangents.second, "second tangent")?;
    let mut omega = Vec::with_capacity(grid.nt + 1);
    let mut kappa = Vec::with_capacity(grid.nt + 1);
    for j in 0..=grid.nt {
        let mut ow = Vec::with_capacity(grid.nx);
        let mut kw = Vec::with_capacity(grid.nx);
        for i in 0..grid.nx {
            let (o, k) = pair_forms(
                sys,
                &base[j].z[i],
                &tangents.first[j].z[i],
                &tangents.second[j].z[i],
                grid.x(i),
                grid.t(j),
            )?;
            ow.push(o);
            kw.push(k);
        }
        omega.push(ow);
        kappa.push(kw);
    }
    Ok(FormSeries { omega, kappa })
}

fn check_dims<S: BirkhoffSystem + ?Sized>(sys: &S) -> Result<()> {
    if sys.dim() != 3 {
        return Err(Error::Unsupported(format!(
            "lattice monitor works on (u, p, q) states, system dimension is {}",
            sys.dim()
        )));
    }
    Ok(())
}

/// Forms on the staggered points of the box lattice.
///
/// `omega[j][i]` sits at `(x[i] + dx/2, t[j])` and `kappa[j][i]` at
/// `(x[i], t[j] + dt/2)` for `i = 0..=nx` (column `nx` is the periodic image
/// of column 0, evaluated at the unwrapped abscissa). `omega_frozen` uses the
/// structure matrix at `(x0, t = 0)`, i.e. without the conformal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredForms {
    pub omega: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
    pub omega_frozen: Vec<Vec<f64>>,
}

pub fn staggered_forms<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    grid: &Grid,
    base: &[StateLevel],
    tangents: &TangentPair,
) -> Result<StaggeredForms> {
    check_dims(sys)?;
    check_trajectory(grid, base, "base trajectory")?;
    check_trajectory(grid, &tangents.first, "first tangent")?;
    check_trajectory(grid, &tangents.second, "second tangent")?;
    let (nx, nt, dx, dt) = (grid.nx, grid.nt, grid.dx(), grid.dt);
    let (fu, fv) = (&tangents.first, &tangents.second);

    let mut omega = Vec::with_capacity(nt + 1);
    let mut omega_frozen = Vec::with_capacity(nt + 1);
    for j in 0..=nt {
        let mut row = Vec::with_capacity(nx);
        let mut frozen = Vec::with_capacity(nx);
        for i in 0..nx {
            let k = (i + 1) % nx;
            let z = avg(&base[j].z[i], &base[j].z[k]);
            let u = avg(&fu[j].z[i], &fu[j].z[k]);
            let v = avg(&fv[j].z[i], &fv[j].z[k]);
            row.push(pair_forms(sys, &z, &u, &v, grid.x0 + (i as f64 + 0.5) * dx, grid.t(j))?.0);
            frozen.push(pair_forms(sys, &z, &u, &v, grid.x0, 0.0)?.0);
        }
        omega.push(row);
        omega_frozen.push(frozen);
    }

    let mut kappa = Vec::with_capacity(nt);
    for j in 0..nt {
        let t = grid.t(j) + 0.5 * dt;
        let mut row = Vec::with_capacity(nx + 1);
        for i in 0..=nx {
            let n = i % nx;
            let z = avg(&base[j].z[n], &base[j + 1].z[n]);
            let u = avg(&fu[j].z[n], &fu[j + 1].z[n]);
            let v = avg(&fv[j].z[n], &fv[j + 1].z[n]);
            row.push(pair_forms(sys, &z, &u, &v, grid.x(i), t)?.1);
        }
        kappa.push(row);
    }
    Ok(StaggeredForms { omega, kappa, omega_frozen })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    /// Largest `|delta_t omega + delta_x kappa|` over all boxes.
    pub max_residual: f64,
    /// Entry `j` is the largest residual over boxes ending at level `j`
    /// (zero for `j = 0`).
    pub per_level: Vec<f64>,
    /// Box residuals indexed `[j][i]` for the box between levels `j`, `j + 1`.
    pub box_residuals: Vec<Vec<f64>>,
    /// `sum_i omega[j][i]`; conserved when there is no spatial weight.
    pub global_form: Vec<f64>,
    /// `sum_i omega_frozen[j][i]`; decays like `exp(-alpha t)` for the damped string.
    pub global_unweighted_form: Vec<f64>,
}

pub fn discrete_dissipation_residual(grid: &Grid, forms: &StaggeredForms) -> Result<DissipationReport> {
    let (nx, nt) = (grid.nx, grid.nt);
    let shape_ok = forms.omega.len() == nt + 1
        && forms.omega_frozen.len() == nt + 1
        && forms.kappa.len() == nt
        && forms.omega.iter().chain(&forms.omega_frozen).all(|r| r.len() == nx)
        && forms.kappa.iter().all(|r| r.len() == nx + 1);
    if !shape_ok {
        return Err(Error::Usage("staggered forms do not match the grid".into()));
    }
    let (dt, dx) = (grid.dt, grid.dx());
    let mut per_level = vec![0.0; nt + 1];
    let mut box_residuals = Vec::with_capacity(nt);
    for j in 0..nt {
        let row: Vec<f64> = (0..nx)
            .map(|i| {
                (forms.omega[j + 1][i] - forms.omega[j][i]) / dt
                    + (forms.kappa[j][i + 1] - forms.kappa[j][i]) / dx
            })
            .collect();
        per_level[j + 1] = row.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        box_residuals.push(row);
    }
    let max_residual = per_level.iter().copied().fold(0.0, f64::max);
    if !max_residual.is_finite() {
        return Err(Error::Divergence);
    }
    Ok(DissipationReport {
        max_residual,
        per_level,
        box_residuals,
        global_form: forms.omega.iter().map(|r| compensated_sum(r.iter().copied())).collect(),
        global_unweighted_form: forms
            .omega_frozen
            .iter()
            .map(|r| compensated_sum(r.iter().copied()))
            .collect(),
    })
}

/// Convenience: tangents, staggered forms and the box residuals in one call.
pub fn monitor_run<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    cfg: &SchemeConfig,
    grid: &Grid,
    base: &[StateLevel],
    du0: &StateLevel,
    dv0: &StateLevel,
) -> Result<DissipationReport> {
    let tangents = propagate_tangents(cfg, grid, base, du0, dv0)?;
    let forms = staggered_forms(sys, grid, base, &tangents)?;
    discrete_dissipation_residual(grid, &forms)
}

/// Result of checking the continuous dissipation law on refined lattices.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousCheck {
    /// Max-norm residual on each lattice.
    pub residuals: Vec<f64>,
    /// Observed orders between consecutive lattices.
    pub orders: Vec<Option<f64>>,
    /// Order between the two finest lattices.
    pub order: Option<f64>,
}

/// Box-centred residual of
/// `d/dt (dp^du) - d/dx (dq^du) + alpha dp^du + beta dq^du = 0`
/// for tangent fields on a `(u, p, q)` lattice.
pub fn continuous_dissipation_residual(alpha: f64, beta: f64, grid: &Grid, tangents: &TangentPair) -> Result<f64> {
    check_trajectory(grid, &tangents.first, "first tangent")?;
    check_trajectory(grid, &tangents.second, "second tangent")?;
    let wedge = |u: &Node, v: &Node, c: usize| u[c] * v[U] - u[U] * v[c];
    let (fu, fv) = (&tangents.first, &tangents.second);
    let (nx, dt, dx) = (grid.nx, grid.dt, grid.dx());
    let mut worst = 0.0_f64;
    for j in 0..grid.nt {
        for i in 0..nx {
            let k = (i + 1) % nx;
            // omega' on the bottom/top edges, kappa' on the left/right edges
            let om = |l: usize| wedge(&avg(&fu[l].z[i], &fu[l].z[k]), &avg(&fv[l].z[i], &fv[l].z[k]), P);
            let ka = |n: usize| {
                wedge(&avg(&fu[j].z[n], &fu[j + 1].z[n]), &avg(&fv[j].z[n], &fv[j + 1].z[n]), Q)
            };
            let (o0, o1, k0, k1) = (om(j), om(j + 1), ka(i), ka(k));
            let r = (o1 - o0) / dt - (k1 - k0) / dx + alpha * 0.5 * (o0 + o1) + beta * 0.5 * (k0 + k1);
            worst = worst.max(r.abs());
        }
    }
    if !worst.is_finite() {
        return Err(Error::Divergence);
    }
    Ok(worst)
}

/// Evaluates [`continuous_dissipation_residual`] on a refinement sequence
/// (coarse to fine) and reports the observed order.
pub fn continuous_dissipation_check(
    alpha: f64,
    beta: f64,
    levels: &[(Grid, TangentPair)],
) -> Result<ContinuousCheck> {
    if levels.len() < 3 {
        return Err(Error::Usage(format!(
            "continuous check needs at least 3 refinement levels, got {}",
            levels.len()
        )));
    }
    let residuals = levels
        .iter()
        .map(|(g, t)| continuous_dissipation_residual(alpha, beta, g, t))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = levels.iter().zip(&residuals).map(|((g, _), &r)| (g.dx(), r)).collect();
    let orders = observed_orders(&pairs);
    let order = *orders.last().expect("at least 3 levels");
    Ok(ContinuousCheck { residuals, orders, order })
}

/// A smooth random periodic level: a few Fourier modes in `u` and `p` with
/// `q = u_x`, coefficients decaying like `1/m`.
pub fn smooth_random_level(grid: &Grid, modes: usize, rng: &mut impl Rng) -> StateLevel {
    let base = std::f64::consts::TAU / (grid.x1 - grid.x0);
    let coeffs: Vec<[f64; 4]> = (1..=modes)
        .map(|m| {
            let s = 1.0 / m as f64;
            [0; 4].map(|_| s * rng.gen_range(-1.0..1.0))
        })
        .collect();
    let z = (0..grid.nx)
        .map(|i| {
            let x = grid.x(i) - grid.x0;
            let mut n = [0.0; 3];
            for (m, c) in coeffs.iter().enumerate() {
                let kx = base * (m + 1) as f64;
                let (s, co) = (kx * x).sin_cos();
                n[U] += c[0] * co + c[1] * s;
                n[P] += c[2] * co + c[3] * s;
                n[Q] += kx * (c[1] * co - c[0] * s);
            }
            n
        })
        .collect();
    StateLevel { j: 0, z }
}

/// Seeded pair of tangent initial levels.
pub fn seeded_tangent_levels(grid: &Grid, seed: u64) -> (StateLevel, StateLevel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let du = smooth_random_level(grid, 3, &mut rng);
    let dv = smooth_random_level(grid, 3, &mut rng);
    (du, dv)
}

/// Midpoint discretisation of the Pfaffian action
/// `sum dt dx [F(zb) . d_t z + G(zb) . d_x z - B(zb)]` over all boxes, with
/// `zb` the four-corner average at the box centre.
pub fn discrete_pfaffian_action<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    grid: &Grid,
    field: &[StateLevel],
) -> Result<f64> {
    check_dims(sys)?;
    check_trajectory(grid, field, "field")?;
    let mut terms = Vec::with_capacity(grid.nx * grid.nt);
    for j in 0..grid.nt {
        for i in 0..grid.nx {
            let b = BoxGeometry::new(grid, field, i, j);
            let zb = dvec(&b.centre);
            let f = sys.time_form(&zb, b.x, b.t);
            let g = sys.space_form(&zb, b.x, b.t);
            let h = sys.birkhoffian(&zb, b.x, b.t);
            terms.push(grid.dt * grid.dx() * (f.dot(&dvec(&b.d_t)) + g.dot(&dvec(&b.d_x)) - h));
        }
    }
    let s = compensated_sum(terms);
    if !s.is_finite() {
        return Err(Error::Domain("action is not finite".into()));
    }
    Ok(s)
}

struct BoxGeometry {
    centre: Node,
    d_t: Node,
    d_x: Node,
    x: f64,
    t: f64,
}

impl BoxGeometry {
    fn new(grid: &Grid, field: &[StateLevel], i: usize, j: usize) -> Self {
        let k = (i + 1) % grid.nx;
        let (z00, z10) = (&field[j].z[i], &field[j].z[k]);
        let (z01, z11) = (&field[j + 1].z[i], &field[j + 1].z[k]);
        let (dt, dx) = (grid.dt, grid.dx());
        let mut centre = [0.0; 3];
        let mut d_t = [0.0; 3];
        let mut d_x = [0.0; 3];
        for c in 0..3 {
            centre[c] = 0.25 * (z00[c] + z10[c] + z01[c] + z11[c]);
            d_t[c] = (z01[c] + z11[c] - z00[c] - z10[c]) / (2.0 * dt);
            d_x[c] = (z10[c] + z11[c] - z00[c] - z01[c]) / (2.0 * dx);
        }
        Self {
            centre,
            d_t,
            d_x,
            x: grid.x0 + (i as f64 + 0.5) * dx,
            t: grid.t(j) + 0.5 * dt,
        }
    }
}

/// Gradient of [`discrete_pfaffian_action`] with respect to the node
/// `(i, j)`, which must be interior in time. Summed over the four boxes
/// sharing the node; vanishes on box-scheme solutions of systems with
/// constant structure matrices.
pub fn action_gradient<S: BirkhoffSystem + ?Sized>(
    sys: &S,
    grid: &Grid,
    field: &[StateLevel],
    i: usize,
    j: usize,
) -> Result<Node> {
    check_dims(sys)?;
    check_trajectory(grid, field, "field")?;
    if j == 0 || j >= grid.nt || i >= grid.nx {
        return Err(Error::Usage(format!(
            "node ({i}, {j}) is not interior (nx = {}, nt = {})",
            grid.nx, grid.nt
        )));
    }
    let (nx, dt, dx) = (grid.nx, grid.dt, grid.dx());
    let left = (i + nx - 1) % nx;
    let mut grad = DVector::zeros(3);
    // (box i, box j, +1 if the node is on the top edge, +1 if on the right edge)
    for (bi, bj, st, sx) in [(left, j - 1, 1.0, 1.0), (i, j - 1, 1.0, -1.0), (left, j, -1.0, 1.0), (i, j, -1.0, -1.0)] {
        let b = BoxGeometry::new(grid, field, bi, bj);
        let zb = dvec(&b.centre);
        let d = one_form_derivatives(sys, &zb, b.x, b.t)?;
        let f = sys.time_form(&zb, b.x, b.t);
        let g = sys.space_form(&zb, b.x, b.t);
        let term = d.time_jacobian.transpose() * dvec(&b.d_t) * 0.25
            + f * (st / (2.0 * dt))
            + d.space_jacobian.transpose() * dvec(&b.d_x) * 0.25
            + g * (sx / (2.0 * dx))
            - d.birkhoffian_gradient * 0.25;
        grad += term * (dt * dx);
    }
    Ok([grad[0], grad[1], grad[2]])
}
