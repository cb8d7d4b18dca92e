// Shared oracles for the integration tests. Each is coded from the equations
// directly, without going through the library's assembly routines.
#![allow(dead_code)]

use birkhoff_core::integrator::{Grid, Node, StateLevel, P};
use birkhoff_core::structure::BirkhoffSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `c * prod z_m^e_m`
#[derive(Debug, Clone)]
struct Monomial {
    coef: f64,
    exps: Vec<u32>,
}

impl Monomial {
    fn eval(&self, z: &DVector<f64>) -> f64 {
        self.exps.iter().enumerate().fold(self.coef, |acc, (m, &e)| acc * z[m].powi(e as i32))
    }

    fn partial(&self, z: &DVector<f64>, c: usize) -> f64 {
        if self.exps[c] == 0 {
            return 0.0;
        }
        let mut d = self.clone();
        d.coef *= f64::from(self.exps[c]);
        d.exps[c] -= 1;
        d.eval(z)
    }
}

#[derive(Debug, Clone)]
struct Poly(Vec<Monomial>);

impl Poly {
    fn random(rng: &mut impl Rng, n: usize, terms: usize) -> Self {
        Poly(
            (0..terms)
                .map(|_| {
                    let mut exps = vec![0u32; n];
                    for _ in 0..rng.gen_range(0..=3) {
                        exps[rng.gen_range(0..n)] += 1;
                    }
                    Monomial { coef: rng.gen_range(-1.0..1.0), exps }
                })
                .collect(),
        )
    }

    fn eval(&self, z: &DVector<f64>) -> f64 {
        self.0.iter().map(|m| m.eval(z)).sum()
    }

    fn partial(&self, z: &DVector<f64>, c: usize) -> f64 {
        self.0.iter().map(|m| m.partial(z, c)).sum()
    }
}

/// `s(x, t) = 1 + a t + b sin(x)` times a random cubic polynomial in `z`, for
/// each component of `F`, `G` and for `B`. All derivatives are analytic.
#[derive(Debug, Clone)]
pub struct CubicSystem {
    n: usize,
    f: Vec<Poly>,
    g: Vec<Poly>,
    b: Poly,
    a_t: f64,
    b_x: f64,
}

impl CubicSystem {
    pub fn random(seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..n).map(|_| Poly::random(&mut rng, n, 4)).collect();
        let g = (0..n).map(|_| Poly::random(&mut rng, n, 4)).collect();
        let b = Poly::random(&mut rng, n, 5);
        Self { n, f, g, b, a_t: rng.gen_range(-0.5..0.5), b_x: rng.gen_range(-0.5..0.5) }
    }

    fn s(&self, x: f64, t: f64) -> f64 {
        1.0 + self.a_t * t + self.b_x * x.sin()
    }

    fn vec_of(&self, polys: &[Poly], z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n, polys.iter().map(|p| p.eval(z)))
    }

    fn jac_of(&self, polys: &[Poly], z: &DVector<f64>, s: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| s * polys[r].partial(z, c))
    }
}

impl BirkhoffSystem for CubicSystem {
    fn dim(&self) -> usize {
        self.n
    }
    fn time_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        self.vec_of(&self.f, z) * self.s(x, t)
    }
    fn space_form(&self, z: &DVector<f64>, x: f64, t: f64) -> DVector<f64> {
        self.vec_of(&self.g, z) * self.s(x, t)
    }
    fn birkhoffian(&self, z: &DVector<f64>, x: f64, t: f64) -> f64 {
        self.b.eval(z) * self.s(x, t)
    }
    fn time_form_jacobian(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        Some(self.jac_of(&self.f, z, self.s(x, t)))
    }
    fn space_form_jacobian(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DMatrix<f64>> {
        Some(self.jac_of(&self.g, z, self.s(x, t)))
    }
    fn time_form_dt(&self, z: &DVector<f64>, _x: f64, _t: f64) -> Option<DVector<f64>> {
        Some(self.vec_of(&self.f, z) * self.a_t)
    }
    fn space_form_dx(&self, z: &DVector<f64>, x: f64, _t: f64) -> Option<DVector<f64>> {
        Some(self.vec_of(&self.g, z) * (self.b_x * x.cos()))
    }
    fn birkhoffian_gradient(&self, z: &DVector<f64>, x: f64, t: f64) -> Option<DVector<f64>> {
        let s = self.s(x, t);
        Some(DVector::from_fn(self.n, |c, _| s * self.b.partial(z, c)))
    }
}

pub fn random_level(rng: &mut impl Rng, j: usize, nx: usize) -> StateLevel {
    StateLevel { j, z: (0..nx).map(|_| [0; 3].map(|_| rng.gen_range(-1.0..1.0))).collect() }
}

pub fn max_abs_diff(a: &StateLevel, b: &StateLevel) -> f64 {
    a.z.iter().flatten().zip(b.z.iter().flatten()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn flat(level: &StateLevel) -> DVector<f64> {
    DVector::from_iterator(3 * level.z.len(), level.z.iter().flatten().copied())
}

fn unflat(j: usize, v: &DVector<f64>) -> StateLevel {
    StateLevel { j, z: v.as_slice().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect() }
}

fn checkerboard(z: &[Node]) -> f64 {
    z.iter().enumerate().map(|(i, n)| if i % 2 == 0 { n[P] } else { -n[P] }).sum::<f64>() / z.len() as f64
}

/// Solves `lhs z = rhs`. For even `nx` the system is singular along the
/// p-checkerboard `r`; solve the bordered system `[lhs l; r^T/nx 0]` with the
/// checkerboard amplitude prescribed as `ratio * (old amplitude)` and `l` the
/// left singular vector of the zero singular value.
fn solve_with_gauge(lhs: DMatrix<f64>, rhs: DVector<f64>, old: &StateLevel, ratio: f64, j: usize) -> StateLevel {
    let nx = old.z.len();
    if nx % 2 == 1 {
        return unflat(j, &lhs.lu().solve(&rhs).expect("odd nx is nonsingular"));
    }
    let n = 3 * nx;
    let svd = lhs.clone().svd(true, false);
    let (imin, _) = svd.singular_values.argmin();
    let left = svd.u.expect("u requested").column(imin).into_owned();
    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&lhs);
    bordered.view_mut((0, n), (n, 1)).copy_from(&left);
    for i in 0..nx {
        bordered[(n, 3 * i + P)] = if i % 2 == 0 { 1.0 } else { -1.0 } / nx as f64;
    }
    let mut full = DVector::zeros(n + 1);
    full.rows_mut(0, n).copy_from(&rhs);
    full[n] = ratio * checkerboard(&old.z);
    let sol = bordered.lu().solve(&full).expect("bordered system is nonsingular");
    unflat(j, &sol.rows(0, n).into_owned())
}

/// One conformal box step, assembled densely from the three cell equations.
pub fn dense_box_step(alpha: f64, beta: f64, grid: &Grid, old: &StateLevel) -> StateLevel {
    let (nx, dt, dx) = (grid.nx, grid.dt, grid.dx());
    let a = (alpha * dt / 2.0).exp();
    let b = (beta * dx / 2.0).exp();
    let n = 3 * nx;
    let mut lhs: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut known: DMatrix<f64> = DMatrix::zeros(n, n);
    let (u, p, q) = (0, 1, 2);
    for i in 0..nx {
        let k = (i + 1) % nx;
        let (r1, r2, r3) = (3 * i, 3 * i + 1, 3 * i + 2);
        for (mat, lev) in [(&mut lhs, 1.0), (&mut known, -1.0)] {
            let w = if lev > 0.0 { a } else { 1.0 / a };
            for node in [i, k] {
                // (w p_new - p_old / w)/dt summed over the two nodes, halved
                mat[(r1, 3 * node + p)] += lev * w / (2.0 * dt);
                mat[(r1, 3 * node + u)] += 0.25;
                mat[(r2, 3 * node + u)] += lev / (2.0 * dt);
                mat[(r2, 3 * node + p)] -= w / 4.0;
            }
            // -(q_k / b - b q_i) averaged in time
            mat[(r1, 3 * k + q)] -= 1.0 / (2.0 * b * dx);
            mat[(r1, 3 * i + q)] += b / (2.0 * dx);
            mat[(r3, 3 * k + u)] += 1.0 / (2.0 * dx);
            mat[(r3, 3 * i + u)] -= 1.0 / (2.0 * dx);
            mat[(r3, 3 * k + q)] -= 1.0 / (4.0 * b);
            mat[(r3, 3 * i + q)] -= b / 4.0;
        }
    }
    let rhs = -(known * flat(old));
    solve_with_gauge(lhs, rhs, old, (-alpha * dt).exp(), old.j + 1)
}

/// Textbook Preissman box step for `M z_t + K z_x = L z` with constant
/// matrices: `M delta_t z[i+1/2] + K delta_x z[j+1/2] = L z[c]`.
pub fn preissman_step(m: &DMatrix<f64>, k: &DMatrix<f64>, l: &DMatrix<f64>, grid: &Grid, old: &StateLevel) -> StateLevel {
    let (nx, dt, dx) = (grid.nx, grid.dt, grid.dx());
    let n = 3 * nx;
    // z_avg_x(level) = (z_i + z_k)/2, etc.; build as operators on the flat level.
    let mut avg_x = DMatrix::zeros(n, n);
    let mut diff_x = DMatrix::zeros(n, n);
    for i in 0..nx {
        let kk = (i + 1) % nx;
        for c in 0..3 {
            avg_x[(3 * i + c, 3 * i + c)] += 0.5;
            avg_x[(3 * i + c, 3 * kk + c)] += 0.5;
            diff_x[(3 * i + c, 3 * kk + c)] += 1.0 / dx;
            diff_x[(3 * i + c, 3 * i + c)] -= 1.0 / dx;
        }
    }
    let blk = |a: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..nx {
            out.view_mut((3 * i, 3 * i), (3, 3)).copy_from(a);
        }
        out
    };
    let (bm, bk, bl) = (blk(m), blk(k), blk(l));
    // M (A z+ - A z-)/dt + K D (z+ + z-)/2 - L A (z+ + z-)/2 = 0
    let lhs = &bm * &avg_x / dt + &bk * &diff_x * 0.5 - &bl * &avg_x * 0.5;
    let rhs_op = &bm * &avg_x / dt - &bk * &diff_x * 0.5 + &bl * &avg_x * 0.5;
    let rhs = rhs_op * flat(old);
    solve_with_gauge(lhs, rhs, old, 1.0, old.j + 1)
}

/// Undamped string: `M z_t + K z_x = grad S` with `S = -(u^2 + p^2 - q^2)/2`.
pub fn undamped_string_matrices() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let l = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0]));
    (m, k, l)
}
