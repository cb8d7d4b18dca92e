//! LU factorization with partial pivoting for "almost banded" matrices: a
//! band of `kl` sub- and `ku` super-diagonals plus a dense border made of the
//! last `nb` columns. Periodic wraps of banded stencils land in that border.
//!
//! Pivoting widens the upper band to `kl + ku` and fills the border, both of
//! which are stored; nothing else fills in.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AlmostBanded {
    n: usize,
    kl: usize,
    ku: usize,
    nb: usize,
    width: usize,
    band: Vec<f64>,
    border: Vec<f64>,
}

impl AlmostBanded {
    pub fn zeros(n: usize, kl: usize, ku: usize, nb: usize) -> Self {
        assert!(nb <= n && nb >= 1 && kl + 1 >= nb, "border must fit within the lower band");
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            nb,
            width,
            band: vec![0.0; n * width],
            border: vec![0.0; n * nb],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn first_border(&self) -> usize {
        self.n - self.nb
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        if c >= self.first_border() {
            return Some(self.n * self.width + r * self.nb + (c - self.first_border()));
        }
        let lo = r as isize - self.kl as isize;
        let off = c as isize - lo;
        (off >= 0 && (off as usize) < self.width).then(|| r * self.width + off as usize)
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        match self.slot(r, c) {
            Some(s) if s >= self.n * self.width => self.border[s - self.n * self.width],
            Some(s) => self.band[s],
            None => 0.0,
        }
    }

    #[inline]
    fn entry(&mut self, r: usize, c: usize) -> &mut f64 {
        let total = self.n * self.width;
        match self.slot(r, c) {
            Some(s) if s >= total => &mut self.border[s - total],
            Some(s) => &mut self.band[s],
            None => panic!("entry ({r}, {c}) lies outside the stored structure"),
        }
    }

    /// Adds `v` at `(r, c)`. Panics if the position is outside the band and
    /// border (before fill-in: `c <= r + ku`).
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            c >= self.first_border() || (c + self.kl >= r && c <= r + self.ku),
            "entry ({r}, {c}) outside the initial band"
        );
        *self.entry(r, c) += v;
    }

    /// Zeroes a whole row.
    pub fn clear_row(&mut self, r: usize) {
        let w = self.width;
        self.band[r * w..(r + 1) * w].fill(0.0);
        let nb = self.nb;
        self.border[r * nb..(r + 1) * nb].fill(0.0);
    }

    fn max_abs(&self) -> f64 {
        self.band.iter().chain(self.border.iter()).fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Factorizes in place. Fails when a pivot falls below
    /// `n * eps * max|A|`.
    pub fn factor(mut self) -> Result<AlmostBandedLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let fb = self.first_border();
        let threshold = n as f64 * f64::EPSILON * self.max_abs();
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * kl.max(1)];

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (mut piv, mut best) = (k, self.get(k, k).abs());
            for r in (k + 1)..=last {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > threshold) {
                return Err(Error::Usage(format!("zero pivot in column {k}")));
            }
            pivots[k] = piv;
            let band_end = (k + reach).min(fb.saturating_sub(1));
            if piv != k {
                for c in k..=band_end.max(k) {
                    if c < fb {
                        let a = self.get(k, c);
                        let b = self.get(piv, c);
                        *self.entry(k, c) = b;
                        *self.entry(piv, c) = a;
                    }
                }
                for c in fb..n {
                    let a = self.get(k, c);
                    let b = self.get(piv, c);
                    *self.entry(k, c) = b;
                    *self.entry(piv, c) = a;
                }
            }
            let pivot = self.get(k, k);
            for r in (k + 1)..=last {
                let m = self.get(r, k) / pivot;
                multipliers[k * kl + (r - k - 1)] = m;
                if m == 0.0 {
                    continue;
                }
                *self.entry(r, k) = 0.0;
                for c in (k + 1)..=band_end {
                    if c < fb {
                        let u = self.get(k, c);
                        *self.entry(r, c) -= m * u;
                    }
                }
                for c in fb.max(k + 1)..n {
                    let u = self.get(k, c);
                    *self.entry(r, c) -= m * u;
                }
            }
        }
        Ok(AlmostBandedLu { a: self, pivots, multipliers })
    }
}

#[derive(Debug, Clone)]
pub struct AlmostBandedLu {
    a: AlmostBanded,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl AlmostBandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        assert_eq!(rhs.len(), n);
        let fb = a.first_border();
        let reach = kl + a.ku;
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for r in (k + 1)..=(k + kl).min(n - 1) {
                b[r] -= self.multipliers[k * kl + (r - k - 1)] * bk;
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in (k + 1)..=(k + reach).min(n - 1) {
                if c < fb {
                    s -= a.get(k, c) * x[c];
                }
            }
            for c in fb.max(k + 1)..n {
                s -= a.get(k, c) * x[c];
            }
            x[k] = s / a.get(k, k);
        }
        x
    }
}
