//! Banded LU factorisation with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` columns
//! on the right absorb the fill created by row interchanges.

use crate::error::PdeError;

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl);
        r * self.width + c + self.kl - r
    }

    #[inline]
    pub(crate) fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c + self.kl >= r && c <= r + self.ku, "entry outside band");
        let o = self.offset(r, c);
        self.data[o] += v;
    }

    #[cfg(test)]
    fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            0.0
        } else {
            self.data[self.offset(r, c)]
        }
    }

    /// Factorises in place. The returned object solves `A x = b`.
    pub(crate) fn factor(mut self) -> Result<BandLu, PdeError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.offset(i, i)].abs();
            for r in i + 1..=last_row {
                let v = self.data[self.offset(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(PdeError::Singular(i));
            }
            pivots[i] = p;
            if p != i {
                let len = last_col - i + 1;
                let oi = self.offset(i, i);
                let op = self.offset(p, i);
                for t in 0..len {
                    self.data.swap(oi + t, op + t);
                }
            }
            let oi = self.offset(i, i);
            let piv = self.data[oi];
            let len = last_col - i;
            for r in i + 1..=last_row {
                let or = self.offset(r, i);
                let factor = self.data[or] / piv;
                self.data[or] = factor;
                if factor == 0.0 {
                    continue;
                }
                // rows i and r never overlap in storage since r > i
                let (head, tail) = self.data.split_at_mut(or);
                let src = &head[oi + 1..oi + 1 + len];
                let dst = &mut tail[1..1 + len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= factor * s;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi != 0.0 {
                for r in i + 1..=(i + m.kl).min(n - 1) {
                    b[r] -= m.data[m.offset(r, i)] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + m.kl + m.ku).min(n - 1);
            let oi = m.offset(i, i);
            let mut s = b[i];
            for (t, c) in (i + 1..=last_col).enumerate() {
                s -= m.data[oi + 1 + t] * b[c];
            }
            b[i] = s / m.data[oi];
        }
    }
}
