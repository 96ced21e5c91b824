use serde::Serialize;

use crate::error::PdeError;
use crate::model::RectDomain;

pub const MIN_NODES: usize = 8;

/// Uniform tensor grid over the closed rectangle, boundary nodes included.
///
/// Nodes are indexed `(i, j)` with `i ∈ 0..=nw+1` along w and
/// `j ∈ 0..=ny+1` along y; fields are stored with w varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub nw: usize,
    pub ny: usize,
    pub hw: f64,
    pub hy: f64,
    pub domain: RectDomain,
}

pub fn build_grid(domain: &RectDomain, nw: usize, ny: usize) -> Result<Grid, PdeError> {
    if nw < MIN_NODES || ny < MIN_NODES {
        return Err(PdeError::GridTooSmall { nw, ny });
    }
    let domain = RectDomain::new(domain.l, domain.y1, domain.y2)?;
    Ok(Grid {
        nw,
        ny,
        hw: domain.l / (nw + 1) as f64,
        hy: (domain.y2 - domain.y1) / (ny + 1) as f64,
        domain,
    })
}

impl Grid {
    /// Nodes per row, boundary included.
    pub fn row_len(&self) -> usize {
        self.nw + 2
    }

    pub fn col_len(&self) -> usize {
        self.ny + 2
    }

    pub fn len(&self) -> usize {
        self.row_len() * self.col_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.row_len() + i
    }

    /// w-coordinate of column `i`; the last column sits exactly on L/2.
    pub fn w(&self, i: usize) -> f64 {
        if i == self.nw + 1 {
            self.domain.half_width()
        } else {
            -self.domain.half_width() + i as f64 * self.hw
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny + 1 {
            self.domain.y2
        } else {
            self.domain.y1 + j as f64 * self.hy
        }
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nw + 1 || j == self.ny + 1
    }

    pub fn boundary_count(&self) -> usize {
        (0..self.col_len())
            .flat_map(|j| (0..self.row_len()).map(move |i| (i, j)))
            .filter(|&(i, j)| self.is_boundary(i, j))
            .count()
    }

    /// All node coordinates in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.col_len()).flat_map(move |j| (0..self.row_len()).map(move |i| (i, j, self.w(i), self.y(j))))
    }

    /// Locates the cell containing `(w, y)` and the local coordinates in it.
    pub(crate) fn locate(&self, w: f64, y: f64) -> Result<(usize, usize, f64, f64), PdeError> {
        let tol = 1e-12 * (1.0 + self.domain.l + self.domain.y2);
        let hw2 = self.domain.half_width();
        if !(w >= -hw2 - tol && w <= hw2 + tol && y >= self.domain.y1 - tol && y <= self.domain.y2 + tol) {
            return Err(PdeError::OutsideDomain { w, y });
        }
        let sw = ((w + hw2) / self.hw).clamp(0.0, (self.nw + 1) as f64);
        let sy = ((y - self.domain.y1) / self.hy).clamp(0.0, (self.ny + 1) as f64);
        let i = (sw.floor() as usize).min(self.nw);
        let j = (sy.floor() as usize).min(self.ny);
        Ok((i, j, sw - i as f64, sy - j as f64))
    }

    /// Bilinear interpolation of a node field.
    pub fn interpolate(&self, field: &[f64], w: f64, y: f64) -> Result<f64, PdeError> {
        let (i, j, tw, ty) = self.locate(w, y)?;
        let f = |a: usize, b: usize| field[self.idx(a, b)];
        Ok((1.0 - ty) * ((1.0 - tw) * f(i, j) + tw * f(i + 1, j))
            + ty * ((1.0 - tw) * f(i, j + 1) + tw * f(i + 1, j + 1)))
    }
}
