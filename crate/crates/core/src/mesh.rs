//! Periodic, uniform, cell-centred grids in one or two space dimensions.
//!
//! Cells are numbered `c = i + nx * j`. Every neighbour lookup wraps around,
//! so all stencils built on top of the mesh are translation invariant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// One space dimension (slab).
    Slab,
    /// Two space dimensions (planar).
    Planar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    geometry: Geometry,
    x_bounds: (f64, f64),
    y_bounds: (f64, f64),
    nx: usize,
    ny: usize,
}

impl SpatialMesh {
    pub fn slab(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        check_axis("x", x_min, x_max, nx)?;
        Ok(Self {
            geometry: Geometry::Slab,
            x_bounds: (x_min, x_max),
            y_bounds: (0.0, 1.0),
            nx,
            ny: 1,
        })
    }

    pub fn planar(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        check_axis("x", x.0, x.1, nx)?;
        check_axis("y", y.0, y.1, ny)?;
        Ok(Self {
            geometry: Geometry::Planar,
            x_bounds: x,
            y_bounds: y,
            nx,
            ny,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_planar(&self) -> bool {
        self.geometry == Geometry::Planar
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        self.x_bounds
    }

    pub fn y_bounds(&self) -> (f64, f64) {
        self.y_bounds
    }

    pub fn dx(&self) -> f64 {
        (self.x_bounds.1 - self.x_bounds.0) / self.nx as f64
    }

    /// Spacing along y; equals 1 for a slab so that cell volumes reduce to `dx`.
    pub fn dy(&self) -> f64 {
        match self.geometry {
            Geometry::Slab => 1.0,
            Geometry::Planar => (self.y_bounds.1 - self.y_bounds.0) / self.ny as f64,
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Total length (slab) or area (planar) of the domain.
    pub fn measure(&self) -> f64 {
        self.cell_volume() * self.n_cells() as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    /// Cell centre of cell `c`; the y coordinate is 0 for a slab.
    pub fn center(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.coords(c);
        let x = self.x_bounds.0 + (i as f64 + 0.5) * self.dx();
        let y = match self.geometry {
            Geometry::Slab => 0.0,
            Geometry::Planar => self.y_bounds.0 + (j as f64 + 0.5) * self.dy(),
        };
        (x, y)
    }

    pub fn centers_x(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| self.x_bounds.0 + (i as f64 + 0.5) * self.dx())
            .collect()
    }

    /// Periodic neighbour offset by `(di, dj)` cells.
    pub fn shift(&self, c: usize, di: isize, dj: isize) -> usize {
        let (i, j) = self.coords(c);
        let i = (i as isize + di).rem_euclid(self.nx as isize) as usize;
        let j = (j as isize + dj).rem_euclid(self.ny as isize) as usize;
        self.index(i, j)
    }

    pub fn east(&self, c: usize) -> usize {
        self.shift(c, 1, 0)
    }

    pub fn west(&self, c: usize) -> usize {
        self.shift(c, -1, 0)
    }

    pub fn north(&self, c: usize) -> usize {
        self.shift(c, 0, 1)
    }

    pub fn south(&self, c: usize) -> usize {
        self.shift(c, 0, -1)
    }

    /// Same geometry with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        match self.geometry {
            Geometry::Slab => Self::slab(self.x_bounds.0, self.x_bounds.1, self.nx * factor),
            Geometry::Planar => Self::planar(
                self.x_bounds,
                self.y_bounds,
                self.nx * factor,
                self.ny * factor,
            ),
        }
    }
}

fn check_axis(name: &str, lo: f64, hi: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid(format!(
            "{name}: cell count must be positive"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(format!(
            "{name}: bounds ({lo}, {hi}) must be finite and increasing"
        )));
    }
    Ok(())
}
